"""
Download, cache, verify and parse catalog datasets.

Cache layout: ``<cache_dir>/<name>/<version>/<archive>`` plus a ``verified``
marker (holding the archive digest) written only after the digest matched.
Archives are verified on every load; nothing is parsed from bytes whose
digest differs from the catalog.
"""
import logging
import os
import shutil
import tarfile
import threading
import time
import urllib.error
import urllib.request
import zipfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterator, Optional, Union

import validation
from core.dataset import Dataset
from formats.codec import read
from registry import config
from registry.catalog import DatasetDescriptor, record_digest
from utils import md5_file

logger = logging.getLogger(__name__)

VERIFIED_MARKER = 'verified'
LOCK_FILE = '.lock'
LOCK_POLL_S = 0.1

VERSION = 'version'


class DownloadFailure(RuntimeError):
    pass


class ChecksumMismatchError(RuntimeError):
    def __init__(self, what: str, expected: str, actual: str):
        self.expected = expected
        self.actual = actual
        super().__init__(
            f'checksum mismatch for {what}: expected {expected}, '
            f'got {actual}')


class OfflineMissError(RuntimeError):
    pass


class UnpinnedChecksumError(validation.ValidationError):
    pass


class ManualDownloadError(RuntimeError):
    pass


_locks_guard = threading.Lock()
_locks: dict = {}


def _thread_lock(key: tuple) -> threading.Lock:
    with _locks_guard:
        return _locks.setdefault(key, threading.Lock())


@contextmanager
def single_flight(directory: Path, key: tuple,
                  timeout_s: Optional[int] = None) -> Iterator[None]:
    """
    Hold the (name, version) slot: one thread per process via a lock, one
    process per cache via an exclusive lock file.
    """
    timeout_s = timeout_s or config.lock_timeout_s()
    directory.mkdir(parents=True, exist_ok=True)
    lock_path = directory / LOCK_FILE
    with _thread_lock(key):
        deadline = time.monotonic() + timeout_s
        while True:
            try:
                fd = os.open(lock_path, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
                break
            except FileExistsError:
                if time.monotonic() > deadline:
                    raise DownloadFailure(
                        f'timed out waiting for {lock_path}; remove it if '
                        'no other download is running')
                time.sleep(LOCK_POLL_S)
        try:
            os.write(fd, str(os.getpid()).encode())
            os.close(fd)
            yield
        finally:
            try:
                os.remove(lock_path)
            except FileNotFoundError:
                pass


def dataset_dir(desc: DatasetDescriptor,
                cache_dir: Optional[Union[str, os.PathLike]] = None) -> Path:
    root = Path(cache_dir) if cache_dir else config.cache_dir()
    return root / desc.name / desc.version


def _download(url: str, target: Path) -> None:
    """Copy ``url`` to ``target`` with retry and backoff."""
    retries = config.download_retries()
    backoff_ms = config.retry_ms()
    timeout = config.timeout_s()
    tmp = target.with_name(target.name + '.part')
    last_error: Optional[Exception] = None
    for attempt in range(1, retries + 1):
        try:
            logger.info('downloading %s (attempt %d/%d)', url, attempt,
                        retries)
            with urllib.request.urlopen(url, timeout=timeout) as resp, \
                    open(tmp, 'wb') as out:
                shutil.copyfileobj(resp, out)
            os.replace(tmp, target)
            return
        except (urllib.error.URLError, OSError) as err:
            last_error = err
            logger.warning('download attempt %d failed: %s', attempt, err)
            if tmp.exists():
                tmp.unlink()
            if attempt < retries:
                time.sleep(backoff_ms / 1000.0)
    raise DownloadFailure(
        f'failed to download {url} after {retries} attempts: {last_error}'
    ) from last_error


def _marker_digest(directory: Path) -> Optional[str]:
    marker = directory / VERIFIED_MARKER
    if not marker.exists():
        return None
    return marker.read_text(encoding='utf-8').strip() or None


def _manual_message(desc: DatasetDescriptor, directory: Path) -> str:
    return (f'{desc.name}/{desc.version} cannot be downloaded '
            f'automatically. {desc.manual.strip()} '
            f'Cache directory: {directory / desc.archive}. '
            'Then run `download --pin` to record its digest.')


def _verify(desc: DatasetDescriptor, archive: Path, pin: bool,
            catalog_path) -> DatasetDescriptor:
    actual = md5_file(archive)
    if desc.pinned:
        if actual != desc.md5:
            raise ChecksumMismatchError(archive.name, desc.md5, actual)
        return desc
    if not pin:
        raise UnpinnedChecksumError(
            f'{desc.name}/{desc.version} has no published digest; rerun '
            f'with pin to record {actual}')
    return record_digest(desc, actual, catalog_path)


def ensure_archive(desc: DatasetDescriptor,
                   cache_dir: Optional[Union[str, os.PathLike]] = None,
                   offline: bool = False, pin: bool = False,
                   catalog_path=None) -> tuple:
    """
    Make sure a verified copy of the archive is cached.

    Returns:
        (archive path, descriptor with its digest)

    Raises:
        ManualDownloadError: The source is license-gated and not cached.
        UnpinnedChecksumError: No digest is known and ``pin`` is false.
        OfflineMissError: ``offline`` and no cached copy.
        DownloadFailure: All download attempts failed.
        ChecksumMismatchError: The archive digest differs from the catalog.
    """
    directory = dataset_dir(desc, cache_dir)
    archive = directory / desc.archive
    if not desc.pinned and not pin and not desc.is_manual:
        raise UnpinnedChecksumError(
            f'{desc.name}/{desc.version} has no published digest; '
            'use pin to record one on first download')
    with single_flight(directory, desc.key):
        if not archive.exists():
            (directory / VERIFIED_MARKER).unlink(missing_ok=True)
            if desc.is_manual:
                raise ManualDownloadError(_manual_message(desc, directory))
            if offline:
                raise OfflineMissError(
                    f'{desc.name}/{desc.version} is not cached in '
                    f'{directory} and offline mode is on')
            _download(desc.url, archive)
        try:
            desc = _verify(desc, archive, pin, catalog_path)
        except ChecksumMismatchError:
            (directory / VERIFIED_MARKER).unlink(missing_ok=True)
            if not desc.is_manual:
                archive.unlink()
            raise
        if _marker_digest(directory) != desc.md5:
            (directory / VERIFIED_MARKER).write_text(desc.md5 + '\n',
                                                     encoding='utf-8')
    return archive, desc


@contextmanager
def _open_member(archive: Path, member: Optional[str]):
    if not member:
        yield archive
    elif zipfile.is_zipfile(archive):
        with zipfile.ZipFile(archive) as zf:
            try:
                with zf.open(member) as stream:
                    yield stream
            except KeyError:
                raise validation.ValidationError(
                    f'{archive.name} has no member {member}')
    elif tarfile.is_tarfile(archive):
        with tarfile.open(archive) as tf:
            try:
                stream = tf.extractfile(member)
            except KeyError:
                stream = None
            if stream is None:
                raise validation.ValidationError(
                    f'{archive.name} has no file member {member}')
            with stream:
                yield stream
    else:
        raise validation.ValidationError(
            f'{archive.name} is not a zip or tar archive')


def fetch_and_load(desc: DatasetDescriptor,
                   cache_dir: Optional[Union[str, os.PathLike]] = None,
                   offline: bool = False, pin: bool = False,
                   catalog_path=None) -> Dataset:
    """
    Fetch (or reuse) the verified archive for ``desc`` and parse it.

    The load step is named after the descriptor's operation with the version
    as its only param, so a recorded pipeline can resolve it again.
    """
    archive, desc = ensure_archive(desc, cache_dir, offline, pin,
                                   catalog_path)
    with _open_member(archive, desc.extract_path) as source:
        ds = read(source, desc.format, operation=desc.operation,
                  params={VERSION: desc.version})
    logger.info('loaded %s/%s: %d interactions', desc.name, desc.version,
                len(ds))
    return ds
