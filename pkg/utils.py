# Small utility helpers used across the project.

import contextlib
import hashlib
import os
import tempfile
from pathlib import Path
from typing import Any, Iterator, Union

PathLike = Union[str, os.PathLike]

CHUNK_SIZE = 1 << 20


def format_decimal(value: float) -> str:
    """Shortest text that round-trips ``value``, without a trailing '.0'.

    Examples:
        >>> format_decimal(5.0)
        '5'
        >>> format_decimal(3.25)
        '3.25'
    """
    text = repr(float(value))
    if text.endswith('.0'):
        text = text[:-2]
    return text


def md5_file(path: PathLike) -> str:
    """MD5 hex digest of a file, read in chunks."""
    digest = hashlib.md5()
    with open(path, 'rb') as f:
        for chunk in iter(lambda: f.read(CHUNK_SIZE), b''):
            digest.update(chunk)
    return digest.hexdigest()


@contextlib.contextmanager
def atomic_write(path: PathLike, mode: str = 'w',
                 encoding: str = 'utf-8') -> Iterator[Any]:
    """
    Open a temporary file beside ``path`` and rename it over ``path`` only
    when the block exits cleanly. On error the temporary file is removed, so
    readers never see a half-written file.
    """
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(
        prefix=f'.{target.name}.', suffix='.tmp', dir=target.parent)
    try:
        if 'b' in mode:
            f = os.fdopen(fd, mode)
        else:
            f = os.fdopen(fd, mode, encoding=encoding, newline='')
        with f:
            yield f
        os.replace(tmp_name, target)
    except BaseException:
        with contextlib.suppress(FileNotFoundError):
            os.remove(tmp_name)
        raise
