"""
The dataset catalog: built-in descriptors shipped in ``catalog.yml``, with
an optional user catalog laid over them.
"""
import logging
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Mapping, Optional, Union
from urllib.parse import urlparse

import yaml

import validation
from formats.spec import FormatSpec, from_dict as format_from_dict
from registry import config
from utils import atomic_write

logger = logging.getLogger(__name__)

SHIPPED_CATALOG = Path(__file__).with_name('catalog.yml')
DATASETS = 'datasets'

# Catalog entry fields
NAME = 'name'
VERSION = 'version'
OPERATION = 'operation'
URL = 'url'
ARCHIVE = 'archive'
MD5 = 'md5'
EXTRACT_PATH = 'extract_path'
FORMAT = 'format'
CITATION = 'citation'
MANUAL = 'manual'

REQUIRED_FIELDS = [NAME, VERSION, OPERATION, URL, FORMAT]
ENTRY_FIELDS = [NAME, VERSION, OPERATION, URL, ARCHIVE, MD5, EXTRACT_PATH,
                FORMAT, CITATION, MANUAL]

CatalogPath = Union[str, os.PathLike]


class UnknownDatasetError(validation.ValidationError):
    pass


class UnknownVersionError(validation.ValidationError):
    pass


@dataclass(frozen=True)
class DatasetDescriptor:
    name: str
    version: str
    operation: str
    url: str
    format: FormatSpec
    md5: Optional[str] = None
    archive: Optional[str] = None
    extract_path: Optional[str] = None
    citation: str = ''
    manual: Optional[str] = None

    def __post_init__(self):
        for name in (NAME, VERSION, OPERATION, URL):
            validation.validate_non_empty_string(getattr(self, name), name)
        if self.md5 is not None:
            validation.validate_hex_digest(self.md5, MD5)
        if not self.archive:
            segment = os.path.basename(urlparse(self.url).path)
            object.__setattr__(self, 'archive', segment or self.name)

    @property
    def key(self) -> tuple:
        return (self.name, self.version)

    @property
    def pinned(self) -> bool:
        return self.md5 is not None

    @property
    def is_manual(self) -> bool:
        return bool(self.manual)

    def with_md5(self, md5: str) -> 'DatasetDescriptor':
        return DatasetDescriptor(
            self.name, self.version, self.operation, self.url, self.format,
            md5, self.archive, self.extract_path, self.citation, self.manual)

    def to_dict(self) -> dict:
        rec = {
            NAME: self.name,
            VERSION: self.version,
            OPERATION: self.operation,
            URL: self.url,
            ARCHIVE: self.archive,
            MD5: self.md5,
            FORMAT: self.format.to_dict(),
        }
        if self.extract_path:
            rec[EXTRACT_PATH] = self.extract_path
        if self.citation:
            rec[CITATION] = self.citation
        if self.manual:
            rec[MANUAL] = self.manual
        return rec


def descriptor_from_dict(data: Mapping) -> DatasetDescriptor:
    if not isinstance(data, Mapping):
        raise validation.ValidationError('catalog entry must be a mapping')
    data = dict(data)
    validation.validate_required_fields(data, REQUIRED_FIELDS)
    validation.validate_no_extra_fields(data, ENTRY_FIELDS)
    return DatasetDescriptor(
        name=str(data[NAME]).lower(),
        version=str(data[VERSION]),
        operation=data[OPERATION],
        url=data[URL],
        format=format_from_dict(data[FORMAT]),
        md5=data.get(MD5),
        archive=data.get(ARCHIVE),
        extract_path=data.get(EXTRACT_PATH),
        citation=data.get(CITATION) or '',
        manual=data.get(MANUAL),
    )


def read_catalog(path: CatalogPath) -> list:
    """Descriptors of one catalog file, in file order."""
    try:
        with open(path, encoding='utf-8') as f:
            doc = yaml.safe_load(f) or {}
    except yaml.YAMLError as err:
        raise validation.ValidationError(
            f'catalog {path} is not valid YAML: {err}') from err
    if not isinstance(doc, dict):
        raise validation.ValidationError(f'catalog {path} must be a mapping')
    validation.validate_no_extra_fields(doc, [DATASETS])
    entries = doc.get(DATASETS) or []
    descriptors = []
    seen = set()
    for index, entry in enumerate(entries, start=1):
        try:
            desc = descriptor_from_dict(entry)
        except validation.ValidationError as err:
            raise validation.ValidationError(
                f'catalog {path} entry {index}: {err}') from err
        if desc.key in seen:
            raise validation.ValidationError(
                f'catalog {path} lists {desc.name}/{desc.version} twice')
        seen.add(desc.key)
        descriptors.append(desc)
    return descriptors


def load_catalog(user_path: Optional[CatalogPath] = None) -> dict:
    """
    (name, version) -> descriptor. Entries of the user catalog replace
    shipped entries with the same key.
    """
    catalog = {d.key: d for d in read_catalog(SHIPPED_CATALOG)}
    user_path = Path(user_path) if user_path else config.user_catalog_path()
    if user_path.exists():
        for desc in read_catalog(user_path):
            catalog[desc.key] = desc
        logger.debug('merged user catalog %s', user_path)
    return catalog


def list_datasets(user_path: Optional[CatalogPath] = None) -> list:
    """All descriptors, ordered by name then catalog order of versions."""
    descriptors = list(load_catalog(user_path).values())
    return sorted(descriptors, key=lambda d: d.name)


def versions(name: str, user_path: Optional[CatalogPath] = None) -> list:
    return [d.version for d in list_datasets(user_path)
            if d.name == str(name).lower()]


def resolve(name: str, version: str,
            user_path: Optional[CatalogPath] = None) -> DatasetDescriptor:
    """
    Raises:
        UnknownDatasetError: No entry has this name.
        UnknownVersionError: The name exists but not this version; the
            message lists the available versions.
    """
    catalog = load_catalog(user_path)
    key = (str(name).lower(), str(version))
    if key in catalog:
        return catalog[key]
    available = [d.version for d in catalog.values() if d.name == key[0]]
    if not available:
        raise UnknownDatasetError(f'No such dataset: {name}')
    raise UnknownVersionError(
        f'No version {version} of {name}; available: '
        f'{", ".join(available)}')


def resolve_operation(operation: str, version: str,
                      user_path: Optional[CatalogPath] = None
                      ) -> DatasetDescriptor:
    """Look a descriptor up by its pipeline load operation name."""
    for desc in load_catalog(user_path).values():
        if desc.operation.lower() == str(operation).lower():
            return resolve(desc.name, version, user_path)
    raise UnknownDatasetError(f'No such dataset operation: {operation}')


def operation_names(user_path: Optional[CatalogPath] = None) -> list:
    return sorted({d.operation for d in load_catalog(user_path).values()})


def record_digest(desc: DatasetDescriptor, md5: str,
                  user_path: Optional[CatalogPath] = None
                  ) -> DatasetDescriptor:
    """Pin ``md5`` for ``desc`` in the user catalog; returns the pinned
    descriptor."""
    validation.validate_hex_digest(md5, MD5)
    path = Path(user_path) if user_path else config.user_catalog_path()
    entries = read_catalog(path) if path.exists() else []
    pinned = desc.with_md5(md5)
    entries = [d for d in entries if d.key != desc.key] + [pinned]
    with atomic_write(path) as f:
        yaml.safe_dump({DATASETS: [d.to_dict() for d in entries]}, f,
                       sort_keys=False, allow_unicode=True)
    logger.info('pinned %s/%s md5 %s in %s', desc.name, desc.version, md5,
                path)
    return pinned
