"""
Framework exporters: write train/test(/val) splits into a directory laid out
the way a recommendation framework expects, plus a ``manifest.yml``.

Profiles are data, shipped in ``profiles.yml`` next to this module.
"""
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Mapping, Optional, Union

import yaml

import validation
from core.dataset import (
    Dataset, ProvenanceStep, append_history,
    EXPORT, USER, ITEM, RATING, TIMESTAMP, FIELDS, TRAIN, TEST, VAL,
)
from formats.codec import (
    IoFailure, SchemaMismatchError, check_id, write_lines,
)
from utils import atomic_write, format_decimal, md5_file

logger = logging.getLogger(__name__)

DEFAULT_PROFILES_FILE = Path(__file__).with_name('profiles.yml')
MANIFEST_FILE = 'manifest.yml'

# Export order of the split files
EXPORT_SPLITS = [TRAIN, TEST, VAL]

OUTPUT_PATH = 'output_path'

PROFILE_FIELDS = ['framework', 'extension', 'sep', 'header', 'columns',
                  'requires', 'header_names', 'file_names']


@dataclass(frozen=True)
class ExportProfile:
    framework: str
    extension: str
    sep: str = '\t'
    header: bool = False
    columns: tuple = (USER, ITEM, RATING)
    requires: tuple = ()
    header_names: Mapping[str, str] = field(default_factory=dict)
    file_names: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        validation.validate_non_empty_string(self.framework, 'framework')
        validation.validate_non_empty_string(self.extension, 'extension')
        if not isinstance(self.sep, str) or not self.sep or '\n' in self.sep:
            raise validation.ValidationError(
                'sep must be a non-empty string without newlines')
        validation.validate_type(self.header, 'header', bool)
        columns = tuple(self.columns)
        if columns[:2] != (USER, ITEM):
            raise validation.ValidationError(
                'columns must start with user, item')
        for name in columns + tuple(self.requires):
            validation.validate_enum(name, 'column', FIELDS)
        if len(set(columns)) != len(columns):
            raise validation.ValidationError('columns must be distinct')
        validation.validate_no_extra_fields(dict(self.file_names),
                                            EXPORT_SPLITS)
        validation.validate_no_extra_fields(dict(self.header_names),
                                            list(FIELDS))
        object.__setattr__(self, 'columns', columns)
        object.__setattr__(self, 'requires', tuple(self.requires))
        object.__setattr__(self, 'header_names', dict(self.header_names))
        names = {split: split for split in EXPORT_SPLITS}
        names.update(self.file_names)
        object.__setattr__(self, 'file_names', names)

    def file_name(self, split: str) -> str:
        return f'{self.file_names[split]}.{self.extension}'

    def columns_for(self, has_ratings: bool, has_timestamps: bool) -> tuple:
        present = {USER: True, ITEM: True, RATING: has_ratings,
                   TIMESTAMP: has_timestamps}
        return tuple(c for c in self.columns if present[c])

    def header_line(self, columns: tuple) -> str:
        return self.sep.join(self.header_names.get(c, c) for c in columns)


@dataclass(frozen=True)
class ExportedFile:
    split: str
    path: str
    md5: str
    interactions: int

    def to_dict(self) -> dict:
        return {'split': self.split, 'path': self.path, 'md5': self.md5,
                'interactions': self.interactions}


@dataclass(frozen=True)
class ExportManifest:
    """Written files plus the exported datasets with their export steps."""
    framework: str
    out_dir: str
    files: tuple
    datasets: Mapping[str, Dataset]

    @property
    def paths(self) -> list:
        return [os.path.join(self.out_dir, f.path) for f in self.files]

    def to_dict(self) -> dict:
        return {'framework': self.framework,
                'files': [f.to_dict() for f in self.files]}


def profile_from_dict(data: Mapping) -> ExportProfile:
    if not isinstance(data, Mapping):
        raise validation.ValidationError('profile must be a mapping')
    validation.validate_no_extra_fields(dict(data), PROFILE_FIELDS)
    validation.validate_required_fields(dict(data), ['framework',
                                                     'extension'])
    return ExportProfile(**dict(data))


def _read_profiles(path: Union[str, os.PathLike]) -> list:
    try:
        with open(path, encoding='utf-8') as f:
            doc = yaml.safe_load(f) or {}
    except OSError as err:
        raise IoFailure(f'cannot read profiles {path}: {err}') from err
    except yaml.YAMLError as err:
        raise validation.ValidationError(
            f'profiles file {path} is not valid YAML: {err}') from err
    if not isinstance(doc, dict) or not isinstance(doc.get('profiles'), list):
        raise validation.ValidationError(
            f'profiles file {path} must hold a "profiles" list')
    return [profile_from_dict(entry) for entry in doc['profiles']]


def load_profiles(path: Optional[Union[str, os.PathLike]] = None) -> dict:
    """
    Shipped profiles keyed by lower-cased framework name, with the entries of
    ``path`` (if given) replacing or adding to them.
    """
    profiles = {p.framework.lower(): p
                for p in _read_profiles(DEFAULT_PROFILES_FILE)}
    if path is not None:
        for p in _read_profiles(path):
            profiles[p.framework.lower()] = p
    return profiles


def resolve_profile(framework: str,
                    profiles: Optional[Mapping] = None) -> ExportProfile:
    """Case-insensitive lookup of an export profile."""
    profiles = profiles if profiles is not None else load_profiles()
    if not isinstance(framework, str) or \
            framework.lower() not in profiles:
        known = ', '.join(sorted(p.framework for p in profiles.values()))
        raise validation.ValidationError(
            f'No such export profile: {framework} (known: {known})')
    return profiles[framework.lower()]


def framework_names() -> list:
    return sorted(p.framework for p in load_profiles().values())


def _schema(datasets: Mapping[str, Dataset]) -> tuple:
    """Shared (has_ratings, has_timestamps) of the non-empty datasets."""
    flags = {(d.has_ratings, d.has_timestamps)
             for d in datasets.values() if len(d)}
    if len(flags) > 1:
        raise SchemaMismatchError('splits carry different fields')
    return flags.pop() if flags else (False, False)


def _check_requirements(profile: ExportProfile, has_ratings: bool,
                        has_timestamps: bool) -> None:
    carried = {RATING: has_ratings, TIMESTAMP: has_timestamps}
    for name in profile.requires:
        if not carried.get(name, True):
            raise SchemaMismatchError(
                f'{profile.framework} export requires {name}s')


def _rows(d: Dataset, profile: ExportProfile,
          columns: tuple) -> Iterator[str]:
    if profile.header:
        yield profile.header_line(columns) + '\n'
    for x in d:
        check_id(x.user, profile.sep, USER)
        check_id(x.item, profile.sep, ITEM)
        values = []
        for c in columns:
            if c == USER:
                values.append(x.user)
            elif c == ITEM:
                values.append(x.item)
            elif c == RATING:
                values.append(format_decimal(x.rating))
            else:
                values.append(str(x.timestamp))
        yield profile.sep.join(values) + '\n'


def export_split(train: Dataset, test: Dataset, val: Optional[Dataset],
                 profile: ExportProfile,
                 out_dir: Union[str, os.PathLike]) -> ExportManifest:
    """
    Write train/test (and val when given) into ``out_dir`` per ``profile``.

    Every file is written atomically; ``manifest.yml`` is written last and
    lists each file with its MD5 digest.

    Raises:
        SchemaMismatchError: The splits lack a field the profile requires.
        IoFailure: The directory or a file cannot be written.
    """
    datasets = {TRAIN: train, TEST: test}
    if val is not None:
        datasets[VAL] = val
    has_ratings, has_timestamps = _schema(datasets)
    _check_requirements(profile, has_ratings, has_timestamps)
    columns = profile.columns_for(has_ratings, has_timestamps)
    out_dir = os.fspath(out_dir)
    try:
        os.makedirs(out_dir, exist_ok=True)
    except OSError as err:
        raise IoFailure(f'cannot create {out_dir}: {err}') from err

    files = []
    exported = {}
    for split in EXPORT_SPLITS:
        if split not in datasets:
            continue
        d = datasets[split]
        name = profile.file_name(split)
        path = os.path.join(out_dir, name)
        write_lines(path, _rows(d, profile, columns))
        files.append(ExportedFile(split, name, md5_file(path), len(d)))
        step = ProvenanceStep(EXPORT, profile.framework,
                              {OUTPUT_PATH: out_dir}, None, {'file': name})
        exported[split] = append_history(d, step)
        logger.info('exported %s (%d interactions) to %s', split, len(d),
                    path)

    manifest = ExportManifest(profile.framework, out_dir, tuple(files),
                              exported)
    try:
        with atomic_write(os.path.join(out_dir, MANIFEST_FILE)) as f:
            yaml.safe_dump(manifest.to_dict(), f, sort_keys=False)
    except OSError as err:
        raise IoFailure(f'cannot write manifest: {err}') from err
    return manifest
