"""
This file holds the interaction data model shared by every other package:
interactions, immutable datasets backed by a pandas DataFrame, provenance
steps, the canonical byte form and the content checksum computed from it.

Canonical form
--------------
Interactions are sorted by (user, item, timestamp text, rating text) and each
one is written as ``user<TAB>item<TAB>rating<TAB>timestamp<LF>`` in UTF-8.
Absent fields are empty text; ratings use the shortest decimal that
round-trips (5.0 -> "5"). The MD5 digest of that byte sequence is the
dataset checksum. MD5 is an integrity fingerprint here, not a security
boundary.
"""
import hashlib
import logging
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Any, Iterable, Iterator, Mapping, Optional, Sequence, Union

import numpy as np
import pandas as pd

import validation
from utils import format_decimal

logger = logging.getLogger(__name__)

# Field names, also the DataFrame column names
USER = 'user'
ITEM = 'item'
RATING = 'rating'
TIMESTAMP = 'timestamp'
FIELDS = (USER, ITEM, RATING, TIMESTAMP)
CANONICAL_ORDER = [USER, ITEM, TIMESTAMP, RATING]

# Provenance step categories
LOAD = 'load'
PROCESS = 'process'
SPLIT = 'split'
EXPORT = 'export'
STEP_NAMES = [LOAD, PROCESS, SPLIT, EXPORT]

# Split names, in the order checksum blocks are written
TEST = 'test'
VAL = 'val'
TRAIN = 'train'
SPLIT_NAMES = [TEST, VAL, TRAIN]

BUILD_OPERATION = 'BuildDataset'

FORBIDDEN_ID_PATTERN = '[\t\n\r]'

Checksum = Union[str, Mapping[str, str], Sequence[Mapping[str, str]], None]


class MixedSchemaError(validation.ValidationError):
    """Rating or timestamp presence differs between interactions."""


class EmptyFieldError(validation.ValidationError):
    """A user or item identifier is blank."""


class BadStepError(validation.ValidationError):
    """A provenance step does not satisfy the step invariants."""


@dataclass(frozen=True, slots=True)
class Interaction:
    user: str
    item: str
    rating: Optional[float] = None
    timestamp: Optional[int] = None

    def to_dict(self) -> dict:
        rec = {USER: self.user, ITEM: self.item}
        if self.rating is not None:
            rec[RATING] = self.rating
        if self.timestamp is not None:
            rec[TIMESTAMP] = self.timestamp
        return rec

    def as_tuple(self) -> tuple:
        return (self.user, self.item, self.rating, self.timestamp)


@dataclass(frozen=True)
class ProvenanceStep:
    """
    One recorded operation. ``params`` are the replayable inputs; ``notes``
    carry outcomes (rounds executed, warnings raised) and are never replayed.
    """
    name: str
    operation: str
    params: Mapping[str, Any] = field(default_factory=dict)
    checksum: Checksum = None
    notes: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'params',
                           MappingProxyType(dict(self.params)))
        object.__setattr__(self, 'notes', MappingProxyType(dict(self.notes)))

    def to_dict(self) -> dict:
        """Plain dict in document field order: name, operation, params,
        checksum, notes."""
        rec = {
            'name': self.name,
            'operation': self.operation,
            'params': dict(self.params),
        }
        if self.checksum is not None:
            rec['checksum'] = _plain_checksum(self.checksum)
        if self.notes:
            rec['notes'] = dict(self.notes)
        return rec


def _plain_checksum(value: Checksum):
    if isinstance(value, str):
        return value
    if isinstance(value, Mapping):
        return {k: value[k] for k in SPLIT_NAMES if k in value}
    return [_plain_checksum(v) for v in value]


def validate_checksum(value: Checksum, field_name: str = 'checksum') -> None:
    """
    A checksum is a hex digest, a map of split name to digest, or a list of
    such maps (one per fold).
    """
    if isinstance(value, str):
        validation.validate_hex_digest(value, field_name)
    elif isinstance(value, Mapping):
        if not value:
            raise validation.ValidationError(
                f'{field_name} must not be an empty map')
        validation.validate_no_extra_fields(dict(value), SPLIT_NAMES)
        for key, digest in value.items():
            validation.validate_hex_digest(digest, f'{field_name}.{key}')
    elif isinstance(value, (list, tuple)):
        for index, fold in enumerate(value):
            if not isinstance(fold, Mapping):
                raise validation.ValidationError(
                    f'{field_name}[{index}] must be a map of split digests')
            validate_checksum(fold, f'{field_name}[{index}]')
    else:
        raise validation.ValidationError(
            f'{field_name} must be a digest, a map or a list of maps')


def validate_step(step: ProvenanceStep) -> None:
    if not isinstance(step, ProvenanceStep):
        raise BadStepError(f'Bad type for {type(step)=}')
    if step.name not in STEP_NAMES:
        raise BadStepError(
            f'step name must be one of: {", ".join(STEP_NAMES)} '
            f'(got {step.name!r})')
    if not isinstance(step.operation, str) or not step.operation.strip():
        raise BadStepError('step operation must be a non-empty string')
    if step.checksum is not None:
        try:
            validate_checksum(step.checksum)
        except validation.ValidationError as err:
            raise BadStepError(str(err)) from err


def make_frame(users: Sequence, items: Sequence,
               ratings: Optional[Sequence] = None,
               timestamps: Optional[Sequence] = None) -> pd.DataFrame:
    """
    Interaction table with the four columns: user and item as object
    (text), rating as float64 (NaN when absent), timestamp as nullable
    Int64.
    """
    n = len(users)
    if ratings is None:
        ratings = [None] * n
    if timestamps is None:
        timestamps = [None] * n
    return pd.DataFrame({
        USER: pd.Series(users, dtype=object),
        ITEM: pd.Series(items, dtype=object),
        RATING: pd.Series(ratings, dtype='float64'),
        TIMESTAMP: pd.Series(pd.array(timestamps, dtype='Int64')),
    })


def _conform(frame: pd.DataFrame) -> pd.DataFrame:
    """Fresh positional index and the column dtypes of ``make_frame``."""
    return pd.DataFrame({
        USER: frame[USER].to_numpy(dtype=object),
        ITEM: frame[ITEM].to_numpy(dtype=object),
        RATING: frame[RATING].to_numpy(dtype='float64'),
        TIMESTAMP: pd.array(frame[TIMESTAMP], dtype='Int64'),
    })


def _frame_of(interactions: Iterable[Interaction]) -> pd.DataFrame:
    rows = list(interactions)
    return make_frame([x.user for x in rows], [x.item for x in rows],
                      [x.rating for x in rows], [x.timestamp for x in rows])


def _schema_flags(frame: pd.DataFrame) -> tuple[bool, bool]:
    n = len(frame)
    if n == 0:
        return False, False
    rated = int(frame[RATING].notna().sum())
    timed = int(frame[TIMESTAMP].notna().sum())
    if 0 < rated < n:
        raise MixedSchemaError(
            f'rating present on {rated} of {n} interactions')
    if 0 < timed < n:
        raise MixedSchemaError(
            f'timestamp present on {timed} of {n} interactions')
    return rated == n, timed == n


class Dataset:
    """
    Ordered multiset of interactions plus the provenance history that
    produced it. Instances are never modified; every transformation returns
    a new Dataset.

    The rows live in a DataFrame with the columns user, item, rating and
    timestamp and a 0..n-1 index. ``frame`` hands out that table; callers
    build new frames from it and never write into it.
    """
    __slots__ = ('_frame', '_history', '_has_ratings', '_has_timestamps',
                 '_checksum', '_interactions', '_canonical')

    def __init__(self, interactions: Iterable[Interaction] = (),
                 history: Iterable[ProvenanceStep] = ()):
        self._setup(_frame_of(interactions), tuple(history))

    def _setup(self, frame: pd.DataFrame, history: tuple) -> None:
        self._frame = frame
        self._history = history
        self._has_ratings, self._has_timestamps = _schema_flags(frame)
        self._checksum = None
        self._interactions = None
        self._canonical = None

    @classmethod
    def from_frame(cls, frame: pd.DataFrame,
                   history: Iterable[ProvenanceStep] = ()) -> 'Dataset':
        """
        Dataset over a copy of ``frame``'s four interaction columns.

        Raises:
            MixedSchemaError: Ratings or timestamps are only partly present.
        """
        ds = cls.__new__(cls)
        ds._setup(_conform(frame), tuple(history))
        return ds

    @classmethod
    def _with_history(cls, parent: 'Dataset',
                      history: tuple) -> 'Dataset':
        ds = cls.__new__(cls)
        for name in cls.__slots__:
            setattr(ds, name, getattr(parent, name))
        ds._history = history
        return ds

    @property
    def frame(self) -> pd.DataFrame:
        return self._frame

    @property
    def interactions(self) -> tuple:
        if self._interactions is None:
            f = self._frame
            n = len(f)
            ratings = f[RATING].tolist() if self._has_ratings else [None] * n
            stamps = (f[TIMESTAMP].astype('int64').tolist()
                      if self._has_timestamps else [None] * n)
            self._interactions = tuple(map(
                Interaction, f[USER].tolist(), f[ITEM].tolist(), ratings,
                stamps))
        return self._interactions

    @property
    def history(self) -> tuple:
        return self._history

    @property
    def has_ratings(self) -> bool:
        return self._has_ratings

    @property
    def has_timestamps(self) -> bool:
        return self._has_timestamps

    def __len__(self) -> int:
        return len(self._frame)

    def __iter__(self) -> Iterator[Interaction]:
        return iter(self.interactions)

    def __repr__(self) -> str:
        return (f'Dataset(n={len(self)}, has_ratings={self._has_ratings}, '
                f'has_timestamps={self._has_timestamps}, '
                f'history={len(self._history)})')

    def users(self) -> list:
        """Distinct users in first-seen order."""
        return self._frame[USER].unique().tolist()

    def items(self) -> list:
        """Distinct items in first-seen order."""
        return self._frame[ITEM].unique().tolist()

    def as_tuples(self) -> list:
        return [x.as_tuple() for x in self.interactions]

    def derive(self, rows: Union[pd.DataFrame, Iterable[Interaction]],
               name: str, operation: str, params: Optional[Mapping] = None,
               notes: Optional[Mapping] = None) -> 'Dataset':
        """
        New Dataset holding ``rows`` (a frame or interactions) whose history
        is this history plus one step carrying the new content checksum.
        """
        if isinstance(rows, pd.DataFrame):
            result = Dataset.from_frame(rows, self._history)
        else:
            result = Dataset(rows, self._history)
        step = ProvenanceStep(name, operation, params or {},
                              checksum(result), notes or {})
        return append_history(result, step)


def _clean_ids(values: list, name: str) -> pd.Series:
    """Stripped ids; blank, non-text or tab/newline-bearing ids raise."""
    ids = pd.Series(values, dtype=object)
    is_text = ids.map(lambda v: isinstance(v, str)).astype(bool)
    stripped = ids.where(is_text).str.strip()
    blank = ~is_text | stripped.eq('') | stripped.isna()
    if blank.any():
        raise EmptyFieldError(
            f'{name} is blank in record {int(blank.to_numpy().argmax()) + 1}')
    bad = stripped.str.contains(FORBIDDEN_ID_PATTERN, regex=True)
    if bad.any():
        raise validation.ValidationError(
            f'{name} must not contain tab or newline characters '
            f'(record {int(bad.to_numpy().argmax()) + 1})')
    return stripped


def _check_values(values: list, name: str, ok) -> None:
    for position, value in enumerate(values, start=1):
        if value is not None and not ok(value):
            raise validation.ValidationError(
                f'{name} (record {position})')


def _is_rating(value) -> bool:
    return (not isinstance(value, bool) and isinstance(value, (int, float))
            and math.isfinite(value))


def _is_timestamp(value) -> bool:
    return not isinstance(value, bool) and isinstance(value, int)


def _coerce(record: Any) -> Interaction:
    if isinstance(record, Interaction):
        return record
    if isinstance(record, (tuple, list)) and 2 <= len(record) <= 4:
        return Interaction(*record)
    raise validation.ValidationError(f'Bad type for {type(record)=}')


def build_dataset(records: Iterable[Any],
                  operation: str = BUILD_OPERATION,
                  params: Optional[Mapping] = None) -> Dataset:
    """
    Validate records and wrap them in a Dataset whose history is a single
    load step. Ids are stored stripped of surrounding whitespace, as every
    reader parses them.

    Args:
        records: Interactions, or (user, item[, rating[, timestamp]]) tuples.
        operation: Name recorded on the load step.
        params: Parameters recorded on the load step.

    Raises:
        EmptyFieldError: A user or item id is blank.
        MixedSchemaError: Rating/timestamp presence is inconsistent.
        ValidationError: A rating is not finite or a timestamp not integral.
    """
    rows = [_coerce(record) for record in records]
    users = _clean_ids([x.user for x in rows], USER)
    items = _clean_ids([x.item for x in rows], ITEM)
    ratings = [x.rating for x in rows]
    stamps = [x.timestamp for x in rows]
    _check_values(ratings, 'rating must be a finite number', _is_rating)
    _check_values(stamps, 'timestamp must be an integer', _is_timestamp)
    try:
        frame = make_frame(users.tolist(), items.tolist(), ratings, stamps)
    except (OverflowError, TypeError) as err:
        raise validation.ValidationError(
            f'timestamp out of the 64-bit range: {err}') from err
    ds = Dataset.from_frame(frame)
    step = ProvenanceStep(LOAD, operation, params or {}, checksum(ds))
    logger.debug('built dataset of %d interactions via %s',
                 len(ds), operation)
    return append_history(ds, step)


def canonical_text(d: Dataset) -> pd.DataFrame:
    """
    The four fields as canonical text, one row per interaction in ``d``'s
    order. Absent fields are empty strings.
    """
    f = d.frame
    n = len(f)
    if d.has_timestamps:
        stamps = f[TIMESTAMP].astype('int64').astype(str).to_numpy()
    else:
        stamps = np.full(n, '', dtype=object)
    if d.has_ratings:
        codes, uniques = pd.factorize(f[RATING])
        texts = np.array([format_decimal(v) for v in uniques] + [''],
                         dtype=object)
        ratings = texts[codes]
    else:
        ratings = np.full(n, '', dtype=object)
    return pd.DataFrame({
        USER: f[USER].to_numpy(dtype=object),
        ITEM: f[ITEM].to_numpy(dtype=object),
        RATING: ratings.astype(object),
        TIMESTAMP: stamps.astype(object),
    })


def canonical_positions(d: Dataset) -> np.ndarray:
    """Row positions of ``d`` in canonical order; equal rows keep order."""
    if d._canonical is None:
        keys = canonical_text(d)
        keys['position'] = np.arange(len(keys))
        d._canonical = keys.sort_values(
            CANONICAL_ORDER + ['position'])['position'].to_numpy()
    return d._canonical


def canonical_serialize(d: Dataset) -> bytes:
    """Deterministic byte form of ``d``, independent of interaction order."""
    keys = canonical_text(d).iloc[canonical_positions(d)]
    lines = (keys[USER] + '\t' + keys[ITEM] + '\t' + keys[RATING] + '\t'
             + keys[TIMESTAMP] + '\n')
    return ''.join(lines.tolist()).encode('utf-8')


def checksum(d: Dataset) -> str:
    """MD5 hex digest of canonical_serialize(d)."""
    if d._checksum is None:
        d._checksum = hashlib.md5(canonical_serialize(d)).hexdigest()
    return d._checksum


def append_history(d: Dataset, step: ProvenanceStep) -> Dataset:
    """
    Return a Dataset with the same interactions and ``step`` appended to the
    history.

    Raises:
        BadStepError: If the step category or checksum is invalid.
    """
    validate_step(step)
    return Dataset._with_history(d, d.history + (step,))
