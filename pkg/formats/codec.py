"""
Readers and writers for the three interaction formats.

Tabular: ``<user><sep><item>[<sep><rating>][<sep><timestamp>]`` per line, any
column order, optional single header line.
Inline: ``<user><sep><item1><sep><item2>...`` per line (no ratings or times).
JSON: one object per line (default) or a single array of objects.

Gzip input is detected by suffix or magic bytes and decompressed on the fly.
"""
import gzip
import io
import json
import logging
import math
import os
import warnings
from contextlib import contextmanager
from typing import Any, Iterable, Iterator, Optional, Union

import validation
from core.dataset import (
    Dataset, Interaction, ProvenanceStep, append_history, build_dataset,
    EXPORT, USER, ITEM, RATING, TIMESTAMP,
)
from formats.spec import FormatSpec, TABULAR, INLINE, JSON, ARRAY
from utils import atomic_write, format_decimal

logger = logging.getLogger(__name__)

GZIP_MAGIC = b'\x1f\x8b'

READ_OPERATIONS = {
    TABULAR: 'ReadTabular',
    INLINE: 'ReadInline',
    JSON: 'ReadJson',
}
WRITE_OPERATIONS = {
    TABULAR: 'WriteTabular',
    INLINE: 'WriteInline',
    JSON: 'WriteJson',
}

LOSSY_WRITE = 'LossyWrite'
STREAM_SOURCE = '<stream>'

Source = Union[str, os.PathLike, io.IOBase]


class ParseError(validation.ValidationError):
    """A malformed row; ``line`` is the 1-based line number when known."""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f'line {line}: ' if line is not None else ''
        super().__init__(f'{prefix}{message}')


class IoFailure(OSError):
    """A file could not be read or written."""


class SchemaMismatchError(validation.ValidationError):
    """A dataset does not carry the fields a target layout requires."""


class LossyWriteWarning(UserWarning):
    """A write dropped fields the dataset carries."""


def format_params(spec: FormatSpec) -> dict:
    """The FormatSpec fields that matter for its kind, as plain params."""
    if spec.kind == TABULAR:
        names = ['sep', 'user_col', 'item_col', 'rating_col',
                 'timestamp_col', 'has_header', 'comment']
    elif spec.kind == INLINE:
        names = ['sep', 'comment']
    else:
        names = ['json_layout', 'json_keys']
    params = spec.to_dict()
    return {name: params[name] for name in names}


def _is_path(source: Any) -> bool:
    return isinstance(source, (str, os.PathLike))


def _maybe_gunzip(raw, name: str = ''):
    if name.endswith('.gz'):
        return gzip.GzipFile(fileobj=raw)
    head = b''
    if hasattr(raw, 'peek'):
        head = raw.peek(2)[:2]
    elif hasattr(raw, 'seekable') and raw.seekable():
        pos = raw.tell()
        head = raw.read(2)
        raw.seek(pos)
    if head == GZIP_MAGIC:
        return gzip.GzipFile(fileobj=raw)
    return raw


@contextmanager
def _open_source(source: Source) -> Iterator[Any]:
    if _is_path(source):
        path = os.fspath(source)
        try:
            raw = open(path, 'rb')
        except OSError as err:
            raise IoFailure(f'cannot read {path}: {err}') from err
        with raw:
            yield _maybe_gunzip(raw, path)
    else:
        if isinstance(source, io.TextIOBase):
            yield source
        else:
            yield _maybe_gunzip(source, getattr(source, 'name', '') or '')


def _numbered_lines(stream) -> Iterator[tuple[int, str]]:
    """Yield (1-based line number, text without line terminator)."""
    for lineno, raw in enumerate(stream, start=1):
        if isinstance(raw, bytes):
            try:
                raw = raw.decode('utf-8')
            except UnicodeDecodeError as err:
                raise ParseError(f'invalid UTF-8: {err}', lineno) from err
        if lineno == 1 and raw.startswith('\ufeff'):
            raw = raw[1:]
        yield lineno, raw.rstrip('\r\n')


def _skip_line(line: str, spec: FormatSpec) -> bool:
    if not line.strip():
        return True
    return spec.comment is not None and line.startswith(spec.comment)


def _parse_id(text: Any, name: str, lineno: Optional[int]) -> str:
    if isinstance(text, bool) or not isinstance(text, (str, int)):
        raise ParseError(f'{name} must be text', lineno)
    value = str(text).strip()
    if not value:
        raise ParseError(f'{name} is blank', lineno)
    return value


def _parse_rating(text: Any, lineno: Optional[int]) -> float:
    if isinstance(text, bool):
        raise ParseError('rating must be a number', lineno)
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f'rating is not a number: {text!r}', lineno)
    if not math.isfinite(value):
        raise ParseError('rating must be finite', lineno)
    return value


def _parse_timestamp(text: Any, lineno: Optional[int]) -> int:
    if isinstance(text, bool):
        raise ParseError('timestamp must be an integer', lineno)
    if isinstance(text, int):
        return text
    try:
        return int(text)
    except (TypeError, ValueError):
        pass
    try:
        value = float(text)
    except (TypeError, ValueError):
        raise ParseError(f'timestamp is not an integer: {text!r}', lineno)
    if not math.isfinite(value) or not value.is_integer():
        raise ParseError(f'timestamp is not an integer: {text!r}', lineno)
    return int(value)


def _tabular_records(lines, spec: FormatSpec) -> Iterator[Interaction]:
    cols = spec.columns
    width = max(cols.values()) + 1
    header_pending = spec.has_header
    sep = spec.sep
    rating_col = spec.rating_col
    timestamp_col = spec.timestamp_col
    for lineno, line in lines:
        if _skip_line(line, spec):
            continue
        if header_pending:
            header_pending = False
            continue
        parts = line.split(sep)
        if len(parts) < width:
            raise ParseError(
                f'expected at least {width} fields, found {len(parts)}',
                lineno)
        yield Interaction(
            _parse_id(parts[spec.user_col], USER, lineno),
            _parse_id(parts[spec.item_col], ITEM, lineno),
            None if rating_col is None
            else _parse_rating(parts[rating_col].strip(), lineno),
            None if timestamp_col is None
            else _parse_timestamp(parts[timestamp_col].strip(), lineno),
        )


def _inline_records(lines, spec: FormatSpec) -> Iterator[Interaction]:
    for lineno, line in lines:
        if _skip_line(line, spec):
            continue
        parts = line.split(spec.sep)
        user = _parse_id(parts[0], USER, lineno)
        items = [p.strip() for p in parts[1:] if p.strip()]
        if not items:
            raise ParseError('inline row has no items', lineno)
        for item in items:
            yield Interaction(user, item)


def _json_record(obj: Any, spec: FormatSpec,
                 lineno: Optional[int]) -> Interaction:
    if not isinstance(obj, dict):
        raise ParseError('expected a JSON object', lineno)
    keys = spec.json_keys
    for name in (USER, ITEM):
        if keys[name] not in obj:
            raise ParseError(f'missing key {keys[name]!r}', lineno)
    rating = obj.get(keys[RATING])
    timestamp = obj.get(keys[TIMESTAMP])
    return Interaction(
        _parse_id(obj[keys[USER]], USER, lineno),
        _parse_id(obj[keys[ITEM]], ITEM, lineno),
        None if rating is None else _parse_rating(rating, lineno),
        None if timestamp is None else _parse_timestamp(timestamp, lineno),
    )


def _json_records(lines, spec: FormatSpec) -> Iterator[Interaction]:
    lines = iter(lines)
    for lineno, line in lines:
        if not line.strip():
            continue
        if line.lstrip().startswith('['):
            yield from _json_array_records(lineno, line, lines, spec)
            return
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as err:
            raise ParseError(f'invalid JSON: {err.msg}', lineno) from err
        yield _json_record(obj, spec, lineno)


def _json_array_records(first_lineno: int, first_line: str, rest,
                        spec: FormatSpec) -> Iterator[Interaction]:
    text = '\n'.join([first_line] + [line for _, line in rest])
    try:
        objs = json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(f'invalid JSON: {err.msg}',
                         first_lineno + err.lineno - 1) from err
    if not isinstance(objs, list):
        raise ParseError('expected a JSON array', first_lineno)
    for index, obj in enumerate(objs):
        try:
            yield _json_record(obj, spec, None)
        except ParseError as err:
            raise ParseError(f'array element {index}: {err}') from err


_READERS = {
    TABULAR: _tabular_records,
    INLINE: _inline_records,
    JSON: _json_records,
}


def read(source: Source, spec: FormatSpec,
         operation: Optional[str] = None,
         params: Optional[dict] = None) -> Dataset:
    """
    Parse interactions from a path or stream.

    Args:
        source: File path, binary stream or text stream.
        spec: Layout of the source.
        operation: Load-step operation name (defaults to Read<Kind>).
        params: Load-step params (defaults to the path and format fields).

    Returns:
        Dataset in source row order with one load step.

    Raises:
        ParseError: Malformed row, with its line number.
        MixedSchemaError: Rating/timestamp presence is inconsistent.
        IoFailure: The source cannot be opened.
    """
    if not isinstance(spec, FormatSpec):
        raise validation.ValidationError(f'Bad type for {type(spec)=}')
    if params is None:
        params = {'path': os.fspath(source) if _is_path(source)
                  else STREAM_SOURCE}
        params.update(format_params(spec))
    with _open_source(source) as stream:
        records = list(_READERS[spec.kind](_numbered_lines(stream), spec))
    logger.info('read %d interactions (%s)', len(records), spec.kind)
    return build_dataset(records, operation or READ_OPERATIONS[spec.kind],
                         params)


def check_id(value: str, sep: str, name: str) -> None:
    if sep in value:
        raise SchemaMismatchError(
            f'{name} {value!r} contains the separator {sep!r}')


def _tabular_lines(d: Dataset, spec: FormatSpec) -> Iterator[str]:
    cols = spec.columns
    width = max(cols.values()) + 1
    sep = spec.sep
    if spec.has_header:
        header = [''] * width
        for name, col in cols.items():
            header[col] = name
        yield sep.join(header) + '\n'
    for x in d:
        check_id(x.user, sep, USER)
        check_id(x.item, sep, ITEM)
        row = [''] * width
        row[spec.user_col] = x.user
        row[spec.item_col] = x.item
        if spec.rating_col is not None:
            row[spec.rating_col] = format_decimal(x.rating)
        if spec.timestamp_col is not None:
            row[spec.timestamp_col] = str(x.timestamp)
        yield sep.join(row) + '\n'


def _inline_lines(d: Dataset, spec: FormatSpec) -> Iterator[str]:
    grouped: dict = {}
    for x in d:
        check_id(x.user, spec.sep, USER)
        check_id(x.item, spec.sep, ITEM)
        grouped.setdefault(x.user, []).append(x.item)
    for user, items in grouped.items():
        yield spec.sep.join([user] + items) + '\n'


def _json_object(x: Interaction, spec: FormatSpec) -> str:
    keys = spec.json_keys
    obj = {keys[USER]: x.user, keys[ITEM]: x.item}
    if x.rating is not None:
        obj[keys[RATING]] = x.rating
    if x.timestamp is not None:
        obj[keys[TIMESTAMP]] = x.timestamp
    return json.dumps(obj, ensure_ascii=False)


def _json_lines(d: Dataset, spec: FormatSpec) -> Iterator[str]:
    if spec.json_layout == ARRAY:
        if not len(d):
            return
        objs = [_json_object(x, spec) for x in d]
        yield '[\n' + ',\n'.join(objs) + '\n]\n'
        return
    for x in d:
        yield _json_object(x, spec) + '\n'


_WRITERS = {
    TABULAR: _tabular_lines,
    INLINE: _inline_lines,
    JSON: _json_lines,
}


def dropped_fields(d: Dataset, spec: FormatSpec) -> list:
    """Fields ``d`` carries that ``spec`` cannot represent."""
    present = []
    if d.has_ratings:
        present.append(RATING)
    if d.has_timestamps:
        present.append(TIMESTAMP)
    return [name for name in present if not spec.carries(name)]


def check_writable(d: Dataset, spec: FormatSpec) -> None:
    """
    Raises:
        SchemaMismatchError: A tabular column is mapped for a field the
            dataset does not carry.
    """
    if spec.kind != TABULAR or not len(d):
        return
    if spec.rating_col is not None and not d.has_ratings:
        raise SchemaMismatchError('rating_col is set but the dataset has '
                                  'no ratings')
    if spec.timestamp_col is not None and not d.has_timestamps:
        raise SchemaMismatchError('timestamp_col is set but the dataset has '
                                  'no timestamps')


def write_lines(path: Union[str, os.PathLike], lines: Iterable[str]) -> None:
    try:
        with atomic_write(path) as f:
            f.writelines(lines)
    except OSError as err:
        raise IoFailure(f'cannot write {os.fspath(path)}: {err}') from err


def write(d: Dataset, sink: Union[str, os.PathLike], spec: FormatSpec,
          operation: Optional[str] = None,
          params: Optional[dict] = None) -> Dataset:
    """
    Write ``d`` to ``sink`` atomically.

    Returns:
        ``d`` with an export step appended. When the layout drops ratings or
        timestamps a LossyWriteWarning is issued and noted on that step.

    Raises:
        SchemaMismatchError: Tabular columns map fields ``d`` lacks, or an id
            contains the separator.
        IoFailure: The sink cannot be written.
    """
    check_writable(d, spec)
    notes = {}
    lost = dropped_fields(d, spec)
    if lost:
        message = f'{LOSSY_WRITE}: {spec.kind} layout drops {", ".join(lost)}'
        warnings.warn(message, LossyWriteWarning, stacklevel=2)
        logger.warning(message)
        notes['warnings'] = [message]
    write_lines(sink, _WRITERS[spec.kind](d, spec))
    logger.info('wrote %d interactions to %s', len(d), os.fspath(sink))
    if params is None:
        params = {'path': os.fspath(sink)}
        params.update(format_params(spec))
    step = ProvenanceStep(EXPORT, operation or WRITE_OPERATIONS[spec.kind],
                          params, None, notes)
    return append_history(d, step)
