"""
On-disk layout descriptions for interaction files.
"""
from dataclasses import dataclass, field, fields, replace
from typing import Mapping, Optional

import validation
from core.dataset import USER, ITEM, RATING, TIMESTAMP

# Format kinds
TABULAR = 'tabular'
INLINE = 'inline'
JSON = 'json'
KINDS = [TABULAR, INLINE, JSON]

# JSON layouts
LINES = 'lines'
ARRAY = 'array'
JSON_LAYOUTS = [LINES, ARRAY]

TAB = '\t'
DEFAULT_JSON_KEYS = {USER: USER, ITEM: ITEM, RATING: RATING,
                     TIMESTAMP: TIMESTAMP}


def validate_separator(value, field_name: str = 'sep') -> None:
    """Any non-empty text without a line break; whitespace is allowed."""
    if not isinstance(value, str) or not value:
        raise validation.ValidationError(
            f'{field_name} must be a non-empty string')
    if '\n' in value or '\r' in value:
        raise validation.ValidationError(
            f'{field_name} must not contain a newline')


@dataclass(frozen=True)
class FormatSpec:
    """
    kind: tabular | inline | json
    sep: field separator for tabular and inline files
    user_col, item_col, rating_col, timestamp_col: 0-based tabular columns
        (rating/timestamp columns are optional)
    has_header: skip (on read) / write (on write) one header line
    comment: lines starting with this prefix are skipped on read
    json_layout: lines | array (array is also detected on read)
    json_keys: object keys holding user/item/rating/timestamp
    """
    kind: str = TABULAR
    sep: str = TAB
    user_col: int = 0
    item_col: int = 1
    rating_col: Optional[int] = None
    timestamp_col: Optional[int] = None
    has_header: bool = False
    comment: Optional[str] = None
    json_layout: str = LINES
    json_keys: Mapping[str, str] = field(
        default_factory=lambda: dict(DEFAULT_JSON_KEYS))

    def __post_init__(self):
        validation.validate_enum(self.kind, 'kind', KINDS)
        validate_separator(self.sep)
        validation.validate_integer(self.user_col, 'user_col', min_value=0)
        validation.validate_integer(self.item_col, 'item_col', min_value=0)
        if self.user_col == self.item_col:
            raise validation.ValidationError(
                'user_col and item_col must be distinct')
        taken = {self.user_col, self.item_col}
        for name in ('rating_col', 'timestamp_col'):
            col = getattr(self, name)
            if col is None:
                continue
            validation.validate_integer(col, name, min_value=0)
            if col in taken:
                raise validation.ValidationError(
                    f'{name} overlaps another column')
            taken.add(col)
        validation.validate_type(self.has_header, 'has_header', bool)
        if self.comment is not None:
            validation.validate_non_empty_string(self.comment, 'comment')
        validation.validate_enum(self.json_layout, 'json_layout',
                                 JSON_LAYOUTS)
        keys = dict(DEFAULT_JSON_KEYS)
        keys.update(self.json_keys or {})
        validation.validate_no_extra_fields(keys, list(DEFAULT_JSON_KEYS))
        object.__setattr__(self, 'json_keys', keys)

    @property
    def columns(self) -> dict:
        """Field name -> column position, for the fields this spec carries."""
        cols = {USER: self.user_col, ITEM: self.item_col}
        if self.rating_col is not None:
            cols[RATING] = self.rating_col
        if self.timestamp_col is not None:
            cols[TIMESTAMP] = self.timestamp_col
        return cols

    def carries(self, field_name: str) -> bool:
        if self.kind == INLINE:
            return field_name in (USER, ITEM)
        if self.kind == JSON:
            return True
        return field_name in self.columns

    def to_dict(self) -> dict:
        return {f.name: (dict(getattr(self, f.name))
                         if f.name == 'json_keys' else getattr(self, f.name))
                for f in fields(self)}

    def with_options(self, **changes) -> 'FormatSpec':
        return replace(self, **changes)


FORMAT_FIELDS = [f.name for f in fields(FormatSpec)]


def from_dict(data: Mapping) -> FormatSpec:
    """Build a FormatSpec from a plain mapping (catalog, pipeline, CLI)."""
    if not isinstance(data, Mapping):
        raise validation.ValidationError('format must be a mapping')
    validation.validate_no_extra_fields(dict(data), FORMAT_FIELDS)
    return FormatSpec(**dict(data))


def tabular(sep: str = TAB, user_col: int = 0, item_col: int = 1,
            rating_col: Optional[int] = None,
            timestamp_col: Optional[int] = None,
            has_header: bool = False, **extra) -> FormatSpec:
    return FormatSpec(TABULAR, sep, user_col, item_col, rating_col,
                      timestamp_col, has_header, **extra)


def inline(sep: str = TAB, **extra) -> FormatSpec:
    return FormatSpec(INLINE, sep, **extra)


def json_spec(layout: str = LINES, keys: Optional[Mapping] = None
              ) -> FormatSpec:
    return FormatSpec(JSON, json_layout=layout,
                      json_keys=dict(keys or DEFAULT_JSON_KEYS))


def full_tabular(sep: str = TAB) -> FormatSpec:
    """user, item, rating, timestamp in columns 0..3."""
    return tabular(sep, 0, 1, 2, 3)
