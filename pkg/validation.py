"""
Checks shared by operation params, pipeline documents, catalogs and
profiles. Every failure is a ``ValidationError`` whose message names the
offending field.
"""
import math
import re
from typing import Any, Collection, Iterable, Mapping, Optional

HEX_DIGEST_PATTERN = r'[0-9a-f]{32}'


class ValidationError(ValueError):
    pass


def _require_mapping(data: Any) -> None:
    if not isinstance(data, Mapping):
        raise ValidationError("Value must be a mapping")


def _is_blank(value: Any) -> bool:
    return value is None or (isinstance(value, str) and not value.strip())


def validate_required_fields(data: Mapping, required_fields: Iterable[str]
                             ) -> None:
    """
    Every name in ``required_fields`` must be present in ``data`` with a
    value that is not None or blank text. Missing fields are reported
    before empty ones.
    """
    _require_mapping(data)
    missing = [name for name in required_fields if name not in data]
    if missing:
        raise ValidationError(f"Missing required fields: {', '.join(missing)}")
    empty = [name for name in required_fields if _is_blank(data[name])]
    if empty:
        raise ValidationError(f"Fields cannot be empty: {', '.join(empty)}")


def validate_no_extra_fields(data: Mapping, allowed_fields: Collection[str]
                             ) -> None:
    _require_mapping(data)
    extra = sorted(str(name) for name in data if name not in allowed_fields)
    if extra:
        raise ValidationError(f"Unexpected fields: {', '.join(extra)}")


def validate_pattern(value: Any, field_name: str, pattern: str,
                     description: str = "valid format") -> None:
    """
    Args:
        value: Text that must match ``pattern`` in full.
        field_name: Used in the message.
        pattern: Regular expression.
        description: Shown as "<field> must match <description>".

    Raises:
        ValidationError: ``value`` is not text or does not match.
    """
    if not isinstance(value, str):
        raise ValidationError(f"{field_name} must be a string")
    if re.fullmatch(pattern, value) is None:
        raise ValidationError(f"{field_name} must match {description}")


def validate_hex_digest(value: Any, field_name: str = "checksum") -> None:
    validate_pattern(value, field_name, HEX_DIGEST_PATTERN,
                     '32 lowercase hexadecimal characters')


def validate_non_empty_string(value: Any, field_name: str) -> None:
    if not isinstance(value, str) or not value.strip():
        raise ValidationError(f"{field_name} must be a non-empty string")


def validate_enum(value: Any, field_name: str,
                  allowed_values: Collection[Any]) -> None:
    """The message lists the choices in the order given."""
    if value not in allowed_values:
        choices = ', '.join(str(v) for v in allowed_values)
        raise ValidationError(f"{field_name} must be one of: {choices}")


def validate_integer(value: Any, field_name: str,
                     min_value: Optional[int] = None,
                     max_value: Optional[int] = None) -> None:
    """
    Accept a true ``int`` within the optional inclusive bounds. Booleans and
    integral floats such as ``2.0`` are rejected, so a YAML ``true`` or
    ``2.0`` never passes as a count.
    """
    if isinstance(value, bool) or not isinstance(value, int):
        raise ValidationError(f"{field_name} must be an integer")
    if min_value is not None and value < min_value:
        raise ValidationError(f"{field_name} must be at least {min_value}")
    if max_value is not None and value > max_value:
        raise ValidationError(f"{field_name} must be at most {max_value}")


def validate_positive_integer(value: Any, field_name: str) -> None:
    validate_integer(value, field_name, min_value=1)


def validate_number(value: Any, field_name: str) -> None:
    """A finite int or float; booleans are rejected."""
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ValidationError(f"{field_name} must be a number")
    if not math.isfinite(value):
        raise ValidationError(f"{field_name} must be finite")


def validate_ratio(value: Any, field_name: str,
                   allow_zero: bool = False) -> None:
    """
    A fraction below 1: in (0, 1), or in [0, 1) when ``allow_zero`` is set
    (validation ratios default to 0).
    """
    validate_number(value, field_name)
    above_low = value >= 0 if allow_zero else value > 0
    if not above_low or value >= 1:
        bounds = '[0, 1)' if allow_zero else '(0, 1)'
        raise ValidationError(f"{field_name} must be in {bounds}")


def validate_type(value: Any, field_name: str, expected_type: type) -> None:
    if not isinstance(value, expected_type):
        raise ValidationError(
            f"{field_name} must be of type {expected_type.__name__}")
