"""
Tests for the validation module.
"""
import math

import pytest
from validation import (
    ValidationError,
    validate_required_fields,
    validate_no_extra_fields,
    validate_pattern,
    validate_hex_digest,
    validate_non_empty_string,
    validate_enum,
    validate_integer,
    validate_positive_integer,
    validate_number,
    validate_ratio,
    validate_type,
)


class TestRequiredFields:
    def test_valid_data(self):
        validate_required_fields({'name': 'load', 'operation': 'X'},
                                 ['name', 'operation'])

    def test_missing_field(self):
        with pytest.raises(ValidationError) as exc:
            validate_required_fields({'name': 'load'},
                                     ['name', 'operation'])
        assert 'Missing required fields: operation' in str(exc.value)

    def test_empty_and_none(self):
        for value in ('', '   ', None):
            with pytest.raises(ValidationError,
                               match='Fields cannot be empty: operation'):
                validate_required_fields({'operation': value},
                                         ['operation'])

    def test_not_dict(self):
        with pytest.raises(ValidationError, match='must be a mapping'):
            validate_required_fields(['name'], ['name'])


class TestNoExtraFields:
    def test_allowed(self):
        validate_no_extra_fields({'a': 1}, ['a', 'b'])

    def test_extra_sorted(self):
        with pytest.raises(ValidationError,
                           match='Unexpected fields: x, y'):
            validate_no_extra_fields({'y': 1, 'a': 2, 'x': 3}, ['a'])


class TestPattern:
    def test_valid_pattern(self):
        validate_pattern('ml-1m', 'name', r'^[a-z0-9-]+$', 'a slug')

    def test_invalid_pattern(self):
        with pytest.raises(ValidationError, match='name must match a slug'):
            validate_pattern('ML 1M', 'name', r'^[a-z0-9-]+$', 'a slug')

    def test_not_string(self):
        with pytest.raises(ValidationError, match='must be a string'):
            validate_pattern(12, 'name', r'.*')


class TestHexDigest:
    def test_valid(self):
        validate_hex_digest('c4d9eecfca2ab87c1945afe126590906')

    @pytest.mark.parametrize('value', [
        'C4D9EECFCA2AB87C1945AFE126590906', 'abc', 'g' * 32, None,
    ])
    def test_invalid(self, value):
        with pytest.raises(ValidationError, match='checksum'):
            validate_hex_digest(value)


class TestNonEmptyString:
    def test_valid(self):
        validate_non_empty_string('x', 'sep')

    @pytest.mark.parametrize('value', ['', ' ', None, 3])
    def test_invalid(self, value):
        with pytest.raises(ValidationError,
                           match='sep must be a non-empty string'):
            validate_non_empty_string(value, 'sep')


class TestEnum:
    def test_valid(self):
        validate_enum('user', 'axis', ['user', 'item'])

    def test_invalid(self):
        with pytest.raises(ValidationError,
                           match='axis must be one of: user, item'):
            validate_enum('users', 'axis', ['user', 'item'])


class TestInteger:
    def test_valid(self):
        validate_integer(5, 'k', min_value=1, max_value=10)

    def test_bool_is_not_integer(self):
        with pytest.raises(ValidationError, match='k must be an integer'):
            validate_integer(True, 'k')

    def test_float_is_not_integer(self):
        with pytest.raises(ValidationError, match='k must be an integer'):
            validate_integer(2.0, 'k')

    def test_bounds(self):
        with pytest.raises(ValidationError, match='k must be at least 2'):
            validate_integer(1, 'k', min_value=2)
        with pytest.raises(ValidationError, match='k must be at most 3'):
            validate_integer(4, 'k', max_value=3)


class TestPositiveInteger:
    def test_valid(self):
        validate_positive_integer(1, 'cores')

    def test_zero(self):
        with pytest.raises(ValidationError,
                           match='cores must be at least 1'):
            validate_positive_integer(0, 'cores')


class TestNumber:
    def test_valid(self):
        validate_number(4, 'threshold')
        validate_number(3.5, 'threshold')

    @pytest.mark.parametrize('value', ['4', None, False])
    def test_not_number(self, value):
        with pytest.raises(ValidationError,
                           match='threshold must be a number'):
            validate_number(value, 'threshold')

    @pytest.mark.parametrize('value', [math.inf, -math.inf, math.nan])
    def test_not_finite(self, value):
        with pytest.raises(ValidationError, match='must be finite'):
            validate_number(value, 'threshold')


class TestRatio:
    def test_valid(self):
        validate_ratio(0.2, 'test_ratio')
        validate_ratio(0, 'val_ratio', allow_zero=True)

    @pytest.mark.parametrize('value', [0, 1, 1.5, -0.1])
    def test_open_interval(self, value):
        with pytest.raises(ValidationError,
                           match=r'test_ratio must be in \(0, 1\)'):
            validate_ratio(value, 'test_ratio')

    def test_half_open_interval(self):
        with pytest.raises(ValidationError,
                           match=r'val_ratio must be in \[0, 1\)'):
            validate_ratio(1, 'val_ratio', allow_zero=True)


class TestType:
    def test_valid(self):
        validate_type(True, 'has_header', bool)

    def test_invalid(self):
        with pytest.raises(ValidationError, match='has_header'):
            validate_type('yes', 'has_header', bool)
