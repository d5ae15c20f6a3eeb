"""
Tests for the utils module.
"""
import hashlib

import pytest

from utils import atomic_write, format_decimal, md5_file


@pytest.mark.parametrize('value,text', [
    (5.0, '5'), (3.25, '3.25'), (0.1, '0.1'), (4, '4'), (-2.0, '-2'),
    (1e-07, '1e-07'),
])
def test_format_decimal(value, text):
    assert format_decimal(value) == text


def test_format_decimal_round_trips():
    for value in (0.1 + 0.2, 1 / 3, 2.5e10):
        assert float(format_decimal(value)) == value


def test_md5_file(tmp_path):
    path = tmp_path / 'f.bin'
    data = b'abc' * 1000
    path.write_bytes(data)
    assert md5_file(path) == hashlib.md5(data).hexdigest()


def test_atomic_write_replaces(tmp_path):
    path = tmp_path / 'sub' / 'out.txt'
    with atomic_write(path) as f:
        f.write('one\n')
    with atomic_write(path) as f:
        f.write('two\n')
    assert path.read_text() == 'two\n'
    assert [p.name for p in path.parent.iterdir()] == ['out.txt']


def test_atomic_write_leaves_nothing_on_error(tmp_path):
    path = tmp_path / 'out.txt'
    path.write_text('old\n')
    with pytest.raises(RuntimeError):
        with atomic_write(path) as f:
            f.write('half')
            raise RuntimeError('boom')
    assert path.read_text() == 'old\n'
    assert [p.name for p in tmp_path.iterdir()] == ['out.txt']


def test_atomic_write_binary(tmp_path):
    path = tmp_path / 'out.bin'
    with atomic_write(path, 'wb') as f:
        f.write(b'\x00\x01')
    assert path.read_bytes() == b'\x00\x01'
