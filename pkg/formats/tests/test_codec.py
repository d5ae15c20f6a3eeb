"""
Tests for formats.codec module
"""
import gzip
import io
import json
import os
from collections import Counter
from unittest.mock import patch

import pytest

import formats.codec as fc
import formats.spec as fs
from core.dataset import MixedSchemaError, build_dataset, checksum, EXPORT


def read_text(text, spec):
    return fc.read(io.BytesIO(text.encode('utf-8')), spec)


def multiset(d):
    return Counter(d.as_tuples())


def pairs(d):
    return Counter((x.user, x.item) for x in d)


def test_read_tabular_double_colon():
    ds = read_text('u1::i1::5::100\n', fs.full_tabular('::'))
    assert ds.as_tuples() == [('u1', 'i1', 5.0, 100)]
    assert ds.history[0].operation == 'ReadTabular'
    assert ds.history[0].params['sep'] == '::'


def test_read_tabular_reordered_columns():
    spec = fs.tabular(',', user_col=2, item_col=0, rating_col=1)
    ds = read_text('i1,4.5,u1\n', spec)
    assert ds.as_tuples() == [('u1', 'i1', 4.5, None)]


def test_read_tabular_header_and_comments():
    spec = fs.tabular(',', has_header=True, comment='#')
    ds = read_text('# from SNAP\nuser,item\n\nu1,i1\nu2,i2\n', spec)
    assert ds.as_tuples() == [('u1', 'i1', None, None),
                              ('u2', 'i2', None, None)]


def test_read_tabular_crlf():
    ds = read_text('u1\ti1\t3\r\n', fs.tabular(rating_col=2))
    assert ds.as_tuples() == [('u1', 'i1', 3.0, None)]


def test_read_tabular_float_timestamp():
    ds = read_text('u1\ti1\t1.0e2\n', fs.tabular(timestamp_col=2))
    assert ds.interactions[0].timestamp == 100


def test_read_inline():
    ds = read_text('u1\ti1\ti2\n', fs.inline())
    assert ds.as_tuples() == [('u1', 'i1', None, None),
                              ('u1', 'i2', None, None)]
    assert ds.has_ratings is False


def test_read_inline_without_items():
    with pytest.raises(fc.ParseError, match='line 2'):
        read_text('u1\ti1\nu2\n', fs.inline())


def test_read_json_lines_ignores_extra_keys():
    text = '\n'.join(json.dumps(o) for o in [
        {'user': 'u1', 'item': 'i1', 'rating': 5, 'timestamp': 100, 'x': 1},
        {'user': 'u2', 'item': 'i1', 'rating': 4, 'timestamp': 150},
        {'user': 'u2', 'item': 'i3', 'rating': 2, 'timestamp': 300},
    ])
    ds = read_text(text, fs.json_spec())
    assert len(ds) == 3
    assert ds.interactions[0].rating == 5.0


def test_read_json_array_detected():
    text = ('[\n {"user": "u1", "item": "i1"},\n'
            ' {"user": "u1", "item": "i2"}\n]')
    ds = read_text(text, fs.json_spec())
    assert len(ds) == 2


def test_read_json_mapped_keys():
    text = '{"user_id": "a", "business_id": "b", "stars": 4.0}\n'
    spec = fs.json_spec(keys={'user': 'user_id', 'item': 'business_id',
                              'rating': 'stars'})
    assert read_text(text, spec).as_tuples() == [('a', 'b', 4.0, None)]


def test_read_json_missing_key():
    with pytest.raises(fc.ParseError, match="line 2: missing key 'item'"):
        read_text('{"user": "u1", "item": "i1"}\n{"user": "u2"}\n',
                  fs.json_spec())


def test_read_json_invalid():
    with pytest.raises(fc.ParseError) as err:
        read_text('{"user": "u1", "item": "i1"}\n{oops\n', fs.json_spec())
    assert err.value.line == 2


def test_read_json_mixed_schema():
    text = ('{"user": "u1", "item": "i1", "rating": 5}\n'
            '{"user": "u2", "item": "i1"}\n')
    with pytest.raises(MixedSchemaError):
        read_text(text, fs.json_spec())


def test_read_empty():
    ds = read_text('', fs.full_tabular())
    assert len(ds) == 0
    assert checksum(ds) == 'd41d8cd98f00b204e9800998ecf8427e'


@pytest.mark.parametrize('bad_line', [
    'u9\n',
    '\ti9\t3\t10\n',
    'u9\ti9\tfive\t10\n',
    'u9\ti9\t3\tnoon\n',
    'u9\ti9\tnan\t10\n',
])
def test_parse_error_line_number(bad_line):
    text = 'u1\ti1\t5\t100\nu2\ti2\t4\t200\n' + bad_line
    with pytest.raises(fc.ParseError) as err:
        read_text(text, fs.full_tabular())
    assert err.value.line == 3
    assert 'line 3' in str(err.value)


def test_parse_error_counts_skipped_lines():
    text = '# comment\n\nu1\ti1\nbroken\n'
    with pytest.raises(fc.ParseError, match='line 4'):
        read_text(text, fs.tabular(comment='#'))


def test_read_gzip_by_magic():
    data = gzip.compress(b'u1\ti1\nu2\ti2\n')
    ds = fc.read(io.BytesIO(data), fs.tabular())
    assert len(ds) == 2


def test_read_gzip_path(tmp_path):
    path = tmp_path / 'ratings.tsv.gz'
    path.write_bytes(gzip.compress(b'u1\ti1\t4\n'))
    ds = fc.read(path, fs.tabular(rating_col=2))
    assert ds.as_tuples() == [('u1', 'i1', 4.0, None)]
    assert ds.history[0].params['path'] == str(path)


def test_read_text_stream():
    ds = fc.read(io.StringIO('u1\ti1\n'), fs.tabular())
    assert len(ds) == 1


def test_read_missing_file(tmp_path):
    with pytest.raises(fc.IoFailure):
        fc.read(tmp_path / 'absent.tsv', fs.tabular())


def test_write_read_tabular_d0(d0, tmp_path):
    path = tmp_path / 'd0.tsv'
    out = fc.write(d0, path, fs.full_tabular())
    back = fc.read(path, fs.full_tabular())
    assert multiset(back) == multiset(d0)
    assert checksum(back) == checksum(d0)
    assert out.history[-1].name == EXPORT
    assert out.history[-1].operation == 'WriteTabular'
    assert out.frame is d0.frame


def test_write_tabular_header(d0, tmp_path):
    path = tmp_path / 'd0.csv'
    spec = fs.tabular(',', 0, 1, 2, has_header=True)
    with pytest.warns(fc.LossyWriteWarning):
        fc.write(d0, path, spec)
    lines = path.read_text().splitlines()
    assert lines[0] == 'user,item,rating'
    assert lines[1] == 'u1,i1,5'


def test_write_inline_d0(d0, tmp_path):
    path = tmp_path / 'd0.inline'
    with pytest.warns(fc.LossyWriteWarning, match='LossyWrite'):
        out = fc.write(d0, path, fs.inline())
    assert path.read_text() == 'u1\ti1\ti2\nu2\ti1\ti3\nu3\ti3\n'
    back = fc.read(path, fs.inline())
    assert pairs(back) == pairs(d0)
    assert back.has_ratings is False
    assert 'LossyWrite' in out.history[-1].notes['warnings'][0]


def test_write_inline_without_extra_fields_is_not_lossy(tmp_path, recwarn):
    ds = build_dataset([('u1', 'i1'), ('u1', 'i2')])
    out = fc.write(ds, tmp_path / 'x.inline', fs.inline())
    assert not [w for w in recwarn if w.category is fc.LossyWriteWarning]
    assert 'warnings' not in out.history[-1].notes


def test_write_empty(tmp_path):
    path = tmp_path / 'empty.tsv'
    fc.write(build_dataset([]), path, fs.full_tabular())
    assert path.read_bytes() == b''
    assert len(fc.read(path, fs.full_tabular())) == 0


def test_write_schema_mismatch(tmp_path):
    ds = build_dataset([('u1', 'i1')])
    with pytest.raises(fc.SchemaMismatchError, match='rating_col'):
        fc.write(ds, tmp_path / 'x.tsv', fs.tabular(rating_col=2))
    assert not os.path.exists(tmp_path / 'x.tsv')


def test_write_id_containing_separator(tmp_path):
    ds = build_dataset([('u,1', 'i1')])
    with pytest.raises(fc.SchemaMismatchError, match='separator'):
        fc.write(ds, tmp_path / 'x.csv', fs.tabular(','))


def test_write_failure_leaves_no_file(d0, tmp_path):
    path = tmp_path / 'd0.tsv'
    with patch('formats.codec.format_decimal',
               side_effect=OSError('disk full')):
        with pytest.raises(fc.IoFailure, match='disk full'):
            fc.write(d0, path, fs.full_tabular())
    assert list(tmp_path.iterdir()) == []


def test_write_json_array(d0, tmp_path):
    path = tmp_path / 'd0.json'
    fc.write(d0, path, fs.json_spec(fs.ARRAY))
    assert len(json.loads(path.read_text())) == 5
    assert multiset(fc.read(path, fs.json_spec())) == multiset(d0)


def test_tabular_json_tabular_round_trips(random_datasets, tmp_path):
    for n, ds in enumerate(random_datasets(100, seed=5)):
        json_path = tmp_path / f'{n}.jsonl'
        tsv_path = tmp_path / f'{n}.tsv'
        fc.write(ds, json_path, fs.json_spec())
        mid = fc.read(json_path, fs.json_spec())
        fc.write(mid, tsv_path, fs.full_tabular())
        back = fc.read(tsv_path, fs.full_tabular())
        assert multiset(back) == multiset(ds)


@pytest.mark.filterwarnings('ignore::formats.codec.LossyWriteWarning')
def test_inline_round_trips_keep_pairs(random_datasets, tmp_path):
    for n, ds in enumerate(random_datasets(20, seed=9)):
        path = tmp_path / f'{n}.inline'
        fc.write(ds, path, fs.inline())
        assert pairs(fc.read(path, fs.inline())) == pairs(ds)


def test_padded_ids_round_trip(tmp_path):
    built = build_dataset([(' u1', 'i1 ', 5.0, 1)])
    path = tmp_path / 'padded.tsv'
    fc.write(built, path, fs.full_tabular())
    back = fc.read(path, fs.full_tabular())
    assert back.as_tuples() == built.as_tuples() == [('u1', 'i1', 5.0, 1)]
    assert checksum(back) == checksum(built)
