"""
Tests for pipeline.config module
"""
import pytest

import pipeline.config as pc
from pipeline.operations import BadParamsError, get_operation

EXAMPLE_PIPELINE = """
pipeline:
- name: load
  operation: MovieLens
  params:
    version: 1m
  checksum: c4d9eecfca2ab87c1945afe126590906
- name: process
  operation: Binarize
  params:
    threshold: 4
  checksum: 0c5a5e05efb79e561a2d9c6b087980ff
- name: process
  operation: UserItemIterativeKCore
  params:
    cores: 2
  checksum: ef1a1bca94111c164d17b03a1a5c1314
- name: split
  operation: RandomHoldOut
  params:
    test_ratio: 0.2
    val_ratio: 0.1
    seed: 42
  checksum:
    test: 81e4150e5230a15d7c0d97b3371ffab1
    val: 65c04aa6c326c832891dfe4815465855
    train: 9a6760e3da74a1984d6d0057739b14ad
- name: export
  operation: Elliot
  params:
    output_path: ./elliot/
"""


@pytest.fixture(autouse=True)
def env(tmp_path, monkeypatch):
    monkeypatch.setenv('RECDATA_CATALOG', str(tmp_path / 'user.yml'))


def doc(*steps):
    lines = ['pipeline:']
    for step in steps:
        lines.append(step)
    return '\n'.join(lines) + '\n'


LOAD = """- name: load
  operation: ReadTabular
  params: {path: d.tsv}"""
SPLIT = """- name: split
  operation: RandomHoldOut
  params: {test_ratio: 0.2}"""
PROCESS = """- name: process
  operation: Binarize
  params: {threshold: 3}"""
ELLIOT = """- name: export
  operation: Elliot
  params: {output_path: out}"""


def test_example_pipeline_parses():
    config = pc.parse_config(EXAMPLE_PIPELINE)
    assert len(config) == 5
    assert [s.name for s in config] == ['load', 'process', 'process',
                                        'split', 'export']
    assert [s.operation for s in config] == [
        'MovieLens', 'Binarize', 'UserItemIterativeKCore', 'RandomHoldOut',
        'Elliot']
    assert [dict(s.params) for s in config] == [
        {'version': '1m'},
        {'threshold': 4},
        {'cores': 2},
        {'test_ratio': 0.2, 'val_ratio': 0.1, 'seed': 42},
        {'output_path': './elliot/'},
    ]
    steps = config.steps
    assert steps[0].checksum == 'c4d9eecfca2ab87c1945afe126590906'
    assert list(steps[3].checksum) == ['test', 'val', 'train']
    assert steps[4].checksum is None


def test_round_trip_through_to_yaml():
    config = pc.parse_config(EXAMPLE_PIPELINE)
    again = pc.parse_config(config.to_yaml())
    assert again.to_dict() == config.to_dict()


def test_unknown_operation_names_step():
    text = doc(LOAD, """- name: process
  operation: FooBar
  params: {}""")
    with pytest.raises(pc.UnknownOperationError, match='step 2') as err:
        pc.parse_config(text)
    assert err.value.step == 2


def test_bad_ratio_is_bad_params():
    text = doc(LOAD, """- name: split
  operation: RandomHoldOut
  params: {test_ratio: 1.5}""")
    with pytest.raises(BadParamsError, match='test_ratio must be in'):
        pc.parse_config(text)


def test_ratio_sum_is_bad_params():
    text = doc(LOAD, """- name: split
  operation: RandomHoldOut
  params: {test_ratio: 0.6, val_ratio: 0.4}""")
    with pytest.raises(BadParamsError, match='below 1'):
        pc.parse_config(text)


def test_k_alias_maps_to_cores():
    text = doc(LOAD, """- name: process
  operation: UserKCore
  params: {k: 3}""")
    step = pc.parse_config(text).steps[1]
    assert dict(step.params) == {'cores': 3}


def test_alias_and_name_together():
    text = doc(LOAD, """- name: process
  operation: UserKCore
  params: {k: 3, cores: 3}""")
    with pytest.raises(BadParamsError, match='given twice'):
        pc.parse_config(text)


def test_missing_and_extra_params():
    with pytest.raises(BadParamsError, match='Missing required fields'):
        pc.parse_config(doc(LOAD, """- name: process
  operation: Binarize
  params: {}"""))
    with pytest.raises(BadParamsError, match='Unexpected fields: bogus'):
        pc.parse_config(doc(LOAD, """- name: process
  operation: Binarize
  params: {threshold: 3, bogus: 1}"""))


def test_unknown_top_level_key():
    with pytest.raises(pc.SchemaError, match='Unexpected fields: extra'):
        pc.parse_config(doc(LOAD) + 'extra: 1\n')


def test_unknown_step_field():
    with pytest.raises(pc.SchemaError, match='step 1'):
        pc.parse_config(doc(LOAD + '\n  color: red'))


def test_not_yaml():
    with pytest.raises(pc.SchemaError, match='not valid YAML'):
        pc.parse_config('pipeline: [\n')


def test_not_a_pipeline():
    with pytest.raises(pc.SchemaError):
        pc.parse_config('- 1\n- 2\n')
    with pytest.raises(pc.SchemaError, match='no steps'):
        pc.parse_config('pipeline: []\n')


def test_first_step_must_load():
    with pytest.raises(pc.SchemaError, match='first step'):
        pc.parse_config(doc(PROCESS))


def test_second_load_rejected():
    with pytest.raises(pc.SchemaError, match='only the first step'):
        pc.parse_config(doc(LOAD, LOAD))


def test_one_split_only():
    with pytest.raises(pc.SchemaError, match='second split'):
        pc.parse_config(doc(LOAD, SPLIT, SPLIT))


def test_process_after_split():
    with pytest.raises(pc.SchemaError, match='before the split') as err:
        pc.parse_config(doc(LOAD, SPLIT, PROCESS))
    assert err.value.step == 3


def test_framework_export_needs_split():
    with pytest.raises(pc.SchemaError, match='add a split'):
        pc.parse_config(doc(LOAD, ELLIOT))


def test_write_cannot_follow_split():
    write = """- name: export
  operation: WriteTabular
  params: {path: out.tsv}"""
    with pytest.raises(pc.SchemaError, match='cannot follow a split'):
        pc.parse_config(doc(LOAD, SPLIT, write))
    assert len(pc.parse_config(doc(LOAD, PROCESS, write))) == 3


def test_category_must_match_operation():
    text = doc(LOAD, """- name: split
  operation: Binarize
  params: {threshold: 3}""")
    with pytest.raises(pc.SchemaError, match='is a process operation'):
        pc.parse_config(text)


def test_export_step_has_no_checksum():
    text = doc(LOAD, SPLIT, ELLIOT + '\n  checksum: ' + 'a' * 32)
    with pytest.raises(pc.SchemaError, match='no checksum'):
        pc.parse_config(text)


def test_bad_checksum_value():
    with pytest.raises(pc.SchemaError, match='step 1, checksum'):
        pc.parse_config(doc(LOAD + '\n  checksum: nothex'))


def test_notes_are_accepted():
    config = pc.parse_config(doc(LOAD + '\n  notes: {rounds: 2}'))
    assert dict(config.steps[0].notes) == {'rounds': 2}


def test_registry_operations_resolve():
    op = get_operation('MovieLens')
    assert op.category == 'load'
    assert get_operation('Elliot').takes_split
    assert get_operation('NoSuchThing') is None


def test_format_params_checked_at_parse():
    text = doc("""- name: load
  operation: ReadTabular
  params: {path: d.tsv, user_col: 1, item_col: 1}""")
    with pytest.raises(BadParamsError, match='distinct'):
        pc.parse_config(text)


def test_load_config(tmp_path):
    path = tmp_path / 'pipeline.yml'
    path.write_text(EXAMPLE_PIPELINE)
    assert len(pc.load_config(path)) == 5


@pytest.mark.parametrize('operation', [
    'ReadTabular', 'ReadInline', 'WriteTabular', 'WriteInline',
    'PrecomputedSplit'])
@pytest.mark.parametrize('sep', ['\t', ' ', ';'])
def test_whitespace_separators_accepted(operation, sep):
    params = {'path': 'd.tsv', 'sep': sep}
    if operation == 'PrecomputedSplit':
        params = {'test': 'test.tsv', 'sep': sep}
    assert get_operation(operation).normalize(params)['sep'] == sep


@pytest.mark.parametrize('sep', ['', '\n', 'a\rb', 9])
def test_bad_separator_rejected(sep):
    with pytest.raises(BadParamsError, match='sep must'):
        get_operation('ReadTabular').normalize({'path': 'd.tsv', 'sep': sep})
