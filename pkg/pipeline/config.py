"""
Pipeline documents.

A document is a YAML mapping with a single ``pipeline`` list. Each entry
has ``name`` (load | process | split | export), ``operation``, ``params``
and optionally ``checksum`` (the expected digest, split map or list of fold
maps) and ``notes`` (informational, ignored on replay).

Structure rules: the first step loads and is the only load; there is at
most one split; process steps come before the split; framework exports
need a split and single-file writes must not follow one.
"""
import logging
from dataclasses import dataclass
from typing import Any, Optional

import yaml

import validation
from core.dataset import (
    ProvenanceStep, validate_checksum, STEP_NAMES, LOAD, PROCESS, SPLIT,
    EXPORT,
)
from pipeline.operations import BadParamsError, get_operation

logger = logging.getLogger(__name__)

PIPELINE = 'pipeline'
TOP_LEVEL_FIELDS = [PIPELINE]
STEP_FIELDS = ['name', 'operation', 'params', 'checksum', 'notes']
REQUIRED_STEP_FIELDS = ['name', 'operation']


class SchemaError(validation.ValidationError):
    """A document does not follow the pipeline schema; names the step."""

    def __init__(self, message: str, step: Optional[int] = None,
                 field: Optional[str] = None):
        self.step = step
        self.field = field
        where = []
        if step is not None:
            where.append(f'step {step}')
        if field is not None:
            where.append(field)
        prefix = f'{", ".join(where)}: ' if where else ''
        super().__init__(f'{prefix}{message}')


class UnknownOperationError(SchemaError):
    pass


class BadStepParamsError(SchemaError, BadParamsError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    """Steps in document order; ``checksum`` holds the expected value."""
    steps: tuple

    def __len__(self) -> int:
        return len(self.steps)

    def __iter__(self):
        return iter(self.steps)

    def to_dict(self) -> dict:
        return {PIPELINE: [s.to_dict() for s in self.steps]}

    def to_yaml(self) -> str:
        return dump_document(self.to_dict())


def dump_document(doc: dict) -> str:
    return yaml.safe_dump(doc, sort_keys=False, allow_unicode=True,
                          default_flow_style=False)


def _parse_step(index: int, entry: Any) -> ProvenanceStep:
    if not isinstance(entry, dict):
        raise SchemaError('must be a mapping', index)
    try:
        validation.validate_no_extra_fields(entry, STEP_FIELDS)
        validation.validate_required_fields(entry, REQUIRED_STEP_FIELDS)
    except validation.ValidationError as err:
        raise SchemaError(str(err), index) from err
    name = entry['name']
    if name not in STEP_NAMES:
        raise SchemaError(f'must be one of: {", ".join(STEP_NAMES)}', index,
                          'name')
    op = get_operation(entry['operation'])
    if op is None:
        raise UnknownOperationError(
            f'unknown operation {entry["operation"]}', index, 'operation')
    if op.category != name:
        raise SchemaError(f'{op.name} is a {op.category} operation', index,
                          'name')
    try:
        params = op.normalize(entry.get('params'))
    except BadParamsError as err:
        raise BadStepParamsError(str(err), index, 'params') from err
    expected = entry.get('checksum')
    if expected is not None:
        if name == EXPORT:
            raise SchemaError('export steps carry no checksum', index,
                              'checksum')
        try:
            validate_checksum(expected)
        except validation.ValidationError as err:
            raise SchemaError(str(err), index, 'checksum') from err
    notes = entry.get('notes') or {}
    if not isinstance(notes, dict):
        raise SchemaError('must be a mapping', index, 'notes')
    return ProvenanceStep(name, op.name, params, expected, notes)


def check_structure(steps: list) -> None:
    """
    Raises:
        SchemaError: Steps are out of the load, process, split, export order.
    """
    if not steps:
        raise SchemaError('pipeline has no steps')
    split_at = None
    for index, step in enumerate(steps, start=1):
        if index == 1 and step.name != LOAD:
            raise SchemaError('the first step must be a load step', 1, 'name')
        if index > 1 and step.name == LOAD:
            raise SchemaError('only the first step may load', index, 'name')
        if step.name == SPLIT:
            if split_at is not None:
                raise SchemaError(
                    f'second split step (the first is step {split_at})',
                    index, 'name')
            split_at = index
        elif step.name == PROCESS and split_at is not None:
            raise SchemaError('process steps must come before the split',
                              index, 'name')
        elif step.name == EXPORT:
            takes_split = get_operation(step.operation).takes_split
            if takes_split and split_at is None:
                raise SchemaError(f'{step.operation} exports a split; add a '
                                  'split step before it', index, 'operation')
            if not takes_split and split_at is not None:
                raise SchemaError(f'{step.operation} writes one dataset and '
                                  'cannot follow a split', index, 'operation')


def config_from_dict(doc: Any) -> PipelineConfig:
    if not isinstance(doc, dict):
        raise SchemaError('document must be a mapping with a pipeline list')
    try:
        validation.validate_no_extra_fields(doc, TOP_LEVEL_FIELDS)
    except validation.ValidationError as err:
        raise SchemaError(str(err)) from err
    entries = doc.get(PIPELINE)
    if not isinstance(entries, list):
        raise SchemaError('pipeline must be a list of steps')
    steps = [_parse_step(index, entry)
             for index, entry in enumerate(entries, start=1)]
    check_structure(steps)
    logger.debug('parsed pipeline of %d steps', len(steps))
    return PipelineConfig(tuple(steps))


def parse_config(document: str) -> PipelineConfig:
    """
    Parse a YAML pipeline document.

    Raises:
        SchemaError: Malformed YAML, unknown keys or misplaced steps.
        UnknownOperationError: An operation name nothing provides.
        BadStepParamsError: Params that do not fit the operation.
    """
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as err:
        raise SchemaError(f'not valid YAML: {err}') from err
    return config_from_dict(doc)


def load_config(path) -> PipelineConfig:
    with open(path, encoding='utf-8') as f:
        return parse_config(f.read())
