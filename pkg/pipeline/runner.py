"""
Pipeline execution, replay verification and history export.
"""
import logging
from dataclasses import dataclass, field
from typing import Any, Mapping, Optional

import validation
from core.dataset import (
    Dataset, ProvenanceStep, checksum, LOAD, EXPORT,
)
from pipeline.config import PipelineConfig, dump_document, PIPELINE
from pipeline.operations import (
    ExecutionContext, get_operation, run_operation,
)
from splitting.strategies import FoldSet, SplitResult

logger = logging.getLogger(__name__)

# Modes
RECORD = 'record'
VERIFY = 'verify'
MODES = [RECORD, VERIFY]

# Step check outcomes
MATCH = 'match'
MISMATCH = 'mismatch'
UNCHECKED = 'unchecked'


class PipelineStepError(RuntimeError):
    """A step failed; ``step`` is its 1-based index."""

    def __init__(self, step: int, operation: str, cause: Exception):
        self.step = step
        self.operation = operation
        self.cause = cause
        super().__init__(f'step {step} ({operation}): {cause}')


@dataclass(frozen=True)
class StepCheck:
    step: int
    operation: str
    status: str
    expected: Any = None
    actual: Any = None

    def to_text(self) -> str:
        line = f'step {self.step} {self.operation}: {self.status}'
        if self.status == MISMATCH:
            line += f' (expected {self.expected}, got {self.actual})'
        return line


@dataclass(frozen=True)
class VerificationReport:
    checks: tuple = ()

    @property
    def ok(self) -> bool:
        return not self.mismatches

    @property
    def mismatches(self) -> list:
        return [c for c in self.checks if c.status == MISMATCH]

    def to_text(self) -> str:
        return '\n'.join(c.to_text() for c in self.checks)


@dataclass(frozen=True)
class PipelineResult:
    """
    final: Dataset, SplitResult or FoldSet after the last non-export step
    history: one executed step per config step, with computed checksums
    report: per-step verification (every step unchecked in record mode)
    outputs: what each export step produced, in order
    """
    final: Any
    history: tuple
    mode: str = RECORD
    report: VerificationReport = field(default_factory=VerificationReport)
    outputs: tuple = ()


def state_checksum(state: Any):
    """Digest, split map or list of fold maps for a pipeline state."""
    if isinstance(state, Dataset):
        return checksum(state)
    if isinstance(state, SplitResult):
        return state.checksums
    if isinstance(state, FoldSet):
        return state.checksums
    raise validation.ValidationError(f'Bad type for {type(state)=}')


def _plain(value):
    if isinstance(value, Mapping):
        return {k: value[k] for k in value}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def _outcome_notes(out: Any) -> dict:
    if isinstance(out, Dataset) and out.history:
        return dict(out.history[-1].notes)
    if isinstance(out, SplitResult):
        return dict(out.step.notes)
    return {}


def _check(index: int, step: ProvenanceStep, actual) -> StepCheck:
    if step.checksum is None or step.name == EXPORT:
        return StepCheck(index, step.operation, UNCHECKED)
    expected = _plain(step.checksum)
    actual = _plain(actual)
    status = MATCH if expected == actual else MISMATCH
    if status == MISMATCH:
        logger.warning('step %d %s: checksum mismatch', index,
                       step.operation)
    return StepCheck(index, step.operation, status, expected, actual)


def execute(config: PipelineConfig, mode: str = RECORD,
            context: Optional[ExecutionContext] = None) -> PipelineResult:
    """
    Run every step in order and record the checksum of each result.

    In verify mode each computed checksum is compared with the step's
    expected value; execution continues past mismatches so the report lists
    all of them.

    Raises:
        PipelineStepError: A step failed; wraps the original error.
    """
    validation.validate_enum(mode, 'mode', MODES)
    ctx = context or ExecutionContext()
    state = None
    history = []
    checks = []
    outputs = []
    for index, step in enumerate(config.steps, start=1):
        op = get_operation(step.operation)
        try:
            if op is None:
                raise validation.ValidationError(
                    f'unknown operation {step.operation}')
            if step.name == LOAD and ctx.load_override is not None:
                out = ctx.load_override(step)
            else:
                out = run_operation(op, state, step.params, ctx)
        except (validation.ValidationError, OSError, RuntimeError) as err:
            raise PipelineStepError(index, step.operation, err) from err
        if step.name == EXPORT:
            outputs.append(out)
            digest = None
        else:
            state = out
            digest = state_checksum(state)
        history.append(ProvenanceStep(step.name, step.operation, step.params,
                                      digest, _outcome_notes(out)))
        checks.append(_check(index, step, digest) if mode == VERIFY
                      else StepCheck(index, step.operation, UNCHECKED))
        logger.info('step %d %s done', index, step.operation)
    return PipelineResult(state, tuple(history), mode,
                          VerificationReport(tuple(checks)), tuple(outputs))


def history_document(steps) -> str:
    return dump_document({PIPELINE: [s.to_dict() for s in steps]})


def export_history(result: PipelineResult) -> str:
    """The executed history as a pipeline document that replays itself."""
    return history_document(result.history)
