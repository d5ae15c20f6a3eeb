"""
The operations a pipeline step may name, with their parameter schemas.

Each operation knows its step category, the parameters it accepts (with
aliases and defaults) and how to run against the current pipeline state:
nothing before a load, a Dataset after load/process steps, a SplitResult
or FoldSet after the split step. The CLI validates --param values against
the same schemas.
"""
import logging
import os
from dataclasses import dataclass
from functools import partial
from pathlib import Path
from typing import Any, Callable, Mapping, Optional

import validation
import formats.codec as codec
import formats.spec as fs
import processing.filters as pf
import splitting.strategies as st
from core.dataset import Dataset, LOAD, PROCESS, SPLIT, EXPORT
from formats.export import (
    OUTPUT_PATH, export_split, framework_names, resolve_profile,
)
from registry import catalog
from registry.fetch import fetch_and_load

logger = logging.getLogger(__name__)

FOLD_DIR = 'fold_{}'
PATH = 'path'


class BadParamsError(validation.ValidationError):
    pass


@dataclass(frozen=True)
class Param:
    name: str
    check: Callable[[Any, str], None]
    required: bool = False
    default: Any = None
    aliases: tuple = ()
    nullable: bool = False


@dataclass(frozen=True)
class Operation:
    name: str
    category: str
    params: tuple
    run: Callable
    check: Optional[Callable[[dict], None]] = None
    takes_split: bool = False

    @property
    def param_names(self) -> list:
        return [p.name for p in self.params]

    def normalize(self, params: Optional[Mapping]) -> dict:
        """
        Canonical names, checked values, in schema order. Defaults are not
        filled in, so a normalized document reads like its source.

        Raises:
            BadParamsError: Unknown, missing or out-of-range params.
        """
        if params is None:
            params = {}
        if not isinstance(params, Mapping):
            raise BadParamsError(f'{self.name}: params must be a mapping')
        given = {}
        for key, value in params.items():
            name = self._canonical(key)
            if name in given:
                raise BadParamsError(
                    f'{self.name}: {key} given twice (alias of {name})')
            given[name] = value
        try:
            validation.validate_no_extra_fields(given, self.param_names)
            missing = [p.name for p in self.params
                       if p.required and p.name not in given]
            if missing:
                raise validation.ValidationError(
                    f'Missing required fields: {", ".join(missing)}')
            out = {}
            for p in self.params:
                if p.name not in given:
                    continue
                value = given[p.name]
                if not (value is None and p.nullable):
                    p.check(value, p.name)
                out[p.name] = value
            if self.check is not None:
                self.check(out)
        except validation.ValidationError as err:
            raise BadParamsError(f'{self.name}: {err}') from err
        return out

    def resolved(self, params: Mapping) -> dict:
        """``params`` with defaults filled in for the runner."""
        full = {p.name: p.default for p in self.params}
        full.update(params)
        return full

    def _canonical(self, key: str) -> str:
        for p in self.params:
            if key == p.name or key in p.aliases:
                return p.name
        return key


@dataclass
class ExecutionContext:
    """
    Where relative paths resolve, the registry cache, and an optional load
    override used to run pipelines against injected data.
    """
    base_dir: Path = Path('.')
    cache_dir: Optional[Path] = None
    offline: bool = False
    pin: bool = False
    load_override: Optional[Callable] = None

    def path(self, value: str) -> Path:
        p = Path(os.path.expanduser(value))
        return p if p.is_absolute() else Path(self.base_dir) / p


# Param checks

def _string(value, name):
    validation.validate_non_empty_string(value, name)


def _boolean(value, name):
    validation.validate_type(value, name, bool)


def _mapping(value, name):
    if not isinstance(value, Mapping):
        raise validation.ValidationError(f'{name} must be a mapping')


_integer = validation.validate_integer
_positive = validation.validate_positive_integer
_number = validation.validate_number
_ratio = validation.validate_ratio
_ratio0 = partial(validation.validate_ratio, allow_zero=True)
_column = partial(validation.validate_integer, min_value=0)


def _choice(choices):
    return partial(validation.validate_enum, allowed_values=choices)


def _seed():
    return Param('seed', _integer, default=st.DEFAULT_SEED)


def _stratify():
    return Param('stratify', _choice(st.STRATA), default=st.SYSTEM)


def _ratios_below_one(params: dict) -> None:
    total = params.get('test_ratio', 0) + params.get('val_ratio', 0)
    if total >= 1:
        raise validation.ValidationError(
            'test_ratio + val_ratio must be below 1')


TABULAR_PARAMS = (
    Param('sep', fs.validate_separator, default=fs.TAB),
    Param('user_col', _column, default=0),
    Param('item_col', _column, default=1),
    Param('rating_col', _column, nullable=True),
    Param('timestamp_col', _column, nullable=True),
    Param('has_header', _boolean, default=False),
    Param('comment', _string, nullable=True),
)
INLINE_PARAMS = (
    Param('sep', fs.validate_separator, default=fs.TAB),
    Param('comment', _string, nullable=True),
)
JSON_PARAMS = (
    Param('json_layout', _choice(fs.JSON_LAYOUTS), default=fs.LINES),
    Param('json_keys', _mapping, nullable=True),
)
FORMAT_PARAMS = {
    fs.TABULAR: TABULAR_PARAMS,
    fs.INLINE: INLINE_PARAMS,
    fs.JSON: JSON_PARAMS,
}


def format_from_params(kind: str, params: Mapping) -> fs.FormatSpec:
    names = [p.name for p in FORMAT_PARAMS[kind]]
    options = {k: params[k] for k in names
               if k in params and params[k] is not None}
    try:
        return fs.FormatSpec(kind=kind, **options)
    except validation.ValidationError as err:
        raise BadParamsError(str(err)) from err


def _check_format(kind: str):
    def check(params: dict) -> None:
        format_from_params(kind, params)
    return check


# Runners: (state, params, context, operation name) -> new state

def _run_registry_load(state, p, ctx, name):
    desc = catalog.resolve_operation(name, p['version'])
    return fetch_and_load(desc, ctx.cache_dir, ctx.offline, ctx.pin)


def _run_read(kind):
    def run(state, p, ctx, name):
        spec = format_from_params(kind, p)
        return codec.read(ctx.path(p[PATH]), spec, operation=name,
                          params=p)
    return run


def _run_binarize(d, p, ctx, name):
    return pf.binarize(d, p['threshold'], p['mode'])


def _run_kcore(mode):
    def run(d, p, ctx, name):
        return pf.kcore(d, p[pf.CORES], mode, p.get('max_rounds'))
    return run


def _run_cold_users(d, p, ctx, name):
    return pf.drop_cold_users(d, p['min_interactions'])


def _run_filter_by_rating(d, p, ctx, name):
    threshold = pf.RatingThreshold(p['kind'], p.get('value'))
    return pf.filter_by_rating(d, threshold)


def _run_filter_by_time(d, p, ctx, name):
    return pf.filter_by_time(d, p['cutoff'], p['keep'])


def _run_deduplicate(d, p, ctx, name):
    return pf.deduplicate(d, p['mode'])


def _run_random_holdout(d, p, ctx, name):
    return st.random_holdout(d, p['test_ratio'], p['val_ratio'], p['seed'],
                             p['stratify'])


def _run_temporal_holdout(d, p, ctx, name):
    return st.temporal_holdout(d, p['test_ratio'], p['val_ratio'],
                               p['stratify'])


def _run_temporal_fixed(d, p, ctx, name):
    return st.temporal_fixed(d, p['cutoff'])


def _run_temporal_best_ratio(d, p, ctx, name):
    return st.temporal_best_ratio(d, p['test_ratio'])


def _run_leave_n(direction):
    def run(d, p, ctx, name):
        return st.leave_n_split(d, p['n'], direction, p['order'], p['seed'])
    return run


def _run_k_repeated(d, p, ctx, name):
    return st.k_repeated_holdout(d, p['k'], p['test_ratio'], p['val_ratio'],
                                 p['seed'], p['stratify'])


def _run_cross_validation(d, p, ctx, name):
    return st.cross_validation(d, p['k'], p['seed'], p['stratify'])


def _run_precomputed(d, p, ctx, name):
    spec = format_from_params(fs.TABULAR, p)
    val = ctx.path(p['val']) if p.get('val') else None
    return st.precomputed_split(d, ctx.path(p['test']), val, spec)


def _run_write(kind):
    def run(d, p, ctx, name):
        spec = format_from_params(kind, p)
        return codec.write(d, ctx.path(p[PATH]), spec, operation=name,
                           params=p)
    return run


def _export_one(result: st.SplitResult, framework: str, out_dir: Path):
    return export_split(result.train, result.test, result.val,
                        resolve_profile(framework), out_dir)


def _run_framework_export(state, p, ctx, name):
    out_dir = ctx.path(p[OUTPUT_PATH])
    if isinstance(state, st.FoldSet):
        return [_export_one(fold, name, out_dir / FOLD_DIR.format(i))
                for i, fold in enumerate(state)]
    return _export_one(state, name, out_dir)


def _build_static() -> dict:
    ops = [
        Operation(codec.READ_OPERATIONS[fs.TABULAR], LOAD,
                  (Param(PATH, _string, required=True),) + TABULAR_PARAMS,
                  _run_read(fs.TABULAR), _check_format(fs.TABULAR)),
        Operation(codec.READ_OPERATIONS[fs.INLINE], LOAD,
                  (Param(PATH, _string, required=True),) + INLINE_PARAMS,
                  _run_read(fs.INLINE), _check_format(fs.INLINE)),
        Operation(codec.READ_OPERATIONS[fs.JSON], LOAD,
                  (Param(PATH, _string, required=True),) + JSON_PARAMS,
                  _run_read(fs.JSON), _check_format(fs.JSON)),

        Operation(pf.BINARIZE, PROCESS, (
            Param('threshold', _number, required=True),
            Param('mode', _choice(pf.BINARIZE_MODES), default=pf.DROP_BELOW),
        ), _run_binarize),
        Operation(pf.USER_KCORE, PROCESS, (
            Param(pf.CORES, _positive, required=True, aliases=('k',)),
        ), _run_kcore(pf.USER_MODE)),
        Operation(pf.ITEM_KCORE, PROCESS, (
            Param(pf.CORES, _positive, required=True, aliases=('k',)),
        ), _run_kcore(pf.ITEM_MODE)),
        Operation(pf.ITERATIVE_KCORE, PROCESS, (
            Param(pf.CORES, _positive, required=True, aliases=('k',)),
            Param('max_rounds', _positive, nullable=True),
        ), _run_kcore(pf.ITERATIVE)),
        Operation(pf.COLD_USERS, PROCESS, (
            Param('min_interactions', _positive, required=True),
        ), _run_cold_users),
        Operation(pf.FILTER_BY_RATING, PROCESS, (
            Param('kind', _choice(pf.THRESHOLD_KINDS), default=pf.FIXED),
            Param('value', _number, nullable=True),
        ), _run_filter_by_rating, _check_threshold),
        Operation(pf.FILTER_BY_TIME, PROCESS, (
            Param('cutoff', _integer, required=True),
            Param('keep', _choice(pf.TIME_SIDES), required=True),
        ), _run_filter_by_time),
        Operation(pf.DEDUPLICATE, PROCESS, (
            Param('mode', _choice(pf.DEDUP_MODES), default=pf.EXACT),
        ), _run_deduplicate),

        Operation(st.RANDOM_HOLDOUT, SPLIT, (
            Param('test_ratio', _ratio, required=True),
            Param('val_ratio', _ratio0, default=0.0),
            _seed(), _stratify(),
        ), _run_random_holdout, _ratios_below_one),
        Operation(st.TEMPORAL_HOLDOUT, SPLIT, (
            Param('test_ratio', _ratio, required=True),
            Param('val_ratio', _ratio0, default=0.0),
            _stratify(),
        ), _run_temporal_holdout, _ratios_below_one),
        Operation(st.TEMPORAL_FIXED, SPLIT, (
            Param('cutoff', _integer, required=True),
        ), _run_temporal_fixed),
        Operation(st.TEMPORAL_BEST_RATIO, SPLIT, (
            Param('test_ratio', _ratio, required=True),
        ), _run_temporal_best_ratio),
        Operation(st.LEAVE_N_OUT, SPLIT, (
            Param('n', _positive, default=1),
            Param('order', _choice(st.ORDERS), default=st.TEMPORAL_ORDER),
            _seed(),
        ), _run_leave_n(st.OUT)),
        Operation(st.LEAVE_N_IN, SPLIT, (
            Param('n', _positive, default=1),
            Param('order', _choice(st.ORDERS), default=st.TEMPORAL_ORDER),
            _seed(),
        ), _run_leave_n(st.IN)),
        Operation(st.K_REPEATED_HOLDOUT, SPLIT, (
            Param('k', _positive, required=True),
            Param('test_ratio', _ratio, required=True),
            Param('val_ratio', _ratio0, default=0.0),
            _seed(), _stratify(),
        ), _run_k_repeated, _ratios_below_one),
        Operation(st.CROSS_VALIDATION, SPLIT, (
            Param('k', partial(validation.validate_integer, min_value=2),
                  required=True),
            _seed(), _stratify(),
        ), _run_cross_validation),
        Operation(st.PRECOMPUTED_SPLIT, SPLIT, (
            Param('test', _string, required=True),
            Param('val', _string, nullable=True),
        ) + TABULAR_PARAMS, _run_precomputed, _check_format(fs.TABULAR)),

        Operation(codec.WRITE_OPERATIONS[fs.TABULAR], EXPORT,
                  (Param(PATH, _string, required=True),) + TABULAR_PARAMS,
                  _run_write(fs.TABULAR), _check_format(fs.TABULAR)),
        Operation(codec.WRITE_OPERATIONS[fs.INLINE], EXPORT,
                  (Param(PATH, _string, required=True),) + INLINE_PARAMS,
                  _run_write(fs.INLINE), _check_format(fs.INLINE)),
        Operation(codec.WRITE_OPERATIONS[fs.JSON], EXPORT,
                  (Param(PATH, _string, required=True),) + JSON_PARAMS,
                  _run_write(fs.JSON), _check_format(fs.JSON)),
    ]
    return {op.name: op for op in ops}


def _check_threshold(params: dict) -> None:
    pf.RatingThreshold(params.get('kind', pf.FIXED), params.get('value'))


STATIC_OPERATIONS = _build_static()


def _registry_load(name: str) -> Operation:
    return Operation(name, LOAD, (Param('version', _version, required=True),),
                     _run_registry_load)


def _version(value, name):
    if isinstance(value, bool) or not isinstance(value, (str, int)):
        raise validation.ValidationError(f'{name} must be a string')
    validation.validate_non_empty_string(str(value), name)


def _framework_export(name: str) -> Operation:
    return Operation(name, EXPORT,
                     (Param(OUTPUT_PATH, _string, required=True),),
                     _run_framework_export, takes_split=True)


def get_operation(name: str) -> Optional[Operation]:
    """
    The operation called ``name``: a built-in, a catalog dataset (load) or
    an export profile (export). None when nothing matches.
    """
    if not isinstance(name, str):
        return None
    if name in STATIC_OPERATIONS:
        return STATIC_OPERATIONS[name]
    if name in catalog.operation_names():
        return _registry_load(name)
    if name in framework_names():
        return _framework_export(name)
    return None


def operation_names(category: Optional[str] = None) -> list:
    names = list(STATIC_OPERATIONS) + catalog.operation_names() + \
        framework_names()
    return sorted(n for n in names
                  if category is None or get_operation(n).category == category)


def run_operation(op: Operation, state: Any, params: Mapping,
                  ctx: ExecutionContext) -> Any:
    resolved = op.resolved(params)
    logger.info('running %s %s', op.category, op.name)
    if op.category != LOAD and not isinstance(
            state, (Dataset, st.SplitResult, st.FoldSet)):
        raise validation.ValidationError(f'{op.name} has no input')
    return op.run(state, resolved, ctx, op.name)
