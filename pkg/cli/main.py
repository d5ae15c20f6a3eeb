"""
Command-line interface.

    recdata run PIPELINE.yml [--verify] [--output HISTORY.yml]
    recdata stats FILE [format flags] [--json] [--popularity user|item]
    recdata convert FILE OUT [format flags] --to json
    recdata process FILE OUT --op NAME [--param key=value ...]
    recdata split FILE OUT_DIR --strategy NAME [--param ...] [--seed N]
    recdata export TRAIN TEST [--val VAL] --framework NAME --output DIR
    recdata download NAME --version V [--pin] | --list
    recdata checksum FILE [format flags]

Exit status: 0 success, 1 operational error, 2 usage error, 3 checksum
mismatch in ``run --verify``. Data and reports go to stdout; diagnostics
go to stderr.
"""
import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import yaml

import validation
import formats.codec as codec
import formats.spec as fs
import metrics.stats as ms
from core.dataset import Dataset, ProvenanceStep, checksum, SPLIT
from formats.export import export_split, resolve_profile
from pipeline.config import load_config
from pipeline.operations import (
    BadParamsError, ExecutionContext, get_operation, run_operation,
)
from pipeline.runner import (
    execute, export_history, history_document, RECORD, VERIFY,
)
from registry import catalog, config as registry_config
from registry.fetch import dataset_dir, fetch_and_load
from splitting.strategies import FoldSet, SplitResult
from utils import atomic_write

logger = logging.getLogger(__name__)

PROG = 'recdata'

EXIT_OK = 0
EXIT_ERROR = 1
EXIT_USAGE = 2
EXIT_MISMATCH = 3

LOG_LEVEL_VAR = 'LOG_LEVEL'
DEFAULT_LOG_LEVEL = 'WARNING'

HISTORY_FILE = 'history.yml'
FOLD_DIR = 'fold_{}'

ESCAPES = {'\\t': '\t', '\\s': ' '}


class UsageError(validation.ValidationError):
    """Bad command line; main() exits 2."""


class _Parser(argparse.ArgumentParser):

    def error(self, message):
        raise UsageError(f'{self.prog}: {message}')


@dataclass(frozen=True)
class Command:
    verb: str
    options: dict = field(default_factory=dict)


def _add_format_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group('input format')
    g.add_argument('--format', default=fs.TABULAR, choices=fs.KINDS,
                   help='layout of the input file (default: tabular)')
    g.add_argument('--sep', default=fs.TAB,
                   help='field separator (default: tab)')
    g.add_argument('--user-col', type=int, default=0)
    g.add_argument('--item-col', type=int, default=1)
    g.add_argument('--rating-col', type=int)
    g.add_argument('--timestamp-col', type=int)
    g.add_argument('--header', action='store_true',
                   help='the first line is a header')
    g.add_argument('--comment', help='skip lines starting with this prefix')
    g.add_argument('--json-layout', default=fs.LINES,
                   choices=fs.JSON_LAYOUTS)


def _add_output_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group('output format')
    g.add_argument('--to', choices=fs.KINDS,
                   help='layout of the output (default: the input layout)')
    g.add_argument('--to-sep', help='output separator (default: --sep)')
    g.add_argument('--to-header', action='store_true',
                   help='write a header line (tabular)')
    g.add_argument('--to-json-layout', default=fs.LINES,
                   choices=fs.JSON_LAYOUTS)


def _add_op_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument('--param', action='append', default=[],
                   metavar='KEY=VALUE',
                   help='operation parameter; may be repeated')
    p.add_argument('--seed', type=int,
                   help='seed for randomized operations')


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog=PROG, description=(
        'Load, process, split and export recommender interaction data '
        'with a replayable provenance history.'))
    verbs = parser.add_subparsers(dest='verb', required=True,
                                  parser_class=_Parser)

    p = verbs.add_parser('run', help='execute a pipeline document')
    p.add_argument('config')
    p.add_argument('--verify', action='store_true',
                   help='compare checksums with the document; exit 3 on '
                   'mismatch')
    p.add_argument('--output', help='write the recorded history here')
    p.add_argument('--base-dir',
                   help='resolve relative paths here (default: the '
                   'document folder)')
    p.add_argument('--offline', action='store_true')
    p.add_argument('--cache-dir')

    p = verbs.add_parser('stats', help='dataset characteristics')
    p.add_argument('input')
    _add_format_flags(p)
    p.add_argument('--json', action='store_true')
    p.add_argument('--popularity', choices=ms.AXES,
                   help='also classify users or items by popularity')

    p = verbs.add_parser('convert', help='rewrite a file in another layout')
    p.add_argument('input')
    p.add_argument('output')
    _add_format_flags(p)
    _add_output_flags(p)

    p = verbs.add_parser('process', help='apply one processing operation')
    p.add_argument('input')
    p.add_argument('output')
    _add_format_flags(p)
    _add_output_flags(p)
    p.add_argument('--op', required=True, help='operation name')
    _add_op_flags(p)

    p = verbs.add_parser('split', help='split into train/val/test files')
    p.add_argument('input')
    p.add_argument('out_dir')
    _add_format_flags(p)
    p.add_argument('--strategy', required=True, help='split operation name')
    _add_op_flags(p)
    p.add_argument('--framework',
                   help='write the parts with this export profile')

    p = verbs.add_parser('export', help='export split files for a framework')
    p.add_argument('train')
    p.add_argument('test')
    p.add_argument('--val')
    _add_format_flags(p)
    p.add_argument('--framework', required=True)
    p.add_argument('--output', required=True, help='output folder')

    p = verbs.add_parser('download', help='fetch a registry dataset')
    p.add_argument('name', nargs='?')
    p.add_argument('--version')
    p.add_argument('--pin', action='store_true',
                   help='record the digest of an unpinned source')
    p.add_argument('--offline', action='store_true')
    p.add_argument('--cache-dir')
    p.add_argument('--list', action='store_true',
                   help='list the catalog and exit')

    p = verbs.add_parser('checksum', help='content checksum of a file')
    p.add_argument('input')
    _add_format_flags(p)
    return parser


def _unescape(sep: Optional[str]) -> Optional[str]:
    """Shell-friendly separators: a literal \\t is a tab, \\s a space."""
    return ESCAPES.get(sep, sep)


def _input_spec(args) -> fs.FormatSpec:
    return fs.FormatSpec(
        kind=args.format, sep=_unescape(args.sep), user_col=args.user_col,
        item_col=args.item_col, rating_col=args.rating_col,
        timestamp_col=args.timestamp_col, has_header=args.header,
        comment=args.comment, json_layout=args.json_layout)


def _parse_params(pairs: list) -> dict:
    params = {}
    for pair in pairs:
        key, sep, raw = pair.partition('=')
        if not sep or not key:
            raise UsageError(f'--param expects key=value, got {pair!r}')
        try:
            params[key] = yaml.safe_load(raw) if raw else raw
        except yaml.YAMLError:
            params[key] = raw
    return params


def _operation_options(name: str, category: str, args) -> dict:
    op = get_operation(name)
    if op is None or op.category != category:
        raise UsageError(f'no {category} operation named {name}')
    params = _parse_params(args.param)
    if args.seed is not None:
        if 'seed' not in op.param_names:
            raise UsageError(f'{name} takes no --seed')
        params['seed'] = args.seed
    try:
        return {'operation': name, 'params': op.normalize(params)}
    except BadParamsError as err:
        raise UsageError(str(err)) from err


def parse_args(argv: Optional[list] = None) -> Command:
    """
    Raises:
        UsageError: The offending flag or value is named in the message.
    """
    args = build_parser().parse_args(argv)
    verb = args.verb
    options = {}
    try:
        if hasattr(args, 'format'):
            options['format'] = _input_spec(args)
        if verb == 'run':
            options = {'config': args.config,
                       'mode': VERIFY if args.verify else RECORD,
                       'output': args.output, 'base_dir': args.base_dir,
                       'offline': args.offline, 'cache_dir': args.cache_dir}
        elif verb == 'stats':
            options.update(input=args.input, json=args.json,
                           popularity=args.popularity)
        elif verb in ('convert', 'process'):
            options.update(input=args.input, output=args.output,
                           to=args.to or args.format,
                           to_sep=_unescape(args.to_sep or args.sep),
                           to_header=args.to_header,
                           to_json_layout=args.to_json_layout)
            if verb == 'process':
                options.update(_operation_options(args.op, 'process', args))
        elif verb == 'split':
            options.update(input=args.input, out_dir=args.out_dir)
            options.update(_operation_options(args.strategy, SPLIT, args))
            if args.framework:
                options['framework'] = resolve_profile(args.framework)
        elif verb == 'export':
            options.update(train=args.train, test=args.test, val=args.val,
                           output=args.output,
                           framework=resolve_profile(args.framework))
        elif verb == 'download':
            if not args.list and not (args.name and args.version):
                raise UsageError('download needs NAME and --version '
                                 '(or --list)')
            options = {'name': args.name, 'version': args.version,
                       'pin': args.pin, 'offline': args.offline,
                       'cache_dir': args.cache_dir, 'list': args.list}
        elif verb == 'checksum':
            options['input'] = args.input
    except UsageError:
        raise
    except validation.ValidationError as err:
        raise UsageError(str(err)) from err
    return Command(verb, options)


def _output_spec(o: dict, d: Dataset) -> fs.FormatSpec:
    kind = o['to']
    if kind == fs.TABULAR:
        rating = 2 if d.has_ratings else None
        timestamp = (3 if d.has_ratings else 2) if d.has_timestamps else None
        return fs.tabular(o['to_sep'], 0, 1, rating, timestamp,
                          o['to_header'])
    if kind == fs.INLINE:
        return fs.inline(o['to_sep'])
    return fs.json_spec(o['to_json_layout'])


def _full_spec(d: Dataset) -> fs.FormatSpec:
    return _output_spec({'to': fs.TABULAR, 'to_sep': fs.TAB,
                         'to_header': False}, d)


def _write_text(path: Optional[str], text: str, out) -> None:
    if path is None:
        out.write(text)
        return
    with atomic_write(path) as f:
        f.write(text)


def _run(o: dict, out) -> int:
    cfg = load_config(o['config'])
    base = o['base_dir'] or os.path.dirname(os.path.abspath(o['config']))
    ctx = ExecutionContext(base_dir=Path(base), offline=o['offline'],
                           cache_dir=o['cache_dir'])
    result = execute(cfg, o['mode'], ctx)
    if o['mode'] == VERIFY:
        out.write(result.report.to_text() + '\n')
        if not result.report.ok:
            for check in result.report.mismatches:
                print(f'{PROG}: checksum mismatch at step {check.step} '
                      f'({check.operation})', file=sys.stderr)
            return EXIT_MISMATCH
        if o['output']:
            _write_text(o['output'], export_history(result), out)
        return EXIT_OK
    _write_text(o['output'], export_history(result), out)
    return EXIT_OK


def _stats(o: dict, out) -> int:
    d = codec.read(o['input'], o['format'])
    report = ms.metrics_report(d)
    classes = (ms.popularity_classify(d, o['popularity'])
               if o['popularity'] else None)
    if o['json']:
        doc = report.to_dict()
        if classes is not None:
            doc['popularity'] = classes.to_dict()
        out.write(json.dumps(doc, indent=2) + '\n')
        return EXIT_OK
    out.write(report.to_text())
    if classes is not None:
        for name in ms.POPULARITY_CLASSES:
            out.write(f'{name}  {len(classes.members(name))}\n')
    return EXIT_OK


def _convert(o: dict, out) -> int:
    d = codec.read(o['input'], o['format'])
    codec.write(d, o['output'], _output_spec(o, d))
    return EXIT_OK


def _process(o: dict, out) -> int:
    d = codec.read(o['input'], o['format'])
    op = get_operation(o['operation'])
    result = run_operation(op, d, o['params'], ExecutionContext())
    codec.write(result, o['output'], _output_spec(o, result))
    logger.info('%s: %d -> %d interactions', op.name, len(d), len(result))
    return EXIT_OK


def _write_parts(result: SplitResult, out_dir: Path, profile=None) -> None:
    if profile is not None:
        export_split(result.train, result.test, result.val, profile, out_dir)
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, part in result.splits():
        codec.write(part, out_dir / f'{name}.tsv', _full_spec(part))


def split_history(state) -> list:
    """Provenance of a split: the input history plus one split step."""
    if isinstance(state, SplitResult):
        return list(state.train.history)
    first = state[0].train.history
    step = first[-1]
    return list(first[:-1]) + [ProvenanceStep(
        SPLIT, step.operation, step.params, state.checksums)]


def _split(o: dict, out) -> int:
    d = codec.read(o['input'], o['format'])
    op = get_operation(o['operation'])
    state = run_operation(op, d, o['params'], ExecutionContext())
    out_dir = Path(o['out_dir'])
    profile = o.get('framework')
    if isinstance(state, FoldSet):
        for i, fold in enumerate(state):
            _write_parts(fold, out_dir / FOLD_DIR.format(i), profile)
    else:
        _write_parts(state, out_dir, profile)
    _write_text(str(out_dir / HISTORY_FILE),
                history_document(split_history(state)), out)
    return EXIT_OK


def _export(o: dict, out) -> int:
    spec = o['format']
    parts = {name: codec.read(o[name], spec)
             for name in ('train', 'test', 'val') if o.get(name)}
    manifest = export_split(parts['train'], parts['test'], parts.get('val'),
                            o['framework'], o['output'])
    for path in manifest.paths:
        out.write(path + '\n')
    return EXIT_OK


def _download(o: dict, out) -> int:
    if o['list']:
        for desc in catalog.list_datasets():
            flag = '  (manual)' if desc.is_manual else ''
            out.write(f'{desc.name}\t{desc.version}\t{desc.operation}'
                      f'{flag}\n')
        return EXIT_OK
    desc = catalog.resolve(o['name'], o['version'])
    d = fetch_and_load(desc, o['cache_dir'], o['offline'], o['pin'])
    folder = dataset_dir(desc, o['cache_dir'] or registry_config.cache_dir())
    out.write(f'{desc.name}\t{desc.version}\t{len(d)}\t{checksum(d)}\t'
              f'{folder}\n')
    return EXIT_OK


def _checksum(o: dict, out) -> int:
    d = codec.read(o['input'], o['format'])
    out.write(f'{checksum(d)}  {o["input"]}\n')
    return EXIT_OK


HANDLERS = {
    'run': _run,
    'stats': _stats,
    'convert': _convert,
    'process': _process,
    'split': _split,
    'export': _export,
    'download': _download,
    'checksum': _checksum,
}


def execute_command(cmd: Command, out=None) -> int:
    """Run ``cmd``; returns the exit status."""
    out = out or sys.stdout
    try:
        return HANDLERS[cmd.verb](cmd.options, out)
    except (validation.ValidationError, OSError, RuntimeError) as err:
        print(f'{PROG}: error: {err}', file=sys.stderr)
        logger.debug('%s failed', cmd.verb, exc_info=True)
        return EXIT_ERROR


def configure_logging() -> None:
    level = os.getenv(LOG_LEVEL_VAR, DEFAULT_LOG_LEVEL).upper()
    logging.basicConfig(
        stream=sys.stderr, level=getattr(logging, level, logging.WARNING),
        format='%(asctime)s %(levelname)s %(name)s: %(message)s')


def main(argv: Optional[list] = None) -> int:
    configure_logging()
    try:
        cmd = parse_args(argv)
    except UsageError as err:
        print(str(err), file=sys.stderr)
        return EXIT_USAGE
    return execute_command(cmd)


if __name__ == '__main__':
    raise SystemExit(main())
