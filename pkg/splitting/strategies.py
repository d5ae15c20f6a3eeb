"""
Splitting strategies: random hold-out, leave-n-out/in, temporal splits,
K-repeated hold-out, cross-validation and pre-computed splits.

All random choices come from splitting.rng seeded with the caller's seed,
applied to interactions in canonical order, so results do not depend on
input order. Split sizes use half-up rounding: floor(n * ratio + 0.5).
A validation ratio is a fraction of the whole input, drawn after the test
set (test 0.2 + val 0.1 gives 70/10/20).

Each split Dataset keeps the input history plus one ``split`` step whose
checksum maps test/val/train to the digests of the parts. Parts keep the
input order of their interactions.
"""
import logging
import math
import os
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np

import validation
from core.dataset import (
    Dataset, ProvenanceStep, append_history, canonical_positions,
    canonical_text, checksum, SPLIT, TEST, VAL, TRAIN, TIMESTAMP,
)
from core.dataset import USER as USER_COLUMN
from formats.codec import read, format_params
from formats.spec import FormatSpec
from processing.filters import require_timestamps
from splitting.rng import SplitMix64, shuffle_in_place

logger = logging.getLogger(__name__)

# Operation names
RANDOM_HOLDOUT = 'RandomHoldOut'
TEMPORAL_HOLDOUT = 'TemporalHoldOut'
TEMPORAL_FIXED = 'TemporalFixedTimestamp'
TEMPORAL_BEST_RATIO = 'TemporalBestRatio'
LEAVE_N_OUT = 'LeaveNOut'
LEAVE_N_IN = 'LeaveNIn'
K_REPEATED_HOLDOUT = 'KRepeatedHoldOut'
CROSS_VALIDATION = 'CrossValidation'
PRECOMPUTED_SPLIT = 'PrecomputedSplit'

# Stratification
SYSTEM = 'system'
USER = 'user'
STRATA = [SYSTEM, USER]

# Leave-n
OUT = 'out'
IN = 'in'
DIRECTIONS = [OUT, IN]
RANDOM_ORDER = 'random'
TEMPORAL_ORDER = 'temporal'
ORDERS = [RANDOM_ORDER, TEMPORAL_ORDER]

# Temporal modes
FIXED_TIMESTAMP = 'fixed_timestamp'
BEST_RATIO = 'best_ratio'
BY_RATIO = 'by_ratio'
TEMPORAL_MODES = [FIXED_TIMESTAMP, BEST_RATIO, BY_RATIO]

DEFAULT_SEED = 42

OVERLAPPING_SPLITS = 'OverlappingSplits'


class BadRatioError(validation.ValidationError):
    pass


class TooFewInteractionsError(validation.ValidationError):
    pass


class OverlappingSplitsWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SplitResult:
    train: Dataset
    test: Dataset
    val: Optional[Dataset] = None

    def splits(self) -> list:
        """(name, Dataset) pairs in test, val, train order."""
        out = [(TEST, self.test)]
        if self.val is not None:
            out.append((VAL, self.val))
        out.append((TRAIN, self.train))
        return out

    @property
    def checksums(self) -> dict:
        return {name: checksum(d) for name, d in self.splits()}

    @property
    def step(self) -> ProvenanceStep:
        return self.train.history[-1]


@dataclass(frozen=True)
class FoldSet:
    kind: str
    folds: tuple

    def __len__(self) -> int:
        return len(self.folds)

    def __iter__(self):
        return iter(self.folds)

    def __getitem__(self, index: int) -> SplitResult:
        return self.folds[index]

    @property
    def checksums(self) -> list:
        return [fold.checksums for fold in self.folds]


def half_up(x: float) -> int:
    return math.floor(x + 0.5)


def _check_ratios(test_ratio, val_ratio=0.0) -> None:
    try:
        validation.validate_ratio(test_ratio, 'test_ratio')
        validation.validate_ratio(val_ratio, 'val_ratio', allow_zero=True)
    except validation.ValidationError as err:
        raise BadRatioError(str(err)) from err
    if test_ratio + val_ratio >= 1:
        raise BadRatioError('test_ratio + val_ratio must be below 1')


def _check_choice(value, name, allowed) -> None:
    validation.validate_enum(value, name, allowed)


def _new_labels(d: Dataset) -> np.ndarray:
    return np.full(len(d), TRAIN, dtype=object)


def _assemble(d: Dataset, labels: np.ndarray, operation: str,
              params: Mapping, with_val: bool,
              notes: Optional[Mapping] = None) -> SplitResult:
    names = [TEST, VAL, TRAIN] if with_val else [TEST, TRAIN]
    parts = {name: Dataset.from_frame(d.frame[labels == name], d.history)
             for name in names}
    digests = {name: checksum(parts[name]) for name in names}
    step = ProvenanceStep(SPLIT, operation, params, digests, notes or {})
    done = {name: append_history(parts[name], step) for name in names}
    logger.debug('%s: %s', operation,
                 {name: len(parts[name]) for name in names})
    return SplitResult(done[TRAIN], done[TEST], done.get(VAL))


def _canonical_rank(d: Dataset) -> np.ndarray:
    """Rank of every row in canonical order (equal rows by position)."""
    rank = np.empty(len(d), dtype=np.int64)
    rank[canonical_positions(d)] = np.arange(len(d))
    return rank


def _canonical_order(indices: np.ndarray, rank: np.ndarray) -> list:
    indices = np.asarray(indices, dtype=np.int64)
    return indices[np.argsort(rank[indices], kind='stable')].tolist()


def _by_user(d: Dataset) -> list:
    """Row positions of each user's interactions, users in sorted order."""
    groups = d.frame.groupby(USER_COLUMN, sort=False).indices
    return [groups[user] for user in sorted(groups)]


def _timestamps(d: Dataset) -> np.ndarray:
    return d.frame[TIMESTAMP].to_numpy(dtype=np.int64, na_value=0)


def _chronological(indices: np.ndarray, stamps: np.ndarray,
                   rank: np.ndarray) -> list:
    """Oldest first; equal timestamps in canonical order."""
    indices = np.asarray(indices, dtype=np.int64)
    return indices[np.lexsort((rank[indices], stamps[indices]))].tolist()


def _ratio_sizes(n: int, test_ratio: float, val_ratio: float,
                 keep_train: bool) -> tuple:
    n_test = half_up(n * test_ratio)
    n_val = half_up(n * val_ratio)
    if keep_train:
        n_test = min(n_test, n - 1)
        n_val = min(n_val, n - 1 - n_test)
    else:
        n_test = min(n_test, n)
        n_val = min(n_val, n - n_test)
    return n_test, n_val


def _label_front(labels: np.ndarray, order: list, n_test: int,
                 n_val: int) -> None:
    """The first n_test of ``order`` go to test, the next n_val to val."""
    labels[order[:n_test]] = TEST
    labels[order[n_test:n_test + n_val]] = VAL


def _label_back(labels: np.ndarray, order: list, n_test: int,
                n_val: int) -> None:
    """The last n_test of ``order`` go to test, the n_val before to val."""
    n = len(order)
    labels[order[n - n_test:]] = TEST
    labels[order[n - n_test - n_val:n - n_test]] = VAL


def _stratified_params(params: dict, stratify: str) -> dict:
    if stratify != SYSTEM:
        params['stratify'] = stratify
    return params


def random_holdout(d: Dataset, test_ratio: float, val_ratio: float = 0.0,
                   seed: int = DEFAULT_SEED,
                   stratify: str = SYSTEM) -> SplitResult:
    """
    system: shuffle everything, first round(n*test_ratio) to test, the next
    round(n*val_ratio) to val, the rest to train.
    user: the same inside each user's history; users with one interaction
    stay in train and every user keeps at least one training interaction.

    Raises:
        BadRatioError: Ratios outside (0, 1) / [0, 1) or summing to >= 1.
    """
    _check_ratios(test_ratio, val_ratio)
    _check_choice(stratify, 'stratify', STRATA)
    labels = _holdout_labels(d, test_ratio, val_ratio, seed, stratify)
    params = {'test_ratio': test_ratio}
    if val_ratio:
        params['val_ratio'] = val_ratio
    params['seed'] = seed
    return _assemble(d, labels, RANDOM_HOLDOUT,
                     _stratified_params(params, stratify), val_ratio > 0)


def _holdout_labels(d: Dataset, test_ratio: float, val_ratio: float,
                    seed: int, stratify: str) -> np.ndarray:
    rng = SplitMix64(seed)
    rank = _canonical_rank(d)
    labels = _new_labels(d)
    if stratify == SYSTEM:
        order = canonical_positions(d).tolist()
        shuffle_in_place(order, rng)
        n_test, n_val = _ratio_sizes(len(d), test_ratio, val_ratio, False)
        _label_front(labels, order, n_test, n_val)
    else:
        for indices in _by_user(d):
            if len(indices) < 2:
                continue
            order = _canonical_order(indices, rank)
            shuffle_in_place(order, rng)
            n_test, n_val = _ratio_sizes(len(order), test_ratio, val_ratio,
                                         True)
            _label_front(labels, order, n_test, n_val)
    return labels


def leave_n_split(d: Dataset, n: int = 1, direction: str = OUT,
                  order: str = TEMPORAL_ORDER,
                  seed: int = DEFAULT_SEED) -> SplitResult:
    """
    Per user. out: n interactions go to test (the n most recent, or n
    seeded picks). in: the n oldest (or n seeded picks) stay in train and
    the rest go to test. Users with n or fewer interactions stay wholly in
    train. No validation part.

    Raises:
        NoTimestampsError: Temporal order without timestamps.
    """
    validation.validate_positive_integer(n, 'n')
    _check_choice(direction, 'direction', DIRECTIONS)
    _check_choice(order, 'order', ORDERS)
    operation = LEAVE_N_OUT if direction == OUT else LEAVE_N_IN
    if order == TEMPORAL_ORDER:
        require_timestamps(d, operation)
    rng = SplitMix64(seed)
    rank = _canonical_rank(d)
    stamps = _timestamps(d)
    labels = _new_labels(d)
    for indices in _by_user(d):
        if len(indices) <= n:
            continue
        if order == TEMPORAL_ORDER:
            ranked = _chronological(indices, stamps, rank)
        else:
            ranked = _canonical_order(indices, rank)
            shuffle_in_place(ranked, rng)
        if direction == OUT:
            moved = ranked[-n:] if order == TEMPORAL_ORDER else ranked[:n]
        else:
            moved = ranked[n:]
        labels[moved] = TEST
    params = {'n': n, 'order': order}
    if order == RANDOM_ORDER:
        params['seed'] = seed
    return _assemble(d, labels, operation, params, False)


def _cutoff_labels(d: Dataset, cutoff: int) -> np.ndarray:
    labels = _new_labels(d)
    labels[_timestamps(d) >= cutoff] = TEST
    return labels


def temporal_fixed(d: Dataset, cutoff: int) -> SplitResult:
    """train = t < cutoff, test = t >= cutoff."""
    validation.validate_integer(cutoff, 'cutoff')
    require_timestamps(d, TEMPORAL_FIXED)
    return _assemble(d, _cutoff_labels(d, cutoff), TEMPORAL_FIXED,
                     {'cutoff': cutoff}, False)


def best_ratio_cutoff(timestamps: Sequence[int], test_ratio: float) -> tuple:
    """
    The observed timestamp whose cutoff (test = t >= cutoff) gives a test
    fraction closest to ``test_ratio``; ties go to the earlier cutoff.

    Returns:
        (cutoff, achieved fraction as a Fraction)
    """
    ordered = np.sort(np.asarray(timestamps, dtype=np.int64))
    n = len(ordered)
    values, first = np.unique(ordered, return_index=True)
    target = Fraction(test_ratio)
    best = None
    for t, i in zip(values.tolist(), first.tolist()):
        achieved = Fraction(n - i, n)
        distance = abs(achieved - target)
        if best is None or distance < best[0]:
            best = (distance, t, achieved)
    return best[1], best[2]


def temporal_best_ratio(d: Dataset, test_ratio: float) -> SplitResult:
    _check_ratios(test_ratio)
    require_timestamps(d, TEMPORAL_BEST_RATIO)
    notes = {}
    labels = _new_labels(d)
    if len(d):
        cutoff, achieved = best_ratio_cutoff(_timestamps(d), test_ratio)
        labels = _cutoff_labels(d, cutoff)
        notes = {'cutoff': cutoff, 'achieved_ratio': float(achieved)}
    return _assemble(d, labels, TEMPORAL_BEST_RATIO,
                     {'test_ratio': test_ratio}, False, notes)


def temporal_holdout(d: Dataset, test_ratio: float, val_ratio: float = 0.0,
                     stratify: str = SYSTEM) -> SplitResult:
    """
    Chronological order (timestamp ties broken by canonical order): the
    last round(n*test_ratio) go to test and the round(n*val_ratio) before
    them to val. user applies this within each user's history.
    """
    _check_ratios(test_ratio, val_ratio)
    _check_choice(stratify, 'stratify', STRATA)
    require_timestamps(d, TEMPORAL_HOLDOUT)
    rank = _canonical_rank(d)
    stamps = _timestamps(d)
    labels = _new_labels(d)
    if stratify == SYSTEM:
        order = _chronological(np.arange(len(d)), stamps, rank)
        n_test, n_val = _ratio_sizes(len(d), test_ratio, val_ratio, False)
        _label_back(labels, order, n_test, n_val)
    else:
        for indices in _by_user(d):
            if len(indices) < 2:
                continue
            order = _chronological(indices, stamps, rank)
            n_test, n_val = _ratio_sizes(len(order), test_ratio, val_ratio,
                                         True)
            _label_back(labels, order, n_test, n_val)
    params = {'test_ratio': test_ratio}
    if val_ratio:
        params['val_ratio'] = val_ratio
    return _assemble(d, labels, TEMPORAL_HOLDOUT,
                     _stratified_params(params, stratify), val_ratio > 0)


def temporal_split(d: Dataset, mode: str, cutoff: Optional[int] = None,
                   test_ratio: Optional[float] = None,
                   val_ratio: float = 0.0,
                   stratify: str = SYSTEM) -> SplitResult:
    """Dispatch to the fixed_timestamp, best_ratio or by_ratio split."""
    _check_choice(mode, 'mode', TEMPORAL_MODES)
    if mode == FIXED_TIMESTAMP:
        if cutoff is None:
            raise validation.ValidationError('fixed_timestamp needs cutoff')
        return temporal_fixed(d, cutoff)
    if mode == BEST_RATIO:
        return temporal_best_ratio(d, test_ratio)
    return temporal_holdout(d, test_ratio, val_ratio, stratify)


def k_repeated_holdout(d: Dataset, k: int, test_ratio: float,
                       val_ratio: float = 0.0, seed: int = DEFAULT_SEED,
                       stratify: str = SYSTEM) -> FoldSet:
    """``k`` random hold-outs seeded seed + 0 .. seed + k - 1."""
    validation.validate_positive_integer(k, 'k')
    _check_ratios(test_ratio, val_ratio)
    _check_choice(stratify, 'stratify', STRATA)
    params = {'k': k, 'test_ratio': test_ratio}
    if val_ratio:
        params['val_ratio'] = val_ratio
    params['seed'] = seed
    params = _stratified_params(params, stratify)
    folds = tuple(
        _assemble(d, _holdout_labels(d, test_ratio, val_ratio, seed + i,
                                     stratify),
                  K_REPEATED_HOLDOUT, params, val_ratio > 0, {'fold': i})
        for i in range(k))
    return FoldSet(K_REPEATED_HOLDOUT, folds)


def cross_validation(d: Dataset, k: int, seed: int = DEFAULT_SEED,
                     stratify: str = SYSTEM) -> FoldSet:
    """
    Deal shuffled interactions round-robin into ``k`` folds; fold i tests
    on its own interactions and trains on the rest.

    system deals the whole shuffled dataset, so the test sets partition it.
    user shuffles each user's history and deals it, users in sorted order,
    continuing one shared counter: a user lands in min(k, n_u) test folds
    and always keeps training data. Users with a single interaction are
    never dealt and stay in train in every fold; the fold notes count them
    as ``train_only_users``.

    Raises:
        TooFewInteractionsError: system mode with fewer than k interactions.
    """
    validation.validate_integer(k, 'k', min_value=2)
    _check_choice(stratify, 'stratify', STRATA)
    if stratify == SYSTEM and len(d) < k:
        raise TooFewInteractionsError(
            f'{len(d)} interactions cannot fill {k} folds')
    rng = SplitMix64(seed)
    rank = _canonical_rank(d)
    fold_of = np.full(len(d), -1, dtype=np.int64)
    if stratify == SYSTEM:
        groups = [np.arange(len(d))]
    else:
        groups = _by_user(d)
    dealt = 0
    train_only = 0
    for indices in groups:
        if stratify == USER and len(indices) < 2:
            train_only += 1
            continue
        order = _canonical_order(indices, rank)
        shuffle_in_place(order, rng)
        fold_of[order] = (dealt + np.arange(len(order))) % k
        dealt += len(order)
    params = _stratified_params({'k': k, 'seed': seed}, stratify)
    folds = []
    for fold in range(k):
        labels = _new_labels(d)
        labels[fold_of == fold] = TEST
        notes = {'fold': fold}
        if train_only:
            notes['train_only_users'] = train_only
        folds.append(_assemble(d, labels, CROSS_VALIDATION, params, False,
                               notes))
    return FoldSet(CROSS_VALIDATION, tuple(folds))


Source = Union[str, os.PathLike]


def _overlaps(parts: dict) -> list:
    """(name, name, shared interaction count) for each overlapping pair."""
    names = list(parts)
    counts = {name: canonical_text(parts[name]).value_counts()
              for name in names}
    found = []
    for a in range(len(names)):
        for b in range(a + 1, len(names)):
            left, right = counts[names[a]], counts[names[b]]
            if not len(left) or not len(right):
                continue
            common = left.index.intersection(right.index)
            shared = int(np.minimum(left.loc[common].to_numpy(),
                                    right.loc[common].to_numpy()).sum())
            if shared:
                found.append((names[a], names[b], shared))
    return found


def precomputed_split(train_src: Union[Source, Dataset], test_src: Source,
                      val_src: Optional[Source], spec: FormatSpec
                      ) -> SplitResult:
    """
    Read published split files. ``train_src`` may also be a Dataset already
    in hand (a pipeline's loaded data). A ``val_src`` that is None or names
    a missing file leaves val absent. Overlap between the parts is reported
    with an OverlappingSplitsWarning and noted on the split step, never
    corrected.
    """
    sources = {TEST: test_src}
    if not isinstance(train_src, Dataset):
        sources[TRAIN] = train_src
    if val_src is not None:
        if os.path.exists(val_src):
            sources[VAL] = val_src
        else:
            logger.info('no validation file at %s', val_src)
    parts = {name: read(src, spec) for name, src in sources.items()}
    if isinstance(train_src, Dataset):
        parts[TRAIN] = train_src
    notes = {}
    overlaps = _overlaps(parts)
    if overlaps:
        messages = [f'{OVERLAPPING_SPLITS}: {a} and {b} share {n} '
                    'interactions' for a, b, n in overlaps]
        for message in messages:
            warnings.warn(message, OverlappingSplitsWarning, stacklevel=2)
            logger.warning(message)
        notes['warnings'] = messages
    params = {}
    if TRAIN in sources:
        params['train'] = os.fspath(train_src)
    params['test'] = os.fspath(test_src)
    if VAL in sources:
        params['val'] = os.fspath(val_src)
    params.update(format_params(spec))
    names = [n for n in (TEST, VAL, TRAIN) if n in parts]
    digests = {name: checksum(parts[name]) for name in names}
    step = ProvenanceStep(SPLIT, PRECOMPUTED_SPLIT, params, digests, notes)
    done = {name: append_history(parts[name], step) for name in names}
    return SplitResult(done[TRAIN], done[TEST], done.get(VAL))
