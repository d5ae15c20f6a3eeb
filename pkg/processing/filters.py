"""
Dataset transformations: binarization, the k-core family, rating and time
filters, and explicit deduplication.

Every function returns a new Dataset with one appended ``process`` step.
Comparisons keep values >= the threshold and drop values below it.
Empty inputs pass through unchanged (plus the step).
"""
import logging
import math
from dataclasses import dataclass
from typing import Optional

import pandas as pd

import validation
from core.dataset import (
    Dataset, PROCESS, FIELDS, USER, ITEM, RATING, TIMESTAMP,
)

logger = logging.getLogger(__name__)

# Operation names
BINARIZE = 'Binarize'
USER_KCORE = 'UserKCore'
ITEM_KCORE = 'ItemKCore'
ITERATIVE_KCORE = 'UserItemIterativeKCore'
COLD_USERS = 'ColdUsers'
FILTER_BY_RATING = 'FilterByRating'
FILTER_BY_TIME = 'FilterByTime'
DEDUPLICATE = 'Deduplicate'

# Binarize modes
DROP_BELOW = 'drop_below'
ZERO_ONE = 'zero_one'
BINARIZE_MODES = [DROP_BELOW, ZERO_ONE]

# k-core modes
USER_MODE = 'user'
ITEM_MODE = 'item'
ITERATIVE = 'iterative'
KCORE_MODES = [USER_MODE, ITEM_MODE, ITERATIVE]
KCORE_OPERATIONS = {
    USER_MODE: USER_KCORE,
    ITEM_MODE: ITEM_KCORE,
    ITERATIVE: ITERATIVE_KCORE,
}

# Rating threshold kinds
FIXED = 'fixed'
GLOBAL_MEAN = 'global_mean'
USER_MEAN = 'user_mean'
THRESHOLD_KINDS = [FIXED, GLOBAL_MEAN, USER_MEAN]

# Time filter sides
BEFORE = 'before'
AFTER = 'after'
TIME_SIDES = [BEFORE, AFTER]

# Deduplicate modes
EXACT = 'exact'
PAIR = 'pair'
DEDUP_MODES = [EXACT, PAIR]

CORES = 'cores'


class NoRatingsError(validation.ValidationError):
    pass


class NoTimestampsError(validation.ValidationError):
    pass


def require_ratings(d: Dataset, operation: str) -> None:
    if len(d) and not d.has_ratings:
        raise NoRatingsError(f'{operation} needs ratings')


def require_timestamps(d: Dataset, operation: str) -> None:
    if len(d) and not d.has_timestamps:
        raise NoTimestampsError(f'{operation} needs timestamps')


@dataclass(frozen=True)
class RatingThreshold:
    kind: str = FIXED
    value: Optional[float] = None

    def __post_init__(self):
        validation.validate_enum(self.kind, 'kind', THRESHOLD_KINDS)
        if self.kind == FIXED:
            validation.validate_number(self.value, 'value')
        elif self.value is not None:
            raise validation.ValidationError(
                f'value is only used with kind {FIXED}')

    def to_params(self) -> dict:
        params = {'kind': self.kind}
        if self.kind == FIXED:
            params['value'] = self.value
        return params


def binarize(d: Dataset, threshold: float,
             mode: str = DROP_BELOW) -> Dataset:
    """
    drop_below keeps ratings >= threshold and sets them to 1; zero_one keeps
    every interaction with rating 1 (>= threshold) or 0.

    Raises:
        NoRatingsError: ``d`` has interactions without ratings.
    """
    validation.validate_number(threshold, 'threshold')
    validation.validate_enum(mode, 'mode', BINARIZE_MODES)
    require_ratings(d, BINARIZE)
    f = d.frame
    liked = f[RATING] >= threshold
    if mode == DROP_BELOW:
        out = f[liked].assign(**{RATING: 1.0})
    else:
        out = f.assign(**{RATING: liked.astype('float64')})
    params = {'threshold': threshold}
    if mode != DROP_BELOW:
        params['mode'] = mode
    return d.derive(out, PROCESS, BINARIZE, params)


def _sizes(f: pd.DataFrame, column: str) -> pd.Series:
    """Interactions per user (item), aligned with the rows of ``f``."""
    return f.groupby(column, sort=False)[column].transform('size')


def _keep_active(f: pd.DataFrame, column: str, k: int) -> pd.DataFrame:
    keep = _sizes(f, column) >= k
    return f if keep.all() else f[keep]


def _is_core(f: pd.DataFrame, k: int) -> bool:
    return bool((_sizes(f, USER) >= k).all() and (_sizes(f, ITEM) >= k).all())


def kcore(d: Dataset, k: int, mode: str = ITERATIVE,
          max_rounds: Optional[int] = None) -> Dataset:
    """
    user / item: one pass dropping every user (item) with fewer than ``k``
    interactions.

    iterative: rounds of a user pass followed by an item pass, until a
    round removes nothing or ``max_rounds`` rounds have run. The step notes
    record the rounds executed and whether the fixpoint was reached; a
    partial result is returned when it was not.
    """
    validation.validate_positive_integer(k, 'k')
    validation.validate_enum(mode, 'mode', KCORE_MODES)
    if max_rounds is not None:
        validation.validate_positive_integer(max_rounds, 'max_rounds')
    f = d.frame
    params = {CORES: k}
    notes = {}
    if mode == USER_MODE:
        f = _keep_active(f, USER, k)
    elif mode == ITEM_MODE:
        f = _keep_active(f, ITEM, k)
    else:
        rounds = 0
        fixpoint = False
        while max_rounds is None or rounds < max_rounds:
            rounds += 1
            before = len(f)
            f = _keep_active(_keep_active(f, USER, k), ITEM, k)
            logger.debug('k-core round %d: %d -> %d', rounds, before, len(f))
            if len(f) == before:
                fixpoint = True
                break
        if not fixpoint:
            fixpoint = _is_core(f, k)
        if max_rounds is not None:
            params['max_rounds'] = max_rounds
        notes = {'rounds': rounds, 'fixpoint': fixpoint}
    return d.derive(f, PROCESS, KCORE_OPERATIONS[mode], params, notes)


def drop_cold_users(d: Dataset, min_interactions: int) -> Dataset:
    """Keep exactly the users with at least ``min_interactions``."""
    validation.validate_positive_integer(min_interactions,
                                         'min_interactions')
    return d.derive(_keep_active(d.frame, USER, min_interactions), PROCESS,
                    COLD_USERS, {'min_interactions': min_interactions})


def filter_by_rating(d: Dataset, threshold: RatingThreshold) -> Dataset:
    """
    Keep ratings >= the resolved threshold: the fixed value, the mean of
    all ratings, or each user's own mean.

    Raises:
        NoRatingsError: ``d`` has interactions without ratings.
    """
    validation.validate_type(threshold, 'threshold', RatingThreshold)
    require_ratings(d, FILTER_BY_RATING)
    f = d.frame
    notes = {}
    if not len(f):
        out = f
    elif threshold.kind == FIXED:
        out = f[f[RATING] >= threshold.value]
    elif threshold.kind == GLOBAL_MEAN:
        mean = math.fsum(f[RATING].tolist()) / len(f)
        out = f[f[RATING] >= mean]
        notes['resolved_threshold'] = mean
    else:
        means = f.groupby(USER, sort=False)[RATING].transform('mean')
        out = f[f[RATING] >= means]
    return d.derive(out, PROCESS, FILTER_BY_RATING, threshold.to_params(),
                    notes)


def filter_by_time(d: Dataset, cutoff: int, keep: str) -> Dataset:
    """
    before keeps t < cutoff, after keeps t >= cutoff, so the two sides
    partition the dataset.

    Raises:
        NoTimestampsError: ``d`` has interactions without timestamps.
    """
    validation.validate_integer(cutoff, 'cutoff')
    validation.validate_enum(keep, 'keep', TIME_SIDES)
    require_timestamps(d, FILTER_BY_TIME)
    f = d.frame
    if not len(f):
        out = f
    elif keep == BEFORE:
        out = f[(f[TIMESTAMP] < cutoff).to_numpy(dtype=bool)]
    else:
        out = f[(f[TIMESTAMP] >= cutoff).to_numpy(dtype=bool)]
    return d.derive(out, PROCESS, FILTER_BY_TIME,
                    {'cutoff': cutoff, 'keep': keep})


def deduplicate(d: Dataset, mode: str = EXACT) -> Dataset:
    """
    exact drops repeated (user, item, rating, timestamp) tuples; pair keeps
    the first interaction of each (user, item) pair. First occurrences keep
    their position.
    """
    validation.validate_enum(mode, 'mode', DEDUP_MODES)
    f = d.frame
    subset = list(FIELDS) if mode == EXACT else [USER, ITEM]
    out = f[~f.duplicated(subset=subset, keep='first')]
    notes = {'removed': len(f) - len(out)}
    return d.derive(out, PROCESS, DEDUPLICATE, {'mode': mode}, notes)
