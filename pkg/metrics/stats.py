"""
Dataset characterization: size/shape/density, Gini concentration of the
user and item interaction counts, rating averages, and quartile-based
popularity classes.

space_size = sqrt(|U|·|I|), shape = |U|/|I|, density = |R|/(|U|·|I|).
"""
import logging
import math
from dataclasses import dataclass, asdict, field
from typing import Iterable, Mapping, Optional

import numpy as np
import pandas as pd

import validation
from core.dataset import Dataset, USER, ITEM, RATING

logger = logging.getLogger(__name__)

# Popularity classes, lowest first
LONG_TAIL = 'LongTail'
COMMON = 'Common'
POPULAR = 'Popular'
MOST_POPULAR = 'MostPopular'
POPULARITY_CLASSES = [LONG_TAIL, COMMON, POPULAR, MOST_POPULAR]

AXES = [USER, ITEM]


class EmptyDatasetError(validation.ValidationError):
    pass


class AllZeroError(validation.ValidationError):
    pass


@dataclass(frozen=True)
class MetricsReport:
    n_users: int
    n_items: int
    n_interactions: int
    space_size: float
    shape: float
    density: float
    gini_users: float
    gini_items: float
    mean_profile_user: float
    mean_profile_item: float
    mean_rating_user: Optional[float] = None
    mean_rating_item: Optional[float] = None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_text(self) -> str:
        """Aligned ``name value`` lines; absent values print as ``-``."""
        rows = self.to_dict()
        width = max(len(name) for name in rows)
        lines = []
        for name, value in rows.items():
            if value is None:
                text = '-'
            elif isinstance(value, float):
                text = f'{value:.6g}'
            else:
                text = str(value)
            lines.append(f'{name.ljust(width)}  {text}')
        return '\n'.join(lines) + '\n'


@dataclass(frozen=True)
class PopularityClasses:
    axis: str
    quartiles: tuple
    classes: Mapping[str, str] = field(default_factory=dict)
    counts: Mapping[str, int] = field(default_factory=dict)

    def __getitem__(self, entity: str) -> str:
        return self.classes[entity]

    def __len__(self) -> int:
        return len(self.classes)

    def members(self, popularity_class: str) -> list:
        validation.validate_enum(popularity_class, 'popularity_class',
                                 POPULARITY_CLASSES)
        return [e for e, c in self.classes.items() if c == popularity_class]

    def to_dict(self) -> dict:
        return {'axis': self.axis, 'quartiles': list(self.quartiles),
                'classes': dict(self.classes)}


def gini(counts: Iterable[int]) -> float:
    """
    Gini coefficient of non-negative counts, in [0, 1].

    G = sum((2i - n - 1) * x_i) / (n * sum(x)) over x sorted ascending with
    1-based rank i. The numerator and denominator are exact integers, so
    uniform counts give exactly 0.

    Raises:
        AllZeroError: No count is positive.
        ValidationError: A count is negative or not an integer.
    """
    xs = np.asarray(list(counts))
    if xs.size and not np.issubdtype(xs.dtype, np.integer):
        raise validation.ValidationError('counts must be integers')
    if np.any(xs < 0):
        raise validation.ValidationError('counts must be non-negative')
    total = int(xs.sum(dtype=np.int64)) if xs.size else 0
    if total <= 0:
        raise AllZeroError('gini needs at least one positive count')
    n = len(xs)
    xs = np.sort(xs).astype(np.int64)
    ranks = 2 * np.arange(1, n + 1, dtype=np.int64) - (n + 1)
    num = int(np.dot(ranks, xs))
    return min(max(num / (n * total), 0.0), 1.0)


def _counts(d: Dataset, axis: str) -> pd.Series:
    """Interactions per user (or item), entities in first-seen order."""
    return d.frame.groupby(axis, sort=False).size()


def _mean_of_means(d: Dataset, axis: str) -> float:
    return float(d.frame.groupby(axis, sort=False)[RATING].mean().mean())


def metrics_report(d: Dataset) -> MetricsReport:
    """
    Raises:
        EmptyDatasetError: ``d`` has no interactions.
    """
    if not len(d):
        raise EmptyDatasetError('metrics need a non-empty dataset')
    user_counts = _counts(d, USER)
    item_counts = _counts(d, ITEM)
    n_users = len(user_counts)
    n_items = len(item_counts)
    n = len(d)
    mean_rating_user = mean_rating_item = None
    if d.has_ratings:
        mean_rating_user = _mean_of_means(d, USER)
        mean_rating_item = _mean_of_means(d, ITEM)
    report = MetricsReport(
        n_users=n_users,
        n_items=n_items,
        n_interactions=n,
        space_size=math.sqrt(n_users * n_items),
        shape=n_users / n_items,
        density=n / (n_users * n_items),
        gini_users=gini(user_counts.to_numpy()),
        gini_items=gini(item_counts.to_numpy()),
        mean_profile_user=n / n_users,
        mean_profile_item=n / n_items,
        mean_rating_user=mean_rating_user,
        mean_rating_item=mean_rating_item,
    )
    logger.debug('metrics: %s', report)
    return report


def _classify(count: int, q1: float, q2: float, q3: float) -> str:
    if count < q1 or (count == q1 and q1 < q3):
        return LONG_TAIL
    if count <= q2:
        return COMMON
    if count <= q3:
        return POPULAR
    return MOST_POPULAR


def popularity_classify(d: Dataset, axis: str = ITEM) -> PopularityClasses:
    """
    Class each user (or item) by where its interaction count falls among
    the quartiles of all counts (linear-interpolation quantiles).

    A count equal to Q1 is LongTail unless all three quartiles coincide,
    in which case every count at the boundary is Common.

    Raises:
        EmptyDatasetError: ``d`` has no interactions.
    """
    validation.validate_enum(axis, 'axis', AXES)
    if not len(d):
        raise EmptyDatasetError('popularity needs a non-empty dataset')
    counts = _counts(d, axis)
    q1, q2, q3 = (float(q) for q in
                  np.quantile(counts.to_numpy(), [0.25, 0.5, 0.75]))
    by_entity = dict(zip(counts.index, counts.tolist()))
    classes = {e: _classify(c, q1, q2, q3) for e, c in by_entity.items()}
    return PopularityClasses(axis, (q1, q2, q3), classes, by_entity)
