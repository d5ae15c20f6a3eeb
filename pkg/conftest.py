"""
Shared fixtures. Living at the repo root also puts the root on sys.path so
tests can import the top-level packages.
"""
import random

import pytest

from core.dataset import build_dataset, Interaction

D0_RECORDS = [
    ('u1', 'i1', 5.0, 100),
    ('u1', 'i2', 3.0, 200),
    ('u2', 'i1', 4.0, 150),
    ('u2', 'i3', 2.0, 300),
    ('u3', 'i3', 5.0, 50),
]


def make_d0():
    return build_dataset(D0_RECORDS)


def make_random_dataset(rng: random.Random, max_users: int = 30,
                        max_items: int = 30, max_interactions: int = 300,
                        with_ratings: bool = True,
                        with_timestamps: bool = True):
    """Random small dataset; duplicates are possible on purpose."""
    n_users = rng.randint(1, max_users)
    n_items = rng.randint(1, max_items)
    n = rng.randint(0, max_interactions)
    records = []
    for _ in range(n):
        records.append(Interaction(
            f'u{rng.randrange(n_users)}',
            f'i{rng.randrange(n_items)}',
            float(rng.randint(1, 5)) if with_ratings else None,
            rng.randint(0, 1000) if with_timestamps else None,
        ))
    return build_dataset(records)


@pytest.fixture
def d0():
    return make_d0()


@pytest.fixture
def random_datasets():
    """Factory: ``random_datasets(count, seed=...)`` -> list of datasets."""
    def factory(count: int, seed: int = 0, **kwargs):
        rng = random.Random(seed)
        return [make_random_dataset(rng, **kwargs) for _ in range(count)]
    return factory
