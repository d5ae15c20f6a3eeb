"""
Large-input timing check. Opt in with RECDATA_PERF=1.
"""
import os
import random
import sys
import time

import pytest

from formats.codec import read
from formats.spec import tabular
from processing.filters import binarize, kcore
from splitting.strategies import random_holdout

ROWS = 1_000_000
TIME_LIMIT_S = 30
PEAK_MEMORY_LIMIT_MB = 2048

pytestmark = pytest.mark.skipif(os.getenv('RECDATA_PERF') != '1',
                                reason='set RECDATA_PERF=1 to run')


@pytest.fixture(scope='module')
def big_file(tmp_path_factory):
    path = tmp_path_factory.mktemp('perf') / 'ratings.tsv'
    rng = random.Random(7)
    with open(path, 'w', encoding='utf-8') as f:
        for _ in range(ROWS):
            f.write(f'u{rng.randrange(60_000)}\ti{rng.randrange(20_000)}'
                    f'\t{rng.randint(1, 5)}\t{rng.randrange(10**9)}\n')
    return path


def test_load_binarize_kcore_holdout(big_file):
    start = time.perf_counter()
    d = read(big_file, tabular(rating_col=2,
                               timestamp_col=3))
    assert len(d) == ROWS
    d = binarize(d, 4)
    d = kcore(d, 5)
    split = random_holdout(d, 0.2, seed=42)
    elapsed = time.perf_counter() - start
    assert len(split.train) + len(split.test) == len(d)
    assert elapsed < TIME_LIMIT_S


@pytest.mark.skipif(sys.platform != 'linux', reason='ru_maxrss is KB here')
def test_peak_memory(big_file):
    import resource
    d = read(big_file, tabular(rating_col=2,
                               timestamp_col=3))
    random_holdout(kcore(binarize(d, 4), 5), 0.2)
    peak_kb = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    assert peak_kb / 1024 < PEAK_MEMORY_LIMIT_MB
