"""
Tests for processing.filters module
"""
from collections import Counter

import pytest

import processing.filters as pf
from core.dataset import build_dataset, checksum, PROCESS
from validation import ValidationError


def pairs(d):
    return sorted((x.user, x.item) for x in d)


def multiset(d):
    return Counter(d.as_tuples())


def brute_force_core(records, k):
    """Recompute both degree maps from scratch until nothing changes."""
    rows = list(records)
    while True:
        users = Counter(x.user for x in rows)
        items = Counter(x.item for x in rows)
        kept = [x for x in rows if users[x.user] >= k and items[x.item] >= k]
        if len(kept) == len(rows):
            return kept
        rows = kept


@pytest.fixture
def d1():
    return build_dataset([('u1', 'i1'), ('u1', 'i2'), ('u2', 'i1'),
                          ('u2', 'i2')])


def test_binarize_drop_below(d0):
    out = pf.binarize(d0, 4)
    assert pairs(out) == [('u1', 'i1'), ('u2', 'i1'), ('u3', 'i3')]
    assert {x.rating for x in out} == {1.0}
    assert out.history[-1].operation == 'Binarize'
    assert dict(out.history[-1].params) == {'threshold': 4}


def test_binarize_low_threshold_keeps_all(d0):
    out = pf.binarize(d0, 0)
    assert len(out) == 5
    assert {x.rating for x in out} == {1.0}


def test_binarize_zero_one(d0):
    out = pf.binarize(d0, 4, pf.ZERO_ONE)
    assert [x.rating for x in out] == [1.0, 0.0, 1.0, 0.0, 1.0]
    assert out.history[-1].params['mode'] == pf.ZERO_ONE


def test_binarize_needs_ratings():
    with pytest.raises(pf.NoRatingsError):
        pf.binarize(build_dataset([('u1', 'i1')]), 4)


def test_binarize_empty_passes():
    out = pf.binarize(build_dataset([]), 4)
    assert len(out) == 0
    assert len(out.history) == 2


def test_binarize_subset_property(random_datasets):
    for ds in random_datasets(30, seed=1):
        out = pf.binarize(ds, 3)
        assert all(x.rating == 1.0 for x in out)
        assert set(pairs(out)) <= set(pairs(ds))


def test_kcore_user(d0):
    out = pf.kcore(d0, 2, pf.USER_MODE)
    assert len(out) == 4
    assert 'u3' not in out.users()
    assert out.history[-1].operation == 'UserKCore'
    assert dict(out.history[-1].params) == {'cores': 2}


def test_kcore_item(d0):
    out = pf.kcore(d0, 2, pf.ITEM_MODE)
    assert 'i2' not in out.items()
    assert len(out) == 4


def test_kcore_iterative_cascade(d0):
    out = pf.kcore(d0, 2)
    assert len(out) == 0
    step = out.history[-1]
    assert step.operation == 'UserItemIterativeKCore'
    assert step.notes['fixpoint'] is True


def test_kcore_iterative_already_core(d1):
    out = pf.kcore(d1, 2)
    assert multiset(out) == multiset(d1)
    assert out.history[-1].notes['rounds'] == 1
    assert out.history[-1].notes['fixpoint'] is True


def test_kcore_max_rounds_partial(d0):
    out = pf.kcore(d0, 2, max_rounds=1)
    assert pairs(out) == [('u1', 'i1'), ('u2', 'i1')]
    step = out.history[-1]
    assert step.notes == {'rounds': 1, 'fixpoint': False}
    assert step.params['max_rounds'] == 1


def test_kcore_bad_k(d0):
    with pytest.raises(ValidationError, match='k must be at least 1'):
        pf.kcore(d0, 0)


@pytest.mark.parametrize('k', [2, 3, 5])
def test_kcore_matches_brute_force(random_datasets, k):
    for ds in random_datasets(200, seed=k):
        out = pf.kcore(ds, k)
        assert multiset(out) == multiset(
            build_dataset(brute_force_core(ds.interactions, k)))
        users = Counter(x.user for x in out)
        items = Counter(x.item for x in out)
        assert all(c >= k for c in users.values())
        assert all(c >= k for c in items.values())
        again = pf.kcore(out, k)
        assert multiset(again) == multiset(out)


def test_kcore_preserves_order(random_datasets):
    for ds in random_datasets(20, seed=3):
        stamped = build_dataset(
            [(x.user, x.item, x.rating, n) for n, x in enumerate(ds)])
        order = [x.timestamp for x in pf.kcore(stamped, 2)]
        assert order == sorted(order)


def test_cold_users(d0):
    assert 'u3' not in pf.drop_cold_users(d0, 2).users()
    assert len(pf.drop_cold_users(d0, 1)) == 5
    assert len(pf.drop_cold_users(d0, 10)) == 0


def test_cold_users_equals_user_kcore(random_datasets):
    for ds in random_datasets(30, seed=6):
        for k in (1, 2, 4):
            cold = pf.drop_cold_users(ds, k)
            assert checksum(cold) == checksum(pf.kcore(ds, k, pf.USER_MODE))
            assert cold.history[-1].operation == 'ColdUsers'


def test_filter_by_rating_fixed(d0):
    out = pf.filter_by_rating(d0, pf.RatingThreshold(pf.FIXED, 2.5))
    assert len(out) == 4
    assert ('u2', 'i3') not in pairs(out)


def test_filter_by_rating_global_mean(d0):
    out = pf.filter_by_rating(d0, pf.RatingThreshold(pf.GLOBAL_MEAN))
    assert pairs(out) == [('u1', 'i1'), ('u2', 'i1'), ('u3', 'i3')]
    assert out.history[-1].notes['resolved_threshold'] == \
        pytest.approx(3.8)


def test_filter_by_rating_user_mean(d0):
    out = pf.filter_by_rating(d0, pf.RatingThreshold(pf.USER_MEAN))
    assert pairs(out) == [('u1', 'i1'), ('u2', 'i1'), ('u3', 'i3')]
    assert dict(out.history[-1].params) == {'kind': pf.USER_MEAN}


def test_filter_by_rating_needs_ratings():
    with pytest.raises(pf.NoRatingsError):
        pf.filter_by_rating(build_dataset([('u1', 'i1')]),
                            pf.RatingThreshold(pf.FIXED, 1))


def test_rating_threshold_validation():
    with pytest.raises(ValidationError, match='value must be a number'):
        pf.RatingThreshold(pf.FIXED)
    with pytest.raises(ValidationError, match='only used'):
        pf.RatingThreshold(pf.USER_MEAN, 3.0)
    with pytest.raises(ValidationError, match='finite'):
        pf.RatingThreshold(pf.FIXED, float('inf'))


def test_filter_by_time_after(d0):
    out = pf.filter_by_time(d0, 150, pf.AFTER)
    assert sorted(x.timestamp for x in out) == [150, 200, 300]


def test_filter_by_time_before(d0):
    out = pf.filter_by_time(d0, 150, pf.BEFORE)
    assert pairs(out) == [('u1', 'i1'), ('u3', 'i3')]


def test_filter_by_time_below_min(d0):
    assert len(pf.filter_by_time(d0, 10, pf.BEFORE)) == 0


def test_filter_by_time_partition(random_datasets):
    for ds in random_datasets(20, seed=12):
        for cutoff in (0, 250, 500, 1001):
            before = pf.filter_by_time(ds, cutoff, pf.BEFORE)
            after = pf.filter_by_time(ds, cutoff, pf.AFTER)
            assert multiset(before) + multiset(after) == multiset(ds)
            assert all(x.timestamp < cutoff for x in before)
            assert all(x.timestamp >= cutoff for x in after)


def test_filter_by_time_needs_timestamps():
    with pytest.raises(pf.NoTimestampsError):
        pf.filter_by_time(build_dataset([('u1', 'i1', 3.0)]), 5, pf.AFTER)


def test_deduplicate_exact():
    ds = build_dataset([('u1', 'i1', 5.0), ('u1', 'i1', 5.0),
                        ('u1', 'i1', 4.0)])
    out = pf.deduplicate(ds)
    assert out.as_tuples() == [('u1', 'i1', 5.0, None),
                               ('u1', 'i1', 4.0, None)]
    assert out.history[-1].notes['removed'] == 1


def test_deduplicate_pair():
    ds = build_dataset([('u1', 'i1', 5.0), ('u2', 'i1', 3.0),
                        ('u1', 'i1', 4.0)])
    out = pf.deduplicate(ds, pf.PAIR)
    assert out.as_tuples() == [('u1', 'i1', 5.0, None),
                               ('u2', 'i1', 3.0, None)]


def test_operations_do_not_touch_input(d0):
    before = (d0.interactions, d0.history)
    pf.binarize(d0, 4)
    pf.kcore(d0, 2)
    pf.filter_by_rating(d0, pf.RatingThreshold(pf.GLOBAL_MEAN))
    pf.filter_by_time(d0, 150, pf.AFTER)
    pf.deduplicate(d0)
    assert (d0.interactions, d0.history) == before


def test_history_grows_by_one_per_step(d0):
    out = pf.kcore(pf.binarize(d0, 3), 1)
    assert [s.name for s in out.history] == ['load', PROCESS, PROCESS]
