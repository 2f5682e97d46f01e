import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import random_records
from stratwlr import Cohort, SubjectRecord, ValidationError, build_risk_table, km_estimate
from stratwlr.survival_core import pooled_risk_table


def cohort_of(records, n_strata=None):
    t, e, a, s = zip(*records)
    return Cohort(t, e, a, s, n_strata=n_strata)


# hand tabulated: arm 0 = {1 event, 3 event, 5 event}, arm 1 = {2 cens, 3 event, 3 cens}
TIED = [(1, True, 0, 0), (2, False, 1, 0), (3, True, 0, 0), (3, True, 1, 0), (3, False, 1, 0), (5, True, 0, 0)]


def test_hand_tabulated_table_with_ties():
    table = build_risk_table(cohort_of(TIED))
    got = [(r.t, r.n, r.n1, r.n0, r.events, r.events1) for r in table.rows]
    # a subject censored at t=3 is still at risk at t=3
    assert got == [(1, 6, 3, 3, 1, 0), (3, 4, 2, 2, 2, 1), (5, 1, 0, 1, 1, 0)]
    assert [r.events0 for r in table.rows] == [1, 1, 1]


def test_single_event_table():
    table = build_risk_table([SubjectRecord(1.0, True, 1), SubjectRecord(2.0, False, 0)])
    (row,) = table.rows
    assert (row.t, row.n, row.n1, row.n0, row.events, row.events1) == (1.0, 2, 1, 1, 1, 1)


def test_no_events_gives_empty_table():
    table = build_risk_table(cohort_of([(1, False, 0, 0), (2, False, 1, 0)]))
    assert len(table) == 0


def test_empty_and_multistratum_rejected():
    with pytest.raises(ValidationError, match="empty"):
        build_risk_table([])
    with pytest.raises(ValidationError):
        build_risk_table(cohort_of([(1, True, 0, 0), (2, True, 1, 1)]))


@pytest.mark.parametrize(
    "kwargs",
    [
        dict(time=[-1.0], event=[True], arm=[0]),
        dict(time=[np.nan], event=[True], arm=[0]),
        dict(time=[np.inf], event=[True], arm=[0]),
        dict(time=[1.0], event=[True], arm=[2]),
        dict(time=[1.0], event=[True], arm=[0], stratum=[3], n_strata=2),
        dict(time=[1.0, 2.0], event=[True], arm=[0, 1]),
    ],
)
def test_cohort_validation(kwargs):
    with pytest.raises(ValidationError):
        Cohort(**kwargs)


def test_km_five_subjects_interleaved_censoring():
    km = km_estimate(cohort_of([(1, True, 0, 0), (2, False, 1, 0), (3, True, 1, 0), (4, False, 0, 0), (5, True, 1, 0)]))
    np.testing.assert_allclose(km.times, [1, 3, 5])
    np.testing.assert_allclose(km.surv, [0.8, 0.8 * 2 / 3, 0.0], atol=1e-15)
    np.testing.assert_allclose(km.surv_left, [1.0, 0.8, 0.8 * 2 / 3], atol=1e-15)
    assert km(0.5) == 1.0
    assert km(1.0) == pytest.approx(0.8)
    assert km(2.9) == pytest.approx(0.8)
    assert km.left_limit(3.0) == pytest.approx(0.8)
    assert km(3.0) == pytest.approx(0.8 * 2 / 3)


def test_km_empty_rejected():
    with pytest.raises(ValidationError):
        km_estimate([])


def test_km_matches_oracle_on_random_data():
    rng = np.random.default_rng(7)
    for _ in range(20):
        recs = random_records(rng)
        km = km_estimate(cohort_of(recs))
        ref = oracle.km_table(recs)
        assert list(km.times) == sorted(ref)
        for t, s, sl in zip(km.times, km.surv, km.surv_left):
            assert s == pytest.approx(ref[t][1], abs=1e-12)
            assert sl == pytest.approx(ref[t][0], abs=1e-12)


def test_risk_table_matches_brute_force():
    rng = np.random.default_rng(11)
    for _ in range(20):
        recs = random_records(rng)
        table = pooled_risk_table(cohort_of(recs))
        for r in table.rows:
            assert r.n1 == sum(1 for x in recs if x[0] >= r.t and x[2] == 1)
            assert r.n0 == sum(1 for x in recs if x[0] >= r.t and x[2] == 0)
            assert r.events == sum(1 for x in recs if x[0] == r.t and x[1])
            assert r.events1 == sum(1 for x in recs if x[0] == r.t and x[1] and x[2] == 1)


def test_records_round_trip():
    c = cohort_of(TIED)
    back = Cohort.from_records(c.records())
    for name in ("time", "event", "arm", "stratum"):
        np.testing.assert_array_equal(getattr(back, name), getattr(c, name))
    assert len(c.in_stratum(0)) == 6


subjects = st.lists(
    st.tuples(
        st.integers(0, 12).map(float),
        st.booleans(),
        st.integers(0, 1),
    ),
    min_size=1,
    max_size=40,
)


@settings(max_examples=150, deadline=None)
@given(subjects)
def test_table_invariants(subs):
    c = Cohort(*zip(*subs))
    table = build_risk_table(c)
    if len(table) == 0:
        return
    # hypergeometric support
    assert np.all(table.events1 >= np.maximum(0, table.events - table.n0))
    assert np.all(table.events1 <= np.minimum(table.events, table.n1))
    assert np.all(table.events <= table.n)
    # at-risk counts never increase
    assert np.all(np.diff(table.n1) <= 0) and np.all(np.diff(table.n0) <= 0)
    assert np.all(np.diff(table.times) > 0)
    # relabelling arms swaps the margins
    swapped = build_risk_table(c.swap_arms())
    np.testing.assert_array_equal(swapped.n1, table.n0)
    np.testing.assert_array_equal(swapped.events1, table.events0)


@settings(max_examples=100, deadline=None)
@given(st.lists(st.integers(0, 20).map(float), min_size=1, max_size=40), st.integers(0, 1))
def test_km_without_censoring_is_empirical_survival(times, arm):
    c = Cohort(times, [True] * len(times), [arm] * len(times))
    km = km_estimate(c)
    t = np.asarray(times)
    for u in np.unique(t):
        assert km(u) == pytest.approx(np.mean(t > u), abs=1e-12)


@settings(max_examples=100, deadline=None)
@given(subjects)
def test_km_monotone_and_bounded(subs):
    km = km_estimate(Cohort(*zip(*subs)))
    assert np.all(km.surv >= 0) and np.all(km.surv <= 1)
    assert np.all(np.diff(km.surv) <= 0)
    assert np.all(km.surv <= km.surv_left)
