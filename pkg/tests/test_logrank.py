import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracle
from conftest import random_records
from stratwlr import (
    TEST_NAMES,
    Cohort,
    ConsistencyError,
    DegenerateError,
    ValidationError,
    WeightSpec,
    analyze,
    build_risk_table,
    run_all,
    stratified_lr,
    stratified_lr_n,
    stratified_wlr_n,
    stratified_wlr_u,
    stratified_wlr_z,
    stratum_score,
)
from stratwlr.logrank import DegenerateStratumWarning, StratumScore, normal_cdf


def cohort_of(records, n_strata=2):
    t, e, a, s = zip(*records)
    return Cohort(t, e, a, s, n_strata=n_strata)


def test_single_row_score():
    # one experimental event out of one-vs-one at risk: E=0.5, V=0.25
    table = build_risk_table(Cohort([1.0, 2.0], [True, False], [1, 0]))
    s = stratum_score(table, [1.0])
    assert (s.U, s.V) == (0.5, 0.25)
    assert s.U / math.sqrt(s.V) == 1.0
    swapped = stratum_score(build_risk_table(Cohort([1.0, 2.0], [True, False], [0, 1])), [1.0])
    assert swapped.U == -0.5


def test_empty_table_scores_zero():
    s = stratum_score(build_risk_table(Cohort([1.0, 2.0], [False, False], [1, 0])), [])
    assert (s.U, s.V, s.U_W, s.V_W, s.d) == (0.0, 0.0, 0.0, 0.0, 0)


def test_weight_length_mismatch():
    table = build_risk_table(Cohort([1.0, 2.0], [True, True], [1, 0]))
    with pytest.raises(ConsistencyError):
        stratum_score(table, [1.0])


def test_singleton_risk_set_has_zero_variance():
    table = build_risk_table(Cohort([1.0], [True], [1]))
    s = stratum_score(table, [1.0])
    assert s.V == 0.0 and s.U == 0.0


def test_two_identical_strata():
    one = StratumScore(U=0.5, V=0.25, U_W=0.5, V_W=0.25, n=2, d=1)
    assert stratified_lr([one, one]).z == pytest.approx(math.sqrt(2), abs=1e-12)
    for f in (stratified_lr_n, stratified_wlr_u, stratified_wlr_z, stratified_wlr_n):
        assert f([one, one]).z == pytest.approx(1.41421, abs=1e-5)


def test_p_values():
    r = stratified_lr([StratumScore(-1.0, 1.0, 0, 0, 1, 1)])
    assert r.p_one_sided == pytest.approx(0.15865525393145707, rel=1e-12)
    assert r.p_two_sided == pytest.approx(2 * r.p_one_sided, rel=1e-12)
    assert normal_cdf(0.0) == 0.5
    assert normal_cdf(-1.959963984540054) == pytest.approx(0.025, rel=1e-12)


def test_degenerate_combinations():
    dead = StratumScore(0.0, 0.0, 0.0, 0.0, 5, 0)
    live = StratumScore(0.5, 0.25, 0.6, 0.3, 4, 2)
    with pytest.raises(DegenerateError, match="degenerate"):
        stratified_lr([dead])
    with pytest.raises(DegenerateError):
        stratified_lr_n([live, dead])
    with pytest.raises(DegenerateError):
        stratified_wlr_n([live, dead])
    with pytest.warns(DegenerateStratumWarning):
        z = stratified_wlr_z([live, dead]).z
    assert z == pytest.approx(0.6 / math.sqrt(0.3))
    # all-dead: nothing to combine
    with pytest.warns(DegenerateStratumWarning), pytest.raises(DegenerateError):
        stratified_wlr_z([dead, dead])


def test_analyze_reports_failures_instead_of_raising():
    # stratum 1 is entirely censored
    recs = [(1, True, 0, 0), (2, True, 1, 0), (3, True, 0, 0), (1, False, 1, 1), (2, False, 0, 1)]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStratumWarning)
        res = analyze(cohort_of(recs), WeightSpec.modest(2.0))
    failed = {r.name for r in res.failures}
    assert failed == {"Zs_n", "Zs_Wn"}
    assert all(math.isnan(r.z) for r in res.failures)
    assert all("degenerate" in r.error for r in res.failures)


def test_analyze_input_errors():
    with pytest.raises(ValidationError):
        analyze(Cohort([1.0, 2.0], [True, True], [1, 1]), WeightSpec.modest(1.0))
    with pytest.raises(ValidationError):
        analyze(Cohort([1.0, 2.0], [True, True], [1, 0]), WeightSpec.modest(1.0), pooling="nope")


@pytest.mark.parametrize("pooling", ["per-stratum", "across-strata"])
def test_matches_oracle_on_random_datasets(pooling):
    rng = np.random.default_rng(2024)
    checked = 0
    for _ in range(40):
        k = int(rng.integers(1, 4))
        recs = random_records(rng, n_strata=k)
        t_star = float(rng.choice([0.0, 3.0, 6.0, 12.0, 50.0]))
        ref = oracle.all_statistics(recs, t_star, k, pooling)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateStratumWarning)
            got = analyze(cohort_of(recs, k), WeightSpec.modest(t_star), pooling)
        for name in TEST_NAMES:
            r = got.result(name)
            if ref[name] is None:
                assert not r.ok, name
            else:
                assert r.ok, (name, r.error)
                assert r.z == pytest.approx(ref[name], abs=1e-10), name
                checked += 1
    assert checked >= 20 * 7


def test_run_all_order():
    rng = np.random.default_rng(3)
    recs = random_records(rng)
    assert [r.name for r in run_all(cohort_of(recs), WeightSpec.modest(6.0))] == list(TEST_NAMES)


def dataset(n_strata):
    return st.lists(
        st.tuples(
            st.integers(1, 10).map(float),
            st.booleans(),
            st.integers(0, 1),
            st.integers(0, n_strata - 1),
        ),
        min_size=4,
        max_size=40,
    ).filter(lambda rs: {r[2] for r in rs} == {0, 1})


def _z(records, n_strata, t_star, pooling="per-stratum"):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStratumWarning)
        return analyze(cohort_of(records, n_strata), WeightSpec.modest(t_star), pooling).z


def _close(a, b, tol=1e-12):
    if math.isnan(a) or math.isnan(b):
        return math.isnan(a) and math.isnan(b)
    return abs(a - b) <= tol


@settings(max_examples=150, deadline=None)
@given(dataset(2), st.sampled_from([0.0, 2.0, 5.0, 20.0]))
def test_arm_swap_negates_every_statistic(recs, t_star):
    z = _z(recs, 2, t_star)
    zs = _z([(t, e, 1 - a, s) for t, e, a, s in recs], 2, t_star)
    for name in TEST_NAMES:
        assert _close(z[name], -zs[name]), name


@settings(max_examples=150, deadline=None)
@given(dataset(1), st.sampled_from([0.0, 3.0, 20.0]))
def test_single_stratum_collapse(recs, t_star):
    z = _z(recs, 1, t_star)
    for name in ("Zs", "Zs_n"):
        assert _close(z[name], z["Z"]), name
    for name in ("Zs_Wu", "Zs_Wz", "Zs_Wn"):
        assert _close(z[name], z["ZW"]), name


@settings(max_examples=150, deadline=None)
@given(dataset(3), st.sampled_from(["per-stratum", "across-strata"]))
def test_zero_cutoff_reduces_to_logrank(recs, pooling):
    # all times are positive, so S(0) = 1 and every weight is 1
    z = _z(recs, 3, 0.0, pooling)
    assert _close(z["ZW"], z["Z"])
    assert _close(z["Zs_Wu"], z["Zs"])
    assert _close(z["Zs_Wz"], z["Zs"])
    assert _close(z["Zs_Wn"], z["Zs_n"])


@settings(max_examples=100, deadline=None)
@given(dataset(2), st.floats(0.01, 100.0), st.floats(0.01, 100.0), st.sampled_from([2.0, 6.0]))
def test_weight_scale_invariance(recs, c0, c1, t_star):
    res = _analysis(cohort_of(recs, 2), t_star)

    def rescaled(factors):
        return [stratum_score(tb, c * np.asarray(w), base.n) for tb, w, base, c in zip(res.tables, res.weights, res.strata, factors)]

    # Zs_Wz is invariant to a separate constant in each stratum, Zs_Wn to a common one
    for f, name, factors in ((stratified_wlr_z, "Zs_Wz", (c0, c1)), (stratified_wlr_n, "Zs_Wn", (c0, c0))):
        ref = res.result(name)
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", DegenerateStratumWarning)
                z = f(rescaled(factors)).z
        except DegenerateError:
            assert not ref.ok
            continue
        assert abs(z - ref.z) <= 1e-12 * max(1.0, abs(ref.z)), name


def _analysis(cohort, t_star):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStratumWarning)
        return analyze(cohort, WeightSpec.modest(t_star))
