"""Stratified and weighted log-rank statistics.

Per stratum ``i`` and event time ``t_j`` the experimental-arm event count is
hypergeometric given the table margins, with

    E_ij = O_ij * n1_ij / n_ij
    V_ij = n0_ij * n1_ij * O_ij * (n_ij - O_ij) / (n_ij**2 * (n_ij - 1))

Summing ``O1_ij - E_ij`` (optionally weighted) and ``V_ij`` (weighted by the
squared weights) over event times gives the stratum score ``U_i`` and
variance ``V_i``. The stratified tests differ only in how the strata are
combined:

========  ==========================================================
Z         unstratified log-rank
ZW        unstratified weighted log-rank
Zs        sum(U_i) / sqrt(sum(V_i))
Zs_n      sample-size weighted Peto log-HRs, n_i * U_i / V_i
Zs_Wu     sum(U_i^W) / sqrt(sum(V_i^W))
Zs_Wz     sum(sqrt(V_i) * U_i^W / sqrt(V_i^W)) / sqrt(sum(V_i))
Zs_Wn     sample-size weighted U_i^W / V_i^W
========  ==========================================================

Negative z favours the experimental arm (arm 1).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ConsistencyError, DegenerateError, ValidationError
from .survival_core import (
    CohortLike,
    KMCurve,
    RiskTable,
    _risk_arrays,
    as_cohort,
    km_from_table,
)
from .weights import POOLING_MODES, WeightSpec, compute_weights

__all__ = [
    "TEST_NAMES",
    "TEST_LABELS",
    "DegenerateStratumWarning",
    "StratumScore",
    "TestResult",
    "Analysis",
    "normal_cdf",
    "stratum_score",
    "unstratified_test",
    "stratified_lr",
    "stratified_lr_n",
    "stratified_wlr_u",
    "stratified_wlr_z",
    "stratified_wlr_n",
    "analyze",
    "run_all",
]

TEST_NAMES = ("Z", "ZW", "Zs", "Zs_n", "Zs_Wu", "Zs_Wz", "Zs_Wn")

TEST_LABELS = {
    "Z": "unstratified log-rank",
    "ZW": "unstratified weighted log-rank",
    "Zs": "stratified log-rank",
    "Zs_n": "stratified log-rank, sample-size combination",
    "Zs_Wu": "stratified weighted log-rank, U-scale",
    "Zs_Wz": "stratified weighted log-rank, Z-scale",
    "Zs_Wn": "stratified weighted log-rank, sample-size scale",
}


class DegenerateStratumWarning(UserWarning):
    """A stratum without information was dropped from a combination."""


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2.0))


@dataclass(frozen=True)
class StratumScore:
    """Score sums of one stratum (or of the whole sample treated as one)."""

    U: float
    V: float
    U_W: float
    V_W: float
    n: int
    d: int

    @property
    def peto(self) -> float:
        """Peto log-hazard-ratio estimate U / V (nan when V = 0)."""
        return self.U / self.V if self.V > 0 else math.nan

    @property
    def peto_weighted(self) -> float:
        return self.U_W / self.V_W if self.V_W > 0 else math.nan


@dataclass(frozen=True)
class TestResult:
    """A standardized statistic with its normal p-values.

    ``p_one_sided`` is the lower tail Phi(z). A statistic that could not be
    formed carries ``z = nan`` and the reason in ``error``.
    """

    __test__ = False  # keep pytest from collecting this class

    name: str
    z: float
    p_one_sided: float
    p_two_sided: float
    error: Optional[str] = None

    @classmethod
    def from_z(cls, name: str, z: float) -> "TestResult":
        return cls(name, z, normal_cdf(z), math.erfc(abs(z) / math.sqrt(2.0)))

    @classmethod
    def failed(cls, name: str, reason: str) -> "TestResult":
        return cls(name, math.nan, math.nan, math.nan, reason)

    @property
    def ok(self) -> bool:
        return self.error is None


def stratum_score(table: RiskTable, weights, n_subjects: Optional[int] = None) -> StratumScore:
    """Unweighted and weighted score sums for one risk table.

    ``n_subjects`` is the stratum sample size; when omitted, the at-risk
    count at the first event time is used (equal unless someone was censored
    before it).
    """
    w = np.asarray(weights, dtype=float)
    if w.shape != (len(table),):
        raise ConsistencyError(f"{w.size} weights for {len(table)} risk-table rows")
    if n_subjects is None:
        n_subjects = int(table.n[0]) if len(table) else 0
    if len(table) == 0:
        return StratumScore(0.0, 0.0, 0.0, 0.0, int(n_subjects), 0)

    n = table.n.astype(float)
    o = table.events.astype(float)
    o_minus_e = table.events1 - o * table.n1 / n
    denom = n * n * (n - 1.0)
    # n = 1 makes the conditional law a point mass
    v = np.divide(table.n0 * table.n1 * o * (n - o), denom, out=np.zeros_like(n), where=denom > 0)
    return StratumScore(
        U=float(o_minus_e.sum()),
        V=float(v.sum()),
        U_W=float(np.dot(w, o_minus_e)),
        V_W=float(np.dot(w * w, v)),
        n=int(n_subjects),
        d=len(table),
    )


def _standardize(name, num, var):
    if not var > 0:
        raise DegenerateError(f"{name}: no events / degenerate variance")
    return TestResult.from_z(name, num / math.sqrt(var))


def unstratified_test(score: StratumScore, weighted: bool = False) -> TestResult:
    """Z (or ZW when ``weighted``) from the score of the whole sample."""
    if weighted:
        return _standardize("ZW", score.U_W, score.V_W)
    return _standardize("Z", score.U, score.V)


def stratified_lr(scores: Sequence[StratumScore]) -> TestResult:
    return _standardize("Zs", sum(s.U for s in scores), sum(s.V for s in scores))


def stratified_wlr_u(scores: Sequence[StratumScore]) -> TestResult:
    return _standardize("Zs_Wu", sum(s.U_W for s in scores), sum(s.V_W for s in scores))


def stratified_wlr_z(scores: Sequence[StratumScore]) -> TestResult:
    num = var = 0.0
    for i, s in enumerate(scores):
        if not s.V > 0:
            warnings.warn(f"stratum {i} has no information and is left out of Zs_Wz", DegenerateStratumWarning)
            continue
        num += math.sqrt(s.V) * s.U_W / math.sqrt(s.V_W)
        var += s.V
    return _standardize("Zs_Wz", num, var)


def _sample_size_combination(name, scores, weighted):
    if not scores:
        raise DegenerateError(f"{name}: no strata")
    num = var = 0.0
    for i, s in enumerate(scores):
        u, v = (s.U_W, s.V_W) if weighted else (s.U, s.V)
        if not v > 0:
            raise DegenerateError(f"{name}: degenerate stratum {i} for sample-size combination")
        num += s.n * u / v
        var += s.n * s.n / v
    return _standardize(name, num, var)


def stratified_lr_n(scores: Sequence[StratumScore]) -> TestResult:
    """Sample-size weighted combination of per-stratum Peto estimates U_i / V_i."""
    return _sample_size_combination("Zs_n", scores, weighted=False)


def stratified_wlr_n(scores: Sequence[StratumScore]) -> TestResult:
    return _sample_size_combination("Zs_Wn", scores, weighted=True)


@dataclass
class Analysis:
    """Everything computed for one dataset: the seven results plus the pieces behind them."""

    spec: WeightSpec
    pooling: str
    results: list
    overall: StratumScore
    strata: list
    overall_table: RiskTable
    tables: list
    overall_km: KMCurve
    kms: list
    overall_weights: np.ndarray = field(repr=False, default=None)
    weights: list = field(repr=False, default_factory=list)

    def result(self, name: str) -> TestResult:
        for r in self.results:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def z(self) -> dict:
        return {r.name: r.z for r in self.results}

    @property
    def failures(self) -> list:
        return [r for r in self.results if not r.ok]


def analyze(records: CohortLike, spec: WeightSpec, pooling: str = "per-stratum") -> Analysis:
    """Compute all seven statistics from one pass over the risk tables.

    The unstratified tests use the whole sample as a single stratum with
    weights from the fully pooled KM curve. For the stratified weighted
    tests, ``pooling`` selects which KM curve drives each stratum's weights.
    Statistics that cannot be formed are returned as failed results rather
    than raised.
    """
    if pooling not in POOLING_MODES:
        raise ValidationError(f"unknown pooling {pooling!r}; expected one of {POOLING_MODES}")
    cohort = as_cohort(records)
    if len(cohort) == 0:
        raise ValidationError("no subjects")
    if not (np.any(cohort.arm == 0) and np.any(cohort.arm == 1)):
        raise ValidationError("both arms must be present")

    overall_table = _risk_arrays(cohort.time, cohort.event, cohort.arm)
    overall_km = km_from_table(overall_table)
    overall_w = compute_weights(spec, overall_km, overall_table.times)
    overall = stratum_score(overall_table, overall_w, len(cohort))

    tables, kms, weights, scores = [], [], [], []
    for i in range(cohort.n_strata):
        mask = cohort.stratum == i
        table = _risk_arrays(cohort.time[mask], cohort.event[mask], cohort.arm[mask])
        km = km_from_table(table) if pooling == "per-stratum" else overall_km
        w = compute_weights(spec, km, table.times)
        tables.append(table)
        kms.append(km)
        weights.append(w)
        scores.append(stratum_score(table, w, int(mask.sum())))

    steps = (
        ("Z", lambda: unstratified_test(overall)),
        ("ZW", lambda: unstratified_test(overall, weighted=True)),
        ("Zs", lambda: stratified_lr(scores)),
        ("Zs_n", lambda: stratified_lr_n(scores)),
        ("Zs_Wu", lambda: stratified_wlr_u(scores)),
        ("Zs_Wz", lambda: stratified_wlr_z(scores)),
        ("Zs_Wn", lambda: stratified_wlr_n(scores)),
    )
    results = []
    for name, step in steps:
        try:
            results.append(step())
        except DegenerateError as exc:
            results.append(TestResult.failed(name, str(exc)))

    return Analysis(
        spec=spec,
        pooling=pooling,
        results=results,
        overall=overall,
        strata=scores,
        overall_table=overall_table,
        tables=tables,
        overall_km=overall_km,
        kms=kms,
        overall_weights=overall_w,
        weights=weights,
    )


def run_all(records: CohortLike, spec: WeightSpec, pooling: str = "per-stratum") -> list:
    """The seven :class:`TestResult` objects, in :data:`TEST_NAMES` order."""
    return analyze(records, spec, pooling).results
