"""Stratified weighted log-rank tests for delayed treatment effects."""

__version__ = "0.1.0"

from .errors import ConsistencyError, DegenerateError, StratWLRError, ValidationError
from .survival_core import Cohort, KMCurve, RiskRow, RiskTable, SubjectRecord, build_risk_table, km_estimate
from .weights import WeightSpec, compute_weights
from .logrank import (
    TEST_NAMES,
    Analysis,
    StratumScore,
    TestResult,
    analyze,
    run_all,
    stratified_lr,
    stratified_lr_n,
    stratified_wlr_n,
    stratified_wlr_u,
    stratified_wlr_z,
    stratum_score,
    unstratified_test,
)
from .scenarios import PiecewiseExp, ScenarioSpec, SimConfig, builtin_scenario, sample_trial
from .simulate import SimResult, estimate_power, run_grid
from .design import design_trial, required_events
