"""Simulation models: piecewise-exponential arms within strata, uniform accrual,
administrative censoring at the end of the study.

The 27 built-in scenarios (3 prognostic strengths x 9 treatment-effect
patterns) live in ``data/default_scenarios.json`` and can be overridden by any
file in the same format (see :func:`load_scenarios`).
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .survival_core import Cohort
from .weights import POOLING_MODES

__all__ = [
    "PiecewiseExp",
    "StratumModel",
    "ScenarioSpec",
    "SimConfig",
    "PROGNOSTIC_LEVELS",
    "EFFECTS",
    "piecewise_inverse_cdf",
    "builtin_scenario",
    "builtin_scenarios",
    "load_scenarios",
    "dump_scenarios",
    "replicate_rng",
    "sample_trial",
    "expected_logrank_drift",
]

PROGNOSTIC_LEVELS = ("none", "moderate", "strong")
EFFECTS = tuple(range(1, 10))
ALLOCATIONS = ("complete", "permuted", "bernoulli")
SCENARIO_FORMAT = "stratwlr.scenarios"
SCENARIO_FORMAT_VERSION = 1


@dataclass(frozen=True)
class PiecewiseExp:
    """Piecewise-constant hazard: ``rates[k]`` applies on ``[breakpoints[k-1], breakpoints[k])``."""

    breakpoints: tuple = ()
    rates: tuple = (1.0,)

    def __post_init__(self):
        bp = tuple(float(b) for b in self.breakpoints)
        rates = tuple(float(r) for r in self.rates)
        object.__setattr__(self, "breakpoints", bp)
        object.__setattr__(self, "rates", rates)
        if len(rates) != len(bp) + 1:
            raise ValidationError("need exactly one more rate than breakpoints")
        if not all(r > 0 and math.isfinite(r) for r in rates):
            raise ValidationError("hazard rates must be positive and finite")
        if bp and (bp[0] <= 0 or any(b2 <= b1 for b1, b2 in zip(bp, bp[1:]))):
            raise ValidationError("breakpoints must be positive and strictly increasing")

    @classmethod
    def exponential(cls, median: float) -> "PiecewiseExp":
        return cls((), (math.log(2.0) / median,))

    @property
    def _starts(self) -> np.ndarray:
        return np.concatenate(([0.0], self.breakpoints))

    @property
    def _cum_at_starts(self) -> np.ndarray:
        widths = np.diff(self._starts)
        return np.concatenate(([0.0], np.cumsum(np.asarray(self.rates[:-1]) * widths)))

    def cumulative_hazard(self, t):
        t = np.asarray(t, dtype=float)
        k = np.searchsorted(self.breakpoints, t, side="right")
        rates = np.asarray(self.rates)
        return self._cum_at_starts[k] + rates[k] * (t - self._starts[k])

    def survival(self, t):
        return np.exp(-self.cumulative_hazard(t))

    def hazard(self, t):
        return np.asarray(self.rates)[np.searchsorted(self.breakpoints, t, side="right")]

    def inverse_cdf(self, u):
        """Vectorised inverse: the t with S(t) = 1 - u."""
        target = -np.log1p(-np.asarray(u, dtype=float))
        cum = self._cum_at_starts
        k = np.searchsorted(cum, target, side="right") - 1
        return self._starts[k] + (target - cum[k]) / np.asarray(self.rates)[k]

    def to_dict(self) -> dict:
        return {"breakpoints": list(self.breakpoints), "rates": list(self.rates)}

    @classmethod
    def from_dict(cls, d: dict) -> "PiecewiseExp":
        return cls(tuple(d.get("breakpoints", ())), tuple(d["rates"]))


def piecewise_inverse_cdf(dist: PiecewiseExp, u: float) -> float:
    if not 0.0 < u < 1.0:
        raise ValidationError(f"u must lie strictly inside (0, 1), got {u!r}")
    return float(dist.inverse_cdf(u))


@dataclass(frozen=True)
class StratumModel:
    label: str
    prevalence: float
    control: PiecewiseExp
    experimental: PiecewiseExp


@dataclass(frozen=True)
class ScenarioSpec:
    """A named set of strata with per-arm survival models.

    ``parameters`` is free-form metadata (medians, hazard ratios) carried
    through the scenario file for readability; sampling ignores it.
    """

    name: str
    strata: tuple
    prognostic: Optional[str] = None
    effect: Optional[int] = None
    description: str = ""
    parameters: dict = field(default_factory=dict, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "strata", tuple(self.strata))
        if not self.strata:
            raise ValidationError(f"scenario {self.name!r} has no strata")
        prev = [s.prevalence for s in self.strata]
        if any(p < 0 for p in prev) or not math.isclose(sum(prev), 1.0, abs_tol=1e-9):
            raise ValidationError(f"scenario {self.name!r}: prevalences must be nonnegative and sum to 1")

    def to_dict(self) -> dict:
        d = {"name": self.name}
        if self.prognostic is not None:
            d["prognostic"] = self.prognostic
        if self.effect is not None:
            d["effect"] = self.effect
        if self.description:
            d["description"] = self.description
        if self.parameters:
            d["parameters"] = self.parameters
        d["strata"] = [
            {
                "label": s.label,
                "prevalence": s.prevalence,
                "control": s.control.to_dict(),
                "experimental": s.experimental.to_dict(),
            }
            for s in self.strata
        ]
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ScenarioSpec":
        try:
            strata = [
                StratumModel(
                    str(s.get("label", f"stratum {i}")),
                    float(s["prevalence"]),
                    PiecewiseExp.from_dict(s["control"]),
                    PiecewiseExp.from_dict(s["experimental"]),
                )
                for i, s in enumerate(d["strata"])
            ]
            return cls(
                name=str(d["name"]),
                strata=tuple(strata),
                prognostic=d.get("prognostic"),
                effect=d.get("effect"),
                description=d.get("description", ""),
                parameters=d.get("parameters", {}),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed scenario entry: missing or bad field {exc}") from exc


@dataclass(frozen=True)
class SimConfig:
    """Trial design and Monte Carlo settings.

    ``alloc`` selects the randomization: ``"complete"`` fixes the arm totals
    at the allocation ratio and permutes them over the whole trial,
    ``"permuted"`` does the same within each stratum, ``"bernoulli"`` flips
    an independent coin per subject.
    """

    n_total: int = 344
    recruitment_months: float = 9.0
    study_months: float = 24.0
    alloc_ratio: float = 1.0
    n_reps: int = 1000
    alpha_one_sided: float = 0.025
    t_star: float = 12.0
    seed: int = 20240101
    alloc: str = "complete"
    pooling: str = "per-stratum"

    def __post_init__(self):
        if self.n_total < 2:
            raise ValidationError("n_total must be at least 2")
        if self.recruitment_months < 0 or self.study_months <= 0:
            raise ValidationError("recruitment_months must be >= 0 and study_months > 0")
        if self.study_months < self.recruitment_months:
            raise ValidationError("study_months must be >= recruitment_months")
        if self.alloc_ratio <= 0:
            raise ValidationError("alloc_ratio must be positive")
        if self.n_reps < 1:
            raise ValidationError("n_reps must be at least 1")
        if not 0 < self.alpha_one_sided < 1:
            raise ValidationError("alpha_one_sided must lie in (0, 1)")
        if self.t_star < 0:
            raise ValidationError("t_star must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValidationError("seed must be a 64-bit unsigned integer")
        if self.alloc not in ALLOCATIONS:
            raise ValidationError(f"unknown allocation {self.alloc!r}")
        if self.pooling not in POOLING_MODES:
            raise ValidationError(f"unknown pooling {self.pooling!r}")

    def to_dict(self) -> dict:
        return asdict(self)


def load_scenarios(path=None) -> list:
    """Read a scenario file; the packaged 27 defaults when ``path`` is None."""
    if path is None:
        text = resources.files("stratwlr").joinpath("data/default_scenarios.json").read_text()
        source = "default scenario file"
    else:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ValidationError(f"cannot read scenario file {path}: {exc}") from exc
        source = str(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ValidationError(f"{source}: invalid JSON ({exc})") from exc
    if isinstance(doc, dict) and "scenarios" in doc:
        if doc.get("format", SCENARIO_FORMAT) != SCENARIO_FORMAT:
            raise ValidationError(f"{source}: unexpected format tag {doc.get('format')!r}")
        entries = doc["scenarios"]
    elif isinstance(doc, dict) and "strata" in doc:
        entries = [doc]
    elif isinstance(doc, list):
        entries = doc
    else:
        raise ValidationError(f"{source}: expected a scenario object or a list of them")
    return [ScenarioSpec.from_dict(e) for e in entries]


def dump_scenarios(scenarios: Sequence[ScenarioSpec], note: str = "") -> str:
    doc = {"format": SCENARIO_FORMAT, "version": SCENARIO_FORMAT_VERSION}
    if note:
        doc["note"] = note
    doc["scenarios"] = [s.to_dict() for s in scenarios]
    return json.dumps(doc, indent=2) + "\n"


_BUILTINS = None


def builtin_scenarios() -> list:
    global _BUILTINS
    if _BUILTINS is None:
        _BUILTINS = load_scenarios()
    return list(_BUILTINS)


def builtin_scenario(prognostic: str, effect: int) -> ScenarioSpec:
    if prognostic not in PROGNOSTIC_LEVELS:
        raise ValidationError(f"prognostic must be one of {PROGNOSTIC_LEVELS}, got {prognostic!r}")
    if effect not in EFFECTS:
        raise ValidationError(f"effect must be an integer 1..9, got {effect!r}")
    for s in builtin_scenarios():
        if s.prognostic == prognostic and s.effect == effect:
            return s
    raise ValidationError(f"no built-in scenario ({prognostic}, {effect})")


def replicate_rng(seed: int, replicate: int) -> np.random.Generator:
    """Independent stream for one replicate, derived from (seed, replicate) only."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(replicate),))
    return np.random.Generator(np.random.Philox(ss))


def _permuted_block(rng, size, p_exp):
    exact = size * p_exp
    n_exp = int(math.floor(exact))
    if rng.random() < exact - n_exp:
        n_exp += 1
    block = np.zeros(size, dtype=np.int64)
    block[:n_exp] = 1
    return rng.permutation(block)


def sample_trial(spec: ScenarioSpec, config: SimConfig, replicate: int) -> Cohort:
    """Draw one trial.

    Strata are multinomial by prevalence, recruitment is uniform over the
    accrual window and the only censoring is the end of the study, so a
    subject recruited at ``r`` is followed for ``study_months - r``.
    """
    rng = replicate_rng(config.seed, replicate)
    n = config.n_total
    k = len(spec.strata)

    cum_prev = np.cumsum([s.prevalence for s in spec.strata])
    stratum = np.minimum(np.searchsorted(cum_prev, rng.random(n), side="right"), k - 1)

    p_exp = config.alloc_ratio / (1.0 + config.alloc_ratio)
    if config.alloc == "bernoulli":
        arm = (rng.random(n) < p_exp).astype(np.int64)
    elif config.alloc == "complete":
        arm = _permuted_block(rng, n, p_exp)
    else:
        arm = np.zeros(n, dtype=np.int64)
        for i in range(k):
            idx = np.flatnonzero(stratum == i)
            arm[idx] = _permuted_block(rng, idx.size, p_exp)

    recruit = rng.random(n) * config.recruitment_months
    u = rng.random(n)
    latent = np.empty(n)
    for i, s in enumerate(spec.strata):
        for a, dist in ((0, s.control), (1, s.experimental)):
            m = (stratum == i) & (arm == a)
            latent[m] = dist.inverse_cdf(u[m])

    follow_up = config.study_months - recruit
    event = latent <= follow_up
    time = np.where(event, latent, follow_up)
    return Cohort(time, event, arm, stratum, n_strata=k, validate=False)


def expected_logrank_drift(spec: ScenarioSpec, config: SimConfig, grid: int = 20001) -> dict:
    """Large-sample drift of log-rank scores per subject under the design.

    Returns the expected score and variance contributions per recruited
    subject for each stratum and for the marginal (unstratified) test,
    obtained by integrating at-risk fractions and hazards over follow-up.
    Multiply by ``n_total`` for trial-level values. Used to calibrate and
    check the null-overall-effect scenarios, where the marginal drift should
    vanish.
    """
    horizon = config.study_months
    t = np.linspace(0.0, horizon, grid)
    r = config.recruitment_months
    min_fu = horizon - r
    if r > 0:
        censor_surv = np.clip((horizon - t) / r, 0.0, 1.0)
        censor_surv[t <= min_fu] = 1.0
    else:
        censor_surv = (t < horizon).astype(float)
    p1 = config.alloc_ratio / (1.0 + config.alloc_ratio)

    def drift(y0, y1, f0, f1):
        y = y0 + y1
        safe = np.where(y > 0, y, 1.0)
        score = np.where(y > 0, (f1 * y0 - f0 * y1) / safe, 0.0)
        var = np.where(y > 0, y0 * y1 * (f0 + f1) / safe**2, 0.0)
        return float(np.trapezoid(score, t)), float(np.trapezoid(var, t))

    per_stratum = []
    tot = [np.zeros_like(t) for _ in range(4)]
    for s in spec.strata:
        y0 = s.prevalence * (1 - p1) * s.control.survival(t) * censor_surv
        y1 = s.prevalence * p1 * s.experimental.survival(t) * censor_surv
        f0 = y0 * s.control.hazard(t)
        f1 = y1 * s.experimental.hazard(t)
        per_stratum.append(drift(y0, y1, f0, f1))
        for acc, x in zip(tot, (y0, y1, f0, f1)):
            acc += x
    return {"strata": per_stratum, "marginal": drift(*tot)}
