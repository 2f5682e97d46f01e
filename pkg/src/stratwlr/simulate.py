"""Monte Carlo estimation of rejection rates for the seven tests."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .errors import ValidationError
from .logrank import TEST_NAMES, DegenerateStratumWarning, analyze
from .scenarios import ScenarioSpec, SimConfig, sample_trial
from .weights import WeightSpec

__all__ = [
    "SimResult",
    "SimulationWarning",
    "estimate_power",
    "run_grid",
    "results_csv",
    "results_summary",
    "CSV_COLUMNS",
]

CSV_COLUMNS = ("scenario", "prognostic", "effect", "test", "rejections", "reps", "proportion", "se", "failures")


class SimulationWarning(UserWarning):
    pass


@dataclass
class SimResult:
    scenario: str
    n_reps: int
    rejections: dict
    failures: dict
    prognostic: Optional[str] = None
    effect: Optional[int] = None
    config: dict = field(default_factory=dict, repr=False)

    def proportion(self, test: str) -> float:
        return self.rejections[test] / self.n_reps

    def se(self, test: str) -> float:
        p = self.proportion(test)
        return math.sqrt(p * (1.0 - p) / self.n_reps)

    def rows(self) -> list:
        return [
            {
                "scenario": self.scenario,
                "prognostic": self.prognostic,
                "effect": self.effect,
                "test": t,
                "rejections": self.rejections[t],
                "reps": self.n_reps,
                "proportion": self.proportion(t),
                "se": self.se(t),
                "failures": self.failures[t],
            }
            for t in TEST_NAMES
        ]


def _run_chunk(spec: ScenarioSpec, config: SimConfig, start: int, stop: int):
    rejections = np.zeros(len(TEST_NAMES), dtype=np.int64)
    failures = np.zeros(len(TEST_NAMES), dtype=np.int64)
    wspec = WeightSpec.modest(config.t_star)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", DegenerateStratumWarning)
        for r in range(start, stop):
            trial = sample_trial(spec, config, r)
            try:
                results = analyze(trial, wspec, config.pooling).results
            except ValidationError:
                # e.g. every subject landed in one arm
                failures += 1
                continue
            for k, res in enumerate(results):
                if not res.ok:
                    failures[k] += 1
                elif res.p_one_sided < config.alpha_one_sided:
                    rejections[k] += 1
    return rejections, failures


def _chunks(n_reps: int, workers: int):
    n_chunks = max(1, min(n_reps, workers * 8))
    edges = np.linspace(0, n_reps, n_chunks + 1).astype(int)
    return [(int(a), int(b)) for a, b in zip(edges[:-1], edges[1:]) if b > a]


def _aggregate(spec, config, parts) -> SimResult:
    rej = np.zeros(len(TEST_NAMES), dtype=np.int64)
    fail = np.zeros(len(TEST_NAMES), dtype=np.int64)
    for r, f in parts:
        rej += r
        fail += f
    result = SimResult(
        scenario=spec.name,
        n_reps=config.n_reps,
        rejections={t: int(x) for t, x in zip(TEST_NAMES, rej)},
        failures={t: int(x) for t, x in zip(TEST_NAMES, fail)},
        prognostic=spec.prognostic,
        effect=spec.effect,
        config=config.to_dict(),
    )
    worst = max(result.failures.values())
    if worst > 0.01 * config.n_reps:
        warnings.warn(
            f"scenario {spec.name}: a statistic was undefined in {worst} of {config.n_reps} replicates",
            SimulationWarning,
        )
    return result


def estimate_power(spec: ScenarioSpec, config: SimConfig, workers: int = 1) -> SimResult:
    """Rejection rate of each test at one-sided level ``config.alpha_one_sided``.

    Replicate ``r`` draws from its own stream seeded by ``(config.seed, r)``,
    so the result does not depend on ``workers``. Replicates where a
    statistic is undefined count as non-rejections and are tallied in
    ``failures``.
    """
    return run_grid([spec], config, workers)[0]


def run_grid(scenarios: Sequence[ScenarioSpec], config: SimConfig, workers: int = 1) -> list:
    """:func:`estimate_power` over several scenarios, sharing one worker pool."""
    names = [s.name for s in scenarios]
    dupes = sorted({n for n in names if names.count(n) > 1})
    if dupes:
        raise ValidationError(f"duplicate scenario names: {', '.join(dupes)}")
    if workers < 1:
        raise ValidationError("workers must be at least 1")
    if not scenarios:
        return []

    chunks = _chunks(config.n_reps, workers)
    if workers == 1:
        parts = [[_run_chunk(s, config, a, b) for a, b in chunks] for s in scenarios]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [[pool.submit(_run_chunk, s, config, a, b) for a, b in chunks] for s in scenarios]
            parts = [[f.result() for f in fs] for fs in futures]
    return [_aggregate(s, config, p) for s, p in zip(scenarios, parts)]


def results_csv(results: Sequence[SimResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for res in results:
        for row in res.rows():
            row = dict(row)
            row["proportion"] = repr(row["proportion"])
            row["se"] = repr(row["se"])
            writer.writerow({k: "" if v is None else v for k, v in row.items()})
    return buf.getvalue()


def results_summary(results: Sequence[SimResult], config: SimConfig, extra: Optional[dict] = None) -> str:
    """JSON document with the run configuration and a nested table of proportions."""
    from . import __version__

    doc = {
        "tool": "stratwlr",
        "version": __version__,
        "config": config.to_dict(),
        "scenarios": [
            {
                "scenario": r.scenario,
                "prognostic": r.prognostic,
                "effect": r.effect,
                "reps": r.n_reps,
                "tests": {
                    t: {
                        "rejections": r.rejections[t],
                        "proportion": r.proportion(t),
                        "se": r.se(t),
                        "failures": r.failures[t],
                    }
                    for t in TEST_NAMES
                },
            }
            for r in results
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, indent=2, sort_keys=False) + "\n"
