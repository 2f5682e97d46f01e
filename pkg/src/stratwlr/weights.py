"""Per-event-time weights for weighted log-rank statistics.

The modest scheme caps the inverse-survival weight at the value it reaches at
``t_star``::

    w_j = 1 / max(S(t_j-), S(t_star))

where ``S`` is the Kaplan-Meier curve of the arm-pooled sample. ``t_star = 0``
gives unit weights, i.e. the ordinary log-rank test.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConsistencyError, ValidationError
from .survival_core import KMCurve

__all__ = ["WeightSpec", "POOLING_MODES", "compute_weights"]

# How the KM curve behind stratified weights is pooled:
#   per-stratum   - arms pooled within each stratum (default)
#   across-strata - arms and strata pooled, one curve for the whole trial
POOLING_MODES = ("per-stratum", "across-strata")


@dataclass(frozen=True)
class WeightSpec:
    kind: str = "modest"
    t_star: float = 0.0

    def __post_init__(self):
        if self.kind not in ("unit", "modest"):
            raise ValidationError(f"unknown weight kind {self.kind!r}; expected 'unit' or 'modest'")
        if not np.isfinite(self.t_star) or self.t_star < 0:
            raise ValidationError(f"t_star must be a nonnegative finite number, got {self.t_star!r}")

    @classmethod
    def modest(cls, t_star: float) -> "WeightSpec":
        return cls("modest", float(t_star))

    @classmethod
    def unit(cls) -> "WeightSpec":
        return cls("unit", 0.0)


def compute_weights(spec: WeightSpec, km: KMCurve, event_times) -> np.ndarray:
    """Weights aligned with ``event_times``.

    Parameters
    ----------
    spec : WeightSpec
    km : KMCurve
        Pooled (both-arm) curve of a subject set containing the one that
        produced ``event_times``.
    event_times : array of float
        Ascending distinct event times; each must be an event time of ``km``.

    Returns
    -------
    numpy.ndarray
        One weight per event time, all >= 1.
    """
    event_times = np.asarray(event_times, dtype=float)
    if spec.kind == "unit":
        return np.ones(event_times.shape)

    idx = np.searchsorted(km.times, event_times)
    if np.any(idx >= km.times.shape[0]) or np.any(km.times[np.minimum(idx, km.times.shape[0] - 1)] != event_times):
        raise ConsistencyError("event time not in the support of the Kaplan-Meier curve")

    s_left = km.surv_left[idx]
    # an event at t_j implies someone was at risk, so S(t_j-) > 0
    assert np.all(s_left > 0), "zero left-limit survival at an event time"
    s_star = km(spec.t_star)
    return 1.0 / np.maximum(s_left, s_star)
