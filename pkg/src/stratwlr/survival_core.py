"""Patient records, per-event-time risk tables and Kaplan-Meier curves.

Everything downstream (weights, score statistics, the simulator) works off
the arrays held by :class:`Cohort`, :class:`RiskTable` and :class:`KMCurve`.
Lists of :class:`SubjectRecord` are accepted wherever a cohort is expected and
converted on the way in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import ValidationError

__all__ = [
    "SubjectRecord",
    "Cohort",
    "RiskRow",
    "RiskTable",
    "KMCurve",
    "as_cohort",
    "build_risk_table",
    "km_estimate",
]


@dataclass(frozen=True)
class SubjectRecord:
    """One patient: follow-up time in months, event flag, arm (1 = experimental) and stratum index."""

    time: float
    event: bool
    arm: int
    stratum: int = 0


@dataclass(frozen=True, init=False, eq=False)
class Cohort:
    """Column-oriented set of subject records.

    Parameters
    ----------
    time : array of float
        Observed follow-up, nonnegative and finite.
    event : array of bool
        True where the event was observed, False where censored.
    arm : array of int
        0 = control, 1 = experimental.
    stratum : array of int
        0-based stratum index.
    n_strata : int, optional
        Number of declared strata. Defaults to ``max(stratum) + 1``.
    """

    time: np.ndarray
    event: np.ndarray
    arm: np.ndarray
    stratum: np.ndarray
    n_strata: int

    def __init__(self, time, event, arm, stratum=None, n_strata=None, validate=True):
        time = np.asarray(time, dtype=float)
        event = np.asarray(event, dtype=bool)
        arm = np.asarray(arm, dtype=np.int64)
        if stratum is None:
            stratum = np.zeros(time.shape, dtype=np.int64)
        stratum = np.asarray(stratum, dtype=np.int64)
        if n_strata is None:
            n_strata = int(stratum.max()) + 1 if stratum.size else 1
        object.__setattr__(self, "time", time)
        object.__setattr__(self, "event", event)
        object.__setattr__(self, "arm", arm)
        object.__setattr__(self, "stratum", stratum)
        object.__setattr__(self, "n_strata", int(n_strata))
        if validate:
            self._validate()

    def _validate(self):
        n = self.time.shape
        if self.time.ndim != 1 or any(a.shape != n for a in (self.event, self.arm, self.stratum)):
            raise ValidationError("time, event, arm and stratum must be 1-d arrays of equal length")
        if not np.all(np.isfinite(self.time)):
            raise ValidationError("times must be finite")
        if np.any(self.time < 0):
            raise ValidationError("times must be nonnegative")
        if np.any((self.arm != 0) & (self.arm != 1)):
            raise ValidationError("arm must be 0 (control) or 1 (experimental)")
        if np.any(self.stratum < 0) or np.any(self.stratum >= self.n_strata):
            raise ValidationError(f"stratum index outside [0, {self.n_strata})")

    @classmethod
    def from_records(cls, records: Iterable[SubjectRecord], n_strata=None) -> "Cohort":
        records = list(records)
        return cls(
            [r.time for r in records],
            [bool(r.event) for r in records],
            [r.arm for r in records],
            [r.stratum for r in records],
            n_strata=n_strata,
        )

    def __len__(self):
        return self.time.shape[0]

    def __iter__(self) -> Iterator[SubjectRecord]:
        for t, e, a, s in zip(self.time, self.event, self.arm, self.stratum):
            yield SubjectRecord(float(t), bool(e), int(a), int(s))

    def records(self) -> list:
        return list(self)

    def subset(self, mask) -> "Cohort":
        return Cohort(
            self.time[mask], self.event[mask], self.arm[mask], self.stratum[mask],
            n_strata=self.n_strata, validate=False,
        )

    def in_stratum(self, i: int) -> "Cohort":
        return self.subset(self.stratum == i)

    def swap_arms(self) -> "Cohort":
        return Cohort(self.time, self.event, 1 - self.arm, self.stratum, self.n_strata, validate=False)


CohortLike = Union[Cohort, Sequence[SubjectRecord]]


def as_cohort(data: CohortLike) -> Cohort:
    if isinstance(data, Cohort):
        return data
    return Cohort.from_records(data)


@dataclass(frozen=True)
class RiskRow:
    """The 2x2 table at one distinct event time."""

    t: float
    n: int
    n1: int
    n0: int
    events: int
    events1: int

    @property
    def events0(self) -> int:
        return self.events - self.events1


@dataclass(frozen=True, eq=False)
class RiskTable:
    """Per-event-time 2x2 summaries for one stratum, stored as parallel arrays.

    Only times with at least one event get a row. Subjects censored at an
    event time are still at risk at that time.
    """

    times: np.ndarray
    n: np.ndarray
    n1: np.ndarray
    n0: np.ndarray
    events: np.ndarray
    events1: np.ndarray

    def __len__(self):
        return self.times.shape[0]

    @property
    def events0(self) -> np.ndarray:
        return self.events - self.events1

    @property
    def rows(self) -> list:
        return [
            RiskRow(float(t), int(n), int(n1), int(n0), int(o), int(o1))
            for t, n, n1, n0, o, o1 in zip(self.times, self.n, self.n1, self.n0, self.events, self.events1)
        ]


def _at_risk(sorted_times: np.ndarray, at: np.ndarray) -> np.ndarray:
    # subjects with time >= t
    return sorted_times.shape[0] - np.searchsorted(sorted_times, at, side="left")


def _risk_arrays(time: np.ndarray, event: np.ndarray, arm: np.ndarray) -> RiskTable:
    ev_times = time[event]
    uniq, counts = np.unique(ev_times, return_counts=True)
    if uniq.size == 0:
        empty_i = np.zeros(0, dtype=np.int64)
        return RiskTable(np.zeros(0), empty_i, empty_i, empty_i, empty_i, empty_i)

    arm1 = arm == 1
    t1 = np.sort(time[arm1])
    t0 = np.sort(time[~arm1])
    n1 = _at_risk(t1, uniq)
    n0 = _at_risk(t0, uniq)

    ev1_times = np.sort(time[event & arm1])
    o1 = np.searchsorted(ev1_times, uniq, side="right") - np.searchsorted(ev1_times, uniq, side="left")
    return RiskTable(uniq, n1 + n0, n1, n0, counts.astype(np.int64), o1.astype(np.int64))


def build_risk_table(records: CohortLike) -> RiskTable:
    """Tabulate the 2x2 tables at each distinct event time of one stratum.

    Raises
    ------
    ValidationError
        On empty input, negative times, or records spanning several strata.
    """
    cohort = as_cohort(records)
    if len(cohort) == 0:
        raise ValidationError("empty stratum")
    if np.unique(cohort.stratum).size > 1:
        raise ValidationError("records for a risk table must share one stratum")
    return _risk_arrays(cohort.time, cohort.event, cohort.arm)


def pooled_risk_table(records: CohortLike) -> RiskTable:
    """Risk table of the whole cohort, ignoring strata."""
    cohort = as_cohort(records)
    if len(cohort) == 0:
        raise ValidationError("empty cohort")
    return _risk_arrays(cohort.time, cohort.event, cohort.arm)


@dataclass(frozen=True, eq=False)
class KMCurve:
    """Kaplan-Meier curve evaluated at the distinct event times.

    ``surv[j]`` is S(t_j) and ``surv_left[j]`` the left limit S(t_j-).
    """

    times: np.ndarray
    surv: np.ndarray
    surv_left: np.ndarray
    n_risk: np.ndarray
    n_event: np.ndarray

    def __call__(self, t):
        """Right-continuous step function value at ``t`` (scalar or array)."""
        idx = np.searchsorted(self.times, t, side="right") - 1
        surv = np.concatenate(([1.0], self.surv))
        out = surv[np.asarray(idx) + 1]
        return float(out) if np.ndim(out) == 0 else out

    def left_limit(self, t):
        idx = np.searchsorted(self.times, t, side="left") - 1
        surv = np.concatenate(([1.0], self.surv))
        out = surv[np.asarray(idx) + 1]
        return float(out) if np.ndim(out) == 0 else out


def km_from_table(table: RiskTable) -> KMCurve:
    surv = np.cumprod(1.0 - table.events / table.n)
    left = np.concatenate(([1.0], surv[:-1]))
    return KMCurve(table.times, surv, left, table.n, table.events)


def km_estimate(records: CohortLike) -> KMCurve:
    """Product-limit estimate from all given records, arms and strata pooled."""
    cohort = as_cohort(records)
    if len(cohort) == 0:
        raise ValidationError("empty input to km_estimate")
    return km_from_table(_risk_arrays(cohort.time, cohort.event, cohort.arm))
