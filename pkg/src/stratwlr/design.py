"""Fixed-design sample size: Schoenfeld event count and the matching number of patients."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

from scipy import integrate, optimize, stats

from .errors import ValidationError

__all__ = ["required_events", "event_probability", "required_patients", "DesignSummary", "design_trial"]


def required_events(median_control: float, median_exp: float, alpha_one_sided: float = 0.025, power: float = 0.9) -> int:
    """Schoenfeld's event count for a 1:1 exponential comparison, rounded up.

    ``4 * ((z_{power} + z_{1-alpha}) / log(median_control / median_exp))**2``
    """
    if median_control <= 0 or median_exp <= 0:
        raise ValidationError("medians must be positive")
    if median_control == median_exp:
        raise ValidationError("equal medians: zero effect, no finite event count")
    if not 0 < alpha_one_sided < 1 or not 0 < power < 1:
        raise ValidationError("alpha and power must lie in (0, 1)")
    z = stats.norm.ppf(power) + stats.norm.ppf(1.0 - alpha_one_sided)
    d = 4.0 * (z / math.log(median_control / median_exp)) ** 2
    # guard against 256.0000000001-style representation error
    return int(math.ceil(d - 1e-9))


def _check_horizon(recruit_months, study_months):
    if recruit_months < 0 or study_months <= 0:
        raise ValidationError("recruitment must be >= 0 and study duration > 0 months")
    if study_months < recruit_months:
        raise ValidationError("study duration shorter than the recruitment period")


def event_probability(median: float, recruit_months: float, study_months: float, calendar_time: float = None) -> float:
    """P(event observed by ``calendar_time``) for one exponential patient recruited uniformly.

    ``calendar_time`` defaults to the end of the study.
    """
    _check_horizon(recruit_months, study_months)
    tau = study_months if calendar_time is None else calendar_time
    lam = math.log(2.0) / median

    def cdf(fu):
        return -math.expm1(-lam * max(fu, 0.0))

    if recruit_months == 0:
        return cdf(tau)
    upper = min(recruit_months, tau)
    if upper <= 0:
        return 0.0
    val, _ = integrate.quad(lambda r: cdf(tau - r), 0.0, upper)
    return val / recruit_months


@dataclass(frozen=True)
class DesignSummary:
    events: int
    patients: int
    patients_control: int
    patients_exp: int
    event_probability: float
    expected_events: float
    months_to_target: float

    def to_dict(self) -> dict:
        return asdict(self)


def required_patients(
    events: int,
    median_control: float,
    median_exp: float,
    recruit_months: float = 9.0,
    study_months: float = 24.0,
    alloc_ratio: float = 1.0,
    max_patients: int = 1_000_000,
) -> int:
    """Smallest enrolment whose expected number of events at study end reaches ``events``.

    With 1:1 allocation the count is rounded up to an even number so both
    arms are the same size.
    """
    p1 = alloc_ratio / (1.0 + alloc_ratio)
    prob = (1 - p1) * event_probability(median_control, recruit_months, study_months) + p1 * event_probability(
        median_exp, recruit_months, study_months
    )
    if prob <= 0:
        raise ValidationError("no events can occur before the end of the study")
    n = math.ceil(events / prob - 1e-9)
    while n * prob < events:
        n += 1
    if alloc_ratio == 1.0 and n % 2:
        n += 1
    if n > max_patients:
        raise ValidationError(
            f"{events} events need {n} patients, above the limit of {max_patients}; lengthen the study"
        )
    return n


def design_trial(
    median_control: float,
    median_exp: float,
    alpha_one_sided: float = 0.025,
    power: float = 0.9,
    recruit_months: float = 9.0,
    study_months: float = 24.0,
    alloc_ratio: float = 1.0,
    max_patients: int = 1_000_000,
) -> DesignSummary:
    """Events from Schoenfeld's formula, then patients by searching the expected event accrual."""
    _check_horizon(recruit_months, study_months)
    d = required_events(median_control, median_exp, alpha_one_sided, power)
    n = required_patients(d, median_control, median_exp, recruit_months, study_months, alloc_ratio, max_patients)
    p1 = alloc_ratio / (1.0 + alloc_ratio)
    n_exp = int(round(n * p1))

    def expected(tau):
        return (n - n_exp) * event_probability(median_control, recruit_months, study_months, tau) + n_exp * event_probability(
            median_exp, recruit_months, study_months, tau
        )

    total = expected(study_months)
    # calendar time at which the expected count first reaches the target
    tau = optimize.brentq(lambda t: expected(t) - d, 1e-9, study_months) if total >= d else math.nan
    return DesignSummary(
        events=d,
        patients=n,
        patients_control=n - n_exp,
        patients_exp=n_exp,
        event_probability=total / n,
        expected_events=total,
        months_to_target=tau,
    )
