"""Regenerate src/stratwlr/data/default_scenarios.json.

Control arms are exponential with the stratum medians below. Experimental
arms apply per-stratum hazard ratios, from time 0 (effects 1-3, 7-9) or after
a 6-month delay with hazard ratio 1 before it (effects 4-6). For effects 8
and 9 one stratum's hazard ratio is fixed and the other is solved so that the
marginal (unstratified) log-rank drift vanishes under the base design.
Effect 8 fixes a 0.4 hazard ratio (benefit) in the poor-prognosis stratum and
solves the good-prognosis harm. Effect 9 mirrors effect 8 in the
good-prognosis stratum (hazard ratio 1 / harm of effect 8) and solves the
poor-prognosis harm.

    python tools/make_default_scenarios.py > src/stratwlr/data/default_scenarios.json
"""

import math

from scipy.optimize import brentq

from stratwlr.scenarios import (
    PiecewiseExp,
    ScenarioSpec,
    SimConfig,
    StratumModel,
    dump_scenarios,
    expected_logrank_drift,
)

CONTROL_MEDIANS = {"none": (8.0, 8.0), "moderate": (6.0, 10.0), "strong": (3.0, 15.0)}
LABELS = ("poor prognosis (ECOG 1)", "good prognosis (ECOG 0)")
DELAY = 6.0

# (delay, hr_poor, hr_good, description); None = solved for marginal null
EFFECTS = {
    1: (0.0, 2 / 3, 2 / 3, "proportional hazards, equal hazard ratio in both strata"),
    2: (0.0, 0.5, 0.8, "proportional hazards, poor-prognosis stratum has the lower hazard ratio"),
    3: (0.0, 0.8, 0.5, "proportional hazards, poor-prognosis stratum has the higher hazard ratio"),
    4: (DELAY, 0.5, 0.5, "6-month delay, equal post-delay hazard ratio in both strata"),
    5: (DELAY, 0.35, 0.65, "6-month delay, poor-prognosis stratum has the stronger post-delay effect"),
    6: (DELAY, 0.65, 0.35, "6-month delay, poor-prognosis stratum has the weaker post-delay effect"),
    7: (0.0, 1.0, 1.0, "no effect in either stratum"),
    8: (0.0, 0.4, None, "benefit in poor-prognosis stratum, harm in good; marginal log-rank drift zero"),
    9: (0.0, None, "mirror", "harm in poor-prognosis stratum, benefit in good; marginal log-rank drift zero"),
}


def arm(median, hr, delay):
    lam = math.log(2.0) / median
    if hr == 1.0:
        return PiecewiseExp((), (lam,))
    if delay > 0:
        return PiecewiseExp((delay,), (lam, hr * lam))
    return PiecewiseExp((), (hr * lam,))


def build(prognostic, effect, hrs):
    delay, _, _, desc = EFFECTS[effect]
    medians = CONTROL_MEDIANS[prognostic]
    strata = [
        StratumModel(LABELS[i], 0.5, PiecewiseExp.exponential(medians[i]), arm(medians[i], hrs[i], delay))
        for i in range(2)
    ]
    params = {"control_medians": list(medians), "hazard_ratios": [round(h, 6) for h in hrs]}
    if delay:
        params["delay_months"] = delay
    return ScenarioSpec(f"{prognostic}-{effect}", tuple(strata), prognostic, effect, desc, params)


def solve_null(prognostic, effect):
    cfg = SimConfig()

    def drift(hrs):
        return expected_logrank_drift(build(prognostic, effect, hrs), cfg)["marginal"][0]

    if effect == 8:
        hp = EFFECTS[8][1]
        return hp, round(brentq(lambda h: drift((hp, h)), 1.0 + 1e-6, 50.0, xtol=1e-10), 6)
    hg = round(1.0 / solve_null(prognostic, 8)[1], 6)
    return round(brentq(lambda h: drift((h, hg)), 1.0 + 1e-6, 50.0, xtol=1e-10), 6), hg


def main():
    out = []
    for prognostic in CONTROL_MEDIANS:
        for effect in range(1, 10):
            _, hp, hg, _ = EFFECTS[effect]
            hrs = solve_null(prognostic, effect) if None in (hp, hg) else (hp, hg)
            out.append(build(prognostic, effect, hrs))
    note = (
        "Two strata, 50% prevalence each; stratum 0 is the poor-prognosis stratum. "
        "Rates are hazards per month. Hazard ratios are approximate design choices; "
        "regenerate with tools/make_default_scenarios.py."
    )
    print(dump_scenarios(out, note), end="")


if __name__ == "__main__":
    main()
