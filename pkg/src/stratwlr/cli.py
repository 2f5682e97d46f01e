"""Command-line interface.

Exit codes: 0 success, 2 bad input or flags, 3 a statistic could not be
computed (the rest of the output is still written).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .design import design_trial
from .errors import StratWLRError, ValidationError
from .io import ColumnMap, Dataset, read_dataset
from .logrank import TEST_LABELS, Analysis, DegenerateStratumWarning, analyze
from .scenarios import (
    ALLOCATIONS,
    EFFECTS,
    PROGNOSTIC_LEVELS,
    SimConfig,
    builtin_scenario,
    builtin_scenarios,
    dump_scenarios,
    load_scenarios,
)
from .simulate import results_csv, results_summary, run_grid
from .survival_core import km_from_table, _risk_arrays
from .weights import POOLING_MODES, WeightSpec

EXIT_OK, EXIT_INPUT, EXIT_DEGENERATE = 0, 2, 3
SEED_ENV = "STRATWLR_SEED"
DEFAULT_SEED = 20240101


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_INPUT, f"{self.prog}: error: {message}\n")


def _f4(x) -> str:
    return "nan" if x is None or (isinstance(x, float) and math.isnan(x)) else f"{x:.4f}"


def _metadata(command: str, args: argparse.Namespace, skip=(), **extra) -> dict:
    flags = {k: v for k, v in sorted(vars(args).items()) if k not in ("func",) + tuple(skip)}
    return {"tool": "stratwlr", "version": __version__, "command": command, "flags": flags, **extra}


def _write_json(path: Path, doc: dict):
    path.write_text(json.dumps(doc, indent=2, default=str) + "\n")


def _load(args) -> Dataset:
    cols = ColumnMap(
        time=args.time_col,
        event=args.event_col,
        arm=args.arm_col,
        stratum=None if args.no_strata else args.stratum_col,
    )
    strata = [s.strip() for s in args.strata.split(",")] if args.strata else None
    return read_dataset(args.data, columns=cols, delimiter=args.delimiter, experimental=args.experimental, strata=strata)


# analyze ---------------------------------------------------------------------


def _tests_rows(an: Analysis):
    return [
        {
            "test": r.name,
            "description": TEST_LABELS[r.name],
            "z": repr(r.z),
            "p_one_sided": repr(r.p_one_sided),
            "p_two_sided": repr(r.p_two_sided),
            "error": r.error or "",
        }
        for r in an.results
    ]


def _strata_rows(an: Analysis, labels):
    rows = []
    for label, s in [("all", an.overall)] + list(zip(labels, an.strata)):
        rows.append(
            {
                "stratum": label,
                "n": s.n,
                "d": s.d,
                "U": repr(s.U),
                "V": repr(s.V),
                "U_W": repr(s.U_W),
                "V_W": repr(s.V_W),
                "peto_log_hr": repr(s.peto),
            }
        )
    return rows


def _weight_rows(an: Analysis, labels):
    rows = []
    scopes = [("all", an.overall_table, an.overall_km, an.overall_weights)]
    scopes += list(zip(labels, an.tables, an.kms, an.weights))
    for label, table, km, w in scopes:
        idx = np.searchsorted(km.times, table.times)
        for j, t in enumerate(table.times):
            rows.append(
                {
                    "stratum": label,
                    "time": repr(float(t)),
                    "n_risk": int(table.n[j]),
                    "n_event": int(table.events[j]),
                    "km_survival": repr(float(km.surv[idx[j]])),
                    "km_left": repr(float(km.surv_left[idx[j]])),
                    "weight": repr(float(w[j])),
                }
            )
    return rows


def _csv_text(rows, fieldnames) -> str:
    buf = io.StringIO()
    w = csv.DictWriter(buf, fieldnames=fieldnames, lineterminator="\n")
    w.writeheader()
    w.writerows(rows)
    return buf.getvalue()


def _report(ds: Dataset, an: Analysis, brief: bool) -> str:
    c = ds.cohort
    out = [
        f"stratwlr {__version__} analysis of {ds.source}",
        f"subjects: {len(c)}  events: {int(c.event.sum())}  "
        f"control ({ds.arm_labels[0]}): {int((c.arm == 0).sum())}  "
        f"experimental ({ds.arm_labels[1]}): {int((c.arm == 1).sum())}",
        f"weights: modest, t* = {an.spec.t_star:g}; KM pooling for strata: {an.pooling}",
        "strata: " + ", ".join(f"{i}={lab}" for i, lab in enumerate(ds.stratum_labels)),
        "",
        f"{'test':<7}{'z':>10}{'p (1-sided)':>14}{'p (2-sided)':>14}  description",
    ]
    for r in an.results:
        if r.ok:
            out.append(f"{r.name:<7}{_f4(r.z):>10}{_f4(r.p_one_sided):>14}{_f4(r.p_two_sided):>14}  {TEST_LABELS[r.name]}")
        else:
            out.append(f"{r.name:<7}{'FAILED':>10}{'':>14}{'':>14}  {r.error}")
    out += ["", f"{'stratum':<16}{'n':>6}{'d':>6}{'U':>11}{'V':>11}{'U_W':>11}{'V_W':>11}{'Peto':>10}"]
    for label, s in [("all", an.overall)] + list(zip(ds.stratum_labels, an.strata)):
        out.append(
            f"{label[:15]:<16}{s.n:>6}{s.d:>6}{_f4(s.U):>11}{_f4(s.V):>11}{_f4(s.U_W):>11}{_f4(s.V_W):>11}{_f4(s.peto):>10}"
        )
    if len(ds.stratum_labels) == 1:
        out += [
            "",
            "note: single stratum, so Z = Zs = Zs_n and ZW = Zs_Wu = Zs_Wz = Zs_Wn",
        ]
    if not brief:
        out += ["", "Kaplan-Meier curves and weights", f"{'stratum':<16}{'time':>10}{'n_risk':>8}{'events':>8}{'S(t)':>9}{'S(t-)':>9}{'weight':>9}"]
        for row in _weight_rows(an, ds.stratum_labels):
            out.append(
                f"{row['stratum'][:15]:<16}{float(row['time']):>10.4f}{row['n_risk']:>8}{row['n_event']:>8}"
                f"{float(row['km_survival']):>9.4f}{float(row['km_left']):>9.4f}{float(row['weight']):>9.4f}"
            )
    return "\n".join(out) + "\n"


def cmd_analyze(args) -> int:
    ds = _load(args)
    for a, label in enumerate(ds.arm_labels):
        if (ds.cohort.arm == a).sum() < 2:
            raise ValidationError(f"arm {label!r} needs at least 2 subjects")
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", DegenerateStratumWarning)
        an = analyze(ds.cohort, WeightSpec.modest(args.t_star), args.pooling)
    report = _report(ds, an, args.brief)
    for w in caught:
        report += f"warning: {w.message}\n"
    sys.stdout.write(report)

    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.txt").write_text(report)
        (out / "tests.csv").write_text(
            _csv_text(_tests_rows(an), ["test", "description", "z", "p_one_sided", "p_two_sided", "error"])
        )
        (out / "strata.csv").write_text(
            _csv_text(_strata_rows(an, ds.stratum_labels), ["stratum", "n", "d", "U", "V", "U_W", "V_W", "peto_log_hr"])
        )
        (out / "km.csv").write_text(
            _csv_text(
                _weight_rows(an, ds.stratum_labels),
                ["stratum", "time", "n_risk", "n_event", "km_survival", "km_left", "weight"],
            )
        )
        _write_json(
            out / "run.json",
            _metadata(
                "analyze",
                args,
                input_sha256=ds.sha256,
                stratum_labels=ds.stratum_labels,
                arm_labels=list(ds.arm_labels),
                results={r.name: {"z": r.z, "p_one_sided": r.p_one_sided, "p_two_sided": r.p_two_sided, "error": r.error} for r in an.results},
            ),
        )

    if an.failures:
        names = ", ".join(r.name for r in an.failures)
        print(f"stratwlr: could not compute {names}", file=sys.stderr)
        return EXIT_DEGENERATE
    return EXIT_OK


# km --------------------------------------------------------------------------


def km_rows(ds: Dataset) -> list:
    c = ds.cohort
    groups = [("all", np.ones(len(c), dtype=bool))]
    if len(ds.stratum_labels) > 1:
        groups += [(lab, c.stratum == i) for i, lab in enumerate(ds.stratum_labels)]
    rows = []
    for label, mask in groups:
        for arm_name, sel in (
            ("pooled", mask),
            (ds.arm_labels[0], mask & (c.arm == 0)),
            (ds.arm_labels[1], mask & (c.arm == 1)),
        ):
            if not sel.any():
                continue
            km = km_from_table(_risk_arrays(c.time[sel], c.event[sel], c.arm[sel]))
            for t, n, d, s in zip(km.times, km.n_risk, km.n_event, km.surv):
                rows.append(
                    {"stratum": label, "arm": arm_name, "time": repr(float(t)), "n_risk": int(n), "n_event": int(d), "survival": repr(float(s))}
                )
    return rows


def cmd_km(args) -> int:
    ds = _load(args)
    text = _csv_text(km_rows(ds), ["stratum", "arm", "time", "n_risk", "n_event", "survival"])
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# simulate --------------------------------------------------------------------


def _select_scenarios(args) -> list:
    chosen_builtin = args.all or args.prognostic or args.effect
    if args.scenario and chosen_builtin:
        raise ValidationError("--scenario cannot be combined with --all/--prognostic/--effect")
    if args.all and (args.prognostic or args.effect):
        raise ValidationError("--all cannot be combined with --prognostic/--effect")
    if args.scenario:
        if Path(args.scenario).exists():
            return load_scenarios(args.scenario)
        by_name = {s.name: s for s in builtin_scenarios()}
        if args.scenario not in by_name:
            raise ValidationError(f"--scenario {args.scenario!r} is neither a file nor a built-in name (e.g. strong-8)")
        return [by_name[args.scenario]]
    if args.all:
        return builtin_scenarios()
    if not chosen_builtin:
        raise ValidationError("choose scenarios with --all, --prognostic/--effect or --scenario")
    progs = args.prognostic or list(PROGNOSTIC_LEVELS)
    effects = args.effect or list(EFFECTS)
    return [builtin_scenario(p, e) for p in progs for e in effects]


def cmd_simulate(args) -> int:
    scenarios = _select_scenarios(args)
    config = SimConfig(
        n_total=args.n,
        recruitment_months=args.recruit_months,
        study_months=args.study_months,
        alloc_ratio=args.alloc_ratio,
        n_reps=args.reps,
        alpha_one_sided=args.alpha,
        t_star=args.t_star,
        seed=args.seed,
        alloc=args.alloc,
        pooling=args.pooling,
    )
    results = run_grid(scenarios, config, workers=args.workers)
    text = results_csv(results)
    # worker count and output paths never change results, so they stay out of the metadata
    meta = _metadata("simulate", args, skip=("workers", "out", "summary"), seed=args.seed)
    if args.out:
        out = Path(args.out)
        out.write_text(text)
        summary = Path(args.summary) if args.summary else out.with_suffix(".json")
        summary.write_text(results_summary(results, config, {"run": meta}))
    else:
        sys.stdout.write(text)
        if args.summary:
            Path(args.summary).write_text(results_summary(results, config, {"run": meta}))
    return EXIT_OK


# design / export ---------------------------------------------------------------


def cmd_design(args) -> int:
    d = design_trial(
        args.median_control,
        args.median_exp,
        args.alpha,
        args.power,
        args.recruit_months,
        args.study_months,
        args.alloc_ratio,
        args.max_patients,
    )
    if args.json:
        sys.stdout.write(json.dumps({"inputs": _metadata("design", args)["flags"], **d.to_dict()}, indent=2) + "\n")
        return EXIT_OK
    print(f"required events:      {d.events}")
    print(f"required patients:    {d.patients} ({d.patients_control} control, {d.patients_exp} experimental)")
    print(f"P(event by study end): {d.event_probability:.4f}")
    print(f"expected events:      {d.expected_events:.2f}")
    print(f"target reached at:    {d.months_to_target:.2f} months (expected)")
    return EXIT_OK


def cmd_export_scenarios(args) -> int:
    text = dump_scenarios(builtin_scenarios(), note="Built-in scenarios exported by stratwlr " + __version__)
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


# parser ------------------------------------------------------------------------


def _data_args(p):
    p.add_argument("data", help="delimited file with a header row")
    p.add_argument("--time-col", default="time")
    p.add_argument("--event-col", default="event", help="1 = event, 0 = censored")
    p.add_argument("--arm-col", default="arm", help="0/1, or labels together with --experimental")
    p.add_argument("--stratum-col", default="stratum")
    p.add_argument("--no-strata", action="store_true", help="treat the file as a single stratum")
    p.add_argument("--strata", help="comma-separated stratum labels in index order; other labels are errors")
    p.add_argument("--experimental", help="arm label of the experimental arm")
    p.add_argument("--delimiter", help="comma, tab, semicolon or a literal character (default: detect)")


def _default_seed():
    env = os.environ.get(SEED_ENV)
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        return None


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stratwlr", description="Stratified weighted log-rank tests and trial simulation.")
    parser.add_argument("--version", action="version", version=f"stratwlr {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="run the seven tests on a data file")
    _data_args(p)
    p.add_argument("--t-star", type=float, default=12.0, help="modest-weight cap time in months (default 12)")
    p.add_argument("--pooling", choices=POOLING_MODES, default="per-stratum")
    p.add_argument("--out", help="directory for report.txt, tests.csv, strata.csv, km.csv and run.json")
    p.add_argument("--brief", action="store_true", help="omit the KM/weight tables from the printed report")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("km", help="Kaplan-Meier tables by stratum and arm")
    _data_args(p)
    p.add_argument("--out", help="CSV file (default stdout)")
    p.set_defaults(func=cmd_km)

    p = sub.add_parser("simulate", help="Monte Carlo rejection rates for built-in or custom scenarios")
    p.add_argument("--scenario", help="scenario file or built-in name such as strong-8")
    p.add_argument("--prognostic", action="append", choices=PROGNOSTIC_LEVELS)
    p.add_argument("--effect", action="append", type=int, choices=EFFECTS)
    p.add_argument("--all", action="store_true", help="all 27 built-in scenarios")
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--seed", type=int, default=_default_seed(), help=f"master seed (default ${SEED_ENV} or {DEFAULT_SEED})")
    p.add_argument("--t-star", type=float, default=12.0)
    p.add_argument("--n", type=int, default=344, help="patients per trial")
    p.add_argument("--alpha", type=float, default=0.025, help="one-sided level")
    p.add_argument("--recruit-months", type=float, default=9.0)
    p.add_argument("--study-months", type=float, default=24.0)
    p.add_argument("--alloc-ratio", type=float, default=1.0, help="experimental:control")
    p.add_argument("--alloc", choices=ALLOCATIONS, default="complete")
    p.add_argument("--pooling", choices=POOLING_MODES, default="per-stratum")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", help="results CSV; a JSON summary is written next to it")
    p.add_argument("--summary", help="path for the JSON summary")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("design", help="events and patients for an exponential design")
    p.add_argument("--median-control", type=float, default=8.0)
    p.add_argument("--median-exp", type=float, default=12.0)
    p.add_argument("--alpha", type=float, default=0.025, help="one-sided level")
    p.add_argument("--power", type=float, default=0.9)
    p.add_argument("--recruit-months", type=float, default=9.0)
    p.add_argument("--study-months", type=float, default=24.0)
    p.add_argument("--alloc-ratio", type=float, default=1.0)
    p.add_argument("--max-patients", type=int, default=1_000_000)
    p.add_argument("--json", action="store_true")
    p.set_defaults(func=cmd_design)

    p = sub.add_parser("export-scenarios", help="write the built-in scenarios as JSON")
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_scenarios)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "seed", 0) is None:
        print(f"stratwlr: error: ${SEED_ENV} is not an integer", file=sys.stderr)
        return EXIT_INPUT
    try:
        return args.func(args)
    except StratWLRError as exc:
        print(f"stratwlr: error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
