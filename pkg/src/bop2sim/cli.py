"""Command-line interface.

Subcommands: simulate, calibrate, optimize-ia, compare-schemes,
boundary-table, trace. Exit codes: 0 success, 1 infeasible calibration,
2 configuration error, 3 budget exceeded. Errors are reported as one JSON
line on stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Optional

from . import __version__
from .boundaries import boundary_table
from .config import StudyConfig, load_study
from .engine import run_trial
from .errors import BudgetExceededError, ConfigError, InfeasibleGridError
from .optimizer import (
    ScheduleEvaluator,
    compare_ia_strategies,
    enumerate_ia_placements,
    enumeration_size,
    grid_search_lambda_gamma,
    calibration_cost,
)
from .reporting import (
    IA_SWEEP_COLUMNS,
    OC_COLUMNS,
    STRATEGY_COLUMNS,
    SURFACE_COLUMNS,
    TRACE_ALLOCATION_COLUMNS,
    TRACE_ANALYSIS_COLUMNS,
    TRACE_PATIENT_COLUMNS,
    meta,
    oc_rows,
    text_table,
    write_csv,
    write_json,
)
from .simulation import estimate_oc

log = logging.getLogger("bop2sim")

EXIT_OK, EXIT_INFEASIBLE, EXIT_CONFIG, EXIT_BUDGET = 0, 1, 2, 3


class _Run:
    """Resolved settings shared by every subcommand."""

    def __init__(self, args):
        seed = args.seed if args.seed is not None else _env_int("BOP2SIM_SEED")
        self.workers = args.workers if args.workers is not None else (_env_int("BOP2SIM_WORKERS") or 1)
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        self.budget: Optional[int] = args.budget
        self.cfg: StudyConfig = load_study(args.config, seed=seed, sims=args.sims, outputs=args.out)
        self.out = Path(self.cfg.outputs)
        self.header = meta(__version__, self.cfg.sha256, self.cfg.master_seed)

    def check_budget(self, required: int) -> None:
        log.info("this run needs %d simulated trials", required)
        if self.budget is not None and required > self.budget:
            raise BudgetExceededError(required, self.budget)


def _env_int(name: str) -> Optional[int]:
    v = os.environ.get(name)
    if v is None or v == "":
        return None
    try:
        return int(v)
    except ValueError:
        raise ConfigError(f"{name} must be an integer, got {v!r}") from None


# -- subcommands --------------------------------------------------------------------------


def _run_oc(run: _Run):
    cfg = run.cfg
    pairs = list(cfg.pairs())
    run.check_budget(len(pairs) * cfg.n_sims)
    rows, summary, results = [], [], []
    for nd, sc, design in pairs:
        log.info("simulating %s / %s", nd.name, sc.name)
        oc = estimate_oc(design, sc, cfg.n_sims, cfg.master_seed, run.workers)
        rows.extend(oc_rows(nd.name, sc, oc, cfg.master_seed))
        d = oc.to_dict()
        d.update({"design": nd.name, "scenario": sc.name, "lam": design.lam, "gamma": design.gamma})
        summary.append(d)
        results.append((nd.name, sc.name, oc))
    write_csv(run.out / "oc_rows.csv", OC_COLUMNS, rows, run.header)
    write_json(run.out / "oc_summary.json", {"results": summary}, run.header)
    return results


def cmd_simulate(run: _Run) -> int:
    results = _run_oc(run)
    table = [(d, s, oc.least_power, oc.ess_total, oc.prop_best) for d, s, oc in results]
    print(text_table(("design", "scenario", "power", "ESS", "prop"), table))
    return EXIT_OK


def cmd_compare_schemes(run: _Run) -> int:
    results = _run_oc(run)
    table = [(d, s, oc.least_power, oc.ess_best, oc.early_stop_rate_per_arm[oc.best_arm], oc.prop_best)
             for d, s, oc in results]
    print(text_table(("design", "scenario", "least power", "treatment ESS", "early stopping", "prop"), table))
    return EXIT_OK


def cmd_calibrate(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.calibration_spec()
    designs = [(nd, nd.for_scenario(spec.alt_scenario)) for nd in cfg.designs]
    run.check_budget(sum(calibration_cost(d, spec) for _, d in designs))
    surface, chosen = [], {}
    for nd, design in designs:
        log.info("calibrating %s", nd.name)
        best, report = grid_search_lambda_gamma(design, spec, cfg.master_seed, run.workers)
        surface.extend(dict(r, design=nd.name) for r in report.surface)
        chosen[nd.name] = {"lam": best.lam, "gamma": best.gamma,
                           "null_reject": report.null_reject, "power": report.power}
    write_csv(run.out / "grid_surface.csv", SURFACE_COLUMNS, surface, run.header)
    write_json(run.out / "calibration.json", {"alpha_target": spec.alpha_target, "chosen": chosen}, run.header)
    print(text_table(("design", "lambda", "gamma", "null reject", "power"),
                     [(k, v["lam"], v["gamma"], v["null_reject"], v["power"]) for k, v in chosen.items()]))
    return EXIT_OK


def cmd_optimize_ia(run: _Run) -> int:
    cfg = run.cfg
    spec = cfg.ia_search_spec()
    max_ias = cfg.compare_max_ias
    jobs = []
    for nd, sc, design in cfg.pairs():
        ev = ScheduleEvaluator(design, sc, cfg.n_sims, cfg.master_seed, run.workers)
        step = spec.step_for(design)
        n_sched = enumeration_size(design.N, step, spec.num_ias)
        n_sched += sum(enumeration_size(design.N, step, m) + 2 for m in range(1, max_ias + 1))
        log.info("%s / %s: %d schedules at step %d", nd.name, sc.name, n_sched, step)
        jobs.append((nd, sc, design, ev, n_sched))
    run.check_budget(sum(ev.cost(n) for *_, ev, n in jobs))

    sweep, best, strategies = [], {}, []
    for nd, sc, design, ev, _ in jobs:
        res = enumerate_ia_placements(design, sc, spec, cfg.master_seed, evaluator=ev, log=log.info)
        for r in res.table:
            sweep.append(dict(r, design=nd.name, scenario=sc.name, ia_at=r["schedule"]))
        b = res.best_row
        best[f"{nd.name}/{sc.name}"] = {"schedule": list(res.best), "objective": spec.objective,
                                        "value": b["objective"], "ess": b["ess"], "power": b["power"],
                                        "prop_best": b["prop_best"], "enumeration_size": res.enumeration_size}
        if max_ias > 0:
            for row in compare_ia_strategies(design, sc, spec, cfg.master_seed, max_ias,
                                             evaluator=ev, log=log.info):
                strategies.append({
                    "design": nd.name, "scenario": sc.name, "objective": spec.objective,
                    "num_ias": row.num_ias, "optimal": row.optimal, "equal": row.equal,
                    "equal_after_waiting": row.equal_after_waiting,
                    "optimal_schedule": row.optimal_schedule, "equal_schedule": row.equal_schedule,
                    "waiting_schedule": row.waiting_schedule,
                })
    write_csv(run.out / "ia_sweep.csv", IA_SWEEP_COLUMNS, sweep, run.header)
    payload = {"best": best}
    if strategies:
        write_csv(run.out / "ia_strategies.csv", STRATEGY_COLUMNS, strategies, run.header)
        payload["strategies"] = strategies
        fmt = ".3f" if spec.objective != "min_ess" else ".1f"
        print(text_table(("design", "scenario", "IAs", "optimal", "equal", "equal after waiting"),
                         [(r["design"], r["scenario"], r["num_ias"], r["optimal"], r["equal"],
                           r["equal_after_waiting"]) for r in strategies], fmt))
    else:
        print(text_table(("design", "scenario", "best schedule", "objective"),
                         [(k.split("/")[0], k.split("/")[1], ";".join(map(str, v["schedule"])) or "-",
                           v["value"]) for k, v in best.items()]))
    write_json(run.out / "ia_best.json", payload, run.header)
    return EXIT_OK


def cmd_boundary_table(run: _Run) -> int:
    cfg = run.cfg
    rows = []
    first = cfg.scenarios[0]
    for nd in cfg.designs:
        design = nd.for_scenario(first)
        for r in boundary_table(design.boundary, design.N, design.ia_schedule, design.efficacy_scale):
            rows.append(dict(r, design=nd.name))
    write_csv(run.out / "boundary_table.csv", ("design", "n", "futility_threshold", "efficacy_threshold"),
              rows, run.header)
    print(text_table(("design", "n", "futility", "efficacy"),
                     [(r["design"], r["n"], r["futility_threshold"], r["efficacy_threshold"]) for r in rows], ".4f"))
    return EXIT_OK


def cmd_trace(run: _Run) -> int:
    cfg = run.cfg
    pairs = list(cfg.pairs())
    run.check_budget(len(pairs))
    patients, analyses, allocs, summary = [], [], [], []
    for nd, sc, design in pairs:
        res = run_trial(design, sc, cfg.master_seed, replicate=cfg.trace_replicate, trace=True)
        tag = {"design": nd.name, "scenario": sc.name}
        patients.extend(dict(r, **tag) for r in res.trace["patients"])
        analyses.extend(dict(r, **tag) for r in res.trace["analyses"])
        allocs.extend(dict(r, **tag) for r in res.trace["allocations"])
        summary.append(dict(tag, replicate=cfg.trace_replicate, stop_stage=res.stop_stage,
                            total_enrolled=res.total_enrolled, reject=list(res.reject),
                            n=list(res.n), status=[a.status.name.lower() for a in res.arms]))
    lead = ("design", "scenario")
    write_csv(run.out / "trace_patients.csv", lead + TRACE_PATIENT_COLUMNS, patients, run.header)
    write_csv(run.out / "trace_analyses.csv", lead + TRACE_ANALYSIS_COLUMNS, analyses, run.header)
    write_csv(run.out / "trace_allocations.csv", lead + TRACE_ALLOCATION_COLUMNS, allocs, run.header)
    write_json(run.out / "trace_summary.json", {"trials": summary}, run.header)
    for s in summary:
        print(f"{s['design']} / {s['scenario']}: stop_stage={s['stop_stage']} n={s['n']} reject={s['reject']}")
    return EXIT_OK


COMMANDS = {
    "simulate": (cmd_simulate, "estimate operating characteristics"),
    "calibrate": (cmd_calibrate, "grid-search (lambda, gamma) under an error-rate constraint"),
    "optimize-ia": (cmd_optimize_ia, "enumerate interim-analysis schedules"),
    "compare-schemes": (cmd_compare_schemes, "compare designs in the multi-arm table layout"),
    "boundary-table": (cmd_boundary_table, "tabulate stopping thresholds"),
    "trace": (cmd_trace, "dump a single simulated trial"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="bop2sim", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=f"bop2sim {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name, (_, help_text) in COMMANDS.items():
        sp = sub.add_parser(name, help=help_text)
        sp.add_argument("--config", required=True, help="study configuration (JSON)")
        sp.add_argument("--seed", type=int, help="master seed (overrides config and BOP2SIM_SEED)")
        sp.add_argument("--sims", type=int, help="replicates per evaluation")
        sp.add_argument("--workers", type=int, help="worker processes (overrides BOP2SIM_WORKERS)")
        sp.add_argument("--budget", type=int, help="maximum number of simulated trials")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("-q", "--quiet", action="store_true", help="suppress progress messages")
    return p


def _fail(kind: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": kind, "message": message, **extra}, sort_keys=True), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO,
                        format="%(message)s", stream=sys.stderr)
    try:
        try:
            run = _Run(args)
        except (TypeError, ValueError) as e:  # malformed field values in the config
            raise ConfigError(str(e)) from None
        return COMMANDS[args.command][0](run)
    except BudgetExceededError as e:
        return _fail("budget_exceeded", str(e), EXIT_BUDGET, required=e.required, budget=e.budget)
    except InfeasibleGridError as e:
        return _fail("infeasible_grid", str(e), EXIT_INFEASIBLE)
    except ConfigError as e:
        return _fail("config", str(e), EXIT_CONFIG)


if __name__ == "__main__":
    sys.exit(main())
