"""Deterministic artifact writers and console tables.

Every CSV starts with ``#`` comment lines carrying the tool version, the
configuration hash and the master seed; every JSON document carries the same
fields under ``"meta"``. Nothing time- or host-dependent is written, so a
rerun with the same configuration reproduces the files byte for byte.
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Iterable, Sequence

from . import __version__

OC_COLUMNS = (
    "design", "scenario", "master_seed", "n_sims", "arm", "theta", "phi", "is_best",
    "reject_rate", "ess_arm", "prop", "early_stop",
    "least_power", "fwer", "ess_total", "ess_lo", "ess_hi", "power_lo", "power_hi",
)
IA_SWEEP_COLUMNS = (
    "design", "scenario", "ia_at", "ess", "ess_lo", "ess_hi", "power", "power_lo", "power_hi",
    "prop_best", "prop_lo", "prop_hi", "ess_arms",
)
STRATEGY_COLUMNS = (
    "design", "scenario", "objective", "num_ias", "optimal", "equal", "equal_after_waiting",
    "optimal_schedule", "equal_schedule", "waiting_schedule",
)
SURFACE_COLUMNS = ("design", "lam", "gamma", "null_reject", "power", "ess_null", "ess_alt", "feasible")
TRACE_PATIENT_COLUMNS = ("index", "arm", "success", "toxicity")
TRACE_ANALYSIS_COLUMNS = ("stage", "n", "arm", "efficacy_stat", "toxicity_stat",
                          "futility_threshold", "efficacy_threshold", "decision")
TRACE_ALLOCATION_COLUMNS = ("stage", "n", "arm", "probability")


def meta(version: str, config_sha256: str, master_seed: int) -> dict:
    return {"tool": "bop2sim", "version": version, "config_sha256": config_sha256, "master_seed": master_seed}


def fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isnan(v):
            return ""
        return format(v, ".10g")
    if isinstance(v, (tuple, list)):
        return ";".join(fmt(x) for x in v)
    if v is None:
        return ""
    return str(v)


def csv_text(columns: Sequence[str], rows: Iterable[dict], header: dict) -> str:
    buf = io.StringIO()
    for k in ("tool", "version", "config_sha256", "master_seed"):
        buf.write(f"# {k}={header[k]}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for r in rows:
        w.writerow([fmt(r.get(c)) for c in columns])
    return buf.getvalue()


def write_csv(path: Path, columns: Sequence[str], rows: Iterable[dict], header: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(csv_text(columns, rows, header))
    return path


def _clean(obj):
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    return obj


def write_json(path: Path, payload: dict, header: dict) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    doc = {"meta": header}
    doc.update(_clean(payload))
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return path


def text_table(columns: Sequence[str], rows: Sequence[Sequence], floatfmt: str = ".3f") -> str:
    """Fixed-width plain-text table."""
    cells = [[c for c in columns]]
    for r in rows:
        cells.append([format(v, floatfmt) if isinstance(v, float) else str(v) for v in r])
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    lines = []
    for k, row in enumerate(cells):
        lines.append("  ".join(v.rjust(w) if k else v.ljust(w) for v, w in zip(row, widths)))
        if k == 0:
            lines.append("  ".join("-" * w for w in widths))
    return "\n".join(lines)


def oc_rows(design_name: str, scenario, oc, master_seed: int) -> list[dict]:
    """Long-format rows (one per arm) for ``oc_rows.csv``."""
    phi = scenario.phi or (float("nan"),) * scenario.n_arms
    nan = float("nan")
    out = []
    for a in range(scenario.n_arms):
        out.append({
            "design": design_name,
            "scenario": scenario.name,
            "master_seed": master_seed,
            "n_sims": oc.n_sims,
            "arm": a,
            "theta": scenario.theta[a],
            "phi": phi[a],
            "is_best": a == oc.best_arm,
            "reject_rate": oc.reject_rate_per_arm[a],
            "ess_arm": oc.ess_per_arm[a],
            "prop": oc.prop_per_arm[a],
            "early_stop": oc.early_stop_rate_per_arm[a],
            "least_power": oc.least_power,
            "fwer": oc.fwer,
            "ess_total": oc.ess_total,
            "ess_lo": oc.ess_ci[0] if oc.ess_ci else nan,
            "ess_hi": oc.ess_ci[1] if oc.ess_ci else nan,
            "power_lo": oc.power_ci[0] if oc.power_ci else nan,
            "power_hi": oc.power_ci[1] if oc.power_ci else nan,
        })
    return out
