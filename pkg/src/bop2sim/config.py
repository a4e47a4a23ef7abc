"""Study configuration files.

A study is a JSON document::

    {
      "design": {...TrialDesign fields...},
      "designs": [{"name": "brar", "scheme": "brar2", "by_scenario": {"alt": {"lam": 0.9}}}],
      "scenarios": [{"name": "alt", "theta": [0.2, 0.4]}],
      "calibration": {"null_scenario": "null", "alt_scenario": "alt", ...},
      "ia_search": {"num_ias": 1, "objective": "min_ess", ...},
      "n_sims": 10000,
      "master_seed": 2024,
      "outputs": "out"
    }

``designs`` is optional; each entry overrides the base ``design`` and may carry
per-scenario overrides (typically calibrated boundaries). Unknown keys at any
level are rejected.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .design import Scenario, TrialDesign, design_from_dict, scenario_from_dict
from .errors import ConfigError
from .optimizer import CalibrationSpec, IASearchSpec

TOP_KEYS = {"name", "description", "design", "designs", "scenarios", "calibration", "ia_search",
            "n_sims", "master_seed", "outputs", "trace_replicate"}
CALIBRATION_KEYS = {"null_scenario", "alt_scenario", "alpha_target", "grid_step", "n_sims_per_point",
                    "lam_grid", "gamma_grid", "search"}
IA_SEARCH_KEYS = {"num_ias", "objective", "step", "waiting_fraction", "compare_max_ias"}


@dataclass
class NamedDesign:
    name: str
    base: dict
    by_scenario: dict = field(default_factory=dict)

    def for_scenario(self, scenario: Scenario) -> TrialDesign:
        fields = dict(self.base)
        fields.update(self.by_scenario.get(scenario.name, {}))
        fields.setdefault("name", self.name)
        return design_from_dict(fields)


@dataclass
class StudyConfig:
    name: str
    designs: list  # NamedDesign
    scenarios: list  # Scenario
    n_sims: int
    master_seed: int
    outputs: str
    calibration: Optional[dict] = None
    ia_search: Optional[dict] = None
    trace_replicate: int = 0
    raw: dict = field(default_factory=dict, repr=False)

    @property
    def sha256(self) -> str:
        """Hash of the canonical JSON form of the effective configuration.

        The output directory is left out: it does not affect any result.
        """
        body = {k: v for k, v in self.raw.items() if k != "outputs"}
        text = json.dumps(body, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()

    def scenario(self, name: str) -> Scenario:
        for s in self.scenarios:
            if s.name == name:
                return s
        raise ConfigError(f"unknown scenario {name!r}")

    def pairs(self):
        """Every (NamedDesign, Scenario, TrialDesign) combination."""
        for nd in self.designs:
            for sc in self.scenarios:
                yield nd, sc, nd.for_scenario(sc)

    def calibration_spec(self) -> CalibrationSpec:
        if self.calibration is None:
            raise ConfigError("config has no calibration section")
        c = dict(self.calibration)
        c["null_scenario"] = self.scenario(c["null_scenario"])
        c["alt_scenario"] = self.scenario(c["alt_scenario"])
        c.setdefault("n_sims_per_point", self.n_sims)
        for g in ("lam_grid", "gamma_grid"):
            if c.get(g) is not None:
                c[g] = tuple(c[g])
        return CalibrationSpec(**c)

    def ia_search_spec(self) -> IASearchSpec:
        if self.ia_search is None:
            raise ConfigError("config has no ia_search section")
        c = {k: v for k, v in self.ia_search.items() if k != "compare_max_ias"}
        return IASearchSpec(n_sims=self.n_sims, **c)

    @property
    def compare_max_ias(self) -> int:
        return int((self.ia_search or {}).get("compare_max_ias", 0))


def _check_keys(d, allowed, where):
    if not isinstance(d, dict):
        raise ConfigError(f"{where} must be an object")
    unknown = set(d) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown {where} keys: {sorted(unknown)}")


def study_from_dict(d: dict, seed: Optional[int] = None, sims: Optional[int] = None,
                    outputs: Optional[str] = None) -> StudyConfig:
    """Validate a parsed config; ``seed``/``sims``/``outputs`` override the file."""
    _check_keys(d, TOP_KEYS, "top-level")
    raw = json.loads(json.dumps(d))
    if seed is not None:
        raw["master_seed"] = int(seed)
    if sims is not None:
        raw["n_sims"] = int(sims)
    if outputs is not None:
        raw["outputs"] = str(outputs)

    scen_list = raw.get("scenarios")
    if not scen_list:
        raise ConfigError("config needs at least one scenario")
    scenarios = []
    for i, s in enumerate(scen_list):
        s = dict(s)
        s.setdefault("name", f"scenario{i + 1}")
        scenarios.append(scenario_from_dict(s))
    names = [s.name for s in scenarios]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique")

    base = raw.get("design")
    if base is None:
        raise ConfigError("config needs a design section")
    _check_keys(base, TrialDesign.__dataclass_fields__, "design")
    entries = raw.get("designs") or [{"name": base.get("name") or "design"}]
    designs = []
    for i, e in enumerate(entries):
        e = dict(e)
        by = e.pop("by_scenario", {}) or {}
        name = e.get("name") or f"design{i + 1}"
        merged = dict(base)
        merged.update(e)
        merged["name"] = name
        _check_keys(merged, TrialDesign.__dataclass_fields__, f"designs[{i}]")
        for sname, over in by.items():
            if sname not in names:
                raise ConfigError(f"designs[{i}].by_scenario refers to unknown scenario {sname!r}")
            _check_keys(over, TrialDesign.__dataclass_fields__, f"designs[{i}].by_scenario.{sname}")
        nd = NamedDesign(name, merged, by)
        for sc in scenarios:  # validate every combination up front
            nd.for_scenario(sc).check_scenario(sc)
        designs.append(nd)
    if len({d.name for d in designs}) != len(designs):
        raise ConfigError("design names must be unique")

    n_sims = raw.get("n_sims", 10_000)
    if not isinstance(n_sims, int) or n_sims < 1:
        raise ConfigError("n_sims must be a positive integer")
    master_seed = raw.get("master_seed", 0)
    if not isinstance(master_seed, int) or master_seed < 0:
        raise ConfigError("master_seed must be a non-negative integer")

    cal = raw.get("calibration")
    if cal is not None:
        _check_keys(cal, CALIBRATION_KEYS, "calibration")
        for k in ("null_scenario", "alt_scenario"):
            if k not in cal:
                raise ConfigError(f"calibration needs {k}")
    ia = raw.get("ia_search")
    if ia is not None:
        _check_keys(ia, IA_SEARCH_KEYS, "ia_search")

    cfg = StudyConfig(
        name=raw.get("name", ""),
        designs=designs,
        scenarios=scenarios,
        n_sims=n_sims,
        master_seed=master_seed,
        outputs=raw.get("outputs", "out"),
        calibration=cal,
        ia_search=ia,
        trace_replicate=int(raw.get("trace_replicate", 0)),
        raw=raw,
    )
    if cal is not None:
        cfg.calibration_spec()
    if ia is not None:
        cfg.ia_search_spec()
    return cfg


def load_study(path, **overrides) -> StudyConfig:
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config {path}: {e.strerror}") from None
    try:
        d = json.loads(text)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON in {path}: {e.msg} at line {e.lineno}") from None
    return study_from_dict(d, **overrides)
