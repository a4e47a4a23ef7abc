"""Trial design and scenario definitions."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Optional

from .allocation import SCHEMES
from .boundaries import EFFICACY_SCALES, BoundaryParams
from .errors import ConfigError
from .posterior import MAX_ARMS


@dataclass(frozen=True)
class Scenario:
    """True per-arm success (and optionally toxicity) rates, control first."""

    theta: tuple
    phi: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "theta", tuple(float(x) for x in self.theta))
        if self.phi is not None:
            object.__setattr__(self, "phi", tuple(float(x) for x in self.phi))
        for v in self.theta + (self.phi or ()):
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"scenario rates must lie in [0, 1], got {v}")
        if self.phi is not None and len(self.phi) != len(self.theta):
            raise ConfigError("theta and phi must have the same length")

    @property
    def n_arms(self) -> int:
        return len(self.theta)

    def toxicity(self) -> tuple:
        return self.phi if self.phi is not None else (0.0,) * self.n_arms


@dataclass(frozen=True)
class TrialDesign:
    """Everything that defines a BOP2 trial apart from the true rates.

    ``ia_schedule`` holds cumulative total-enrolment counts at which interim
    analyses happen; the final analysis at ``N`` is implicit. Arm 0 is the
    control when ``controlled``.
    """

    K: int = 1
    controlled: bool = True
    N: int = 80
    lam: float = 0.9
    gamma: float = 1.0
    ia_schedule: tuple = ()
    per_arm_cap: Optional[int] = None
    efficacy_stopping: Optional[bool] = None
    efficacy_scale: str = "sqrt"
    toxicity_monitoring: bool = False
    theta_ref: Optional[float] = None
    phi_ref: Optional[float] = None
    scheme: str = "equal"
    reallocation: str = "redistribute"
    burn_in: Optional[int] = None
    block_size: Optional[int] = None
    futility_rule: str = "standard"
    trippa_control_weight: str = "unit"
    clip: Optional[tuple] = None
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "ia_schedule", tuple(int(x) for x in self.ia_schedule))
        if self.clip is not None:
            object.__setattr__(self, "clip", tuple(float(x) for x in self.clip))
        self.validate()

    # -- derived ----------------------------------------------------------------

    @property
    def n_arms(self) -> int:
        return self.K + int(self.controlled)

    @property
    def experimental(self) -> range:
        return range(1, self.n_arms) if self.controlled else range(self.n_arms)

    @property
    def boundary(self) -> BoundaryParams:
        return BoundaryParams(self.lam, self.gamma)

    @property
    def efficacy_on(self) -> bool:
        if self.efficacy_stopping is None:
            return self.K == 1
        return self.efficacy_stopping

    @property
    def burn_in_count(self) -> int:
        if self.burn_in is not None:
            return self.burn_in
        return self.ia_schedule[0] if self.ia_schedule else 0

    @property
    def max_block(self) -> int:
        return self.block_size if self.block_size is not None else 2 * self.n_arms

    def with_(self, **changes) -> "TrialDesign":
        return dataclasses.replace(self, **changes)

    # -- validation ----------------------------------------------------------------

    def validate(self) -> None:
        if self.K < 1:
            raise ConfigError("at least one experimental arm is required")
        if self.N < 1:
            raise ConfigError("N must be positive")
        try:
            BoundaryParams(self.lam, self.gamma)
        except ValueError as e:
            raise ConfigError(str(e)) from None
        s = self.ia_schedule
        if any(b <= a for a, b in zip(s, s[1:])):
            raise ConfigError(f"ia_schedule must be strictly increasing: {s}")
        if s and (s[0] <= 0 or s[-1] >= self.N):
            raise ConfigError(f"ia_schedule entries must lie in (0, N): {s}")
        if self.scheme not in SCHEMES:
            raise ConfigError(f"unknown allocation scheme {self.scheme!r}")
        if self.scheme == "brar2" and not (self.K == 1 and self.controlled):
            raise ConfigError("brar2 needs a controlled two-arm design")
        if self.scheme == "maximum" and self.n_arms > MAX_ARMS:
            raise ConfigError(f"maximum allocation supports at most {MAX_ARMS} arms")
        if self.scheme == "trippa" and self.theta_ref is None:
            raise ConfigError("trippa allocation needs theta_ref")
        if not self.controlled and self.theta_ref is None:
            raise ConfigError("uncontrolled designs need theta_ref")
        if self.toxicity_monitoring and not self.controlled and self.phi_ref is None:
            raise ConfigError("uncontrolled toxicity monitoring needs phi_ref")
        if self.reallocation not in ("shrink", "redistribute"):
            raise ConfigError(f"unknown reallocation policy {self.reallocation!r}")
        if self.reallocation == "shrink" and self.per_arm_cap is None:
            raise ConfigError("shrink reallocation needs per_arm_cap")
        if self.per_arm_cap is not None and self.per_arm_cap < 1:
            raise ConfigError("per_arm_cap must be positive")
        if self.burn_in is not None and s and self.burn_in > s[0]:
            raise ConfigError("burn_in cannot exceed the first interim analysis")
        if self.block_size is not None and self.block_size < 1:
            raise ConfigError("block_size must be positive")
        if self.efficacy_scale not in EFFICACY_SCALES:
            raise ConfigError(f"unknown efficacy scale {self.efficacy_scale!r}")
        if self.futility_rule not in ("standard", "multiarm_adjusted"):
            raise ConfigError(f"unknown futility rule {self.futility_rule!r}")
        if self.trippa_control_weight not in ("unit", "inverse_n"):
            raise ConfigError(f"unknown Trippa control weight {self.trippa_control_weight!r}")
        for ref in (self.theta_ref, self.phi_ref):
            if ref is not None and not 0.0 <= ref <= 1.0:
                raise ConfigError("reference rates must lie in [0, 1]")

    def check_scenario(self, scenario: Scenario) -> None:
        if scenario.n_arms != self.n_arms:
            raise ConfigError(
                f"scenario has {scenario.n_arms} arms, design expects {self.n_arms}"
            )
        if self.toxicity_monitoring and scenario.phi is None:
            raise ConfigError("toxicity monitoring needs scenario toxicity rates")


def design_from_dict(d: dict) -> TrialDesign:
    names = {f.name for f in dataclasses.fields(TrialDesign)}
    unknown = set(d) - names
    if unknown:
        raise ConfigError(f"unknown design keys: {sorted(unknown)}")
    return TrialDesign(**d)


def scenario_from_dict(d: dict) -> Scenario:
    unknown = set(d) - {"theta", "phi", "name"}
    if unknown:
        raise ConfigError(f"unknown scenario keys: {sorted(unknown)}")
    if "theta" not in d:
        raise ConfigError("scenario needs theta")
    return Scenario(**d)


def design_to_dict(design: TrialDesign) -> dict:
    out = dataclasses.asdict(design)
    out["ia_schedule"] = list(design.ia_schedule)
    if design.clip is not None:
        out["clip"] = list(design.clip)
    return out
