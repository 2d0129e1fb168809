"""
Experiment configuration: YAML file, CLI overrides, validation and hashing.

Precedence is defaults < file < CLI overrides. Overrides are given as
``{"section.key": value}`` and applied to the raw mapping before parsing,
so both sources go through the same validation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from enum import Enum
from pathlib import Path
from typing import Any, Mapping, Optional, cast

import yaml

from .errors import ConfigError, DomainError
from .mesh import Domain, DomainKind
from .solver import RegularizationSchedule, SolverConfig

SECTIONS = ("experiment", "domain", "mesh", "problem", "solver", "frequency", "linearize", "probes", "output")
MIN_RADII = 8


class ExperimentKind(str, Enum):
    SOLVE = "solve"
    FREQUENCY = "frequency"
    VERIFY = "verify"
    DOUBLING = "doubling"
    LINEARIZE = "linearize"
    PROBES = "probes"
    CATALOG = "catalog"


@dataclass
class ExperimentConfig:
    kind: ExperimentKind = ExperimentKind.FREQUENCY
    domain: Domain = field(default_factory=Domain)
    h: float = 0.05
    seed: int = 0
    # problem
    p: float = 2.0
    field_id: str = "harmpoly:2"
    boundary_csv: Optional[str] = None
    trig_modes: int = 0
    trig_seed: int = 0
    analytic: bool = False
    # solver
    schedule: RegularizationSchedule = field(default_factory=RegularizationSchedule)
    solver: SolverConfig = field(default_factory=SolverConfig)
    # frequency window
    r_b: float = 0.1
    R_b: float = 0.8
    n_radii: int = 32
    n_theta: int = 256
    center: Optional[tuple[float, float]] = None
    align_to_rings: bool = False
    radius_power: float = 1.0
    workers: int = 1
    # linearize
    alpha: tuple[float, ...] = (1.0, 0.0)
    n_samples: int = 100
    sample_seed: int = 0
    # probes
    probe_r: float = 0.4
    probe_rho: float = 0.8
    zero_tol: Optional[float] = None
    # output
    output_dir: Path = Path("./runs")
    plot: bool = False
    plot_series: tuple[str, ...] = ("F",)

    @property
    def window_center(self) -> tuple[float, float]:
        return self.center if self.center is not None else self.domain.center

    def validate(self) -> ExperimentConfig:
        if not (self.p > 1.0 and math.isfinite(self.p)):
            raise ConfigError(f"problem.p must lie in (1, inf), got {self.p}")
        if not 0.0 <= self.r_b < self.R_b:
            raise ConfigError(f"frequency window needs 0 <= r_b < R_b, got r_b={self.r_b}, R_b={self.R_b}")
        if self.n_radii < MIN_RADII:
            raise ConfigError(f"frequency.n_radii must be at least {MIN_RADII}, got {self.n_radii}")
        if self.n_theta < 64:
            raise ConfigError(f"frequency.n_theta must be at least 64, got {self.n_theta}")
        if self.workers < 1:
            raise ConfigError("frequency.workers must be at least 1")
        offset = math.dist(self.window_center, self.domain.center)
        if offset + self.R_b >= self.domain.r_outer:
            raise ConfigError(
                f"B_{self.R_b:g}{self.window_center} is not inside the domain (R_outer = {self.domain.r_outer:g})"
            )
        if self.domain.kind is DomainKind.ANNULUS and offset - self.R_b <= self.domain.r_inner:
            raise ConfigError("frequency.center must place the window ball inside the annulus")
        if self.align_to_rings and offset > 0.0:
            raise ConfigError("frequency.align_to_rings needs frequency.center at the domain center")
        if not 0.0 < self.probe_r < self.probe_rho:
            raise ConfigError(f"probes need 0 < r < rho, got r={self.probe_r}, rho={self.probe_rho}")
        if offset + self.probe_rho >= self.domain.r_outer:
            raise ConfigError(f"probes.rho = {self.probe_rho:g} leaves the domain")
        if not any(self.alpha):
            raise ConfigError("linearize.alpha must be nonzero")
        if self.trig_modes < 0:
            raise ConfigError("problem.trig_modes must be non-negative")
        return self

    def to_dict(self) -> dict[str, Any]:
        """Resolved configuration as plain JSON types."""
        raw = asdict(self)
        raw["kind"] = self.kind.value
        raw["domain"]["kind"] = self.domain.kind.value
        raw["output_dir"] = str(self.output_dir)
        return raw


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def apply_overrides(raw: dict[str, Any], overrides: Mapping[str, Any]) -> dict[str, Any]:
    """Set ``section.key`` entries, skipping None values (flags not given)."""
    merged = {name: dict(raw.get(name) or {}) for name in raw}
    for dotted, value in overrides.items():
        if value is None:
            continue
        section, _, key = dotted.partition(".")
        if section not in SECTIONS or not key:
            raise ConfigError(f"Unknown override '{dotted}'")
        merged.setdefault(section, {})[key] = value
    return merged


def _pair(value: Any, name: str) -> tuple[float, float]:
    if isinstance(value, str):
        value = [v for v in value.split(",") if v.strip()]
    try:
        a, b = (float(v) for v in value)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name} must be two numbers, got {value!r}") from exc
    return a, b


def config_from_mapping(cfg: Mapping[str, Any]) -> ExperimentConfig:
    unknown = set(cfg) - set(SECTIONS)
    if unknown:
        raise ConfigError(f"Unknown configuration sections: {', '.join(sorted(unknown))}")

    def _section(name: str) -> dict[str, Any]:
        section = cfg.get(name, {}) or {}
        if not isinstance(section, dict):
            raise ConfigError(f"Configuration section '{name}' must be a mapping.")
        return section

    experiment = _section("experiment")
    domain_cfg = _section("domain")
    mesh_cfg = _section("mesh")
    problem = _section("problem")
    solver_cfg = _section("solver")
    freq = _section("frequency")
    lin = _section("linearize")
    probes = _section("probes")
    output = _section("output")

    try:
        domain = Domain(
            kind=DomainKind(str(domain_cfg.get("kind", "disc"))),
            center=_pair(domain_cfg.get("center", (0.0, 0.0)), "domain.center"),
            r_outer=float(domain_cfg.get("r_outer", 1.0)),
            r_inner=float(domain_cfg.get("r_inner", 0.0)),
        )
        schedule = RegularizationSchedule(
            eps0=float(solver_cfg.get("eps0", 0.1)),
            factor=float(solver_cfg.get("eps_factor", 0.1)),
            eps_min=float(solver_cfg.get("eps_min", 1e-8)),
        )
        solver = SolverConfig(
            picard_tol=float(solver_cfg.get("picard_tol", 1e-10)),
            residual_tol=float(solver_cfg.get("residual_tol", 1e-8)),
            max_outer=int(solver_cfg.get("max_outer", 20)),
            max_inner=int(solver_cfg.get("max_inner", 200)),
            linear_tol=float(solver_cfg.get("linear_tol", 1e-12)),
            kacanov_contraction=float(solver_cfg.get("kacanov_contraction", 0.5)),
        )
        center = freq.get("center")
        alpha = lin.get("alpha", (1.0, 0.0))
        if isinstance(alpha, str):
            alpha = [a for a in alpha.split(",") if a.strip()]
        series = output.get("plot_series", ("F",))
        if isinstance(series, str):
            series = [s.strip() for s in series.split(",") if s.strip()]
        zero_tol = probes.get("zero_tol")
        config = ExperimentConfig(
            kind=ExperimentKind(str(experiment.get("kind", "frequency"))),
            domain=domain,
            h=float(mesh_cfg.get("h", 0.05)),
            seed=int(mesh_cfg.get("seed", 0)),
            p=float(problem.get("p", 2.0)),
            field_id=str(problem.get("field", "harmpoly:2")),
            boundary_csv=cast(Optional[str], problem.get("boundary_csv")),
            trig_modes=int(problem.get("trig_modes", 0)),
            trig_seed=int(problem.get("trig_seed", 0)),
            analytic=bool(problem.get("analytic", False)),
            schedule=schedule,
            solver=solver,
            r_b=float(freq.get("r_b", 0.1)),
            R_b=float(freq.get("R_b", 0.8)),
            n_radii=int(freq.get("n_radii", 32)),
            n_theta=int(freq.get("n_theta", 256)),
            center=_pair(center, "frequency.center") if center is not None else None,
            align_to_rings=bool(freq.get("align_to_rings", False)),
            radius_power=float(freq.get("radius_power", 1.0)),
            workers=int(freq.get("workers", 1)),
            alpha=tuple(float(a) for a in alpha),
            n_samples=int(lin.get("n_samples", 100)),
            sample_seed=int(lin.get("sample_seed", 0)),
            probe_r=float(probes.get("r", 0.4)),
            probe_rho=float(probes.get("rho", 0.8)),
            zero_tol=float(zero_tol) if zero_tol is not None else None,
            output_dir=Path(str(output.get("dir", "./runs"))),
            plot=bool(output.get("plot", False)),
            plot_series=tuple(str(s) for s in series),
        )
    except DomainError as exc:
        raise ConfigError(str(exc)) from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"Invalid configuration value: {exc}") from exc
    return config.validate()


def load_config(path: Path | str | None = None, overrides: Mapping[str, Any] | None = None) -> ExperimentConfig:
    raw: Any = {}
    if path is not None:
        path = Path(path)
        try:
            with path.open("r", encoding="utf-8") as fh:
                raw = yaml.safe_load(fh) or {}
        except yaml.YAMLError as exc:
            raise ConfigError(f"{path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("Configuration file must yield a mapping at the top level.")
    return config_from_mapping(apply_overrides(cast(dict[str, Any], raw), overrides or {}))
