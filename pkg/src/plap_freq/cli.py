"""
Command-line entry point: one experiment per invocation.

    plapfreq [--config PATH] [--out DIR] [--seed N] <kind> [overrides]

Exit codes: 0 ok, 2 invalid config/domain or undefined frequency,
3 solver non-convergence, 4 invariant violation, 5 I/O failure.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from typing import Any, Callable, Optional, Sequence

import numpy as np

from .core.artifacts import ArtifactWriter, read_vertex_values
from .core.config import ExperimentConfig, ExperimentKind, config_hash, load_config
from .core.errors import (
    ConfigError,
    DomainError,
    FrequencyUndefinedError,
    InvariantViolation,
    MeshError,
    OutsideMeshError,
    SolverError,
)
from .core.exact import ExactSolution, catalog, parse_solution, verify_p_harmonic
from .core.frequency import (
    I_prime_bound_check,
    caccioppoli_ratio,
    condition_probes,
    converse_constant,
    convexity_probe,
    doubling_scan,
    energy_identity_report,
    frequency_profile,
    grad_estimate_check,
    poincare_probe,
    ring_aligned_radii,
    split_estimate_check,
    uniform_radii,
    vanishing_radius,
)
from .core.linearize import (
    C2Field,
    ellipticity_bounds,
    residual_affine_linearization,
    residual_two_solution,
)
from .core.mesh import PointField, ScalarField, build_mesh
from .core.solver import picard_solve, random_trig_coefficients, trig_boundary_values

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NOT_CONVERGED = 3
EXIT_INVARIANT = 4
EXIT_IO = 5

ANALYTIC_IDENTITY_TOL = 1e-8

LOG_PREFIX = "[plapfreq]"
logger = logging.getLogger(__name__)


def say(message: str) -> None:
    print(f"{LOG_PREFIX} {message}")


class SolveFailed(Exception):
    """Picard continuation ended without meeting its tolerances."""


class Run:
    """State shared by the pipelines of one invocation."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        self.hash = config_hash(config)
        self.writer = ArtifactWriter(config.output_dir, self.hash, config.kind.value)
        self._field: Optional[PointField] = None

    @property
    def exact(self) -> Optional[ExactSolution]:
        if self.config.boundary_csv or self.config.trig_modes:
            return None
        return parse_solution(self.config.field_id, self.config.p, strict=self.config.analytic)

    def field(self) -> PointField:
        """The field under study: a catalog member when analytic, else the solved discrete field."""
        if self._field is None:
            if self.config.analytic:
                if self.exact is None:
                    raise ConfigError("problem.analytic needs a catalog field, not CSV or trig data")
                self._field = self.exact
            else:
                self._field = self.solve()
        return self._field

    def boundary_data(self, mesh) -> Any:
        cfg = self.config
        if cfg.boundary_csv:
            return read_vertex_values(cfg.boundary_csv)
        if cfg.trig_modes:
            return trig_boundary_values(mesh, random_trig_coefficients(cfg.trig_modes, cfg.trig_seed))
        return self.exact

    def solve(self) -> ScalarField:
        cfg = self.config
        mesh = build_mesh(cfg.domain, cfg.h, cfg.seed)
        say(f"mesh: {mesh.num_vertices} vertices, {mesh.num_triangles} triangles (h={cfg.h:g})")
        field, report = picard_solve(mesh, self.boundary_data(mesh), cfg.p, cfg.schedule, cfg.solver)
        payload = report.to_dict()
        exact = self.exact
        if exact is not None and exact.admissible_for(cfg.p):
            payload["max_nodal_error"] = float(np.max(np.abs(field.values - exact.eval(mesh.vertices))))
        self.writer.write_json("solve_report.json", payload)
        if not report.converged:
            raise SolveFailed(report.message)
        if not report.max_principle_ok:
            raise InvariantViolation("discrete solution violates the maximum principle")
        say(f"solved p={cfg.p:g}: energy={report.energy:.10e}, residual={report.unregularized_residual:.3e}")
        if cfg.kind is ExperimentKind.SOLVE:
            self.writer.write_mesh(mesh)
            self.writer.write_field(field)
            self.writer.write_snapshot(field)
        return field

    def radii(self, field: PointField) -> np.ndarray:
        cfg = self.config
        if cfg.align_to_rings and isinstance(field, ScalarField):
            radii = ring_aligned_radii(field, cfg.r_b, cfg.R_b)
            if radii.size < 3:
                raise ConfigError(f"Only {radii.size} mesh rings inside ({cfg.r_b:g}, {cfg.R_b:g}]")
            return radii
        return uniform_radii(cfg.r_b, cfg.R_b, cfg.n_radii)

    def profile(self):
        cfg = self.config
        field = self.field()
        profile = frequency_profile(
            field,
            cfg.p,
            self.radii(field),
            n_theta=cfg.n_theta,
            center=cfg.window_center,
            radius_power=cfg.radius_power,
            workers=cfg.workers,
        )
        self.writer.write_profile(profile)
        if cfg.plot:
            self.writer.write_plot(profile, cfg.plot_series)
        return profile


def run_solve(run: Run) -> int:
    run.solve()
    return EXIT_OK


def run_frequency(run: Run) -> int:
    profile = run.profile()
    run.writer.write_json(
        "frequency.json",
        {
            "p": profile.p,
            "M": profile.M,
            "radius_power": profile.radius_power,
            "n_radii": len(profile),
            "n_undefined": int((~profile.F_defined).sum()),
        },
    )
    say(f"F on {len(profile)} radii, sup F = {profile.M:.6g}")
    return EXIT_OK


def run_verify(run: Run) -> int:
    cfg = run.config
    field = run.field()
    radii = run.radii(field)
    center = cfg.window_center
    identity = energy_identity_report(field, cfg.p, radii, center=center)
    bound = [I_prime_bound_check(field, cfg.p, r, cfg.n_theta, center) for r in radii]
    grad = [grad_estimate_check(field, cfg.p, r, cfg.n_theta, center) for r in radii]
    payload: dict[str, Any] = {
        "energy_identity": identity.to_dict(),
        "I_prime_bound": [c.to_dict() for c in bound],
        "grad_estimate": [c.to_dict() for c in grad],
    }
    failures = [f"I' bound at r={r:.6g}" for r, c in zip(radii, bound) if not c.holds]
    failures += [f"gradient estimate at r={r:.6g}" for r, c in zip(radii, grad) if not c.holds]
    if isinstance(field, ExactSolution):
        rng = np.random.default_rng(cfg.sample_seed)
        sample = window_sample(rng, center, max(cfg.r_b, 0.05 * cfg.R_b), cfg.R_b, cfg.n_samples)
        check = verify_p_harmonic(field, cfg.p, sample)
        payload["harmonicity"] = {"max_residual": check.max_residual, "skipped": list(check.skipped)}
        if identity.worst > ANALYTIC_IDENTITY_TOL:
            failures.append(f"energy identity residual {identity.worst:.3e}")
    run.writer.write_json("verify.json", payload)
    say(f"energy identity worst residual {identity.worst:.3e}")
    if failures:
        raise InvariantViolation("; ".join(failures))
    return EXIT_OK


def run_doubling(run: Run) -> int:
    cfg = run.config
    profile = run.profile()
    if not profile.F_defined.all():
        radius = vanishing_radius(run.field(), 1e-12, profile.radii, cfg.n_theta, cfg.window_center)
        say(f"u vanishes on the window: vanishing radius {radius:.6g}")
        raise FrequencyUndefinedError(f"I(r) = 0 inside ({cfg.r_b:g}, {cfg.R_b:g}]")
    report = doubling_scan(profile)
    split = split_estimate_check(profile, report.eps0)
    payload = report.to_dict()
    payload["split_estimate_max_excess"] = split.max_excess
    payload["converse_constant"] = converse_constant(profile, report.r_star)
    run.writer.write_json("doubling.json", payload)
    say(f"doubling: M={report.M:.6g} r*={report.r_star:.6g} max ratio={report.max_ratio:.6g}")
    if not report.passed:
        raise InvariantViolation(f"weak doubling fails: max ratio {report.max_ratio:.6g} > 4")
    return EXIT_OK


def window_sample(rng: np.random.Generator, center, r_lo: float, r_hi: float, count: int) -> np.ndarray:
    """Uniform points in the ring r_lo <= |x - center| <= r_hi."""
    rho = np.sqrt(rng.uniform(r_lo**2, r_hi**2, size=count))
    theta = rng.uniform(0.0, 2.0 * math.pi, size=count)
    return np.asarray(center) + np.column_stack([rho * np.cos(theta), rho * np.sin(theta)])


def run_linearize(run: Run) -> int:
    cfg = run.config
    exact = run.exact
    if exact is None:
        raise ConfigError("linearize needs a catalog field")
    lam_min, lam_max = ellipticity_bounds(cfg.alpha, cfg.p)
    affine = ExactSolution.affine(cfg.alpha, 0.0)
    u = C2Field.from_solution(exact)
    rng = np.random.default_rng(cfg.sample_seed)
    sample = window_sample(rng, cfg.window_center, max(cfg.r_b, 0.05 * cfg.R_b), cfg.R_b, cfg.n_samples)
    max_residual = residual_affine_linearization(u, affine, cfg.p, sample)
    two = residual_two_solution(u, C2Field.from_solution(affine), cfg.p, sample)
    run.writer.write_json(
        "linearize.json",
        {
            "lambda_min": lam_min,
            "lambda_max": lam_max,
            "max_residual": max_residual,
            "two_solution_residual": two.max_residual,
            "flagged_points": list(two.flagged_points),
            "field": exact.identifier,
            "admissible": exact.admissible_for(cfg.p),
        },
    )
    say(f"ellipticity [{lam_min:.6g}, {lam_max:.6g}], linearization residual {max_residual:.3e}")
    return EXIT_OK


def run_probes(run: Run) -> int:
    cfg = run.config
    field = run.field()
    center = cfg.window_center
    payload: dict[str, Any] = {}
    try:
        cond = condition_probes(field, cfg.p, cfg.probe_r, cfg.n_theta, center)
        payload["conditions"] = {"r": cond.r, "A1": cond.A1, "A2": cond.A2}
    except FrequencyUndefinedError as exc:
        payload["conditions"] = {"error": str(exc)}
    payload["caccioppoli_ratio"] = caccioppoli_ratio(field, cfg.p, cfg.probe_r, cfg.probe_rho, cfg.n_theta, center)
    poincare = poincare_probe(field, cfg.p, cfg.probe_r, cfg.zero_tol, cfg.n_theta, center)
    payload["poincare"] = {
        "r": poincare.r,
        "gamma_hat": poincare.gamma_hat,
        "C_hat": poincare.C_hat,
        "C_hat_boundary": poincare.C_hat_boundary,
    }
    radii = run.radii(field)
    payload["vanishing_radius"] = vanishing_radius(field, 1e-12, radii, cfg.n_theta, center)
    convexity_ok = True
    if cfg.p == 2.0:
        convexity = convexity_probe(field, radii, cfg.n_theta, center)
        payload["convexity"] = convexity.to_dict()
        convexity_ok = convexity.all_ok
    run.writer.write_json("probes.json", payload)
    say(f"Caccioppoli ratio {payload['caccioppoli_ratio']:.6g}, gamma_hat {poincare.gamma_hat:.3g}")
    if not convexity_ok:
        raise InvariantViolation("convexity probe failed on a harmonic field")
    return EXIT_OK


def run_catalog(run: Run) -> int:
    members = catalog(run.config.p)
    for sol in members:
        say(f"{sol.identifier:<24} {sol.kind.value}")
    run.writer.write_json(
        "catalog.json",
        {"p": run.config.p, "members": [sol.identifier for sol in members]},
    )
    return EXIT_OK


PIPELINES: dict[ExperimentKind, Callable[[Run], int]] = {
    ExperimentKind.SOLVE: run_solve,
    ExperimentKind.FREQUENCY: run_frequency,
    ExperimentKind.VERIFY: run_verify,
    ExperimentKind.DOUBLING: run_doubling,
    ExperimentKind.LINEARIZE: run_linearize,
    ExperimentKind.PROBES: run_probes,
    ExperimentKind.CATALOG: run_catalog,
}


def run(config: ExperimentConfig) -> int:
    """Run one experiment and map its outcome to an exit code."""
    try:
        state = Run(config)
    except OSError as exc:
        say(f"error: cannot create output directory: {exc}")
        return EXIT_IO
    try:
        return PIPELINES[config.kind](state)
    except (ConfigError, DomainError, MeshError, OutsideMeshError, FrequencyUndefinedError) as exc:
        say(f"error: {exc}")
        return EXIT_CONFIG
    except (SolveFailed, SolverError) as exc:
        say(f"solver did not converge: {exc}")
        return EXIT_NOT_CONVERGED
    except InvariantViolation as exc:
        say(f"invariant violated: {exc}")
        return EXIT_INVARIANT
    except OSError as exc:
        say(f"error writing artifacts: {exc}")
        return EXIT_IO
    finally:
        try:
            state.writer.write_index()
        except OSError as exc:
            logger.warning(f"could not write artifact index: {exc}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plapfreq", description="p-Laplace frequency function experiments")
    parser.add_argument("--config", type=str, default=None, help="YAML configuration file")
    parser.add_argument("--out", type=str, default=None, help="Output directory")
    parser.add_argument("--seed", type=int, default=None, help="Mesh jitter seed (0 = no jitter)")
    parser.add_argument("--verbose", action="store_true", help="Debug logging")
    parser.add_argument("kind", choices=[k.value for k in ExperimentKind])
    parser.add_argument("--p", type=float, default=None)
    parser.add_argument("--h", type=float, default=None)
    parser.add_argument("--field", type=str, default=None, help="Catalog id, e.g. harmpoly:2, affine:2,0,1, radial")
    parser.add_argument("--boundary-csv", type=str, default=None)
    parser.add_argument("--trig-modes", type=int, default=None)
    parser.add_argument("--analytic", action="store_true", default=None, help="Use the catalog field directly")
    parser.add_argument("--domain", choices=["disc", "annulus"], default=None)
    parser.add_argument("--r-outer", type=float, default=None)
    parser.add_argument("--r-inner", type=float, default=None)
    parser.add_argument("--rb", type=float, default=None)
    parser.add_argument("--Rb", type=float, default=None)
    parser.add_argument("--n-radii", type=int, default=None)
    parser.add_argument("--n-theta", type=int, default=None)
    parser.add_argument("--center", type=str, default=None, help="Window center x,y")
    parser.add_argument("--align-to-rings", action="store_true", default=None)
    parser.add_argument("--radius-power", type=float, default=None)
    parser.add_argument("--workers", type=int, default=None)
    parser.add_argument("--alpha", type=str, default=None, help="Affine slope a1,a2 for linearize")
    parser.add_argument("--eps-min", type=float, default=None)
    parser.add_argument("--plot", action="store_true", default=None)
    return parser


def overrides_from_args(args: argparse.Namespace) -> dict[str, Any]:
    return {
        "experiment.kind": args.kind,
        "output.dir": args.out,
        "mesh.seed": args.seed,
        "mesh.h": args.h,
        "problem.p": args.p,
        "problem.field": args.field,
        "problem.boundary_csv": args.boundary_csv,
        "problem.trig_modes": args.trig_modes,
        "problem.analytic": args.analytic,
        "domain.kind": args.domain,
        "domain.r_outer": args.r_outer,
        "domain.r_inner": args.r_inner,
        "frequency.r_b": args.rb,
        "frequency.R_b": args.Rb,
        "frequency.n_radii": args.n_radii,
        "frequency.n_theta": args.n_theta,
        "frequency.center": args.center,
        "frequency.align_to_rings": args.align_to_rings,
        "frequency.radius_power": args.radius_power,
        "frequency.workers": args.workers,
        "linearize.alpha": args.alpha,
        "solver.eps_min": args.eps_min,
        "output.plot": args.plot,
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        config = load_config(args.config, overrides_from_args(args))
    except ConfigError as exc:
        say(f"invalid configuration: {exc}")
        return EXIT_CONFIG
    except OSError as exc:
        say(f"cannot read configuration: {exc}")
        return EXIT_CONFIG
    say(f"{config.kind.value}: p={config.p:g}, field={config.field_id}, out={config.output_dir}")
    return run(config)


if __name__ == "__main__":
    sys.exit(main())
