"""
Discrete p-harmonic functions by ε-regularized energy minimization.

Each ε-stage minimizes Î_ε(ψ) = ∫(|∇ψ|² + ε)^{p/2} dx over P1 fields with the
given boundary values. A stage starts with frozen-coefficient (Kačanov)
iterations: the weights (|∇u|² + ε)^{p/2-1} are frozen per element and the
weighted Laplace problem is solved by preconditioned CG. Once a Kačanov step
stalls the stage continues with Newton steps on Î_ε, whose Hessian is SPD for
every p > 1 and ε > 0. Both kinds of step go through a step-halving line search on Î_ε, and a
stage ends only when the weak residual reaches residual_tol. ε is then reduced
geometrically down to eps_min.
"""

from __future__ import annotations

import logging
import math
from dataclasses import asdict, dataclass, field
from typing import Any, Mapping, Sequence, Union

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import cg

from .errors import DomainError, SolverError
from .exact import ExactSolution
from .mesh import ScalarField, TriMesh

logger = logging.getLogger(__name__)

MIN_STEP = 2.0**-20
MAX_PRINCIPLE_SLACK = 1e-8

BoundaryData = Union[ExactSolution, Mapping[int, float], np.ndarray, Sequence[float]]


@dataclass(frozen=True)
class RegularizationSchedule:
    eps0: float = 1e-1
    factor: float = 1e-1
    eps_min: float = 1e-8

    def __post_init__(self) -> None:
        if not 0.0 < self.eps0 <= 1.0:
            raise DomainError(f"eps0 must lie in (0, 1], got {self.eps0}")
        if not 0.0 < self.factor < 1.0:
            raise DomainError(f"factor must lie in (0, 1), got {self.factor}")
        if not 0.0 < self.eps_min <= self.eps0:
            raise DomainError(f"eps_min must lie in (0, eps0], got {self.eps_min}")

    def stages(self) -> list[float]:
        """eps0, eps0*factor, ... down to the first value <= eps_min."""
        values = [self.eps0]
        while values[-1] > self.eps_min * (1.0 + 1e-9):
            values.append(values[-1] * self.factor)
        return values


@dataclass(frozen=True)
class SolverConfig:
    picard_tol: float = 1e-10
    residual_tol: float = 1e-8
    max_outer: int = 20
    max_inner: int = 200
    linear_tol: float = 1e-12
    # Kačanov hands over to Newton once a step shrinks the residual by less than this
    kacanov_contraction: float = 0.5

    def __post_init__(self) -> None:
        for name in ("picard_tol", "residual_tol", "linear_tol"):
            if not getattr(self, name) > 0.0:
                raise DomainError(f"{name} must be positive")
        if not 0.0 < self.kacanov_contraction <= 1.0:
            raise DomainError(f"kacanov_contraction must lie in (0, 1], got {self.kacanov_contraction}")
        if self.max_outer < 1 or self.max_inner < 1:
            raise DomainError("Iteration budgets must be at least 1")


@dataclass
class SolveReport:
    p: float
    eps_stages: list[float] = field(default_factory=list)
    stage_energies: list[list[float]] = field(default_factory=list)
    residual: list[float] = field(default_factory=list)
    iterations: list[int] = field(default_factory=list)
    newton_iterations: list[int] = field(default_factory=list)
    grad_max: list[float] = field(default_factory=list)
    energy: float = 0.0
    unregularized_residual: float = 0.0
    max_principle_ok: bool = True
    converged: bool = False
    message: str = ""

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(frozen=True)
class WeightedSystem:
    """Interior block of a stiffness-type matrix and its right-hand side."""

    matrix: sp.csr_matrix
    rhs: np.ndarray
    interior: np.ndarray
    weights: np.ndarray


def element_weights(field: ScalarField, p: float, eps: float) -> np.ndarray:
    grad_sq = np.einsum("td,td->t", field.element_gradients, field.element_gradients)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        weights = (grad_sq + eps) ** (p / 2.0 - 1.0)
    bad = np.flatnonzero(~np.isfinite(weights))
    if bad.size:
        raise SolverError(
            f"Non-finite weight on element {int(bad[0])} (p={p}, eps={eps}, "
            f"|grad u|^2={grad_sq[bad[0]]:.3e})"
        )
    return weights


def regularized_energy(field: ScalarField, p: float, eps: float) -> float:
    """Î_ε(ψ) = Σ_T area_T (|∇ψ_T|² + ε)^{p/2}."""
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps}")
    grad_sq = np.einsum("td,td->t", field.element_gradients, field.element_gradients)
    return float(np.sum(field.mesh.areas * (grad_sq + eps) ** (p / 2.0)))


def dirichlet_energy(field: ScalarField, p: float) -> float:
    return regularized_energy(field, p, 0.0)


def _stiffness(mesh: TriMesh, coeff: np.ndarray) -> sp.csr_matrix:
    """Σ_T area_T ∇φ_i·K_T∇φ_j for scalar (T,) or tensor (T, 2, 2) coefficients K_T."""
    grads = mesh.basis_gradients
    if coeff.ndim == 1:
        local = (coeff * mesh.areas)[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)
    else:
        local = mesh.areas[:, None, None] * np.einsum("tid,tde,tje->tij", grads, coeff, grads)
    rows = np.repeat(mesh.triangles, 3, axis=1)
    cols = np.tile(mesh.triangles, (1, 3))
    n = mesh.num_vertices
    return sp.coo_matrix((local.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def assemble_weighted_stiffness(field: ScalarField, p: float, eps: float) -> WeightedSystem:
    """
    SPD system of the frozen-coefficient problem at the current iterate.

    Boundary values of ``field`` are the Dirichlet data.
    """
    mesh = field.mesh
    weights = element_weights(field, p, eps)
    full = _stiffness(mesh, weights)
    interior, boundary = mesh.interior_index, mesh.boundary_index
    rows = full[interior]
    return WeightedSystem(
        matrix=rows[:, interior].tocsr(),
        rhs=-(rows[:, boundary] @ field.values[boundary]),
        interior=interior,
        weights=weights,
    )


def _newton_coefficients(grads: np.ndarray, weights: np.ndarray, p: float, eps: float) -> np.ndarray:
    # Hessian of (|g|² + ε)^{p/2} in g, divided by p
    base = np.einsum("td,td->t", grads, grads) + eps
    curvature = (p - 2.0) * weights / base
    return weights[:, None, None] * np.eye(2) + curvature[:, None, None] * np.einsum("td,te->tde", grads, grads)


def assemble_newton_system(field: ScalarField, p: float, eps: float) -> WeightedSystem:
    """
    Newton system of Î_ε at the current iterate, scaled by 1/p.

    The matrix has element coefficients ω_T (I + (p-2) g_T g_Tᵀ / (|g_T|² + ε)),
    whose eigenvalues ω_T and ω_T ((p-1)|g_T|² + ε) / (|g_T|² + ε) are positive
    for p > 1 and ε > 0. The rhs is minus the interior weak residual vector, so
    the solution is the update of the interior values.
    """
    if not eps > 0.0:
        raise DomainError(f"Newton steps need eps > 0, got {eps}")
    mesh = field.mesh
    weights = element_weights(field, p, eps)
    interior = mesh.interior_index
    coeff = _newton_coefficients(field.element_gradients, weights, p, eps)
    return WeightedSystem(
        matrix=_stiffness(mesh, coeff)[interior][:, interior].tocsr(),
        rhs=-(_stiffness(mesh, weights)[interior] @ field.values),
        interior=interior,
        weights=weights,
    )


def _solve_spd(system: WeightedSystem, x0: np.ndarray, linear_tol: float) -> np.ndarray:
    if system.interior.size == 0:
        return x0
    matrix = system.matrix
    preconditioner = sp.diags(1.0 / matrix.diagonal())
    x, info = cg(
        matrix,
        system.rhs,
        x0=x0,
        rtol=linear_tol,
        atol=0.0,
        maxiter=10 * system.interior.size,
        M=preconditioner,
    )
    if info < 0:
        raise SolverError(f"CG breakdown (info={info})")
    if info > 0:
        logger.warning(f"CG stopped after {info} iterations above rtol={linear_tol}")
    return x


def _with_interior(field: ScalarField, interior: np.ndarray, values: np.ndarray) -> ScalarField:
    full = field.values.copy()
    full[interior] = values
    return ScalarField(field.mesh, full)


def weak_residual_norm(field: ScalarField, p: float, eps: float = 0.0) -> float:
    """
    max over interior hat functions φ_i of |∫(|∇u|² + ε)^{p/2-1}∇u·∇φ_i dx|,
    normalized by the largest sum of absolute element contributions to a node.

    Elements with vanishing gradient contribute zero flux (the p < 2 limit).
    """
    if not p > 1.0:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    mesh = field.mesh
    grads = field.element_gradients
    base = np.einsum("td,td->t", grads, grads) + eps
    with np.errstate(divide="ignore", invalid="ignore"):
        coeff = np.where(base > 0.0, base ** (p / 2.0 - 1.0), 0.0)
    flux = coeff[:, None] * grads
    contrib = mesh.areas[:, None] * np.einsum("tjd,td->tj", mesh.basis_gradients, flux)
    nodes = mesh.triangles.ravel()
    total = np.bincount(nodes, contrib.ravel(), minlength=mesh.num_vertices)
    scale = np.bincount(nodes, np.abs(contrib).ravel(), minlength=mesh.num_vertices)
    interior = mesh.interior_index
    if interior.size == 0:
        return 0.0
    denom = float(np.max(scale[interior]))
    if denom == 0.0:
        return 0.0
    return float(np.max(np.abs(total[interior])) / denom)


def boundary_values(mesh: TriMesh, data: BoundaryData) -> np.ndarray:
    """Dirichlet values at ``mesh.boundary_index`` from a catalog member, a map or an array."""
    boundary = mesh.boundary_index
    if isinstance(data, ExactSolution):
        values = data.eval(mesh.vertices[boundary])
    elif isinstance(data, Mapping):
        missing = [int(i) for i in boundary if int(i) not in data]
        if missing:
            raise DomainError(f"Boundary data missing for {len(missing)} vertices, e.g. {missing[0]}")
        values = np.array([float(data[int(i)]) for i in boundary])
    else:
        arr = np.asarray(data, dtype=float)
        if arr.shape == (mesh.num_vertices,):
            values = arr[boundary]
        elif arr.shape == (boundary.size,):
            values = arr
        else:
            raise DomainError(
                f"Boundary array of shape {arr.shape} matches neither {boundary.size} "
                f"boundary vertices nor {mesh.num_vertices} vertices"
            )
    if not np.all(np.isfinite(values)):
        raise DomainError("Boundary data must be finite at every boundary vertex")
    return np.asarray(values, dtype=float)


def harmonic_extension(mesh: TriMesh, data: BoundaryData, linear_tol: float = 1e-12) -> ScalarField:
    """The discrete Laplace solve with the given Dirichlet data."""
    values = np.zeros(mesh.num_vertices)
    values[mesh.boundary_index] = boundary_values(mesh, data)
    start = ScalarField(mesh, values)
    system = assemble_weighted_stiffness(start, 2.0, 0.0)
    interior = _solve_spd(system, np.zeros(system.interior.size), linear_tol)
    return _with_interior(start, system.interior, interior)


def _line_search(
    field: ScalarField,
    interior: np.ndarray,
    trial: np.ndarray,
    p: float,
    eps: float,
    ceiling: float,
) -> tuple[ScalarField, float, float]:
    """Halve the step from ``field`` towards ``trial`` until Î_ε <= ceiling."""
    current = field.values[interior]
    step = 1.0
    candidate = _with_interior(field, interior, trial)
    energy = regularized_energy(candidate, p, eps)
    while energy > ceiling and step > MIN_STEP:
        step *= 0.5
        candidate = _with_interior(field, interior, current + step * (trial - current))
        energy = regularized_energy(candidate, p, eps)
    return candidate, energy, step


def _picard_stage(
    field: ScalarField,
    p: float,
    eps: float,
    cfg: SolverConfig,
) -> tuple[ScalarField, list[float], float, int, int]:
    energies = [regularized_energy(field, p, eps)]
    residual = weak_residual_norm(field, p, eps)
    iterations = newton_steps = 0
    newton = False
    while residual > cfg.residual_tol and iterations < cfg.max_inner:
        iterations += 1
        if newton:
            system = assemble_newton_system(field, p, eps)
            current = field.values[system.interior]
            trial = current + _solve_spd(system, np.zeros_like(current), cfg.linear_tol)
            newton_steps += 1
        else:
            system = assemble_weighted_stiffness(field, p, eps)
            trial = _solve_spd(system, field.values[system.interior], cfg.linear_tol)

        previous = energies[-1]
        ceiling = previous + cfg.linear_tol * max(abs(previous), np.finfo(float).tiny)
        candidate, energy, step = _line_search(field, system.interior, trial, p, eps, ceiling)
        if energy > ceiling:
            if newton:
                logger.warning(f"eps={eps:.1e}: no energy decrease along the Newton direction")
                break
            logger.debug(f"eps={eps:.1e}: Kacanov step rejected, switching to Newton")
            newton = True
            continue

        field = candidate
        energies.append(energy)
        new_residual = weak_residual_norm(field, p, eps)
        drop = (previous - energy) / max(abs(previous), np.finfo(float).tiny)
        logger.debug(
            f"eps={eps:.1e} it={iterations} {'newton' if newton else 'kacanov'} step={step:g} "
            f"energy={energy:.12e} residual={new_residual:.3e}"
        )
        if not newton and (
            step < 1.0 or drop <= cfg.picard_tol or new_residual > cfg.kacanov_contraction * residual
        ):
            logger.debug(f"eps={eps:.1e}: Kacanov stalled at it={iterations}, switching to Newton")
            newton = True
        residual = new_residual
    return field, energies, residual, iterations, newton_steps


def picard_solve(
    mesh: TriMesh,
    boundary_data: BoundaryData,
    p: float,
    schedule: RegularizationSchedule | None = None,
    cfg: SolverConfig | None = None,
) -> tuple[ScalarField, SolveReport]:
    """
    Minimize Î_ε for a decreasing sequence of ε, starting from the harmonic extension.

    Non-convergence is reported through ``report.converged``, never raised.
    """
    if not (p > 1.0 and math.isfinite(p)):
        raise DomainError(f"p must lie in (1, inf), got {p}")
    schedule = schedule or RegularizationSchedule()
    cfg = cfg or SolverConfig()

    field = harmonic_extension(mesh, boundary_data, cfg.linear_tol)
    bvals = field.values[mesh.boundary_index]
    stages = [schedule.eps_min] if p == 2.0 else schedule.stages()
    report = SolveReport(p=float(p))
    if len(stages) > cfg.max_outer:
        report.message = f"schedule needs {len(stages)} stages, budget is {cfg.max_outer}"
        stages = stages[: cfg.max_outer]

    residual = 0.0
    for eps in stages:
        field, energies, residual, iterations, newton_steps = _picard_stage(field, p, eps, cfg)
        grads = field.element_gradients
        report.eps_stages.append(float(eps))
        report.stage_energies.append(energies)
        report.residual.append(residual)
        report.iterations.append(iterations)
        report.newton_iterations.append(newton_steps)
        report.grad_max.append(float(np.max(np.linalg.norm(grads, axis=1))) if grads.size else 0.0)
        logger.info(
            f"p={p} eps={eps:.1e}: {iterations} iterations ({newton_steps} Newton), "
            f"energy={energies[-1]:.10e}, residual={residual:.3e}"
        )

    report.energy = dirichlet_energy(field, p)
    report.unregularized_residual = weak_residual_norm(field, p)
    lo, hi = (float(bvals.min()), float(bvals.max())) if bvals.size else (0.0, 0.0)
    report.max_principle_ok = bool(
        field.values.min() >= lo - MAX_PRINCIPLE_SLACK and field.values.max() <= hi + MAX_PRINCIPLE_SLACK
    )
    if not report.max_principle_ok:
        logger.warning(
            f"solution range [{field.values.min():.6g}, {field.values.max():.6g}] "
            f"leaves boundary range [{lo:.6g}, {hi:.6g}]"
        )
    schedule_done = stages[-1] <= schedule.eps_min * (1.0 + 1e-9)
    report.converged = bool(schedule_done and residual <= cfg.residual_tol)
    if not report.converged and not report.message:
        report.message = (
            f"final residual {residual:.3e} above residual_tol {cfg.residual_tol:.1e} "
            f"at eps={stages[-1]:.1e}"
        )
    return field, report


def trig_boundary_values(mesh: TriMesh, coeffs: np.ndarray) -> np.ndarray:
    """
    a_0 + Σ_k (a_k cos kθ + b_k sin kθ) at the boundary vertices, θ about the domain center.

    ``coeffs`` has shape (K + 1, 2): row 0 holds (a_0, unused), row k holds (a_k, b_k).
    """
    coeffs = np.asarray(coeffs, dtype=float)
    offset = mesh.vertices[mesh.boundary_index] - np.asarray(mesh.domain.center)
    theta = np.arctan2(offset[:, 1], offset[:, 0])
    values = np.full(theta.size, coeffs[0, 0])
    for k in range(1, coeffs.shape[0]):
        values += coeffs[k, 0] * np.cos(k * theta) + coeffs[k, 1] * np.sin(k * theta)
    return values


def random_trig_coefficients(n_modes: int, seed: int = 0, mean: float = 1.0, scale: float = 0.3) -> np.ndarray:
    """Random smooth boundary data: fixed mean, modes decaying like 1/k."""
    rng = np.random.default_rng(seed)
    coeffs = np.zeros((n_modes + 1, 2))
    coeffs[0, 0] = mean
    for k in range(1, n_modes + 1):
        coeffs[k] = scale * rng.uniform(-1.0, 1.0, size=2) / k
    return coeffs


def observed_order(h: Sequence[float], err: Sequence[float]) -> float:
    """Convergence order log(e1/e2)/log(h1/h2) over a refinement pair."""
    (h1, h2), (e1, e2) = h, err
    return math.log(e1 / e2) / math.log(h1 / h2)
