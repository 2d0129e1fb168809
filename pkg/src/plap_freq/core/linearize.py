"""
Linearization of the p-Laplace equation around an affine solution L and
around a second solution v.

With h = u - L and α = ∇L, the nondivergence p-Laplacian of u reads

    |α|²Δh + (p-2) Σ α_i α_j h_ij + Σ b_i(x) h_i

where b collects the remainder
R = |∇h|²Δh + 2(∇h·α)Δh + (p-2)(Σh_ih_jh_ij + 2Σα_jh_ih_ij).
The drift is assigned as b = R ∇h / |∇h|², and b = 0 where ∇h = 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError
from .exact import ExactSolution, SolutionKind, as_points, p_laplace_nondivergence
from .mesh import ScalarField

logger = logging.getLogger(__name__)

FitFn = Callable[[np.ndarray], np.ndarray]

# |∇v| at or below this marks a sample point where the two-solution equation degenerates
DEGENERATE_GRAD = 1e-12
PATCH_SIZE = 12


@dataclass(frozen=True)
class C2Field:
    """Value, gradient and Hessian of a twice differentiable field, each vectorized over (N, n) points."""

    value: FitFn
    gradient: FitFn
    hessian: FitFn
    label: str = "field"
    approximate: bool = False

    @classmethod
    def from_solution(cls, sol: ExactSolution) -> C2Field:
        return cls(value=sol.eval, gradient=sol.grad, hessian=sol.hessian, label=sol.identifier)

    @classmethod
    def difference(cls, u: C2Field, v: C2Field) -> C2Field:
        """h = u - v."""
        return cls(
            value=lambda x: u.value(x) - v.value(x),
            gradient=lambda x: u.gradient(x) - v.gradient(x),
            hessian=lambda x: u.hessian(x) - v.hessian(x),
            label=f"({u.label}) - ({v.label})",
            approximate=u.approximate or v.approximate,
        )

    @classmethod
    def from_scalar_field(cls, field: ScalarField, patch_size: int = PATCH_SIZE) -> C2Field:
        """
        Approximate C² view of a P1 field by quadratic least-squares fits over
        the ``patch_size`` nearest vertices of each query point.
        """
        vertices = field.mesh.vertices
        tree = cKDTree(vertices)
        k = min(patch_size, vertices.shape[0])
        if k < 6:
            raise DomainError("A quadratic patch fit needs at least 6 vertices")

        def fit(x: np.ndarray) -> np.ndarray:
            pts = as_points(x)
            _, idx = tree.query(pts, k=k)
            coeffs = np.empty((pts.shape[0], 6))
            for row, (point, patch) in enumerate(zip(pts, idx)):
                d = vertices[patch] - point
                design = np.column_stack(
                    [np.ones(k), d[:, 0], d[:, 1], 0.5 * d[:, 0] ** 2, d[:, 0] * d[:, 1], 0.5 * d[:, 1] ** 2]
                )
                coeffs[row] = np.linalg.lstsq(design, field.values[patch], rcond=None)[0]
            return coeffs

        def hessian(x: np.ndarray) -> np.ndarray:
            c = fit(x)
            hess = np.empty((c.shape[0], 2, 2))
            hess[:, 0, 0], hess[:, 1, 1] = c[:, 3], c[:, 5]
            hess[:, 0, 1] = hess[:, 1, 0] = c[:, 4]
            return hess

        return cls(
            value=lambda x: fit(x)[:, 0],
            gradient=lambda x: fit(x)[:, 1:3],
            hessian=hessian,
            label="p1-patch-fit",
            approximate=True,
        )


def _vector(alpha: Sequence[float]) -> np.ndarray:
    return np.asarray(alpha, dtype=float).reshape(-1)


def quadratic_form(alpha: Sequence[float], xi: Sequence[float], p: float) -> float:
    """|α|²|ξ|² + (p-2)(α·ξ)²."""
    a, x = _vector(alpha), _vector(xi)
    return float(np.dot(a, a) * np.dot(x, x) + (p - 2.0) * np.dot(a, x) ** 2)


def principal_matrix(alpha: Sequence[float], p: float) -> np.ndarray:
    """a_ij = |α|²δ_ij + (p-2)α_iα_j."""
    a = _vector(alpha)
    return np.dot(a, a) * np.eye(a.size) + (p - 2.0) * np.outer(a, a)


def ellipticity_bounds(alpha: Sequence[float], p: float) -> tuple[float, float]:
    """Exact eigenvalue range (min(1,p-1)|α|², max(1,p-1)|α|²) of the principal matrix."""
    a = _vector(alpha)
    norm_sq = float(np.dot(a, a))
    if norm_sq == 0.0:
        raise DomainError("Linearization needs a nonzero affine slope alpha")
    if not p > 1.0:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    return min(1.0, p - 1.0) * norm_sq, max(1.0, p - 1.0) * norm_sq


def drift_remainder(h: C2Field, alpha: Sequence[float], p: float, x: np.ndarray) -> np.ndarray:
    """R(x) for every sample point."""
    pts = as_points(x)
    a = _vector(alpha)
    g = h.gradient(pts)
    hess = h.hessian(pts)
    lap = np.trace(hess, axis1=1, axis2=2)
    g_sq = np.einsum("ni,ni->n", g, g)
    g_dot_a = g @ a
    ghg = np.einsum("ni,nij,nj->n", g, hess, g)
    gha = np.einsum("ni,nij,j->n", g, hess, a)
    return g_sq * lap + 2.0 * g_dot_a * lap + (p - 2.0) * (ghg + 2.0 * gha)


def drift_coefficients(h: C2Field, alpha: Sequence[float], p: float, x: np.ndarray) -> np.ndarray:
    """b(x) = R(x)∇h/|∇h|², zero where ∇h vanishes; rows match the points of ``x``."""
    pts = as_points(x)
    g = h.gradient(pts)
    g_sq = np.einsum("ni,ni->n", g, g)
    remainder = drift_remainder(h, alpha, p, pts)
    scale = np.divide(remainder, g_sq, out=np.zeros_like(remainder), where=g_sq > 0.0)
    return scale[:, np.newaxis] * g


@dataclass(frozen=True)
class AffineLinearization:
    alpha: np.ndarray
    p: float
    principal: np.ndarray
    h: C2Field

    @classmethod
    def around(cls, u: C2Field, affine: ExactSolution, p: float) -> AffineLinearization:
        if affine.kind is not SolutionKind.AFFINE:
            raise DomainError(f"Linearization base must be affine, got {affine.identifier}")
        alpha = np.asarray(affine.l, dtype=float)
        ellipticity_bounds(alpha, p)
        return cls(
            alpha=alpha,
            p=float(p),
            principal=principal_matrix(alpha, p),
            h=C2Field.difference(u, C2Field.from_solution(affine)),
        )

    def drift(self, x: np.ndarray) -> np.ndarray:
        return drift_coefficients(self.h, self.alpha, self.p, x)

    def operator(self, x: np.ndarray) -> np.ndarray:
        """a_ij h_ij + b_i h_i at every point."""
        pts = as_points(x)
        hess = self.h.hessian(pts)
        principal = np.einsum("ij,nij->n", self.principal, hess)
        return principal + np.einsum("ni,ni->n", self.drift(pts), self.h.gradient(pts))


def residual_affine_linearization(
    u: C2Field, affine: ExactSolution, p: float, sample: np.ndarray
) -> float:
    """Max |a_ij h_ij + b_i h_i| over the sample with h = u - L."""
    lin = AffineLinearization.around(u, affine, p)
    return float(np.max(np.abs(lin.operator(sample))))


@dataclass(frozen=True)
class TwoSolutionResidual:
    max_residual: float
    flagged_points: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"max_residual": self.max_residual, "flagged_points": list(self.flagged_points)}


def two_solution_operator(u: C2Field, v: C2Field, p: float, x: np.ndarray) -> np.ndarray:
    """
    |∇v|²Δh + (p-2)Σv_iv_jh_ij + ((∇v+∇u)·∇h)Δu + (p-2)Σu_ij(v_ih_j + u_jh_i), h = u - v.
    """
    pts = as_points(x)
    gu, gv = u.gradient(pts), v.gradient(pts)
    hu, hv = u.hessian(pts), v.hessian(pts)
    gh, hh = gu - gv, hu - hv
    lap_h = np.trace(hh, axis1=1, axis2=2)
    lap_u = np.trace(hu, axis1=1, axis2=2)
    out = np.einsum("ni,ni->n", gv, gv) * lap_h
    out += (p - 2.0) * np.einsum("ni,nij,nj->n", gv, hh, gv)
    out += np.einsum("ni,ni->n", gv + gu, gh) * lap_u
    out += (p - 2.0) * (np.einsum("nij,ni,nj->n", hu, gv, gh) + np.einsum("nij,ni,nj->n", hu, gh, gu))
    return out


def residual_two_solution(u: C2Field, v: C2Field, p: float, sample: np.ndarray) -> TwoSolutionResidual:
    """Max residual of the two-solution equation; points with ∇v = 0 are flagged but still evaluated."""
    pts = as_points(sample)
    residual = two_solution_operator(u, v, p, pts)
    flagged = np.flatnonzero(np.linalg.norm(v.gradient(pts), axis=1) <= DEGENERATE_GRAD)
    if flagged.size:
        logger.info(f"grad v vanishes at {flagged.size} sample points")
    return TwoSolutionResidual(
        max_residual=float(np.max(np.abs(residual))),
        flagged_points=tuple(int(i) for i in flagged),
    )


def nondivergence_residual(u: C2Field, p: float, x: np.ndarray) -> np.ndarray:
    """|∇u|²Δu + (p-2)Σu_iu_ju_ij at every point."""
    pts = as_points(x)
    return p_laplace_nondivergence(u.gradient(pts), u.hessian(pts), p)
