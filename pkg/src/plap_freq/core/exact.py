"""
Closed-form p-harmonic reference fields.

Catalog members serve as solver boundary data and as ground truth for the
identity checks. Every member evaluates value, gradient and Hessian on a
batch of points (shape ``(N, n)``) so that the frequency module can treat
them exactly like a discrete field.

Catalog ids (CLI/config):
  affine:l1,l2,l0        L(x) = l·x + l0
  harmpoly:k             Re((x + iy)^k), p = 2 only
  radial[:cx,cy]         |x - c|^((p-n)/(p-1)), log|x - c| for p = n
  constant:c             u ≡ c
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)

# |x - c| below this counts as the radial singularity
SINGULAR_RADIUS = 1e-12


class SolutionKind(str, Enum):
    AFFINE = "affine"
    HARMONIC_POLYNOMIAL = "harmpoly"
    RADIAL_FUNDAMENTAL = "radial"
    CONSTANT = "constant"


def as_points(x: np.ndarray | Sequence[float]) -> np.ndarray:
    """Return ``x`` as a float array of shape (N, n); a single point becomes N = 1."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 1:
        pts = pts[np.newaxis, :]
    if pts.ndim != 2:
        raise DomainError(f"Expected points of shape (N, n), got {pts.shape}")
    return pts


def p_laplace_nondivergence(grad: np.ndarray, hess: np.ndarray, p: float) -> np.ndarray:
    """|∇u|²Δu + (p-2) Σ u_i u_j u_ij, evaluated pointwise from batched derivatives."""
    grad_sq = np.einsum("ni,ni->n", grad, grad)
    laplacian = np.trace(hess, axis1=1, axis2=2)
    directional = np.einsum("ni,nij,nj->n", grad, hess, grad)
    return grad_sq * laplacian + (p - 2.0) * directional


@dataclass(frozen=True)
class ExactSolution:
    """Immutable closed-form solution; build through the classmethods."""

    kind: SolutionKind
    l: tuple[float, ...] = ()
    l0: float = 0.0
    k: int = 0
    p: float = 2.0
    n: int = 2
    c: float = 0.0
    center: tuple[float, ...] = (0.0, 0.0)

    @classmethod
    def affine(cls, l: Sequence[float], l0: float = 0.0) -> ExactSolution:
        coeffs = tuple(float(a) for a in l)
        if len(coeffs) < 1:
            raise DomainError("Affine solution needs at least one coefficient")
        return cls(kind=SolutionKind.AFFINE, l=coeffs, l0=float(l0), n=len(coeffs))

    @classmethod
    def harmonic_polynomial(cls, k: int, p: float = 2.0) -> ExactSolution:
        if p != 2.0:
            raise DomainError(f"Re((x+iy)^k) is p-harmonic only for p = 2, got p = {p}")
        if int(k) != k or k < 1:
            raise DomainError(f"Polynomial degree must be a positive integer, got {k}")
        return cls(kind=SolutionKind.HARMONIC_POLYNOMIAL, k=int(k), p=2.0, n=2)

    @classmethod
    def radial_fundamental(
        cls, p: float, n: int = 2, center: Sequence[float] | None = None
    ) -> ExactSolution:
        if not p > 1.0 or not math.isfinite(p):
            raise DomainError(f"p must lie in (1, inf), got {p}")
        if n < 2:
            raise DomainError(f"Dimension must be at least 2, got {n}")
        ctr = tuple(float(a) for a in center) if center is not None else (0.0,) * n
        if len(ctr) != n:
            raise DomainError(f"Center {ctr} does not have dimension {n}")
        return cls(kind=SolutionKind.RADIAL_FUNDAMENTAL, p=float(p), n=int(n), center=ctr)

    @classmethod
    def constant(cls, c: float, n: int = 2) -> ExactSolution:
        return cls(kind=SolutionKind.CONSTANT, c=float(c), n=n)

    @property
    def radial_exponent(self) -> float:
        """(p - n)/(p - 1); zero marks the logarithmic case p = n."""
        return (self.p - self.n) / (self.p - 1.0)

    @property
    def identifier(self) -> str:
        if self.kind is SolutionKind.AFFINE:
            return "affine:" + ",".join(f"{a:g}" for a in (*self.l, self.l0))
        if self.kind is SolutionKind.HARMONIC_POLYNOMIAL:
            return f"harmpoly:{self.k}"
        if self.kind is SolutionKind.RADIAL_FUNDAMENTAL:
            if any(self.center):
                return "radial:" + ",".join(f"{a:g}" for a in self.center)
            return "radial"
        return f"constant:{self.c:g}"

    def admissible_for(self, p: float) -> bool:
        """Whether the member solves the p-Laplace equation for this p."""
        if self.kind is SolutionKind.HARMONIC_POLYNOMIAL:
            return p == 2.0
        if self.kind is SolutionKind.RADIAL_FUNDAMENTAL:
            return p == self.p
        return True

    def _radial_parts(self, pts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        offset = pts - np.asarray(self.center)
        radius = np.linalg.norm(offset, axis=1)
        bad = np.flatnonzero(radius <= SINGULAR_RADIUS)
        if bad.size:
            raise DomainError(
                f"Radial solution evaluated at its singularity {tuple(pts[bad[0]])}"
            )
        return offset, radius

    def _check_dim(self, pts: np.ndarray) -> None:
        if pts.shape[1] != self.n:
            raise DomainError(f"{self.identifier} expects {self.n}-d points, got {pts.shape[1]}-d")

    def eval(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        pts = as_points(x)
        self._check_dim(pts)
        if self.kind is SolutionKind.AFFINE:
            return pts @ np.asarray(self.l) + self.l0
        if self.kind is SolutionKind.CONSTANT:
            return np.full(pts.shape[0], self.c)
        if self.kind is SolutionKind.HARMONIC_POLYNOMIAL:
            z = pts[:, 0] + 1j * pts[:, 1]
            return np.real(z**self.k)
        _, radius = self._radial_parts(pts)
        a = self.radial_exponent
        if a == 0.0:
            return np.log(radius)
        return radius**a

    def grad(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        pts = as_points(x)
        self._check_dim(pts)
        if self.kind is SolutionKind.AFFINE:
            return np.tile(np.asarray(self.l), (pts.shape[0], 1))
        if self.kind is SolutionKind.CONSTANT:
            return np.zeros_like(pts)
        if self.kind is SolutionKind.HARMONIC_POLYNOMIAL:
            # d/dz z^k = k z^(k-1); ∇Re f = (Re f', -Im f')
            z = pts[:, 0] + 1j * pts[:, 1]
            dz = self.k * z ** (self.k - 1)
            return np.column_stack([dz.real, -dz.imag])
        offset, radius = self._radial_parts(pts)
        d1, _ = self._radial_derivatives(radius)
        return (d1 / radius)[:, np.newaxis] * offset

    def hessian(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        pts = as_points(x)
        self._check_dim(pts)
        n_pts, dim = pts.shape
        if self.kind in (SolutionKind.AFFINE, SolutionKind.CONSTANT):
            return np.zeros((n_pts, dim, dim))
        if self.kind is SolutionKind.HARMONIC_POLYNOMIAL:
            z = pts[:, 0] + 1j * pts[:, 1]
            if self.k >= 2:
                d2 = self.k * (self.k - 1) * z ** (self.k - 2)
            else:
                d2 = np.zeros_like(z)
            hess = np.empty((n_pts, 2, 2))
            hess[:, 0, 0] = d2.real
            hess[:, 1, 1] = -d2.real
            hess[:, 0, 1] = hess[:, 1, 0] = -d2.imag
            return hess
        offset, radius = self._radial_parts(pts)
        d1, d2 = self._radial_derivatives(radius)
        unit = offset / radius[:, np.newaxis]
        outer = np.einsum("ni,nj->nij", unit, unit)
        eye = np.broadcast_to(np.eye(dim), (n_pts, dim, dim))
        return d2[:, None, None] * outer + (d1 / radius)[:, None, None] * (eye - outer)

    def _radial_derivatives(self, radius: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        a = self.radial_exponent
        if a == 0.0:
            return 1.0 / radius, -1.0 / radius**2
        return a * radius ** (a - 1.0), a * (a - 1.0) * radius ** (a - 2.0)


@dataclass(frozen=True)
class HarmonicityCheck:
    max_residual: float
    checked: int
    skipped: tuple[int, ...]


def verify_p_harmonic(
    sol: ExactSolution,
    p: float,
    sample: np.ndarray,
    critical_tol: float = 1e-12,
) -> HarmonicityCheck:
    """
    Max |(|∇u|²Δu + (p-2)Σu_iu_ju_ij)| over the sample, from analytic Hessians.

    Points where |∇u| <= critical_tol are skipped and reported, since the
    nondivergence form only characterizes solutions away from critical points.
    """
    if not sol.admissible_for(p):
        raise DomainError(f"{sol.identifier} is not a p-harmonic catalog member for p = {p}")
    pts = as_points(sample)
    grad = sol.grad(pts)
    critical = np.linalg.norm(grad, axis=1) <= critical_tol
    skipped = tuple(int(i) for i in np.flatnonzero(critical))
    if skipped:
        logger.info(f"{sol.identifier}: skipped {len(skipped)} critical points")
    keep = ~critical
    if not keep.any():
        return HarmonicityCheck(max_residual=0.0, checked=0, skipped=skipped)
    residual = p_laplace_nondivergence(grad[keep], sol.hessian(pts[keep]), p)
    return HarmonicityCheck(
        max_residual=float(np.max(np.abs(residual))),
        checked=int(keep.sum()),
        skipped=skipped,
    )


def parse_solution(field_id: str, p: float = 2.0, strict: bool = True) -> ExactSolution:
    """
    Build a catalog member from its string id (``affine:2,0,1``, ``harmpoly:3``, ``radial``).

    With ``strict=False`` a harmonic polynomial is accepted for any p, as boundary data.
    """
    name, _, args = field_id.strip().partition(":")
    name = name.strip().lower()
    values = [float(v) for v in args.split(",") if v.strip()] if args else []
    try:
        kind = SolutionKind(name)
    except ValueError as exc:
        raise DomainError(f"Unknown catalog id '{field_id}'") from exc

    if kind is SolutionKind.AFFINE:
        if len(values) < 2:
            raise DomainError(f"affine needs coefficients and offset, e.g. affine:2,0,1; got '{field_id}'")
        return ExactSolution.affine(values[:-1], values[-1])
    if kind is SolutionKind.HARMONIC_POLYNOMIAL:
        if len(values) != 1:
            raise DomainError(f"harmpoly needs a degree, e.g. harmpoly:3; got '{field_id}'")
        return ExactSolution.harmonic_polynomial(int(values[0]), p=p if strict else 2.0)
    if kind is SolutionKind.RADIAL_FUNDAMENTAL:
        return ExactSolution.radial_fundamental(p, n=2, center=values or None)
    if len(values) != 1:
        raise DomainError(f"constant needs a value, e.g. constant:1.5; got '{field_id}'")
    return ExactSolution.constant(values[0])


def catalog(p: float) -> list[ExactSolution]:
    """The members that are p-harmonic for the given p."""
    members = [
        ExactSolution.affine((2.0, 0.0), 1.0),
        ExactSolution.affine((1.0, -0.5), 0.0),
        ExactSolution.radial_fundamental(p),
        ExactSolution.constant(1.0),
    ]
    if p == 2.0:
        members.extend(ExactSolution.harmonic_polynomial(k) for k in (1, 2, 3))
    return members
