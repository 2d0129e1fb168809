"""
Frequency function F_p(r) = r D(r) / I(r) and the checks built on it.

I(r) = ∫_{∂B_r}|u|^p dS is computed by the trapezoid rule in θ, D(r) =
∫_{B_r}|∇u|^p dx by a polar tensor rule (Gauss-Legendre in ρ, trapezoid in
θ). Every operation accepts any field with vectorized ``eval``/``grad``, so
catalog solutions are checked analytically through the same code path as
discrete fields. Numerics are planar: n = 2 wherever the dimension enters.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Sequence

import numpy as np

from .errors import DomainError, FrequencyUndefinedError
from .mesh import CircleSample, PointField, ScalarField, default_center, sample_circle

logger = logging.getLogger(__name__)

DIMENSION = 2
UNDEFINED_FLOOR = 1e-14
MIN_RADIAL_NODES = 32
DOUBLING_CONSTANT = 4.0
WINDOW_BOUND = 0.25
BOUND_SLACK = 1e-8


def _center(field: PointField, center: Sequence[float] | None) -> tuple[float, float]:
    return tuple(center) if center is not None else default_center(field)


def _power_abs(values: np.ndarray, exponent: float) -> np.ndarray:
    return np.abs(values) ** exponent


def _safe_power(base: np.ndarray, exponent: float) -> np.ndarray:
    """base**exponent with 0 where base == 0 (the flux limit for negative exponents)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(base > 0.0, base**exponent, 0.0)


def _value_scale(field: PointField, sample: CircleSample) -> float:
    if isinstance(field, ScalarField):
        return field.max_abs
    return float(np.max(np.abs(sample.u))) if sample.u.size else 0.0


def undefined_threshold(field: PointField, sample: CircleSample, p: float) -> float:
    """I(r) at or below this counts as zero."""
    return UNDEFINED_FLOOR * (1.0 + _value_scale(field, sample) ** p) * sample.r


def _radial_count(field: PointField, r: float, n_r: int | None) -> int:
    if n_r is not None:
        return int(n_r)
    if isinstance(field, ScalarField):
        return max(MIN_RADIAL_NODES, int(math.ceil(r / field.mesh.h)))
    return MIN_RADIAL_NODES


@dataclass(frozen=True)
class DiscSample:
    """Values and gradients at the nodes of the polar tensor rule on B_r."""

    r: float
    u: np.ndarray
    grad: np.ndarray
    weights: np.ndarray

    def integrate(self, values: np.ndarray) -> float:
        return float(np.dot(self.weights, values))


def sample_disc(
    field: PointField,
    r: float,
    n_r: int | None = None,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> DiscSample:
    if not r > 0.0:
        raise DomainError(f"Disc radius must be positive, got {r}")
    ctr = np.asarray(_center(field, center), dtype=float)
    nodes, gl_weights = np.polynomial.legendre.leggauss(_radial_count(field, r, n_r))
    rho = 0.5 * r * (nodes + 1.0)
    rho_weights = 0.5 * r * gl_weights * rho
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    directions = np.column_stack([np.cos(theta), np.sin(theta)])
    points = ctr + (rho[:, None, None] * directions[None, :, :]).reshape(-1, 2)
    weights = np.repeat(rho_weights, n_theta) * (2.0 * math.pi / n_theta)
    return DiscSample(
        r=float(r),
        u=np.asarray(field.eval(points), dtype=float),
        grad=np.asarray(field.grad(points), dtype=float),
        weights=weights,
    )


def boundary_I(
    field: PointField, p: float, r: float, n_theta: int = 256, center: Sequence[float] | None = None
) -> float:
    """I(r) = ∫_{∂B_r}|u|^p dS."""
    if not p > 1.0:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    sample = sample_circle(field, r, n_theta, _center(field, center))
    return sample.integrate(_power_abs(sample.u, p))


def surface_gradient_integral(
    field: PointField, p: float, r: float, n_theta: int = 256, center: Sequence[float] | None = None
) -> float:
    """∫_{∂B_r}|∇u|^p dS."""
    sample = sample_circle(field, r, n_theta, _center(field, center))
    return sample.integrate(sample.grad_norm**p)


def bulk_D(
    field: PointField,
    p: float,
    r: float,
    n_r: int | None = None,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> float:
    """D(r) = ∫_{B_r}|∇u|^p dx."""
    disc = sample_disc(field, r, n_r, n_theta, center)
    return disc.integrate(np.linalg.norm(disc.grad, axis=1) ** p)


def bulk_mass(
    field: PointField,
    p: float,
    r: float,
    n_r: int | None = None,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> float:
    """∫_{B_r}|u|^p dx."""
    disc = sample_disc(field, r, n_r, n_theta, center)
    return disc.integrate(_power_abs(disc.u, p))


def frequency_F(
    field: PointField,
    p: float,
    r: float,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
    n_r: int | None = None,
    radius_power: float = 1.0,
) -> float | None:
    """
    r^radius_power · D(r) / I(r), or None where I(r) counts as zero.

    radius_power = 1 is the frequency function; p - 1 gives the r^{p-1} variant.
    """
    ctr = _center(field, center)
    sample = sample_circle(field, r, n_theta, ctr)
    big_i = sample.integrate(_power_abs(sample.u, p))
    if big_i <= undefined_threshold(field, sample, p):
        return None
    return r**radius_power * bulk_D(field, p, r, n_r, n_theta, ctr) / big_i


def _i_prime_from_sample(sample: CircleSample, p: float, big_i: float) -> float:
    flux = _power_abs(sample.u, p - 1.0) * np.sign(sample.u) * sample.u_nu
    return (DIMENSION - 1) / sample.r * big_i + p * sample.integrate(flux)


def I_prime_formula(
    field: PointField, p: float, r: float, n_theta: int = 256, center: Sequence[float] | None = None
) -> float:
    """
    I'(r) = (n-1)/r I(r) + p ∫_{∂B_r}|u|^{p-1} sign(u) u_ν dS.

    sign(0) = 0, so the split into {u > 0} and {u <= 0} needs no special case.
    """
    if not p > 1.0:
        raise DomainError(f"p must lie in (1, inf), got {p}")
    sample = sample_circle(field, r, n_theta, _center(field, center))
    big_i = sample.integrate(_power_abs(sample.u, p))
    return _i_prime_from_sample(sample, p, big_i)


def I_prime_fd(
    field: PointField,
    p: float,
    r: float,
    dr: float = 1e-3,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> float:
    """Centered difference of I at r."""
    ctr = _center(field, center)
    return (boundary_I(field, p, r + dr, n_theta, ctr) - boundary_I(field, p, r - dr, n_theta, ctr)) / (2.0 * dr)


@dataclass(frozen=True)
class InequalityCheck:
    lhs: float
    rhs: float
    holds: bool
    slack: float = 0.0

    def to_dict(self) -> dict[str, Any]:
        return {"lhs": self.lhs, "rhs": self.rhs, "holds": self.holds, "slack": self.slack}


def I_prime_bound_check(
    field: PointField,
    p: float,
    r: float,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
    use_fd: bool = False,
    dr: float = 1e-3,
    slack: float | None = None,
) -> InequalityCheck:
    """I'(r) <= (n-1)/r I(r) + p ∫|u|^{p-1}|u_ν| dS, up to a quadrature slack."""
    ctr = _center(field, center)
    sample = sample_circle(field, r, n_theta, ctr)
    big_i = sample.integrate(_power_abs(sample.u, p))
    if use_fd:
        lhs = I_prime_fd(field, p, r, dr, n_theta, ctr)
    else:
        lhs = _i_prime_from_sample(sample, p, big_i)
    rhs = (DIMENSION - 1) / r * big_i + p * sample.integrate(_power_abs(sample.u, p - 1.0) * np.abs(sample.u_nu))
    if slack is None:
        slack = BOUND_SLACK * max(abs(rhs), big_i / r, np.finfo(float).tiny)
    return InequalityCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + slack), slack=slack)


@dataclass(frozen=True)
class IdentityRow:
    r: float
    left: float
    right: float
    residual: float


@dataclass(frozen=True)
class IdentityReport:
    radii: np.ndarray
    left: np.ndarray
    right: np.ndarray
    residuals: np.ndarray

    @property
    def worst(self) -> float:
        return float(np.max(self.residuals)) if self.residuals.size else 0.0

    @classmethod
    def from_rows(cls, rows: Sequence[IdentityRow]) -> IdentityReport:
        return cls(
            radii=np.array([row.r for row in rows]),
            left=np.array([row.left for row in rows]),
            right=np.array([row.right for row in rows]),
            residuals=np.array([row.residual for row in rows]),
        )

    def to_dict(self) -> dict[str, Any]:
        return {
            "r": self.radii.tolist(),
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "residual": self.residuals.tolist(),
            "worst": self.worst,
        }


def relative_residual(left: float, right: float) -> float:
    return abs(left - right) / max(abs(left), abs(right), 1e-14)


def energy_identity_residual(
    field: PointField,
    p: float,
    r: float,
    eps: float = 0.0,
    n_theta: int = 1024,
    center: Sequence[float] | None = None,
    n_r: int | None = None,
    recovered: bool = True,
) -> IdentityRow:
    """
    ∫_{B_r}|∇u|²(|∇u|²+ε)^{p/2-1} dx against ∫_{∂B_r}(|∇u|²+ε)^{p/2-1} u u_ν dS.

    eps = 0 is the p-Dirichlet energy identity; eps > 0 is its regularized form.
    On a ScalarField both sides use the recovered (nodal-averaged) gradient
    unless ``recovered`` is False; the disc rule then takes twice the usual
    number of radial nodes.
    """
    if eps < 0.0:
        raise DomainError(f"eps must be non-negative, got {eps}")
    ctr = _center(field, center)
    if isinstance(field, ScalarField) and recovered:
        if n_r is None:
            n_r = 2 * _radial_count(field, r, None)
        field = field.with_recovered_gradient()
    disc = sample_disc(field, r, n_r, n_theta, ctr)
    grad_sq = np.einsum("nd,nd->n", disc.grad, disc.grad)
    left = disc.integrate(grad_sq * _safe_power(grad_sq + eps, p / 2.0 - 1.0))
    sample = sample_circle(field, r, n_theta, ctr)
    coeff = _safe_power(sample.grad_norm**2 + eps, p / 2.0 - 1.0)
    right = sample.integrate(coeff * sample.u * sample.u_nu)
    return IdentityRow(r=float(r), left=left, right=right, residual=relative_residual(left, right))


def energy_identity_report(
    field: PointField,
    p: float,
    radii: Sequence[float],
    eps: float = 0.0,
    n_theta: int = 1024,
    center: Sequence[float] | None = None,
) -> IdentityReport:
    return IdentityReport.from_rows(
        [energy_identity_residual(field, p, r, eps, n_theta, center) for r in radii]
    )


def grad_estimate_check(
    field: PointField,
    p: float,
    r: float,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
    slack_fraction: float = 0.01,
) -> InequalityCheck:
    """p ∫_{B_r}|∇u|^p <= (p-1) ∫_{∂B_r}|∇u|^p + ∫_{∂B_r}|u|^p, with slack a fraction of rhs."""
    ctr = _center(field, center)
    sample = sample_circle(field, r, n_theta, ctr)
    lhs = p * bulk_D(field, p, r, None, n_theta, ctr)
    rhs = (p - 1.0) * sample.integrate(sample.grad_norm**p) + sample.integrate(_power_abs(sample.u, p))
    slack = slack_fraction * abs(rhs)
    return InequalityCheck(lhs=lhs, rhs=rhs, holds=bool(lhs <= rhs + slack), slack=slack)


@dataclass(frozen=True)
class FrequencyProfile:
    p: float
    center: tuple[float, float]
    radii: np.ndarray
    I: np.ndarray
    D: np.ndarray
    F: np.ndarray
    F_defined: np.ndarray
    Iprime: np.ndarray
    radius_power: float = 1.0

    @property
    def M(self) -> float:
        """sup of the defined F values; nan when none is defined."""
        if not self.F_defined.any():
            return float("nan")
        return float(np.max(self.F[self.F_defined]))

    def __len__(self) -> int:
        return int(self.radii.size)


def uniform_radii(r_b: float, R_b: float, count: int) -> np.ndarray:
    """``count`` equispaced radii in (r_b, R_b]."""
    if not 0.0 <= r_b < R_b:
        raise DomainError(f"Radius window needs 0 <= r_b < R_b, got ({r_b}, {R_b}]")
    return r_b + (R_b - r_b) * np.arange(1, count + 1) / count


def ring_aligned_radii(field: ScalarField, r_b: float, R_b: float) -> np.ndarray:
    """Mesh ring radii inside (r_b, R_b], excluding the outer boundary ring; measured from the domain center."""
    rings = field.mesh.ring_radii[:-1]
    return rings[(rings > r_b) & (rings <= R_b)]


def frequency_profile(
    field: PointField,
    p: float,
    radii: Sequence[float],
    n_theta: int = 256,
    center: Sequence[float] | None = None,
    n_r: int | None = None,
    radius_power: float = 1.0,
    workers: int = 1,
) -> FrequencyProfile:
    """I, D, F and I' on a strictly increasing radius grid; rows are assembled in radius order."""
    grid = np.asarray(radii, dtype=float)
    if grid.size == 0 or np.any(np.diff(grid) <= 0.0) or grid[0] <= 0.0:
        raise DomainError("Profile radii must be positive and strictly increasing")
    ctr = _center(field, center)

    def row(r: float) -> tuple[float, float, float, bool]:
        sample = sample_circle(field, r, n_theta, ctr)
        big_i = sample.integrate(_power_abs(sample.u, p))
        d = bulk_D(field, p, r, n_r, n_theta, ctr)
        defined = big_i > undefined_threshold(field, sample, p)
        return big_i, d, _i_prime_from_sample(sample, p, big_i), defined

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(row, grid))
    else:
        rows = [row(r) for r in grid]

    big_i = np.array([r[0] for r in rows])
    d = np.array([r[1] for r in rows])
    defined = np.array([r[3] for r in rows], dtype=bool)
    freq = np.full(grid.size, np.nan)
    freq[defined] = grid[defined] ** radius_power * d[defined] / big_i[defined]
    if not defined.all():
        logger.info(f"F undefined at {int((~defined).sum())} of {grid.size} radii")
    return FrequencyProfile(
        p=float(p),
        center=ctr,
        radii=grid,
        I=big_i,
        D=d,
        F=freq,
        F_defined=defined,
        Iprime=np.array([r[2] for r in rows]),
        radius_power=float(radius_power),
    )


def window_conditions(p: float, eps0: float, r: float, s: float, n: int = DIMENSION) -> tuple[float, float]:
    """
    The two smallness terms for a pair r <= s:
    (n-1) log(s/r) and (ε₀p)^{-1/(p-1)} (p-1) ∫_r^s t^{-1/(p-1)} dt.
    """
    c1 = (n - 1) * math.log(s / r)
    if math.isinf(eps0):
        return c1, 0.0
    q = 1.0 / (p - 1.0)
    if abs(q - 1.0) < 1e-12:
        integral = math.log(s / r)
    else:
        integral = (s ** (1.0 - q) - r ** (1.0 - q)) / (1.0 - q)
    return c1, (eps0 * p) ** (-q) * (p - 1.0) * integral


@dataclass(frozen=True)
class DoublingReport:
    p: float
    M: float
    eps0: float
    r0: float
    r_star: float
    radii: np.ndarray
    ratios: np.ndarray
    pairwise_max_ratio: float
    passed: bool

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios))

    def to_dict(self) -> dict[str, Any]:
        return {
            "p": self.p,
            "M": self.M,
            "eps0": self.eps0,
            "r0": self.r0,
            "r_star": self.r_star,
            "max_ratio": self.max_ratio,
            "pairwise_max_ratio": self.pairwise_max_ratio,
            "pass": self.passed,
            "radii": self.radii.tolist(),
            "ratios": self.ratios.tolist(),
        }


def _require_defined(profile: FrequencyProfile) -> None:
    if not profile.F_defined.all():
        zero = profile.radii[~profile.F_defined]
        raise FrequencyUndefinedError(
            f"I(r) = 0 at {zero.size} radii of the window (first r = {zero[0]:.6g}); "
            "locate the vanishing radius first"
        )


def doubling_scan(profile: FrequencyProfile) -> DoublingReport:
    """
    Weak doubling mechanics on the profile window.

    ε₀ = 1/(4pM); r₀ is the largest grid radius such that both smallness terms
    stay <= 1/4 for every grid pair in (r_b, r₀]; r* maximizes I on that range.
    """
    _require_defined(profile)
    p, radii, big_i = profile.p, profile.radii, profile.I
    big_m = profile.M
    if not math.isfinite(big_m):
        raise DomainError("Frequency is unbounded on the window")
    eps0 = 1.0 / (4.0 * p * big_m) if big_m > 0.0 else math.inf

    # both terms grow in s and shrink in r, so the pair (first radius, s) is the worst
    r0_idx = 0
    for idx in range(1, radii.size):
        c1, c2 = window_conditions(p, eps0, radii[0], radii[idx])
        if c1 > WINDOW_BOUND or c2 > WINDOW_BOUND:
            break
        r0_idx = idx
    star_idx = int(np.argmax(big_i[: r0_idx + 1]))
    window = big_i[: star_idx + 1]
    ratios = big_i[star_idx] / window
    pairwise = float(window.max() / window.min())
    passed = bool(np.all(ratios <= DOUBLING_CONSTANT) and pairwise <= DOUBLING_CONSTANT)
    logger.info(
        f"doubling: M={big_m:.6g} eps0={eps0:.6g} r0={radii[r0_idx]:.6g} "
        f"r*={radii[star_idx]:.6g} max ratio={ratios.max():.6g} pass={passed}"
    )
    return DoublingReport(
        p=p,
        M=big_m,
        eps0=eps0,
        r0=float(radii[r0_idx]),
        r_star=float(radii[star_idx]),
        radii=radii[: star_idx + 1].copy(),
        ratios=ratios,
        pairwise_max_ratio=pairwise,
        passed=passed,
    )


@dataclass(frozen=True)
class SplitEstimateCheck:
    max_excess: float
    pairs_checked: int
    worst_pair: tuple[float, float] | None

    @property
    def holds(self) -> bool:
        return self.max_excess <= 0.0


def split_estimate_check(profile: FrequencyProfile, eps0: float | None = None) -> SplitEstimateCheck:
    """
    For grid pairs r <= s with I(r) <= I(s):
    (I(s) - I(r))/I(s) <= (n-1)log(s/r) + (ε₀p)^{-1/(p-1)}(p-1)∫_r^s t^{-1/(p-1)}dt + ε₀ p F(s).
    """
    _require_defined(profile)
    p = profile.p
    if eps0 is None:
        eps0 = 1.0 / (4.0 * p * profile.M) if profile.M > 0.0 else math.inf
    worst, worst_pair, pairs = -math.inf, None, 0
    for j, s in enumerate(profile.radii):
        for i in range(j + 1):
            if profile.I[i] > profile.I[j]:
                continue
            r = profile.radii[i]
            lhs = (profile.I[j] - profile.I[i]) / profile.I[j]
            c1, c2 = window_conditions(p, eps0, r, s)
            young = 0.0 if math.isinf(eps0) else eps0 * p * profile.F[j]
            excess = lhs - (c1 + c2 + young)
            pairs += 1
            if excess > worst:
                worst, worst_pair = excess, (float(r), float(s))
    return SplitEstimateCheck(max_excess=float(worst), pairs_checked=pairs, worst_pair=worst_pair)


def converse_constant(profile: FrequencyProfile, r_star: float) -> float:
    """max over defined radii r < r* of F(r)(r* - r)^p / (r r*)."""
    mask = profile.F_defined & (profile.radii < r_star)
    if not mask.any():
        return 0.0
    r = profile.radii[mask]
    return float(np.max(profile.F[mask] * (r_star - r) ** profile.p / (r * r_star)))


def vanishing_radius(
    field: PointField,
    tol: float,
    radii: Sequence[float],
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> float:
    """Largest scanned radius whose circle carries max|u| <= tol; 0 when there is none."""
    ctr = _center(field, center)
    vanishing = [
        float(r) for r in radii if float(np.max(np.abs(sample_circle(field, r, n_theta, ctr).u))) <= tol
    ]
    return max(vanishing) if vanishing else 0.0


def caccioppoli_ratio(
    field: PointField,
    p: float,
    r: float,
    rho: float,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> float:
    """D(r)(ρ - r)^p / ∫_{B_ρ}|u|^p dx."""
    if not 0.0 < r < rho:
        raise DomainError(f"Caccioppoli ratio needs 0 < r < rho, got r={r}, rho={rho}")
    ctr = _center(field, center)
    denom = bulk_mass(field, p, rho, None, n_theta, ctr)
    if denom <= 0.0:
        raise DomainError(f"∫|u|^p vanishes on B_{rho:g}; ratio undefined")
    return bulk_D(field, p, r, None, n_theta, ctr) * (rho - r) ** p / denom


@dataclass(frozen=True)
class ConditionProbe:
    r: float
    A1: float
    A2: float


def condition_probes(
    field: PointField, p: float, r: float, n_theta: int = 256, center: Sequence[float] | None = None
) -> ConditionProbe:
    """A1 = ∫_{∂B_r}|∇u|^p / I(r) and A2 = ∫_{B_r}|u|^p / (r I(r))."""
    ctr = _center(field, center)
    sample = sample_circle(field, r, n_theta, ctr)
    big_i = sample.integrate(_power_abs(sample.u, p))
    if big_i <= undefined_threshold(field, sample, p):
        raise FrequencyUndefinedError(f"I({r:g}) = 0; condition ratios undefined")
    a1 = sample.integrate(sample.grad_norm**p) / big_i
    a2 = bulk_mass(field, p, r, None, n_theta, ctr) / (r * big_i)
    return ConditionProbe(r=float(r), A1=a1, A2=a2)


@dataclass(frozen=True)
class ConvexityReport:
    radii: np.ndarray
    bulk: np.ndarray
    surface: np.ndarray
    normalized: np.ndarray
    bulk_convex: np.ndarray
    surface_convex: np.ndarray
    normalized_increasing: np.ndarray

    @property
    def all_ok(self) -> bool:
        return bool(self.bulk_convex.all() and self.surface_convex.all() and self.normalized_increasing.all())

    def to_dict(self) -> dict[str, Any]:
        return {
            "r": self.radii.tolist(),
            "bulk_convex": self.bulk_convex.tolist(),
            "surface_convex": self.surface_convex.tolist(),
            "normalized_increasing": self.normalized_increasing.tolist(),
            "all_ok": self.all_ok,
        }


def _second_divided(r: np.ndarray, f: np.ndarray) -> np.ndarray:
    slopes = np.diff(f) / np.diff(r)
    return 2.0 * np.diff(slopes) / (r[2:] - r[:-2])


def convexity_probe(
    field: PointField,
    radii: Sequence[float],
    n_theta: int = 256,
    center: Sequence[float] | None = None,
    p: float = 2.0,
) -> ConvexityReport:
    """
    Convexity of r ↦ ∫_{B_r}u² and r ↦ ∫_{∂B_r}u², monotonicity of r ↦ (1/r)∫_{∂B_r}u².

    Divided differences on the grid, each verdict with slack 1e-8 times the series scale.
    """
    if p != 2.0:
        raise DomainError("Convexity probes are defined for p = 2 only")
    grid = np.asarray(radii, dtype=float)
    if grid.size < 3 or np.any(np.diff(grid) <= 0.0):
        raise DomainError("Convexity probes need at least 3 strictly increasing radii")
    ctr = _center(field, center)
    bulk = np.array([bulk_mass(field, 2.0, r, None, n_theta, ctr) for r in grid])
    surface = np.array([boundary_I(field, 2.0, r, n_theta, ctr) for r in grid])
    normalized = surface / grid

    def verdict(values: np.ndarray, series: np.ndarray) -> np.ndarray:
        scale = float(np.max(np.abs(series))) if series.size else 0.0
        return values >= -BOUND_SLACK * max(scale, np.finfo(float).tiny)

    return ConvexityReport(
        radii=grid,
        bulk=bulk,
        surface=surface,
        normalized=normalized,
        bulk_convex=verdict(_second_divided(grid, bulk), bulk),
        surface_convex=verdict(_second_divided(grid, surface), surface),
        normalized_increasing=verdict(np.diff(normalized) / np.diff(grid), normalized),
    )


@dataclass(frozen=True)
class PoincareProbe:
    r: float
    gamma_hat: float
    C_hat: float
    C_hat_boundary: float


def poincare_probe(
    field: PointField,
    p: float,
    r: float,
    zero_tol: float | None = None,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> PoincareProbe:
    """
    Zero-set fraction γ̂ = |{|u| <= tol} ∩ B_r| / |B_r| and the empirical constants
    C = ∫_{B_r}|u|^p / (r^p D(r)) and C' = ∫_{B_r}|u|^p / (r^p (∫_{∂B_r}|∇u|^p + I(r))).
    """
    ctr = _center(field, center)
    disc = sample_disc(field, r, None, n_theta, ctr)
    d = disc.integrate(np.linalg.norm(disc.grad, axis=1) ** p)
    if d <= 0.0:
        raise DomainError(f"D({r:g}) = 0; Poincare constant undefined")
    if zero_tol is None:
        scale = field.max_abs if isinstance(field, ScalarField) else float(np.max(np.abs(disc.u)))
        zero_tol = 1e-12 * (1.0 + scale)
    gamma_hat = float(np.sum(disc.weights[np.abs(disc.u) <= zero_tol]) / np.sum(disc.weights))
    mass = disc.integrate(_power_abs(disc.u, p))
    sample = sample_circle(field, r, n_theta, ctr)
    boundary_terms = sample.integrate(sample.grad_norm**p) + sample.integrate(_power_abs(sample.u, p))
    return PoincareProbe(
        r=float(r),
        gamma_hat=gamma_hat,
        C_hat=mass / (r**p * d),
        C_hat_boundary=mass / (r**p * boundary_terms) if boundary_terms > 0.0 else math.inf,
    )
