"""
Ring meshes of discs and annuli, piecewise-linear fields and circle sampling.

The triangulation is a structured polar one: concentric rings equispaced in
radius, each ring carrying a node count proportional to its circumference,
and neighbouring rings stitched by an angular merge. Node counts are rounded
per ring so that triangles keep an aspect ratio near one at every radius.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum, IntEnum
from functools import cached_property
from typing import Protocol, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import DomainError, MeshError, OutsideMeshError
from .exact import as_points

logger = logging.getLogger(__name__)

MIN_RING_NODES = 6
MIN_CIRCLE_SAMPLES = 64
# Barycentric slack for point location, i.e. about h * 1e-6 in distance
LOCATE_TOL = 1e-6
_CANDIDATES = (8, 32)


class PointField(Protocol):
    """Anything with vectorized value and gradient evaluation."""

    def eval(self, x: np.ndarray) -> np.ndarray: ...

    def grad(self, x: np.ndarray) -> np.ndarray: ...


class DomainKind(str, Enum):
    DISC = "disc"
    ANNULUS = "annulus"


class BoundaryFlag(IntEnum):
    INTERIOR = 0
    OUTER = 1
    INNER = 2


@dataclass(frozen=True)
class Domain:
    kind: DomainKind = DomainKind.DISC
    center: tuple[float, float] = (0.0, 0.0)
    r_outer: float = 1.0
    r_inner: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "kind", DomainKind(self.kind))
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if len(self.center) != 2:
            raise DomainError(f"Domain center must be a 2-d point, got {self.center}")
        if not self.r_outer > 0.0:
            raise DomainError(f"Outer radius must be positive, got {self.r_outer}")
        if self.kind is DomainKind.DISC and self.r_inner != 0.0:
            raise DomainError("A disc has no inner radius")
        if self.kind is DomainKind.ANNULUS and not 0.0 < self.r_inner < self.r_outer:
            raise DomainError(
                f"Annulus needs 0 < r_inner < r_outer, got {self.r_inner}, {self.r_outer}"
            )

    @classmethod
    def disc(cls, radius: float = 1.0, center: Sequence[float] = (0.0, 0.0)) -> Domain:
        return cls(DomainKind.DISC, tuple(center), float(radius), 0.0)

    @classmethod
    def annulus(
        cls, r_inner: float, r_outer: float, center: Sequence[float] = (0.0, 0.0)
    ) -> Domain:
        return cls(DomainKind.ANNULUS, tuple(center), float(r_outer), float(r_inner))

    @property
    def width(self) -> float:
        return self.r_outer - self.r_inner

    @property
    def area(self) -> float:
        return math.pi * (self.r_outer**2 - self.r_inner**2)


@dataclass(frozen=True, eq=False)
class TriMesh:
    vertices: np.ndarray
    triangles: np.ndarray
    boundary_flags: np.ndarray
    h: float
    domain: Domain
    ring_radii: np.ndarray

    def __post_init__(self) -> None:
        for arr in (self.vertices, self.triangles, self.boundary_flags, self.ring_radii):
            arr.setflags(write=False)

    @property
    def num_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def num_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @cached_property
    def signed_areas(self) -> np.ndarray:
        p0, p1, p2 = (self.vertices[self.triangles[:, i]] for i in range(3))
        e1, e2 = p1 - p0, p2 - p0
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @cached_property
    def areas(self) -> np.ndarray:
        return np.abs(self.signed_areas)

    @cached_property
    def centroids(self) -> np.ndarray:
        return self.vertices[self.triangles].mean(axis=1)

    @cached_property
    def basis_gradients(self) -> np.ndarray:
        """Gradients of the three hat functions on every triangle, shape (T, 3, 2)."""
        x = self.vertices[self.triangles, 0]
        y = self.vertices[self.triangles, 1]
        two_area = 2.0 * self.signed_areas
        grads = np.empty((self.num_triangles, 3, 2))
        for i in range(3):
            j, k = (i + 1) % 3, (i + 2) % 3
            grads[:, i, 0] = (y[:, j] - y[:, k]) / two_area
            grads[:, i, 1] = (x[:, k] - x[:, j]) / two_area
        return grads

    @cached_property
    def boundary_index(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_flags != BoundaryFlag.INTERIOR)

    @cached_property
    def interior_index(self) -> np.ndarray:
        return np.flatnonzero(self.boundary_flags == BoundaryFlag.INTERIOR)

    @cached_property
    def _centroid_tree(self) -> cKDTree:
        return cKDTree(self.centroids)

    def _barycentric(self, points: np.ndarray, cand: np.ndarray) -> np.ndarray:
        # φ_j is affine and equals 1/3 at the centroid
        offset = points[:, np.newaxis, :] - self.centroids[cand]
        return 1.0 / 3.0 + np.einsum("mkjd,mkd->mkj", self.basis_gradients[cand], offset)

    def _pick(self, bary: np.ndarray, cand: np.ndarray) -> np.ndarray:
        inside = np.all(bary >= -LOCATE_TOL, axis=2)
        ranked = np.where(inside, cand, np.iinfo(np.int64).max)
        return ranked.min(axis=1)

    def locate(self, x: np.ndarray | Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
        """
        Containing triangle and barycentric coordinates for every point.

        Points on shared edges resolve to the triangle with the lower index.
        """
        points = as_points(x)
        missing = np.iinfo(np.int64).max
        tri = np.full(points.shape[0], missing, dtype=np.int64)
        todo = np.arange(points.shape[0])
        for k in _CANDIDATES:
            if todo.size == 0:
                break
            k = min(k, self.num_triangles)
            _, cand = self._centroid_tree.query(points[todo], k=k)
            cand = np.asarray(cand, dtype=np.int64).reshape(todo.size, k)
            tri[todo] = self._pick(self._barycentric(points[todo], cand), cand)
            todo = todo[tri[todo] == missing]
        for idx in todo:
            # last resort: every triangle
            cand = np.arange(self.num_triangles)[np.newaxis, :]
            tri[idx] = self._pick(self._barycentric(points[idx : idx + 1], cand), cand)[0]
            if tri[idx] == missing:
                raise OutsideMeshError(points[idx])
        bary = self._barycentric(points, tri[:, np.newaxis])[:, 0, :]
        return tri, bary


def _ring_counts(radii: np.ndarray, h: float) -> list[int]:
    return [max(MIN_RING_NODES, int(round(2.0 * math.pi * r / h))) for r in radii]


def _stitch(inner: np.ndarray, outer: np.ndarray) -> list[tuple[int, int, int]]:
    """Triangulate the strip between two rings by merging their angular orders."""
    na, nb = len(inner), len(outer)
    tris: list[tuple[int, int, int]] = []
    i = j = 0
    while i < na or j < nb:
        advance_inner = j >= nb or (i < na and (i + 1) * nb <= (j + 1) * na)
        if advance_inner:
            tris.append((int(inner[i]), int(outer[j % nb]), int(inner[(i + 1) % na])))
            i += 1
        else:
            tris.append((int(inner[i % na]), int(outer[j]), int(outer[(j + 1) % nb])))
            j += 1
    return tris


def build_mesh(domain: Domain, h: float, seed: int = 0) -> TriMesh:
    """
    Build a conforming ring triangulation of ``domain`` with target edge length ``h``.

    A nonzero ``seed`` jitters interior vertices by up to 0.1 h.
    """
    if not 0.0 < h <= domain.width / 2.0:
        raise MeshError(
            f"Mesh size h = {h} must satisfy 0 < h <= {domain.width / 2.0} for this domain"
        )
    num_intervals = int(math.ceil(domain.width / h - 1e-9))
    radii = domain.r_inner + domain.width * np.arange(num_intervals + 1) / num_intervals
    cx, cy = domain.center

    points: list[np.ndarray] = []
    flags: list[np.ndarray] = []
    rings: list[np.ndarray] = []
    offset = 0
    if domain.kind is DomainKind.DISC:
        points.append(np.array([[cx, cy]]))
        flags.append(np.array([BoundaryFlag.INTERIOR]))
        offset = 1
        ring_radii = radii[1:]
    else:
        ring_radii = radii

    counts = _ring_counts(ring_radii, h)
    last = len(ring_radii) - 1
    for idx, (radius, count) in enumerate(zip(ring_radii, counts)):
        theta = 2.0 * math.pi * np.arange(count) / count
        points.append(np.column_stack([cx + radius * np.cos(theta), cy + radius * np.sin(theta)]))
        if idx == last:
            flag = BoundaryFlag.OUTER
        elif idx == 0 and domain.kind is DomainKind.ANNULUS:
            flag = BoundaryFlag.INNER
        else:
            flag = BoundaryFlag.INTERIOR
        flags.append(np.full(count, flag))
        rings.append(offset + np.arange(count))
        offset += count

    triangles: list[tuple[int, int, int]] = []
    if domain.kind is DomainKind.DISC:
        first = rings[0]
        triangles.extend((0, int(first[i]), int(first[(i + 1) % len(first)])) for i in range(len(first)))
    for inner, outer in zip(rings[:-1], rings[1:]):
        triangles.extend(_stitch(inner, outer))

    vertices = np.vstack(points)
    boundary_flags = np.concatenate(flags).astype(np.int8)
    if seed:
        rng = np.random.default_rng(seed)
        interior = boundary_flags == BoundaryFlag.INTERIOR
        vertices[interior] += 0.1 * h * rng.uniform(-1.0, 1.0, size=(int(interior.sum()), 2))

    mesh = TriMesh(
        vertices=vertices,
        triangles=np.asarray(triangles, dtype=np.int64),
        boundary_flags=boundary_flags,
        h=float(h),
        domain=domain,
        ring_radii=np.asarray(ring_radii, dtype=float),
    )
    if np.any(mesh.signed_areas <= 0.0):
        bad = int(np.flatnonzero(mesh.signed_areas <= 0.0)[0])
        raise MeshError(f"Triangle {bad} is degenerate or inverted")
    logger.info(
        f"{domain.kind.value} mesh: h={h}, {mesh.num_vertices} vertices, "
        f"{mesh.num_triangles} triangles, {len(ring_radii)} rings"
    )
    return mesh


@dataclass(frozen=True, eq=False)
class ScalarField:
    """Piecewise-linear nodal field on a TriMesh."""

    mesh: TriMesh
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.shape != (self.mesh.num_vertices,):
            raise DomainError(
                f"Field has {values.size} values for {self.mesh.num_vertices} vertices"
            )
        if not np.all(np.isfinite(values)):
            raise DomainError("Field values must be finite")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, mesh: TriMesh, func) -> ScalarField:
        """Nodal samples of ``func`` (any callable mapping (N, 2) points to N values)."""
        return cls(mesh, np.asarray(func(mesh.vertices), dtype=float))

    @cached_property
    def element_gradients(self) -> np.ndarray:
        return np.einsum("tjd,tj->td", self.mesh.basis_gradients, self.values[self.mesh.triangles])

    @property
    def max_abs(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def scaled(self, factor: float) -> ScalarField:
        return ScalarField(self.mesh, factor * self.values)

    def eval(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        tri, bary = self.mesh.locate(x)
        return np.einsum("mj,mj->m", bary, self.values[self.mesh.triangles[tri]])

    def grad(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        tri, _ = self.mesh.locate(x)
        return self.element_gradients[tri]

    @cached_property
    def nodal_gradients(self) -> np.ndarray:
        """Area-weighted average of the element gradients around every vertex."""
        mesh = self.mesh
        nodes = mesh.triangles.ravel()
        mass = np.bincount(nodes, np.repeat(mesh.areas, 3), minlength=mesh.num_vertices)
        weighted = mesh.areas[:, None] * self.element_gradients
        sums = np.column_stack(
            [np.bincount(nodes, np.repeat(weighted[:, d], 3), minlength=mesh.num_vertices) for d in range(2)]
        )
        return sums / mass[:, None]

    def with_recovered_gradient(self) -> RecoveredScalarField:
        return RecoveredScalarField(self.mesh, self.values)


class RecoveredScalarField(ScalarField):
    """
    The same nodal field, with ``grad`` the piecewise-linear interpolant of the
    nodal gradients instead of the element gradient.

    Circle and disc samples then see a continuous gradient, so a circle lying
    on a mesh ring no longer picks up the gradient of one strip only.
    """

    def grad(self, x: np.ndarray | Sequence[float]) -> np.ndarray:
        tri, bary = self.mesh.locate(x)
        return np.einsum("mj,mjd->md", bary, self.nodal_gradients[self.mesh.triangles[tri]])


def interpolate(field: ScalarField, x: np.ndarray | Sequence[float]) -> float | np.ndarray:
    """Barycentric interpolation; a single point gives a float."""
    values = field.eval(x)
    return float(values[0]) if np.ndim(x) == 1 else values


def element_gradient(field: ScalarField, triangle: int) -> np.ndarray:
    if not 0 <= triangle < field.mesh.num_triangles:
        raise IndexError(f"Triangle index {triangle} out of range")
    return field.element_gradients[triangle].copy()


def default_center(field: PointField) -> tuple[float, float]:
    mesh = getattr(field, "mesh", None)
    if isinstance(mesh, TriMesh):
        return mesh.domain.center
    return (0.0, 0.0)


@dataclass(frozen=True)
class CircleSample:
    r: float
    center: tuple[float, float]
    theta: np.ndarray
    u: np.ndarray
    grad: np.ndarray
    u_nu: np.ndarray

    @property
    def weight(self) -> float:
        """Trapezoid weight in arc length; sums to 2πr."""
        return 2.0 * math.pi * self.r / self.theta.size

    def integrate(self, values: np.ndarray) -> float:
        return float(self.weight * np.sum(values))

    @property
    def grad_norm(self) -> np.ndarray:
        return np.linalg.norm(self.grad, axis=1)


def circle_points(center: Sequence[float], r: float, n_theta: int) -> tuple[np.ndarray, np.ndarray]:
    theta = 2.0 * math.pi * np.arange(n_theta) / n_theta
    normals = np.column_stack([np.cos(theta), np.sin(theta)])
    return theta, np.asarray(center, dtype=float) + r * normals


def sample_circle(
    field: PointField,
    r: float,
    n_theta: int = 256,
    center: Sequence[float] | None = None,
) -> CircleSample:
    """Values, gradients and u_ν = ∇u·ν at θ_j = 2πj/N_θ on the circle of radius r."""
    if n_theta < MIN_CIRCLE_SAMPLES:
        raise DomainError(f"Circle sampling needs at least {MIN_CIRCLE_SAMPLES} nodes, got {n_theta}")
    if not r > 0.0:
        raise DomainError(f"Circle radius must be positive, got {r}")
    ctr = tuple(center) if center is not None else default_center(field)
    theta, points = circle_points(ctr, r, n_theta)
    normals = (points - np.asarray(ctr)) / r
    u = np.asarray(field.eval(points), dtype=float)
    grad = np.asarray(field.grad(points), dtype=float)
    return CircleSample(
        r=float(r),
        center=ctr,
        theta=theta,
        u=u,
        grad=grad,
        u_nu=np.einsum("nd,nd->n", grad, normals),
    )
