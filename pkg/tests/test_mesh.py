import math

import numpy as np
import pytest

from conftest import ring_points
from plap_freq.core.errors import DomainError, MeshError, OutsideMeshError
from plap_freq.core.exact import ExactSolution
from plap_freq.core.mesh import (
    BoundaryFlag,
    Domain,
    ScalarField,
    build_mesh,
    element_gradient,
    interpolate,
    sample_circle,
)


def test_coarsest_disc_mesh():
    mesh = build_mesh(Domain.disc(1.0), 0.5)
    # center + rings of 6 and round(4π) = 13 nodes
    assert mesh.num_vertices == 20
    assert mesh.boundary_index.size == 13
    assert np.all(mesh.signed_areas > 0.0)


@pytest.mark.parametrize("h", [0.0, -0.1, 0.6])
def test_mesh_size_out_of_range(h):
    with pytest.raises(MeshError):
        build_mesh(Domain.disc(1.0), h)


def test_disc_area_matches_boundary_polygon(disc_mesh):
    n = disc_mesh.boundary_index.size
    polygon = 0.5 * n * math.sin(2.0 * math.pi / n)
    assert disc_mesh.areas.sum() == pytest.approx(polygon, rel=1e-12)
    assert abs(disc_mesh.areas.sum() - math.pi) < 0.01


def test_boundary_vertices_lie_on_circle(disc_mesh):
    radii = np.linalg.norm(disc_mesh.vertices[disc_mesh.boundary_index], axis=1)
    np.testing.assert_allclose(radii, 1.0, atol=1e-14)


def test_annulus_flags():
    mesh = build_mesh(Domain.annulus(0.5, 1.0), 0.1)
    radii = np.linalg.norm(mesh.vertices, axis=1)
    inner = mesh.boundary_flags == BoundaryFlag.INNER
    outer = mesh.boundary_flags == BoundaryFlag.OUTER
    np.testing.assert_allclose(radii[inner], 0.5)
    np.testing.assert_allclose(radii[outer], 1.0)
    assert np.all(mesh.signed_areas > 0.0)
    assert mesh.areas.sum() == pytest.approx(0.75 * math.pi, rel=0.01)


def test_domain_validation():
    with pytest.raises(DomainError):
        Domain.annulus(1.0, 0.5)
    with pytest.raises(DomainError):
        Domain.disc(-1.0)


def test_mesh_arrays_are_read_only(coarse_disc):
    with pytest.raises(ValueError):
        coarse_disc.vertices[0, 0] = 3.0


def test_jitter_moves_interior_vertices_only():
    plain = build_mesh(Domain.disc(1.0), 0.1)
    jittered = build_mesh(Domain.disc(1.0), 0.1, seed=3)
    b = plain.boundary_index
    np.testing.assert_array_equal(plain.vertices[b], jittered.vertices[b])
    assert not np.allclose(plain.vertices, jittered.vertices)
    np.testing.assert_array_equal(plain.triangles, jittered.triangles)
    assert np.all(jittered.signed_areas > 0.0)


def test_locate_centroids(disc_mesh):
    tri, bary = disc_mesh.locate(disc_mesh.centroids[:50])
    np.testing.assert_array_equal(tri, np.arange(50))
    np.testing.assert_allclose(bary, 1.0 / 3.0, atol=1e-12)


def test_locate_outside_names_point(disc_mesh):
    with pytest.raises(OutsideMeshError, match="2"):
        disc_mesh.locate([2.0, 0.0])


def test_affine_field_is_reproduced(disc_mesh, rng):
    sol = ExactSolution.affine((2.0, -1.0), 0.5)
    field = ScalarField.from_function(disc_mesh, sol.eval)
    points = ring_points(rng, 300, 0.0, 0.9)
    np.testing.assert_allclose(field.eval(points), sol.eval(points), atol=1e-12)
    np.testing.assert_allclose(field.grad(points), sol.grad(points), atol=1e-10)
    assert isinstance(interpolate(field, [0.1, 0.2]), float)
    np.testing.assert_allclose(element_gradient(field, 0), [2.0, -1.0], atol=1e-10)


def test_element_gradient_out_of_range(coarse_disc):
    field = ScalarField(coarse_disc, np.zeros(coarse_disc.num_vertices))
    with pytest.raises(IndexError):
        element_gradient(field, coarse_disc.num_triangles)


def test_field_shape_and_finiteness(coarse_disc):
    with pytest.raises(DomainError):
        ScalarField(coarse_disc, np.zeros(3))
    values = np.zeros(coarse_disc.num_vertices)
    values[0] = np.nan
    with pytest.raises(DomainError):
        ScalarField(coarse_disc, values)


def test_circle_sample_integrates_trig_polynomials_exactly():
    sol = ExactSolution.affine((1.0, 0.0), 0.0)
    sample = sample_circle(sol, 0.5, 256)
    assert sample.integrate(sample.u**2) == pytest.approx(math.pi * 0.5**3, rel=1e-13)
    np.testing.assert_allclose(sample.u_nu, np.cos(sample.theta))
    assert sample.weight * 256 == pytest.approx(math.pi)


def test_circle_sample_needs_enough_nodes():
    with pytest.raises(DomainError):
        sample_circle(ExactSolution.constant(1.0), 0.5, 32)


def test_circle_sample_of_discrete_field(disc_mesh):
    sol = ExactSolution.affine((0.0, 3.0), 0.0)
    field = ScalarField.from_function(disc_mesh, sol.eval)
    sample = sample_circle(field, 0.7, 128)
    assert sample.center == (0.0, 0.0)
    np.testing.assert_allclose(sample.grad, np.tile([0.0, 3.0], (128, 1)), atol=1e-10)


def test_samples_of_x_squared(fine_disc):
    field = ScalarField.from_function(fine_disc, lambda x: x[:, 0] ** 2)
    assert interpolate(field, [0.3, 0.4]) == pytest.approx(0.09, abs=1e-3)
    tri, _ = fine_disc.locate([0.5, 0.0])
    assert element_gradient(field, int(tri[0]))[0] == pytest.approx(1.0, abs=0.05)


def test_circle_sample_of_homogeneous_quadratic(fine_disc):
    field = ScalarField.from_function(fine_disc, ExactSolution.harmonic_polynomial(2).eval)
    sample = sample_circle(field, 0.5, 256)
    expected = np.cos(2.0 * sample.theta)
    np.testing.assert_allclose(2.0 * sample.u / 0.5, expected, atol=1e-3)
    np.testing.assert_allclose(sample.u_nu, expected, atol=0.05)


@pytest.mark.parametrize(
    "sol,domain",
    [
        (ExactSolution.harmonic_polynomial(2), Domain.disc(1.0)),
        (ExactSolution.harmonic_polynomial(3), Domain.disc(1.0)),
        (ExactSolution.radial_fundamental(3.0), Domain.annulus(0.3, 1.0)),
    ],
)
def test_interpolation_error_is_second_order(sol, domain, rng):
    lo = domain.r_inner + 0.05
    points = ring_points(rng, 4000, lo, 0.95)
    errors = []
    for h in (0.1, 0.05):
        field = ScalarField.from_function(build_mesh(domain, h), sol.eval)
        errors.append(float(np.max(np.abs(field.eval(points) - sol.eval(points)))))
    assert errors[1] * 3.0 <= errors[0]


def test_recovered_gradient(disc_mesh, rng):
    points = ring_points(rng, 2000, 0.0, 0.9)
    affine = ExactSolution.affine((2.0, -1.0), 0.5)
    recovered = ScalarField.from_function(disc_mesh, affine.eval).with_recovered_gradient()
    np.testing.assert_allclose(recovered.grad(points), affine.grad(points), atol=1e-10)

    quadratic = ExactSolution.harmonic_polynomial(2)
    field = ScalarField.from_function(disc_mesh, quadratic.eval)
    exact = quadratic.grad(points)
    np.testing.assert_array_equal(field.with_recovered_gradient().eval(points), field.eval(points))
    element_err = np.linalg.norm(field.grad(points) - exact, axis=1)
    recovered_err = np.linalg.norm(field.with_recovered_gradient().grad(points) - exact, axis=1)
    assert np.sqrt(np.mean(recovered_err**2)) <= 0.5 * np.sqrt(np.mean(element_err**2))
