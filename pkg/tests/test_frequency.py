import math

import numpy as np
import pytest

from plap_freq.core.errors import DomainError, FrequencyUndefinedError
from plap_freq.core.exact import ExactSolution
from plap_freq.core.frequency import (
    I_prime_bound_check,
    I_prime_fd,
    I_prime_formula,
    boundary_I,
    bulk_D,
    bulk_mass,
    caccioppoli_ratio,
    condition_probes,
    converse_constant,
    convexity_probe,
    doubling_scan,
    energy_identity_report,
    energy_identity_residual,
    frequency_F,
    frequency_profile,
    grad_estimate_check,
    poincare_probe,
    ring_aligned_radii,
    split_estimate_check,
    uniform_radii,
    vanishing_radius,
    window_conditions,
)
from plap_freq.core.mesh import Domain, ScalarField, build_mesh
from plap_freq.core.solver import picard_solve, trig_boundary_values

X = ExactSolution.affine((1.0, 0.0), 0.0)


def abs_cos_integral(p):
    """∫_0^{2π} |cos θ|^p dθ."""
    return 2.0 * math.sqrt(math.pi) * math.gamma((p + 1.0) / 2.0) / math.gamma(p / 2.0 + 1.0)


@pytest.mark.parametrize("k", [1, 2, 3])
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_harmonic_polynomial_frequency_equals_degree(k, r):
    sol = ExactSolution.harmonic_polynomial(k)
    assert boundary_I(sol, 2.0, r) == pytest.approx(math.pi * r ** (2 * k + 1), rel=1e-12)
    assert bulk_D(sol, 2.0, r) == pytest.approx(math.pi * k * r ** (2 * k), rel=1e-12)
    assert frequency_F(sol, 2.0, r) == pytest.approx(k, rel=1e-12)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0])
def test_affine_frequency_oracle(p):
    for r in (0.25, 0.5, 0.75):
        expected = math.pi * r ** (2.0 - p) / abs_cos_integral(p)
        assert frequency_F(X, p, r) == pytest.approx(expected, rel=1e-3)


def test_radius_power_variant():
    p = 3.0
    f1 = frequency_F(X, p, 0.3, radius_power=p - 1.0)
    f2 = frequency_F(X, p, 0.6, radius_power=p - 1.0)
    assert f1 == pytest.approx(f2, rel=1e-6)
    assert f1 == pytest.approx(math.pi / abs_cos_integral(p), rel=1e-6)


def test_frequency_undefined_for_zero_field():
    assert frequency_F(ExactSolution.constant(0.0), 2.0, 0.5) is None


def test_constant_field_has_zero_frequency():
    assert frequency_F(ExactSolution.constant(2.0), 3.0, 0.5) == 0.0


def test_frequency_scale_invariance(solved_harmonic):
    field = solved_harmonic[2]
    scaled = field.scaled(7.5)
    for r in (0.3, 0.6):
        assert frequency_F(scaled, 2.0, r) == pytest.approx(frequency_F(field, 2.0, r), rel=1e-10)


@pytest.mark.parametrize("k", [1, 2])
@pytest.mark.parametrize("r", [0.2, 0.5, 0.8])
def test_solved_frequency_matches_degree(solved_harmonic, k, r):
    assert frequency_F(solved_harmonic[k], 2.0, r) == pytest.approx(k, rel=0.02)


@pytest.mark.parametrize("r", [0.3, 0.5, 0.8])
def test_solved_cubic_frequency(solved_harmonic, r):
    assert frequency_F(solved_harmonic[3], 2.0, r) == pytest.approx(3.0, rel=0.02)


def test_i_prime_formula_for_harmonic_polynomial():
    k, r = 2, 0.5
    sol = ExactSolution.harmonic_polynomial(k)
    expected = (2 * k + 1) * math.pi * r ** (2 * k)
    assert I_prime_formula(sol, 2.0, r) == pytest.approx(expected, rel=1e-10)
    assert I_prime_fd(sol, 2.0, r) == pytest.approx(expected, rel=1e-4)


@pytest.mark.parametrize(
    "sol,p",
    [
        (ExactSolution.affine((1.0, 0.0), 0.0), 3.0),
        (ExactSolution.affine((2.0, -1.0), 0.3), 1.5),
        (ExactSolution.harmonic_polynomial(3), 2.0),
        (ExactSolution.radial_fundamental(3.0, center=(2.0, 0.0)), 3.0),
    ],
)
def test_i_prime_formula_agrees_with_finite_difference(sol, p):
    for r in (0.3, 0.6):
        formula = I_prime_formula(sol, p, r, n_theta=512)
        fd = I_prime_fd(sol, p, r, dr=1e-3, n_theta=512)
        assert formula == pytest.approx(fd, rel=0.01)
        assert I_prime_bound_check(sol, p, r, n_theta=512).holds


def test_i_prime_bound_with_finite_difference():
    check = I_prime_bound_check(X, 3.0, 0.5, n_theta=512, use_fd=True, slack=1e-5)
    assert check.holds
    assert check.rhs == pytest.approx(4.0 * abs_cos_integral(3.0) * 0.5**3, rel=1e-6)


def test_i_prime_bound_on_solved_field(solved_harmonic):
    for r in (0.2, 0.5, 0.8):
        assert I_prime_bound_check(solved_harmonic[3], 2.0, r).holds


def test_i_prime_bound_is_strict_when_u_u_nu_changes_sign():
    # u = x seen from (0.2, 0): u u_ν < 0 on the arcs where -0.4 < cos θ < 0
    center = (0.2, 0.0)
    check = I_prime_bound_check(X, 2.0, 0.5, n_theta=1024, center=center)
    oracle = I_prime_bound_check(X, 2.0, 0.5, n_theta=8192, center=center)
    assert check.holds
    assert check.rhs - check.lhs > 1e-3
    assert check.rhs - check.lhs > 100.0 * check.slack
    assert check.rhs - check.lhs == pytest.approx(oracle.rhs - oracle.lhs, rel=0.01)
    assert check.lhs == pytest.approx(I_prime_fd(X, 2.0, 0.5, n_theta=1024, center=center), rel=1e-4)

    aligned = I_prime_bound_check(X, 2.0, 0.5, n_theta=1024)
    assert aligned.rhs - aligned.lhs == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize(
    "sol,p,center",
    [
        (ExactSolution.affine((2.0, 0.0), 1.0), 3.0, None),
        (ExactSolution.affine((1.0, 1.0), 0.0), 1.5, None),
        (ExactSolution.radial_fundamental(2.0, center=(2.0, 0.0)), 2.0, None),
        (ExactSolution.radial_fundamental(3.0, center=(2.0, 0.0)), 3.0, None),
        (ExactSolution.radial_fundamental(1.5), 1.5, (1.5, 0.5)),
        (ExactSolution.harmonic_polynomial(3), 2.0, None),
    ],
)
def test_energy_identity_on_exact_fields(sol, p, center):
    row = energy_identity_residual(sol, p, 0.5, center=center)
    assert row.residual <= 1e-8


def test_regularized_energy_identity_on_affine_field():
    sol = ExactSolution.affine((1.0, 2.0), -0.5)
    row = energy_identity_residual(sol, 3.0, 0.4, eps=0.01)
    assert row.residual <= 1e-10
    with pytest.raises(DomainError):
        energy_identity_residual(sol, 3.0, 0.4, eps=-1.0)


def test_energy_identity_shrinks_under_refinement(solved_harmonic):
    coarse = build_mesh(Domain.disc(1.0), 0.04)
    coarse_field, report = picard_solve(coarse, ExactSolution.harmonic_polynomial(2), 2.0)
    assert report.converged
    # 0.3, 0.5 and 0.6 lie on rings of the h = 0.02 mesh
    radii = (0.3, 0.47, 0.5, 0.6)
    coarse_worst = max(energy_identity_residual(coarse_field, 2.0, r).residual for r in radii)
    fine_worst = max(energy_identity_residual(solved_harmonic[2], 2.0, r).residual for r in radii)
    assert fine_worst <= 0.5 * coarse_worst
    assert fine_worst <= 0.02


def test_energy_identity_with_element_gradients_on_affine_field(coarse_disc):
    field = ScalarField.from_function(coarse_disc, ExactSolution.affine((1.0, -2.0), 0.5).eval)
    for recovered in (True, False):
        row = energy_identity_residual(field, 3.0, 0.5, recovered=recovered)
        assert row.residual <= 1e-10


def test_energy_identity_report_worst():
    report = energy_identity_report(ExactSolution.harmonic_polynomial(2), 2.0, [0.2, 0.4, 0.6])
    assert report.radii.tolist() == [0.2, 0.4, 0.6]
    assert report.worst == pytest.approx(float(np.max(report.residuals)))
    assert report.worst <= 1e-8


@pytest.mark.parametrize(
    "sol,p",
    [
        (ExactSolution.harmonic_polynomial(3), 2.0),
        (ExactSolution.affine((1.0, 0.0), 0.5), 3.0),
        (ExactSolution.radial_fundamental(3.0, center=(2.0, 0.0)), 3.0),
    ],
)
def test_gradient_estimate_on_exact_fields(sol, p):
    for r in (0.2, 0.5, 0.8):
        assert grad_estimate_check(sol, p, r).holds


def test_gradient_estimate_on_solved_field(solved_harmonic):
    for r in (0.3, 0.7):
        check = grad_estimate_check(solved_harmonic[2], 2.0, r)
        assert check.holds
        assert check.slack == pytest.approx(0.01 * check.rhs)


def test_profile_validation():
    with pytest.raises(DomainError):
        frequency_profile(X, 2.0, [0.5, 0.4])
    with pytest.raises(DomainError):
        frequency_profile(X, 2.0, [])


def test_profile_of_harmonic_polynomial():
    radii = uniform_radii(0.1, 0.8, 16)
    profile = frequency_profile(ExactSolution.harmonic_polynomial(2), 2.0, radii)
    assert len(profile) == 16
    assert profile.radii[-1] == pytest.approx(0.8)
    assert profile.F_defined.all()
    np.testing.assert_allclose(profile.F, 2.0, rtol=1e-10)
    np.testing.assert_allclose(profile.F, profile.radii * profile.D / profile.I, rtol=1e-15)
    assert profile.M == pytest.approx(2.0)


def test_profile_is_identical_with_workers():
    radii = uniform_radii(0.1, 0.8, 12)
    sol = ExactSolution.harmonic_polynomial(3)
    serial = frequency_profile(sol, 2.0, radii)
    threaded = frequency_profile(sol, 2.0, radii, workers=4)
    np.testing.assert_array_equal(serial.I, threaded.I)
    np.testing.assert_array_equal(serial.F, threaded.F)


def test_profile_marks_undefined_radii():
    profile = frequency_profile(ExactSolution.constant(0.0), 2.0, uniform_radii(0.1, 0.8, 8))
    assert not profile.F_defined.any()
    assert math.isnan(profile.M)
    with pytest.raises(FrequencyUndefinedError):
        doubling_scan(profile)


def test_uniform_radii_window():
    radii = uniform_radii(0.1, 0.8, 8)
    assert radii[0] > 0.1
    assert radii[-1] == pytest.approx(0.8)
    with pytest.raises(DomainError):
        uniform_radii(0.8, 0.1, 8)


def test_window_conditions():
    c1, c2 = window_conditions(2.0, 0.25, 1.0, math.e)
    assert c1 == pytest.approx(1.0)
    assert c2 == pytest.approx(2.0)
    c1, c2 = window_conditions(3.0, 1.0 / 3.0, 1.0, 4.0)
    assert c2 == pytest.approx(4.0)
    assert window_conditions(2.0, math.inf, 1.0, 2.0)[1] == 0.0


def test_doubling_on_harmonic_polynomial():
    profile = frequency_profile(ExactSolution.harmonic_polynomial(2), 2.0, uniform_radii(0.1, 0.8, 64))
    report = doubling_scan(profile)
    assert report.eps0 == 1.0 / (4.0 * 2.0 * report.M)
    assert report.passed
    assert report.max_ratio <= 4.0
    assert report.r_star <= report.r0
    for s in profile.radii[profile.radii <= report.r0]:
        c1, c2 = window_conditions(2.0, report.eps0, profile.radii[0], s)
        assert c1 <= 0.25 and c2 <= 0.25
    assert report.to_dict()["pass"] is True


def test_doubling_with_vanishing_frequency():
    profile = frequency_profile(ExactSolution.constant(1.0), 2.0, uniform_radii(0.1, 0.8, 32))
    report = doubling_scan(profile)
    assert report.M == 0.0
    assert math.isinf(report.eps0)
    assert report.r0 <= profile.radii[0] * math.exp(0.25)
    assert report.passed
    assert report.pairwise_max_ratio == pytest.approx(report.r_star / profile.radii[0])


def test_doubling_on_solved_field(solved_harmonic):
    profile = frequency_profile(solved_harmonic[2], 2.0, uniform_radii(0.1, 0.8, 32))
    report = doubling_scan(profile)
    assert report.passed
    assert report.M == pytest.approx(2.0, rel=0.05)

    scaled = doubling_scan(frequency_profile(solved_harmonic[2].scaled(0.01), 2.0, profile.radii))
    np.testing.assert_allclose(scaled.ratios, report.ratios, rtol=1e-10)


def test_split_estimate_holds_for_smooth_profile():
    profile = frequency_profile(ExactSolution.harmonic_polynomial(2), 2.0, uniform_radii(0.1, 0.8, 24))
    check = split_estimate_check(profile)
    assert check.holds
    assert check.pairs_checked > 0


def test_converse_constant():
    profile = frequency_profile(ExactSolution.harmonic_polynomial(2), 2.0, uniform_radii(0.1, 0.8, 8))
    r_star = profile.radii[-1]
    value = converse_constant(profile, r_star)
    r = profile.radii[0]
    assert value >= 2.0 * (r_star - r) ** 2 / (r * r_star) - 1e-12
    assert converse_constant(profile, profile.radii[0]) == 0.0


def test_vanishing_radius():
    radii = uniform_radii(0.1, 0.8, 8)
    assert vanishing_radius(ExactSolution.constant(0.0), 1e-12, radii) == pytest.approx(0.8)
    assert vanishing_radius(ExactSolution.harmonic_polynomial(2), 1e-12, radii) == 0.0


def test_vanishing_radius_of_field_flat_on_inner_disc(disc_mesh):
    field = ScalarField.from_function(disc_mesh, lambda x: np.maximum(np.linalg.norm(x, axis=1) - 0.5, 0.0))
    radii = uniform_radii(0.1, 0.8, 14)
    s = vanishing_radius(field, 1e-12, radii)
    assert s == pytest.approx(0.5, abs=radii[1] - radii[0] + 1e-12)
    assert vanishing_radius(X, 1e-12, radii) == 0.0


@pytest.mark.parametrize("factor", [7.5, -0.01])
def test_ratios_are_scale_invariant(solved_harmonic, factor):
    field = solved_harmonic[2]
    scaled = field.scaled(factor)
    p = 3.0
    expected = caccioppoli_ratio(field, p, 0.3, 0.6)
    assert caccioppoli_ratio(scaled, p, 0.3, 0.6) == pytest.approx(expected, rel=1e-10)
    base, other = condition_probes(field, p, 0.5), condition_probes(scaled, p, 0.5)
    assert other.A1 == pytest.approx(base.A1, rel=1e-10)
    assert other.A2 == pytest.approx(base.A2, rel=1e-10)
    base, other = poincare_probe(field, p, 0.5), poincare_probe(scaled, p, 0.5)
    assert other.C_hat == pytest.approx(base.C_hat, rel=1e-10)
    assert other.C_hat_boundary == pytest.approx(base.C_hat_boundary, rel=1e-10)


def test_caccioppoli_ratio_for_linear_field():
    ratio = caccioppoli_ratio(X, 2.0, 0.4, 0.8)
    assert ratio == pytest.approx(0.25, rel=1e-10)
    with pytest.raises(DomainError):
        caccioppoli_ratio(X, 2.0, 0.8, 0.4)
    with pytest.raises(DomainError):
        caccioppoli_ratio(ExactSolution.constant(0.0), 2.0, 0.2, 0.4)


def test_condition_probes_for_linear_field():
    probe = condition_probes(X, 2.0, 0.5)
    assert probe.A1 == pytest.approx(8.0)
    assert probe.A2 == pytest.approx(0.25)
    with pytest.raises(FrequencyUndefinedError):
        condition_probes(ExactSolution.constant(0.0), 2.0, 0.5)


def test_bulk_mass_of_linear_field():
    assert bulk_mass(X, 2.0, 0.8) == pytest.approx(math.pi * 0.8**4 / 4.0, rel=1e-12)


def test_convexity_on_harmonic_polynomial():
    report = convexity_probe(ExactSolution.harmonic_polynomial(2), uniform_radii(0.1, 0.8, 32))
    assert report.all_ok
    with pytest.raises(DomainError):
        convexity_probe(X, uniform_radii(0.1, 0.8, 32), p=3.0)
    with pytest.raises(DomainError):
        convexity_probe(X, [0.1, 0.2])


def test_convexity_on_solved_field(fine_disc):
    coeffs = np.array([[0.0, 0.0], [1.0, 0.5], [0.1, 0.05], [0.02, -0.03]])
    field, report = picard_solve(fine_disc, trig_boundary_values(fine_disc, coeffs), 2.0)
    assert report.converged
    radii = ring_aligned_radii(field, 0.1, 0.8)
    assert radii.size >= 32
    assert convexity_probe(field, radii).all_ok


def test_poincare_probe_on_half_plane_field(disc_mesh):
    field = ScalarField.from_function(disc_mesh, lambda x: np.maximum(x[:, 0], 0.0))
    probe = poincare_probe(field, 2.0, 0.5)
    assert probe.gamma_hat == pytest.approx(0.5, abs=0.05)
    assert probe.C_hat > 0.0
    assert probe.C_hat_boundary > 0.0
    with pytest.raises(DomainError):
        poincare_probe(ScalarField(disc_mesh, np.ones(disc_mesh.num_vertices)), 2.0, 0.5)


def test_poincare_probe_without_zero_set():
    probe = poincare_probe(X, 2.0, 0.5)
    assert probe.gamma_hat == pytest.approx(0.0, abs=0.01)
    # ∫x² / (r² ∫1) = (πr⁴/4)/(r²·πr²)
    assert probe.C_hat == pytest.approx(0.25, rel=1e-10)
