import numpy as np
import pytest

from lagfocal.acceptance import reduction_instance
from lagfocal.errors import InputError, RegularityError, ReductionDegeneracyError
from lagfocal.integral_reduction import (IntegralTuple, bracket_characterization_defect, brute_force_reduced_form,
                                         check_involution, curvature_report, curve_route_delta,
                                         dynamical_curvature_delta, poisson_bracket, reduced_curvature_via_theorem,
                                         reduced_distribution_frame, reduction_margin, ricci_curvature,
                                         smooth_kernel_columns, x_fields_and_upsilon)
from lagfocal.models import (energy_integral, kepler_delta, kepler_state, make_free_particle, make_kepler,
                             make_nbody_planar, make_polynomial_system, make_random_natural,
                             nbody_reduced_ricci_closed_form, random_polynomial_potential,
                             nbody_sundman_term, nbody_x_field, random_nbody_state, rotation_integral, NBodyState)
from lagfocal.symplectic_core import LagrangianFrame, check_lagrangian, standard_form


def _samples(rng, n, count=12):
    return rng.normal(size=(count, 2 * n))


def test_kepler_involution_passes():
    model, g = make_kepler()
    rng = np.random.default_rng(0)
    pts = [kepler_state(1.0 + rng.uniform(0, 2), rng.normal(), rng.normal(), rng.uniform(0, 6)) for _ in range(12)]
    rep = check_involution(model, g, pts)
    assert rep.passed and rep.samples == 12


def test_nbody_involution_passes():
    model, g = make_nbody_planar(3)
    rng = np.random.default_rng(1)
    pts = [random_nbody_state(3, rng).phase for _ in range(10)]
    assert check_involution(model, g, pts).passed


def test_position_is_not_an_integral_of_the_free_particle():
    model = make_free_particle(2)
    g = IntegralTuple(2, (lambda p, q: q[0],), (lambda p, q: np.array([0.0, 0.0, 1.0, 0.0]),))
    rng = np.random.default_rng(2)
    pts = _samples(rng, 2)
    rep = check_involution(model, g, pts)
    assert not rep.passed
    # {H, g} = p_1
    assert abs(rep.max_h_bracket - np.max(np.abs(pts[:, 0]))) < 1e-14


def test_involution_needs_ten_samples():
    model, g = make_kepler()
    with pytest.raises(InputError):
        check_involution(model, g, [kepler_state(1.0, 1.0)] * 9)


def test_poisson_bracket_sign():
    # {p, q} along (p, q) = derivative of q along the field of p, which is 1
    assert poisson_bracket(1, np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 1.0


def test_reduced_frame_without_integrals():
    model, _ = make_random_natural(2, 0)
    red = reduced_distribution_frame(model, IntegralTuple.empty(2), np.ones(4))
    assert np.array_equal(red.frame.columns, LagrangianFrame.vertical(2).columns)


def test_kepler_reduced_frame():
    model, g = make_kepler()
    z = kepler_state(1.0, 1.0)
    red = reduced_distribution_frame(model, g, z)
    assert np.allclose(np.abs(red.kernel_part[:, 0]), [1, 0, 0, 0])
    assert np.allclose(red.integral_part[:, 0], [0, 0, 0, 1])
    assert red.transversal
    assert check_lagrangian(red.frame).ok


def test_dependent_integrals_rejected():
    model, g = make_kepler()
    with pytest.raises(RegularityError):
        reduced_distribution_frame(model, g.concat(g), kepler_state(1.0, 1.0))


def test_reduced_frame_meeting_integral_field():
    # g = q_1 has g-> = (-e_1, 0), a vertical vector, so D meets span g->
    model = make_free_particle(2)
    g = IntegralTuple(2, (lambda p, q: q[0],), (lambda p, q: np.array([0.0, 0.0, 1.0, 0.0]),))
    with pytest.raises(RegularityError):
        reduced_distribution_frame(model, g, np.ones(4))


def test_nbody_x_field_closed_form():
    model, g = make_nbody_planar(3)
    rng = np.random.default_rng(3)
    for _ in range(5):
        st = random_nbody_state(3, rng)
        X, U = x_fields_and_upsilon(model, g, st.phase)
        assert np.max(np.abs(X[:, 0] - nbody_x_field(st))) < 1e-9
        # Upsilon = |q|^2 = I for unit masses
        assert abs(U[0, 0] - st.inertia) < 1e-9


def test_kepler_x_field_and_upsilon():
    model, g = make_kepler()
    X, U = x_fields_and_upsilon(model, g, kepler_state(2.0, 0.7))
    # X = -H_pp^{-1} g_p = -(0, r^2); with this sign Upsilon = g_p^T H_pp^{-1} g_p > 0
    assert np.allclose(X[:, 0], [0.0, -4.0, 0.0, 0.0])
    assert abs(abs(U[0, 0]) - 4.0) < 1e-12 and U[0, 0] > 0


def test_x_field_of_energy():
    model, _ = make_random_natural(2, 1)
    g = energy_integral(model)
    z = np.array([0.3, -0.7, 0.2, 0.5])
    X, U = x_fields_and_upsilon(model, g, z)
    Hpp = model.eval_hess(z[:2], z[2:])[:2, :2]
    Hp = model.eval_grad(z[:2], z[2:])[:2]
    assert np.allclose(X[:2, 0], -np.linalg.solve(Hpp, Hp)) and np.allclose(X[2:, 0], 0.0)
    assert abs(U[0, 0] - Hp @ np.linalg.solve(Hpp, Hp)) < 1e-12


def test_singular_upsilon_raises():
    model, _ = make_random_natural(2, 1)
    g = energy_integral(model)
    z = np.array([0.0, 0.0, 0.2, 0.5])    # H_p = p = 0
    with pytest.raises(ReductionDegeneracyError):
        x_fields_and_upsilon(model, g, z)
    with pytest.raises(ReductionDegeneracyError):
        dynamical_curvature_delta(model, g, z)
    assert reduction_margin(model, g, z) == 0.0


def test_kepler_dynamical_delta():
    model, g = make_kepler()
    for r, c in [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)]:
        d = dynamical_curvature_delta(model, g, kepler_state(r, c))
        assert np.allclose(np.abs(d.basis[:, 0]), [1, 0, 0, 0])
        assert abs(d.delta_form[0, 0] - kepler_delta(r, c)) <= 1e-8 * kepler_delta(r, c)


def test_upsilon_matches_curve_matrix():
    model, g = make_kepler()
    z = kepler_state(1.3, 0.8, p_r=0.2)
    X, U = x_fields_and_upsilon(model, g, z)
    red = curve_route_delta(model, g, z)
    assert np.max(np.abs(red.a_vectors - X)) < 1e-8
    assert np.max(np.abs(red.A - U)) < 1e-6


def test_two_path_delta_on_random_instances():
    rng = np.random.default_rng(4)
    for k in range(6):
        model, g, z = reduction_instance(rng, k % 3, 3)
        dyn = dynamical_curvature_delta(model, g, z)
        curve = curve_route_delta(model, g, z)
        K = dyn.basis
        C = np.linalg.lstsq(curve.basis, K, rcond=None)[0]
        assert np.max(np.abs(C.T @ curve.delta_form @ C - dyn.delta_form)) <= 1e-5 * max(
            1.0, np.abs(dyn.delta_form).max())


def test_delta_path_matches_brute_force():
    rng = np.random.default_rng(5)
    for k in range(4):
        model, g, z = reduction_instance(rng, k % 3, 3)
        _, reduced, K = reduced_curvature_via_theorem(model, g, z)
        brute, K2, _ = brute_force_reduced_form(model, g, z)
        assert np.allclose(K, K2)
        assert np.max(np.abs(reduced - brute)) <= 1e-5 * max(1.0, np.abs(reduced).max())


def test_delta_psd_rank_for_monotone_distribution():
    rng = np.random.default_rng(6)
    for k in range(6):
        model, g, z = reduction_instance(rng, k % 3, 3 + k % 2)
        d = dynamical_curvature_delta(model, g, z)
        assert d.min_eigenvalue() >= -1e-9 * max(1.0, np.abs(d.delta_form).max())
        assert d.rank() <= g.s


def test_bracket_characterization():
    rng = np.random.default_rng(7)
    for k in range(3):
        model, g, z = reduction_instance(rng, k, 3)
        assert bracket_characterization_defect(model, g, z) < 1e-6


def test_natural_ricci_is_laplacian():
    pot = random_polynomial_potential(3, np.random.default_rng(2))
    model = make_polynomial_system(pot)
    z = np.array([0.4, 0.1, -0.3, 0.2, -0.5, 0.1])
    rep = ricci_curvature(model, z)
    assert abs(rep.original - np.trace(pot.hess(z[3:]))) < 1e-8
    assert rep.reduced is None
    same = ricci_curvature(model, z, IntegralTuple.empty(3))
    assert same.reduced == same.original


def test_natural_curvature_form_is_hessian():
    pot = random_polynomial_potential(2, np.random.default_rng(9))
    model = make_polynomial_system(pot)
    z = np.array([0.2, -0.1, 0.6, -0.4])
    rep = curvature_report(model, z)
    assert np.max(np.abs(rep.form_on(LagrangianFrame.vertical(2).columns) - pot.hess(z[2:]))) < 1e-6


def test_sundman_term_vanishes_for_radial_impulse():
    rng = np.random.default_rng(8)
    st = random_nbody_state(3, rng)
    radial = NBodyState(3, st.q, 0.7 * st.q)
    assert abs(nbody_sundman_term(radial)) < 1e-12
    assert nbody_sundman_term(st) >= 0.0


def test_nbody_reduced_ricci_pipeline():
    model, g = make_nbody_planar(3)
    rng = np.random.default_rng(9)
    st = random_nbody_state(3, rng)
    rep = ricci_curvature(model, st.phase, g)
    assert abs(rep.reduced - nbody_reduced_ricci_closed_form(st, corrected=True)) < 1e-6 * max(1, abs(rep.reduced))
    # the displayed closed form differs by 2 U / I
    gap = rep.reduced - nbody_reduced_ricci_closed_form(st)
    assert abs(gap - 2 * st.potential / st.inertia) < 1e-6 * max(1, abs(rep.reduced))


def test_smooth_kernel_columns_span_kernel():
    rng = np.random.default_rng(10)
    model, g, z = reduction_instance(rng, 2, 3)
    cols = smooth_kernel_columns(model, g, z)
    gp = g.gradients(z)[:3]
    assert np.max(np.abs(gp.T @ cols[:3])) < 1e-12
    assert np.linalg.matrix_rank(cols, tol=1e-10) == 3 - g.s
    assert np.allclose(cols[3:], 0.0)


def test_rotation_integral_is_isotropic():
    g = rotation_integral(3, 0, 1)
    z = np.arange(1.0, 7.0)
    v = g.vector_fields(z)
    J = standard_form(3)
    assert abs(float(v[:, 0] @ J @ v[:, 0])) == 0.0
    assert g.isotropic_tuple(z).s == 1
