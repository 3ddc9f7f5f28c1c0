import numpy as np
import pytest

from lagfocal.acceptance import random_regular_jet, random_symplectic
from lagfocal.errors import ChartError, RegularityError, ReductionDegeneracyError
from lagfocal.hamiltonian_flow import jacobi_jet
from lagfocal.integral_reduction import IntegralTuple
from lagfocal.jacobi_geometry import (AccuracyWarning, CoordCurveJet, block_structure_defects, change_chart,
                                      coordinate_jet, curvature_via_derivative_curve, curve_reduction_delta,
                                      derivative_subspace, matrix_schwarzian, mobius_transform,
                                      reduce_coordinate_curve)
from lagfocal.models import (kepler_delta, kepler_reduced_curvature, kepler_state, make_kepler, make_oscillator,
                             make_random_natural)
from lagfocal.symplectic_core import (IsotropicTuple, LagrangianFrame, SymplecticSpace, adapted_darboux_basis,
                                      check_lagrangian, intersection_dimension, symplectic_inverse,
                                      transversality_ratio)


def _samples(frame_of_t, tau=0.0, h=1e-2):
    return [(tau + k * h, frame_of_t(tau + k * h)) for k in range(-3, 4)]


def _graph_curve(S_of_t):
    return lambda t: LagrangianFrame.graph(S_of_t(t))


def _jet(S, S1, S2, S3):
    n = np.atleast_2d(S).shape[0]
    return CoordCurveJet(0.0, *(np.atleast_2d(np.asarray(M, dtype=float)) for M in (S, S1, S2, S3)),
                         basis_change=np.eye(2 * n))


def test_jet_of_linear_curve():
    jet = coordinate_jet(_samples(_graph_curve(lambda t: t * np.eye(2))), 0.0)
    assert np.allclose(jet.S1, np.eye(2), atol=1e-12)
    assert np.allclose(jet.S2, 0.0, atol=1e-9)
    assert np.allclose(jet.S3, 0.0, atol=1e-7)


def test_jet_of_tangent():
    jet = coordinate_jet(_samples(_graph_curve(lambda t: np.array([[np.tan(t)]]))), 0.0)
    assert abs(jet.S1[0, 0] - 1.0) < 1e-9
    assert abs(jet.S2[0, 0]) < 1e-9
    assert abs(jet.S3[0, 0] - 2.0) < 1e-6


def test_jet_rotates_chart_at_vertical_tangency():
    # span(sin t, cos t) is the fibre {(0, y)} at t = 0, so the identity chart fails there
    curve = lambda t: LagrangianFrame.from_columns(np.array([[np.sin(t)], [np.cos(t)]]))
    jet = coordinate_jet(_samples(curve, h=3e-3), 0.0)
    assert not np.allclose(jet.basis_change, np.eye(2))
    assert jet.symmetry_defect() < 1e-8
    assert abs(matrix_schwarzian(jet).operator[0, 0] - 1.0) < 1e-6


def test_jet_requires_symmetric_stencil():
    samples = _samples(_graph_curve(lambda t: t * np.eye(1)))
    with pytest.raises(ValueError):
        coordinate_jet(samples[:6], 0.0)
    with pytest.raises(ValueError):
        coordinate_jet(samples, 0.001)


def test_coarse_stencil_warns():
    with pytest.warns(AccuracyWarning):
        coordinate_jet(_samples(_graph_curve(lambda t: np.array([[np.tan(t)]])), h=0.2), 0.0)


def test_schwarzian_of_tangent_is_one():
    rep = matrix_schwarzian(_jet(0, 1, 0, 2))
    assert abs(rep.operator[0, 0] - 1.0) < 1e-14
    assert abs(rep.form[0, 0] + 1.0) < 1e-14
    assert rep.ricci == np.trace(rep.operator)


def test_schwarzian_of_affine_curve_vanishes():
    A = np.array([[2.0, 0.3], [0.3, 1.0]])
    rep = matrix_schwarzian(_jet(np.zeros((2, 2)), A, np.zeros((2, 2)), np.zeros((2, 2))))
    assert np.allclose(rep.operator, 0.0)


def test_form_equals_minus_velocity_times_operator():
    rng = np.random.default_rng(0)
    for n in (1, 2, 3, 4):
        jet = random_regular_jet(n, rng)
        rep = matrix_schwarzian(jet)
        assert np.max(np.abs(rep.form - (-jet.S1 @ rep.operator))) < 1e-8 * max(1.0, np.abs(rep.form).max())
        assert np.allclose(rep.form, rep.form.T)


def test_scalar_schwarzian_moebius_invariance():
    # S(t) = tan t composed with (a S + b) / (c S + d), ad - bc = 1
    a, b, c, d = 2.0, 1.0, 0.5, 0.75
    f = lambda t: np.array([[(a * np.tan(t) + b) / (c * np.tan(t) + d)]])
    jet = coordinate_jet(_samples(_graph_curve(f), h=5e-3), 0.0)
    assert abs(matrix_schwarzian(jet).operator[0, 0] - 1.0) < 1e-6


def test_singular_velocity_is_irregular():
    with pytest.raises(RegularityError):
        matrix_schwarzian(_jet(np.zeros((2, 2)), np.diag([1.0, 0.0]), np.eye(2), np.eye(2)))


def test_mobius_identity_blocks():
    S = np.array([[1.0, 0.2], [0.2, -0.5]])
    I, Z = np.eye(2), np.zeros((2, 2))
    assert np.allclose(mobius_transform(S, I, Z, Z, I), S)


def test_mobius_inverse_recovers_S():
    rng = np.random.default_rng(1)
    for n in (1, 2, 3):
        M = random_symplectic(n, rng)
        Mi = symplectic_inverse(M)
        A = rng.normal(size=(n, n))
        S = 0.5 * (A + A.T)
        # graph {(x, S x)} has frame [I; S]; new frame M [I; S] = [A + B S; C + D S]
        A1, B1, C1, D1 = M[:n, :n], M[:n, n:], M[n:, :n], M[n:, n:]
        A2, B2, C2, D2 = Mi[:n, :n], Mi[:n, n:], Mi[n:, :n], Mi[n:, n:]
        S1 = mobius_transform(S, A1, B1, C1, D1)
        assert np.allclose(S1, S1.T, atol=1e-8)
        assert np.max(np.abs(mobius_transform(S1, A2, B2, C2, D2) - S)) < 1e-10


def test_mobius_rejects_nonsymplectic_blocks():
    I = np.eye(1)
    with pytest.raises(ValueError):
        mobius_transform(I, 2 * I, 0 * I, 0 * I, 2 * I)


def test_mobius_non_invertible_chart():
    I, Z = np.eye(1), np.zeros((1, 1))
    with pytest.raises(ChartError):
        mobius_transform(-I, I, I, Z, I)


def test_chart_change_gives_similar_operator():
    rng = np.random.default_rng(2)
    for n in (1, 2, 3):
        jet = random_regular_jet(n, rng)
        new = change_chart(jet, random_symplectic(n, rng, scale=0.3))
        ev0 = np.sort_complex(np.linalg.eigvals(matrix_schwarzian(jet).operator))
        ev1 = np.sort_complex(np.linalg.eigvals(matrix_schwarzian(new).operator))
        assert np.max(np.abs(ev0 - ev1)) <= 1e-7 * max(1.0, np.abs(ev0).max())


def test_derivative_subspace_of_linear_curve_is_horizontal():
    frame = derivative_subspace(_jet(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2))))
    assert intersection_dimension(frame, LagrangianFrame.horizontal(2)) == 2


def test_derivative_subspace_lagrangian_and_transversal():
    rng = np.random.default_rng(3)
    for n in (1, 2, 3, 4):
        jet = random_regular_jet(n, rng)
        frame = derivative_subspace(jet)
        assert check_lagrangian(frame, tol=1e-9).ok
        assert transversality_ratio(frame, jet.frame()) > 1e-8


def test_derivative_curve_of_linear_curve_is_zero():
    rep = curvature_via_derivative_curve(_jet(np.zeros((1, 1)), np.eye(1), np.zeros((1, 1)), np.zeros((1, 1))))
    assert np.allclose(rep.operator, 0.0)


def test_derivative_curve_oscillator_is_identity():
    model = make_oscillator(2)
    jet = jacobi_jet(model, np.array([0.3, -0.2, 0.5, 1.0]))
    assert np.allclose(curvature_via_derivative_curve(jet).operator, np.eye(2), atol=1e-9)


def test_derivative_curve_matches_schwarzian():
    rng = np.random.default_rng(4)
    for n in (1, 2, 3, 4):
        jet = random_regular_jet(n, rng)
        a = curvature_via_derivative_curve(jet).operator
        b = matrix_schwarzian(jet).operator
        assert np.max(np.abs(a - b)) <= 1e-6 * max(1.0, np.abs(b).max())
    model, _ = make_random_natural(3, 11)
    jet = jacobi_jet(model, rng.normal(size=6) * 0.5)
    a = curvature_via_derivative_curve(jet).operator
    b = matrix_schwarzian(jet).operator
    assert np.max(np.abs(a - b)) <= 1e-6 * max(1.0, np.abs(b).max())


def test_kepler_curve_delta_is_three():
    model, g = make_kepler()
    z = kepler_state(1.0, 1.0)
    red = curve_reduction_delta(jacobi_jet(model, z), g.isotropic_tuple(z))
    v = red.basis[:, 0]
    assert np.allclose(np.abs(v), [1, 0, 0, 0])
    assert abs(red.delta_form[0, 0] - kepler_delta(1.0, 1.0)) < 1e-9
    assert abs(red.delta_form[0, 0] - 3.0) < 1e-9


def test_empty_tuple_gives_zero_delta():
    rng = np.random.default_rng(5)
    jet = random_regular_jet(2, rng)
    red = curve_reduction_delta(jet, IsotropicTuple.empty(2))
    assert np.allclose(red.delta_form, 0.0) and red.basis.shape == (4, 2)


def test_delta_vanishes_when_second_derivative_stays_in_lambda():
    # For S_t = t I the vectors a_i(t) = (b, t b) have a'' = 0, which lies in Lambda + span l.
    jet = _jet(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
    ell = IsotropicTuple.from_vectors(np.array([0.0, 0.0, 1.0, 0.0]))
    red = curve_reduction_delta(jet, ell)
    assert np.allclose(red.delta_form, 0.0)


def test_degenerate_tuple_raises():
    jet = _jet(np.zeros((2, 2)), np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))
    # l inside Lambda(0) = {(x, 0)}: A = 0
    ell = IsotropicTuple.from_vectors(np.array([1.0, 0.0, 0.0, 0.0]))
    with pytest.raises(ReductionDegeneracyError):
        curve_reduction_delta(jet, ell)


def _adapted(jet, ell, red):
    T = adapted_darboux_basis(SymplecticSpace(jet.n), jet.frame(), ell, red.a_vectors)
    return change_chart(jet, symplectic_inverse(T) @ jet.chart_basis)


@pytest.mark.parametrize("r,c", [(1.0, 1.0), (2.0, 1.0), (1.0, 0.5)])
def test_kepler_reduced_coordinate_curve(r, c):
    model, g = make_kepler()
    z = kepler_state(r, c)
    jet = jacobi_jet(model, z)
    ell = g.isotropic_tuple(z)
    red = curve_reduction_delta(jet, ell)
    reduced = reduce_coordinate_curve(_adapted(jet, ell, red), ell, red)
    assert reduced.n == 1
    assert abs(matrix_schwarzian(reduced).form[0, 0] - kepler_reduced_curvature(r, c)) < 1e-9


def test_reduction_with_empty_tuple_is_identity():
    jet = random_regular_jet(2, np.random.default_rng(6))
    red = curve_reduction_delta(jet, IsotropicTuple.empty(2))
    assert reduce_coordinate_curve(jet, IsotropicTuple.empty(2), red) is jet


def test_block_structure_and_two_path_identity():
    rng = np.random.default_rng(7)
    checked = 0
    for k in range(12):
        n = 2 + k % 3
        s = min(1 + k % 2, n - 1)
        jet = random_regular_jet(n, rng)
        M = random_symplectic(n, rng, scale=0.3)
        ell = IsotropicTuple.from_vectors(M @ LagrangianFrame.horizontal(n).columns[:, :s], n=n)
        red = curve_reduction_delta(jet, ell)
        adapted = _adapted(jet, ell, red)
        off, low = block_structure_defects(adapted, red.A)
        assert off < 1e-8 * max(1.0, np.abs(red.A).max())
        assert low < 1e-8 * max(1.0, np.abs(red.A).max())
        reduced = reduce_coordinate_curve(adapted, ell, red)
        m = n - s
        # the reduced chart's x-axes are the first n - s adapted basis vectors
        K = adapted.chart_basis[:, :m]
        orig = matrix_schwarzian(jet).form_on(K)
        new = matrix_schwarzian(reduced).form
        delta = red.delta_form
        C = np.linalg.lstsq(red.basis, K, rcond=None)[0]
        diff = new - orig - C.T @ delta @ C
        assert np.max(np.abs(diff)) <= 1e-6 * max(1.0, np.abs(new).max())
        checked += 1
    assert checked == 12


def test_monotone_delta_psd_rank():
    # the velocity form of a graph curve is -S', so S' < 0 means monotone increasing
    rng = np.random.default_rng(8)
    for k in range(10):
        n, s = 3, 1 + k % 2
        base = random_regular_jet(n, rng)
        jet = CoordCurveJet(0.0, base.S, -base.S1, base.S2, base.S3, basis_change=np.eye(2 * n))
        M = random_symplectic(n, rng, scale=0.3)
        ell = IsotropicTuple.from_vectors(M @ LagrangianFrame.horizontal(n).columns[:, :s], n=n)
        red = curve_reduction_delta(jet, ell)
        assert np.all(np.linalg.eigvalsh(red.velocity_form) > 0)
        assert red.min_eigenvalue() >= -1e-9 * max(1.0, np.abs(red.delta_form).max())
        assert red.rank() <= s
