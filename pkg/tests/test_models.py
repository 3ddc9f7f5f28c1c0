import numpy as np
import pytest

from lagfocal.errors import DomainError, InputError
from lagfocal.focal_scan import focal_times
from lagfocal.hamiltonian_flow import integrate_flow
from lagfocal.integral_reduction import (brute_force_reduced_report, curvature_report, ricci_curvature,
                                         reduced_curvature_via_theorem)
from lagfocal.models import (MODEL_NAMES, NBodyState, build_model, figure_eight_orbit, kepler_original_curvature,
                             kepler_reduced_curvature, kepler_state, make_free_particle, make_kepler,
                             make_natural_system, make_nbody_planar, make_oscillator, make_polynomial_system,
                             make_sphere_geodesic, nbody_laplacian, nbody_reduced_ricci_closed_form,
                             nbody_sundman_term, random_nbody_state, random_polynomial_potential,
                             sphere_great_circle_state)
from lagfocal.symplectic_core import LagrangianFrame


def _vertical_form(model, z):
    return curvature_report(model, z).form_on(LagrangianFrame.vertical(model.n).columns)


def test_oscillator_curvature_is_identity():
    assert np.allclose(_vertical_form(make_oscillator(3), np.linspace(-1, 1, 6)), np.eye(3), atol=1e-9)


def test_free_particle_is_flat():
    model = make_free_particle(2)
    assert np.allclose(_vertical_form(model, np.array([1.0, 0.2, 0.0, 0.0])), 0.0, atol=1e-9)
    assert focal_times(model, np.array([1.0, 0.2, 0.0, 0.0]), window=(0.0, 10.0)) == []


def test_random_quartic_curvature_is_hessian():
    rng = np.random.default_rng(0)
    for n in (2, 3, 4):
        pot = random_polynomial_potential(n, rng)
        model = make_polynomial_system(pot)
        z = rng.normal(size=2 * n) * 0.5
        assert np.max(np.abs(_vertical_form(model, z) - pot.hess(z[n:]))) < 1e-6


def test_inconsistent_potential_rejected():
    with pytest.raises(InputError):
        make_natural_system(1, lambda q: q[0] ** 2, lambda q: np.array([q[0]]), lambda q: np.eye(1),
                            audit_points=[np.array([0.7])])


def test_kepler_original_curvature():
    model, _ = make_kepler()
    for r in (1.0, 2.0):
        form = _vertical_form(model, kepler_state(r, 0.8))
        assert abs(form[0, 0] - kepler_original_curvature(r)) < 1e-9
    assert kepler_original_curvature(1.0) == -2.0


@pytest.mark.parametrize("r,c,expected", [(1.0, 1.0, 1.0), (2.0, 0.0, -0.25), (2.0, 1.0, 3 / 16 - 1 / 4)])
def test_kepler_reduced_curvature(r, c, expected):
    model, g = make_kepler()
    assert kepler_reduced_curvature(r, c) == pytest.approx(expected)
    orig, reduced, _ = reduced_curvature_via_theorem(model, g, kepler_state(r, c))
    assert abs(reduced[0, 0] - expected) < 1e-8
    if c == 0:
        assert abs(orig[0, 0] - reduced[0, 0]) < 1e-12


def test_kepler_domain():
    model, _ = make_kepler()
    with pytest.raises(DomainError):
        kepler_state(0.0, 1.0)
    with pytest.raises(DomainError):
        model.eval_H(np.zeros(2), np.array([-1.0, 0.0]))


def test_two_body_laplacian():
    q = np.array([0.5, 0.0, -0.5, 0.0])
    assert nbody_laplacian(q) == -2.0
    model, _ = make_nbody_planar(2)
    rep = ricci_curvature(model, np.concatenate([np.zeros(4), q]))
    assert abs(rep.original + 2.0) < 1e-8


def test_nbody_needs_two_bodies():
    with pytest.raises(InputError):
        make_nbody_planar(1)


def test_circular_binary_closed_form_vs_pipeline():
    # bodies at +-1/2 on the x axis; v^2 / (1/2) = 1 for unit separation
    v = np.sqrt(0.5)
    st = NBodyState(2, np.array([0.5, 0.0, -0.5, 0.0]), np.array([0.0, v, 0.0, -v]))
    model, g = make_nbody_planar(2)
    rep = ricci_curvature(model, st.phase, g)
    brute, _ = brute_force_reduced_report(model, g, st.phase)
    assert abs(rep.reduced - brute.ricci) < 1e-6
    assert abs(rep.reduced - nbody_reduced_ricci_closed_form(st, corrected=True)) < 1e-6
    # p is orthogonal to q here, so the Sundman term is 2 T I
    assert nbody_sundman_term(st) == pytest.approx(2 * st.kinetic * st.inertia)


def test_nbody_scaling_audit():
    model, g = make_nbody_planar(3)
    rng = np.random.default_rng(1)
    st = random_nbody_state(3, rng)
    for kappa in (0.5, 2.0):
        scaled = NBodyState(3, kappa * st.q, st.p / kappa)
        assert abs(scaled.angular_momentum - st.angular_momentum) < 1e-12
        rep = ricci_curvature(model, scaled.phase, g)
        closed = nbody_reduced_ricci_closed_form(scaled, corrected=True)
        assert abs(rep.reduced - closed) < 1e-6 * max(1.0, abs(closed))


def test_nbody_angular_momentum_conserved():
    model, g = make_nbody_planar(3)
    st = random_nbody_state(3, np.random.default_rng(2), min_distance=0.8)
    traj = integrate_flow(model, st.phase, (0.0, 1.0), t_eval=np.linspace(0, 1, 11))
    vals = [g.values(z)[0] for z in traj.states]
    assert np.ptp(vals) < 1e-9 * max(1.0, abs(vals[0]))


def test_figure_eight_symmetry_and_closure():
    z0, T = figure_eight_orbit(check=True)
    st = NBodyState.from_phase(z0)
    assert np.allclose(st.q.reshape(3, 2).sum(axis=0), 0.0, atol=1e-14)
    assert np.allclose(st.p.reshape(3, 2).sum(axis=0), 0.0, atol=1e-14)
    # one body at the origin, the others opposite: a collinear configuration
    pts = st.q.reshape(3, 2)
    assert abs(pts[0, 0] * pts[1, 1] - pts[0, 1] * pts[1, 0]) < 1e-14
    assert 6.0 < T < 6.7
    model, _ = make_nbody_planar(3)
    zT = integrate_flow(model, z0, (0.0, T), tol=1e-13).states[-1]
    assert np.linalg.norm(zT - z0) <= 1e-8


def test_sphere_first_focal_time():
    model = make_sphere_geodesic()
    recs = focal_times(model, sphere_great_circle_state(0.5, 1.0), window=(0.0, 4.0))
    assert len(recs) == 1 and abs(recs[0].time - np.pi) < 1e-6
    # speed v reaches the antipode at pi / v
    recs = focal_times(model, sphere_great_circle_state(0.5, 2.0), window=(0.0, 2.0))
    assert abs(recs[0].time - np.pi / 2) < 1e-6


def test_sphere_ricci_along_geodesic():
    model = make_sphere_geodesic()
    z0 = sphere_great_circle_state(0.4, 1.0)
    traj = integrate_flow(model, z0, (0.0, 3.0), t_eval=np.linspace(0, 3, 5))
    for z in traj.states:
        assert abs(ricci_curvature(model, z).original - 1.0) < 1e-6


def test_sphere_zero_speed_is_flat():
    model = make_sphere_geodesic()
    z0 = sphere_great_circle_state(0.4, 0.0)
    assert abs(ricci_curvature(model, z0).original) < 1e-9
    assert focal_times(model, z0, window=(0.0, 10.0)) == []


def test_sphere_chart_guard():
    model = make_sphere_geodesic()
    with pytest.raises(DomainError):
        model.eval_H(np.ones(2), np.array([0.0, 1.0]))


def test_registry():
    assert MODEL_NAMES == ("oscillator", "natural", "kepler", "nbody", "eight", "sphere")
    for name in MODEL_NAMES:
        model, integrals, state = build_model(name)
        assert model.n >= 1
        if state is not None:
            assert state.shape == (2 * model.n,)
    with pytest.raises(InputError):
        build_model("pendulum")


def test_model_derivatives_audit():
    rng = np.random.default_rng(3)
    cases = [(make_kepler()[0], kepler_state(1.4, 0.7, 0.3)),
             (make_sphere_geodesic(), sphere_great_circle_state(0.3, 1.2)),
             (make_nbody_planar(3)[0], random_nbody_state(3, rng).phase),
             (make_oscillator(2, [1.0, 1.7]), rng.normal(size=4))]
    for model, z in cases:
        rep = model.audit(z)
        assert max(rep.values()) < 1e-6
