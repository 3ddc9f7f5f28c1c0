"""Built-in mechanical models with closed-form curvature oracles.

Every model is a :class:`HamiltonianModel` on T*R^n with phase point
z = (p, q).  Units are nondimensional: unit masses and unit gravitational
constant.
"""
from __future__ import annotations

import itertools
import json
from dataclasses import dataclass
from importlib import resources

import numpy as np

from .errors import CalibrationError, DomainError, InputError
from .hamiltonian_flow import HamiltonianModel, integrate_flow
from .integral_reduction import IntegralTuple

SPHERE_MIN_SIN = 1e-3


# --------------------------------------------------------------------------
# natural systems


def make_natural_system(n, U, grad_U, hess_U, name="natural", params=None, audit_points=None):
    """H = |p|^2 / 2 + U(q); the curvature form of the vertical distribution is Hess U."""
    n = int(n)

    def H(p, q):
        return 0.5 * p @ p + U(q)

    def grad(p, q):
        return np.concatenate([p, grad_U(q)])

    def hess(p, q):
        h = np.zeros((2 * n, 2 * n))
        h[:n, :n] = np.eye(n)
        h[n:, n:] = hess_U(q)
        return h

    model = HamiltonianModel(n, H, grad, hess, name=name, params=dict(params or {}))
    for q in audit_points or ():
        rep = model.audit(np.concatenate([np.zeros(n), q]))
        if max(rep.values()) > 1e-6:
            raise InputError(f"potential derivatives are inconsistent: {rep}")
    return model


def make_oscillator(n=1, frequencies=None):
    w = np.ones(n) if frequencies is None else np.asarray(frequencies, dtype=float)
    if w.shape != (n,):
        raise InputError("need one frequency per degree of freedom")
    w2 = w ** 2
    return make_natural_system(n, lambda q: 0.5 * np.sum(w2 * q * q), lambda q: w2 * q, lambda q: np.diag(w2),
                               name="oscillator", params={"n": n, "frequencies": w.tolist()})


def make_free_particle(n=1):
    return make_natural_system(n, lambda q: 0.0, lambda q: np.zeros(n), lambda q: np.zeros((n, n)),
                               name="free", params={"n": n})


def _symmetrize(T):
    k = T.ndim
    perms = list(itertools.permutations(range(k)))
    return sum(np.transpose(T, p) for p in perms) / len(perms)


@dataclass(frozen=True)
class PolynomialPotential:
    """U(q) = 1/2 M[q, q] + 1/6 T3[q, q, q] + 1/24 T4[q, q, q, q] with symmetric tensors."""

    M: np.ndarray
    T3: np.ndarray
    T4: np.ndarray

    def U(self, q):
        return float(0.5 * q @ self.M @ q + np.einsum("ijk,i,j,k", self.T3, q, q, q) / 6
                     + np.einsum("ijkl,i,j,k,l", self.T4, q, q, q, q) / 24)

    def grad(self, q):
        return self.M @ q + 0.5 * np.einsum("ijk,j,k->i", self.T3, q, q) + np.einsum("ijkl,j,k,l->i", self.T4, q, q, q) / 6

    def hess(self, q):
        return self.M + np.einsum("ijk,k->ij", self.T3, q) + 0.5 * np.einsum("ijkl,k,l->ij", self.T4, q, q)


def random_polynomial_potential(n, rng, scale=1.0):
    M = rng.normal(size=(n, n))
    M = scale * 0.5 * (M + M.T)
    T3 = scale * 0.5 * _symmetrize(rng.normal(size=(n,) * 3))
    T4 = scale * 0.5 * _symmetrize(rng.normal(size=(n,) * 4))
    return PolynomialPotential(M, T3, T4)


def make_polynomial_system(potential, name="natural"):
    n = potential.M.shape[0]
    return make_natural_system(n, potential.U, potential.grad, potential.hess, name=name, params={"n": n})


def make_random_natural(n, seed):
    """Natural system with a random quartic potential (deterministic in ``seed``)."""
    rng = np.random.default_rng(seed)
    return make_polynomial_system(random_polynomial_potential(n, rng)), rng


def make_central_potential(n, coeffs, name="central"):
    """Rotation-invariant natural system U = f(|q|^2/2), f(u) = sum c_k u^k / k!.

    Any planar rotation generator is then a first integral.
    """
    c = np.asarray(coeffs, dtype=float)

    def f(u, order):
        return sum(c[k] * u ** (k - order) / np.prod(np.arange(1, k - order + 1)) for k in range(order, len(c)))

    def U(q):
        return float(f(0.5 * q @ q, 0))

    def grad(q):
        return f(0.5 * q @ q, 1) * q

    def hess(q):
        u = 0.5 * q @ q
        return f(u, 1) * np.eye(n) + f(u, 2) * np.outer(q, q)

    return make_natural_system(n, U, grad, hess, name=name, params={"n": n, "coeffs": c.tolist()})


def rotation_integral(n, i, j):
    """Angular momentum p_j q_i - p_i q_j of the (q_i, q_j) plane."""

    def g(p, q):
        return p[j] * q[i] - p[i] * q[j]

    def dg(p, q):
        out = np.zeros(2 * n)
        out[j] = q[i]
        out[i] = -q[j]
        out[n + i] = p[j]
        out[n + j] = -p[i]
        return out

    return IntegralTuple(n, (g,), (dg,), (f"L{i}{j}",))


def momentum_integral(n, i):
    """p_i (a cyclic coordinate q_i)."""

    def g(p, q):
        return p[i]

    def dg(p, q):
        out = np.zeros(2 * n)
        out[i] = 1.0
        return out

    return IntegralTuple(n, (g,), (dg,), (f"p{i}",))


def energy_integral(model):
    n = model.n
    return IntegralTuple(n, (lambda p, q: model.eval_H(p, q),), (lambda p, q: model.eval_grad(p, q),), ("H",))


# --------------------------------------------------------------------------
# Kepler in polar coordinates


def _kepler_domain(q):
    if not q[0] > 0:
        raise DomainError(f"Kepler chart needs r > 0, got r = {q[0]}")


def make_kepler():
    """H = p_r^2/2 + p_phi^2/(2 r^2) - 1/r on q = (r, phi), with g = p_phi."""

    def H(p, q):
        r = q[0]
        return 0.5 * p[0] ** 2 + 0.5 * p[1] ** 2 / r ** 2 - 1.0 / r

    def grad(p, q):
        r = q[0]
        return np.array([p[0], p[1] / r ** 2, -p[1] ** 2 / r ** 3 + 1.0 / r ** 2, 0.0])

    def hess(p, q):
        r, c = q[0], p[1]
        h = np.zeros((4, 4))
        h[0, 0] = 1.0
        h[1, 1] = 1.0 / r ** 2
        h[1, 2] = h[2, 1] = -2.0 * c / r ** 3
        h[2, 2] = 3.0 * c ** 2 / r ** 4 - 2.0 / r ** 3
        return h

    model = HamiltonianModel(2, H, grad, hess, name="kepler", domain=_kepler_domain)
    return model, momentum_integral(2, 1)


def kepler_state(r, c, p_r=0.0, phi=0.0):
    if r <= 0:
        raise DomainError(f"Kepler chart needs r > 0, got r = {r}")
    return np.array([p_r, c, r, phi], dtype=float)


def kepler_original_curvature(r):
    """Curvature form on the radial impulse direction: -2 / r^3."""
    return -2.0 / r ** 3


def kepler_reduced_curvature(r, c):
    """Second derivative of the amended potential c^2/(2 r^2) - 1/r."""
    return 3.0 * c ** 2 / r ** 4 - 2.0 / r ** 3


def kepler_delta(r, c):
    return 3.0 * c ** 2 / r ** 4


# --------------------------------------------------------------------------
# planar N-body problem


@dataclass(frozen=True)
class NBodyState:
    N: int
    q: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        q = np.asarray(self.q, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if q.shape != (2 * self.N,) or p.shape != (2 * self.N,):
            raise InputError(f"positions and impulses need length {2 * self.N}")
        object.__setattr__(self, "q", q)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_phase(cls, z):
        z = np.asarray(z, dtype=float)
        N = z.size // 4
        return cls(N, z[2 * N:], z[: 2 * N])

    @property
    def phase(self):
        return np.concatenate([self.p, self.q])

    @property
    def inertia(self):
        return float(self.q @ self.q)

    @property
    def kinetic(self):
        return 0.5 * float(self.p @ self.p)

    @property
    def potential(self):
        return nbody_potential(self.q)

    @property
    def angular_momentum(self):
        return float(self.p @ unit_symplectic(self.N).T @ self.q)

    @property
    def min_distance(self):
        return nbody_clearance(self.q)


def unit_symplectic(N):
    """Block-diagonal J with J (x, y) = (y, -x) in each body's plane."""
    return np.kron(np.eye(N), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def _pairs(N):
    return [(i, j) for i in range(N) for j in range(i + 1, N)]


def nbody_clearance(q):
    N = q.size // 2
    pts = q.reshape(N, 2)
    return min(float(np.linalg.norm(pts[i] - pts[j])) for i, j in _pairs(N))


def nbody_potential(q):
    N = q.size // 2
    pts = q.reshape(N, 2)
    return -sum(1.0 / np.linalg.norm(pts[i] - pts[j]) for i, j in _pairs(N))


def nbody_laplacian(q):
    """Laplacian of U = -sum 1/r_ij in the plane: -2 sum 1/r_ij^3."""
    N = q.size // 2
    pts = q.reshape(N, 2)
    return -2.0 * sum(1.0 / np.linalg.norm(pts[i] - pts[j]) ** 3 for i, j in _pairs(N))


def _nbody_derivatives(q):
    N = q.size // 2
    pts = q.reshape(N, 2)
    grad = np.zeros((N, 2))
    hess = np.zeros((2 * N, 2 * N))
    for i, j in _pairs(N):
        d = pts[i] - pts[j]
        r = np.linalg.norm(d)
        # U_ij = -1/r: gradient d / r^3, Hessian I / r^3 - 3 d d^T / r^5
        grad[i] += d / r ** 3
        grad[j] -= d / r ** 3
        block = np.eye(2) / r ** 3 - 3.0 * np.outer(d, d) / r ** 5
        si, sj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
        hess[si, si] += block
        hess[sj, sj] += block
        hess[si, sj] -= block
        hess[sj, si] -= block
    return grad.ravel(), hess


def make_nbody_planar(N=3):
    """Planar N-body problem with unit masses and the total angular momentum."""
    if N < 2:
        raise InputError("N-body model needs N >= 2")
    n = 2 * N
    Jm = unit_symplectic(N)

    def U(q):
        return nbody_potential(q)

    def grad_U(q):
        return _nbody_derivatives(q)[0]

    def hess_U(q):
        return _nbody_derivatives(q)[1]

    base = make_natural_system(n, U, grad_U, hess_U, name="nbody", params={"N": N})
    model = HamiltonianModel(n, base.H, base.grad, base.hess, name="nbody", clearance=nbody_clearance,
                             params={"N": N})

    def g(p, q):
        return float(p @ Jm.T @ q)

    def dg(p, q):
        # g = sum p_{2i} q_{2i-1} - p_{2i-1} q_{2i}: dg/dp = -J q, dg/dq = J p
        return np.concatenate([-Jm @ q, Jm @ p])

    return model, IntegralTuple(n, (g,), (dg,), ("angular_momentum",))


def nbody_x_field(state):
    """Closed form X = (J q, 0) of the auxiliary field for the angular momentum."""
    return np.concatenate([unit_symplectic(state.N) @ state.q, np.zeros(2 * state.N)])


def nbody_sundman_term(state):
    """2 T I - {H, I}^2 / 4 with {H, I} = 2 <p, q>; nonnegative by Cauchy-Schwarz."""
    HI = 2.0 * float(state.p @ state.q)
    return 2.0 * state.kinetic * state.inertia - 0.25 * HI ** 2


def nbody_reduced_ricci_closed_form(state, corrected=False):
    """Closed-form reduced Ricci curvature as displayed, or with the audited corrections.

    Displayed: -2 sum 1/r_ij^3 - U/I + 3/I^2 (2 T I - {H, I}^2 / 4).
    The audit against the brute-force reduced jet gives +U/I instead of
    -U/I; ``corrected=True`` returns that value.
    """
    I = state.inertia
    if I <= 0:
        raise DomainError("moment of inertia vanishes")
    U = state.potential
    sign = 1.0 if corrected else -1.0
    return nbody_laplacian(state.q) + sign * U / I + 3.0 / I ** 2 * nbody_sundman_term(state)


def random_nbody_state(N, rng, min_distance=0.5, spread=1.0, momentum=0.7, centered=True):
    while True:
        q = rng.normal(scale=spread, size=2 * N)
        p = rng.normal(scale=momentum, size=2 * N)
        if centered:
            q = (q.reshape(N, 2) - q.reshape(N, 2).mean(axis=0)).ravel()
            p = (p.reshape(N, 2) - p.reshape(N, 2).mean(axis=0)).ravel()
        if nbody_clearance(q) >= min_distance:
            return NBodyState(N, q, p)


# --------------------------------------------------------------------------
# the figure-eight choreography

EIGHT_SOURCE = {
    "positions": [[0.97000436, -0.24308753], [-0.97000436, 0.24308753], [0.0, 0.0]],
    "velocity_centre": [-0.93240737, -0.86473146],
    "period": 6.32591398,
}


def _eight_state_from_params(x):
    """Collinear initial condition: bodies at (a, b), (-a, -b), 0; velocities v/-2, v/-2, v."""
    a, b, vx, vy = x
    q = np.array([a, b, -a, -b, 0.0, 0.0])
    v3 = np.array([vx, vy])
    p = np.concatenate([-0.5 * v3, -0.5 * v3, v3])
    return np.concatenate([p, q])


def calibrate_figure_eight(tol=1e-8, max_iter=20):
    """Refine the published collinear data by shooting until the orbit closes.

    Unknowns: (a, b, v_x, v_y) and the period T.  The residual is the state
    mismatch after one period plus a phase condition fixing the free time
    shift (the middle body starts at the origin, so only scale and rotation
    remain; they are pinned by keeping b/a at its published value).
    """
    from scipy.optimize import least_squares

    model, _ = make_nbody_planar(3)
    src = EIGHT_SOURCE
    x0 = np.array(src["positions"][0] + src["velocity_centre"] + [src["period"]])
    ratio = x0[1] / x0[0]

    def residual(x):
        z0 = _eight_state_from_params(x[:4])
        traj = integrate_flow(model, z0, (0.0, x[4]), tol=1e-13)
        zT = traj.states[-1]
        return np.concatenate([zT - z0, [x[1] - ratio * x[0]]])

    sol = least_squares(residual, x0, xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=200 * max_iter)
    closure = float(np.linalg.norm(residual(sol.x)[:-1]))
    if closure > tol:
        raise CalibrationError(f"figure-eight shooting closed only to {closure:.2e}", module="model_library")
    return {"a": sol.x[0], "b": sol.x[1], "vx": sol.x[2], "vy": sol.x[3], "period": sol.x[4],
            "closure": closure}


def _load_eight():
    text = resources.files("lagfocal").joinpath("data/figure_eight.json").read_text()
    return json.loads(text)


def figure_eight_orbit(check=False):
    """(initial phase point, period) of the calibrated figure-eight.

    The stored data come from :func:`calibrate_figure_eight`; with
    ``check=True`` closure over one period is re-verified.
    """
    data = _load_eight()
    z0 = _eight_state_from_params([data["a"], data["b"], data["vx"], data["vy"]])
    T = float(data["period"])
    if check:
        model, _ = make_nbody_planar(3)
        zT = integrate_flow(model, z0, (0.0, T), tol=1e-13).states[-1]
        err = float(np.linalg.norm(zT - z0))
        if err > 1e-8:
            raise CalibrationError(f"stored figure-eight closes only to {err:.2e}", module="model_library")
    return z0, T


# --------------------------------------------------------------------------
# geodesics of the round 2-sphere


def _sphere_domain(q):
    if abs(np.sin(q[0])) < SPHERE_MIN_SIN:
        raise DomainError(f"sphere chart degenerates at theta = {q[0]}")


def make_sphere_geodesic():
    """H = (p_theta^2 + p_phi^2 / sin^2 theta) / 2 on q = (theta, phi)."""

    def H(p, q):
        s = np.sin(q[0])
        return 0.5 * (p[0] ** 2 + p[1] ** 2 / s ** 2)

    def grad(p, q):
        s, c = np.sin(q[0]), np.cos(q[0])
        return np.array([p[0], p[1] / s ** 2, -p[1] ** 2 * c / s ** 3, 0.0])

    def hess(p, q):
        s, c = np.sin(q[0]), np.cos(q[0])
        h = np.zeros((4, 4))
        h[0, 0] = 1.0
        h[1, 1] = 1.0 / s ** 2
        h[1, 2] = h[2, 1] = -2.0 * p[1] * c / s ** 3
        h[2, 2] = p[1] ** 2 * (1.0 / s ** 2 + 3.0 * c ** 2 / s ** 4)
        return h

    return HamiltonianModel(2, H, grad, hess, name="sphere", domain=_sphere_domain)


def sphere_great_circle_state(inclination=0.5, speed=1.0, phi=0.0):
    """Point on the equator moving along a great circle tilted by ``inclination``.

    The maximal latitude equals the inclination, so the orbit stays in the chart.
    """
    theta = np.pi / 2
    # unit speed: p_theta^2 + p_phi^2 = speed^2 at the equator
    p_theta = -speed * np.sin(inclination)
    p_phi = speed * np.cos(inclination)
    return np.array([p_theta, p_phi, theta, phi])


# --------------------------------------------------------------------------
# registry


MODEL_NAMES = ("oscillator", "natural", "kepler", "nbody", "eight", "sphere")

MODEL_DESCRIPTIONS = {
    "oscillator": "isotropic or anisotropic harmonic oscillator, H = |p|^2/2 + sum w_i^2 q_i^2 / 2",
    "natural": "H = |p|^2/2 + U(q) with a random quartic potential (params: n, seed)",
    "kepler": "Kepler problem in polar coordinates with g = p_phi",
    "nbody": "planar N-body problem with unit masses and angular momentum (params: N)",
    "eight": "three-body figure-eight choreography with angular momentum",
    "sphere": "geodesic flow of the unit 2-sphere in (theta, phi) coordinates",
}


def build_model(name, params=None):
    """(model, integrals or None, default initial state or None) for a registry name."""
    params = dict(params or {})
    if name == "oscillator":
        n = int(params.get("n", 1))
        model = make_oscillator(n, params.get("frequencies"))
        return model, None, None
    if name == "natural":
        n = int(params.get("n", 2))
        model, _ = make_random_natural(n, int(params.get("seed", 0)))
        return model, None, None
    if name == "kepler":
        model, g = make_kepler()
        state = kepler_state(float(params.get("r", 1.0)), float(params.get("c", 1.0)), float(params.get("p_r", 0.0)))
        return model, g, state
    if name == "nbody":
        model, g = make_nbody_planar(int(params.get("N", 3)))
        return model, g, None
    if name == "eight":
        model, g = make_nbody_planar(3)
        z0, _ = figure_eight_orbit()
        return model, g, z0
    if name == "sphere":
        model = make_sphere_geodesic()
        return model, None, sphere_great_circle_state(float(params.get("inclination", 0.5)),
                                                      float(params.get("speed", 1.0)))
    raise InputError(f"unknown model {name!r}; choose from {', '.join(MODEL_NAMES)}")
