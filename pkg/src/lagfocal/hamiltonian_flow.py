"""Hamiltonian flows, their linearizations and Jacobi curves.

Phase points are stacked as z = (p, q).  The Hamiltonian vector field is
(-H_q, H_p) and its Jacobian along a trajectory is

    A = [[-H_qp, -H_qq],
         [ H_pp,  H_pq]]

so that the variational equation reads Phi' = A Phi.  The Jacobi curve of a
Lagrangian distribution D attached at lambda0 is J(t) = Phi(t)^{-1} D(gamma(t)).
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import solve_ivp

from .errors import DomainError, InputError, IntegrationError
from .jacobi_geometry import _stencil_weights, coordinate_jet, default_step, jet_from_frame_derivatives
from .symplectic_core import LagrangianFrame, SymplecticSpace, check_lagrangian, symplectic_inverse

DEFAULT_TOL = 1e-12
HESS_STEP = 1e-6
COLLISION_DISTANCE = 1e-6
MONOTONE_MARGIN = 1e-9


def _split(z, n):
    z = np.asarray(z, dtype=float)
    if z.shape != (2 * n,):
        raise InputError(f"phase point must have length {2 * n}, got shape {z.shape}")
    return z[:n], z[n:]


@dataclass(frozen=True)
class HamiltonianModel:
    """A Hamiltonian on T*R^n given by evaluators in (p, q).

    ``grad(p, q)`` returns the 2n-vector (H_p, H_q); ``hess(p, q)`` the full
    2n x 2n Hessian in the same ordering.  Without ``hess`` the Hessian is
    obtained by central differences of ``grad`` with step 1e-6.
    ``domain(q)`` may raise :class:`DomainError` outside the chart and
    ``clearance(q)`` returns a distance that must stay above 1e-6
    (pairwise distances for N-body models).
    """

    n: int
    H: object = field(repr=False)
    grad: object = field(repr=False)
    hess: object = field(default=None, repr=False)
    name: str = "custom"
    domain: object = field(default=None, repr=False)
    clearance: object = field(default=None, repr=False)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise InputError(f"degrees of freedom must be a positive integer, got {self.n!r}")

    @property
    def space(self):
        return SymplecticSpace(self.n)

    def _check(self, q):
        if self.domain is not None:
            self.domain(q)

    def eval_H(self, p, q):
        self._check(q)
        return float(self.H(np.asarray(p, dtype=float), np.asarray(q, dtype=float)))

    def eval_grad(self, p, q):
        self._check(q)
        return np.asarray(self.grad(np.asarray(p, dtype=float), np.asarray(q, dtype=float)), dtype=float)

    def eval_hess(self, p, q):
        self._check(q)
        p = np.asarray(p, dtype=float)
        q = np.asarray(q, dtype=float)
        if self.hess is not None:
            return np.asarray(self.hess(p, q), dtype=float)
        return fd_hessian(lambda z: self.grad(z[: self.n], z[self.n:]), np.concatenate([p, q]), HESS_STEP)

    def energy(self, z):
        p, q = _split(z, self.n)
        return self.eval_H(p, q)

    def vector_field(self, z):
        """(-H_q, H_p) at z = (p, q)."""
        p, q = _split(z, self.n)
        g = self.eval_grad(p, q)
        return np.concatenate([-g[self.n:], g[: self.n]])

    def jacobian(self, z):
        """A(z): derivative of the Hamiltonian vector field."""
        p, q = _split(z, self.n)
        h = self.eval_hess(p, q)
        n = self.n
        Hpp, Hpq, Hqp, Hqq = h[:n, :n], h[:n, n:], h[n:, :n], h[n:, n:]
        return np.block([[-Hqp, -Hqq], [Hpp, Hpq]])

    def audit(self, z, step=1e-6):
        """Largest central-difference mismatch of (grad vs H, hess vs grad) at z."""
        p, q = _split(z, self.n)
        z = np.concatenate([p, q])
        num_grad = np.array([(self.energy(z + step * e) - self.energy(z - step * e)) / (2 * step)
                             for e in np.eye(2 * self.n)])
        g = self.eval_grad(p, q)
        grad_err = float(np.max(np.abs(num_grad - g)) / max(1.0, np.max(np.abs(g))))
        num_hess = fd_hessian(lambda w: self.grad(w[: self.n], w[self.n:]), z, step)
        h = self.eval_hess(p, q)
        hess_err = float(np.max(np.abs(num_hess - h)) / max(1.0, np.max(np.abs(h))))
        sym_err = float(np.max(np.abs(h - h.T)))
        return {"grad": grad_err, "hess": hess_err, "symmetry": sym_err}


def fd_hessian(grad, z, step):
    z = np.asarray(z, dtype=float)
    cols = []
    for e in np.eye(z.size):
        cols.append((np.asarray(grad(z + step * e)) - np.asarray(grad(z - step * e))) / (2 * step))
    h = np.column_stack(cols)
    return 0.5 * (h + h.T)


# --------------------------------------------------------------------------
# integration


@dataclass
class Trajectory:
    model: HamiltonianModel = field(repr=False)
    times: np.ndarray
    states: np.ndarray = field(repr=False)
    solution: object = field(repr=False)
    energy_drift: float = 0.0
    matrices: np.ndarray = field(default=None, repr=False)
    y0: np.ndarray = field(default=None, repr=False)

    @property
    def initial_state(self):
        return self.states[0]

    @property
    def t_final(self):
        return float(self.times[-1])

    def state(self, t):
        n2 = 2 * self.model.n
        return self._eval(t)[:n2]

    def _eval(self, t):
        t0, t1 = float(self.times[0]), float(self.times[-1])
        lo, hi = min(t0, t1), max(t0, t1)
        if not (lo - 1e-12 * max(1.0, abs(hi)) <= t <= hi + 1e-12 * max(1.0, abs(hi))):
            raise InputError(f"time {t} outside the integrated window [{lo}, {hi}]")
        if t == t0 or self.solution is None:
            return self.y0
        return self.solution(t)


@dataclass
class LinearizedFlow:
    times: np.ndarray
    matrices: np.ndarray = field(repr=False)
    trajectory: Trajectory = field(repr=False)

    def at(self, t):
        n2 = 2 * self.trajectory.model.n
        y = self.trajectory._eval(t)
        if y.size == n2:
            raise InputError("trajectory was integrated without the variational equation")
        return y[n2:].reshape(n2, n2)


def _rhs(model, variational):
    n2 = 2 * model.n

    def f(t, y):
        z = y[:n2]
        try:
            v = model.vector_field(z)
        except DomainError as exc:
            raise IntegrationError(f"left the model domain: {exc}", module="hamiltonian_flow", time=t) from exc
        if not variational:
            return v
        Phi = y[n2:].reshape(n2, n2)
        return np.concatenate([v, (model.jacobian(z) @ Phi).ravel()])

    return f


def _integrate(model, z0, t_span, tol, t_eval, variational):
    n2 = 2 * model.n
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (n2,):
        raise InputError(f"initial state must have length {n2}, got shape {z0.shape}")
    model.energy(z0)          # domain check on the initial point
    t0, t1 = float(t_span[0]), float(t_span[1])
    y0 = np.concatenate([z0, np.eye(n2).ravel()]) if variational else z0.copy()
    events = None
    if model.clearance is not None:
        def collision(t, y):
            return model.clearance(y[model.n: n2]) - COLLISION_DISTANCE
        collision.terminal = True
        events = [collision]
    if t1 == t0:
        return Trajectory(model, np.array([t0]), z0[None, :], None, 0.0, y0=y0)
    rtol = max(tol, 2.3e-14)
    sol = solve_ivp(_rhs(model, variational), (t0, t1), y0, method="DOP853", rtol=rtol, atol=rtol * 1e-2,
                    dense_output=True, t_eval=t_eval, events=events)
    if sol.status == 1:
        raise IntegrationError("near collision (clearance below 1e-6)", module="hamiltonian_flow",
                               time=float(sol.t_events[0][0]))
    if sol.status != 0:
        last = float(sol.t[-1]) if sol.t.size else t0
        raise IntegrationError(f"integration failed: {sol.message}", module="hamiltonian_flow", time=last)
    times = sol.t
    ys = sol.y.T
    states = ys[:, :n2]
    H0 = model.energy(z0)
    drift = max(abs(model.energy(z) - H0) for z in states) if len(states) else 0.0
    traj = Trajectory(model, times, states, sol.sol, float(drift), y0=y0)
    if variational:
        traj.matrices = ys[:, n2:].reshape(-1, n2, n2)
    return traj


def integrate_flow(model, lambda0, t_span, tol=DEFAULT_TOL, t_eval=None):
    """Integrate p' = -H_q, q' = H_p with DOP853 and dense output.

    The energy drift over the returned grid is stored on the trajectory;
    a drift above 1e-9 (1 + |H0|) triggers a warning.
    """
    traj = _integrate(model, lambda0, t_span, tol, t_eval, variational=False)
    _drift_warning(traj)
    return traj


def _drift_warning(traj):
    H0 = traj.model.energy(traj.states[0])
    if traj.energy_drift > 1e-9 * (1 + abs(H0)):
        warnings.warn(f"energy drift {traj.energy_drift:.2e} exceeds 1e-9 (1 + |H0|)", RuntimeWarning, stacklevel=3)


def flow_with_variations(model, lambda0, t_span, tol=DEFAULT_TOL, t_eval=None):
    """Trajectory integrated jointly with its fundamental matrix Phi(t)."""
    traj = _integrate(model, lambda0, t_span, tol, t_eval, variational=True)
    _drift_warning(traj)
    return traj


def linearized_flow(model, trajectory, tol=DEFAULT_TOL):
    """Fundamental solutions Phi(t) of Phi' = A(gamma(t)) Phi along ``trajectory``.

    The flow and its variations are re-integrated together so that both share
    one step-size control.
    """
    if trajectory.matrices is None:
        span = (trajectory.times[0], trajectory.times[-1])
        trajectory = _integrate(model, trajectory.states[0], span, tol, trajectory.times, variational=True)
    return LinearizedFlow(trajectory.times, trajectory.matrices, trajectory)


# --------------------------------------------------------------------------
# Jacobi curves


def vertical_field(n):
    frame = LagrangianFrame.vertical(n).columns

    def field_(p, q):
        return frame

    field_.constant = True
    return field_


def _frame_at(frame_field, z, n):
    cols = np.asarray(frame_field(z[:n], z[n:]), dtype=float)
    if cols.ndim != 2 or cols.shape[0] != 2 * n or cols.shape[1] > n:
        raise InputError(f"distribution frame must have {2 * n} rows and at most {n} columns, got {cols.shape}")
    return cols


def jacobi_frames(model, lambda0, distribution_frame_field=None, time_grid=(0.0,), tol=DEFAULT_TOL,
                  check_tol=1e-8):
    """Frames of J(t) = Phi(t)^{-1} D(gamma(t)) on ``time_grid``."""
    n = model.n
    field_ = distribution_frame_field or vertical_field(n)
    grid = np.asarray(time_grid, dtype=float)
    lo, hi = min(0.0, grid.min()), max(0.0, grid.max())
    out = []
    if hi > 0:
        fwd = flow_with_variations(model, lambda0, (0.0, hi), tol)
    if lo < 0:
        bwd = flow_with_variations(model, lambda0, (0.0, lo), tol)
    for t in grid:
        if t == 0:
            z, Phi = np.asarray(lambda0, dtype=float), np.eye(2 * n)
        else:
            y = (fwd if t > 0 else bwd)._eval(t)
            z, Phi = y[: 2 * n], y[2 * n:].reshape(2 * n, 2 * n)
        cols = symplectic_inverse(Phi) @ _frame_at(field_, z, n)
        frame = LagrangianFrame(model.space, cols)
        chk = check_lagrangian(frame, tol=check_tol)
        if not chk.ok:
            raise IntegrationError(f"Jacobi frame lost isotropy (defect {chk.defect:.2e})",
                                   module="hamiltonian_flow", time=float(t))
        out.append((float(t), frame))
    return out


def q_form(model, lam, distribution_frame=None, step=1e-5):
    """Velocity form of the Jacobi curve at its attach point, in the frame basis.

    For the vertical distribution this is exactly H_pp(lambda).  A frame field
    (callable) is differentiated along the Hamiltonian field by central
    differences.
    """
    n = model.n
    z = np.asarray(lam, dtype=float)
    if distribution_frame is None or getattr(distribution_frame, "constant", False):
        F = LagrangianFrame.vertical(n).columns if distribution_frame is None else _frame_at(distribution_frame, z, n)
        dF = np.zeros_like(F)
    elif callable(distribution_frame):
        F = _frame_at(distribution_frame, z, n)
        v = model.vector_field(z)
        dF = (_frame_at(distribution_frame, z + step * v, n) - _frame_at(distribution_frame, z - step * v, n)) / (2 * step)
    else:
        F = np.asarray(distribution_frame.columns if isinstance(distribution_frame, LagrangianFrame)
                       else distribution_frame, dtype=float)
        dF = np.zeros_like(F)
    if distribution_frame is None:
        p, q = _split(z, n)
        return model.eval_hess(p, q)[:n, :n].copy()
    J = model.space.form_matrix
    vel = -model.jacobian(z) @ F + dF
    Q = vel.T @ J @ F
    return 0.5 * (Q + Q.T)


def classify_monotonicity(model, lam, distribution_frame=None, margin=MONOTONE_MARGIN):
    """('monotone-increasing' | 'monotone-decreasing' | 'regular' | 'degenerate', margin).

    The returned margin is the smallest |eigenvalue| of Q.
    """
    Q = q_form(model, lam, distribution_frame)
    ev = np.linalg.eigvalsh(Q)
    tol = margin * max(1.0, float(np.max(np.abs(ev))))
    smallest = float(np.min(np.abs(ev)))
    if smallest <= tol:
        return "degenerate", smallest
    if np.all(ev > 0):
        return "monotone-increasing", smallest
    if np.all(ev < 0):
        return "monotone-decreasing", smallest
    return "regular", smallest


# --------------------------------------------------------------------------
# jets of Jacobi curves


def along_derivatives(model, lam, funcs, step, points=9, tol=2.3e-14):
    """Time derivatives (orders 1 and 2) at t = 0 of f(gamma(t)) for each f in ``funcs``.

    gamma is sampled on a symmetric stencil of ``points`` nodes with spacing
    ``step``; the derivatives are those of the interpolating polynomial.
    """
    half = points // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    z0 = np.asarray(lam, dtype=float)
    zs = {0: z0}
    fwd = _integrate(model, z0, (0.0, half * step), tol, offsets[half + 1:] * step, variational=False)
    bwd = _integrate(model, z0, (0.0, -half * step), tol, -offsets[half + 1:] * step, variational=False)
    for k in range(1, half + 1):
        zs[k] = fwd.states[k - 1]
        zs[-k] = bwd.states[k - 1]
    w1 = _stencil_weights(offsets, 1) / step
    w2 = _stencil_weights(offsets, 2) / step ** 2
    results = []
    for f in funcs:
        vals = np.array([np.asarray(f(zs[int(k)]), dtype=float) for k in offsets])
        results.append((np.tensordot(w1, vals, axes=1), np.tensordot(w2, vals, axes=1)))
    return results


def natural_step(model, lam):
    """Time step for along-trajectory differences, scaled by the local rate |A|."""
    A = model.jacobian(np.asarray(lam, dtype=float))
    rate = max(1.0, float(np.linalg.norm(A, 2)))
    return 0.02 / rate


def local_jacobi_derivatives(model, lam, distribution_frame_field=None, step=None):
    """Frames F, F', F'', F''' at h = 0 of the Jacobi curve attached at ``lam``.

    Psi(h) = Phi(h)^{-1} satisfies Psi' = -Psi A(gamma(h)), hence at h = 0

        Psi'   = -A
        Psi''  = A^2 - A'
        Psi''' = -(A^2 - A') A + 2 A A' - A''

    where A' and A'' are derivatives of A along the trajectory.  The frame
    field may have fewer than n columns; the result then describes the
    propagated isotropic frame.
    """
    n = model.n
    z = np.asarray(lam, dtype=float)
    field_ = distribution_frame_field or vertical_field(n)
    constant = getattr(field_, "constant", False)
    h = natural_step(model, z) if step is None else step
    funcs = [model.jacobian]
    if not constant:
        funcs.append(lambda w: _frame_at(field_, w, n))
    ders = along_derivatives(model, z, funcs, h)
    A = model.jacobian(z)
    A1, A2 = ders[0]
    P1 = -A
    P2 = A @ A - A1
    P3 = -P2 @ A + 2 * A @ A1 - A2
    D0 = _frame_at(field_, z, n)
    if constant:
        D1 = D2 = D3 = np.zeros_like(D0)
    else:
        D1, D2 = ders[1]
        D3 = _third_along(model, z, lambda w: _frame_at(field_, w, n), h)
    F0 = D0
    F1 = P1 @ D0 + D1
    F2 = P2 @ D0 + 2 * P1 @ D1 + D2
    F3 = P3 @ D0 + 3 * P2 @ D1 + 3 * P1 @ D2 + D3
    return F0, F1, F2, F3


def _third_along(model, z, f, h, points=9):
    half = points // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    fwd = _integrate(model, z, (0.0, half * h), 2.3e-14, offsets[half + 1:] * h, variational=False)
    bwd = _integrate(model, z, (0.0, -half * h), 2.3e-14, -offsets[half + 1:] * h, variational=False)
    zs = [bwd.states[k - 1] for k in range(half, 0, -1)] + [z] + [fwd.states[k - 1] for k in range(1, half + 1)]
    vals = np.array([f(w) for w in zs])
    return np.tensordot(_stencil_weights(offsets, 3) / h ** 3, vals, axes=1)


def jacobi_jet(model, lambda0, tau=0.0, distribution_frame_field=None, method="taylor", step=None, chart=None,
               tol=DEFAULT_TOL):
    """CoordCurveJet of the Jacobi curve J_{lambda0} at time ``tau``.

    ``method='taylor'`` differentiates the attached curve at gamma(tau) through
    the linearization (J_{lambda0}(tau + h) = Phi(tau)^{-1} J_{gamma(tau)}(h));
    ``method='fd'`` applies the 7-point finite-difference stencil to sampled
    frames with step 1e-2 (|tau| + 1).
    """
    n = model.n
    z0 = np.asarray(lambda0, dtype=float)
    if method == "fd":
        h = default_step(tau) if step is None else step
        grid = tau + h * np.arange(-3, 4)
        samples = jacobi_frames(model, z0, distribution_frame_field, grid, tol=max(tol, 2.3e-14))
        return coordinate_jet(samples, tau, chart=chart)
    if method != "taylor":
        raise InputError(f"unknown jet method {method!r}")
    if tau == 0:
        z, Psi = z0, np.eye(2 * n)
    else:
        traj = flow_with_variations(model, z0, (0.0, tau), max(tol, 2.3e-14))
        y = traj._eval(tau)
        z, Psi = y[: 2 * n], symplectic_inverse(y[2 * n:].reshape(2 * n, 2 * n))
    derivs = local_jacobi_derivatives(model, z, distribution_frame_field, step)
    return jet_from_frame_derivatives(tau, [Psi @ F for F in derivs], chart=chart)
