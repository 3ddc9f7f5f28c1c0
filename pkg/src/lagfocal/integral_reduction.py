"""Reduction of dynamical Lagrangian distributions by involutive first integrals.

For integrals g_1..g_s in involution with H the reduced distribution is

    D^G = (ker dg_1 cap ... cap ker dg_s cap D) + span(g_1->, ..., g_s->)

and its Jacobi curve is the l-reduction of the original Jacobi curve with
l = (g_i->(lambda)).  With the vertical distribution the auxiliary fields are
X_i = (-H_pp^{-1} dg_i/dp, 0), characterized by [H->, X_i] - g_i-> in D, and
Upsilon_{km} = sigma(g_k->, X_m) = <dg_k/dp, H_pp^{-1} dg_m/dp>.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InputError, RegularityError, ReductionDegeneracyError
from .hamiltonian_flow import (
    DEFAULT_TOL,
    _integrate,
    _stencil_weights,
    flow_with_variations,
    jacobi_jet,
    local_jacobi_derivatives,
    natural_step,
)
from .jacobi_geometry import (
    CurvatureReport,
    ReductionData,
    _sym,
    coordinate_jet,
    curve_reduction_delta,
    default_step,
    jet_from_frame_derivatives,
    matrix_schwarzian,
)
from .symplectic_core import (
    IsotropicTuple,
    LagrangianFrame,
    QuotientResult,
    SymplecticSpace,
    canonical_basis,
    check_lagrangian,
    null_space_basis,
    orthonormalize,
    quotient_darboux_basis,
    skew_complement_quotient,
    standard_form,
    symplectic_inverse,
)

INVOLUTION_TOL = 1e-8
UPSILON_CONDITION = 1e10
REDUCTION_MARGIN = 1e-8


@dataclass(frozen=True)
class IntegralTuple:
    """First integrals g_i(p, q) with gradients (dg/dp, dg/dq) as 2n-vectors."""

    n: int
    funcs: tuple = field(repr=False)
    grads: tuple = field(repr=False)
    names: tuple = ()

    def __post_init__(self):
        if len(self.funcs) != len(self.grads):
            raise InputError("need one gradient per integral")
        if len(self.funcs) > self.n:
            raise InputError(f"at most n={self.n} integrals allowed")
        if not self.names:
            object.__setattr__(self, "names", tuple(f"g{i + 1}" for i in range(len(self.funcs))))

    @classmethod
    def empty(cls, n):
        return cls(n, (), ())

    @property
    def s(self):
        return len(self.funcs)

    def values(self, z):
        z = np.asarray(z, dtype=float)
        return np.array([float(g(z[: self.n], z[self.n:])) for g in self.funcs])

    def gradients(self, z):
        """2n x s matrix of (dg/dp, dg/dq)."""
        z = np.asarray(z, dtype=float)
        if not self.grads:
            return np.zeros((2 * self.n, 0))
        return np.column_stack([np.asarray(dg(z[: self.n], z[self.n:]), dtype=float) for dg in self.grads])

    def vector_fields(self, z):
        """2n x s matrix of Hamiltonian fields g-> = (-dg/dq, dg/dp)."""
        G = self.gradients(z)
        return np.vstack([-G[self.n:], G[: self.n]])

    def isotropic_tuple(self, z):
        return IsotropicTuple.from_vectors(self.vector_fields(z), n=self.n)

    def concat(self, other):
        return IntegralTuple(self.n, self.funcs + other.funcs, self.grads + other.grads, self.names + other.names)


def poisson_bracket(n, grad_f, grad_g):
    """{f, g} = <f_p, g_q> - <f_q, g_p>, the derivative of g along f->."""
    return float(grad_f[:n] @ grad_g[n:] - grad_f[n:] @ grad_g[:n])


@dataclass(frozen=True)
class InvolutionReport:
    max_h_bracket: float
    max_pair_bracket: float
    scale: float
    passed: bool
    samples: int


def check_involution(model, integrals, sample_points, tol=INVOLUTION_TOL):
    """Largest |{H, g_i}| and |{g_i, g_j}| over the sample points."""
    pts = [np.asarray(z, dtype=float) for z in sample_points]
    if len(pts) < 10:
        raise InputError("need at least 10 sample points")
    n = model.n
    worst_h = worst_pair = 0.0
    scale = 1.0
    for z in pts:
        gH = model.eval_grad(z[:n], z[n:])
        G = integrals.gradients(z)
        for i in range(integrals.s):
            b = abs(poisson_bracket(n, gH, G[:, i]))
            scale = max(scale, float(np.linalg.norm(gH) * np.linalg.norm(G[:, i])))
            worst_h = max(worst_h, b)
            for j in range(i + 1, integrals.s):
                worst_pair = max(worst_pair, abs(poisson_bracket(n, G[:, i], G[:, j])))
                scale = max(scale, float(np.linalg.norm(G[:, i]) * np.linalg.norm(G[:, j])))
    passed = worst_h <= tol * scale and worst_pair <= tol * scale
    return InvolutionReport(worst_h, worst_pair, scale, passed, len(pts))


@dataclass(frozen=True)
class ReducedDistributionFrame:
    frame: LagrangianFrame
    kernel_part: np.ndarray
    integral_part: np.ndarray
    intersection_dim: int

    @property
    def transversal(self):
        """Whether D meets span(g_i->) only at 0."""
        return self.intersection_dim == 0


def _vertical(n):
    return LagrangianFrame.vertical(n).columns


def reduced_distribution_frame(model, integrals, lam, distribution_frame=None):
    """Frame of (cap ker dg_i) cap D + span(g_i->) at ``lam``."""
    n = model.n
    z = np.asarray(lam, dtype=float)
    D = _vertical(n) if distribution_frame is None else np.asarray(
        distribution_frame(z[:n], z[n:]) if callable(distribution_frame) else distribution_frame, dtype=float)
    s = integrals.s
    if s == 0:
        return ReducedDistributionFrame(LagrangianFrame(model.space, D), D, np.zeros((2 * n, 0)), 0)
    G = integrals.gradients(z)
    sv = np.linalg.svd(G, compute_uv=False)
    if sv[-1] <= 1e-10 * max(sv[0], 1e-300):
        raise RegularityError("integral differentials are dependent at this point", module="integral_reduction")
    Dn = orthonormalize(D)
    coeff = null_space_basis((G.T @ Dn))
    kernel = canonical_basis(Dn @ coeff, dim=coeff.shape[1]) if coeff.shape[1] else np.zeros((2 * n, 0))
    vf = integrals.vector_fields(z)
    # D meets span(g->) iff the combined span drops rank
    J = standard_form(n)
    pairing = Dn.T @ J @ vf
    inter = s - int(np.sum(np.linalg.svd(pairing, compute_uv=False) > 1e-10 * max(1.0, np.abs(pairing).max())))
    cols = np.column_stack([kernel, vf])
    if cols.shape[1] != n or np.linalg.matrix_rank(cols, tol=1e-10 * max(1.0, np.abs(cols).max())) < n:
        raise RegularityError("reduced distribution is degenerate (D meets span of the integral fields)",
                              module="integral_reduction")
    frame = LagrangianFrame(model.space, cols)
    chk = check_lagrangian(frame, tol=1e-8)
    if not chk.ok:
        raise InputError(f"reduced frame is not Lagrangian (defect {chk.defect:.2e}); integrals not in involution?")
    return ReducedDistributionFrame(frame, kernel, vf, inter)


def reduced_frame_field(model, integrals):
    """Frame field lambda -> D^G_lambda, usable wherever a distribution field is expected."""

    def field_(p, q):
        return reduced_distribution_frame(model, integrals, np.concatenate([p, q])).frame.columns

    return field_


# --------------------------------------------------------------------------
# auxiliary fields


def x_fields(model, integrals, z):
    n = model.n
    z = np.asarray(z, dtype=float)
    h = model.eval_hess(z[:n], z[n:])
    Hpp = h[:n, :n]
    sv = np.linalg.svd(Hpp, compute_uv=False)
    if sv[-1] <= 1e-12 * max(sv[0], 1e-300):
        raise RegularityError("H_pp is singular", module="integral_reduction")
    gp = integrals.gradients(z)[:n]
    xi = -np.linalg.solve(Hpp, gp)
    return np.vstack([xi, np.zeros_like(xi)])


def x_fields_and_upsilon(model, integrals, lam, check_condition=True):
    """X_i = (-H_pp^{-1} dg_i/dp, 0) and Upsilon_{km} = sigma(g_k->, X_m)."""
    z = np.asarray(lam, dtype=float)
    X = x_fields(model, integrals, z)
    J = standard_form(model.n)
    U = integrals.vector_fields(z).T @ J @ X
    if check_condition and integrals.s:
        cond = np.linalg.cond(U)
        if not np.isfinite(cond) or cond > UPSILON_CONDITION:
            raise ReductionDegeneracyError(f"Upsilon is singular (condition {cond:.2e})", module="integral_reduction")
    return X, U


def reduction_margin(model, integrals, lam):
    """Scale-free size of Upsilon at lam.

    Smallest eigenvalue of G^T H_pp^{-1} G times |H_pp|, where the columns of
    G are the p-gradients of the integrals, each divided by the norm of the
    full gradient.  It vanishes exactly when D meets span{g->}; near zero
    the reduced curve turns through whole loops over very short times.
    """
    n = model.n
    z = np.asarray(lam, dtype=float)
    if not integrals.s:
        return 1.0
    grads = integrals.gradients(z)
    norms = np.linalg.norm(grads, axis=0)
    if np.any(norms == 0):
        return 0.0
    gp = grads[:n] / norms
    Hpp = model.eval_hess(z[:n], z[n:])[:n, :n]
    ups = gp.T @ np.linalg.solve(Hpp, gp)
    return float(np.linalg.eigvalsh(0.5 * (ups + ups.T))[0] * np.linalg.norm(Hpp, 2))


def bracket_derivatives(model, integrals, lam, step=None, points=9):
    """([H->, X_i], [H->, [H->, X_i]]) at lam as 2n x s matrices.

    Both brackets are derivatives at t = 0 of w(t) = Phi(t)^{-1} X(gamma(t)):
    w' = [H->, X] and w'' = [H->, [H->, X]].  Expanding with Psi = Phi^{-1},

        w'  = X' - A X
        w'' = X'' - 2 A X' + (A^2 - A') X

    where primes on X and A are derivatives along the trajectory, taken on a
    symmetric stencil of integrated points.
    """
    n = model.n
    z0 = np.asarray(lam, dtype=float)
    h = natural_step(model, z0) if step is None else step
    half = points // 2
    offsets = np.arange(-half, half + 1, dtype=float)
    fwd = _integrate(model, z0, (0.0, half * h), 2.3e-14, offsets[half + 1:] * h, variational=False)
    bwd = _integrate(model, z0, (0.0, -half * h), 2.3e-14, -offsets[half + 1:] * h, variational=False)
    zs = [bwd.states[k - 1] for k in range(half, 0, -1)] + [z0] + [fwd.states[k - 1] for k in range(1, half + 1)]
    Xs = np.array([x_fields(model, integrals, w) for w in zs])
    As = np.array([model.jacobian(w) for w in zs])
    w1 = _stencil_weights(offsets, 1) / h
    w2 = _stencil_weights(offsets, 2) / h ** 2
    X0, A0 = Xs[half], As[half]
    X1, X2 = np.tensordot(w1, Xs, axes=1), np.tensordot(w2, Xs, axes=1)
    A1 = np.tensordot(w1, As, axes=1)
    first = X1 - A0 @ X0
    second = X2 - 2 * A0 @ X1 + (A0 @ A0 - A1) @ X0
    return first, second


def bracket_characterization_defect(model, integrals, lam):
    """max |q-part of [H->, X_i] - g_i->|: zero when the difference lies in the vertical D."""
    n = model.n
    first, _ = bracket_derivatives(model, integrals, lam)
    diff = first - integrals.vector_fields(lam)
    scale = max(1.0, float(np.max(np.abs(first))))
    return float(np.max(np.abs(diff[n:]))) / scale if diff.size else 0.0


def kernel_basis(model, integrals, lam):
    """Canonical basis of (cap ker dg_i) cap D for vertical D."""
    n = model.n
    z = np.asarray(lam, dtype=float)
    if integrals.s == 0:
        return _vertical(n)
    gp = integrals.gradients(z)[:n]
    xk = null_space_basis(gp.T)
    return np.vstack([xk, np.zeros_like(xk)])


def smooth_kernel_columns(model, integrals, lam):
    """n columns spanning (cap ker dg_i) cap D for vertical D, polynomial in dg/dp.

    With G the n x s matrix of p-gradients and Gamma = G^T G the columns are
    det(Gamma) I - G adj(Gamma) G^T, which is det(Gamma) times the orthogonal
    projector onto ker G^T.  Unlike an orthonormal kernel basis it has no
    sign or basis jumps along a trajectory.
    """
    n = model.n
    z = np.asarray(lam, dtype=float)
    if integrals.s == 0:
        return _vertical(n)
    gp = integrals.gradients(z)[:n] / np.linalg.norm(integrals.gradients(z), axis=0)
    gram = gp.T @ gp
    det = np.linalg.det(gram)
    if integrals.s == 1:
        adj = np.ones((1, 1))
    elif integrals.s == 2:
        adj = np.array([[gram[1, 1], -gram[0, 1]], [-gram[1, 0], gram[0, 0]]])
    else:
        adj = det * np.linalg.inv(gram)
    cols = det * np.eye(n) - gp @ adj @ gp.T
    return np.vstack([cols, np.zeros_like(cols)])


def dynamical_curvature_delta(model, integrals, lam, basis=None, step=None):
    """Change of the curvature form under reduction by the integrals, on (cap ker dg_i) cap D.

    delta(v) = 3/4 sum (Upsilon^{-1})_{km} sigma([H,[H,X_k]], v) sigma([H,[H,X_m]], v);
    the operator is the form composed with the inverse of Q = H_pp on the same
    subspace.  Vertical distribution only.
    """
    n = model.n
    z = np.asarray(lam, dtype=float)
    X, U = x_fields_and_upsilon(model, integrals, z)
    K = kernel_basis(model, integrals, z) if basis is None else np.asarray(basis, dtype=float)
    Hpp = model.eval_hess(z[:n], z[n:])[:n, :n]
    vel = _sym(K[:n].T @ Hpp @ K[:n])
    J = standard_form(n)
    if integrals.s == 0:
        m = K.shape[1]
        zero = np.zeros((m, m))
        return ReductionData(X, np.zeros((2 * n, 0)), U, zero, zero, K, vel)
    _, second = bracket_derivatives(model, integrals, z, step=step)
    P = second.T @ J @ K
    dform = _sym(0.75 * P.T @ np.linalg.solve(U, P))
    dop = np.linalg.solve(vel, dform)
    return ReductionData(a_vectors=X, a_dot2=second, A=U, delta_form=dform, delta_operator=dop, basis=K,
                         velocity_form=vel)


# --------------------------------------------------------------------------
# curvature reports


def curvature_report(model, lam, method="taylor", distribution_frame_field=None):
    """Curvature of the Jacobi curve attached at ``lam`` (basis = D_lam frame columns)."""
    jet = jacobi_jet(model, lam, 0.0, distribution_frame_field, method=method)
    return matrix_schwarzian(jet)


@dataclass(frozen=True)
class RicciReport:
    original: float
    reduced: float = None
    x_term: float = None
    delta_trace: float = None
    kernel_trace: float = None


def ricci_curvature(model, lam, integrals=None, method="taylor"):
    """rho = tr R; with integrals also the reduced trace

        rho^G = rho - tr(Q_X^{-1} r_X) + tr(delta operator)

    where r_X, Q_X are the curvature and velocity forms on span(X_i), which is
    Q-orthogonal to the kernel subspace.
    """
    z = np.asarray(lam, dtype=float)
    rep = curvature_report(model, z, method=method)
    rho = rep.ricci
    if integrals is None or integrals.s == 0:
        return RicciReport(rho, rho if integrals is not None else None, 0.0, 0.0, rho)
    n = model.n
    X, _ = x_fields_and_upsilon(model, integrals, z)
    Hpp = model.eval_hess(z[:n], z[n:])[:n, :n]
    rX = rep.form_on(X)
    QX = _sym(X[:n].T @ Hpp @ X[:n])
    x_term = float(np.trace(np.linalg.solve(QX, rX)))
    delta = dynamical_curvature_delta(model, integrals, z)
    dtr = float(np.trace(delta.delta_operator))
    return RicciReport(rho, rho - x_term + dtr, x_term, dtr, rho - x_term)


def reduced_curvature_via_theorem(model, integrals, lam, method="taylor"):
    """(original form on K, reduced form on K, basis K) through the X fields and Upsilon."""
    z = np.asarray(lam, dtype=float)
    rep = curvature_report(model, z, method=method)
    delta = dynamical_curvature_delta(model, integrals, z)
    orig = rep.form_on(delta.basis)
    return orig, _sym(orig + delta.delta_form), delta.basis


# --------------------------------------------------------------------------
# brute-force reduced jets


def reduced_jacobi_frames(model, integrals, lambda0, time_grid, tol=DEFAULT_TOL, basis=None):
    """Quotient frames of the reduced Jacobi curve on ``time_grid``.

    J^G(t) = Phi(t)^{-1} D^G(gamma(t)) contains span(g_i->(lambda0)) for all t
    (the integral fields are flow invariant), so each frame is pushed to the
    fixed quotient (span l)^angle / span l with l = g->(lambda0).
    Returns (list of (t, quotient frame), quotient basis).
    """
    n = model.n
    z0 = np.asarray(lambda0, dtype=float)
    ell = integrals.isotropic_tuple(z0)
    space = SymplecticSpace(n)
    if basis is None:
        basis = quotient_darboux_basis(space, ell)
    grid = np.asarray(time_grid, dtype=float)
    lo, hi = min(0.0, grid.min()), max(0.0, grid.max())
    fwd = flow_with_variations(model, z0, (0.0, hi), max(tol, 2.3e-14)) if hi > 0 else None
    bwd = flow_with_variations(model, z0, (0.0, lo), max(tol, 2.3e-14)) if lo < 0 else None
    out = []
    for t in grid:
        if t == 0:
            z, Phi = z0, np.eye(2 * n)
        else:
            y = (fwd if t > 0 else bwd)._eval(t)
            z, Phi = y[: 2 * n], y[2 * n:].reshape(2 * n, 2 * n)
        red = reduced_distribution_frame(model, integrals, z).frame
        cols = symplectic_inverse(Phi) @ red.columns
        q = skew_complement_quotient(LagrangianFrame(space, cols), ell, basis=basis)
        out.append((float(t), q.frame))
    return out, basis


def kernel_frame_field(model, integrals, anchor):
    """Smooth field lambda -> (P_lambda xi_0, 0) spanning (cap ker dg_i) cap D.

    P_lambda is the orthogonal projector onto ker(dg/dp)^T in the impulse
    fibre and xi_0 the kernel basis at ``anchor``.
    """
    n = model.n
    K0 = kernel_basis(model, integrals, anchor)[:n]

    def field_(p, q):
        G = integrals.gradients(np.concatenate([p, q]))[:n]
        P = np.eye(n) - G @ np.linalg.solve(G.T @ G, G.T)
        return np.vstack([P @ K0, np.zeros_like(K0)])

    return field_


def brute_force_reduced_report(model, integrals, lambda0, tau=0.0, method="taylor", step=None, tol=DEFAULT_TOL):
    """Schwarzian of the reduced Jacobi curve computed from its own frames.

    The reduced curve lives in the fixed quotient (span l)^angle / span l with
    l = g->(lambda0).  ``method='taylor'`` differentiates the propagated
    kernel frame field through the linearization and projects the
    derivatives; ``method='fd'`` applies the 7-point stencil to projected
    frames.  Returns (CurvatureReport in quotient coordinates, quotient basis).
    """
    n = model.n
    z0 = np.asarray(lambda0, dtype=float)
    ell = integrals.isotropic_tuple(z0)
    basis = quotient_darboux_basis(SymplecticSpace(n), ell)
    if method == "fd":
        h = default_step(tau) if step is None else step
        grid = tau + h * np.arange(-3, 4)
        frames, basis = reduced_jacobi_frames(model, integrals, z0, grid, tol=tol, basis=basis)
        jet = coordinate_jet(frames, tau)
        return matrix_schwarzian(jet), basis
    if method != "taylor":
        raise InputError(f"unknown jet method {method!r}")
    if tau == 0:
        z, Psi = z0, np.eye(2 * n)
    else:
        traj = flow_with_variations(model, z0, (0.0, tau), max(tol, 2.3e-14))
        y = traj._eval(tau)
        z, Psi = y[: 2 * n], symplectic_inverse(y[2 * n:].reshape(2 * n, 2 * n))
    field_ = kernel_frame_field(model, integrals, z)
    derivs = local_jacobi_derivatives(model, z, field_, step=step)
    proj = QuotientResult(None, basis, None, 0)
    jet = jet_from_frame_derivatives(tau, [proj.project(Psi @ F) for F in derivs])
    return matrix_schwarzian(jet), basis


def brute_force_reduced_form(model, integrals, lambda0, method="taylor", step=None):
    """(reduced curvature form on K, K, report) with K the kernel basis, from the brute-force path."""
    z = np.asarray(lambda0, dtype=float)
    rep, basis = brute_force_reduced_report(model, integrals, z, 0.0, method=method, step=step)
    K = kernel_basis(model, integrals, z)
    proj = QuotientResult(None, basis, None, 0).project(K)
    return rep.form_on(proj), K, rep


def curve_route_delta(model, integrals, lam, method="taylor"):
    """Curve-side reduction delta applied to the Jacobi-curve jet with l = g->(lam)."""
    z = np.asarray(lam, dtype=float)
    jet = jacobi_jet(model, z, 0.0, method=method)
    return curve_reduction_delta(jet, integrals.isotropic_tuple(z))
