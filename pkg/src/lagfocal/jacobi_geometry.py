"""Curvature of regular curves in the Lagrange Grassmannian.

A curve t -> Lambda(t) is handled through a coordinate chart in which
Lambda(t) = {(x, S_t x)} for a symmetric matrix S_t.  All curvature data come
from the 3-jet (S, S', S'', S''') at one time:

* curvature operator   = 1/2 S'^{-1} S''' - 3/4 (S'^{-1} S'')^2   (matrix Schwarzian)
* curvature form       = -1/2 S''' + 3/4 S'' S'^{-1} S''
* velocity form        = -S'

all expressed in the basis {(e_i, S e_i)} of Lambda(tau).  With the form
sigma = <x1, y2> - <x2, y1> the velocity quadratic form of a graph curve is
-S', which is why the curvature form carries a minus sign.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ChartError, InputError, ReductionDegeneracyError, RegularityError, TransversalityError
from .symplectic_core import (
    IsotropicTuple,
    LagrangianFrame,
    SymplecticSpace,
    canonical_basis,
    identification,
    is_symplectic,
    null_space_basis,
    orthonormalize,
    standard_form,
)

REGULARITY_TOL = 1e-10
SYMMETRY_TOL = 1e-8
CHART_GOOD = 1e-2


class AccuracyWarning(UserWarning):
    """Finite-difference jet is dominated by noise or truncation error."""


def _sym(M):
    return 0.5 * (M + M.T)


@dataclass(frozen=True)
class CoordCurveJet:
    """S and its first three derivatives at ``tau`` in one Darboux chart.

    ``basis_change`` maps ambient coordinates to chart coordinates (it is a
    symplectic matrix); ``chart_basis`` is its inverse, whose columns are the
    chart basis vectors written in ambient coordinates.
    """

    tau: float
    S: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    S3: np.ndarray
    basis_change: np.ndarray = field(repr=False)
    error_estimate: float = 0.0

    @property
    def n(self):
        return self.S.shape[0]

    @property
    def chart_basis(self):
        J = standard_form(self.n)
        return -J @ self.basis_change.T @ J

    def symmetrized(self):
        return replace(self, S=_sym(self.S), S1=_sym(self.S1), S2=_sym(self.S2), S3=_sym(self.S3))

    def symmetry_defect(self):
        return max(float(np.max(np.abs(M - M.T))) if M.size else 0.0 for M in (self.S, self.S1, self.S2, self.S3))

    def regularity_ratio(self):
        sv = np.linalg.svd(self.S1, compute_uv=False)
        return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0

    def require_regular(self):
        if self.regularity_ratio() < REGULARITY_TOL:
            raise RegularityError("curve is not regular (S' is singular)", module="jacobi_geometry", time=self.tau)
        return self

    def frame(self):
        """Ambient frame of Lambda(tau) with columns (e_i, S e_i) pulled back from the chart."""
        cols = np.vstack([np.eye(self.n), self.S])
        return LagrangianFrame(SymplecticSpace(self.n), self.chart_basis @ cols)

    def to_chart(self, vectors):
        return self.basis_change @ np.asarray(vectors, dtype=float)


@dataclass(frozen=True)
class CurvatureReport:
    operator: np.ndarray
    form: np.ndarray
    ricci: float
    basis: np.ndarray = field(repr=False)
    velocity: np.ndarray = field(default=None, repr=False)

    def expressed_in(self, vectors):
        """Operator and form matrices in another basis of the same subspace."""
        C = np.linalg.lstsq(self.basis, np.asarray(vectors, dtype=float), rcond=None)[0]
        op = np.linalg.solve(C, self.operator @ C)
        form = C.T @ self.form @ C
        vel = None if self.velocity is None else C.T @ self.velocity @ C
        return CurvatureReport(op, _sym(form), float(np.trace(op)), np.asarray(vectors, dtype=float), vel)

    def form_on(self, vectors):
        C = np.linalg.lstsq(self.basis, np.asarray(vectors, dtype=float), rcond=None)[0]
        return _sym(C.T @ self.form @ C)

    def eigenvalues(self):
        return np.sort(np.linalg.eigvals(self.operator).real)


# --------------------------------------------------------------------------
# graph coordinates and exact jet propagation


def rotation_chart(n, k):
    """exp(k pi/4 J): the map (x, y) -> ((x + y)/sqrt2, (y - x)/sqrt2) applied k times."""
    c, s = np.cos(k * np.pi / 4), np.sin(k * np.pi / 4)
    eye = np.eye(n)
    return np.block([[c * eye, s * eye], [-s * eye, c * eye]])


def chart_quality(frame_cols, chart):
    X = (chart @ orthonormalize(frame_cols))[: frame_cols.shape[1]]
    sv = np.linalg.svd(X, compute_uv=False)
    return float(sv[-1] / sv[0]) if sv[0] > 0 else 0.0


def choose_chart(frame, base_change=None):
    """Chart (ambient -> chart matrix) in which ``frame`` is a graph over x.

    Starting from ``base_change`` (identity by default) the fixed rotation by
    pi/4 is applied repeatedly until the x-block is well conditioned.
    """
    n = frame.n
    base = np.eye(2 * n) if base_change is None else np.asarray(base_change, dtype=float)
    best, best_q = None, -1.0
    for k in range(8):
        C = rotation_chart(n, k) @ base
        q = chart_quality(frame.columns, C)
        if q >= CHART_GOOD:
            return C
        if q > best_q:
            best, best_q = C, q
    if best_q < REGULARITY_TOL:
        raise ChartError("no rotation chart makes the subspace a graph", module="jacobi_geometry")
    return best


def graph_matrix(frame_cols, chart):
    Z = chart @ np.asarray(frame_cols, dtype=float)
    n = Z.shape[1]
    X, Y = Z[:n], Z[n:]
    try:
        return np.linalg.solve(X.T, Y.T).T
    except np.linalg.LinAlgError as exc:
        raise ChartError("subspace is not a graph in this chart", module="jacobi_geometry") from exc


def graph_jet(F0, F1, F2, F3):
    """Exact (S, S', S'', S''') of S = Y X^{-1} from a frame [X; Y] and its derivatives."""
    n = F0.shape[1]
    X = [F[:n] for F in (F0, F1, F2, F3)]
    Y = [F[n:] for F in (F0, F1, F2, F3)]
    try:
        W0 = np.linalg.inv(X[0])
    except np.linalg.LinAlgError as exc:
        raise ChartError("frame is not a graph in this chart", module="jacobi_geometry") from exc
    W1 = -W0 @ X[1] @ W0
    W2 = -(W1 @ X[1] @ W0 + W0 @ X[2] @ W0 + W0 @ X[1] @ W1)
    W3 = -(W2 @ X[1] @ W0 + 2 * W1 @ X[2] @ W0 + 2 * W1 @ X[1] @ W1
           + W0 @ X[3] @ W0 + 2 * W0 @ X[2] @ W1 + W0 @ X[1] @ W2)
    S0 = Y[0] @ W0
    S1 = Y[1] @ W0 + Y[0] @ W1
    S2 = Y[2] @ W0 + 2 * Y[1] @ W1 + Y[0] @ W2
    S3 = Y[3] @ W0 + 3 * Y[2] @ W1 + 3 * Y[1] @ W2 + Y[0] @ W3
    return S0, S1, S2, S3


def jet_from_frame_derivatives(tau, derivs, chart=None):
    """Jet of a curve given ambient frame derivatives F, F', F'', F''' at ``tau``."""
    F0 = np.asarray(derivs[0], dtype=float)
    n = F0.shape[1]
    if chart is None:
        chart = choose_chart(LagrangianFrame(SymplecticSpace(n), F0))
    S = graph_jet(*(chart @ np.asarray(F, dtype=float) for F in derivs))
    return CoordCurveJet(tau, *S, basis_change=chart).symmetrized()


def mobius_transform(S, A, B, C, D):
    """(C + D S)(A + B S)^{-1}: graph coordinates after the chart change [[A, B], [C, D]]."""
    S = np.atleast_2d(np.asarray(S, dtype=float))
    blocks = [np.atleast_2d(np.asarray(M, dtype=float)) for M in (A, B, C, D)]
    A, B, C, D = blocks
    M = np.block([[A, B], [C, D]])
    if not is_symplectic(M, tol=1e-8 * max(1.0, np.abs(M).max() ** 2)):
        raise InputError("Moebius blocks must come from a symplectic matrix")
    X = A + B @ S
    if np.linalg.svd(X, compute_uv=False)[-1] < 1e-12 * max(1.0, np.abs(X).max()):
        raise ChartError("A + B S is not invertible", module="jacobi_geometry")
    return np.linalg.solve(X.T, (C + D @ S).T).T


def change_chart(jet, M):
    """Exact jet of the same curve after applying the symplectic chart map M.

    New chart coordinates are ``M @ old_chart_coordinates``.
    """
    M = np.asarray(M, dtype=float)
    n = jet.n
    if not is_symplectic(M, tol=1e-8 * max(1.0, np.abs(M).max() ** 2)):
        raise InputError("chart change must be symplectic")
    zero = np.zeros((n, n))
    F0 = np.vstack([np.eye(n), jet.S])
    derivs = [F0] + [np.vstack([zero, Sk]) for Sk in (jet.S1, jet.S2, jet.S3)]
    S = graph_jet(*(M @ F for F in derivs))
    return CoordCurveJet(jet.tau, *S, basis_change=M @ jet.basis_change,
                         error_estimate=jet.error_estimate).symmetrized()


# --------------------------------------------------------------------------
# finite-difference jets


def _stencil_weights(offsets, order):
    """Weights w with sum_k w_k f(k h) ~ h^order f^(order)(0) (exact on polynomials)."""
    offsets = np.asarray(offsets, dtype=float)
    m = len(offsets)
    V = np.vander(offsets, m, increasing=True).T        # V[j, k] = offset_k^j
    rhs = np.zeros(m)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(V, rhs)


def sample_offsets(points=7):
    if points < 7 or points % 2 == 0:
        raise InputError("need an odd number (>= 7) of stencil points")
    half = points // 2
    return np.arange(-half, half + 1, dtype=float)


def default_step(tau):
    return 1e-2 * (abs(tau) + 1.0)


def coordinate_jet(samples, tau, chart=None, warn_tol=1e-3):
    """Jet of S_t at ``tau`` from frames sampled on a symmetric uniform stencil.

    The derivatives are central differences Richardson-extrapolated over the
    whole stencil (equivalently, the exact derivatives of the interpolating
    polynomial); the spread against the next-smaller stencil is kept as
    ``error_estimate`` and triggers :class:`AccuracyWarning` above ``warn_tol``.

    If Lambda(tau) meets the chart's vertical {(0, y)} the chart is rotated
    by the fixed pi/4 symplectic rotation until it does not.
    """
    samples = sorted(((float(t), fr) for t, fr in samples), key=lambda item: item[0])
    if len(samples) < 7 or len(samples) % 2 == 0:
        raise InputError("need an odd number (>= 7) of samples on a symmetric stencil")
    times = np.array([t for t, _ in samples])
    mid = len(samples) // 2
    h = times[mid + 1] - times[mid]
    offsets = (times - tau) / h
    if abs(times[mid] - tau) > 1e-12 * max(1.0, abs(tau)) or not np.allclose(offsets, np.round(offsets), atol=1e-9):
        raise InputError("samples must form a uniform stencil centred at tau")
    offsets = np.round(offsets)
    centre = samples[mid][1]
    if chart is None:
        chart = choose_chart(centre)
    Ss = np.array([graph_matrix(fr.columns, chart) for _, fr in samples])
    derivs = []
    errors = []
    inner = slice(1, len(samples) - 1)
    for order in range(4):
        if order == 0:
            derivs.append(Ss[mid])
            continue
        w = _stencil_weights(offsets, order)
        d = np.tensordot(w, Ss, axes=1) / h ** order
        derivs.append(d)
        w_in = _stencil_weights(offsets[inner], order)
        d_in = np.tensordot(w_in, Ss[inner], axes=1) / h ** order
        errors.append(float(np.max(np.abs(d - d_in)) / max(1.0, np.max(np.abs(d)))))
    err = max(errors)
    if err > warn_tol:
        warnings.warn(f"finite-difference jet at tau={tau:.6g} has relative spread {err:.2e}", AccuracyWarning,
                      stacklevel=2)
    jet = CoordCurveJet(tau, *derivs, basis_change=chart, error_estimate=err)
    return jet.symmetrized()


# --------------------------------------------------------------------------
# curvature


def matrix_schwarzian(jet):
    """Curvature operator, form and Ricci trace of the curve at ``jet.tau``."""
    jet.require_regular()
    V = np.linalg.inv(jet.S1)
    VS2 = V @ jet.S2
    operator = 0.5 * V @ jet.S3 - 0.75 * VS2 @ VS2
    form = _sym(-0.5 * jet.S3 + 0.75 * jet.S2 @ V @ jet.S2)
    basis = jet.frame().columns
    return CurvatureReport(operator, form, float(np.trace(operator)), basis, velocity=-jet.S1)


def derivative_subspace(jet):
    """Ambient frame of the derivative subspace Lambda°(tau)."""
    jet.require_regular()
    F = _derivative_frame(jet)[0]
    return LagrangianFrame(SymplecticSpace(jet.n), jet.chart_basis @ F)


def _derivative_frame(jet):
    """Chart frame [M; I + S M] of Lambda° and its exact time derivative."""
    n = jet.n
    V = np.linalg.inv(jet.S1)
    V1 = -V @ jet.S2 @ V
    M = -0.5 * V @ jet.S2 @ V
    M1 = -0.5 * (V1 @ jet.S2 @ V + V @ jet.S3 @ V + V @ jet.S2 @ V1)
    F = np.vstack([M, np.eye(n) + jet.S @ M])
    dF = np.vstack([M1, jet.S1 @ M + jet.S @ M1])
    return F, dF


def velocity_matrix(frame_cols, dframe_cols):
    """Velocity quadratic form sigma(l', l) of a moving frame, in the frame basis."""
    J = standard_form(frame_cols.shape[1])
    return _sym(dframe_cols.T @ J @ frame_cols)


def curvature_via_derivative_curve(jet):
    """Curvature operator R = -(d/dt Lambda°) o (d/dt Lambda) through the canonical identifications.

    Lambda* is identified with Lambda° and (Lambda°)* with Lambda by the
    pairing B(w)(v) = sigma(w, v); the velocities are read as self-adjoint
    maps Lambda -> Lambda* and Lambda° -> (Lambda°)*.
    """
    jet.require_regular()
    n = jet.n
    space = SymplecticSpace(n)
    zero = np.zeros((n, n))
    F = np.vstack([np.eye(n), jet.S])
    dF = np.vstack([zero, jet.S1])
    Fo, dFo = _derivative_frame(jet)
    lam, lam_o = LagrangianFrame(space, F), LagrangianFrame(space, Fo)
    try:
        to_circ = identification(lam, lam_o, "derivative subspace")     # Lambda* -> Lambda°
        to_lam = identification(lam_o, lam, "curve")                    # (Lambda°)* -> Lambda
    except TransversalityError as exc:
        raise TransversalityError(str(exc), module="jacobi_geometry", time=jet.tau) from exc
    vel = velocity_matrix(F, dF)
    vel_o = velocity_matrix(Fo, dFo)
    operator = -to_lam @ vel_o @ to_circ @ vel
    form = _sym(vel @ operator)
    return CurvatureReport(operator, form, float(np.trace(operator)), jet.chart_basis @ F, velocity=vel)


# --------------------------------------------------------------------------
# reduction by an isotropic tuple


@dataclass(frozen=True)
class ReductionData:
    """Ingredients of the curve-side reduction delta at tau for the tuple l.

    Vectors are ambient; ``basis`` spans Lambda(tau) cap l^angle and both
    ``delta_form`` and ``delta_operator`` are expressed in it.
    ``delta_operator`` is the difference of curvature operators compressed to
    that subspace (velocity-orthogonal projection); ``delta_operator_full``
    is the uncompressed map into Lambda(tau) in the chart basis.
    """

    a_vectors: np.ndarray
    a_dot2: np.ndarray
    A: np.ndarray
    delta_form: np.ndarray
    delta_operator: np.ndarray
    basis: np.ndarray
    velocity_form: np.ndarray
    delta_operator_full: np.ndarray = field(default=None, repr=False)

    @property
    def s(self):
        return self.A.shape[0]

    def rank(self, rel_tol=1e-8):
        if self.delta_form.size == 0:
            return 0
        sv = np.linalg.svd(self.delta_form, compute_uv=False)
        if sv[0] == 0:
            return 0
        return int(np.sum(sv > rel_tol * sv[0]))

    def min_eigenvalue(self):
        if self.delta_form.size == 0:
            return 0.0
        return float(np.linalg.eigvalsh(self.delta_form)[0])


def _a_vector_jet(jet, Lc):
    """Chart coordinates of a_i(t), a_i'(t), a_i''(t) at tau.

    a_i(t) = (b_i, S b_i) with b_i = S'^{-1}(l_y - S l_x), the unique vector of
    Lambda(t) whose velocity pairing reproduces sigma(l_i, .).
    """
    n = jet.n
    lx, ly = Lc[:n], Lc[n:]
    V = np.linalg.inv(jet.S1)
    V1 = -V @ jet.S2 @ V
    V2 = -(V1 @ jet.S2 @ V + V @ jet.S3 @ V + V @ jet.S2 @ V1)
    G0 = ly - jet.S @ lx
    G1 = -jet.S1 @ lx
    G2 = -jet.S2 @ lx
    b0 = V @ G0
    b1 = V1 @ G0 + V @ G1
    b2 = V2 @ G0 + 2 * V1 @ G1 + V @ G2
    a0 = np.vstack([b0, jet.S @ b0])
    a2 = np.vstack([b2, jet.S2 @ b0 + 2 * jet.S1 @ b1 + jet.S @ b2])
    return a0, a2, G0


def curve_reduction_delta(jet, ell, degeneracy_tol=1e-10):
    """Change of curvature form/operator on Lambda cap l^angle after l-reduction.

    delta(v) = 3/4 sum_{km} (A^{-1})_{km} sigma(a_k'', v) sigma(a_m'', v)
    with a_i = (d/dt Lambda)^{-1} B_Lambda(l_i) and A_{km} = sigma(l_k, a_m).
    """
    jet.require_regular()
    n = jet.n
    if ell.space.n != n:
        raise InputError("isotropic tuple lives in a different space")
    J = standard_form(n)
    s = ell.s
    Lc = jet.to_chart(ell.vectors)
    a0, a2, G0 = _a_vector_jet(jet, Lc)
    A = Lc.T @ J @ a0                                    # sigma(l_k, a_m)
    A = _sym(A)
    if s:
        sv = np.linalg.svd(A, compute_uv=False)
        if sv[-1] <= degeneracy_tol * max(sv[0], 1e-300) or sv[0] == 0:
            raise ReductionDegeneracyError(
                "det A = 0 (for monotone curves: Lambda(tau) meets span l)",
                module="jacobi_geometry", time=jet.tau)
    # Lambda cap l^angle = {(x, S x) : G0^T x = 0}
    xk = null_space_basis(G0.T) if s else np.eye(n)
    chart_basis = jet.chart_basis
    kern = canonical_basis(chart_basis @ np.vstack([xk, jet.S @ xk]), dim=xk.shape[1])
    kc = jet.to_chart(kern)
    xk = kc[:n]
    vel = -xk.T @ jet.S1 @ xk
    if s:
        P = a2.T @ J @ kc                                # P[k, i] = sigma(a_k'', v_i)
        Ainv = np.linalg.inv(A)
        dform = _sym(0.75 * P.T @ Ainv @ P)
        doper = np.linalg.solve(vel, dform)
        # images (d/dt Lambda)^{-1} B(a_k'') as x-coordinates in the chart basis
        imgs = np.linalg.solve(jet.S1, a2[n:] - jet.S @ a2[:n])
        full = 0.75 * imgs @ Ainv @ P
    else:
        m = xk.shape[1]
        dform = np.zeros((m, m))
        doper = np.zeros((m, m))
        full = np.zeros((n, m))
    return ReductionData(
        a_vectors=chart_basis @ a0,
        a_dot2=chart_basis @ a2,
        A=A,
        delta_form=dform,
        delta_operator=doper,
        basis=kern,
        velocity_form=_sym(vel),
        delta_operator_full=full,
    )


def reduce_coordinate_curve(jet, ell, reduction, tol=1e-8):
    """Jet of C(S_t) (top-left (n-s) block) for a jet given in the adapted basis.

    The adapted basis puts Lambda(tau) cap l^angle on the first n-s horizontal
    axes, l_i on (0, e_{n-s+i}) and a_i on the last s horizontal axes; in that
    chart C(S_t) is a coordinate representation of the reduced curve.
    """
    n, s = jet.n, ell.s
    if s == 0:
        return jet
    scale = max(1.0, float(np.max(np.abs(jet.S1))))
    if np.max(np.abs(jet.S)) > tol * scale:
        raise InputError("jet is not in an adapted chart (S(tau) != 0)")
    Lc = jet.to_chart(ell.vectors)
    target = np.zeros((2 * n, s))
    target[n + n - s:, :] = np.eye(s)
    if np.max(np.abs(Lc - target)) > tol * max(1.0, np.max(np.abs(Lc))):
        raise InputError("isotropic tuple is not in normal form in this chart")
    Vinv = np.linalg.inv(jet.S1)
    m = n - s
    block1 = float(np.max(np.abs(Vinv[:m, m:]))) if m else 0.0
    block2 = float(np.max(np.abs(Vinv[m:, m:] + reduction.A)))
    ref = max(1.0, float(np.max(np.abs(Vinv))))
    if block1 > 1e-6 * ref or block2 > 1e-6 * ref:
        raise ReductionDegeneracyError(
            f"adapted-chart block structure violated (off-diagonal {block1:.2e}, A-block {block2:.2e})",
            module="jacobi_geometry", time=jet.tau)
    reduced = [M[:m, :m] for M in (jet.S, jet.S1, jet.S2, jet.S3)]
    return CoordCurveJet(jet.tau, *reduced, basis_change=np.eye(2 * m), error_estimate=jet.error_estimate)


def block_structure_defects(jet, A):
    """(max |off-diagonal block of S'^{-1}|, max |lower-right block + A|)."""
    s = A.shape[0]
    m = jet.n - s
    Vinv = np.linalg.inv(jet.S1)
    off = float(np.max(np.abs(Vinv[:m, m:]))) if m and s else 0.0
    low = float(np.max(np.abs(Vinv[m:, m:] + A))) if s else 0.0
    return off, low
