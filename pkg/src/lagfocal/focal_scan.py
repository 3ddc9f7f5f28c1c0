"""Focal times of dynamical Lagrangian distributions and of their reductions.

A time t > 0 is focal when the Jacobi curve J(t) meets J(0) nontrivially.
Each Lagrangian subspace with orthonormal frame [X; Y] gives the unitary
U = X + iY; with Z = U_0^* U(t) the symmetric unitary Z Z^T has eigenvalue 1
exactly on the intersection J(t) cap J(0), with matching multiplicity.  The
eigen-phases are tracked continuously in t; a focal time is a crossing of a
tracked phase through a multiple of 2 pi.  Unlike a determinant sign scan this
also sees roots of even multiplicity.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, linear_sum_assignment, minimize_scalar

from .errors import InputError, MonotonicityError, ReductionDegeneracyError
from .hamiltonian_flow import DEFAULT_TOL, classify_monotonicity, flow_with_variations, vertical_field, _frame_at
from .integral_reduction import REDUCTION_MARGIN, reduction_margin, smooth_kernel_columns, x_fields_and_upsilon
from .symplectic_core import QuotientResult, SymplecticSpace, quotient_darboux_basis, standard_form, \
    symplectic_inverse

DEFAULT_GRID = 2000
MAX_PHASE_STEP = 0.3
STEP_BOUND = 0.25
MERGE_TOL = 1e-7
RANK_TOL = 1e-8


class BoundaryWarning(UserWarning):
    """A focal time sits on the window end point."""


@dataclass(frozen=True)
class FocalRecord:
    time: float
    multiplicity: int
    kind: str
    residual: float = 0.0
    indicator_rank_defect: int = None


@dataclass
class FocalScan:
    window: tuple
    originals: list = field(default_factory=list)
    reduceds: list = field(default_factory=list)
    s: int = 0

    @property
    def counts(self):
        return {"original": sum(r.multiplicity for r in self.originals),
                "reduced": sum(r.multiplicity for r in self.reduceds)}


# --------------------------------------------------------------------------
# curves of Lagrangian subspaces along a trajectory


class _JacobiCurve:
    """t -> orthonormal frame of the (possibly reduced) Jacobi curve."""

    def __init__(self, model, lambda0, t_max, frame_field=None, integrals=None, tol=DEFAULT_TOL):
        self.model = model
        self.n = model.n
        self.z0 = np.asarray(lambda0, dtype=float)
        self.traj = flow_with_variations(model, self.z0, (0.0, t_max), tol)
        self.field = frame_field or vertical_field(self.n)
        self.integrals = integrals
        if integrals is not None and integrals.s:
            ell = integrals.isotropic_tuple(self.z0)
            basis = quotient_darboux_basis(SymplecticSpace(self.n), ell)
            self.proj = QuotientResult(None, basis, None, 0)
        else:
            self.proj = None
        self.rank = self.n - (integrals.s if self.proj is not None else 0)
        if self.proj is None:
            self.rank = _frame_at(self.field, self.z0, self.n).shape[1]
        self.reference = self.frame(0.0)
        ref = self.reference
        m = ref.shape[1]
        self.U0 = ref[:m] + 1j * ref[m:]

    def state(self, t):
        return self.traj.state(t)

    def raw(self, t):
        """Frame of J(t) that is smooth in t but neither orthonormal nor of full column rank."""
        n = self.n
        y = self.traj._eval(t)
        z, Phi = y[: 2 * n], y[2 * n:].reshape(2 * n, 2 * n)
        Psi = symplectic_inverse(Phi)
        if self.proj is None:
            return Psi @ _frame_at(self.field, z, n)
        return self.proj.project(Psi @ smooth_kernel_columns(self.model, self.integrals, z))

    def split(self, R):
        """(orthonormal frame, right preconditioner C with R C = frame, smallest kept singular value)."""
        u, sv, vt = np.linalg.svd(R, full_matrices=False)
        r = self.rank
        return u[:, :r], vt[:r].T / sv[:r], sv[r - 1] if r else 1.0

    def frame(self, t):
        return self.split(self.raw(t))[0]

    def phases(self, t):
        return self.phases_of(self.frame(t))

    def phases_of(self, F):
        m = F.shape[1]
        Z = self.U0.conj().T @ (F[:m] + 1j * F[m:])
        return np.angle(np.linalg.eigvals(Z @ Z.T))

    def indicator(self, t):
        """Singular values of F_0^T J F(t): zero exactly on the intersection."""
        F = self.frame(t)
        J = standard_form(F.shape[1])
        return np.linalg.svd(self.reference.T @ J @ F, compute_uv=False)


def _wrap(a):
    return (a + np.pi) % (2 * np.pi) - np.pi


def _match(prev, new):
    cost = np.abs(_wrap(new[None, :] - prev[:, None]))
    rows, cols = linear_sum_assignment(cost)
    out = np.empty_like(prev)
    out[rows] = prev[rows] + _wrap(new[cols] - prev[rows])
    return out


def _track(curve, grid):
    """Unwrapped eigen-phase tracks on an adaptively refined grid.

    The curve has a raw frame R(t) that is smooth on the scale of the grid.  At
    an accepted node R_a = F_a S_a with F_a orthonormal; an interval is split
    until |R_b C_a - F_a| <= STEP_BOUND, C_a = S_a^+.  Along the straight
    segment between R_a C_a and R_b C_a the rank cannot drop and the subspace
    turns by less than arcsin(STEP_BOUND / (1 - STEP_BOUND)), so no loop of
    the Lagrangian curve is lost between samples, however fast it is.  The
    eigen-phases are also required to move by less than MAX_PHASE_STEP.
    """
    m = curve.rank
    F, C, _ = curve.split(curve.raw(grid[0]))
    times = [float(grid[0])]
    nodes = [(F, C)]
    tracks = [np.zeros(m)] if grid[0] == 0 else [np.sort(curve.phases_of(F))]
    for t_next in grid[1:]:
        stack = [float(t_next)]
        while stack:
            t_b = stack[-1]
            t_a = times[-1]
            Fa, Ca = nodes[-1]
            Rb = curve.raw(t_b)
            Fb, Cb, _ = curve.split(Rb)
            drift = float(np.linalg.norm(Rb @ Ca - Fa, 2)) if m else 0.0
            new = _match(tracks[-1], curve.phases_of(Fb))
            jump = float(np.max(np.abs(new - tracks[-1]))) if m else 0.0
            if (drift > STEP_BOUND or jump > MAX_PHASE_STEP) and t_b - t_a > 1e-12 * max(1.0, t_b):
                stack.append(0.5 * (t_a + t_b))
                continue
            times.append(t_b)
            nodes.append((Fb, Cb))
            tracks.append(new)
            stack.pop()
    return np.array(times), np.array(tracks)


def _refine(curve, t_a, t_b, theta_a, theta_b, level, tol):
    def f(t):
        ph = curve.phases(t)
        guess = theta_a + (theta_b - theta_a) * (t - t_a) / (t_b - t_a)
        k = int(np.argmin(np.abs(_wrap(ph - guess))))
        return float(_wrap(ph[k] - level))

    fa = theta_a - level
    fb = theta_b - level
    if fa == 0:
        return t_a
    if fb == 0:
        return t_b
    try:
        return brentq(f, t_a, t_b, xtol=tol, rtol=4 * np.finfo(float).eps, maxiter=200)
    except ValueError:
        # the nearest-phase selection flipped; fall back to linear interpolation
        return t_a + (t_b - t_a) * fa / (fa - fb)


def _scan_curve(curve, window, kind, tol, grid_points, rank_tol=RANK_TOL):
    t_min, t_max = float(window[0]), float(window[1])
    grid = np.linspace(0.0, t_max, grid_points + 1)
    times, tracks = _track(curve, grid)
    roots = []
    for i in range(1, len(times)):
        ta, tb = times[i - 1], times[i]
        for j in range(tracks.shape[1]):
            a, b = tracks[i - 1, j], tracks[i, j]
            lo, hi = min(a, b), max(a, b)
            levels = 2 * np.pi * np.arange(np.ceil(lo / (2 * np.pi)), np.floor(hi / (2 * np.pi)) + 1)
            for L in levels:
                if ta == 0.0 and a == L:
                    continue                      # the starting point is never counted
                if a == L:
                    continue                      # counted in the previous interval
                roots.append(_refine(curve, ta, tb, a, b, L, tol))
    roots.sort()
    groups = []
    for r in roots:
        if groups and r - groups[-1][-1] <= MERGE_TOL * max(1.0, abs(r)):
            groups[-1].append(r)
        else:
            groups.append([r])
    records = []
    for g in groups:
        t = float(np.mean(g))
        if t <= t_min or t > t_max:
            continue
        if t_max - t <= 1e-9 * max(1.0, t_max):
            warnings.warn(f"focal time {t:.10g} sits on the window end", BoundaryWarning, stacklevel=3)
        sv = curve.indicator(t)
        scale = max(1.0, float(sv[0])) if sv.size else 1.0
        rank_defect = int(np.sum(sv <= rank_tol * scale))
        records.append(FocalRecord(t, len(g), kind, float(sv[-1]) if sv.size else 0.0, rank_defect))
    # a crossing exactly at t_max may stop short of the next level
    if not records or t_max - records[-1].time > 1e-9 * max(1.0, t_max):
        sv = curve.indicator(t_max)
        scale = max(1.0, float(sv[0])) if sv.size else 1.0
        defect = int(np.sum(sv <= rank_tol * scale))
        if defect:
            warnings.warn(f"focal time {t_max:.10g} sits on the window end", BoundaryWarning, stacklevel=3)
            records.append(FocalRecord(t_max, defect, kind, float(sv[-1]), defect))
    return records


def _require_monotone(model, curve, samples=50):
    t_max = curve.traj.t_final
    for t in np.linspace(0.0, t_max, samples):
        label, _ = classify_monotonicity(model, curve.state(t))
        if label != "monotone-increasing":
            raise MonotonicityError(f"distribution is {label} along the window", module="focal_scan", time=float(t))


def _require_nondegenerate(model, integrals, curve, t_max, grid_points):
    """Upsilon must stay invertible on [0, t_max], also between grid nodes."""

    def margin(t):
        z = curve.state(t)
        try:
            x_fields_and_upsilon(model, integrals, z)
        except ReductionDegeneracyError as exc:
            raise ReductionDegeneracyError(str(exc), module="focal_scan", time=float(t)) from exc
        return reduction_margin(model, integrals, z)

    def fail(t, m):
        raise ReductionDegeneracyError(f"reduction nearly degenerate (margin {m:.2e})", module="focal_scan",
                                       time=float(t))

    ts = np.linspace(0.0, t_max, grid_points + 1)
    ms = np.array([margin(t) for t in ts])
    for t, m in zip(ts, ms):
        if m < REDUCTION_MARGIN:
            fail(t, m)
    # Upsilon can touch zero between nodes: polish every small local minimum
    for i in range(1, len(ts) - 1):
        if ms[i] <= ms[i - 1] and ms[i] <= ms[i + 1] and ms[i] < 1e-2:
            res = minimize_scalar(margin, bounds=(ts[i - 1], ts[i + 1]), method="bounded",
                                  options={"xatol": 1e-13 * max(1.0, t_max)})
            if res.fun < REDUCTION_MARGIN:
                fail(res.x, res.fun)


def focal_times(model, lambda0, distribution_frame_field=None, window=(0.0, np.pi), tol=1e-10,
                grid_points=DEFAULT_GRID, check_monotone=True, integ_tol=DEFAULT_TOL, rank_tol=RANK_TOL):
    """Focal times (with multiplicity) of the distribution along the orbit of ``lambda0``."""
    _check_window(window)
    curve = _JacobiCurve(model, lambda0, window[1], distribution_frame_field, tol=integ_tol)
    if check_monotone and distribution_frame_field is None:
        _require_monotone(model, curve)
    return _scan_curve(curve, window, "original", tol, grid_points, rank_tol)


def reduced_focal_times(model, integrals, lambda0, window=(0.0, np.pi), tol=1e-10, grid_points=DEFAULT_GRID,
                        check_monotone=True, integ_tol=DEFAULT_TOL, rank_tol=RANK_TOL):
    """Focal times of the reduction by ``integrals`` (vertical distribution)."""
    _check_window(window)
    if integrals is None or integrals.s == 0:
        recs = focal_times(model, lambda0, None, window, tol, grid_points, check_monotone, integ_tol, rank_tol)
        return [FocalRecord(r.time, r.multiplicity, "reduced", r.residual, r.indicator_rank_defect) for r in recs]
    if integrals.s >= model.n:
        raise InputError(f"need fewer integrals than degrees of freedom (s={integrals.s}, n={model.n})")
    curve = _JacobiCurve(model, lambda0, window[1], integrals=integrals, tol=integ_tol)
    if check_monotone:
        _require_monotone(model, curve)
    _require_nondegenerate(model, integrals, curve, window[1], grid_points)
    return _scan_curve(curve, window, "reduced", tol, grid_points, rank_tol)


def focal_scan(model, lambda0, window, integrals=None, tol=1e-10, grid_points=DEFAULT_GRID, integ_tol=DEFAULT_TOL,
               rank_tol=RANK_TOL):
    """Original and reduced focal times on ``window`` bundled as a :class:`FocalScan`."""
    orig = focal_times(model, lambda0, None, window, tol, grid_points, integ_tol=integ_tol, rank_tol=rank_tol)
    s = 0 if integrals is None else integrals.s
    red = reduced_focal_times(model, integrals, lambda0, window, tol, grid_points, integ_tol=integ_tol,
                              rank_tol=rank_tol) if s else []
    return FocalScan((float(window[0]), float(window[1])), orig, red, s)


def _check_window(window):
    if len(window) != 2 or not window[1] > window[0] or window[0] < 0:
        raise InputError(f"window must be (t_min, t_max] with 0 <= t_min < t_max, got {window!r}")


# --------------------------------------------------------------------------
# alternation


@dataclass(frozen=True)
class AlternationReport:
    count_difference: int
    inequality_ok: bool
    alternating_ok: bool
    first_reduced_not_later: bool
    reduced_times: tuple
    original_times: tuple


def _expand(records):
    out = []
    for r in sorted(records, key=lambda rec: rec.time):
        out.extend([r.time] * r.multiplicity)
    return out


def alternation_report(scan, s=None, tol=1e-6):
    """Count inequality 0 <= #red - #orig <= s and, for s = 1, tau_i <= t_i <= tau_{i+1}."""
    s = scan.s if s is None else s
    tau = _expand(scan.reduceds)
    t = _expand(scan.originals)
    diff = len(tau) - len(t)
    ineq = 0 <= diff <= s
    alternating = None
    if s == 1:
        alternating = True
        for i, ti in enumerate(t):
            if i >= len(tau) or tau[i] > ti + tol:
                alternating = False
                break
            if i + 1 < len(tau) and ti > tau[i + 1] + tol:
                alternating = False
                break
    first_ok = True
    if t:
        first_ok = bool(tau) and tau[0] <= t[0] + tol
    return AlternationReport(diff, ineq, alternating, first_ok, tuple(tau), tuple(t))
