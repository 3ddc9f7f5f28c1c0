"""Acceptance suite: one function per criterion, each returning a :class:`CriterionResult`.

Used by ``lagfocal verify`` and by ``tests/test_acceptance.py``.  Every
randomized criterion draws from a fixed seed so the suite is repeatable.
"""
from __future__ import annotations

import filecmp
import os
import tempfile
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy.linalg import expm

from .errors import ReductionDegeneracyError
from .focal_scan import alternation_report, focal_scan, focal_times
from .hamiltonian_flow import classify_monotonicity, integrate_flow
from .integral_reduction import brute_force_reduced_report, curvature_report, \
    dynamical_curvature_delta, reduced_curvature_via_theorem, reduction_margin, ricci_curvature
from .jacobi_geometry import CoordCurveJet, change_chart, curvature_via_derivative_curve, matrix_schwarzian
from .models import PolynomialPotential, _symmetrize, energy_integral, figure_eight_orbit, \
    kepler_reduced_curvature, kepler_state, make_central_potential, make_kepler, make_nbody_planar, \
    make_oscillator, make_polynomial_system, make_random_natural, make_sphere_geodesic, \
    nbody_reduced_ricci_closed_form, random_nbody_state, rotation_integral, sphere_great_circle_state
from .symplectic_core import QuotientResult, standard_form

EIGHT_REDUCED = (0.52, 0.76, 0.95, 1.08, 1.52, 1.56, 1.88, 2.05, 2.29, 2.49, 2.65)
EIGHT_ORIGINAL = (0.76, 0.95, 1.08, 1.42, 1.54, 1.88, 2.05, 2.28, 2.45, 2.65)


@dataclass(frozen=True)
class CriterionResult:
    number: int
    title: str
    passed: bool
    value: float
    tolerance: float
    detail: str = ""
    seconds: float = 0.0

    def line(self):
        mark = "PASS" if self.passed else "FAIL"
        return (f"[{mark}] {self.number:2d} {self.title}: {self.value:.3e} vs tol {self.tolerance:.1e}"
                f"  ({self.detail}; {self.seconds:.1f}s)")


# --------------------------------------------------------------------------
# random instances


def random_symplectic(n, rng, scale=0.5):
    """exp(J S) for a random symmetric S: a symplectic matrix near the identity."""
    S = rng.normal(scale=scale, size=(2 * n, 2 * n))
    return expm(standard_form(n) @ (S + S.T) / 2)


def random_regular_jet(n, rng):
    """Graph-coordinate jet with positive definite S'."""
    sym = [_symmetrize(rng.normal(size=(n, n))) for _ in range(3)]
    B = rng.normal(size=(n, n))
    S1 = B @ B.T + 0.5 * np.eye(n)
    return CoordCurveJet(0.0, sym[0], S1, sym[1], sym[2], basis_change=np.eye(2 * n))


def confining_potential(n, rng):
    """Random quartic potential with a positive radial quartic, so orbits stay bounded."""
    Q = np.linalg.qr(rng.normal(size=(n, n)))[0]
    M = Q @ np.diag(rng.uniform(0.5, 3.0, n)) @ Q.T
    T3 = 0.3 * _symmetrize(rng.normal(size=(n,) * 3))
    T4 = 0.2 * _symmetrize(rng.normal(size=(n,) * 4))
    I = np.eye(n)
    T4 += 1.5 * (np.einsum("ij,kl->ijkl", I, I) + np.einsum("ik,jl->ijkl", I, I) + np.einsum("il,jk->ijkl", I, I))
    return PolynomialPotential(M, T3, T4)


def reduction_instance(rng, kind, n):
    """(model, integrals, state) for the randomized reduction suites.

    kind 0: quartic potential reduced by its energy (s = 1);
    kind 1: central potential reduced by a rotation (s = 1);
    kind 2: central potential reduced by a rotation and the energy (s = 2).
    """
    if kind == 0:
        model = make_polynomial_system(confining_potential(n, rng))
        integrals = energy_integral(model)
    else:
        coeffs = [0.0, rng.uniform(0.5, 2.0), rng.uniform(0.0, 1.0), rng.uniform(0.0, 1.0)]
        model = make_central_potential(n, coeffs)
        integrals = rotation_integral(n, 0, 1)
        if kind == 2:
            integrals = integrals.concat(energy_integral(model))
    z = np.concatenate([rng.normal(size=n), 0.8 * rng.normal(size=n)])
    return model, integrals, z


# --------------------------------------------------------------------------
# criteria


def criterion_kepler():
    model, g = make_kepler()
    worst_thm = worst_jet = 0.0
    for r, c in ((1.0, 1.0), (2.0, 1.0), (1.0, 0.5)):
        z = kepler_state(r, c)
        exact = kepler_reduced_curvature(r, c)
        _, red, K = reduced_curvature_via_theorem(model, g, z)
        worst_thm = max(worst_thm, abs(red[0, 0] / K[0, 0] ** 2 - exact) / abs(exact))
        rep, basis = brute_force_reduced_report(model, g, z)
        direct = _direct_form_on(rep, basis, K)
        worst_jet = max(worst_jet, abs(direct[0, 0] / K[0, 0] ** 2 - exact) / abs(exact))
    ok = worst_thm <= 1e-8 and worst_jet <= 1e-5
    return ok, worst_thm, 1e-8, f"reduced-jet path rel err {worst_jet:.2e} (tol 1e-5)"


def _direct_form_on(rep, basis, K):
    return rep.form_on(QuotientResult(None, basis, None, 0).project(K))


def criterion_natural():
    worst = 0.0
    for k in range(20):
        n = 1 + k % 4
        model, rng = make_random_natural(n, 1000 + k)
        z = rng.normal(size=2 * n)
        rep = curvature_report(model, z)
        hess_u = model.eval_hess(z[:n], z[n:])[n:, n:]
        worst = max(worst, float(np.max(np.abs(rep.form - hess_u))))
    return worst <= 1e-6, worst, 1e-6, "20 potentials, n = 1..4, max entry difference"


def criterion_mobius():
    rng = np.random.default_rng(3)
    worst = 0.0
    for k in range(50):
        n = 1 + k % 3
        jet = random_regular_jet(n, rng)
        base = np.sort(matrix_schwarzian(jet).eigenvalues())
        moved = change_chart(jet, random_symplectic(n, rng))
        other = np.sort(matrix_schwarzian(moved).eigenvalues())
        worst = max(worst, float(np.max(np.abs(base - other)) / max(1.0, np.max(np.abs(base)))))
    return worst <= 1e-7, worst, 1e-7, "50 chart changes, n = 1..3, spectra"


def criterion_derivative_curve():
    rng = np.random.default_rng(4)
    worst = 0.0
    for k in range(100):
        n = 1 + k % 4
        jet = random_regular_jet(n, rng)
        a = matrix_schwarzian(jet).operator
        b = curvature_via_derivative_curve(jet).operator
        worst = max(worst, float(np.max(np.abs(a - b)) / max(1.0, np.max(np.abs(a)))))
    return worst <= 1e-6, worst, 1e-6, "100 jets, n = 1..4, operators"


def criterion_psd_rank():
    rng = np.random.default_rng(5)
    worst_eig = 0.0
    worst_sv = 0.0
    done = 0
    while done < 50:
        s = 1 + done % 2
        kind = 2 if s == 2 else int(rng.integers(0, 2))
        n = int(rng.integers(s + 2, 5))
        model, g, z = reduction_instance(rng, kind, n)
        if reduction_margin(model, g, z) < 1e-4:
            continue
        if classify_monotonicity(model, z)[0] != "monotone-increasing":
            continue
        d = dynamical_curvature_delta(model, g, z)
        form = d.delta_form
        scale = max(1.0, float(np.max(np.abs(form))))
        worst_eig = min(worst_eig, float(np.linalg.eigvalsh(form)[0]) / scale)
        sv = np.linalg.svd(form, compute_uv=False)
        if sv.size > s and sv[0] > 0:
            worst_sv = max(worst_sv, float(sv[s] / sv[0]))
        done += 1
    ok = worst_eig >= -1e-9 and worst_sv <= 1e-8
    return ok, worst_sv, 1e-8, f"50 systems, s = 1, 2; min eigenvalue {worst_eig:.2e} (tol -1e-9)"


def criterion_oscillator():
    model = make_oscillator(1)
    recs = focal_times(model, np.array([0.7, 0.4]), window=(0.0, 10.0))
    times = np.array([r.time for r in recs])
    err = float(np.max(np.abs(times - np.pi * np.arange(1, 4)))) if len(times) == 3 else np.inf
    iso = focal_times(make_oscillator(2, [1.0, 1.0]), np.array([0.3, 1.0, 0.2, -0.5]), window=(0.0, 4.0))
    mult = [r.multiplicity for r in iso]
    ok = err <= 1e-8 and mult == [2] and abs(iso[0].time - np.pi) <= 1e-8
    return ok, err, 1e-8, f"times {np.round(times, 10).tolist()}, isotropic multiplicities {mult}"


def criterion_sphere():
    model = make_sphere_geodesic()
    z = sphere_great_circle_state(0.5, 1.0)
    recs = focal_times(model, z, window=(0.0, 4.0))
    first = recs[0].time if recs else np.inf
    ferr = abs(first - np.pi)
    traj = integrate_flow(model, z, (0.0, 3.0), t_eval=np.linspace(0.0, 3.0, 7))
    rerr = max(abs(ricci_curvature(model, w).original - 1.0) for w in traj.states)
    ok = ferr <= 1e-6 and rerr <= 1e-6
    return ok, max(ferr, rerr), 1e-6, f"first focal {first:.10f}, Ricci err {rerr:.1e} on 7 points"


def criterion_alternation(count=50, seed=7):
    rng = np.random.default_rng(seed)
    bad = []
    done = skipped = 0
    worst = 0
    while done < count:
        kind = done % 3
        n = 3 if kind == 2 else int(rng.integers(2, 4))
        model, g, z = reduction_instance(rng, kind, n)
        try:
            scan = focal_scan(model, z, (0.0, 10.0), g)
        except ReductionDegeneracyError:
            skipped += 1
            continue
        rep = alternation_report(scan)
        ok = rep.inequality_ok and rep.alternating_ok is not False
        worst = max(worst, abs(rep.count_difference) if not rep.inequality_ok else 0)
        if not ok:
            bad.append(done)
        done += 1
    return not bad, float(len(bad)), 0.0, f"{count} instances, {skipped} degenerate redrawn, failing {bad}"


def criterion_figure_eight():
    t0 = time.time()
    z0, T = figure_eight_orbit()
    model, g = make_nbody_planar(3)
    scan = focal_scan(model, z0, (0.0, 3 * T), g)
    rep = alternation_report(scan)
    red = np.array(rep.reduced_times) / T
    orig = np.array(rep.original_times) / T
    shapes = len(red) == len(EIGHT_REDUCED) and len(orig) == len(EIGHT_ORIGINAL)
    err = np.inf
    if shapes:
        err = float(max(np.max(np.abs(red - EIGHT_REDUCED)), np.max(np.abs(orig - EIGHT_ORIGINAL))))
    mult = all(r.multiplicity == 1 for r in scan.originals + scan.reduceds)
    elapsed = time.time() - t0
    ok = shapes and err <= 0.03 and mult and rep.inequality_ok and bool(rep.alternating_ok) and elapsed <= 600
    return ok, err, 0.03, f"{len(red)} reduced / {len(orig)} original, multiplicity one {mult}, " \
                          f"alternation {rep.alternating_ok}"


def criterion_nbody():
    rng = np.random.default_rng(10)
    model, g = make_nbody_planar(3)
    worst = 0.0
    gap_displayed = gap_corrected = 0.0
    for _ in range(10):
        st = random_nbody_state(3, rng)
        z = st.phase
        pipe = ricci_curvature(model, z, g).reduced
        rep, _ = brute_force_reduced_report(model, g, z)
        worst = max(worst, abs(pipe - rep.ricci) / max(1.0, abs(rep.ricci)))
        gap_displayed = max(gap_displayed, abs(pipe - nbody_reduced_ricci_closed_form(st)) / max(1.0, abs(pipe)))
        gap_corrected = max(gap_corrected, abs(pipe - nbody_reduced_ricci_closed_form(st, True)) / max(1.0, abs(pipe)))
    return worst <= 1e-5, worst, 1e-5, (f"closed form as displayed off by {gap_displayed:.1e}, "
                                       f"with +U/I by {gap_corrected:.1e}")


DETERMINISM_CONFIG = """\
model: {name: natural, params: {n: 2, seed: 11}}
window: [0.0, 2.0]
outputs: [curvature, ricci, focal]
seed: 5
grid_points: 400
"""


def criterion_determinism():
    from .cli import run_config
    with tempfile.TemporaryDirectory() as tmp:
        cfg = Path(tmp) / "run.yaml"
        cfg.write_text(DETERMINISM_CONFIG)
        codes = []
        for sub in ("a", "b"):
            with open(os.devnull, "w") as sink:
                codes.append(run_config(cfg, Path(tmp) / sub, stream=sink, echo=False))
        names = sorted(p.name for p in (Path(tmp) / "a").iterdir())
        match, mismatch, errors = filecmp.cmpfiles(Path(tmp) / "a", Path(tmp) / "b", names, shallow=False)
    ok = codes == [0, 0] and not mismatch and not errors and len(match) == len(names) > 0
    return ok, float(len(mismatch) + len(errors)), 0.0, f"{len(match)} files byte-identical, exit codes {codes}"


CRITERIA = {
    1: ("Kepler reduced curvature", criterion_kepler),
    2: ("natural system curvature = Hess U", criterion_natural),
    3: ("Moebius invariance of the spectrum", criterion_mobius),
    4: ("derivative curve vs Schwarzian", criterion_derivative_curve),
    5: ("delta form PSD with rank <= s", criterion_psd_rank),
    6: ("oscillator focal times", criterion_oscillator),
    7: ("sphere focal time and Ricci", criterion_sphere),
    8: ("reduced/original focal alternation suite", criterion_alternation),
    9: ("figure-eight focal table", criterion_figure_eight),
    10: ("N-body reduced Ricci vs direct reduced jet", criterion_nbody),
    11: ("byte-identical reruns", criterion_determinism),
}


def run_criterion(number):
    title, fn = CRITERIA[number]
    t0 = time.time()
    passed, value, tol, detail = fn()
    return CriterionResult(number, title, bool(passed), float(value), float(tol), detail, time.time() - t0)


def run_suite(only=None, echo=False):
    out = []
    for number in sorted(CRITERIA if only is None else only):
        res = run_criterion(number)
        if echo:
            print(res.line(), flush=True)
        out.append(res)
    return out
