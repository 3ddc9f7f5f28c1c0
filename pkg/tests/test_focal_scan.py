import numpy as np
import pytest

from lagfocal.acceptance import reduction_instance
from lagfocal.errors import InputError, MonotonicityError, ReductionDegeneracyError
from lagfocal.focal_scan import (BoundaryWarning, FocalRecord, FocalScan, alternation_report, focal_scan,
                                 focal_times, reduced_focal_times)
from lagfocal.hamiltonian_flow import HamiltonianModel
from lagfocal.integral_reduction import IntegralTuple
from lagfocal.models import energy_integral, kepler_state, make_free_particle, make_kepler, make_oscillator


def _rec(t, kind, m=1):
    return FocalRecord(t, m, kind)


def test_oscillator_single_focal_time():
    recs = focal_times(make_oscillator(1), np.array([0.0, 1.0]), window=(0.0, 3.5))
    assert len(recs) == 1
    assert abs(recs[0].time - np.pi) < 1e-8
    assert recs[0].multiplicity == 1 and recs[0].kind == "original"
    assert recs[0].residual <= 1e-8


def test_oscillator_three_periods():
    recs = focal_times(make_oscillator(1), np.array([0.5, 1.0]), window=(0.0, 10.0))
    assert [r.multiplicity for r in recs] == [1, 1, 1]
    assert np.max(np.abs([r.time for r in recs] - np.pi * np.arange(1, 4))) < 1e-8


def test_isotropic_oscillator_multiplicity_two():
    recs = focal_times(make_oscillator(2), np.array([0.3, -0.1, 1.0, 0.4]), window=(0.0, 3.5))
    assert len(recs) == 1
    assert recs[0].multiplicity == 2 and recs[0].indicator_rank_defect == 2
    assert abs(recs[0].time - np.pi) < 1e-8


def test_anisotropic_oscillator_splits():
    recs = focal_times(make_oscillator(2, [1.0, 2.0]), np.array([0.3, -0.1, 1.0, 0.4]), window=(0.0, 3.5))
    # frequency 2 gives pi/2 and pi, frequency 1 gives pi
    assert np.allclose([r.time for r in recs], [np.pi / 2, np.pi], atol=1e-8)
    assert [r.multiplicity for r in recs] == [1, 2]


def test_free_particle_has_no_focal_times():
    assert focal_times(make_free_particle(2), np.array([1.0, 0.5, 0.0, 0.0]), window=(0.0, 20.0)) == []


def test_start_is_not_counted():
    recs = focal_times(make_oscillator(1), np.array([0.0, 1.0]), window=(1.0, 3.5))
    assert len(recs) == 1
    assert focal_times(make_oscillator(1), np.array([0.0, 1.0]), window=(0.0, 3.0)) == []


def test_boundary_root_warns():
    with pytest.warns(BoundaryWarning):
        recs = focal_times(make_oscillator(1), np.array([0.0, 1.0]), window=(0.0, np.pi))
    assert len(recs) == 1 and abs(recs[0].time - np.pi) < 1e-8


def test_non_monotone_window_rejected():
    H = lambda p, q: p[0] * p[1] + 0.5 * q @ q
    grad = lambda p, q: np.array([p[1], p[0], q[0], q[1]])
    saddle = HamiltonianModel(2, H, grad, name="saddle")
    with pytest.raises(MonotonicityError) as exc:
        focal_times(saddle, np.ones(4), window=(0.0, 1.0))
    assert exc.value.module == "focal_scan"


@pytest.mark.parametrize("window", [(0.0, 0.0), (0.0, -1.0), (-1.0, 2.0), (0.0,)])
def test_bad_window(window):
    with pytest.raises(InputError):
        focal_times(make_oscillator(1), np.array([0.0, 1.0]), window=window)


def test_empty_tuple_reduction_matches_original():
    model = make_oscillator(2, [1.0, 1.3])
    z = np.array([0.3, -0.1, 1.0, 0.4])
    orig = focal_times(model, z, window=(0.0, 7.0))
    red = reduced_focal_times(model, IntegralTuple.empty(2), z, window=(0.0, 7.0))
    assert [(r.time, r.multiplicity) for r in orig] == [(r.time, r.multiplicity) for r in red]
    assert all(r.kind == "reduced" for r in red)


def test_kepler_circular_orbit():
    # amended potential c^2/(2r^2) - 1/r has U_a'' = 1 at r = c = 1: radial period 2 pi
    model, g = make_kepler()
    scan = focal_scan(model, kepler_state(1.0, 1.0), (0.0, 7.0), g)
    assert np.allclose([r.time for r in scan.reduceds], [np.pi, 2 * np.pi], atol=1e-8)
    assert np.allclose([r.time for r in scan.originals], [2 * np.pi], atol=1e-8)
    rep = alternation_report(scan)
    assert rep.inequality_ok and rep.alternating_ok and rep.first_reduced_not_later
    assert scan.counts == {"original": 1, "reduced": 2}


def test_degenerate_reduction_rejected():
    # g = H on the oscillator: H_p = p vanishes at the turning point t = pi/2
    model = make_oscillator(2, [1.0, 1.5])
    with pytest.raises(ReductionDegeneracyError) as exc:
        reduced_focal_times(model, energy_integral(model), np.array([1.0, 0.0, 0.0, 0.0]), window=(0.0, 3.0))
    assert exc.value.time is not None and exc.value.time <= np.pi / 2 + 1e-2


def test_reduction_needs_fewer_integrals_than_freedoms():
    model, g = make_kepler()
    with pytest.raises(InputError):
        reduced_focal_times(model, g.concat(energy_integral(model)), kepler_state(1.0, 1.0), window=(0.0, 1.0))


def test_alternation_empty_original():
    scan = FocalScan((0.0, 1.0), [], [_rec(0.5, "reduced")], s=1)
    rep = alternation_report(scan)
    assert rep.count_difference == 1 and rep.inequality_ok and rep.alternating_ok


def test_alternation_negative_difference_flags_bug():
    scan = FocalScan((0.0, 1.0), [_rec(0.5, "original")], [], s=1)
    rep = alternation_report(scan)
    assert rep.count_difference == -1
    assert not rep.inequality_ok and not rep.alternating_ok and not rep.first_reduced_not_later


def test_alternation_interleaving_violation():
    scan = FocalScan((0.0, 5.0), [_rec(1.0, "original"), _rec(2.0, "original")],
                     [_rec(0.5, "reduced"), _rec(0.8, "reduced"), _rec(3.0, "reduced")], s=1)
    rep = alternation_report(scan)
    assert rep.inequality_ok and not rep.alternating_ok


def test_alternation_expands_multiplicity():
    scan = FocalScan((0.0, 5.0), [_rec(1.0, "original", 2)], [_rec(0.5, "reduced"), _rec(1.0, "reduced", 2)], s=2)
    rep = alternation_report(scan)
    assert rep.reduced_times == (0.5, 1.0, 1.0) and rep.original_times == (1.0, 1.0)
    assert rep.count_difference == 1 and rep.inequality_ok and rep.alternating_ok is None


def test_randomized_count_inequality():
    rng = np.random.default_rng(21)
    for k in range(4):
        kind = k % 3
        model, g, z = reduction_instance(rng, kind, 3 if kind == 2 else 2 + k % 2)
        scan = focal_scan(model, z, (0.0, 6.0), g)
        rep = alternation_report(scan)
        assert rep.inequality_ok
        assert rep.first_reduced_not_later
        if g.s == 1:
            assert rep.alternating_ok
        for r in scan.originals + scan.reduceds:
            assert r.residual <= 1e-8


def test_scan_is_grid_independent():
    rng = np.random.default_rng(22)
    model, g, z = reduction_instance(rng, 1, 3)
    a = focal_scan(model, z, (0.0, 6.0), g, grid_points=500)
    b = focal_scan(model, z, (0.0, 6.0), g, grid_points=3000)
    assert a.counts == b.counts
    assert np.allclose([r.time for r in a.reduceds], [r.time for r in b.reduceds], atol=1e-8)
