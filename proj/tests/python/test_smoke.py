import math

import numpy as np
import pytest

import chiralpair as cp

QD1 = cp.EmitterParams(8.35, cp.ghz_to_angular(12.78), 0.12 * math.pi, 0.015)


def test_probability_is_squared_amplitude():
    amps = cp.amplitudes(QD1, 0.039)
    for config, amp in zip([cp.PortPair.AA, cp.PortPair.AB, cp.PortPair.BA, cp.PortPair.BB], amps):
        assert cp.coincidence_probability(QD1, 0.039, config) == pytest.approx(abs(amp) ** 2, rel=1e-12)


def test_concurrence_peak_and_limits():
    taus = np.linspace(0.0, 1.0, 251)
    peak = max(cp.concurrence_sweep(QD1, list(taus)))
    assert peak == pytest.approx(0.11, abs=0.02)
    assert cp.concurrence_pure(QD1.with_phi(math.pi / 2), 0.2) == pytest.approx(1.0, abs=1e-12)
    assert cp.concurrence_jittered(QD1.with_jitter(0.0), 0.1) == pytest.approx(cp.concurrence_pure(QD1, 0.1), abs=1e-8)


def test_reflection_backout():
    assert cp.ideal_phase_from(0.12 * math.pi, math.sqrt(0.3)) / math.pi == pytest.approx(0.37, abs=0.005)


def test_simulate_correlate_fit():
    inst = cp.InstrumentParams()
    inst.duration = cp.duration_for_pulses(QD1, 1_000_000)
    inst.seed = 4
    streams = cp.simulate_run(QD1, inst)
    assert set(streams) == {"XX@A", "XX@B", "X@A", "X@B"}
    assert all(np.all(np.diff(s.astype(np.int64)) >= 0) for s in streams.values())
    ab = cp.correlate(streams["XX@A"], streams["X@B"], -2000, 2000)
    aa = cp.correlate(streams["XX@A"], streams["X@A"], -2000, 2000)
    assert ab.counts.sum() == ab.total_pairs
    assert len(ab.lags) == 1000
    s1, s2 = cp.fit_two_stage(ab, aa)
    assert s1["converged"] and s2["converged"]
    assert cp.angular_to_ghz(s1["values"]["fss"]) == pytest.approx(12.78, abs=0.1)
    assert s2["values"]["phi"] / math.pi == pytest.approx(0.12, abs=0.03)


def test_alignment_of_synthetic_combs():
    ref = cp.synthetic_comb(peak_counts=1e5, seed=1)
    mov = cp.synthetic_comb(period_ps=13132.3 * (1 + 0.5e-6), tau_zero_ps=37.0, peak_counts=1e5, seed=2)
    period, err = cp.estimate_rep_rate(ref)
    assert period == pytest.approx(13132.3, abs=err)
    info, out = cp.align(ref, mov)
    assert info["applied_shift_ps"] == pytest.approx(-37.0, abs=4.0)
    assert info["residual_lag_bins"] == 0
    assert out.counts.sum() == pytest.approx(mov.counts.sum(), rel=1e-6)


def test_errors_map_to_python_exceptions():
    with pytest.raises(ValueError):
        cp.EmitterParams(-1.0, 1.0, 0.0)
    flat = cp.synthetic_comb(peak_counts=0.0)
    with pytest.raises(cp.AlignmentError):
        cp.estimate_rep_rate(flat)
