import math
from fractions import Fraction

import numpy as np
import pytest

from ddmag.decay import coherence_gain
from ddmag.sensitivity import (
    OUDecay, SensorParams, T2Decay, UndetectableFrequencyError, eta_base,
    eta_effective, eta_ideal, eta_ratio, optimal_time, period_for_frequency,
    records_to_csv, records_to_json, scan, sequence_for_period,
)
from ddmag.sequences import Scheme, constant, pdd, rotary_echo, spin_lock

OMEGA = 2 * np.pi * 1e6


def test_sensor_validation():
    with pytest.raises(ValueError):
        SensorParams(C=0.0)
    with pytest.raises(ValueError):
        SensorParams(C=1.5)
    with pytest.raises(ValueError):
        SensorParams(gamma=-1.0)
    with pytest.raises(ValueError):
        eta_base(0.0)


def test_eta_base():
    s = SensorParams(gamma=2.0, C=0.5)
    assert eta_base(4.0, s) == pytest.approx(math.pi / 4)


@pytest.mark.parametrize("scheme,k,band,ratio", [
    ("pdd", 1, "opt", 1.0),
    ("re", 1, "opt", 1.5),
    ("re", 4, "opt", 1.875),
    ("re", 4, "low", 7.875),
    ("constant", 1, "opt", 4 / math.pi),
    ("spinlock", 1, "opt", 4 / math.pi),
])
def test_eta_ratios(scheme, k, band, ratio):
    assert eta_ratio(scheme, k, band) == pytest.approx(ratio, abs=1e-12)
    assert eta_ideal(scheme, 1e-3, k=k, band=band) / eta_base(1e-3) == pytest.approx(ratio)


@pytest.mark.parametrize("k", range(1, 9))
def test_low_over_opt_ratio_exact(k):
    seq = rotary_echo(OMEGA, k, 3)
    lo = eta_effective(seq, band="low").eta_effective
    hi = eta_effective(seq, band="opt").eta_effective
    expected = Fraction(4 * k * k - 1, 4 * k - 1)
    assert lo / hi == pytest.approx(float(expected), rel=1e-12)
    assert eta_ratio("re", k, "low") / eta_ratio("re", k, "opt") == pytest.approx(float(expected))


@pytest.mark.parametrize("seq", [rotary_echo(OMEGA, 2, 4), pdd(1e-6, 4), constant(OMEGA, 4),
                                 spin_lock(OMEGA, 4)], ids=["re", "pdd", "constant", "spinlock"])
def test_noiseless_matched_equals_ideal(seq):
    r = eta_effective(seq)
    assert r.Phi == 1 and r.D == 1
    assert r.W == pytest.approx(1.0, abs=1e-9)
    assert r.eta_effective == pytest.approx(r.eta_ideal, rel=1e-9)


def test_unknown_phase_penalty():
    for seq in (rotary_echo(OMEGA, 1, 2), pdd(1e-6, 2), constant(OMEGA, 2)):
        r = eta_effective(seq, phi="unknown")
        assert r.eta_effective / r.eta_ideal == pytest.approx(math.sqrt(2), rel=1e-9)


def test_decay_placement():
    class FixedDecay:
        def __call__(self, seq):
            return math.exp(-1)

    r = eta_effective(rotary_echo(OMEGA, 1, 5), decay=FixedDecay())
    assert r.eta_effective == pytest.approx(math.e * r.eta_ideal)
    assert r.eta_effective == pytest.approx(r.eta_ideal * r.Phi / (r.W * r.D))


def test_rounding_to_whole_cycles():
    seq = rotary_echo(OMEGA, 1)
    r = eta_effective(seq, t=3.7 * seq.T)
    assert r.n == 3 and r.rounded
    assert r.t == pytest.approx(3 * seq.T)
    exact = eta_effective(seq, t=3 * seq.T)
    assert exact.n == 3 and not exact.rounded
    with pytest.raises(ValueError):
        eta_effective(seq, t=0.5 * seq.T)


def test_stop_band_is_undetectable():
    seq = rotary_echo(OMEGA, 1, 3)
    with pytest.raises(UndetectableFrequencyError):
        eta_effective(seq, omega=OMEGA)  # W has a double zero at the Rabi frequency


def test_optimal_time():
    assert optimal_time(1, 500e-6) == pytest.approx(275.2e-6, abs=0.1e-6)
    assert optimal_time(8, 1.0) / optimal_time(1, 1.0) == pytest.approx(4.0)
    with pytest.raises(ValueError):
        optimal_time(0, 1.0)


@pytest.mark.parametrize("n", [1, 8])
def test_optimal_time_is_grid_argmin_independent_of_sensor(n):
    t2 = 500e-6
    t_star = optimal_time(n, t2)
    ts = np.linspace(0.2, 2.0, 1801) * t_star
    for sensor in (SensorParams(), SensorParams(gamma=1e7, C=0.9)):
        table = scan("time", ts, "pdd", n=n, decay=T2Decay(t2), sensor=sensor)
        best = table.axis_values[np.argmin(table.eta)]
        assert abs(best - t_star) <= ts[1] - ts[0]


def test_t2_decay_rescales_rotary_echo():
    d = T2Decay(1e-4)
    assert d.effective_t2("re", 2) == pytest.approx(1e-4 * coherence_gain(2))
    assert d.effective_t2("pdd") == 1e-4
    assert T2Decay(1e-4, rescale_re=False).effective_t2("re", 2) == 1e-4
    noise = d.equivalent_noise()
    assert 2 * noise.sigma**2 / (3 * noise.tau_c) == pytest.approx(1 / 1e-4**3)


def test_ou_decay_paths():
    seq = rotary_echo(4 * math.pi, 1, 3)
    assert OUDecay(0.0, 1.0)(seq) == 1.0
    d = OUDecay(0.5, 1.0)(seq)
    assert 0 < d < 1
    p = OUDecay(0.5, 1000.0)(pdd(1.0, 3))
    assert 0 < p < 1
    c = OUDecay(0.5, 1.0, n_traj=200)(constant(4 * math.pi, 3))
    assert 0 < c <= 1


def test_time_scan_shape():
    t2 = 500e-6
    ts = np.geomspace(5e-6, 2e-3, 200)
    eta = scan("time", ts, "re", k=1, n=1, decay=T2Decay(t2)).eta
    i = int(np.argmin(eta))
    assert 0 < i < len(ts) - 1
    assert np.all(np.diff(eta[:i]) < 0) and np.all(np.diff(eta[i:]) > 0)
    # below the optimum the scan follows t^(-1/2)
    assert eta[0] / eta[10] == pytest.approx(math.sqrt(ts[10] / ts[0]), rel=1e-3)


def test_k_scan_matched_frequencies():
    table = scan("k", [1, 2, 3, 4], "re", n=2, omega=OMEGA)
    opts = [r.matched_omega for _, r in table.rows]
    assert all(a < b for a, b in zip(opts, opts[1:]))
    assert opts[-1] < OMEGA
    lows = [r.matched_omega for _, r in scan("k", [1, 2, 4], "re", n=2, omega=OMEGA,
                                             band="low").rows]
    np.testing.assert_allclose(lows, [OMEGA / 2, OMEGA / 4, OMEGA / 8])


def test_n_scan_fixed_time():
    table = scan("n", [1, 2, 5], "pdd", t=1e-4)
    for value, r in table.rows:
        assert r.n == value and r.t == pytest.approx(1e-4)
        assert r.matched_omega == pytest.approx(2 * math.pi * value / 1e-4)


def test_scan_validation_and_order():
    with pytest.raises(ValueError):
        scan("energy", [1.0], "pdd")
    with pytest.raises(ValueError):
        scan("k", [1.5], "re", omega=OMEGA)
    with pytest.raises(ValueError):
        scan("n", [1], "pdd")
    table = scan("time", [3e-6, 1e-6, 2e-6], "pdd", n=1)
    assert list(table.axis_values) == sorted(table.axis_values)


def test_frequency_scan_fig4_ordering():
    t2 = 500e-6
    f = 2 * np.pi * np.geomspace(1e3, 1e6, 300)
    d = T2Decay(t2)
    P = scan("frequency", f, "pdd", n=50, decay=d).eta
    R1 = scan("frequency", f, "re", k=1, n=50, decay=d).eta
    R4 = scan("frequency", f, "re", k=4, n=50, decay=d).eta
    # 8 pi-RE beats PDD at the PDD optimum frequency and overall
    assert R4[np.argmin(P)] < P.min()
    assert R4.min() < P.min()
    # 2 pi-RE reaches the PDD optimum at a lower frequency
    reach = f[np.argmax(R1 <= P.min())]
    assert np.any(R1 <= P.min()) and reach < f[np.argmin(P)]


def test_parallel_scan_identical():
    ts = np.linspace(1e-5, 1e-3, 40)
    a = scan("time", ts, "re", k=2, n=3, decay=T2Decay(500e-6))
    b = scan("time", ts, "re", k=2, n=3, decay=T2Decay(500e-6), workers=3)
    assert records_to_csv(a.to_records()) == records_to_csv(b.to_records())


def test_export_formats():
    table = scan("frequency", [2 * np.pi * 1e5], "pdd", n=10)
    rec = table.to_records("hz")
    assert rec[0]["axis_value"] == pytest.approx(1e5)
    text = records_to_csv(rec)
    assert text.splitlines()[0] == ("scheme,axis_value,eta_ideal_T_sqrtHz,Phi,W,D,"
                                    "eta_eff_T_sqrtHz,matched_freq_Hz")
    assert '"scheme": "pdd"' in records_to_json(rec)


def test_sequence_helpers():
    assert sequence_for_period("re", 2.0, 3).omega == pytest.approx(6 * math.pi)
    assert sequence_for_period("constant", 2.0).omega == pytest.approx(math.pi)
    assert sequence_for_period("pdd", 2.0).T == 2.0
    assert period_for_frequency("re", 7.0, 4, "opt") == pytest.approx(2 * math.pi)
    assert period_for_frequency(Scheme.PDD, 1.0) == pytest.approx(2 * math.pi)
