import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddmag.response import (
    UNKNOWN_PHASE, accumulated_phase, avg_field_factor, avg_field_factor_for,
    fwhm_main_peak, passbands, passbands_json, phase_penalty, weight,
    weight_numeric, weight_profile, weight_re, weight_re_pole_limit,
)
from ddmag.sequences import Scheme, constant, matched_frequencies, pdd, rotary_echo, spin_lock

OMEGA = 2 * np.pi * 1e6


def test_avg_field_factor_examples():
    assert avg_field_factor(rotary_echo(OMEGA, 1)) == pytest.approx(4 / (3 * np.pi))
    assert avg_field_factor(rotary_echo(OMEGA, 1)) == pytest.approx(0.42441, abs=1e-5)
    assert avg_field_factor(pdd(1.0)) == pytest.approx(2 / np.pi)
    assert avg_field_factor(constant(OMEGA)) == 0.5
    with pytest.raises(ValueError):
        avg_field_factor_for("re", 2, 2)


@pytest.mark.parametrize("seq", [rotary_echo(OMEGA, 1, 2), rotary_echo(OMEGA, 4, 1),
                                 pdd(1e-6, 3), constant(OMEGA, 2), spin_lock(OMEGA, 2)],
                         ids=["re1", "re4", "pdd", "constant", "spinlock"])
def test_avg_field_factor_by_quadrature(seq):
    w = matched_frequencies(seq)["opt"]
    bbar = abs(accumulated_phase(seq, w)) / seq.total_time
    assert bbar == pytest.approx(avg_field_factor(seq), rel=1e-9)


@pytest.mark.parametrize("k", [1, 3])
def test_rotary_echo_harmonics_by_quadrature(k):
    seq = rotary_echo(OMEGA, k, 1)
    for m in (1, 3, 5, 7):
        if m == 2 * k:
            continue
        w = m * 2 * np.pi / seq.T
        bbar = abs(accumulated_phase(seq, w)) / seq.T
        assert bbar == pytest.approx(avg_field_factor_for("re", k, m), rel=1e-8)


@pytest.mark.parametrize("k", [1, 2, 4, 8])
def test_weight_at_matched_frequencies(k):
    seq = rotary_echo(OMEGA, k, 3)
    m = matched_frequencies(seq)
    assert weight(seq, m["opt"]) == pytest.approx(1.0, abs=1e-12)
    low = Fraction(4 * k - 1, 4 * k * k - 1)
    assert weight(seq, m["low"]) == pytest.approx(float(low), abs=1e-12)


def test_weight_low_band_k4():
    seq = rotary_echo(OMEGA, 4, 2)
    assert weight(seq, OMEGA / 8) == pytest.approx(5 / 21, abs=1e-12)
    assert weight_numeric(seq, OMEGA / 8) == pytest.approx(5 / 21, abs=1e-9)
    assert weight_re_pole_limit(4, 1) == pytest.approx(5 / 21)


def test_weight_zero_of_sine():
    k, n, T = 1, 3, 1.0
    # sin(n T w) = 0 away from the tangent poles
    w = 5 * np.pi / (n * T)
    assert weight_re(w, k, n, T) == pytest.approx(0.0, abs=1e-14)


def test_weight_closed_form_vs_quadrature_small():
    seq = rotary_echo(OMEGA, 2, 2)
    grid = np.linspace(0.05, 4.0, 157) * OMEGA
    np.testing.assert_allclose(weight_re(grid, 2, 2, seq.T), weight_numeric(seq, grid),
                               atol=1e-9)


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 6), st.integers(1, 6), st.floats(0.01, 5.0))
def test_weight_bounds(k, n, x):
    seq = rotary_echo(OMEGA, k, n)
    W = weight(seq, x * OMEGA)
    # W can exceed 1 by a few percent next to the optimal band (see notes)
    assert 0.0 <= W <= 1.05


def test_weight_slightly_exceeds_one_near_optimum():
    seq = rotary_echo(1.0, 1, 1)
    grid = np.linspace(0.3, 0.7, 4001)
    assert np.max(weight(seq, grid)) > 1.01


def test_passbands():
    T = 1.0
    b1 = passbands(1, T, 2, 3)
    assert b1[0].p == 0 and b1[0].center == pytest.approx(2 * np.pi / T)
    b4 = passbands(4, T, 2, 3)
    omega = 4 * np.pi * 4 / T
    assert b4[0].p == -3 and b4[0].center == pytest.approx(omega / 8)
    for bands, k in ((b1, 1), (b4, 4)):
        strongest = max(bands, key=lambda b: b.height)
        assert strongest.p == 0 and strongest.height == pytest.approx(1.0)
        om = 4 * np.pi * k / T
        for b in bands:
            assert b.height == pytest.approx(
                (4 * k - 1) / (4 * k * k) * om**2 / abs(b.center**2 - om**2))
    assert '"p": -3' in passbands_json(b4)


def test_passband_heights_decay_away_from_omega():
    bands = passbands(4, 1.0, 1, 6)
    above = [b.height for b in bands if b.p >= 1]
    assert all(a > b for a, b in zip(above, above[1:]))


def test_fwhm_examples():
    seq = rotary_echo(OMEGA, 1, 2)
    w2 = fwhm_main_peak(seq, 2)
    assert w2 == pytest.approx(7.58 / (4 * seq.T), rel=0.05)
    assert fwhm_main_peak(seq, 10) == pytest.approx(w2 / 5, rel=0.05)
    c = constant(OMEGA, 2)
    # constant drive at the same period T as the rotary echo
    c_same = constant(2 * np.pi / seq.T, 2)
    ratio = fwhm_main_peak(c_same, 2) / w2
    assert 0.5 < ratio < 2
    assert fwhm_main_peak(c, 2) > 0


def test_pdd_harmonics_and_constant_selectivity():
    p = pdd(1.0, 2)
    w0 = 2 * np.pi
    for m in (1, 3, 5, 7, 9):
        assert weight(p, m * w0) == pytest.approx(1 / m, rel=0.02)
    c = constant(OMEGA, 2)
    assert weight(c, 3 * OMEGA) < 0.02


def test_phase_penalty():
    assert phase_penalty("pdd", np.pi / 2) == pytest.approx(1.0)
    assert phase_penalty("re", np.pi / 4) == pytest.approx(math.sqrt(2))
    for s in Scheme:
        assert phase_penalty(s, UNKNOWN_PHASE) == pytest.approx(math.sqrt(2))
    assert phase_penalty("pdd", 0.0) == math.inf
    assert phase_penalty("spinlock", 0.0) == 1.0
    assert phase_penalty("constant", np.pi / 2) == 1.0
    with pytest.raises(ValueError):
        phase_penalty("re", "random")


def test_weight_profile_csv():
    prof = weight_profile(rotary_echo(OMEGA, 1, 2), np.linspace(0.05, 4.0, 5))
    text = prof.to_csv()
    assert text.splitlines()[0] == "omega_rad_s,omega_over_Omega,W"
    assert len(text.splitlines()) == 6
    with pytest.raises(ValueError):
        weight_profile(pdd(1.0), [1.0], method="closed")
