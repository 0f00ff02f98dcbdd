"""Spectral response of the decoupling schemes.

The accumulated phase for a field b cos(omega t + phi) over t = nT is
b * integral(cos(omega t + phi) f(t) dt); the weight function W(omega) is its
magnitude normalized to the scheme's matched frequency.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .sequences import (
    Scheme,
    SequenceSpec,
    matched_frequencies,
    optimal_phase,
    square_wave,
)

POLE_GUARD = 1e-6
DEFAULT_POINTS_PER_PERIOD = 4096
MIN_POINTS_PER_PERIOD = 1000
UNKNOWN_PHASE = "unknown"


class PeakNotBracketedError(RuntimeError):
    """The half-height crossings of a peak could not be located."""


# -- average field -----------------------------------------------------------


def avg_field_factor_for(scheme, k: int = 1, m: int | None = None) -> float:
    """b_bar / b for the field at harmonic m of the period, optimal phase.

    Rotary echo needs odd m and gives 4k / (pi |4k^2 - m^2|), which is
    4k / (pi (4k - 1)) at the optimal harmonic m = 2k - 1. PDD gives the
    square-wave Fourier weight 2 / (pi m); constant drive and spin locking
    only respond at m = 1, where b_bar = b / 2.
    """
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ROTARY_ECHO:
        m = 2 * k - 1 if m is None else int(m)
        if m < 1 or m % 2 == 0:
            raise ValueError("rotary echo needs an odd harmonic m")
        return 4 * k / (math.pi * abs(4 * k * k - m * m))
    m = 1 if m is None else int(m)
    if m < 1:
        raise ValueError("harmonic must be positive")
    if scheme is Scheme.PDD:
        if m % 2 == 0:
            raise ValueError("PDD responds only at odd harmonics")
        return 2 / (math.pi * m)
    return 0.5 if m == 1 else 0.0


def avg_field_factor(seq: SequenceSpec, m: int | None = None) -> float:
    return avg_field_factor_for(seq.scheme, seq.k, m)


# -- closed-form rotary-echo weight -------------------------------------------


def weight_re(omega, k: int, n: int, T: float):
    """Closed-form rotary-echo weight function.

    W = (4k-1)/n / |(4k)^2 - (T w/pi)^2| * |sin(n T w) tan(T w / 4)|

    Every pass-band centre T w = 2 pi (2j - 1) is a removable 0 * inf point
    where |sin * tan| -> 4n; within ``POLE_GUARD`` of it the even series
    |sin * tan| = 4n + O(d^2) is used.
    """
    w = np.asarray(omega, dtype=float)
    if np.any(w <= 0):
        raise ValueError("frequency must be positive")
    x = T * w
    j = np.maximum(np.rint((x / (2 * np.pi) + 1) / 2), 1)
    d = x - 2 * np.pi * (2 * j - 1)
    near = np.abs(d) < POLE_GUARD
    denom = np.abs((4 * k) ** 2 - (x / np.pi) ** 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        st = np.abs(np.sin(n * x) * np.tan(x / 4))
        st = np.where(near, 4.0 * n, st)
        out = (4 * k - 1) / n * st / denom
    # double zero over a simple zero at w = Omega
    out = np.where(denom == 0, 0.0, out)
    return out if out.ndim else float(out)


def weight_re_pole_limit(k: int, j: int) -> float:
    """W at the pass-band centre T w = 2 pi (2j - 1)."""
    m = 2 * j - 1
    return 4 * (4 * k - 1) / abs(16 * k * k - 4 * m * m)


# -- quadrature weight ---------------------------------------------------------


def _simpson_nodes(seq: SequenceSpec, n: int, points_per_period: int):
    """Nodes and Simpson weights times f(t), split at every half period.

    Panels end on the switch points, so f is taken one-sided there.
    """
    if points_per_period < MIN_POINTS_PER_PERIOD:
        raise ValueError(f"need at least {MIN_POINTS_PER_PERIOD} points per period")
    half = points_per_period // 2
    half += half % 2  # even number of intervals per panel
    T = seq.period
    h = (T / 2) / half
    base = np.full(half + 1, 2.0)
    base[1::2] = 4.0
    base[0] = base[-1] = 1.0
    base *= h / 3
    nodes, gw = [], []
    for seg in range(2 * n):
        t = seg * T / 2 + h * np.arange(half + 1)
        t[-1] = (seg + 1) * T / 2
        sign = 1.0 if seg % 2 == 0 else -1.0
        if seq.scheme is Scheme.PDD:
            f = np.full(t.size, sign)
        elif seq.scheme is Scheme.ROTARY_ECHO:
            f = sign * np.sin(seq.omega * t)
        elif seq.scheme is Scheme.CONSTANT:
            f = np.sin(seq.omega * t)
        else:
            f = np.cos(seq.omega * t)
        nodes.append(t)
        gw.append(base * f)
    return np.concatenate(nodes), np.concatenate(gw)


def accumulated_phase(seq, omega, n=None, phi=None,
                      points_per_period=DEFAULT_POINTS_PER_PERIOD):
    """integral_0^{nT} cos(omega t + phi) f(t) dt by composite Simpson."""
    n = seq.n if n is None else n
    phi = optimal_phase(seq.scheme) if phi is None else phi
    t, g = _simpson_nodes(seq, n, points_per_period)
    w = np.atleast_1d(np.asarray(omega, dtype=float))
    out = np.empty(w.shape)
    batch = max(1, int(2e7 // t.size))
    for s in range(0, w.size, batch):
        out[s:s + batch] = np.cos(np.outer(w[s:s + batch], t) + phi) @ g
    return out if np.ndim(omega) else float(out[0])


def weight_numeric(seq: SequenceSpec, omega, n: int | None = None,
                   points_per_period: int = DEFAULT_POINTS_PER_PERIOD):
    """Quadrature weight function, normalized at the matched frequency.

    Oracle for ``weight_re`` and the production path for PDD and the
    continuous-drive schemes.
    """
    n = seq.n if n is None else n
    if n < 1:
        raise ValueError("need at least one cycle")
    ref = matched_frequencies(seq)["opt"]
    num = np.abs(accumulated_phase(seq, omega, n, None, points_per_period))
    den = abs(accumulated_phase(seq, ref, n, None, points_per_period))
    out = num / den
    return out if np.ndim(out) else float(out)


def weight(seq: SequenceSpec, omega, n: int | None = None):
    """W(omega) with the closed form for rotary echo, quadrature otherwise."""
    n = seq.n if n is None else n
    if seq.scheme is Scheme.ROTARY_ECHO:
        return weight_re(omega, seq.k, n, seq.period)
    return weight_numeric(seq, omega, n)


@dataclass
class WeightProfile:
    omega: np.ndarray
    W: np.ndarray
    scheme: Scheme
    k: int
    n: int
    T: float
    reference: float  # frequency the grid is expressed against (rad/s)

    def __post_init__(self):
        self.omega = np.asarray(self.omega, dtype=float)
        self.W = np.asarray(self.W, dtype=float)

    def rows(self):
        for w, v in zip(self.omega, self.W):
            yield w, w / self.reference, v

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["omega_rad_s", "omega_over_Omega", "W"])
        for row in self.rows():
            writer.writerow([format(x, ".17g") for x in row])
        return buf.getvalue()


def reference_frequency(seq: SequenceSpec) -> float:
    """Rabi frequency for driven schemes, 2 pi / T for PDD."""
    if seq.scheme is Scheme.PDD:
        return 2 * math.pi / seq.period
    return seq.omega


def weight_profile(seq: SequenceSpec, grid, method: str = "auto") -> WeightProfile:
    """W on ``grid`` given in units of the reference frequency."""
    ref = reference_frequency(seq)
    omega = np.asarray(grid, dtype=float) * ref
    if method == "numeric" or (method == "auto" and seq.scheme is not Scheme.ROTARY_ECHO):
        W = weight_numeric(seq, omega)
    elif method in ("auto", "closed"):
        if seq.scheme is not Scheme.ROTARY_ECHO:
            raise ValueError("the closed form exists only for rotary echo")
        W = weight_re(omega, seq.k, seq.n, seq.period)
    else:
        raise ValueError(f"unknown method {method!r}")
    return WeightProfile(omega, W, seq.scheme, seq.k, seq.n, seq.period, ref)


# -- pass-bands ------------------------------------------------------------------


@dataclass(frozen=True)
class PassBand:
    p: int
    center: float
    height: float

    def to_dict(self) -> dict:
        return {"p": self.p, "center_rad_s": self.center, "height": self.height}


def passbands(k: int, T: float, n: int, p_max: int) -> list[PassBand]:
    """Rotary-echo pass-bands at w = 2 pi (2(k+p) - 1) / T, p = 1-k .. p_max.

    Heights are the pole limits of the closed form; they equal
    (4k-1)/(4k^2) * Omega^2 / |w^2 - Omega^2| and do not depend on n.
    """
    if p_max < 0:
        raise ValueError("p_max must be non-negative")
    bands = []
    for p in range(1 - k, p_max + 1):
        j = k + p
        bands.append(PassBand(p, 2 * math.pi * (2 * j - 1) / T, weight_re_pole_limit(k, j)))
    return bands


def passbands_json(bands) -> str:
    return json.dumps([b.to_dict() for b in bands], indent=2)


# -- bandwidth ------------------------------------------------------------------


def _lobe_half_width(seq: SequenceSpec, n: int) -> float:
    # first zero of sin(n T dw) next to the pass-band centre
    return math.pi / (n * seq.period)


def fwhm_main_peak(seq: SequenceSpec, n: int | None = None) -> float:
    """Full width at half maximum (rad/s) of the main pass-band."""
    n = seq.n if n is None else n
    if n < 1:
        raise ValueError("need at least one cycle")
    centre = matched_frequencies(seq)["opt"]
    lobe = _lobe_half_width(seq, n)

    def W(w):
        return float(weight(seq, w, n))

    grid = centre + lobe * np.linspace(-0.99, 0.99, 199)
    vals = np.asarray(weight(seq, grid, n))
    i = int(np.argmax(vals))
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, grid.size - 1)]
    res = minimize_scalar(lambda w: -W(w), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-10 * centre})
    peak_w, peak = res.x, -res.fun
    half = peak / 2

    def crossing(direction):
        step = lobe / 50
        inner = peak_w
        for _ in range(400):
            outer = inner + direction * step
            if outer <= 0:
                break
            if W(outer) < half:
                return brentq(lambda w: W(w) - half, min(inner, outer), max(inner, outer),
                              xtol=1e-12 * centre)
            inner = outer
        raise PeakNotBracketedError(
            f"no half-height crossing {'above' if direction > 0 else 'below'} the peak"
        )

    return crossing(+1) - crossing(-1)


# -- phase penalty ---------------------------------------------------------------


def phase_penalty(scheme, phi) -> float:
    """Sensitivity loss for a field at phase phi instead of the optimum.

    csc(phi) for PDD and constant drive, sec(phi) for rotary echo and spin
    locking. ``UNKNOWN_PHASE`` gives sqrt(2), the loss when the signal is
    averaged over random phases. Returns inf where the response vanishes.
    """
    scheme = Scheme.parse(scheme)
    if isinstance(phi, str):
        if phi == UNKNOWN_PHASE:
            return math.sqrt(2.0)
        raise ValueError(f"unknown phase tag {phi!r}")
    trig = math.sin(phi) if optimal_phase(scheme) else math.cos(phi)
    if abs(trig) < 1e-15:
        return math.inf
    return 1.0 / abs(trig)
