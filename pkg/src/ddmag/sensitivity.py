"""Magnetometry sensitivity of the decoupling schemes.

The shot-noise limited sensitivity for a slope-optimal single readout is
eta = pi / (2 gamma C sqrt(t)); each scheme scales it by the ratio of the
PDD average field to its own, and degrades it by the phase penalty Phi, the
weight W(omega) and the decay envelope D(t):

    eta_eff = eta_ideal * Phi / (W * D)
"""
from __future__ import annotations

import csv
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np

from .constants import DEFAULT_C, GAMMA_E
from .decay import (
    coherence_gain,
    cumulant_coeffs,
    envelope_pdd,
    envelope_re,
    gamma2_long_tc,
)
from .dynamics import OUNoise, mc_signal
from .response import avg_field_factor_for, phase_penalty, weight
from .sequences import (
    Scheme,
    SequenceSpec,
    matched_frequencies,
    optimal_phase,
)

BANDS = ("opt", "low")
AXES = ("time", "frequency", "k", "n")
UNDETECTABLE_W = 1e-12
CYCLE_RTOL = 1e-9
# tau_c / T2 used for the Monte Carlo constant-drive envelope when a run only
# specifies T2
LONG_TAU_C_FACTOR = 10.0
MC_STEPS_PER_PERIOD = 256

CSV_COLUMNS = (
    "axis_value",
    "eta_ideal_T_sqrtHz",
    "Phi",
    "W",
    "D",
    "eta_eff_T_sqrtHz",
    "matched_freq_Hz",
)


class UndetectableFrequencyError(ValueError):
    """The field frequency falls in a stop band (W = 0)."""


@dataclass(frozen=True)
class SensorParams:
    """Gyromagnetic ratio (rad s^-1 T^-1) and readout efficiency C."""

    gamma: float = GAMMA_E
    C: float = DEFAULT_C

    def __post_init__(self):
        if not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 < self.C <= 1:
            raise ValueError("C must lie in (0, 1]")


def eta_base(t, sensor: SensorParams = SensorParams()):
    """pi / (2 gamma C sqrt(t)) in T/sqrt(Hz)."""
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t must be positive")
    out = math.pi / (2 * sensor.gamma * sensor.C * np.sqrt(t))
    return out if out.ndim else float(out)


def _band_harmonic(scheme: Scheme, k: int, band: str) -> int:
    if band not in BANDS:
        raise ValueError(f"band must be one of {BANDS}")
    if scheme is Scheme.ROTARY_ECHO and band == "opt":
        return 2 * k - 1
    return 1


def eta_ratio(scheme, k: int = 1, band: str = "opt") -> float:
    """eta_scheme / eta_PDD, computed as b_bar_PDD / b_bar_scheme."""
    scheme = Scheme.parse(scheme)
    m = _band_harmonic(scheme, k, band)
    return avg_field_factor_for(Scheme.PDD, 1, 1) / avg_field_factor_for(scheme, k, m)


def eta_ideal(scheme, t, sensor: SensorParams = SensorParams(), k: int = 1,
              band: str = "opt"):
    """Noise-free sensitivity at the matched frequency and optimal phase.

    Examples
    --------
    >>> round(eta_ideal("re", 1.0, k=4, band="low") / eta_ideal("pdd", 1.0), 12)
    7.875
    """
    return eta_ratio(scheme, k, band) * eta_base(t, sensor)


# -- sequence construction -----------------------------------------------------


def sequence_for_period(scheme, T: float, k: int = 1, n: int = 1) -> SequenceSpec:
    """The scheme's sequence with control period T."""
    scheme = Scheme.parse(scheme)
    if not T > 0:
        raise ValueError("period must be positive")
    if scheme is Scheme.PDD:
        return SequenceSpec(scheme, n=n, period=T)
    if scheme is Scheme.ROTARY_ECHO:
        return SequenceSpec(scheme, omega=4 * math.pi * k / T, k=k, n=n)
    return SequenceSpec(scheme, omega=2 * math.pi / T, n=n)


def period_for_frequency(scheme, omega: float, k: int = 1, band: str = "opt") -> float:
    """Control period whose ``band`` pass-band sits at field frequency omega."""
    scheme = Scheme.parse(scheme)
    if not omega > 0:
        raise ValueError("frequency must be positive")
    return 2 * math.pi * _band_harmonic(scheme, k, band) / omega


# -- decay models ---------------------------------------------------------------


@dataclass(frozen=True)
class T2Decay:
    """Cubic envelope exp(-t^3 / (n^2 T2^3)) with T2 quoted for PDD.

    Rotary echo uses T2 * coherence_gain(k), the long-correlation ratio of
    the two decay rates at equal noise. Constant drive and spin locking are
    simulated with the OU noise that gives PDD this T2, at correlation time
    ``tau_c`` (default ``LONG_TAU_C_FACTOR * t2``).
    """

    t2: float
    rescale_re: bool = True
    tau_c: float | None = None
    n_traj: int = 2000
    seed: int = 0
    steps_per_period: int = MC_STEPS_PER_PERIOD
    workers: int = 1

    def __post_init__(self):
        if not self.t2 > 0:
            raise ValueError("t2 must be positive")

    def effective_t2(self, scheme, k: int = 1) -> float:
        scheme = Scheme.parse(scheme)
        if scheme is Scheme.ROTARY_ECHO and self.rescale_re:
            return self.t2 * coherence_gain(k)
        return self.t2

    def equivalent_noise(self) -> OUNoise:
        tau_c = LONG_TAU_C_FACTOR * self.t2 if self.tau_c is None else self.tau_c
        # Gamma_2P^3 = 2 sigma^2 / (3 tau_c) = 1 / T2^3
        sigma = math.sqrt(1.5 * tau_c / self.t2**3)
        return OUNoise(sigma, tau_c, self.seed)

    def __call__(self, seq: SequenceSpec) -> float:
        if seq.scheme in (Scheme.PDD, Scheme.ROTARY_ECHO):
            return float(envelope_pdd(seq.total_time, seq.n,
                                      self.effective_t2(seq.scheme, seq.k)))
        res = mc_signal(seq, self.equivalent_noise(), self.n_traj,
                        steps_per_period=self.steps_per_period, workers=self.workers)
        return res.envelope


@dataclass(frozen=True)
class OUDecay:
    """Envelope under OU dephasing of rms sigma (rad/s) and correlation tau_c.

    Rotary echo uses the second-order cumulant closed form, PDD the
    long-correlation cubic law, constant drive and spin locking Monte Carlo.
    """

    sigma: float
    tau_c: float
    n_traj: int = 2000
    seed: int = 0
    steps_per_period: int = MC_STEPS_PER_PERIOD
    workers: int = 1

    def __post_init__(self):
        OUNoise(self.sigma, self.tau_c, self.seed)

    def __call__(self, seq: SequenceSpec) -> float:
        if self.sigma == 0 or seq.n == 0:
            return 1.0
        if seq.scheme is Scheme.ROTARY_ECHO:
            return envelope_re(cumulant_coeffs(self.sigma, self.tau_c, seq.k,
                                               seq.n, seq.T))
        if seq.scheme is Scheme.PDD:
            t2 = 1.0 / gamma2_long_tc(Scheme.PDD, self.sigma, self.tau_c)
            return float(envelope_pdd(seq.total_time, seq.n, t2))
        res = mc_signal(seq, OUNoise(self.sigma, self.tau_c, self.seed), self.n_traj,
                        steps_per_period=self.steps_per_period, workers=self.workers)
        return res.envelope


def _no_decay(seq):
    return 1.0


# -- effective sensitivity -------------------------------------------------------


@dataclass
class SensitivityResult:
    scheme: str
    k: int
    n: int
    t: float
    T: float
    omega: float
    phi: float | str
    matched_omega: float
    eta_ideal: float
    Phi: float
    W: float
    D: float
    eta_effective: float
    rounded: bool = False
    requested_t: float | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _whole_cycles(seq: SequenceSpec, t):
    if t is None:
        return seq.n, False
    if not t > 0:
        raise ValueError("t must be positive")
    exact = t / seq.T
    n = int(math.floor(exact * (1 + CYCLE_RTOL)))
    if n < 1:
        raise ValueError(f"t = {t!r} is shorter than one period {seq.T!r}")
    return n, not math.isclose(n, exact, rel_tol=CYCLE_RTOL)


def eta_effective(seq: SequenceSpec, t: float | None = None, omega: float | None = None,
                  phi=None, decay=None, sensor: SensorParams = SensorParams(),
                  band: str = "opt") -> SensitivityResult:
    """eta_ideal * Phi / (W * D) for a field b cos(omega t + phi).

    Parameters
    ----------
    seq : SequenceSpec
        Scheme and its control parameters; ``seq.n`` is used unless ``t`` is
        given, in which case t is rounded down to whole periods.
    omega : float, optional
        Field frequency in rad/s; defaults to the ``band`` matched frequency.
    phi : float or "unknown", optional
        Field phase; defaults to the scheme's optimal phase.
    decay : callable, optional
        Maps a sequence to its envelope D; ``T2Decay`` or ``OUDecay``.
        No decay when omitted.

    Raises
    ------
    UndetectableFrequencyError
        If omega lies in a stop band.
    """
    n, rounded = _whole_cycles(seq, t)
    seq = seq.with_cycles(n)
    matched = matched_frequencies(seq)[band if band in BANDS else "opt"]
    omega = matched if omega is None else float(omega)
    phi = optimal_phase(seq.scheme) if phi is None else phi
    W = float(weight(seq, omega, n))
    if W < UNDETECTABLE_W:
        raise UndetectableFrequencyError(
            f"omega = {omega!r} rad/s is in a stop band of {seq.scheme.value}")
    Phi = phase_penalty(seq.scheme, phi)
    D = float((decay or _no_decay)(seq))
    ideal = eta_ideal(seq.scheme, seq.total_time, sensor, seq.k, "opt")
    eff = ideal * Phi / (W * D) if D > 0 else math.inf
    return SensitivityResult(
        scheme=seq.scheme.value, k=seq.k, n=n, t=seq.total_time, T=seq.T,
        omega=omega, phi=phi, matched_omega=matched, eta_ideal=ideal, Phi=Phi,
        W=W, D=D, eta_effective=eff, rounded=rounded,
        requested_t=None if t is None else float(t),
    )


def optimal_time(n: int, T2: float) -> float:
    """argmin of exp(t^3 / (n^2 T2^3)) / sqrt(t): T2 (n^2 / 6)^(1/3)."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not T2 > 0:
        raise ValueError("T2 must be positive")
    return T2 * (n * n / 6.0) ** (1.0 / 3.0)


# -- scans ---------------------------------------------------------------------------


@dataclass
class ScanTable:
    axis: str
    rows: list = field(default_factory=list)

    @property
    def axis_values(self) -> np.ndarray:
        return np.array([v for v, _ in self.rows])

    @property
    def eta(self) -> np.ndarray:
        return np.array([r.eta_effective for _, r in self.rows])

    def to_records(self, units: str = "hz") -> list[dict]:
        scale = 1 / (2 * math.pi) if units == "hz" else 1.0
        out = []
        for value, r in self.rows:
            if self.axis == "frequency":
                value = value * scale
            out.append({
                "scheme": r.scheme,
                "axis_value": value,
                "eta_ideal_T_sqrtHz": r.eta_ideal,
                "Phi": r.Phi,
                "W": r.W,
                "D": r.D,
                "eta_eff_T_sqrtHz": r.eta_effective,
                "matched_freq_Hz": r.matched_omega / (2 * math.pi),
                "k": r.k,
                "n": r.n,
                "t_s": r.t,
            })
        return out


def _scan_point(axis, value, scheme, k, n, T, t, omega, phi, band, decay, sensor):
    if axis == "time":
        seq = sequence_for_period(scheme, value / n, k, n)
        return eta_effective(seq, None, None, phi, decay, sensor, band)
    if axis == "frequency":
        seq = sequence_for_period(scheme, period_for_frequency(scheme, value, k, band), k, n)
        return eta_effective(seq, None, value, phi, decay, sensor, band)
    if axis == "k":
        kk = int(value)
        if omega is not None:
            # fixed Rabi frequency: the period follows the echo angle
            seq = sequence_for_period(scheme, 4 * math.pi * kk / omega
                                      if Scheme.parse(scheme) is Scheme.ROTARY_ECHO
                                      else 2 * math.pi / omega, kk, n)
        else:
            seq = sequence_for_period(scheme, T, kk, n)
        return eta_effective(seq, t, None, phi, decay, sensor, band)
    nn = int(value)
    if t is not None:
        seq = sequence_for_period(scheme, t / nn, k, nn)
    else:
        seq = sequence_for_period(scheme, T, k, nn)
    return eta_effective(seq, None, None, phi, decay, sensor, band)


def scan(axis: str, values, scheme, k: int = 1, n: int = 1, T: float | None = None,
         t: float | None = None, omega: float | None = None, phi=None,
         band: str = "opt", decay=None, sensor: SensorParams = SensorParams(),
         workers: int = 1) -> ScanTable:
    """Sensitivity along one axis, rows ordered by axis value.

    time
        total time t at fixed n (period t / n, field at the matched band).
    frequency
        field frequency omega (rad/s) at fixed n, period chosen so the
        ``band`` pass-band sits at omega.
    k
        echo angle at fixed Rabi frequency ``omega`` (or fixed period ``T``)
        and n cycles (or total time ``t``).
    n
        cycle count at fixed total time ``t`` (or fixed period ``T``).
    """
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}")
    values = sorted(float(v) for v in np.atleast_1d(values))
    if not values:
        raise ValueError("scan needs at least one value")
    if axis in ("k", "n") and any(v != int(v) or v < 1 for v in values):
        raise ValueError(f"{axis} values must be positive integers")
    if axis == "k" and omega is None and T is None:
        raise ValueError("k scan needs a Rabi frequency or a period")
    if axis == "n" and t is None and T is None:
        raise ValueError("n scan needs a total time or a period")

    def run(v):
        return _scan_point(axis, v, scheme, k, n, T, t, omega, phi, band, decay, sensor)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, values))
    else:
        results = [run(v) for v in values]
    return ScanTable(axis, list(zip(values, results)))


def records_to_csv(records: list[dict], columns=None) -> str:
    columns = list(columns or (("scheme",) + CSV_COLUMNS))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_fmt(rec[c]) for c in columns])
    return buf.getvalue()


def records_to_json(records: list[dict]) -> str:
    return json.dumps(records, indent=2, sort_keys=True)


def _fmt(value) -> str:
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)
