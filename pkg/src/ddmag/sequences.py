"""Decoupling schemes, their modulations and toggling-frame filter functions."""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .spin import SX

PERIOD_RTOL = 1e-9


class Scheme(str, enum.Enum):
    PDD = "pdd"
    CONSTANT = "constant"
    SPINLOCK = "spinlock"
    ROTARY_ECHO = "re"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {
            "pdd": cls.PDD,
            "p": cls.PDD,
            "constant": cls.CONSTANT,
            "c": cls.CONSTANT,
            "rabi": cls.CONSTANT,
            "spinlock": cls.SPINLOCK,
            "s": cls.SPINLOCK,
            "re": cls.ROTARY_ECHO,
            "rotaryecho": cls.ROTARY_ECHO,
        }
        try:
            return aliases[key]
        except KeyError:
            raise ValueError(f"unknown scheme {value!r}") from None


@dataclass(frozen=True)
class SequenceSpec:
    """A periodic decoupling sequence repeated ``n`` times.

    ``omega`` is the Rabi angular frequency (rad/s) of the continuous schemes.
    PDD has no drive and takes an explicit ``period`` instead; its ideal pi
    pulses flip the toggling frame every half period.
    """

    scheme: Scheme
    omega: float | None = None
    k: int = 1
    n: int = 1
    period: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if int(self.n) != self.n or self.n < 0:
            raise ValueError("n must be a non-negative integer")
        object.__setattr__(self, "n", int(self.n))
        if self.scheme is Scheme.PDD:
            if self.period is None or not self.period > 0:
                raise ValueError("PDD needs a positive period")
            return
        if self.omega is None or not self.omega > 0:
            raise ValueError(f"{self.scheme.value} needs a positive Rabi frequency")
        if self.scheme is Scheme.ROTARY_ECHO:
            if int(self.k) != self.k or self.k < 1:
                raise ValueError("echo index k must be a positive integer")
            object.__setattr__(self, "k", int(self.k))
        derived = self._derived_period()
        if self.period is not None and not math.isclose(
            self.period, derived, rel_tol=PERIOD_RTOL
        ):
            raise ValueError(
                f"period {self.period!r} contradicts the derived period {derived!r}"
            )
        object.__setattr__(self, "period", derived)

    def _derived_period(self) -> float:
        if self.scheme is Scheme.ROTARY_ECHO:
            return 4 * math.pi * self.k / self.omega
        return 2 * math.pi / self.omega

    @property
    def T(self) -> float:
        return self.period

    @property
    def total_time(self) -> float:
        return self.n * self.period

    def with_cycles(self, n: int) -> "SequenceSpec":
        return SequenceSpec(self.scheme, self.omega, self.k, n,
                            self.period if self.scheme is Scheme.PDD else None)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "omega": self.omega,
            "k": self.k,
            "n": self.n,
            "period": self.period,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SequenceSpec":
        allowed = {"scheme", "omega", "k", "n", "period"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown keys {sorted(extra)}")
        return cls(
            scheme=data["scheme"],
            omega=data.get("omega"),
            k=data.get("k", 1),
            n=data.get("n", 1),
            period=data.get("period"),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "SequenceSpec":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class ACFieldSpec:
    """Field to be sensed: b cos(omega t + phi), b in tesla, omega in rad/s."""

    b: float
    omega: float
    phi: float = 0.0

    def __post_init__(self):
        if self.b < 0:
            raise ValueError("field amplitude must be non-negative")
        if not self.omega > 0:
            raise ValueError("field frequency must be positive")


class ControlSchedule(NamedTuple):
    pulse_times: np.ndarray
    initial_state: str  # 'z' (|0>) or 'x' (|+x>)
    readout: str


def square_wave(t, T: float):
    """+1 on [0, T/2), -1 on [T/2, T), extended periodically."""
    if not T > 0:
        raise ValueError("period must be positive")
    frac = np.mod(np.asarray(t, dtype=float), T)
    out = np.where(frac < T / 2, 1.0, -1.0)
    return out if out.ndim else float(out)


def _check_window(seq: SequenceSpec, t):
    t = np.asarray(t, dtype=float)
    tol = 1e-12 * max(seq.total_time, seq.period)
    if np.any(t < -tol) or np.any(t > seq.total_time + tol):
        raise ValueError(f"t outside the sequence window [0, {seq.total_time}]")


def drive_amplitude(seq: SequenceSpec, t):
    """Signed Rabi amplitude multiplying S_x (rad/s); zero for PDD."""
    t = np.asarray(t, dtype=float)
    if seq.scheme is Scheme.PDD:
        return np.zeros_like(t)
    if seq.scheme is Scheme.ROTARY_ECHO:
        return seq.omega * square_wave(t, seq.period)
    return np.full_like(t, seq.omega)


def control_field(seq: SequenceSpec, t: float) -> np.ndarray:
    """Control Hamiltonian at time t as a 2x2 operator (rad/s).

    PDD returns the zero operator; its pulses come from ``pulse_times``.
    Spin locking returns the same drive as Constant; the transverse
    preparation is part of ``schedule``.
    """
    _check_window(seq, t)
    return float(drive_amplitude(seq, t)) * SX


def pulse_times(seq: SequenceSpec) -> np.ndarray:
    """Instants of the ideal pi_x pulses of PDD inside (0, nT)."""
    if seq.scheme is not Scheme.PDD:
        return np.empty(0)
    j = np.arange(1, 2 * seq.n)
    return j * seq.period / 2


def schedule(seq: SequenceSpec) -> ControlSchedule:
    if seq.scheme is Scheme.PDD:
        return ControlSchedule(pulse_times(seq), "x", "x")
    if seq.scheme is Scheme.SPINLOCK:
        return ControlSchedule(np.empty(0), "x", "x")
    return ControlSchedule(np.empty(0), "z", "z")


def filter_function(seq: SequenceSpec, t):
    """Weight f(t) of the sensed field in the accumulated phase.

    Constant drive starts in |0>, so the toggling-frame S_y component
    sin(Omega t) carries the signal; spin locking starts along x and picks
    up the S_z component cos(Omega t).
    """
    _check_window(seq, t)
    t = np.asarray(t, dtype=float)
    if seq.scheme is Scheme.PDD:
        out = square_wave(t, seq.period)
    elif seq.scheme is Scheme.ROTARY_ECHO:
        out = square_wave(t, seq.period) * np.sin(seq.omega * t)
    elif seq.scheme is Scheme.CONSTANT:
        out = np.sin(seq.omega * t)
    else:
        out = np.cos(seq.omega * t)
    out = np.asarray(out, dtype=float)
    return out if out.ndim else float(out)


def matched_frequencies(seq: SequenceSpec) -> dict:
    """Field frequencies (rad/s) the sequence is tuned to.

    Rotary echo: ``low`` is the fundamental Omega/(2k), ``opt`` the harmonic
    2k-1 where the response peaks. Constant and spin lock both sit at Omega.
    PDD is matched to 2 pi / T.
    """
    if seq.scheme is Scheme.ROTARY_ECHO:
        k = seq.k
        return {"low": seq.omega / (2 * k), "opt": seq.omega * (2 * k - 1) / (2 * k)}
    if seq.scheme is Scheme.PDD:
        w = 2 * math.pi / seq.period
        return {"low": w, "opt": w}
    return {"low": seq.omega, "opt": seq.omega}


def optimal_phase(scheme) -> float:
    """Field phase that maximizes the accumulated phase."""
    if Scheme.parse(scheme) in (Scheme.PDD, Scheme.CONSTANT):
        return math.pi / 2
    return 0.0


def rotary_echo(omega: float, k: int = 1, n: int = 1) -> SequenceSpec:
    return SequenceSpec(Scheme.ROTARY_ECHO, omega=omega, k=k, n=n)


def pdd(period: float, n: int = 1) -> SequenceSpec:
    return SequenceSpec(Scheme.PDD, period=period, n=n)


def constant(omega: float, n: int = 1) -> SequenceSpec:
    return SequenceSpec(Scheme.CONSTANT, omega=omega, n=n)


def spin_lock(omega: float, n: int = 1) -> SequenceSpec:
    return SequenceSpec(Scheme.SPINLOCK, omega=omega, n=n)
