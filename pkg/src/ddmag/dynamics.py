"""Brute-force dynamics: time-ordered propagation and Monte Carlo dephasing.

The stochastic model is

    H(t) = Omega SW(t) S_x + gamma b cos(omega t + phi) S_z + delta(t) sigma_z

with delta(t) a stationary Ornstein-Uhlenbeck process. Coefficients are
sampled at step midpoints and every step is exponentiated exactly, which is
second order in the step size. PDD pulses are exact pi_x rotations placed on
step boundaries.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .constants import GAMMA_E
from .sequences import ACFieldSpec, Scheme, SequenceSpec, drive_amplitude, schedule
from .spin import (
    KET0,
    KET_PLUS_X,
    su2_apply,
    su2_from_field,
    su2_identity,
    su2_mul,
    su2_ordered_product,
    su2_to_matrix,
)

DEFAULT_STEPS_PER_PERIOD = 4096
MIN_STEPS_PER_PERIOD = 100
CHUNK_STEPS = 1024
BLOCK_TRAJECTORIES = 256

_PI_X = np.array([0.0, 1.0, 0.0, 0.0])
_READOUTS = ("auto", "x", "y", "z")


@dataclass(frozen=True)
class OUNoise:
    """Stationary OU dephasing: zero mean, covariance sigma^2 exp(-|tau|/tau_c)."""

    sigma: float
    tau_c: float
    seed: int = 0

    def __post_init__(self):
        if self.sigma < 0:
            raise ValueError("sigma must be non-negative")
        if not self.tau_c > 0:
            raise ValueError("tau_c must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must fit in 64 bits")

    def autocorrelation(self, tau):
        return self.sigma**2 * np.exp(-np.abs(tau) / self.tau_c)


@dataclass(frozen=True)
class TrajectoryResult:
    signal: float
    stderr: float
    n_traj: int

    @property
    def envelope(self) -> float:
        """Decay envelope D = 2S - 1 of the survival signal."""
        return 2.0 * self.signal - 1.0

    @property
    def envelope_stderr(self) -> float:
        return 2.0 * self.stderr


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Generator for trajectory ``index``; depends only on (seed, index)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(index),))
    return np.random.Generator(np.random.PCG64(ss))


class _OUStream:
    """Exact OU recursion drawn chunk by chunk from one generator."""

    def __init__(self, noise: OUNoise, dt: float, rng: np.random.Generator):
        self.decay = math.exp(-dt / noise.tau_c)
        self.kick = noise.sigma * math.sqrt(-math.expm1(-2 * dt / noise.tau_c))
        self.sigma = noise.sigma
        self.rng = rng
        self.last = None

    def take(self, count: int) -> np.ndarray:
        if count <= 0:
            return np.empty(0)
        out = np.empty(count)
        start = 0
        if self.last is None:
            out[0] = self.sigma * self.rng.standard_normal()
            self.last = out[0]
            start = 1
        xi = self.rng.standard_normal(count - start)
        if xi.size:
            y, _ = lfilter([self.kick], [1.0, -self.decay], xi, zi=[self.decay * self.last])
            out[start:] = y
            self.last = out[-1]
        return out


def _take_many(streams, count: int) -> np.ndarray:
    """Advance several streams at once; same values as calling ``take`` on each."""
    first = streams[0]
    out = np.empty((len(streams), count))
    start = 0
    if first.last is None:
        for i, s in enumerate(streams):
            out[i, 0] = s.sigma * s.rng.standard_normal()
        start = 1
    else:
        out_prev = np.array([s.last for s in streams])
    if count > start:
        xi = np.stack([s.rng.standard_normal(count - start) for s in streams])
        prev = out[:, 0] if start else out_prev
        y, _ = lfilter(
            [first.kick], [1.0, -first.decay], xi, axis=1,
            zi=(first.decay * prev)[:, None],
        )
        out[:, start:] = y
    for i, s in enumerate(streams):
        s.last = out[i, -1]
    return out


def ou_path(noise: OUNoise, dt: float, n_steps: int, rng=None) -> np.ndarray:
    """Exact discretization of the stationary OU process.

    delta_0 ~ N(0, sigma^2) and
    delta_{i+1} = delta_i e^{-dt/tau_c} + sigma sqrt(1 - e^{-2 dt/tau_c}) xi_i.
    Reproducible from ``noise.seed`` unless a generator is passed.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    if rng is None:
        rng = np.random.default_rng(noise.seed)
    return _OUStream(noise, dt, rng).take(int(n_steps))


def _pulse_steps(seq: SequenceSpec, steps_per_period: int) -> np.ndarray:
    if seq.scheme is not Scheme.PDD:
        return np.empty(0, dtype=int)
    return np.arange(1, 2 * seq.n) * (steps_per_period // 2)


def _evolve(seq, field, gamma, steps_per_period, delta_chunks, batch):
    """Total propagator per trajectory, shape (4, batch).

    ``delta_chunks(start, length)`` returns the noise (batch, length) at the
    step midpoints, or None for a noiseless run.
    """
    n_steps = seq.n * steps_per_period
    h = seq.period / steps_per_period
    pulses = _pulse_steps(seq, steps_per_period)
    total = su2_identity((batch,))
    for start in range(0, n_steps, CHUNK_STEPS):
        length = min(CHUNK_STEPS, n_steps - start)
        t_mid = (start + np.arange(length) + 0.5) * h
        hx = drive_amplitude(seq, t_mid)
        hz = np.zeros(length)
        if field is not None and field.b != 0:
            hz = gamma * field.b * np.cos(field.omega * t_mid + field.phi)
        delta = delta_chunks(start, length)
        if delta is not None:
            hz = hz + 2.0 * delta
        hx, hz = np.broadcast_arrays(hx, np.broadcast_to(hz, (batch, length)))
        q = su2_from_field(hx, 0.0, hz, h)
        local = pulses[(pulses >= start) & (pulses < start + length)] - start
        if local.size:
            q[:, :, local] = su2_mul(q[:, :, local], _PI_X[:, None, None])
        total = su2_mul(su2_ordered_product(q, axis=1), total)
    return total


def _check_steps(steps_per_period: int, minimum: int):
    if int(steps_per_period) != steps_per_period or steps_per_period < minimum:
        raise ValueError(f"steps_per_period must be an integer >= {minimum}")
    if steps_per_period % 2:
        raise ValueError("steps_per_period must be even so switch points fall on steps")


def propagate(
    seq: SequenceSpec,
    field: ACFieldSpec | None = None,
    noise_path=None,
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
    gamma: float = GAMMA_E,
) -> np.ndarray:
    """Time-ordered propagator over [0, nT] as a 2x2 unitary.

    ``noise_path`` holds delta at the step midpoints (n * steps_per_period
    values); a path sampled m times finer is decimated to the midpoints.
    """
    _check_steps(steps_per_period, MIN_STEPS_PER_PERIOD)
    n_steps = seq.n * steps_per_period
    delta = None
    if noise_path is not None:
        path = np.asarray(noise_path, dtype=float)
        if path.ndim != 1 or path.size < n_steps:
            raise ValueError(
                f"noise path has {path.size} samples, need at least {n_steps}"
            )
        if n_steps and path.size % n_steps:
            raise ValueError("noise path length must be a multiple of the step count")
        m = path.size // n_steps if n_steps else 1
        delta = path[m // 2 :: m][:n_steps] if m > 1 else path[:n_steps]

    def chunks(start, length):
        return None if delta is None else delta[None, start : start + length]

    q = _evolve(seq, field, gamma, steps_per_period, chunks, 1)[:, 0]
    return su2_to_matrix(q)


def _initial_and_readout(seq: SequenceSpec, readout: str):
    if readout not in _READOUTS:
        raise ValueError(f"unknown readout {readout!r}; use one of {_READOUTS}")
    sched = schedule(seq)
    psi = KET0 if sched.initial_state == "z" else KET_PLUS_X
    axis = sched.readout if readout == "auto" else readout
    return psi, axis


def _project(psi0, psi1, axis: str):
    if axis == "z":
        return np.abs(psi0) ** 2 - np.abs(psi1) ** 2
    cross = np.conj(psi0) * psi1
    return 2.0 * (cross.real if axis == "x" else cross.imag)


def trajectory_readouts(
    seq: SequenceSpec,
    noise: OUNoise,
    indices,
    readout: str = "auto",
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
) -> np.ndarray:
    """Bloch component along the readout axis for the given trajectories."""
    psi, axis = _initial_and_readout(seq, readout)
    indices = np.asarray(indices, dtype=np.int64)
    h = seq.period / steps_per_period
    streams = [_OUStream(noise, h, trajectory_rng(noise.seed, j)) for j in indices]

    def chunks(start, length):
        return _take_many(streams, length)

    q = _evolve(seq, None, GAMMA_E, steps_per_period, chunks, len(indices))
    psi0, psi1 = su2_apply(q, psi[0], psi[1])
    return _project(psi0, psi1, axis)


def mc_signal(
    seq: SequenceSpec,
    noise: OUNoise,
    n_traj: int,
    readout: str = "auto",
    steps_per_period: int = DEFAULT_STEPS_PER_PERIOD,
    workers: int = 1,
) -> TrajectoryResult:
    """Ensemble-averaged survival probability under OU dephasing.

    Rotary echo and constant drive start in |0> and read out z; PDD and spin
    locking start in |+x> (ideal pi/2 beforehand) and read out x. The signal
    is S = (1 + <r>)/2 along the readout axis.

    Trajectory j draws its noise from ``trajectory_rng(noise.seed, j)`` and
    trajectories are reduced in index order, so the result is bit-identical
    for any ``workers``.
    """
    if n_traj < 100:
        raise ValueError("need at least 100 trajectories")
    _check_steps(steps_per_period, 4)
    _initial_and_readout(seq, readout)
    if seq.n == 0:
        return TrajectoryResult(1.0, 0.0, int(n_traj))
    blocks = [
        np.arange(s, min(s + BLOCK_TRAJECTORIES, n_traj))
        for s in range(0, n_traj, BLOCK_TRAJECTORIES)
    ]

    def run(idx):
        return trajectory_readouts(seq, noise, idx, readout, steps_per_period)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, blocks))
    else:
        parts = [run(b) for b in blocks]
    r = np.concatenate(parts)
    s = 0.5 * (1.0 + r)
    return TrajectoryResult(
        signal=float(np.mean(s)),
        stderr=float(np.std(s, ddof=1) / math.sqrt(n_traj)),
        n_traj=int(n_traj),
    )
