"""Decay envelopes under Ornstein-Uhlenbeck dephasing.

Noise model: delta(t) sigma_z with <delta(t) delta(0)> = sigma^2 exp(-|t|/tau_c).
Under rotary echo the second cumulant has three scalar coefficients
(alpha, beta, gamma_c) with closed forms; the survival signal is
S = (1 + D_R)/2 with D_R = exp(-alpha) (cosh gamma_c + beta/gamma_c sinh gamma_c).
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from .sequences import Scheme

CANCELLATION_TOL = 1e-8
SINHC_SWITCH = 1e-6
EPS = np.finfo(float).eps


@dataclass(frozen=True)
class CumulantCoeffs:
    alpha: float
    beta: float
    gamma_c: float
    sigma: float
    tau_c: float
    k: int
    n: int
    T: float
    ill_conditioned: bool = False

    def as_tuple(self):
        return self.alpha, self.beta, self.gamma_c


def _check_period(k, T, omega):
    if omega is not None and not math.isclose(T, 4 * math.pi * k / omega, rel_tol=1e-9):
        raise ValueError("rotary echo period must equal 4 pi k / Omega")


def cumulant_coeffs(sigma: float, tau_c: float, k: int, n: int, T: float,
                    omega: float | None = None) -> CumulantCoeffs:
    """Closed-form second-cumulant coefficients for n rotary-echo cycles.

    The printed expressions carry exp(+nT/tau_c) and exp(+T/(2 tau_c))
    factors; here they are divided out so only u = exp(-T/(2 tau_c)) and
    v = exp(-nT/tau_c) appear, which keeps nT/tau_c >> 1 finite. The only
    subtraction is inside alpha; when it loses more than 1e-8 relative
    accuracy the result is flagged ``ill_conditioned``.
    """
    if sigma < 0 or not tau_c > 0 or not T > 0 or k < 1 or n < 0:
        raise ValueError("invalid cumulant parameters")
    _check_period(k, T, omega)
    P = 16 * math.pi**2 * k**2 * tau_c**2
    Q = T * T
    x = T / tau_c
    u = math.exp(-x / 2)
    one_minus_v = -math.expm1(-n * x)
    v = 1.0 - one_minus_v
    th = math.tanh(x / 4)
    tc = tau_c

    a1 = 16 * math.pi**2 * k**2 * T * tc**2 + 64 * math.pi**2 * k**2 * tc**3 * th + T**3
    first = 2 * n * a1
    second = 4 * tc * one_minus_v / (1 + u) ** 2 * ((Q - P) * u + (P + Q) * (1 + u * u) / 2)
    bracket_a = first - second
    scale = sigma**2 * T * T / (P + Q) ** 2
    alpha = scale * tc * bracket_a

    # (1-u)/(1+u) = tanh(T/(4 tau_c))
    bracket_b = (P * th / (1 + u) * ((4 * n - 1) + (4 * n + 1) * u + (1 - u) * v)
                 + Q * one_minus_v)
    beta = -2 * scale * tc**2 * bracket_b
    gamma_c = 2 * scale * tc**2 * math.sqrt(
        4 * P * Q * one_minus_v**2 * th**2 + bracket_b**2
    )

    ill = False
    if bracket_a != 0:
        ill = max(abs(first), abs(second)) / abs(bracket_a) * EPS > CANCELLATION_TOL
    return CumulantCoeffs(alpha, beta, gamma_c, sigma, tau_c, k, n, T, ill)


def envelope_re_from(alpha: float, beta: float, gamma_c: float) -> float:
    g = abs(gamma_c)
    if g < SINHC_SWITCH:
        sinhc = 1.0 + g * g / 6
        cosh = 1.0 + g * g / 2
    else:
        sinhc = math.sinh(g) / g
        cosh = math.cosh(g)
    return math.exp(-alpha) * (cosh + beta * sinhc)


def envelope_re(coeffs: CumulantCoeffs) -> float:
    """Rotary-echo decay envelope D_R from the cumulant coefficients."""
    return envelope_re_from(coeffs.alpha, coeffs.beta, coeffs.gamma_c)


def signal_re(coeffs: CumulantCoeffs) -> float:
    return 0.5 * (1.0 + envelope_re(coeffs))


# -- numeric oracle ----------------------------------------------------------

_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)


def _hat(a):
    """Commutator superoperator on row-major vec(rho)."""
    eye = np.eye(2)
    return np.kron(a, eye) - np.kron(eye, a.T)


@dataclass
class NumericCumulant:
    generator: np.ndarray  # 4x4, <S(t)> ~ expm(-generator)
    alpha: float
    beta: float
    gamma_c: float
    antisymmetric: float  # weight of the commutator part dropped by the closed form
    signal: float = field(init=False)

    def __post_init__(self):
        rho0 = np.array([1, 0, 0, 0], dtype=complex)
        rho = expm(-self.generator) @ rho0
        self.signal = float(rho[0].real)

    @property
    def envelope(self) -> float:
        return 2.0 * self.signal - 1.0


def _gl(a, b, m):
    x, w = np.polynomial.legendre.leggauss(m)
    return 0.5 * (b - a) * x + 0.5 * (b + a), 0.5 * (b - a) * w


def cumulant_numeric(sigma: float, tau_c: float, k: int, n: int, omega: float,
                     nodes: int = 256) -> NumericCumulant:
    """Second cumulant by direct double quadrature (oracle only).

    Builds the intra-cycle term (t2 < t1 within a period) and the
    inter-cycle term (t1 one period later than t2 and beyond), combines them
    as n * intra + sum_j (n - j) exp(-(j - 1) T / tau_c) * inter, and exponentiates
    in the 4x4 superoperator space. Each half period gets ``nodes``
    Gauss-Legendre points per dimension.
    """
    T = 4 * math.pi * k / omega

    def comps(t, sign):
        # toggling-frame noise direction: cos(Omega t) sz + SW sin(Omega t) sy
        return np.stack([np.cos(omega * t), sign * np.sin(omega * t)])

    halves = [(0.0, T / 2, 1.0), (T / 2, T, -1.0)]
    intra = np.zeros((2, 2))
    inter = np.zeros((2, 2))
    for i, (a1, b1, s1) in enumerate(halves):
        t1, w1 = _gl(a1, b1, nodes)
        c1 = comps(t1, s1) * w1
        for j, (a2, b2, s2) in enumerate(halves):
            t2, w2 = _gl(a2, b2, nodes)
            c2 = comps(t2, s2) * w2
            lag = t1[:, None] - t2[None, :]
            # inter: t1 one period after t2, so the lag T + t1 - t2 is >= 0
            inter += c1 @ np.exp(-(T + lag) / tau_c) @ c2.T
            if j < i:
                intra += c1 @ np.exp(-lag / tau_c) @ c2.T
        # triangle t2 in [a1, t1] for every outer node
        x, w = np.polynomial.legendre.leggauss(nodes)
        frac = 0.5 * (x + 1)
        t2 = a1 + (t1[:, None] - a1) * frac[None, :]
        w2 = (t1[:, None] - a1) * 0.5 * w[None, :]
        kern = np.exp(-(t1[:, None] - t2) / tau_c) * w2
        c2 = comps(t2, s1)  # (2, nodes, nodes)
        inner = np.einsum("bij,ij->ib", c2, kern)
        intra += c1 @ inner
    intra *= sigma**2
    inter *= sigma**2
    j = np.arange(1, n)
    cross = float(np.sum((n - j) * np.exp(-(j - 1) * T / tau_c))) if n > 1 else 0.0
    total = n * intra + cross * inter
    basis = [_hat(_SZ), _hat(_SY)]
    gen = sum(total[a, b] * basis[a] @ basis[b] for a in range(2) for b in range(2))
    # Bloch (y, z) block of the generator is alpha + beta Z + c X with
    # gamma_c^2 = beta^2 + c^2; the Pauli double commutators scale by 4
    sym = 0.5 * (total[0, 1] + total[1, 0])
    beta = 2 * (total[0, 0] - total[1, 1])
    return NumericCumulant(
        generator=gen,
        alpha=2 * (total[0, 0] + total[1, 1]),
        beta=beta,
        gamma_c=math.sqrt(beta**2 + 16 * sym**2),
        antisymmetric=0.5 * abs(total[0, 1] - total[1, 0]),
    )


# -- long correlation time ---------------------------------------------------


def gamma2_long_tc(scheme, sigma: float, tau_c: float, k: int = 1) -> float:
    """Decay rate Gamma_2 (rad/s) with <S> = exp(-(Gamma_2 t)^3 / n^2), tau_c >> T."""
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.ROTARY_ECHO:
        return (3 * sigma**2 / (8 * k**2 * math.pi**2 * tau_c)) ** (1 / 3)
    if scheme is Scheme.PDD:
        return (2 * sigma**2 / (3 * tau_c)) ** (1 / 3)
    raise ValueError(f"no long-tau_c rate for {scheme.value}")


def coherence_gain(k: int = 1) -> float:
    """T_2 of rotary echo over that of PDD at equal noise, (16 pi^2 k^2 / 9)^(1/3)."""
    return (16 * math.pi**2 * k**2 / 9) ** (1 / 3)


def envelope_pdd(t, n: int, T2: float):
    """exp(-t^3 / (n^2 T2^3))."""
    if not T2 > 0:
        raise ValueError("T2 must be positive")
    t = np.asarray(t, dtype=float)
    out = np.exp(-(t**3) / (n * n * T2**3))
    return out if out.ndim else float(out)


def fit_cubic_rate(t, envelope, n: int) -> float:
    """Least-squares Gamma^3 from -ln D = Gamma^3 t^3 / n^2 (line through 0)."""
    t = np.asarray(t, dtype=float)
    y = -np.log(np.asarray(envelope, dtype=float))
    x = t**3 / (n * n)
    return float(x @ y / (x @ x))


@dataclass(frozen=True)
class DecayEnvelope:
    """D(t) at a fixed cycle count n, the period scaling as t / n.

    ``params`` holds sigma and tau_c (rotary echo, cumulant closed form) or
    T2 (cubic model).
    """

    scheme: Scheme
    n: int
    params: dict
    k: int = 1

    def __call__(self, t):
        t_arr = np.atleast_1d(np.asarray(t, dtype=float))
        if "T2" in self.params:
            out = envelope_pdd(t_arr, self.n, self.params["T2"])
        elif self.scheme is Scheme.ROTARY_ECHO:
            out = np.array([
                1.0 if tt == 0 else envelope_re(cumulant_coeffs(
                    self.params["sigma"], self.params["tau_c"], self.k, self.n, tt / self.n))
                for tt in t_arr
            ])
        else:
            raise ValueError(f"no analytic envelope for {self.scheme.value} with OU noise")
        out = np.asarray(out, dtype=float)
        return out if np.ndim(t) else float(out[0])
