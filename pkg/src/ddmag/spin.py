"""Two-level-system operators, states and exact 2x2 exponentials.

Spin components follow S = sigma/2 everywhere. A Bloch vector r of a state
psi is r_i = <psi|sigma_i|psi>, so |0> sits at r = (0, 0, +1).

Unitaries in SU(2) are also handled in a real four-component form
``q = (a, b, c, d)`` meaning ``a*I - i*(b*sx + c*sy + d*sz)``. This is what the
Monte Carlo inner loop works with, batched along leading axes.
"""
from __future__ import annotations

import numpy as np

SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
IDENTITY = np.eye(2, dtype=complex)

SX = SIGMA_X / 2
SY = SIGMA_Y / 2
SZ = SIGMA_Z / 2

KET0 = np.array([1, 0], dtype=complex)
KET1 = np.array([0, 1], dtype=complex)
KET_PLUS_X = np.array([1, 1], dtype=complex) / np.sqrt(2)

HERMITIAN_TOL = 1e-10
NORM_TOL = 1e-12


def as_operator(op) -> np.ndarray:
    op = np.asarray(op, dtype=complex)
    if op.shape != (2, 2):
        raise ValueError(f"expected a 2x2 operator, got shape {op.shape}")
    return op


def is_hermitian(op, tol: float = HERMITIAN_TOL) -> bool:
    op = as_operator(op)
    return bool(np.max(np.abs(op - op.conj().T)) <= tol)


def pauli_coefficients(op) -> np.ndarray:
    """Return (c0, cx, cy, cz) with op = c0*I + cx*sx + cy*sy + cz*sz."""
    op = as_operator(op)
    return np.array([
        np.trace(op) / 2,
        np.trace(op @ SIGMA_X) / 2,
        np.trace(op @ SIGMA_Y) / 2,
        np.trace(op @ SIGMA_Z) / 2,
    ])


def commutator(a, b) -> np.ndarray:
    return a @ b - b @ a


def expm_antihermitian(h, t: float = 1.0) -> np.ndarray:
    """Exact ``exp(-i h t)`` for a Hermitian 2x2 ``h``.

    Uses h = h0*I + r.sigma, so that
    exp(-i h t) = exp(-i h0 t) [cos(|r|t) I - i sin(|r|t) r_hat.sigma].

    Raises
    ------
    ValueError
        If ``h`` deviates from Hermitian by more than 1e-10 (max entry),
        or ``t`` is not finite.
    """
    h = as_operator(h)
    if not np.isfinite(t):
        raise ValueError("duration must be finite")
    if not is_hermitian(h):
        raise ValueError("generator is not Hermitian within 1e-10")
    c = pauli_coefficients(h).real
    r = c[1:] * t
    angle = np.sqrt(r @ r)
    phase = np.exp(-1j * c[0] * t)
    if angle == 0.0:
        return phase * IDENTITY
    n = r / angle
    nsig = n[0] * SIGMA_X + n[1] * SIGMA_Y + n[2] * SIGMA_Z
    return phase * (np.cos(angle) * IDENTITY - 1j * np.sin(angle) * nsig)


def is_unitary(u, tol: float = NORM_TOL) -> bool:
    u = as_operator(u)
    return bool(np.max(np.abs(u.conj().T @ u - IDENTITY)) <= tol)


def as_ket(state) -> np.ndarray:
    """Accept a normalized 2-vector or a Bloch vector of unit length."""
    state = np.asarray(state)
    if state.shape == (3,):
        return ket_from_bloch(state)
    state = state.astype(complex)
    if state.shape != (2,):
        raise ValueError(f"expected a ket of shape (2,), got {state.shape}")
    if abs(np.vdot(state, state).real - 1.0) > NORM_TOL:
        raise ValueError("ket is not normalized")
    return state


def ket_from_bloch(r) -> np.ndarray:
    r = np.asarray(r, dtype=float)
    length = np.sqrt(r @ r)
    if abs(length - 1.0) > NORM_TOL:
        raise ValueError("a pure state needs a unit Bloch vector")
    theta = np.arccos(np.clip(r[2], -1.0, 1.0))
    phi = np.arctan2(r[1], r[0])
    return np.array([np.cos(theta / 2), np.exp(1j * phi) * np.sin(theta / 2)])


def bloch_vector(psi) -> np.ndarray:
    psi = as_ket(psi)
    return np.array([
        expect(psi, SIGMA_X),
        expect(psi, SIGMA_Y),
        expect(psi, SIGMA_Z),
    ])


def expect(state, obs) -> float:
    """<psi|obs|psi> for a pure state (ket or Bloch vector)."""
    obs = as_operator(obs)
    if not is_hermitian(obs):
        raise ValueError("observable is not Hermitian")
    psi = as_ket(state)
    value = np.vdot(psi, obs @ psi)
    return float(value.real)


# -- SU(2) four-component form -------------------------------------------
# Arrays carry the four components on the leading axis: q[0..3] = (a, b, c, d).


def su2_from_field(hx, hy, hz, dt):
    """exp(-i (hx Sx + hy Sy + hz Sz) dt) as (a, b, c, d), broadcasting."""
    hx, hy, hz = np.broadcast_arrays(
        np.asarray(hx, float), np.asarray(hy, float), np.asarray(hz, float)
    )
    norm = np.sqrt(hx * hx + hy * hy + hz * hz)
    half = 0.5 * dt * norm
    safe = np.where(norm > 0, norm, 1.0)
    # sin(|h| dt/2)/|h| -> dt/2 as |h| -> 0
    s = np.where(norm > 0, np.sin(half) / safe, 0.5 * dt)
    return np.stack([np.cos(half), s * hx, s * hy, s * hz])


def su2_mul(q1, q2):
    """Matrix product U1 @ U2 in (a, b, c, d) form."""
    a1, b1, c1, d1 = q1
    a2, b2, c2, d2 = q2
    return np.stack([
        a1 * a2 - b1 * b2 - c1 * c2 - d1 * d2,
        a1 * b2 + b1 * a2 + c1 * d2 - d1 * c2,
        a1 * c2 + c1 * a2 + d1 * b2 - b1 * d2,
        a1 * d2 + d1 * a2 + b1 * c2 - c1 * b2,
    ])


def su2_ordered_product(q, axis: int = -1):
    """Time-ordered product q_{N-1} @ ... @ q_0, time running along ``axis``.

    ``axis`` indexes the component-stripped shape, i.e. q.shape[1:].
    Pairwise reduction, so the rounding pattern depends only on N.
    """
    q = np.asarray(q, float)
    ax = axis % (q.ndim - 1) + 1
    q = np.moveaxis(q, ax, 1)
    while q.shape[1] > 1:
        n = q.shape[1]
        m = n - n % 2
        paired = su2_mul(q[:, 1:m:2], q[:, 0:m:2])
        if n % 2:
            paired = np.concatenate([paired, q[:, -1:]], axis=1)
        q = paired
    return q[:, 0]


def su2_identity(shape=()):
    q = np.zeros((4,) + tuple(shape))
    q[0] = 1.0
    return q


def su2_to_matrix(q) -> np.ndarray:
    a, b, c, d = q
    return np.array([[a - 1j * d, -1j * b - c], [-1j * b + c, a + 1j * d]])


def su2_from_matrix(u) -> np.ndarray:
    """Inverse of ``su2_to_matrix`` for a unitary with unit determinant."""
    u = as_operator(u)
    return np.array([
        (u[0, 0] + u[1, 1]).real / 2,
        -(u[0, 1] + u[1, 0]).imag / 2,
        (u[1, 0] - u[0, 1]).real / 2,
        (u[1, 1] - u[0, 0]).imag / 2,
    ])


def su2_apply(q, psi0, psi1):
    """Apply batched unitaries to batched kets given as two complex arrays."""
    a, b, c, d = q
    return (
        (a - 1j * d) * psi0 + (-1j * b - c) * psi1,
        (-1j * b + c) * psi0 + (a + 1j * d) * psi1,
    )


def rotation_angle_axis(q):
    """Angle and unit axis of the SU(2) element (a, b, c, d)."""
    q = np.asarray(q, float)
    v = q[1:]
    s = np.sqrt(v @ v)
    angle = 2.0 * np.arctan2(s, q[0])
    axis = v / s if s > 0 else np.array([0.0, 0.0, 1.0])
    return angle, axis
