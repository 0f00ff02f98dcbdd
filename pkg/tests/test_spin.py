import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ddmag.spin import (
    IDENTITY, KET0, KET1, KET_PLUS_X, SX, SY, SZ,
    as_ket, bloch_vector, commutator, expect, expm_antihermitian, is_unitary,
    rotation_angle_axis, su2_from_field, su2_from_matrix, su2_mul,
    su2_ordered_product, su2_to_matrix,
)
from scipy.linalg import expm

finite = st.floats(-50, 50, allow_nan=False)


def test_commutation_relations():
    np.testing.assert_allclose(commutator(SX, SY), 1j * SZ, atol=1e-15)
    np.testing.assert_allclose(commutator(SY, SZ), 1j * SX, atol=1e-15)
    np.testing.assert_allclose(commutator(SZ, SX), 1j * SY, atol=1e-15)


def test_pi_rotation_flips_ground_state():
    u = expm_antihermitian(np.pi * SX)
    assert abs(abs(u @ KET0 @ KET1.conj()) - 1) < 1e-12


def test_zero_time_is_identity():
    np.testing.assert_allclose(expm_antihermitian(3.0 * SY + SZ, 0.0), IDENTITY, atol=1e-15)


@pytest.mark.parametrize("k", [1, 2, 4])
def test_two_full_rotations_are_identity(k):
    u = expm_antihermitian(SX, 2 * np.pi * k)
    np.testing.assert_allclose(u @ u, IDENTITY, atol=1e-10)


def test_non_hermitian_rejected():
    with pytest.raises(ValueError):
        expm_antihermitian(SX + 1e-6j * IDENTITY)


def test_expectations():
    assert expect(KET0, SZ) == pytest.approx(0.5)
    assert expect(KET0, SX) == pytest.approx(0.0)
    assert expect(KET_PLUS_X, SX) == pytest.approx(0.5)


def test_bloch_roundtrip():
    r = np.array([0.6, 0.0, 0.8])
    np.testing.assert_allclose(bloch_vector(as_ket(r)), r, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(finite, finite, finite, st.floats(-5, 5), st.floats(-5, 5))
def test_exponential_properties(hx, hy, hz, t1, t2):
    h = hx * SX + hy * SY + hz * SZ
    u1, u2 = expm_antihermitian(h, t1), expm_antihermitian(h, t2)
    assert is_unitary(u1)
    assert abs(abs(np.linalg.det(u1)) - 1) < 1e-12
    np.testing.assert_allclose(u1 @ u2, expm_antihermitian(h, t1 + t2), atol=1e-10)
    np.testing.assert_allclose(u1, expm(-1j * h * t1), atol=1e-10)


@settings(max_examples=40, deadline=None)
@given(finite, finite, finite, st.floats(0, 1))
def test_su2_matches_matrix_exponential(hx, hy, hz, dt):
    q = su2_from_field(np.array(hx), np.array(hy), np.array(hz), dt)
    h = hx * SX + hy * SY + hz * SZ
    # su2_from_field takes the field on Pauli matrices: exp(-i dt h.sigma / 2)
    np.testing.assert_allclose(su2_to_matrix(q), expm(-1j * h * dt), atol=1e-10)
    np.testing.assert_allclose(su2_from_matrix(su2_to_matrix(q)), q, atol=1e-12)


def test_ordered_product_is_left_multiplication():
    rng = np.random.default_rng(3)
    fields = rng.normal(size=(3, 7))
    q = su2_from_field(*fields, 0.3)
    ref = IDENTITY
    for i in range(7):
        ref = su2_to_matrix(q[:, i]) @ ref
    np.testing.assert_allclose(su2_to_matrix(su2_ordered_product(q)), ref, atol=1e-12)
    np.testing.assert_allclose(su2_to_matrix(su2_mul(q[:, 1], q[:, 0])),
                               su2_to_matrix(q[:, 1]) @ su2_to_matrix(q[:, 0]), atol=1e-12)


def test_rotation_angle():
    q = su2_from_matrix(expm_antihermitian(SY, 0.3))
    angle, axis = rotation_angle_axis(q)
    assert float(angle) == pytest.approx(0.3)
    np.testing.assert_allclose(np.ravel(axis), [0, 1, 0], atol=1e-12)
