import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mimorelay import kernels
from mimorelay.kernels import (NotHermitianError, NotPsdError, block_trace_retract, capacity_waterfill,
                               logdet_factor, logdet_id_plus, pinv_psd, psd_project, schur_conditional)


def crandn(rng, *shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) / np.sqrt(2)


def random_psd(rng, n, rank=None, scale=1.0):
    A = crandn(rng, n, rank or n)
    return scale * A @ A.conj().T


def test_logdet_scalar_values():
    assert logdet_id_plus([[0.0]], [[5.0]]) == 0.0
    assert logdet_id_plus([[1.0]], [[1.0]]) == pytest.approx(1.0, abs=1e-12)
    assert logdet_id_plus([[2.0]], [[1.0]]) == pytest.approx(math.log2(5), abs=1e-12)


def test_logdet_rejects_bad_input():
    with pytest.raises(ValueError):
        logdet_id_plus(np.ones((2, 3)), np.eye(2))
    with pytest.raises(NotPsdError):
        logdet_id_plus(np.eye(2), np.diag([1.0, -1.0]))
    with pytest.raises(NotHermitianError):
        logdet_id_plus(np.eye(2), np.array([[1.0, 1.0], [0.0, 1.0]]))


def test_logdet_large_power_stays_finite():
    rng = np.random.default_rng(0)
    G = crandn(rng, 4, 4)
    val = logdet_id_plus(G, 1e4 * np.eye(4))
    assert np.isfinite(val) and val > 40


def test_logdet_forms_agree():
    # |I_r + G K G^H| against |I_t + G^H G K| through a plain determinant
    rng = np.random.default_rng(1)
    for _ in range(200):
        r, t = rng.integers(1, 5, size=2)
        G = crandn(rng, r, t)
        K = random_psd(rng, t, scale=rng.uniform(0.1, 5))
        other = np.log2(np.linalg.det(np.eye(t) + G.conj().T @ G @ K).real)
        assert abs(logdet_id_plus(G, K) - other) <= 1e-9


def test_logdet_factor_matches():
    rng = np.random.default_rng(2)
    for _ in range(50):
        G = crandn(rng, 3, 4)
        Z = crandn(rng, 4, 2)
        assert logdet_factor(G @ Z) == pytest.approx(logdet_id_plus(G, Z @ Z.conj().T), abs=1e-10)


def test_schur_examples():
    K1 = np.array([[2.0, 0.3], [0.3, 1.0]])
    assert np.allclose(schur_conditional(K1, np.zeros((2, 1)), [[1.0]]), K1)
    rho = 0.6
    assert schur_conditional([[1.0]], [[rho]], [[1.0]])[0, 0].real == pytest.approx(1 - rho**2)
    # singular K2: the joint PSD condition forces K12 = 0 and the conditional is K1
    assert schur_conditional([[1.0]], [[0.0]], [[0.0]])[0, 0].real == pytest.approx(1.0)
    eps_limit = schur_conditional([[1.0]], [[0.0]], [[1e-14]])
    assert eps_limit[0, 0].real == pytest.approx(1.0)


def test_schur_rejects_non_psd_joint():
    with pytest.raises(NotPsdError):
        schur_conditional([[1.0]], [[2.0]], [[1.0]])


def test_schur_psd_and_dominated():
    rng = np.random.default_rng(3)
    for _ in range(100):
        t1, t2 = rng.integers(1, 4, size=2)
        K = random_psd(rng, t1 + t2, rank=rng.integers(1, t1 + t2 + 1))
        S = schur_conditional(K[:t1, :t1], K[:t1, t1:], K[t1:, t1:])
        assert np.linalg.eigvalsh(S).min() >= -1e-9
        assert np.linalg.eigvalsh(K[:t1, :t1] - S).min() >= -1e-9


def test_psd_project_examples():
    assert np.allclose(psd_project(np.diag([1.0, -1.0])), np.diag([1.0, 0.0]))
    rng = np.random.default_rng(4)
    K = random_psd(rng, 3)
    assert np.max(np.abs(psd_project(K) - K)) <= 1e-10


def test_psd_project_against_real_embedding():
    # independent oracle: a complex hermitian H maps to the real symmetric
    # [[Re, -Im], [Im, Re]]; project that with a real eigensolver and map back
    rng = np.random.default_rng(5)
    for _ in range(20):
        A = crandn(rng, 3, 3)
        H = (A + A.conj().T) / 2
        R = np.block([[H.real, -H.imag], [H.imag, H.real]])
        w, V = np.linalg.eigh(R)
        Rp = (V * np.clip(w, 0, None)) @ V.T
        oracle = Rp[:3, :3] + 1j * Rp[3:, :3]
        assert np.linalg.norm(psd_project(H) - oracle) <= 1e-9


def test_block_trace_retract_examples():
    P = 2.0
    K = np.eye(2) * np.array([1.0, 1.5])
    assert np.allclose(block_trace_retract(K, 1, P), K)
    K = np.diag([2 * P, P])
    out = block_trace_retract(K, 1, P)
    assert np.allclose(out, np.diag([P, P]))
    c = 0.7
    K = np.array([[2 * P, c], [c, P]])
    out = block_trace_retract(K, 1, P)
    assert out[0, 1].real == pytest.approx(c / math.sqrt(2))


def test_block_trace_retract_zero_block():
    out = block_trace_retract(np.diag([0.0, 5.0]), 1, 1.0)
    assert np.allclose(out, np.diag([0.0, 1.0]))


@settings(max_examples=60, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.integers(1, 3), t2=st.integers(1, 3),
       P=st.floats(0.01, 100.0))
def test_block_trace_retract_feasible(seed, t1, t2, P):
    rng = np.random.default_rng(seed)
    K = random_psd(rng, t1 + t2, scale=rng.uniform(0.01, 50))
    out = block_trace_retract(K, t1, P)
    assert np.linalg.eigvalsh(out).min() >= -1e-9 * max(1.0, np.abs(out).max())
    assert np.trace(out[:t1, :t1]).real <= P + 1e-9
    assert np.trace(out[t1:, t1:]).real <= P + 1e-9


def test_pinv_threshold():
    K = np.diag([1.0, 1e-12, 0.0])
    assert np.allclose(pinv_psd(K), np.diag([1.0, 0.0, 0.0]))


def test_waterfill_two_links():
    # gains 4 and 1 with P = 2: water level 1.625, powers 1.375 and 0.625
    val = capacity_waterfill(np.diag([2.0, 1.0]), 2.0)
    assert val == pytest.approx(math.log2(6.5 * 1.625), abs=1e-12)
    p = kernels.waterfill([4.0, 1.0], 2.0)
    assert np.allclose(p, [1.375, 0.625])
    assert np.allclose(kernels.waterfill([4.0, 0.01], 0.1), [0.1, 0.0])


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), gamma=st.floats(0.0, 1.0), r=st.integers(1, 4), t=st.integers(1, 4))
def test_scaled_gain_logdet_lower_bound(seed, gamma, r, t):
    rng = np.random.default_rng(seed)
    G = crandn(rng, r, t)
    K = random_psd(rng, t, rank=rng.integers(1, t + 1), scale=rng.uniform(0.01, 20))
    lhs = logdet_id_plus(math.sqrt(gamma) * G, K)
    rhs = logdet_id_plus(G, K) + (min(t, r) * math.log2(gamma) if gamma > 0 else -math.inf)
    assert lhs >= rhs - 1e-9


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), t1=st.integers(1, 3), t2=st.integers(1, 3), r3=st.integers(1, 4))
def test_cross_covariance_combination_is_psd(seed, t1, t2, r3):
    rng = np.random.default_rng(seed)
    K = random_psd(rng, t1 + t2, rank=rng.integers(1, t1 + t2 + 1))
    K1, K12, K2 = K[:t1, :t1], K[:t1, t1:], K[t1:, t1:]
    G31, G32 = crandn(rng, r3, t1), crandn(rng, r3, t2)
    M = (G31 @ K1 @ G31.conj().T + G32 @ K2 @ G32.conj().T
         - G32 @ K12.conj().T @ G31.conj().T - G31 @ K12 @ G32.conj().T)
    M = (M + M.conj().T) / 2
    assert np.linalg.eigvalsh(M).min() >= -1e-9 * max(1.0, np.abs(M).max())
