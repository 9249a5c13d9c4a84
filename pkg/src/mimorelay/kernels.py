"""Complex-matrix primitives shared by the bound evaluators and the optimizer.

All rates are in bits. Log-determinants are never taken from a raw
determinant; they go through an eigen- or Cholesky factorization of a
hermitian positive-definite form so that powers up to ~1e4 stay finite.
"""

from __future__ import annotations

import numpy as np

LN2 = np.log(2.0)

HERMITIAN_ATOL = 1e-12
PSD_RTOL = 1e-9
PINV_RTOL = 1e-10


class NotHermitianError(ValueError):
    pass


class NotPsdError(ValueError):
    pass


def hermitize(H: np.ndarray) -> np.ndarray:
    """Return (H + H^H) / 2."""
    H = np.asarray(H)
    return 0.5 * (H + H.conj().T)


def as_hermitian(H, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate that ``H`` is square hermitian (entrywise ``atol``) and symmetrize it."""
    H = np.atleast_2d(np.asarray(H, dtype=complex))
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise NotHermitianError(f"expected a square matrix, got shape {H.shape}")
    dev = np.max(np.abs(H - H.conj().T)) if H.size else 0.0
    # scale-aware slack so that products like G K G^H with large P still pass
    scale = max(1.0, float(np.max(np.abs(H)))) if H.size else 1.0
    if dev > atol * scale:
        raise NotHermitianError(f"matrix is not hermitian (max |H - H^H| = {dev:.3e})")
    return hermitize(H)


def psd_floor(w: np.ndarray) -> float:
    """Tolerance below zero still accepted for eigenvalues ``w``."""
    top = float(np.max(np.abs(w))) if w.size else 0.0
    return -PSD_RTOL * max(top, 1.0)


def as_psd(K, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate PSD-ness (eigenvalues >= -1e-9 * max(|lambda|max, 1))."""
    K = as_hermitian(K, atol)
    if K.size == 0:
        return K
    w = np.linalg.eigvalsh(K)
    if w[0] < psd_floor(w):
        raise NotPsdError(f"matrix is not PSD (min eigenvalue {w[0]:.3e})")
    return K


def is_psd(K) -> bool:
    try:
        as_psd(K)
    except ValueError:
        return False
    return True


def _sqrtm_psd(K: np.ndarray) -> np.ndarray:
    w, V = np.linalg.eigh(hermitize(K))
    return (V * np.sqrt(np.clip(w, 0.0, None))) @ V.conj().T


def logdet_id_plus(G, K, check: bool = True) -> float:
    """log2 |I + G K G^H| for an r x t gain ``G`` and a t x t PSD ``K``.

    Evaluated as log2 |I_t + K^{1/2} G^H G K^{1/2}| through the eigenvalues of
    that hermitian form, which equals the r x r version by Sylvester's
    determinant identity.
    """
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    K = as_psd(K) if check else hermitize(np.atleast_2d(np.asarray(K, dtype=complex)))
    if G.shape[1] != K.shape[0]:
        raise ValueError(f"non-conforming dimensions: G is {G.shape}, K is {K.shape}")
    if K.size == 0 or G.shape[0] == 0:
        return 0.0
    root = _sqrtm_psd(K)
    M = root @ (G.conj().T @ G) @ root
    w = np.linalg.eigvalsh(hermitize(M))
    return float(np.sum(np.log1p(np.clip(w, 0.0, None))) / LN2)


def logdet_factor(M: np.ndarray) -> float:
    """log2 |I + M M^H| via Cholesky of the smaller Gram matrix.

    Hot-loop variant used by the optimizer where the covariance is already
    held in factored form (K = Z Z^H, M = G Z).
    """
    r, c = M.shape
    if r == 0 or c == 0:
        return 0.0
    A = M.conj().T @ M if c <= r else M @ M.conj().T
    A = hermitize(A)
    A.flat[:: A.shape[0] + 1] += 1.0
    L = np.linalg.cholesky(A)
    return float(2.0 * np.sum(np.log(np.real(np.diag(L)))) / LN2)


def waterfill(gains, P: float) -> np.ndarray:
    """Powers p_i = max(0, mu - 1/g_i) with sum p_i = P over channel gains ``g_i`` >= 0."""
    g = np.asarray(gains, dtype=float)
    p = np.zeros_like(g)
    if P <= 0.0 or not np.any(g > 0):
        return p
    order = np.argsort(g)[::-1]
    gs = g[order]
    gs = gs[gs > 0]
    inv = 1.0 / gs
    for k in range(len(gs), 0, -1):
        mu = (P + inv[:k].sum()) / k
        if mu - inv[k - 1] >= 0.0:
            p[order[:k]] = mu - inv[:k]
            return p
    return p  # unreachable: k = 1 always satisfies the test


def capacity_waterfill(G, P: float) -> float:
    """max log2 |I + G K G^H| over PSD K with tr K <= P (single-user MIMO capacity)."""
    G = np.atleast_2d(np.asarray(G, dtype=complex))
    if G.size == 0:
        return 0.0
    g = np.clip(np.linalg.eigvalsh(hermitize(G.conj().T @ G)), 0.0, None)
    p = waterfill(g, P)
    return float(np.sum(np.log1p(g * p)) / LN2)


def pinv_psd(K: np.ndarray, rtol: float = PINV_RTOL) -> np.ndarray:
    """Eigenvalue-thresholded pseudo-inverse of a PSD matrix."""
    K = hermitize(K)
    if K.size == 0:
        return K.copy()
    w, V = np.linalg.eigh(K)
    top = float(np.max(w))
    if top <= 0.0:
        return np.zeros_like(K)
    keep = w > rtol * top
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    return hermitize((V * inv) @ V.conj().T)


def schur_conditional(K1, K12, K2, check: bool = True) -> np.ndarray:
    """K1 - K12 pinv(K2) K12^H, the covariance of X1 given X2.

    Raises ``NotPsdError`` if the assembled joint covariance is not PSD.
    """
    K1 = np.atleast_2d(np.asarray(K1, dtype=complex))
    K2 = np.atleast_2d(np.asarray(K2, dtype=complex))
    K12 = np.asarray(K12, dtype=complex).reshape(K1.shape[0], K2.shape[0])
    if check:
        as_psd(np.block([[K1, K12], [K12.conj().T, K2]]))
    S = K1 - K12 @ pinv_psd(K2) @ K12.conj().T
    S = hermitize(S)
    # joint PSD guarantees S >= 0; round-off can leave tiny negative eigenvalues
    w, V = np.linalg.eigh(S)
    if w.size and w[0] < 0.0:
        S = hermitize((V * np.clip(w, 0.0, None)) @ V.conj().T)
    return S


def psd_project(H) -> np.ndarray:
    """Frobenius-nearest PSD matrix: clip negative eigenvalues to zero."""
    H = as_hermitian(H, atol=1e-9)
    w, V = np.linalg.eigh(H)
    return hermitize((V * np.clip(w, 0.0, None)) @ V.conj().T)


def block_trace_retract(K, t1: int, P: float) -> np.ndarray:
    """Scale a joint (t1 + t2)-square covariance so both block traces are <= P.

    Returns D K D with D = diag(sqrt(a) I_t1, sqrt(b) I_t2), a = min(1, P / tr K1),
    b = min(1, P / tr K2). The congruence keeps the matrix PSD.
    """
    K = hermitize(np.atleast_2d(np.asarray(K, dtype=complex)))
    n = K.shape[0]
    tr1 = float(np.real(np.trace(K[:t1, :t1])))
    tr2 = float(np.real(np.trace(K[t1:, t1:])))
    a = 1.0 if tr1 <= 0.0 else min(1.0, P / tr1)
    b = 1.0 if tr2 <= 0.0 else min(1.0, P / tr2)
    d = np.concatenate([np.full(t1, np.sqrt(a)), np.full(n - t1, np.sqrt(b))])
    return hermitize(K * np.outer(d, d))
