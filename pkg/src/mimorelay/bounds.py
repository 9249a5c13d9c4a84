"""Closed-form cut/rate terms of each relay-channel bound at a fixed Gaussian input.

Every evaluator returns both terms of its min{., .} so that the optimizer can
form weighted combinations. Compression noise levels are plain floats:
``ZERO`` (0.0) and ``INFINITE`` (math.inf) are the degenerate endpoints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .channel import ChannelMatrices, HalfDuplexChannel
from .kernels import logdet_id_plus

ZERO = 0.0
INFINITE = math.inf


@dataclass(frozen=True, eq=False)
class JointCovariance:
    """Blocked input covariance [[K1, K12], [K12^H, K2]]."""

    K1: np.ndarray
    K12: np.ndarray
    K2: np.ndarray

    def __post_init__(self):
        K1 = np.atleast_2d(np.asarray(self.K1, dtype=complex))
        K2 = np.atleast_2d(np.asarray(self.K2, dtype=complex))
        K12 = np.asarray(self.K12, dtype=complex)
        if K12.size == 0 or K12.ndim < 2:
            K12 = K12.reshape(K1.shape[0], K2.shape[0])
        if K1.shape[0] != K1.shape[1] or K2.shape[0] != K2.shape[1]:
            raise ValueError("diagonal blocks must be square")
        if K12.shape != (K1.shape[0], K2.shape[0]):
            raise ValueError(f"K12 must be {K1.shape[0]}x{K2.shape[0]}, got {K12.shape}")
        object.__setattr__(self, "K1", K1)
        object.__setattr__(self, "K12", K12)
        object.__setattr__(self, "K2", K2)

    @property
    def t1(self) -> int:
        return self.K1.shape[0]

    @property
    def t2(self) -> int:
        return self.K2.shape[0]

    def full(self) -> np.ndarray:
        return np.block([[self.K1, self.K12], [self.K12.conj().T, self.K2]])

    @classmethod
    def from_full(cls, K, t1: int) -> JointCovariance:
        K = kernels.hermitize(np.atleast_2d(np.asarray(K, dtype=complex)))
        return cls(K[:t1, :t1], K[:t1, t1:], K[t1:, t1:])

    @classmethod
    def independent(cls, K1, K2) -> JointCovariance:
        K1 = np.atleast_2d(np.asarray(K1, dtype=complex))
        K2 = np.atleast_2d(np.asarray(K2, dtype=complex))
        return cls(K1, np.zeros((K1.shape[0], K2.shape[0]), dtype=complex), K2)

    @classmethod
    def zeros(cls, t1: int, t2: int) -> JointCovariance:
        return cls.independent(np.zeros((t1, t1)), np.zeros((t2, t2)))

    def conditional(self) -> np.ndarray:
        """K_{1|2} = K1 - K12 pinv(K2) K12^H."""
        return kernels.schur_conditional(self.K1, self.K12, self.K2)

    def traces(self) -> tuple[float, float]:
        return float(np.real(np.trace(self.K1))), float(np.real(np.trace(self.K2)))

    def is_psd(self) -> bool:
        return kernels.is_psd(self.full())

    def is_feasible(self, P: float, tol: float = 1e-9) -> bool:
        tr1, tr2 = self.traces()
        return self.is_psd() and tr1 <= P + tol and tr2 <= P + tol


@dataclass(frozen=True)
class CutTerms:
    term_a: float
    term_b: float

    @property
    def value(self) -> float:
        return min(self.term_a, self.term_b)


def check_noise(sigma2: float, allow_zero: bool = True) -> float:
    s = float(sigma2)
    if math.isnan(s) or s < 0.0:
        raise ValueError(f"compression noise must be >= 0 or INFINITE, got {sigma2!r}")
    if s == 0.0 and not allow_zero:
        raise ValueError("compress-forward needs strictly positive compression noise (or INFINITE)")
    return s


def cf_penalty(r2: int, sigma2: float) -> float:
    """r2 log2(1 + 1/sigma2): cost of describing the compressed relay output."""
    if math.isinf(sigma2):
        return 0.0
    return r2 * math.log2(1.0 + 1.0 / sigma2)


def _joint(K: JointCovariance, ch: ChannelMatrices) -> np.ndarray:
    c = ch.config
    if (K.t1, K.t2) != (c.t1, c.t2):
        raise ValueError(f"covariance is for (t1, t2) = {(K.t1, K.t2)}, channel has {(c.t1, c.t2)}")
    return K.full()


def _mac_cut(ch: ChannelMatrices, K: JointCovariance) -> float:
    return logdet_id_plus(ch.G3s, _joint(K, ch))


def cutset_terms(ch: ChannelMatrices, K: JointCovariance) -> CutTerms:
    """MAC cut log|I + G3* K G3*^H| and broadcast cut log|I + G*1 K_{1|2} G*1^H|."""
    a = _mac_cut(ch, K)
    b = logdet_id_plus(ch.Gs1, K.conditional())
    return CutTerms(a, b)


def cutset_term_b_gram(ch: ChannelMatrices, K: JointCovariance) -> float:
    """Broadcast cut in the t1 x t1 form log|I + (G21^H G21 + G31^H G31) K_{1|2}|."""
    _joint(K, ch)
    Q = K.conditional()
    A = ch.G21.conj().T @ ch.G21 + ch.G31.conj().T @ ch.G31
    root = kernels._sqrtm_psd(Q)
    w = np.linalg.eigvalsh(kernels.hermitize(root @ A @ root))
    return float(np.sum(np.log1p(np.clip(w, 0.0, None))) / kernels.LN2)


def dt_rate(ch: ChannelMatrices, K1) -> float:
    return logdet_id_plus(ch.G31, K1)


def df_terms(ch: ChannelMatrices, K: JointCovariance) -> CutTerms:
    a = _mac_cut(ch, K)
    b = logdet_id_plus(ch.G21, K.conditional())
    return CutTerms(a, b)


def conditional_given_noisy_view(Q, G21, sigma2: float) -> np.ndarray:
    """Cov(X | G21 X + N) for X ~ CN(0, Q), N ~ CN(0, sigma2 I).

    Equals Q (I + G21^H G21 Q / sigma2)^{-1}; sigma2 = 0 is the noiseless
    limit (pseudo-inverse convention) and INFINITE returns Q.
    """
    Q = kernels.hermitize(np.atleast_2d(np.asarray(Q, dtype=complex)))
    if math.isinf(sigma2):
        return Q
    root = kernels._sqrtm_psd(Q)
    M = np.asarray(G21, dtype=complex) @ root
    mu, V = np.linalg.eigh(kernels.hermitize(M.conj().T @ M))
    mu = np.clip(mu, 0.0, None)
    if sigma2 == 0.0:
        top = float(mu.max()) if mu.size else 0.0
        shrink = (mu <= kernels.PINV_RTOL * top).astype(float) if top > 0 else np.ones_like(mu)
    else:
        shrink = sigma2 / (sigma2 + mu)
    return kernels.hermitize(root @ (V * shrink) @ V.conj().T @ root)


def _pdf_second(ch: ChannelMatrices, Q: np.ndarray, sigma2: float) -> float:
    C = conditional_given_noisy_view(Q, ch.G21, sigma2)
    return (logdet_id_plus(ch.G21, Q, check=False)
            + logdet_id_plus(ch.G31, C, check=False)
            - logdet_id_plus(ch.G21, C, check=False))


def pdf_terms(ch: ChannelMatrices, K: JointCovariance, sigma2: float) -> CutTerms:
    """Partial decode-forward with U = G21 X1 + Z2', Z2' ~ CN(0, sigma2 I)."""
    s = check_noise(sigma2)
    a = _mac_cut(ch, K)
    return CutTerms(a, _pdf_second(ch, K.conditional(), s))


def pdf_terms_relaxed(ch: ChannelMatrices, K: JointCovariance) -> CutTerms:
    """Concave surrogate: broadcast cut minus min(t1, r2)."""
    c = ch.config
    a = _mac_cut(ch, K)
    return CutTerms(a, cutset_term_b_gram(ch, K) - min(c.t1, c.r2))


def _independent_mac(ch: ChannelMatrices, K1, K2) -> float:
    return logdet_id_plus(ch.G3s, JointCovariance.independent(K1, K2).full())


def npdf_terms(ch: ChannelMatrices, K1, K2, sigma2: float) -> CutTerms:
    s = check_noise(sigma2)
    K1 = kernels.as_psd(K1)
    return CutTerms(_independent_mac(ch, K1, K2), _pdf_second(ch, K1, s))


def npdf_terms_relaxed(ch: ChannelMatrices, K1, K2) -> CutTerms:
    c = ch.config
    K1 = kernels.as_psd(K1)
    return CutTerms(_independent_mac(ch, K1, K2), logdet_id_plus(ch.Gs1, K1) - min(c.t1, c.r2))


def cf_terms(ch: ChannelMatrices, K1, K2, sigma2: float) -> CutTerms:
    """Compress-forward with Y2_hat = Y2 + Z_hat, Z_hat ~ CN(0, sigma2 I)."""
    s = check_noise(sigma2, allow_zero=False)
    a = _independent_mac(ch, K1, K2) - cf_penalty(ch.config.r2, s)
    if math.isinf(s):
        return CutTerms(a, dt_rate(ch, K1))
    stacked = np.vstack([ch.G21 / math.sqrt(1.0 + s), ch.G31])
    return CutTerms(a, logdet_id_plus(stacked, K1))


def _sfd_check(hd: HalfDuplexChannel):
    if hd.mode != "SFD":
        raise ValueError("expected an SFD channel")


def sfd_terms(hd: HalfDuplexChannel, Kp, Kpp, K2, K12p) -> CutTerms:
    """Capacity expression of the sender-frequency-division channel.

    ``Kp``/``Kpp`` are the covariances of X1' and X1''; ``K12p`` correlates X1'
    with the relay input.
    """
    _sfd_check(hd)
    coh = JointCovariance(Kp, K12p, K2)
    kernels.as_psd(coh.full())
    Kpp = kernels.as_psd(Kpp)
    a = logdet_id_plus(np.hstack([hd.G31, hd.G32]), coh.full())
    b = logdet_id_plus(hd.G21, Kpp) + logdet_id_plus(hd.G31, coh.conditional())
    return CutTerms(a, b)


def sfd_cf_terms(hd: HalfDuplexChannel, Kp, Kpp, K2, sigma2: float) -> CutTerms:
    _sfd_check(hd)
    s = check_noise(sigma2, allow_zero=False)
    Kp, Kpp, K2 = kernels.as_psd(Kp), kernels.as_psd(Kpp), kernels.as_psd(K2)
    mac = logdet_id_plus(np.hstack([hd.G31, hd.G32]), JointCovariance.independent(Kp, K2).full())
    a = mac - cf_penalty(hd.r2, s)
    b = logdet_id_plus(hd.G31, Kp)
    if not math.isinf(s):
        b += logdet_id_plus(hd.G21 / math.sqrt(1.0 + s), Kpp)
    return CutTerms(a, b)


def _rfd_check(hd: HalfDuplexChannel):
    if hd.mode != "RFD":
        raise ValueError("expected an RFD channel")


def rfd_cutset_terms(hd: HalfDuplexChannel, K1, K2) -> CutTerms:
    _rfd_check(hd)
    a = logdet_id_plus(hd.G31, K1) + logdet_id_plus(hd.G32, K2)
    b = logdet_id_plus(np.vstack([hd.G21, hd.G31]), K1)
    return CutTerms(a, b)


def rfd_cf_terms(hd: HalfDuplexChannel, K1, K2, sigma2: float) -> CutTerms:
    _rfd_check(hd)
    s = check_noise(sigma2, allow_zero=False)
    a = logdet_id_plus(hd.G31, K1) + logdet_id_plus(hd.G32, K2) - cf_penalty(hd.r2, s)
    if math.isinf(s):
        return CutTerms(a, logdet_id_plus(hd.G31, K1))
    b = logdet_id_plus(np.vstack([hd.G21 / math.sqrt(1.0 + s), hd.G31]), K1)
    return CutTerms(a, b)
