"""Max-min log-det optimization over block-trace-constrained covariances.

Every bound has the shape ``max_K min(f_a(K), f_b(K))`` with concave terms.
It is solved through the weighted problems

    g(lam) = max_K  lam * f_a + (1 - lam) * f_b,        lam in [0, 1],

which are convex in ``lam`` with ``min_lam g = max_K min(f_a, f_b)``. An outer
golden-section search over ``lam`` calls an inner solver (L-BFGS by default,
plain gradient ascent on request).

Inner parametrization. Terms that depend on the conditional covariance
K_{1|2} are evaluated on an auxiliary matrix S with 0 <= S <= K_{1|2}, which
turns the problem into a jointly concave one in (K, S). Both are held as

    K = Z Z^H,   S = R R^H,   Z = [[R, V1], [0, V2]]

so that positivity is automatic, the block traces are the squared Frobenius
norms of the sender and relay row blocks of Z, and rescaling those row blocks
is exactly the congruence retraction ``kernels.block_trace_retract``.
Structural zeros (independent inputs, the sender-frequency-division pattern)
are imposed by a mask on Z.

Certificates. At any iterate the Frank-Wolfe gap of the (K, S) program,
bounded through its two-multiplier SDP dual, gives a valid upper bound on
g(lam); the smallest such bound over the evaluated ``lam`` is an upper bound
on the max-min value no matter how accurate the inner solves were.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import minimize, minimize_scalar

from . import bounds as B
from . import kernels
from .bounds import INFINITE, ZERO, JointCovariance
from .channel import ChannelMatrices, HalfDuplexChannel
from .kernels import LN2
from .rng import CounterRNG

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0

BOUND_KINDS = ("CS", "DF", "DT", "PDF", "NPDF", "CF",
               "SFD_CAP", "SFD_CF", "RFD_CS", "RFD_PDF", "RFD_CF")


def default_sigma2_grid() -> tuple[float, ...]:
    return tuple(2.0 ** k for k in range(-6, 7))


@dataclass(frozen=True)
class SolverConfig:
    tol_bits: float = 1e-3
    max_inner_iterations: int = 5000
    lambda_tol: float = 1e-4
    initial_step: float = 1.0
    sigma2_grid: tuple[float, ...] = field(default_factory=default_sigma2_grid)
    restarts: int = 3
    seed: int = 0
    check_every: int = 8
    inner: str = "lbfgs"

    def __post_init__(self):
        if not self.tol_bits > 0:
            raise ValueError("tol_bits must be positive")
        if self.inner not in ("lbfgs", "ascent"):
            raise ValueError("inner must be 'lbfgs' or 'ascent'")
        if not self.sigma2_grid:
            raise ValueError("sigma2 grid must be nonempty")
        for s in self.sigma2_grid:
            B.check_noise(s)
        object.__setattr__(self, "sigma2_grid", tuple(float(s) for s in self.sigma2_grid))

    def pdf_grid(self) -> tuple[float, ...]:
        """Grid plus both degenerate endpoints, ascending."""
        return tuple(sorted(set(self.sigma2_grid) | {ZERO, INFINITE}))

    def cf_grid(self) -> tuple[float, ...]:
        return tuple(sorted((set(self.sigma2_grid) - {ZERO}) | {INFINITE}))


# ---------------------------------------------------------------------------
# feasible sets

@dataclass(frozen=True)
class FeasibleSet:
    """Covariances of (X1, X2) with tr K1 <= P and tr K2 <= P.

    ``groups`` partitions the sender antennas into (start, stop, coherent)
    blocks: a coherent block may correlate with the relay input, blocks never
    correlate with each other. One coherent block is the usual full-duplex
    set; one independent block is the product-distribution set; the
    sender-frequency-division pattern is (X1' coherent, X1'' independent).
    """

    t1: int
    t2: int
    P: float
    groups: tuple[tuple[int, int, bool], ...]

    def __post_init__(self):
        if self.P < 0:
            raise ValueError("power must be nonnegative")
        pos = 0
        for start, stop, _ in self.groups:
            if start != pos or stop <= start:
                raise ValueError("groups must tile range(t1) in order")
            pos = stop
        if pos != self.t1:
            raise ValueError("groups must cover all sender antennas")

    @classmethod
    def coherent(cls, t1: int, t2: int, P: float) -> FeasibleSet:
        return cls(t1, t2, float(P), ((0, t1, True),))

    @classmethod
    def independent(cls, t1: int, t2: int, P: float) -> FeasibleSet:
        return cls(t1, t2, float(P), ((0, t1, False),))

    @classmethod
    def sfd(cls, t1p: int, t1pp: int, t2: int, P: float, coherent: bool = True) -> FeasibleSet:
        return cls(t1p + t1pp, t2, float(P), ((0, t1p, coherent), (t1p, t1p + t1pp, False)))

    @property
    def n(self) -> int:
        return self.t1 + self.t2

    @property
    def is_coherent(self) -> bool:
        return any(c for _, _, c in self.groups)

    def mask(self) -> np.ndarray:
        t1, n = self.t1, self.n
        m = np.zeros((n, n), dtype=bool)
        for start, stop, coh in self.groups:
            m[start:stop, start:stop] = True
            if coh:
                m[start:stop, t1:] = True
        m[t1:, t1:] = True
        return m

    def structural_zeros(self) -> np.ndarray:
        """Boolean pattern of entries of K forced to zero."""
        t1, n = self.t1, self.n
        allowed = np.zeros((n, n), dtype=bool)
        coh_rows = np.zeros(n, dtype=bool)
        for start, stop, coh in self.groups:
            allowed[start:stop, start:stop] = True
            if coh:
                coh_rows[start:stop] = True
        coh_rows[t1:] = True
        allowed |= np.outer(coh_rows, coh_rows)
        return ~allowed

    def contains(self, K, tol: float = 1e-9) -> bool:
        """Membership test: PSD, both traces within budget, structural zeros respected."""
        K = np.asarray(K, dtype=complex)
        if K.shape != (self.n, self.n):
            return False
        if not kernels.is_psd(K):
            return False
        tr1 = float(np.real(np.trace(K[: self.t1, : self.t1])))
        tr2 = float(np.real(np.trace(K[self.t1:, self.t1:])))
        if tr1 > self.P + tol or tr2 > self.P + tol:
            return False
        zeros = self.structural_zeros()
        scale = max(1.0, float(np.max(np.abs(K))))
        return bool(np.all(np.abs(K[zeros]) <= 1e-9 * scale))

    def conditional(self, K: np.ndarray) -> np.ndarray:
        """Block-diagonal S holding, per sender group, Cov(X1_g | X2) (coherent) or K_gg."""
        t1 = self.t1
        S = np.zeros((t1, t1), dtype=complex)
        K2 = K[t1:, t1:]
        for start, stop, coh in self.groups:
            sl = slice(start, stop)
            if coh:
                S[sl, sl] = kernels.schur_conditional(K[sl, sl], K[sl, t1:], K2, check=False)
            else:
                S[sl, sl] = kernels.hermitize(K[sl, sl])
        return S


# ---------------------------------------------------------------------------
# objective terms

@dataclass(frozen=True)
class LogDet:
    """log2 |I + G X G^H| with X = K (n x n) or X = S (t1 x t1)."""

    G: np.ndarray
    on_s: bool = False


@dataclass(frozen=True)
class Term:
    parts: tuple[LogDet, ...]
    offset: float = 0.0


@dataclass(frozen=True)
class TermPair:
    """The two concave terms of a max-min bound, plus a label."""

    a: Term
    b: Term
    label: str = ""
    same: bool = False  # f_a == f_b, a single-objective problem


def _k(G) -> LogDet:
    return LogDet(np.asarray(G, dtype=complex), False)


def _s(G) -> LogDet:
    return LogDet(np.asarray(G, dtype=complex), True)


def _pad_cols(G, left: int, right: int) -> np.ndarray:
    G = np.asarray(G, dtype=complex)
    r = G.shape[0]
    return np.hstack([np.zeros((r, left), complex), G, np.zeros((r, right), complex)])


def cutset_pair(ch: ChannelMatrices) -> TermPair:
    return TermPair(Term((_k(ch.G3s),)), Term((_s(ch.Gs1),)), "CS")


def df_pair(ch: ChannelMatrices) -> TermPair:
    return TermPair(Term((_k(ch.G3s),)), Term((_s(ch.G21),)), "DF")


def dt_pair(ch: ChannelMatrices) -> TermPair:
    t = Term((_k(_pad_cols(ch.G31, 0, ch.config.t2)),))
    return TermPair(t, t, "DT", same=True)


def pdf_relaxed_pair(ch: ChannelMatrices) -> TermPair:
    c = ch.config
    return TermPair(Term((_k(ch.G3s),)), Term((_s(ch.Gs1),), -float(min(c.t1, c.r2))), "PDF-relaxed")


def cf_pair(ch: ChannelMatrices, sigma2: float) -> TermPair:
    """Compress-forward terms; use with an independent-input set."""
    s = B.check_noise(sigma2, allow_zero=False)
    a = Term((_k(ch.G3s),), -B.cf_penalty(ch.config.r2, s))
    if math.isinf(s):
        b = Term((_s(ch.G31),))
    else:
        b = Term((_s(np.vstack([ch.G21 / math.sqrt(1.0 + s), ch.G31])),))
    return TermPair(a, b, f"CF({s:g})")


def sfd_pair(hd: HalfDuplexChannel) -> TermPair:
    """Capacity expression of the SFD channel in embedded coordinates."""
    a_, b_ = hd.split
    G3s = np.hstack([hd.G31, np.zeros((hd.G31.shape[0], b_), complex), hd.G32])
    term_b = Term((_s(_pad_cols(hd.G21, a_, 0)), _s(_pad_cols(hd.G31, 0, b_))))
    return TermPair(Term((_k(G3s),)), term_b, "SFD")


def sfd_cf_pair(hd: HalfDuplexChannel, sigma2: float) -> TermPair:
    s = B.check_noise(sigma2, allow_zero=False)
    a_, b_ = hd.split
    G3s = np.hstack([hd.G31, np.zeros((hd.G31.shape[0], b_), complex), hd.G32])
    parts = [_s(_pad_cols(hd.G31, 0, b_))]
    if not math.isinf(s):
        parts.append(_s(_pad_cols(hd.G21 / math.sqrt(1.0 + s), a_, 0)))
    return TermPair(Term((_k(G3s),), -B.cf_penalty(hd.r2, s)), Term(tuple(parts)), f"SFD-CF({s:g})")


def rfd_cutset_pair(hd: HalfDuplexChannel) -> TermPair:
    t1, t2 = hd.t1, hd.t2
    a = Term((_k(_pad_cols(hd.G31, 0, t2)), _k(_pad_cols(hd.G32, t1, 0))))
    b = Term((_s(np.vstack([hd.G21, hd.G31])),))
    return TermPair(a, b, "RFD-CS")


def rfd_cf_pair(hd: HalfDuplexChannel, sigma2: float) -> TermPair:
    s = B.check_noise(sigma2, allow_zero=False)
    t1, t2 = hd.t1, hd.t2
    a = Term((_k(_pad_cols(hd.G31, 0, t2)), _k(_pad_cols(hd.G32, t1, 0))), -B.cf_penalty(hd.r2, s))
    if math.isinf(s):
        b = Term((_s(hd.G31),))
    else:
        b = Term((_s(np.vstack([hd.G21 / math.sqrt(1.0 + s), hd.G31])),))
    return TermPair(a, b, f"RFD-CF({s:g})")


def evaluate_pair(pair: TermPair, fset: FeasibleSet, K: np.ndarray) -> B.CutTerms:
    """Exact terms at K, with S taken as the per-group conditional covariance."""
    K = kernels.hermitize(np.asarray(K, dtype=complex))
    S = fset.conditional(K)

    def ev(term: Term) -> float:
        total = term.offset
        for part in term.parts:
            total += kernels.logdet_id_plus(part.G, S if part.on_s else K, check=False)
        return total

    return B.CutTerms(ev(pair.a), ev(pair.b))


# ---------------------------------------------------------------------------
# factor-space machinery

def _term_value_grad(term: Term, Z: np.ndarray, t1: int, grad: np.ndarray | None, weight: float) -> float:
    total = term.offset
    R = Z[:t1, :t1]
    for part in term.parts:
        X = R if part.on_s else Z
        M = part.G @ X
        if M.shape[0] == 0:
            continue
        A = M.conj().T @ M
        A.flat[:: A.shape[0] + 1] += 1.0
        L = np.linalg.cholesky(A)
        total += 2.0 * float(np.sum(np.log(np.real(np.diag(L))))) / LN2
        if grad is not None and weight != 0.0:
            g = (2.0 * weight / LN2) * (part.G.conj().T @ np.linalg.solve(A, M.conj().T).conj().T)
            if part.on_s:
                grad[:t1, :t1] += g
            else:
                grad += g
    return total


def _full_gradients(term: Term, K: np.ndarray, S: np.ndarray, weight: float, gK: np.ndarray, gS: np.ndarray):
    if weight == 0.0:
        return
    for part in term.parts:
        X = S if part.on_s else K
        G = part.G
        A = G @ X @ G.conj().T
        A = kernels.hermitize(A)
        A[np.diag_indices_from(A)] += 1.0
        g = (weight / LN2) * kernels.hermitize(G.conj().T @ np.linalg.solve(A, G))
        if part.on_s:
            gS += g
        else:
            gK += g


def dual_linear_bound(gK: np.ndarray, gS: np.ndarray, fset: FeasibleSet) -> float:
    """Upper bound on max <gK, X> + <gS, Y> over the (K, S) feasible set.

    Weak duality with one multiplier per trace budget: any a, b >= 0 with
    a I (+) b I >= gK on the coherent-plus-relay coordinates and
    a I >= gK_gg + gS_gg on every sender group certifies P (a + b).
    """
    t1, P = fset.t1, fset.P
    a_lo = 0.0
    coh = []
    for start, stop, c in fset.groups:
        sl = slice(start, stop)
        a_lo = max(a_lo, float(np.linalg.eigvalsh(kernels.hermitize(gK[sl, sl] + gS[sl, sl]))[-1]))
        if c:
            coh.extend(range(start, stop))
    W22 = kernels.hermitize(gK[t1:, t1:])
    if not coh:
        b = max(0.0, float(np.linalg.eigvalsh(W22)[-1])) if W22.size else 0.0
        return P * (a_lo + b)
    idx = np.array(coh)
    Wcc = kernels.hermitize(gK[np.ix_(idx, idx)])
    Wcr = gK[idx, t1:]
    w, V = np.linalg.eigh(Wcc)
    Wcr_rot = V.conj().T @ Wcr
    top = float(w[-1])
    cross = float(np.linalg.norm(Wcr, 2)) if Wcr.size else 0.0
    if cross == 0.0:
        b = max(0.0, float(np.linalg.eigvalsh(W22)[-1]))
        return P * (a_lo + b)

    def b_of(a: float) -> float:
        d = a - w
        if np.any(d <= 0.0):
            return math.inf
        M = W22 + (Wcr_rot.conj().T / d) @ Wcr_rot
        return max(0.0, float(np.linalg.eigvalsh(kernels.hermitize(M))[-1]))

    lo = max(a_lo, top)
    hi = max(lo, top + cross) + 1e-12
    if lo == top:
        lo = top + 1e-12 * max(1.0, abs(top))
    if hi <= lo:
        hi = lo * (1 + 1e-9) + 1e-12
    res = minimize_scalar(lambda a: a + b_of(a), bounds=(lo, hi), method="bounded",
                          options={"xatol": 1e-12 * max(1.0, hi)})
    best = min(res.fun, hi + b_of(hi))
    return P * best


@dataclass
class InnerResult:
    lam: float
    Z: np.ndarray
    fa: float
    fb: float
    phi: float
    upper: float
    iterations: int
    converged: bool

    @property
    def gap(self) -> float:
        return self.upper - self.phi


class _Problem:
    def __init__(self, pair: TermPair, fset: FeasibleSet):
        self.pair = pair
        self.fset = fset
        self.t1 = fset.t1
        self.n = fset.n
        self.mask = fset.mask()
        self.rows = (slice(0, fset.t1), slice(fset.t1, fset.n))
        self.root_p = math.sqrt(fset.P)

    def normalize(self, Z: np.ndarray) -> np.ndarray:
        Z = Z * self.mask
        for sl in self.rows:
            nrm = np.linalg.norm(Z[sl])
            if nrm > 0:
                Z[sl] *= self.root_p / nrm
        return Z

    def initial(self) -> np.ndarray:
        t1, t2, P = self.t1, self.fset.t2, self.fset.P
        Z = np.zeros((self.n, self.n), dtype=complex)
        Z[:t1, :t1] = np.eye(t1) * math.sqrt(P / t1)
        Z[t1:, t1:] = np.eye(t2) * math.sqrt(P / t2)
        return Z

    def random(self, rng: CounterRNG) -> np.ndarray:
        return self.normalize(rng.complex_normal((self.n, self.n)))

    def value(self, Z: np.ndarray, lam: float, grad: np.ndarray | None = None):
        pair, t1 = self.pair, self.t1
        if pair.same:
            fa = _term_value_grad(pair.a, Z, t1, grad, 1.0)
            return fa, fa, fa
        fa = _term_value_grad(pair.a, Z, t1, grad, lam)
        fb = _term_value_grad(pair.b, Z, t1, grad, 1.0 - lam)
        return fa, fb, lam * fa + (1.0 - lam) * fb

    def upper_bound(self, Z: np.ndarray, lam: float, phi: float) -> float:
        K = Z @ Z.conj().T
        R = Z[: self.t1, : self.t1]
        S = R @ R.conj().T
        gK = np.zeros_like(K)
        gS = np.zeros_like(S)
        if self.pair.same:
            _full_gradients(self.pair.a, K, S, 1.0, gK, gS)
        else:
            _full_gradients(self.pair.a, K, S, lam, gK, gS)
            _full_gradients(self.pair.b, K, S, 1.0 - lam, gK, gS)
        inner = float(np.real(np.vdot(gK, K))) + float(np.real(np.vdot(gS, S)))
        return phi + dual_linear_bound(gK, gS, self.fset) - inner


def _ascend(prob: _Problem, Z: np.ndarray, lam: float, cfg: SolverConfig, tol: float, max_iter: int) -> InnerResult:
    Z = prob.normalize(Z.copy())
    grad = np.zeros_like(Z)
    fa, fb, phi = prob.value(Z, lam, grad)
    step = cfg.initial_step
    upper = math.inf
    it = 0
    converged = False
    while it < max_iter:
        if it % cfg.check_every == 0:
            upper = min(upper, prob.upper_bound(Z, lam, phi))
            if upper - phi <= tol:
                converged = True
                break
        D = grad * prob.mask
        for sl in prob.rows:
            zb = Z[sl]
            nz = float(np.real(np.vdot(zb, zb)))
            if nz > 0:
                D[sl] -= (float(np.real(np.vdot(zb, D[sl]))) / nz) * zb
        dn = float(np.linalg.norm(D))
        if dn == 0.0 or not math.isfinite(dn):
            upper = min(upper, prob.upper_bound(Z, lam, phi))
            converged = upper - phi <= tol
            break
        D *= prob.root_p / dn
        improved = False
        while step > 1e-13:
            Zn = prob.normalize(Z + step * D)
            gn = np.zeros_like(Z)
            fa_n, fb_n, phi_n = prob.value(Zn, lam, gn)
            if phi_n > phi:
                Z, grad, fa, fb, phi = Zn, gn, fa_n, fb_n, phi_n
                step = min(2.0 * step, 1.0)
                improved = True
                break
            step *= 0.5
        it += 1
        if not improved:
            upper = min(upper, prob.upper_bound(Z, lam, phi))
            converged = upper - phi <= tol
            break
    else:
        upper = min(upper, prob.upper_bound(Z, lam, phi))
        converged = upper - phi <= tol
    return InnerResult(lam, Z, fa, fb, phi, upper, it, converged)


def _quasi_newton(prob: _Problem, Z: np.ndarray, lam: float, cfg: SolverConfig, tol: float,
                  max_iter: int, chunk: int = 30) -> InnerResult:
    """L-BFGS on W with Z_block = sqrt(P) W_block / ||W_block||.

    The map is scale invariant per block, so the trace equalities hold
    automatically and the search is unconstrained. The run is split into
    chunks with a certificate check in between.
    """
    mask = prob.mask
    idx = np.nonzero(mask)
    m = len(idx[0])
    root_p = prob.root_p

    def unpack(x):
        W = np.zeros(mask.shape, dtype=complex)
        W[idx] = x[:m] + 1j * x[m:]
        return W

    def neg_value(x):
        W = unpack(x)
        Z = W.copy()
        norms = []
        for sl in prob.rows:
            nw = float(np.linalg.norm(W[sl]))
            norms.append(nw)
            Z[sl] *= root_p / nw
        grad = np.zeros_like(Z)
        _, _, phi = prob.value(Z, lam, grad)
        out = np.zeros_like(Z)
        for sl, nw in zip(prob.rows, norms):
            u = Z[sl] / root_p
            g = grad[sl] * mask[sl]
            out[sl] = (g - float(np.real(np.vdot(u, g))) * u) * (root_p / nw)
        gv = out[idx]
        return -phi, -np.concatenate([gv.real, gv.imag])

    Z = prob.normalize(Z.copy())
    x = np.concatenate([Z[idx].real, Z[idx].imag])
    fa, fb, phi = prob.value(Z, lam)
    upper = prob.upper_bound(Z, lam, phi)
    used = 0
    while upper - phi > tol and used < max_iter:
        res = minimize(neg_value, x, jac=True, method="L-BFGS-B",
                       options={"maxiter": min(chunk, max_iter - used), "gtol": 1e-12, "ftol": 1e-15})
        used += max(res.nit, 1)
        Zn = prob.normalize(unpack(res.x))
        fa_n, fb_n, phi_n = prob.value(Zn, lam)
        stalled = phi_n <= phi
        if phi_n >= phi:
            x, Z, fa, fb, phi = res.x, Zn, fa_n, fb_n, phi_n
        upper = min(upper, prob.upper_bound(Z, lam, phi))
        if stalled or res.nit < min(chunk, max_iter - used):
            # line search could not improve further; more chunks would repeat the same point
            if stalled or upper - phi > tol:
                break
    return InnerResult(lam, Z, fa, fb, phi, upper, used, upper - phi <= tol)


def _inner(prob, Z, lam, cfg, tol) -> InnerResult:
    if cfg.inner == "ascent":
        return _ascend(prob, Z, lam, cfg, tol, cfg.max_inner_iterations)
    return _quasi_newton(prob, Z, lam, cfg, tol, cfg.max_inner_iterations)


def _solve_weighted(prob: _Problem, lam: float, cfg: SolverConfig, tol: float,
                    start: np.ndarray | None = None) -> InnerResult:
    Z0 = prob.initial() if start is None else start
    best = _inner(prob, Z0, lam, cfg, tol)
    if best.converged or cfg.restarts <= 0:
        return best
    rng = CounterRNG(cfg.seed, stream=int(lam * 1e6))
    for _ in range(cfg.restarts):
        cand = _inner(prob, prob.random(rng), lam, cfg, tol)
        if cand.upper < best.upper:
            best = InnerResult(best.lam, best.Z, best.fa, best.fb, best.phi, cand.upper,
                               best.iterations, best.converged)
        if cand.phi > best.phi:
            best = InnerResult(cand.lam, cand.Z, cand.fa, cand.fb, cand.phi, min(cand.upper, best.upper),
                               cand.iterations, cand.converged)
        if best.gap <= tol:
            best.converged = True
            break
    return best


def maximize_weighted(pair: TermPair, lam: float, fset: FeasibleSet, cfg: SolverConfig | None = None,
                      start: np.ndarray | None = None) -> tuple[JointCovariance, float, InnerResult]:
    """Maximize ``lam * f_a + (1 - lam) * f_b`` over ``fset``.

    Returns the achieving covariance, the objective value in bits, and the raw
    inner result (which carries a certified upper bound). A result that misses
    the tolerance after all restarts is returned with ``converged=False``.
    """
    cfg = cfg or SolverConfig()
    if not 0.0 <= lam <= 1.0:
        raise ValueError("lam must lie in [0, 1]")
    if fset.P == 0.0:
        zero = JointCovariance.zeros(fset.t1, fset.t2)
        terms = evaluate_pair(pair, fset, zero.full())
        phi = lam * terms.term_a + (1 - lam) * terms.term_b
        return zero, phi, InnerResult(lam, np.zeros((fset.n, fset.n), complex), terms.term_a,
                                      terms.term_b, phi, phi, 0, True)
    prob = _Problem(pair, fset)
    res = _solve_weighted(prob, lam, cfg, cfg.tol_bits / 4, start)
    K = res.Z @ res.Z.conj().T
    return JointCovariance.from_full(K, fset.t1), res.phi, res


# ---------------------------------------------------------------------------
# max-min

@dataclass
class BoundResult:
    kind: str
    value_bits: float
    achieving_K: JointCovariance
    upper_certificate_bits: float
    certificate_gap_bits: float
    sigma2_used: float | None = None
    flagged: bool = False
    terms: B.CutTerms | None = None
    lam: float | None = None
    note: str = ""
    factor: np.ndarray | None = field(default=None, repr=False, compare=False)

    def to_row(self) -> dict:
        return {"bound": self.kind, "value_bits": self.value_bits,
                "sigma2_used": self.sigma2_used, "certificate_gap_bits": self.certificate_gap_bits,
                "flagged": self.flagged}


def _mix_value(prob: _Problem, ZA: np.ndarray, ZB: np.ndarray, theta: float) -> tuple[float, float, np.ndarray]:
    # theta K_A + (1 - theta) K_B in factor form: concatenate scaled factors
    t1 = prob.t1
    Zm = np.hstack([math.sqrt(theta) * ZA, math.sqrt(1.0 - theta) * ZB])
    # R block of the mixture: sender rows of both R column blocks
    Rm = np.hstack([math.sqrt(theta) * ZA[:t1, :t1], math.sqrt(1.0 - theta) * ZB[:t1, :t1]])
    pair = prob.pair
    fa = _mixture_term(pair.a, Zm, Rm)
    fb = fa if pair.same else _mixture_term(pair.b, Zm, Rm)
    return fa, fb, Zm


def _mixture_term(term: Term, Zm: np.ndarray, Rm: np.ndarray) -> float:
    total = term.offset
    for part in term.parts:
        total += kernels.logdet_factor(part.G @ (Rm if part.on_s else Zm))
    return total


def _best_mixture(prob: _Problem, A: InnerResult, Bres: InnerResult):
    """Maximize min(f_a, f_b) along the segment between two covariances (concave in theta)."""
    def neg(theta):
        fa, fb, _ = _mix_value(prob, A.Z, Bres.Z, theta)
        return -min(fa, fb)

    res = minimize_scalar(neg, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-7})
    theta = float(res.x)
    fa, fb, Zm = _mix_value(prob, A.Z, Bres.Z, theta)
    return min(fa, fb), Zm @ Zm.conj().T


def maxmin(pair: TermPair, fset: FeasibleSet, cfg: SolverConfig | None = None, kind: str | None = None,
           warm: np.ndarray | dict | None = None) -> BoundResult:
    """max_K min(f_a, f_b) over ``fset`` by golden-section search on the weight.

    ``value_bits`` is min(f_a, f_b) at the returned covariance (evaluated
    exactly, with the true conditional covariance); ``upper_certificate_bits``
    is the smallest certified upper bound on g(lam) met during the search.

    ``warm`` is a starting factor, or a mapping from weights to factors (the
    entry with the nearest weight seeds each inner solve until the search has
    its own iterates).
    """
    cfg = cfg or SolverConfig()
    kind = kind or pair.label
    if warm is not None and not isinstance(warm, dict):
        warm = {0.5: warm}
    warm = {k: v for k, v in (warm or {}).items() if v is not None}
    if fset.P == 0.0:
        zero = JointCovariance.zeros(fset.t1, fset.t2)
        terms = evaluate_pair(pair, fset, zero.full())
        v = terms.value
        return BoundResult(kind, v, zero, v, 0.0, terms=terms)

    prob = _Problem(pair, fset)
    inner_tol = cfg.tol_bits / 4
    evaluated: dict[float, InnerResult] = {}
    upper = math.inf
    best_val = -math.inf
    best_K = None
    best_lam = None
    side_a: InnerResult | None = None  # f_a >= f_b: optimum lies at smaller lam
    side_b: InnerResult | None = None
    flagged_inner = False
    sides_changed = False

    def run(lam: float) -> InnerResult:
        nonlocal upper, best_val, best_K, best_lam, side_a, side_b, flagged_inner, sides_changed
        if lam in evaluated:
            return evaluated[lam]
        pool = evaluated if evaluated else warm
        start = None
        if pool:
            near = min(pool, key=lambda x: abs(x - lam))
            start = evaluated[near].Z if evaluated else pool[near]
        res = _solve_weighted(prob, lam, cfg, inner_tol, start)
        evaluated[lam] = res
        flagged_inner |= not res.converged
        upper = min(upper, res.upper)
        v = min(res.fa, res.fb)
        if v > best_val:
            best_val, best_K, best_lam = v, res.Z @ res.Z.conj().T, lam
        if res.fa >= res.fb:
            if side_a is None or res.fb > side_a.fb:
                side_a, sides_changed = res, True
        else:
            if side_b is None or res.fa > side_b.fa:
                side_b, sides_changed = res, True
        return res

    def slope(res: InnerResult) -> float:
        return res.fa - res.fb

    def mixed():
        nonlocal best_val, best_K, sides_changed
        if done() or not sides_changed:
            return
        sides_changed = False
        if side_a is not None and side_b is not None:
            v, K = _best_mixture(prob, side_a, side_b)
            if v > best_val:
                best_val, best_K = v, K

    def done() -> bool:
        return upper - best_val <= cfg.tol_bits

    if pair.same:
        run(1.0)
    else:
        r1 = run(1.0)
        if slope(r1) > 0:
            run(0.0)
            mixed()
            lo, hi = 0.0, 1.0
            x1 = hi - GOLDEN * (hi - lo)
            x2 = lo + GOLDEN * (hi - lo)
            while not done() and hi - lo > cfg.lambda_tol:
                a1, a2 = run(x1), run(x2)
                mixed()
                if done():
                    break
                if slope(a1) >= 0:
                    keep_left = True
                elif slope(a2) <= 0:
                    keep_left = False
                else:
                    keep_left = a1.phi <= a2.phi
                if keep_left:
                    hi, x2 = x2, x1
                    x1 = hi - GOLDEN * (hi - lo)
                else:
                    lo, x1 = x1, x2
                    x2 = lo + GOLDEN * (hi - lo)

    gap = upper - best_val
    flagged = gap > 10 * cfg.tol_bits
    K = JointCovariance.from_full(best_K, fset.t1)
    terms = evaluate_pair(pair, fset, best_K)
    value = terms.value
    upper = max(upper, value)
    if flagged:
        log.warning("%s: certificate gap %.3g bits exceeds 10 x tol", kind, gap)
    note = "inner solver missed tolerance" if flagged_inner else ""
    warm_next = evaluated[best_lam].Z if best_lam in evaluated else None
    return BoundResult(kind, value, K, upper, upper - value, flagged=flagged, terms=terms,
                       lam=best_lam, note=note, factor=warm_next)


# ---------------------------------------------------------------------------
# bound dispatch

FULL_DUPLEX_KINDS = ("CS", "DF", "DT", "PDF", "NPDF", "CF")
SFD_KINDS = ("SFD_CAP", "SFD_CF")
RFD_KINDS = ("RFD_CS", "RFD_PDF", "RFD_CF")


def _pick_sigma(scored: list[tuple[float, float, BoundResult, JointCovariance, B.CutTerms]]):
    """Best (value, sigma2, ...) entry; ties within 1e-9 go to the smallest sigma2."""
    top = max(v for v, *_ in scored)
    return min((e for e in scored if e[0] >= top - 1e-9), key=lambda e: e[1])


class BoundSession:
    """All bounds of one (channel, P, cfg) triple, sharing sub-solves.

    PDF and NPDF reuse the DF, DT and relaxed-surrogate maximizers as
    candidate covariances, so asking for several kinds at once costs far less
    than separate ``compute_bound`` calls.
    """

    def __init__(self, ch, P: float, cfg: SolverConfig | None = None):
        self.ch = ch
        self.P = float(P)
        if not self.P >= 0.0 or math.isinf(self.P):
            raise ValueError(f"power must be a finite nonnegative number, got {P!r}")
        self.cfg = cfg or SolverConfig()
        self._cache: dict = {}

    # -- helpers ----------------------------------------------------------
    def _full(self) -> ChannelMatrices:
        if not isinstance(self.ch, ChannelMatrices):
            raise TypeError("this bound needs a full-duplex ChannelMatrices channel")
        return self.ch

    def _hd(self, mode: str) -> HalfDuplexChannel:
        if not isinstance(self.ch, HalfDuplexChannel) or self.ch.mode != mode:
            raise TypeError(f"this bound needs an {mode} HalfDuplexChannel")
        return self.ch

    def _solve(self, key, pair_fn, fset_fn, warm=None) -> BoundResult:
        if key not in self._cache:
            self._cache[key] = maxmin(pair_fn(), fset_fn(), self.cfg, kind=str(key), warm=warm)
        return self._cache[key]

    def _zero(self, kind: str, t1: int, t2: int) -> BoundResult:
        z = JointCovariance.zeros(t1, t2)
        return BoundResult(kind, 0.0, z, 0.0, 0.0, sigma2_used=None, terms=B.CutTerms(0.0, 0.0))

    def _finish(self, kind: str, value: float, K: JointCovariance, parts: list[BoundResult],
                winner: BoundResult, sigma2=None, terms=None) -> BoundResult:
        value = max(0.0, value)
        upper = max(value, value + winner.certificate_gap_bits)
        flagged = any(p.flagged for p in parts)
        return BoundResult(kind, value, K, upper, upper - value, sigma2_used=sigma2,
                           flagged=flagged, terms=terms)

    # -- full duplex ------------------------------------------------------
    def _coh(self):
        c = self._full().config
        return FeasibleSet.coherent(c.t1, c.t2, self.P)

    def _ind(self):
        c = self._full().config
        return FeasibleSet.independent(c.t1, c.t2, self.P)

    def cs(self):
        ch = self._full()
        return self._solve("CS", lambda: cutset_pair(ch), self._coh)

    def df(self):
        ch = self._full()
        return self._solve("DF", lambda: df_pair(ch), self._coh)

    def dt(self):
        ch = self._full()
        return self._solve("DT", lambda: dt_pair(ch), self._ind)

    def pdf_relaxed(self):
        ch = self._full()
        return self._solve("PDF-relaxed", lambda: pdf_relaxed_pair(ch), self._coh)

    def npdf_relaxed(self):
        ch = self._full()
        return self._solve("NPDF-relaxed", lambda: pdf_relaxed_pair(ch), self._ind)

    def ndf(self):
        ch = self._full()
        return self._solve("NDF", lambda: df_pair(ch), self._ind)

    def _rescore(self, kind: str, candidates: list[BoundResult], exact) -> BoundResult:
        scored = []
        for cand in candidates:
            for s in self.cfg.pdf_grid():
                terms = exact(cand.achieving_K, s)
                scored.append((terms.value, s, cand, cand.achieving_K, terms))
        value, s, winner, K, terms = _pick_sigma(scored)
        return self._finish(kind, value, K, candidates, winner, s, terms)

    def bound(self, kind: str) -> BoundResult:
        kind = kind.upper()
        if kind in FULL_DUPLEX_KINDS:
            c = self._full().config
            if self.P == 0.0:
                return self._zero(kind, c.t1, c.t2)
            return getattr(self, "_" + kind.lower())()
        if kind in SFD_KINDS:
            hd = self._hd("SFD")
        elif kind in RFD_KINDS:
            hd = self._hd("RFD")
        else:
            raise ValueError(f"unknown bound kind {kind!r}; expected one of {', '.join(BOUND_KINDS)}")
        if self.P == 0.0:
            return self._zero(kind, hd.t1, hd.t2)
        return getattr(self, "_" + kind.lower())()

    def _cs(self):
        r = self.cs()
        return self._finish("CS", r.value_bits, r.achieving_K, [r], r, terms=r.terms)

    def _df(self):
        r = self.df()
        return self._finish("DF", r.value_bits, r.achieving_K, [r], r, terms=r.terms)

    def _dt(self):
        r = self.dt()
        return self._finish("DT", r.value_bits, r.achieving_K, [r], r, terms=r.terms)

    def _npdf_candidates(self):
        return [self.npdf_relaxed(), self.ndf(), self.dt()]

    def _pdf(self):
        ch = self._full()
        cands = [self.pdf_relaxed(), self.df(), self.cs()] + self._npdf_candidates()
        return self._rescore("PDF", cands, lambda K, s: B.pdf_terms(ch, K, s))

    def _npdf(self):
        ch = self._full()
        return self._rescore("NPDF", self._npdf_candidates(),
                             lambda K, s: B.npdf_terms(ch, K.K1, K.K2, s))

    def _cf(self):
        ch = self._full()

        def endpoint():
            r = self.dt()
            K = r.achieving_K
            terms = B.cf_terms(ch, K.K1, K.K2, INFINITE)
            return BoundResult("CF", terms.value, K, max(terms.value, r.upper_certificate_bits),
                               max(0.0, r.upper_certificate_bits - terms.value), flagged=r.flagged,
                               terms=terms)

        return self._grid_maxmin("CF", lambda s: cf_pair(ch, s), self._ind, infinite=endpoint)

    # -- half duplex ------------------------------------------------------
    def _sfd_set(self, coherent: bool):
        hd = self._hd("SFD")
        a, b = hd.split
        return FeasibleSet.sfd(a, b, hd.t2, self.P, coherent=coherent)

    def _sfd_cap(self):
        hd = self._hd("SFD")
        r = self._solve("SFD_CAP", lambda: sfd_pair(hd), lambda: self._sfd_set(True))
        return self._finish("SFD_CAP", r.value_bits, r.achieving_K, [r], r, terms=r.terms)

    def _grid_maxmin(self, kind: str, pair_fn, fset_fn, infinite=None) -> BoundResult:
        """Best compression noise on the grid, skipping points that provably cannot win.

        For each sigma2 the max-min value is at most
        min(max f_a, max f_b) <= min(MAC upper bound - penalty, sum of per-part
        water-filling capacities of f_b). Points whose bound falls below the
        incumbent are skipped; their bounds still enter the certificate.
        """
        fset = fset_fn()
        mac = _solve_weighted(_Problem(pair_fn(INFINITE), fset), 1.0, self.cfg, self.cfg.tol_bits / 4)
        grid = self.cfg.cf_grid()

        def cheap_upper(s: float) -> float:
            pair = pair_fn(s)
            fb_cap = pair.b.offset + sum(kernels.capacity_waterfill(part.G, self.P) for part in pair.b.parts)
            return min(mac.upper + pair.a.offset, fb_cap)

        ubs = {s: cheap_upper(s) for s in grid}
        order = sorted(grid, key=lambda s: (-ubs[s], s))
        scored, parts, skipped = [], [], []
        warm: dict = {1.0: mac.Z}
        best = -math.inf
        for s in order:
            if ubs[s] < best - 1e-9:
                skipped.append(ubs[s])
                continue
            if math.isinf(s) and infinite is not None:
                r = infinite()
            else:
                r = self._solve((kind, s), lambda: pair_fn(s), lambda: fset, warm=warm)
                if r.factor is not None and r.lam is not None:
                    warm = {1.0: mac.Z, r.lam: r.factor}
            parts.append(r)
            scored.append((r.value_bits, s, r, r.achieving_K, r.terms))
            best = max(best, r.value_bits)
        value, s, winner, K, terms = _pick_sigma(scored)
        res = self._finish(kind, value, K, parts, winner, s, terms)
        # the grid-restricted optimum is certified by the largest per-point upper bound
        upper = max([res.upper_certificate_bits] + [p.upper_certificate_bits for p in parts] + skipped)
        res.upper_certificate_bits = max(upper, res.value_bits)
        res.certificate_gap_bits = res.upper_certificate_bits - res.value_bits
        res.flagged = res.flagged or (not mac.converged)
        return res

    def _sfd_cf(self):
        hd = self._hd("SFD")
        return self._grid_maxmin("SFD_CF", lambda s: sfd_cf_pair(hd, s), lambda: self._sfd_set(False))

    def _rfd_set(self):
        hd = self._hd("RFD")
        return FeasibleSet.independent(hd.t1, hd.t2, self.P)

    def _rfd_cs(self):
        hd = self._hd("RFD")
        r = self._solve("RFD_CS", lambda: rfd_cutset_pair(hd), self._rfd_set)
        return self._finish("RFD_CS", r.value_bits, r.achieving_K, [r], r, terms=r.terms)

    def embedded_session(self) -> BoundSession:
        key = "embedded"
        if key not in self._cache:
            self._cache[key] = BoundSession(self.ch.embedded(), self.P, self.cfg)
        return self._cache[key]

    def sfd_pdf(self) -> BoundResult:
        """Exact partial decode-forward rate of an SFD channel.

        The generic PDF search on the embedded channel, extended by the
        SFD-structured capacity maximizer as one more candidate covariance.
        """
        hd = self._hd("SFD")
        if "SFD_PDF" in self._cache:
            return self._cache["SFD_PDF"]
        emb = self.embedded_session()
        if self.P == 0.0:
            res = self._zero("SFD_PDF", hd.t1, hd.t2)
        else:
            generic = emb.bound("PDF")
            cap = self._solve("SFD_CAP", lambda: sfd_pair(hd), lambda: self._sfd_set(True))
            ch = emb.ch
            scored = [(generic.value_bits, generic.sigma2_used, generic, generic.achieving_K, generic.terms)]
            for s in self.cfg.pdf_grid():
                terms = B.pdf_terms(ch, cap.achieving_K, s)
                scored.append((terms.value, s, cap, cap.achieving_K, terms))
            value, s, winner, K, terms = _pick_sigma(scored)
            res = self._finish("SFD_PDF", value, K, [generic, cap], winner, s, terms)
        self._cache["SFD_PDF"] = res
        return res

    def _rfd_pdf(self):
        self._hd("RFD")
        r = self.embedded_session().bound("PDF")
        r.kind = "RFD_PDF"
        return r

    def _rfd_cf(self):
        hd = self._hd("RFD")
        return self._grid_maxmin("RFD_CF", lambda s: rfd_cf_pair(hd, s), self._rfd_set)


def compute_bound(kind: str, ch, P: float, cfg: SolverConfig | None = None) -> BoundResult:
    """Optimized value of one bound on ``ch`` at power ``P`` (bits per channel use).

    Half-duplex kinds need a ``HalfDuplexChannel`` of the matching mode; the
    achieving covariance is then expressed in embedded full-duplex coordinates.
    """
    return BoundSession(ch, P, cfg).bound(kind)


def compute_bounds(kinds: Sequence[str], ch, P: float, cfg: SolverConfig | None = None) -> dict[str, BoundResult]:
    """Several bounds on one channel, sharing intermediate solves."""
    session = BoundSession(ch, P, cfg)
    return {k.upper(): session.bound(k) for k in kinds}
