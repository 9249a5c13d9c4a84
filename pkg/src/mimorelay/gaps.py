"""Channel-independent gap formulas, the Monte Carlo gap experiment, and the
partial decode-forward separation example."""

from __future__ import annotations

import enum
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .channel import AntennaConfig, ChannelMatrices, random_channel
from .optimizer import SolverConfig, compute_bounds

MC_BOUNDS = ("CS", "DF", "DT", "PDF", "NPDF", "CF")
ADDITIVE_METRICS = ("CS-PDF", "CS-NPDF", "CS-CF")
RATIO_METRICS = ("CS/PDF", "CS/NPDF", "CS/max(DF,CF)")
LOW_RATE_BITS = 1e-6

SIGMA2_BRACKET = (2.0 ** -20, 2.0 ** 20)
SIGMA2_TOL = 1e-6


class GapBoundKind(enum.Enum):
    PDF_ADDITIVE = "PDF_ADDITIVE"
    NPDF_ADDITIVE = "NPDF_ADDITIVE"
    CF_ADDITIVE = "CF_ADDITIVE"
    CF_ADDITIVE_SIGMA = "CF_ADDITIVE_SIGMA"
    CF_KOLTE = "CF_KOLTE"
    MULTIPLICATIVE_PDF = "MULTIPLICATIVE_PDF"
    MULTIPLICATIVE_NPDF = "MULTIPLICATIVE_NPDF"
    MULTIPLICATIVE_DF_CF = "MULTIPLICATIVE_DF_CF"
    SFD_NPDF = "SFD_NPDF"
    SFD_CF = "SFD_CF"
    RFD_PDF = "RFD_PDF"
    RFD_CF = "RFD_CF"


def golden_section_min(f, a: float, b: float, tol: float, max_iter: int = 500) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on [a, b]; returns (x, f(x))."""
    inv = (math.sqrt(5.0) - 1.0) / 2.0
    x1 = b - inv * (b - a)
    x2 = a + inv * (b - a)
    f1, f2 = f(x1), f(x2)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - inv * (b - a)
            f1 = f(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + inv * (b - a)
            f2 = f(x2)
    # the endpoints were never evaluated; they can win when the minimum sits on the boundary
    cands = [(f1, x1), (f2, x2), (f(a), a), (f(b), b)]
    fx, x = min(cands)
    return x, fx


def _cf_max_of_two(first_const: float, c: AntennaConfig, sigma2: float) -> float:
    left = first_const + c.r2 * math.log2(1.0 + 1.0 / sigma2)
    right = min(c.t1, c.r2 + c.r3) * math.log2(1.0 + sigma2)
    return max(left, right)


def cf_gap_sigma(config: AntennaConfig, sigma2: float) -> float:
    """CF additive gap expression at a fixed compression noise."""
    return _cf_max_of_two(min(config.t1 + config.t2, config.r3), config, sigma2)


def cf_gap_kolte(config: AntennaConfig, sigma2: float) -> float:
    """Earlier, looser CF gap expression at a fixed compression noise."""
    m = min(config.t1 + config.t2, config.r3)
    first = m * math.log2(1.0 + (config.t1 + config.t2) / m)
    return _cf_max_of_two(first, config, sigma2)


def _min_over_sigma2(expr, config: AntennaConfig) -> float:
    lo, hi = (math.log2(s) for s in SIGMA2_BRACKET)
    # tolerance is on sigma2 near the optimum, log-scale tolerance is comparable around sigma2 ~ 1
    _, val = golden_section_min(lambda u: expr(config, 2.0 ** u), lo, hi, SIGMA2_TOL)
    return val


def _check_split(kind: GapBoundKind, config: AntennaConfig, split) -> tuple[int, int]:
    if split is None:
        raise ValueError(f"{kind.value} needs a half-duplex split")
    a, b = (int(x) for x in split)
    if a < 1 or b < 1:
        raise ValueError(f"split parts must be positive, got {split}")
    total = config.t1 if kind is GapBoundKind.SFD_NPDF or kind is GapBoundKind.SFD_CF else config.r3
    if a + b != total:
        which = "t1" if total == config.t1 else "r3"
        raise ValueError(f"split {a}+{b} does not add up to {which} = {total}")
    return a, b


def theoretical_gap(kind: GapBoundKind | str, config: AntennaConfig, sigma2: float | None = None,
                    split: tuple[int, int] | None = None) -> float:
    """Closed-form gap ceiling (bits, or a ratio for the multiplicative kinds).

    ``split`` is (t1', t1'') for the SFD kinds and (r3', r3'') for RFD_CF. The
    two CF expressions with a free compression noise are minimized over
    sigma2 when none is supplied.
    """
    kind = GapBoundKind(kind)
    t1, t2, r2, r3 = config.as_tuple()
    if kind is GapBoundKind.PDF_ADDITIVE or kind is GapBoundKind.RFD_PDF:
        return float(min(t1, r2))
    if kind is GapBoundKind.NPDF_ADDITIVE:
        return float(max(min(t1, r2), min(t1 + t2, r3)))
    if kind is GapBoundKind.CF_ADDITIVE:
        return float(min(t1 + t2, r3) + r2)
    if kind in (GapBoundKind.CF_ADDITIVE_SIGMA, GapBoundKind.CF_KOLTE):
        expr = cf_gap_sigma if kind is GapBoundKind.CF_ADDITIVE_SIGMA else cf_gap_kolte
        if sigma2 is None:
            return _min_over_sigma2(expr, config)
        if not sigma2 > 0 or math.isinf(sigma2):
            raise ValueError("sigma2 must be a positive finite number")
        return expr(config, float(sigma2))
    if kind in (GapBoundKind.MULTIPLICATIVE_PDF, GapBoundKind.MULTIPLICATIVE_NPDF,
                GapBoundKind.MULTIPLICATIVE_DF_CF):
        return 2.0
    if kind is GapBoundKind.SFD_NPDF:
        t1p, _ = _check_split(kind, config, split)
        return float(min(t1p + t2, r3))
    if kind is GapBoundKind.SFD_CF:
        t1p, _ = _check_split(kind, config, split)
        return float(min(t1p + t2, r3) + r2)
    if kind is GapBoundKind.RFD_CF:
        r3p, _ = _check_split(kind, config, split)
        return float(max(min(t1, r2 + r3p), r2))
    raise AssertionError(kind)  # closed enumeration


# ---------------------------------------------------------------------------
# Monte Carlo

@dataclass(frozen=True)
class GapRow:
    channel_id: int
    snr_db: float
    bound: str
    value_bits: float
    sigma2_used: float | None
    certificate_gap_bits: float
    flagged: bool


@dataclass(frozen=True)
class AggregateRow:
    snr_db: float
    metric: str
    max: float
    avg: float
    count: int


@dataclass
class GapReport:
    config: AntennaConfig
    n_channels: int
    snr_db_grid: tuple[float, ...]
    seed: int
    rows: list[GapRow] = field(default_factory=list)
    aggregates: list[AggregateRow] = field(default_factory=list)
    flagged_points: int = 0
    low_rate_points: int = 0

    def values(self) -> dict[tuple[int, float], dict[str, float]]:
        """{(channel_id, snr_db): {bound: value_bits}}."""
        out: dict[tuple[int, float], dict[str, float]] = {}
        for r in self.rows:
            out.setdefault((r.channel_id, r.snr_db), {})[r.bound] = r.value_bits
        return out

    def flagged_keys(self) -> set[tuple[int, float]]:
        return {(r.channel_id, r.snr_db) for r in self.rows if r.flagged}

    def metric_values(self, metric: str, include_flagged: bool = False) -> list[float]:
        """Per-point values of one aggregate metric, in row order."""
        flagged = self.flagged_keys()
        out = []
        for key, v in self.values().items():
            if not include_flagged and key in flagged:
                continue
            m = point_metrics(v)
            if metric in m:
                out.append(m[metric])
        return out

    def aggregate(self, snr_db: float, metric: str) -> AggregateRow | None:
        for a in self.aggregates:
            if a.snr_db == snr_db and a.metric == metric:
                return a
        return None


def point_metrics(v: dict[str, float]) -> dict[str, float]:
    """Additive gaps always; ratios only when the cutset value exceeds the low-rate floor."""
    cs = v["CS"]
    m = {"CS-PDF": cs - v["PDF"], "CS-NPDF": cs - v["NPDF"], "CS-CF": cs - v["CF"]}
    if cs > LOW_RATE_BITS:
        for name, den in (("CS/PDF", v["PDF"]), ("CS/NPDF", v["NPDF"]),
                          ("CS/max(DF,CF)", max(v["DF"], v["CF"]))):
            m[name] = cs / den if den > 0 else math.inf
    return m


def snr_to_power(snr_db: float) -> float:
    """Unit noise, so the per-node power is the SNR on a linear scale."""
    return 10.0 ** (snr_db / 10.0)


def _channel_rows(args) -> list[GapRow]:
    config, seed, channel_id, snr_grid, cfg = args
    ch = random_channel(config, seed, stream=channel_id)
    rows = []
    for snr in snr_grid:
        res = compute_bounds(MC_BOUNDS, ch, snr_to_power(snr), cfg)
        for kind in MC_BOUNDS:
            r = res[kind]
            rows.append(GapRow(channel_id, float(snr), kind, float(r.value_bits), r.sigma2_used,
                               float(r.certificate_gap_bits), bool(r.flagged)))
    return rows


def montecarlo_gaps(config: AntennaConfig, n_channels: int, snr_db_grid: Sequence[float], seed: int,
                    cfg: SolverConfig | None = None, workers: int = 1) -> GapReport:
    """CS, DF, DT, PDF, NPDF and CF on ``n_channels`` random channels at each SNR.

    Channel ``i`` is ``random_channel(config, seed, stream=i)``, so the report
    does not depend on ``workers``. Points with any flagged bound are kept in
    ``rows`` but left out of the aggregates and counted in ``flagged_points``.
    """
    if n_channels < 0:
        raise ValueError("n_channels must be nonnegative")
    cfg = cfg or SolverConfig()
    grid = tuple(float(s) for s in snr_db_grid)
    report = GapReport(config, n_channels, grid, seed)
    tasks = [(config, seed, i, grid, cfg) for i in range(n_channels)]
    if workers > 1 and n_channels > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_channel_rows, tasks))
    else:
        chunks = [_channel_rows(t) for t in tasks]
    rows = [r for chunk in chunks for r in chunk]
    rows.sort(key=lambda r: (r.channel_id, r.snr_db, MC_BOUNDS.index(r.bound)))
    report.rows = rows
    _aggregate(report)
    return report


def _aggregate(report: GapReport):
    flagged = report.flagged_keys()
    report.flagged_points = len(flagged)
    values = report.values()
    low = 0
    per: dict[tuple[float, str], list[float]] = {}
    for (cid, snr), v in values.items():
        if (cid, snr) in flagged:
            continue
        m = point_metrics(v)
        if "CS/PDF" not in m:
            low += 1
        for name, x in m.items():
            per.setdefault((snr, name), []).append(x)
    report.low_rate_points = low
    aggs = []
    for snr in report.snr_db_grid:
        for name in ADDITIVE_METRICS + RATIO_METRICS:
            xs = per.get((snr, name))
            if xs:
                aggs.append(AggregateRow(snr, name, float(max(xs)), float(np.mean(xs)), len(xs)))
    report.aggregates = aggs


# ---------------------------------------------------------------------------
# separation example

@dataclass(frozen=True)
class SeparationRow:
    g: float
    pdf_lower_bits: float
    dfdt_upper_bits: float
    separation_bits: float


def separation_channel(g: float) -> ChannelMatrices:
    """Parallel channel G31 = diag(g, 1), G21 = diag(1, g), G32 = diag(g, g)."""
    return ChannelMatrices.from_arrays(np.diag([1.0, g]), np.diag([g, 1.0]), np.diag([g, g]))


def separation_row(g: float, P: float) -> SeparationRow:
    if not g > 0 or not P > 0:
        raise ValueError("g and P must be positive")
    g2 = g * g
    split = 1.0 + (1.0 + g2) * P / 2.0
    pdf_lower = min(math.log2((1.0 + g2 * P) * split), 2.0 * math.log2(split) - 2.0)
    dfdt_upper = math.log2((1.0 + P) * (1.0 + g2 * P))
    return SeparationRow(float(g), pdf_lower, dfdt_upper, pdf_lower - dfdt_upper)


def separation_curve(g_values: Iterable[float], P: float) -> list[SeparationRow]:
    """Closed-form PDF lower bound vs the max(DF, DT) ceiling on the parallel channel."""
    return [separation_row(float(g), float(P)) for g in g_values]
