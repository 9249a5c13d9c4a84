import itertools
import math

import pytest

from mimorelay import AntennaConfig, SolverConfig
from mimorelay.gaps import (GapBoundKind, cf_gap_kolte, cf_gap_sigma, golden_section_min, montecarlo_gaps,
                            point_metrics, separation_channel, separation_curve, snr_to_power, theoretical_gap)
from mimorelay.optimizer import compute_bounds

C2222 = AntennaConfig(2, 2, 2, 2)


def test_theoretical_gap_examples():
    assert theoretical_gap(GapBoundKind.PDF_ADDITIVE, C2222) == 2.0
    assert theoretical_gap("CF_ADDITIVE", C2222) == 4.0
    assert theoretical_gap(GapBoundKind.NPDF_ADDITIVE, AntennaConfig(1, 2, 2, 3)) == 3.0
    assert theoretical_gap(GapBoundKind.CF_KOLTE, C2222, sigma2=1.0) == pytest.approx(2 * math.log2(3) + 2,
                                                                                      abs=1e-12)
    for kind in ("MULTIPLICATIVE_PDF", "MULTIPLICATIVE_NPDF", "MULTIPLICATIVE_DF_CF"):
        assert theoretical_gap(kind, C2222) == 2.0


def test_half_duplex_gap_kinds():
    c = AntennaConfig(3, 1, 2, 2)
    assert theoretical_gap("SFD_NPDF", c, split=(1, 2)) == float(min(1 + 1, 2))
    assert theoretical_gap("SFD_CF", c, split=(2, 1)) == float(min(2 + 1, 2) + 2)
    assert theoretical_gap("RFD_PDF", c) == float(min(3, 2))
    assert theoretical_gap("RFD_CF", c, split=(1, 1)) == float(max(min(3, 2 + 1), 2))
    with pytest.raises(ValueError):
        theoretical_gap("SFD_CF", c)
    with pytest.raises(ValueError):
        theoretical_gap("SFD_CF", c, split=(1, 1))
    with pytest.raises(ValueError):
        theoretical_gap("RFD_CF", c, split=(2, 1))


def test_theoretical_gap_errors():
    with pytest.raises(ValueError):
        theoretical_gap("NOT_A_KIND", C2222)
    with pytest.raises(ValueError):
        theoretical_gap("CF_KOLTE", C2222, sigma2=0.0)
    with pytest.raises(ValueError):
        theoretical_gap("CF_KOLTE", C2222, sigma2=math.inf)


def test_cf_sigma_minimization_matches_dense_scan():
    for config in (C2222, AntennaConfig(1, 3, 2, 4), AntennaConfig(4, 1, 1, 2)):
        for kind, expr in (("CF_ADDITIVE_SIGMA", cf_gap_sigma), ("CF_KOLTE", cf_gap_kolte)):
            scan = min(expr(config, 2.0 ** (k / 1000)) for k in range(-20_000, 20_001))
            got = theoretical_gap(kind, config)
            # golden section stops at width 1e-6 in log2(sigma2); the kink costs at most slope * width
            assert got <= scan + 1e-6
            assert got >= scan - 1e-4


def test_cf_sigma_minimum_not_above_fixed_choice():
    # the sigma2-optimized CF gap never exceeds its value at sigma2 = 1
    for dims in itertools.product(range(1, 5), repeat=4):
        c = AntennaConfig(*dims)
        assert theoretical_gap("CF_ADDITIVE_SIGMA", c) <= cf_gap_sigma(c, 1.0) + 1e-6


def test_golden_section_boundary_minimum():
    x, fx = golden_section_min(lambda u: u, 0.0, 1.0, 1e-8)
    assert x == 0.0 and fx == 0.0
    x, fx = golden_section_min(lambda u: (u - 0.3) ** 2, 0.0, 1.0, 1e-8)
    assert abs(x - 0.3) <= 1e-6


def test_gap_formulas_are_pure():
    for kind in GapBoundKind:
        split = (1, 1) if kind.name.startswith(("SFD", "RFD_CF")) else None
        assert theoretical_gap(kind, C2222, split=split) == theoretical_gap(kind, C2222, split=split)


def test_montecarlo_empty_and_negative():
    rep = montecarlo_gaps(C2222, 0, [0.0, 10.0], seed=1)
    assert rep.rows == [] and rep.aggregates == [] and rep.flagged_points == 0
    with pytest.raises(ValueError):
        montecarlo_gaps(C2222, -1, [0.0], seed=1)


def test_montecarlo_deterministic_and_worker_independent():
    cfg = SolverConfig()
    a = montecarlo_gaps(AntennaConfig(1, 1, 1, 1), 3, [0.0, 10.0], seed=5, cfg=cfg)
    b = montecarlo_gaps(AntennaConfig(1, 1, 1, 1), 3, [0.0, 10.0], seed=5, cfg=cfg)
    c = montecarlo_gaps(AntennaConfig(1, 1, 1, 1), 3, [0.0, 10.0], seed=5, cfg=cfg, workers=2)
    assert a.rows == b.rows == c.rows
    assert a.aggregates == b.aggregates == c.aggregates
    assert len(a.rows) == 3 * 2 * 6
    assert [(r.channel_id, r.snr_db) for r in a.rows] == sorted((r.channel_id, r.snr_db) for r in a.rows)


def test_montecarlo_gap_invariants_small_run():
    tol = SolverConfig().tol_bits
    rep = montecarlo_gaps(C2222, 4, [0.0, 20.0], seed=11)
    for m in ("CS-PDF", "CS-NPDF", "CS-CF"):
        assert min(rep.metric_values(m)) >= -3 * tol
    for m in ("CS/PDF", "CS/NPDF", "CS/max(DF,CF)"):
        assert min(rep.metric_values(m)) >= 1 - 1e-6
    agg = rep.aggregate(20.0, "CS-PDF")
    assert agg.count == 4 and agg.max >= agg.avg


def test_point_metrics_low_rate_excludes_ratios():
    v = {"CS": 1e-8, "DF": 0.0, "DT": 1e-8, "PDF": 1e-8, "NPDF": 1e-8, "CF": 0.0}
    m = point_metrics(v)
    assert "CS/PDF" not in m and m["CS-PDF"] == 0.0
    v = {"CS": 2.0, "DF": 1.0, "DT": 0.5, "PDF": 1.5, "NPDF": 1.0, "CF": 1.25}
    m = point_metrics(v)
    assert m["CS/PDF"] == pytest.approx(4 / 3) and m["CS/max(DF,CF)"] == pytest.approx(1.6)


def test_snr_convention():
    assert snr_to_power(0.0) == 1.0
    assert snr_to_power(30.0) == pytest.approx(1000.0)


def test_separation_examples():
    row = separation_curve([1.0], 1.0)[0]
    assert row.pdf_lower_bits == pytest.approx(0.0, abs=1e-12)
    assert row.dfdt_upper_bits == pytest.approx(2.0, abs=1e-12)
    assert row.separation_bits == pytest.approx(-2.0, abs=1e-12)
    row = separation_curve([10.0], 10.0)[0]
    assert row.pdf_lower_bits == pytest.approx(2 * math.log2(506) - 2, abs=1e-12)
    assert row.dfdt_upper_bits == pytest.approx(math.log2(11 * 1001), abs=1e-12)
    assert row.separation_bits == pytest.approx(2.540, abs=1e-3)
    with pytest.raises(ValueError):
        separation_curve([0.0], 1.0)


def test_separation_increasing_and_unbounded():
    gs = [10.0 * 1.5 ** k for k in range(30)]
    seps = [r.separation_bits for r in separation_curve(gs, 10.0)]
    assert all(b > a for a, b in zip(seps, seps[1:]))
    assert seps[-1] > 20


def test_separation_closed_forms_bound_the_solver():
    g, P = 3.0, 10.0
    r = compute_bounds(["PDF", "DF", "DT"], separation_channel(g), P)
    row = separation_curve([g], P)[0]
    assert r["PDF"].value_bits >= row.pdf_lower_bits - 1e-3
    assert max(r["DF"].value_bits, r["DT"].value_bits) <= row.dfdt_upper_bits + 1e-3
