import sys
import time
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from mimorelay import AntennaConfig  # noqa: E402
from mimorelay.gaps import montecarlo_gaps  # noqa: E402
from mimorelay.optimizer import SolverConfig  # noqa: E402

MC_CONFIG = AntennaConfig(2, 2, 2, 2)
MC_CHANNELS = 200
MC_SNR_DB = (-10.0, 0.0, 10.0, 20.0, 30.0)
MC_SEED = 2026

ACCEPTANCE_LINES: dict[int, str] = {}


@pytest.fixture(scope="session")
def mc_run():
    """The desk-scale Monte Carlo gap experiment, computed once per session."""
    cfg = SolverConfig()
    start = time.perf_counter()
    report = montecarlo_gaps(MC_CONFIG, MC_CHANNELS, MC_SNR_DB, MC_SEED, cfg)
    return report, time.perf_counter() - start, cfg


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion and assert it."""

    def record(number: int, ok: bool, detail: str):
        ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}"
        print(ACCEPTANCE_LINES[number])
        assert ok, detail

    return record


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for n in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[n])
