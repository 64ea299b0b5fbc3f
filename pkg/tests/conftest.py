import csv
from contextlib import contextmanager
from pathlib import Path

import numpy as np
import pytest

from solarcast.data import SynthConfig, generate_synthetic


@pytest.fixture(scope="session")
def small_synth():
    return generate_synthetic(SynthConfig(n_days=20, step_minutes=60, seed=7))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


REFERENCE_TABLES = Path(__file__).parent / "fixtures" / "reference_tables.csv"


@pytest.fixture(scope="session")
def reference_rows():
    """Published (model, id, actual, predicted, printed error) rows, values kept as text."""
    with open(REFERENCE_TABLES, newline="") as fh:
        return list(csv.DictReader(fh))


# label -> (passed, detail); filled by the ``criterion`` fixture, printed at session end
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion():
    """Context manager that records one acceptance criterion's outcome.

    The yielded dict collects measured values for the summary line.
    """

    @contextmanager
    def record(label):
        info: dict = {}
        try:
            yield info
        except BaseException as exc:
            msg = str(exc).strip().splitlines()[0] if str(exc).strip() else ""
            ACCEPTANCE[label] = (False, _detail(info) + f" [{type(exc).__name__}: {msg[:160]}]")
            raise
        ACCEPTANCE[label] = (True, _detail(info))

    return record


def _detail(info: dict) -> str:
    return " ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}" for k, v in info.items())


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE, key=lambda s: int(s.split()[0])):
        ok, detail = ACCEPTANCE[label]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}".rstrip())
