import numpy as np
import pytest

from nowcast.data import ingest
from nowcast.synthetic import make_synthetic


@pytest.fixture(scope="session")
def synthetic_frame():
    frame, _ = ingest(make_synthetic(), "gdp_growth")
    return frame


@pytest.fixture
def rng():
    return np.random.default_rng(42)


def fast_config(**overrides):
    """A small-budget run configuration for tests."""
    from nowcast.pipeline import RunConfig

    kw = dict(
        models=["RW", "AR", "Ridge"],
        n_trials=8,
        n_startup=4,
        bootstrap={"block_len": 4, "n_boot": 30, "alpha": 0.025},
        mcs={"alpha": 0.10, "n_boot": 500, "block_len": 4, "statistic": "TR"},
        ig_steps=10,
    )
    kw.update(overrides)
    return RunConfig(**kw)


def poison_after(frame, quarter, value=1e6):
    """Copy of ``frame`` with every row after ``quarter`` overwritten."""
    out = frame.copy()
    out.values[out.position(quarter) + 1:] = value
    return out


ACCEPTANCE: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE):
            terminalreporter.write_line(line)
