import numpy as np
import pytest

from akmsense.detector import DetectorSpec
from akmsense.fading import ChannelSpec, FadingParams


@pytest.fixture(scope="session")
def ref_fading():
    """alpha=1.35, kappa=1, mu=1: the reference fading configuration."""
    return FadingParams(1.35, 1.0, 1.0)


@pytest.fixture(scope="session")
def ref_detector():
    """u=2 with the threshold set for Pf=0.01."""
    return DetectorSpec.for_pf(2, 0.01)


@pytest.fixture
def ref_channel(ref_fading):
    def make(snr_db):
        return ChannelSpec.from_db(ref_fading, snr_db)
    return make


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


_ACCEPTANCE_KEY = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Record and print one PASS/FAIL line for an acceptance criterion."""
    lines = request.config.stash.setdefault(_ACCEPTANCE_KEY, [])

    def record(name: str, ok: bool, detail: str) -> bool:
        line = f"{'PASS' if ok else 'FAIL'}  {name}: {detail}"
        lines.append(line)
        with capsys.disabled():
            print(f"\n{line}")
        return ok
    return record


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
