import numpy as np
import pytest

from nbti_burnin.dac import DacTopology, TransferFunction


def brute_force_metrics(codes, volts, ideal_span):
    """Independent per-code recomputation using plain Python arithmetic."""
    n = len(volts) - 1
    lsb = (volts[-1] - volts[0]) / n
    dnl = []
    for k in range(n):
        dnl.append((volts[k + 1] - volts[k]) / lsb - 1.0)
    inl = []
    for k in range(n + 1):
        ideal_k = volts[0] + k * lsb
        inl.append((volts[k] - ideal_k) / lsb)
    gain = (volts[-1] - volts[0]) / ideal_span
    return {"dnl": dnl, "inl": inl, "gain": gain, "gain_error": 100.0 * (gain - 1.0),
            "offset": volts[0]}


@pytest.fixture
def ramp():
    def make(volts):
        return TransferFunction(tuple(range(len(volts))), tuple(volts))
    return make


@pytest.fixture
def small_topology():
    return DacTopology(bits=4)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Acceptance outcomes, collected by test_acceptance and echoed in the summary.
ACCEPTANCE_RESULTS: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(ACCEPTANCE_RESULTS[n])
