import numpy as np
import pytest

from ddrfsim.calibration import calibrated_sequence
from ddrfsim.system import KHZ, DdrfSequence, NuclearSpinParams, Role

NODE_TOML = """\
[sequence]
n_pulses = 48
tau_over_tauL = 8
larmor_khz = 432.0

[[spin]]
label = "t"
apar_khz = 50.0
beta_rad = 0.0
role = "target"

[[spin]]
label = "u"
apar_khz = 30.0
beta_rad = 0.0
role = "unaddressed"

[node]
f_ee = 0.99
"""


def random_unitary(rng, d=2):
    z = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    q, r = np.linalg.qr(z)
    return q * (np.diag(r) / np.abs(np.diag(r)))


def random_state(rng):
    v = rng.normal(size=2) + 1j * rng.normal(size=2)
    return v / np.linalg.norm(v)


@pytest.fixture(scope="session")
def target_spin():
    return NuclearSpinParams(a_par=50 * KHZ, beta=0.0, role=Role.TARGET, label="t")


@pytest.fixture(scope="session")
def unaddressed_spin():
    return NuclearSpinParams(a_par=30 * KHZ, beta=0.0, role=Role.UNADDRESSED, label="u")


@pytest.fixture(scope="session")
def calibrated_seq(target_spin):
    return calibrated_sequence(target_spin, DdrfSequence.for_target(target_spin))


@pytest.fixture
def node_file(tmp_path):
    path = tmp_path / "node.toml"
    path.write_text(NODE_TOML)
    return path


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE_LINES = []


@pytest.fixture
def acceptance_report():
    """Record one pass/fail line per acceptance criterion."""

    def record(criterion, passed, message):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {criterion}: {message}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
