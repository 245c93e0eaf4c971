import numpy as np
import pytest

from kgescape.geometry import Cometric, PowerDecay
from kgescape.reports import load_manifest

CRITERIA = {}


def record(number, passed: bool, detail: str = "") -> None:
    """Store an acceptance verdict and echo it on its own line."""
    CRITERIA[number] = (bool(passed), detail)
    print(f"criterion {number!s:>2}: {'PASS' if passed else 'FAIL'}  {detail}")


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(CRITERIA, key=lambda v: (int(str(v).rstrip("b")), str(v))):
        ok, detail = CRITERIA[k]
        terminalreporter.write_line(f"criterion {k!s:>2}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def manifest():
    return load_manifest()


@pytest.fixture(scope="session")
def flat2():
    return Cometric.minkowski(2)


@pytest.fixture(scope="session")
def perturbed2(manifest):
    p = manifest["cutoffs"]["perturbation"]
    return Cometric.minkowski(2, perturbation=PowerDecay(amplitude=np.array(p["amplitude"]), mu=p["mu"]))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
