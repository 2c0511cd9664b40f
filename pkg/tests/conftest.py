import numpy as np
import pytest

from isiwtc.trellis import DICODE, EPR4, Alphabet, IsiWtcSpec, TransferPolynomial, build_joint_trellis


def make_trellis(gB=(1.0,), gE=(1.0,), nu=1, sB=1.0, sE=1.0, Es=1.0):
    spec = IsiWtcSpec(TransferPolynomial(tuple(gB)), TransferPolynomial(tuple(gE)), sB, sE)
    return build_joint_trellis(Alphabet.bpsk(Es), nu, spec)


@pytest.fixture
def example2():
    spec = IsiWtcSpec.from_snr(DICODE, EPR4, 5.0, 5.0)
    return build_joint_trellis(Alphabet.bpsk(), 3, spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one PASS/FAIL line per acceptance criterion at the end of the run
_ACCEPTANCE: dict[str, tuple[str, str]] = {}


def pytest_runtest_logreport(report):
    if "test_acceptance.py::test_criterion_" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        detail = next((v for k, v in report.user_properties if k == "detail"), "")
        _ACCEPTANCE[name] = ("PASS" if report.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(_ACCEPTANCE, key=lambda s: int(s.split("_")[2])):
        status, detail = _ACCEPTANCE[name]
        terminalreporter.write_line(f"{status}  {name}  {detail}")
