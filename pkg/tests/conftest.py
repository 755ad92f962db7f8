import numpy as np
import pytest

from schrodinger_ldp.spectral import NoiseSpec

_ACCEPTANCE = {}


class AcceptanceLog:
    def record(self, ident: str, passed: bool, detail: str) -> None:
        _ACCEPTANCE[ident] = (passed, detail)

    def check(self, ident: str, passed: bool, detail: str) -> None:
        self.record(ident, passed, detail)
        assert passed, f"{ident}: {detail}"


@pytest.fixture(scope="session")
def acceptance():
    return AcceptanceLog()


@pytest.fixture
def spec4():
    return NoiseSpec.from_rule(1.0, "k^-4", 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for ident in sorted(_ACCEPTANCE, key=lambda s: int(s.split()[0][2:])):
        passed, detail = _ACCEPTANCE[ident]
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {ident}: {detail}")
