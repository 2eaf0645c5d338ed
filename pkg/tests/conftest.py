import pytest

from robust_psi.core import RobustParams

_VERDICTS = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_VERDICTS] = []


def pytest_terminal_summary(terminalreporter, config):
    lines = config.stash.get(_VERDICTS, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines):
            terminalreporter.write_line(line)


@pytest.fixture
def verdict(request):
    """Record one PASS/FAIL line for the acceptance summary, then assert."""

    def record(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        request.config.stash[_VERDICTS].append(line)
        print(line)
        assert ok, line

    return record


@pytest.fixture
def synth_params() -> RobustParams:
    """Synthetic benchmark settings, adversary free."""
    return RobustParams(epsilon=0.0, delta=0.1, alpha=0.1, t_bar=0.49, sigma=0.1)
