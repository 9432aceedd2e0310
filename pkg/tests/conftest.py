import pytest

from timemark.keychain import KeyVault
from timemark.wm_core import WatermarkConfig


@pytest.fixture
def cfg():
    return WatermarkConfig()


@pytest.fixture
def small_cfg():
    # 64-token vocab keeps shuffles cheap; same payload geometry as the default
    return WatermarkConfig(vocab_size=64)


@pytest.fixture
def vault():
    v = KeyVault.from_seed(1234, clock=lambda: 0.0)
    v.advance(10)
    return v


_ACCEPTANCE = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_ACCEPTANCE] = []


@pytest.fixture
def acceptance_line(request):
    """Record one PASS/FAIL line; all lines are echoed in the terminal summary."""
    def emit(label: str, ok: bool, detail: str) -> None:
        line = f"{'PASS' if ok else 'FAIL'}  criterion {label}: {detail}"
        request.config.stash[_ACCEPTANCE].append(line)
        print(line)
    return emit


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_ACCEPTANCE, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: s.split("criterion ")[1]):
            terminalreporter.write_line(line)
