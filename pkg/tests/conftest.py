import os

import pytest
from hypothesis import HealthCheck, settings

from rvsoc.asm import assemble
from rvsoc.harness import Config, Machine
from rvsoc.mem_hier import RAM_BASE

settings.register_profile("default", deadline=None, max_examples=200,
                          suppress_health_check=[HealthCheck.too_slow])
settings.register_profile("thorough", deadline=None, max_examples=2000,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# jump-to-self; a program that ends here spins until the limit
HALT = "\nhalt: j halt\n"


def build(src: str, base: int = RAM_BASE) -> bytes:
    return assemble(src, base)[0]


def machine(src: str, **cfg) -> Machine:
    m = Machine(Config(**cfg))
    m.load_image(build(src))
    return m


def run(src: str, n: int, **cfg) -> Machine:
    m = machine(src, **cfg)
    m.run(n)
    return m


@pytest.fixture
def traced():
    """Run a program with trace capture; returns (machine, trace lines)."""
    def go(src, n, **cfg):
        m = machine(src, **cfg)
        m.trace_lines = []
        m.run(n)
        return m, m.trace_lines
    return go


# -- acceptance reporting ------------------------------------------------------
_ACCEPTANCE: dict[int, str] = {}


class _Criterion:
    def __init__(self, n, title):
        self.n, self.title, self.detail = n, title, ""

    def __enter__(self):
        return self

    def __exit__(self, et, ev, tb):
        status = "PASS" if et is None else "FAIL"
        why = self.detail if et is None else f"{et.__name__}: {str(ev).splitlines()[0] if str(ev) else ''}"
        line = f"criterion {self.n:2d} {status}  {self.title}" + (f"  [{why}]" if why else "")
        _ACCEPTANCE[self.n] = line
        print(line)
        return False


@pytest.fixture
def criterion():
    """``with criterion(n, title) as c:`` records one pass/fail line for the run summary."""
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
