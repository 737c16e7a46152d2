from fractions import Fraction

import pytest
from hypothesis import settings
from hypothesis import strategies as st

from posbridge import make_step_law

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

# criterion -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def lazy():
    return make_step_law("lazy")


@pytest.fixture(scope="session")
def skew():
    return make_step_law("skew")


@pytest.fixture(scope="session")
def trinomial():
    return make_step_law("trinomial")


@st.composite
def zero_mean_laws(draw):
    """Aperiodic zero-mean laws on ``{-2, ..., 2}`` with rational weights."""
    m2 = draw(st.integers(0, 4))
    m1 = draw(st.integers(1, 4))
    z = draw(st.integers(1, 4))
    down = m1 + 2 * m2
    p2 = draw(st.integers(0, down // 2))
    p1 = down - 2 * p2
    w = {-2: m2, -1: m1, 0: z, 1: p1, 2: p2}
    tot = sum(w.values())
    return make_step_law({k: Fraction(v, tot) for k, v in w.items() if v})


@st.composite
def small_laws(draw):
    """Aperiodic laws (any mean) on ``{-2, ..., 2}``."""
    w = {k: draw(st.integers(0, 4)) for k in range(-2, 3)}
    w[0] = draw(st.integers(1, 4))
    w[draw(st.sampled_from([-1, 1]))] += 1
    tot = sum(w.values())
    return make_step_law({k: Fraction(v, tot) for k, v in w.items() if v})


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for name in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
        ok, detail = ACCEPTANCE[name]
        terminalreporter.write_line(f"{name}: {'PASS' if ok else 'FAIL'}  {detail}")
