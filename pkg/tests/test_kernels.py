import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

import oracles
from conftest import small_laws
from posbridge.errors import TruncationExceeded
from posbridge.kernels import (
    killed_walk,
    positivity_survival,
    q_plus,
    survival_sequence,
    transition_pmf,
    transition_vector,
)


@pytest.mark.parametrize("strictness", ["weak", "strict"])
@pytest.mark.parametrize("name", ["lazy", "skew", "trinomial"])
def test_kernel_matches_enumeration(name, strictness):
    from posbridge import make_step_law

    law = make_step_law(name)
    for n in range(1, 6):
        t = q_plus(law, n, 3, 3 + n * law.max_up, strictness)
        for x in range(4):
            for y in range(0, min(6, t.y_max + 1)):
                want = float(oracles.kernel(law, n, x, y, strictness == "strict"))
                assert t.prob(x, y) == pytest.approx(want, abs=1e-15)


def test_first_step_is_the_step_law(lazy):
    # no constraint at the final time, so n = 1 is just the step pmf
    t = q_plus(lazy, 1, 2, 4, "strict")
    assert t.prob(0, 0) == 0.5
    assert t.prob(0, 1) == 0.25
    assert t.prob(2, 1) == 0.25


def test_lazy_strict_kernel_closed_form(lazy):
    for n in (2, 3, 10, 50):
        t = q_plus(lazy, n, 0, None, "strict")
        for y in range(0, min(6, t.y_max + 1)):
            assert t.prob(0, y) == pytest.approx(oracles.lazy_strict_kernel_from0(n, y), rel=1e-12, abs=1e-300)


def test_survival_closed_forms(lazy):
    ns = [1, 2, 5, 100, 1000]
    weak = survival_sequence(lazy, ns, 0, "weak")
    strict = survival_sequence(lazy, ns, 0, "strict")
    for n in ns:
        assert weak[n] == pytest.approx(oracles.lazy_weak_survival(n), rel=1e-11)
        assert strict[n] == pytest.approx(oracles.lazy_strict_survival(n), rel=1e-11)
    assert positivity_survival(lazy, 5, 0, "strict") == strict[5]


def test_transition_pmf_binomial(lazy):
    for n in (1, 7, 400, 10_000):
        assert transition_pmf(lazy, n, 0, 0) == pytest.approx(oracles.lazy_p0(n), rel=1e-11)
    _, pm, leaked = transition_vector(lazy, 50)
    assert math.fsum(pm.values()) == pytest.approx(1.0, abs=1e-14)
    assert leaked < 1e-15


def test_log_scale_keeps_tiny_values(lazy):
    # strict return to 0 after 4000 steps is about 1e-6; survival is ~1e-2
    t = q_plus(lazy, 4000, 0, None, "strict")
    v = t.values[0, 0]
    assert math.isfinite(v)
    assert math.exp(v) == pytest.approx(oracles.lazy_strict_kernel_from0(4000, 0), rel=1e-9)


def test_truncation_guard(lazy):
    with pytest.raises(TruncationExceeded):
        q_plus(lazy, 200, 0, 5, "weak")


def test_rescaling_kicks_in_for_long_horizons(lazy):
    last = None
    prev = None
    for st_ in killed_walk(lazy, [1], 20_000, 5, "strict"):
        prev, last = last, st_
    # a 5-wide window decays geometrically far below the float range; the
    # state is kept in range by the scale and the decay rate stays put
    assert last.log_scale < -700
    assert np.isfinite(last.q).all() and last.q.max() > 1e-260
    r1 = math.log(last.q[0].sum()) + last.log_scale - math.log(prev.q[0].sum()) - prev.log_scale
    lam = 0.5 + 0.5 * math.cos(math.pi / 6)  # top eigenvalue of the killed lazy walk on {1..5}
    assert r1 == pytest.approx(math.log(lam), abs=1e-9)


@given(small_laws(), st.integers(1, 4), st.sampled_from(["weak", "strict"]))
def test_kernel_properties(law, n, strictness):
    top = 3 + n * law.max_up
    t = q_plus(law, n, 3, top, strictness)
    p = t.probs()
    assert (p >= 0).all()
    # a row never carries more than the survival mass of the first n-1 steps
    assert (p.sum(axis=1) <= 1 + 1e-12).all()
    if strictness == "strict":
        weak = q_plus(law, n, 3, top, "weak").probs()
        assert (p <= weak + 1e-15).all()
    for x in range(4):
        assert p[x, 1] == pytest.approx(float(oracles.kernel(law, n, x, 1, strictness == "strict")), abs=1e-14)


@given(small_laws(), st.integers(1, 5))
def test_column_equals_reflected_row(law, n):
    # q_n(z, y) for p is q_n(y, z) for -X
    top = 4 + n * max(law.max_up, law.max_down)
    # reversal keeps the set of visited positions, so truncation does not matter
    a = q_plus(law, n, top, top, "strict", leak_tol=np.inf).probs()
    b = q_plus(law.reflected(), n, top, top, "strict", leak_tol=np.inf).probs()
    np.testing.assert_allclose(a, b.T, atol=1e-15)
