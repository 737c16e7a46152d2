import math

import pytest

import oracles
from posbridge import make_step_law
from posbridge.brownian import G0, SQRT_2PI
from posbridge.llt import (
    constants_check,
    gnedenko_ratio,
    llt_large_ratio,
    llt_report,
    llt_small_ratio,
    scaled,
)
from posbridge.steps import norming


def test_gnedenko_matches_binomial(lazy):
    ns = [100, 1000, 10_000]
    d = gnedenko_ratio(lazy, ns)
    for n, r in zip(ns, d.observed):
        want = norming(lazy, None, n) * oracles.lazy_p0(n) * SQRT_2PI
        assert r == pytest.approx(want, rel=1e-10)
    assert d.trend and d.final_gap < 1e-4


def test_gnedenko_scaled_endpoint(lazy):
    d = gnedenko_ratio(lazy, [400, 1600, 6400], 0, scaled(1.0))
    assert d.meta["y"] == [round(math.sqrt(200)), round(math.sqrt(800)), round(math.sqrt(3200))]
    assert d.final_gap < 1e-3


def test_small_ratio_matches_closed_form(lazy):
    # n a_n qh_n(0,0) / (g(0) underline V^-(0) underline Vhat^+(0)), with
    # underline V^-(0) = 1 and underline Vhat^+(0) = 1 - zeta = 1/4
    ns = [50, 500, 5000]
    d = llt_small_ratio(lazy, ns, 0, 0, "strict")
    for n, r in zip(ns, d.observed):
        want = n * norming(lazy, None, n) * oracles.lazy_strict_kernel_from0(n, 0) / (G0 * 0.25)
        assert r == pytest.approx(want, rel=1e-9)
    assert d.trend


def test_large_ratio_matches_closed_form(lazy):
    ns = [400, 4000]
    d = llt_large_ratio(lazy, ns, 0, 1.0, "strict")
    for n, y, r in zip(ns, d.meta["y"], d.observed):
        a = norming(lazy, None, n)
        g = (y / a) * math.exp(-0.5 * (y / a) ** 2)
        want = a * oracles.lazy_strict_kernel_from0(n, y) / (oracles.lazy_strict_survival(n) * g)
        assert r == pytest.approx(want, rel=1e-9)


def test_other_variants_converge(skew):
    assert llt_small_ratio(skew, [1000, 4000], 1, 2, "strict").trend
    assert llt_large_ratio(skew, [1000, 4000], 0, 1.0, mirrored=True).final_gap < 0.05
    lazy = make_step_law("lazy")
    assert llt_small_ratio(lazy, [1000, 4000], 0, 0, "weak").final_gap < 0.01
    assert llt_large_ratio(lazy, [1000, 4000], 2, 1.0, "weak").final_gap < 0.05


def test_constants_interpolation_vs_rounding(lazy):
    rep = constants_check(lazy, [1000, 4000])
    g = rep.gaps("C_minus")
    assert g[-1] <= g[0] and g[-1] < 1e-3
    # rounding is a lattice artefact of order 1/a_n, reported only
    assert "C_minus_round" in rep.checks()


def test_report_verdicts(lazy):
    rep = llt_report(lazy, [500, 1000], [500, 1000])
    assert set(rep.verdicts) == {"gnedenko", "llt_small_strict", "llt_large_strict", "constants"}
    assert rep.passed
