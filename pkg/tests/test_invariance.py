import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from posbridge.brownian import f_eps_t
from posbridge.fluctuation import renewal_for
from posbridge.invariance import (
    FitReport,
    bridge_marginal_samples,
    excursion_marginal_fit,
    marginal_time,
    negative_control_fit,
    radon_nikodym_fN,
    rescale,
    rescale_values,
    rn_density,
    tightness_diagnostic,
    uniff_gap,
    unconditioned_bridge_samples,
)
from posbridge.kernels import q_plus
from posbridge.samplers import bridge_marginal, sample_bridge, sample_bridges
from posbridge.steps import norming


def test_rescale_modes():
    S = np.array([[0, 1, 2, 1, 0]])
    t = np.array([0, 0.25, 0.3, 0.5, 1.0])
    np.testing.assert_allclose(rescale_values(S, 2.0, t), [[0, 0.5, 0.5, 1.0, 0]])
    np.testing.assert_allclose(rescale_values(S, 2.0, t, "linear"), [[0, 0.5, 0.6, 1.0, 0]])
    with pytest.raises(ValueError):
        rescale_values(S, 0.0, t)


@given(st.integers(1, 50), st.floats(0.5, 10))
def test_cadlag_rescale_hits_grid_points(N, a):
    rng = np.random.default_rng(N)
    S = np.cumsum(rng.integers(-1, 2, size=(1, N + 1)), axis=1)
    t = np.arange(N + 1) / N
    np.testing.assert_allclose(rescale_values(S, a, t)[0], S[0] / a)


def test_rescale_path(lazy):
    p = sample_bridge(lazy, 0, 0, 16, "strict", 1)
    r = rescale(p, norming(lazy, None, 16))
    assert len(r.values) == 17 and r.values[0] == 0


def test_rn_density_against_forward_tables(lazy):
    N, eps = 64, 0.25
    ren = renewal_for(lazy, "descending", 80)
    f = rn_density(lazy, ren, N, eps, 0, 0, z_max=2.0)
    m = N - math.floor((1 - eps) * N)
    qN = q_plus(lazy, N, 0, None, "strict").prob(0, 0)
    col = q_plus(lazy, m, 30, 30 + m, "strict")
    a = norming(lazy, None, N)
    for k in (0, 1, 3, 7, 11):
        want = ren.Vunder[0] / qN * col.prob(k, 0) / ren.Vunder[k]
        assert f(k / a) == pytest.approx(want, rel=1e-10, abs=1e-300)
    assert radon_nikodym_fN(lazy, ren, N, eps, 0, 0, 3 / a) == pytest.approx(f(3 / a))


@pytest.mark.parametrize("N,eps", [(32, 0.25), (100, 0.5), (256, 0.75)])
def test_rn_density_has_unit_mass(lazy, N, eps):
    # E^up[f(S_{N-m} / a_N)] = 1 by Chapman-Kolmogorov
    m = N - math.floor((1 - eps) * N)
    n1 = N - m
    kmax = n1 + 2
    ren = renewal_for(lazy, "descending", kmax + 2)
    a = norming(lazy, None, N)
    f = rn_density(lazy, ren, N, eps, 0, 0, z_max=(kmax + 1) / a)
    row = q_plus(lazy, n1, 0, kmax, "strict")
    tot = 0.0
    for k in range(1, kmax + 1):
        up = row.prob(0, k) * ren.Vunder[k] / ren.Vunder[0]
        tot += up * f(k / a)
    assert tot == pytest.approx(1.0, abs=1e-12)


def test_uniff_gap_decreases(lazy):
    g = uniff_gap(lazy, None, [64, 256, 1024], 0.25)
    vals = [v for _, v in g]
    assert vals[0] > vals[1] > vals[2]
    assert vals[-1] < 0.1 * f_eps_t(0.0, 0.25)


def test_weak_bridge_is_shifted_strict_bridge(lazy):
    # weak 0 -> 0 is the strict 1 -> 1 bridge moved down by one
    N, m = 40, 20
    w = bridge_marginal(lazy, 0, 0, N, m, "weak")
    s = bridge_marginal(lazy, 1, 1, N, m, "strict")
    for z, p in w.items():
        assert s[z + 1] == pytest.approx(p, rel=1e-12)


def test_marginal_fit_and_control(lazy):
    fit = excursion_marginal_fit(lazy, 256, 0.5, 20_000, seed=1)
    assert fit.statistic == "KS" and fit.config["strictness"] == "strict"
    assert fit.value < 0.08
    neg = negative_control_fit(lazy, 256, 0.5, 20_000, seed=1)
    assert neg.value > 0.5 and neg.verdict
    d = fit.to_dict()
    assert d["N"] == 256 and "stamp" in d


def test_marginal_samples_use_the_right_time(lazy):
    assert marginal_time(4096, 0.5) == 2048
    assert marginal_time(10, 0.3) == 7
    a = bridge_marginal_samples(lazy, 64, 0.5, 500, seed=2)
    b = sample_bridges(lazy, 0, 0, 64, 500, "strict", 2, record=[32])
    np.testing.assert_allclose(a, b.column(32) / norming(lazy, None, 64))
    c = unconditioned_bridge_samples(lazy, 64, 0.5, 500, seed=2)
    assert c.min() < 0


def test_fit_report_verdicts():
    assert FitReport("KS", 0.01, 0.02, 10, 0).verdict
    assert not FitReport("KS", 0.03, 0.02, 10, 0).verdict
    assert FitReport("KS", 0.3, 0.1, 10, 0, "above").verdict


def test_tightness(lazy):
    b = sample_bridges(lazy, 0, 0, 256, 800, "strict", 4)
    t = np.linspace(0, 1, 257)
    X = rescale_values(b.values, norming(lazy, None, 256), t)
    res = tightness_diagnostic(X, [0.3, 0.1, 0.03, 0.01], 0.25, t)
    probs = [p for _, p in res]
    assert probs == sorted(probs, reverse=True)
    assert probs[-1] < 0.05
