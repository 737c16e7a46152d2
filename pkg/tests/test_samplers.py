import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

import oracles
from conftest import small_laws
from posbridge import make_step_law
from posbridge.errors import ExplosionGuard, ZeroBridgeProbability
from posbridge.fluctuation import renewal_for
from posbridge.samplers import (
    bridge_marginal,
    bridge_pmf_exact,
    count_bridge_paths,
    make_rng,
    sample_bridge,
    sample_bridges,
    sample_up_walk,
    sample_up_walks,
    time_reversal_residual,
    up_walk_step_law,
)


def _enumerated_bridge(law, x, y, N, strict):
    floor = 1 if strict else 0
    out = {}
    for path, p in oracles.enumerate_paths(law, N, x):
        if path[-1] == y and all(s >= floor for s in path[1:-1]):
            out[tuple(path)] = p
    tot = sum(out.values())
    return {k: v / tot for k, v in out.items()}


@pytest.mark.parametrize("strictness", ["weak", "strict"])
@pytest.mark.parametrize("name,x,y,N", [("lazy", 0, 0, 6), ("skew", 1, 2, 5), ("trinomial", 2, 0, 4)])
def test_bridge_pmf_matches_brute_force(name, x, y, N, strictness):
    law = make_step_law(name)
    got = bridge_pmf_exact(law, x, y, N, strictness)
    want = _enumerated_bridge(law, x, y, N, strictness == "strict")
    assert got == want
    assert all(isinstance(v, Fraction) for v in got.values())
    assert count_bridge_paths(law, x, y, N, strictness) == len(want)


def test_bridge_guards(lazy):
    with pytest.raises(ZeroBridgeProbability):
        bridge_pmf_exact(lazy, 0, 5, 3)
    with pytest.raises(ExplosionGuard):
        bridge_pmf_exact(lazy, 0, 0, 30)
    with pytest.raises(ZeroBridgeProbability):
        sample_bridges(lazy, 0, 5, 3, 10)


def test_bridge_marginal_matches_enumeration(skew):
    pmf = bridge_pmf_exact(skew, 0, 1, 7, "strict")
    for m in (1, 3, 6):
        want = Counter()
        for path, p in pmf.items():
            want[path[m]] += p
        got = bridge_marginal(skew, 0, 1, 7, m, "strict")
        assert set(got) == set(want)
        for z in want:
            assert got[z] == pytest.approx(float(want[z]), abs=1e-14)


def test_sampler_deterministic_and_constrained(lazy):
    a = sample_bridges(lazy, 0, 0, 40, 3000, "strict", seed=11)
    b = sample_bridges(lazy, 0, 0, 40, 3000, "strict", seed=11)
    c = sample_bridges(lazy, 0, 0, 40, 3000, "strict", seed=12)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, c.values)
    assert (a.values[:, 1:-1] >= 1).all()
    assert (a.values[:, 0] == 0).all() and (a.values[:, -1] == 0).all()
    assert a.max_norm_residual < 1e-12
    assert all(p.check(0, 0) for p in a.paths()[:50])
    np.testing.assert_array_equal(a.path_min, a.values.min(axis=1))
    np.testing.assert_allclose(a.path_mean, a.values.mean(axis=1))


def test_workers_do_not_change_output(lazy):
    a = sample_bridges(lazy, 2, 3, 30, 110_000, "weak", seed=3, record=[0, 15, 30])
    b = sample_bridges(lazy, 2, 3, 30, 110_000, "weak", seed=3, record=[0, 15, 30], workers=4)
    assert np.array_equal(a.values, b.values)
    assert np.array_equal(a.path_max, b.path_max)


def test_log_weights_are_path_probabilities(lazy):
    pmf = bridge_pmf_exact(lazy, 0, 0, 6)
    batch = sample_bridges(lazy, 0, 0, 6, 200, seed=1)
    for v, lw in zip(batch.values, batch.log_weight):
        assert lw == pytest.approx(math.log(pmf[tuple(int(s) for s in v)]), abs=1e-12)


def test_small_chi_square(skew):
    pmf = bridge_pmf_exact(skew, 0, 0, 6, "weak")
    batch = sample_bridges(skew, 0, 0, 6, 20_000, "weak", seed=5)
    counts = Counter(map(tuple, batch.values.tolist()))
    keys = sorted(pmf)
    obs = np.array([counts[k] for k in keys])
    exp = np.array([float(pmf[k]) for k in keys]) * len(batch)
    assert sum(obs) == len(batch)
    assert stats.chisquare(obs, exp).pvalue > 1e-3


def test_single_bridge_and_csv(tmp_path, lazy):
    p = sample_bridge(lazy, 0, 0, 10, "weak", 9)
    assert p.check(0, 0)
    b = sample_bridges(lazy, 0, 0, 10, 3, seed=9)
    b.to_csv(tmp_path / "b.csv")
    lines = (tmp_path / "b.csv").read_text().splitlines()
    assert lines[0] == "sample_id,t,S_t"
    assert len(lines) == 1 + 3 * 11


@pytest.mark.parametrize("strictness", ["weak", "strict"])
def test_time_reversal(skew, strictness):
    for N in range(1, 8):
        for x, y in ((0, 0), (1, 3), (2, 1)):
            try:
                assert time_reversal_residual(skew, x, y, N, strictness) <= 1e-12
            except ZeroBridgeProbability:
                pass


def test_up_walk_step_law_is_a_law(lazy):
    r = renewal_for(lazy, "descending", 50)
    for strictness in ("weak", "strict"):
        for z in range(0 if strictness == "weak" else 1, 20):
            tg, p, res = up_walk_step_law(lazy, r, z, strictness)
            assert p.sum() == pytest.approx(1.0)
            assert res < 1e-13


def test_up_walk_endpoint_law(skew):
    # P_x(up-walk at N = y) = q_{N+1}-style kernel: P_x(S_1..S_N >= 0, S_N = y) h(y) / h(x)
    r = renewal_for(skew, "descending", 60)
    N, x = 6, 1
    paths = sample_up_walks(skew, r, x, N, 40_000, "weak", seed=2)
    assert (paths[:, 1:] >= 0).all()
    ends = Counter(paths[:, -1].tolist())
    weak_all = {}
    for path, p in oracles.enumerate_paths(skew, N, x):
        if all(s >= 0 for s in path[1:]):
            weak_all[path[-1]] = weak_all.get(path[-1], 0) + p
    keys = sorted(weak_all)
    exp = np.array([float(weak_all[y]) * r.V[y] / r.V[x] for y in keys])
    assert exp.sum() == pytest.approx(1.0, abs=1e-12)
    obs = np.array([ends[y] for y in keys])
    assert stats.chisquare(obs, exp * obs.sum()).pvalue > 1e-3
    one = sample_up_walk(skew, r, x, N, "weak", 4)
    assert one.check(x)


@given(small_laws(), st.integers(2, 6), st.integers(0, 2), st.integers(0, 2), st.sampled_from(["weak", "strict"]))
def test_bridge_marginals_sum_to_one(law, N, x, y, strictness):
    try:
        pmf = bridge_pmf_exact(law, x, y, N, strictness)
    except ZeroBridgeProbability:
        return
    assert sum(pmf.values()) == 1
    m = N // 2
    marg = bridge_marginal(law, x, y, N, m, strictness)
    assert math.fsum(marg.values()) == pytest.approx(1.0, abs=1e-12)


def test_rng_is_philox():
    assert isinstance(make_rng(0).bit_generator, np.random.Philox)
    assert make_rng(4).random() == make_rng(4).random()
