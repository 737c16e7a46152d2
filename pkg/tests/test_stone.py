import math

import numpy as np
import pytest
from scipy import integrate, stats

from posbridge.errors import GridTooCoarse, NonFinite
from posbridge.stone import (
    StepDensity,
    dri_tail,
    dri_theta,
    interval_kernel,
    make_grid,
    mc_interval_kernel,
    mc_killed_density,
    refine_until,
    refinement_trace,
    sandwich_bounds,
)


@pytest.fixture(scope="module")
def grid():
    return make_grid("gaussian", 1 / 128, 10.0)


def killed2(x, y):
    """Density of S_2 at y with S_1 > 0, Gaussian steps."""
    return stats.norm.pdf(y - x, scale=math.sqrt(2)) * stats.norm.cdf((x + y) / math.sqrt(2))


def test_grid_mass(grid):
    assert grid.total_mass_check() == pytest.approx(1.0, abs=1e-14)


def test_interval_kernel_one_step_is_exact(grid):
    lo, hi = interval_kernel(grid, 1, 0.3, 0.5, 0.25)
    want = stats.norm.cdf(0.45) - stats.norm.cdf(0.2)
    assert lo == hi == pytest.approx(want, abs=1e-15)


@pytest.mark.parametrize("x,y", [(0.0, 0.5), (0.5, 0.5), (1.5, 3.0), (3.0, 0.25)])
def test_two_step_enclosures(grid, x, y):
    d = 0.125
    lo, hi = interval_kernel(grid, 2, x, y, d)
    exact = integrate.quad(lambda v: killed2(x, v), y, y + d)[0]
    assert lo <= exact <= hi
    s, S = sandwich_bounds(grid, 2, 1, x, y, d)
    assert s <= killed2(x, y) <= S


def test_sandwich_width_shrinks_with_h():
    wide = sandwich_bounds(make_grid("gaussian", 1 / 32, 10.0), 2, 1, 0.5, 1.0, 1 / 32)
    narrow = sandwich_bounds(make_grid("gaussian", 1 / 256, 10.0), 2, 1, 0.5, 1.0, 1 / 256)
    assert narrow[1] - narrow[0] < 0.25 * (wide[1] - wide[0])


def test_refinement_trace(grid):
    tr = refinement_trace(grid, 5, 2, 1.0, 1.0, 0.25, 3)
    assert tr.deltas == [0.25, 0.125, 0.0625, 0.03125]
    assert tr.monotone()
    assert all(a <= b for a, b in zip(tr.s, tr.S))


def test_delta_must_tile(grid):
    with pytest.raises(GridTooCoarse):
        sandwich_bounds(grid, 4, 2, 0.5, 0.5, 0.3)
    with pytest.raises(GridTooCoarse):
        sandwich_bounds(make_grid("gaussian", 1 / 16, 1.5), 4, 2, 0.5, 0.5, 1.0)
    with pytest.raises(ValueError):
        sandwich_bounds(grid, 2, 2, 0.5, 0.5, 0.25)


def test_refine_until_reaches_ratio():
    h, d, s, S = refine_until("gaussian", 4, 2, 1.0, 1.0, 0.25, h0=1 / 32, ratio=1.05, L=10.0)
    assert S / s < 1.05
    assert h <= 1 / 32


def test_monte_carlo_agrees_with_exact_two_step():
    est, se = mc_killed_density(StepDensity("gaussian"), 2, 0.5, 1.0, 400_000, 0.05, seed=3)
    assert abs(est - killed2(0.5, 1.0)) < 4 * se + 1e-3
    p, pse = mc_interval_kernel(StepDensity("gaussian"), 1, 0.0, 0.5, 0.5, 200_000, seed=1)
    assert abs(p - (stats.norm.cdf(1.0) - stats.norm.cdf(0.5))) < 4 * pse


def test_theta_converges_to_the_integral(grid):
    a = 1.5
    var = 2.0
    integral = 2 * integrate.quad(lambda u: (1 + u) ** a * stats.norm.pdf(u, scale=math.sqrt(var)), 0, np.inf)[0]
    prev = math.inf
    for d in (0.4, 0.2, 0.1, 0.05, 0.025):
        th = dri_theta(grid, 2, a, d)
        assert th.value >= integral - 1e-9
        assert th.upper <= prev
        prev = th.value
    assert prev - integral < 0.05


def test_theta_factor_two(grid):
    for dp in (0.1, 0.3, 0.9):
        ref = dri_theta(grid, 2, 1.5, dp).value
        for d in np.linspace(dp / 2, dp, 7)[1:-1]:
            assert dri_theta(grid, 2, 1.5, float(d)).upper <= 2 * ref


def test_theta_tail_and_pareto(grid):
    assert dri_tail(grid, 1, 1.5, 0.1, 10.0) < 1e-15
    par = StepDensity("pareto", 3.0)
    th = dri_theta(par, 1, 1.5, 0.1)
    assert math.isfinite(th.upper)
    with pytest.raises(NonFinite):
        dri_theta(par, 1, 3.5, 0.1)
    with pytest.raises(NotImplementedError):
        dri_theta(par, 2, 1.5, 0.1)


def test_pareto_density():
    d = StepDensity("pareto", 3.0)
    assert integrate.quad(d.pdf, -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-10)
    assert d.mass(-1, 2) == pytest.approx(integrate.quad(d.pdf, -1, 2)[0], abs=1e-12)
    assert d.variance == 1.0
