"""Acceptance criteria 1-7.

Each test records a one-line verdict that is printed in the terminal summary
(section "acceptance criteria"), then asserts it, so a failing criterion is
both reported and counted as a failure.
"""

import time

import numpy as np
import pytest

from conftest import ACCEPTANCE
from posbridge import make_step_law
from posbridge.fluctuation import tail_ratio_sequence
from posbridge.suites import (
    identity_suite,
    invariance_suite,
    llt_suite,
    oracle_suite,
    sampler_suite,
    stone_suite,
)


def record(n, ok, detail):
    ACCEPTANCE[f"criterion {n}"] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, detail


def _failed(rep):
    return [k for k, v in rep.verdicts.items() if not v]


def test_criterion_1_exact_identities():
    t0 = time.perf_counter()
    worst, bad = 0.0, []
    for name in ("lazy", "skew"):
        rep = identity_suite(make_step_law(name), n_max=20, x_max=20, N_max=15, cyclic_max=30, v_max=200, tol=1e-10)
        worst = max(worst, max(r.observed for r in rep.rows))
        bad += [f"{name}:{c}" for c in _failed(rep)]
    dt = time.perf_counter() - t0
    record(1, not bad and dt < 5, f"max residual {worst:.2g} (<= 1e-10), {dt:.2f} s (< 5 s) {bad or ''}")


def test_criterion_2_bridge_sampler():
    t0 = time.perf_counter()
    rep = sampler_suite(make_step_law("lazy"), 8, 0, 0, 100_000, seed=0, alpha=0.001, reversal_law=make_step_law("skew"), reversal_N=8, tol=1e-12)
    dt = time.perf_counter() - t0
    p = {r.check_name: r.observed for r in rep.rows if r.check_name.startswith("chi2")}
    tv = float(rep.gaps("time_reversal_tv").max())
    record(
        2,
        rep.passed and dt < 60,
        f"chi2 p weak {p['chi2_pvalue_weak']:.3f} strict {p['chi2_pvalue_strict']:.3f} (> 0.001), reversal TV {tv:.1g} (<= 1e-12), {dt:.1f} s",
    )


def test_criterion_3_llt_ratios():
    t0 = time.perf_counter()
    law = make_step_law("lazy")
    rep = llt_suite(law, n_list=(5000, 10000), small_n_list=(10000, 20000), tail_n_list=(5000, 10000))
    dt = time.perf_counter() - t0
    names = ("gnedenko", "llt_small_strict", "llt_large_strict", "constants")
    final = {c: float(rep.gaps(c if c != "constants" else "C_minus")[-1]) for c in names}
    ok = all(rep.verdicts[c] for c in names) and dt < 120
    # determinism: a second run gives identical numbers
    again = llt_suite(law, n_list=(5000, 10000), small_n_list=(10000, 20000), tail_n_list=(5000, 10000))
    ok &= [r.observed for r in again.rows] == [r.observed for r in rep.rows]
    record(3, ok, ", ".join(f"{k} {v:.2g}" for k, v in final.items()) + f"; {dt:.1f} s")


def test_criterion_4_tail_ratio():
    ns = [10, 100, 1000, 10_000]
    r = tail_ratio_sequence(make_step_law("lazy"), ns)
    gaps = [abs(x - 1) for x in r]
    ok = gaps[-1] < 0.05 and all(b <= a for a, b in zip(gaps, gaps[1:]))
    record(4, ok, f"ratio at n=1e4 {r[-1]:.6f}, gaps {', '.join(f'{g:.1g}' for g in gaps)}")


@pytest.mark.slow
def test_criterion_5_invariance():
    t0 = time.perf_counter()
    rep, _, _ = invariance_suite(make_step_law("lazy"), N=4096, eps=0.5, n_samples=100_000, seed=0, uniff_N=(256, 1024, 4096), uniff_eps=0.25)
    dt = time.perf_counter() - t0
    ks = rep.gaps("ks_excursion")[-1]
    neg = rep.gaps("ks_free_bridge")[-1]
    u = rep.series("uniff_gap")[1]
    ok = all(rep.verdicts[c] for c in ("ks_excursion", "negative_control", "uniff_gap")) and dt < 600
    record(
        5,
        ok,
        f"KS {ks:.4f} (< 0.02), control KS {neg:.3f} (> 0.1), uniff {', '.join(f'{g:.3f}' for g in u)} (< 0.4), {dt:.0f} s",
    )


def test_criterion_6_stone_sandwich():
    t0 = time.perf_counter()
    rep, traces, mcs = stone_suite("gaussian", n=6, kbar=2, mc_paths=1_000_000, seed=0)
    dt = time.perf_counter() - t0
    z = max(r.gap for r in rep.rows if r.check_name.startswith("mc_probe"))
    w = [t.widths[-1] for t in traces]
    record(
        6,
        rep.passed and dt < 60,
        f"{len(traces)} probes, finest widths {min(w):.2g}..{max(w):.2g}, worst MC miss {z:.2f} se, theta checks {rep.verdicts['theta_halving']}/{rep.verdicts['theta_factor_two']}, {dt:.1f} s",
    )


def test_criterion_7_oracles():
    t0 = time.perf_counter()
    rep = oracle_suite(tol=1e-8, rn_tol=1e-12)
    dt = time.perf_counter() - t0
    mass = max(r.gap for r in rep.rows if r.check_name.startswith("mass_"))
    rn = float(np.max(rep.gaps("rn_identity")))
    record(7, rep.passed and dt < 5, f"mass error {mass:.1g}, RN identity {rn:.1g}, f(0) exact {rep.verdicts['f_at_zero']}, {dt:.2f} s")
