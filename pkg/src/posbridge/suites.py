"""Check suites that combine the module-level diagnostics into reports.

Each suite returns a :class:`DiagnosticReport` whose verdicts decide the CLI
exit status; the acceptance tests call the same functions.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Sequence

import numpy as np
from scipy import stats

from .brownian import (
    G0,
    bessel3_marginal,
    excursion_marginal,
    f_eps_t,
    normalization_checks,
)
from .errors import ZeroBridgeProbability
from .fluctuation import (
    alili_doney_residual,
    duality_profile,
    harmonic_residual,
    renewal_for,
    renewal_mass_residual,
    tail_ratio_sequence,
    zeta,
)
from .invariance import (
    excursion_marginal_fit,
    negative_control_fit,
    rescale_values,
    tightness_diagnostic,
    uniff_gap,
)
from .kernels import killed_walk
from .llt import llt_report
from .report import DiagnosticReport
from .samplers import bridge_pmf_exact, sample_bridges, time_reversal_residual
from .steps import StepLaw, norming
from .stone import (
    dri_theta,
    make_grid,
    mc_killed_density,
    refinement_trace,
)

IDENTITY_TOL = 1e-10


def _max_abs(a, b) -> float:
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)))) if np.size(a) else 0.0


# ---------------------------------------------------------------------------
# exact identities


def shift_residual(law: StepLaw, n: int, x_max: int) -> float:
    """``max |qh_n(x, y) - q_n(x-1, y-1)|`` over ``1 <= x <= x_max + 1`` and the
    whole window in ``y``."""
    top = x_max + n * law.max_up
    strict = weak = None
    for st in killed_walk(law, range(1, x_max + 2), n, top + 1, "strict"):
        strict = st
    for st in killed_walk(law, range(0, x_max + 1), n, top, "weak"):
        weak = st
    a = strict.q[:, 1:] * math.exp(strict.log_scale)
    b = weak.q * math.exp(weak.log_scale)
    return _max_abs(a, b)


def identity_suite(
    law: StepLaw,
    n_max: int = 20,
    x_max: int = 20,
    N_max: int = 15,
    cyclic_max: int = 30,
    v_max: int = 200,
    tol: float = IDENTITY_TOL,
) -> DiagnosticReport:
    """Harmonicity, duality, the cyclic excursion identity, the renewal mass
    identity, the shift identity and ``Vhat = (1 - zeta) V``.

    Rows hold the largest residual per horizon; a check passes when every
    residual is at most ``tol``.
    """
    rep = DiagnosticReport(
        "identities",
        config={"law": law.to_dict(), "n_max": n_max, "x_max": x_max, "N_max": N_max, "cyclic_max": cyclic_max, "v_max": v_max, "tol": tol},
    )
    ren = renewal_for(law, "descending", max(v_max, x_max + N_max * law.max_up) + 1)
    for strictness in ("weak", "strict"):
        xs = range(0 if strictness == "weak" else 1, x_max + 1)
        for N in range(1, N_max + 1):
            r = max(harmonic_residual(law, ren, x, N, strictness) for x in xs)
            rep.add(f"harmonic_{strictness}", N, r, 0.0)
    for n in range(1, n_max + 1):
        worst = 0.0
        for sign in (1, -1):
            for strictness in ("strict", "weak"):
                lhs, rhs = duality_profile(law, n, sign, strictness)
                m = min(len(lhs), len(rhs))
                worst = max(worst, _max_abs(lhs[1:m], rhs[1:m]))
        rep.add("duality", n, worst, 0.0)
    for n in range(1, cyclic_max + 1):
        rep.add("cyclic_excursion", n, alili_doney_residual(law, n), 0.0)
        rep.add("renewal_mass", n, renewal_mass_residual(law, n), 0.0)
    for n in range(1, N_max + 1):
        rep.add("shift", n, shift_residual(law, n, x_max), 0.0)
    z = zeta(law, None)[0]
    vg = _max_abs(ren.Vhat[: v_max + 1], (1 - z) * ren.V[: v_max + 1])
    rep.add("vhat_vs_v", v_max, vg, 0.0)
    for c in rep.checks():
        rep.verdicts[c] = bool(np.all(rep.gaps(c) <= tol))
    rep.notes.append(f"zeta = {z!r}")
    return rep


# ---------------------------------------------------------------------------
# bridge sampler


def chi_square_bridge(
    law: StepLaw, x: int, y: int, N: int, n_samples: int, seed=0, strictness="weak", min_expected: float = 5.0
) -> tuple[float, float, int]:
    """Chi-square of sampled full paths against the enumerated bridge pmf.

    Paths whose expected count is below ``min_expected`` are pooled into one
    cell.  Returns ``(statistic, p_value, degrees_of_freedom)``.
    """
    pmf = bridge_pmf_exact(law, x, y, N, strictness)
    batch = sample_bridges(law, x, y, N, n_samples, strictness, seed)
    counts = Counter(map(tuple, batch.values.astype(int).tolist()))
    unknown = sum(c for k, c in counts.items() if k not in pmf)
    if unknown:
        # a path outside the support is a hard failure
        return math.inf, 0.0, 0
    keys = sorted(pmf)
    exp = np.array([float(pmf[k]) for k in keys]) * n_samples
    obs = np.array([counts.get(k, 0) for k in keys], dtype=float)
    small = exp < min_expected
    if small.any():
        exp = np.append(exp[~small], exp[small].sum())
        obs = np.append(obs[~small], obs[small].sum())
    exp *= obs.sum() / exp.sum()
    res = stats.chisquare(obs, exp)
    return float(res.statistic), float(res.pvalue), len(obs) - 1


def sampler_suite(
    law: StepLaw,
    N: int = 8,
    x: int = 0,
    y: int = 0,
    n_samples: int = 100_000,
    seed=0,
    alpha: float = 0.001,
    reversal_law: StepLaw | None = None,
    reversal_N: int = 8,
    tol: float = 1e-12,
) -> DiagnosticReport:
    rep = DiagnosticReport(
        "sampler",
        config={"law": law.to_dict(), "N": N, "x": x, "y": y, "n_samples": n_samples, "seed": seed, "alpha": alpha},
    )
    for strictness in ("weak", "strict"):
        stat, p, dof = chi_square_bridge(law, x, y, N, n_samples, seed, strictness)
        rep.add(f"chi2_pvalue_{strictness}", N, p, alpha, p - alpha)
        rep.verdicts[f"chi2_{strictness}"] = bool(p > alpha)
        rep.notes.append(f"chi2 {strictness}: statistic {stat:.4g} on {dof} dof")
    rl = reversal_law or law
    rep.config["reversal_law"] = rl.to_dict()
    worst = 0.0
    for n in range(1, reversal_N + 1):
        for strictness in ("weak", "strict"):
            for a, b in ((0, 0), (0, 2), (1, 3), (2, 1)):
                try:
                    r = time_reversal_residual(rl, a, b, n, strictness)
                except ZeroBridgeProbability:  # no admissible path for this (a, b, n)
                    continue
                worst = max(worst, r)
        rep.add("time_reversal_tv", n, worst, 0.0)
    rep.verdicts["time_reversal"] = bool(np.all(rep.gaps("time_reversal_tv") <= tol))
    return rep


# ---------------------------------------------------------------------------
# local limit theorems and the tail ratio


def llt_suite(
    law: StepLaw,
    n_list: Sequence[int] = (5000, 10000),
    small_n_list: Sequence[int] = (10000, 20000),
    tail_n_list: Sequence[int] = (1000, 5000, 10000),
    c: float = 1.0,
    tolerances: dict | None = None,
) -> DiagnosticReport:
    tol = {"tail_ratio": 0.05}
    tol.update(tolerances or {})
    rep = llt_report(law, n_list, small_n_list, 0, c, tol)
    tr = tail_ratio_sequence(law, tail_n_list)
    for n, r in zip(tail_n_list, tr):
        rep.add("tail_ratio", n, r, 1.0)
    g = rep.gaps("tail_ratio")
    rep.verdicts["tail_ratio"] = bool(g[-1] < tol["tail_ratio"] and np.all(np.diff(g) <= 0))
    rep.config["tail_n_list"] = list(tail_n_list)
    rep.config["tolerances"] = dict(rep.config.get("tolerances", {}), **tol)
    return rep


# ---------------------------------------------------------------------------
# Stone sandwich


DEFAULT_PROBES = ((0.5, 0.5), (0.0, 1.0), (1.0, 2.0), (2.0, 0.25), (3.0, 4.0))


def stone_suite(
    kind: str = "gaussian",
    n: int = 6,
    kbar: int = 2,
    probes: Sequence[tuple[float, float]] = DEFAULT_PROBES,
    delta0: float = 0.25,
    halvings: int = 3,
    h: float = 1 / 256,
    L: float = 12.0,
    mc_paths: int = 1_000_000,
    mc_half_width: float = 0.05,
    seed=0,
    alpha_prime: float = 1.5,
    theta_deltas: Sequence[float] = (0.8, 0.4, 0.2, 0.1, 0.05),
    theta_pairs: int = 12,
):
    """Sandwich, refinement, Monte Carlo and Riemann-sum checks.

    Returns ``(report, traces, mc)`` where ``traces`` are the refinement
    traces per probe and ``mc`` the Monte Carlo ``(estimate, se)`` per probe.
    """
    grid = make_grid(kind, h, L)
    rep = DiagnosticReport(
        "stone",
        config={
            "kind": kind, "n": n, "kbar": kbar, "probes": [list(p) for p in probes], "delta0": delta0,
            "halvings": halvings, "h": h, "L": L, "mc_paths": mc_paths, "mc_half_width": mc_half_width,
            "seed": seed, "alpha_prime": alpha_prime,
        },
    )
    ordered = monotone = inside = True
    traces, mcs = [], []
    for i, (x, y) in enumerate(probes):
        tr = refinement_trace(grid, n, kbar, x, y, delta0, halvings)
        traces.append(tr)
        for d, s, S in zip(tr.deltas, tr.s, tr.S):
            rep.add(f"width_probe{i}", d, S - s, 0.0)
            ordered &= s <= S
        monotone &= tr.monotone()
        est, se = mc_killed_density(grid.density, n, x, y, mc_paths, mc_half_width, seed)
        mcs.append((est, se))
        s, S = tr.s[-1], tr.S[-1]
        # distance from the bracket in units of the MC standard error
        miss = max(s - est, est - S, 0.0)
        rep.add(f"mc_probe{i}", mc_paths, est, 0.5 * (s + S), miss / se if se > 0 else (0.0 if miss == 0 else math.inf))
        inside &= est + 3 * se >= s and est - 3 * se <= S
    rep.verdicts["s_le_S"] = bool(ordered)
    rep.verdicts["width_monotone"] = bool(monotone)
    rep.verdicts["mc_inside"] = bool(inside)

    ok_half = True
    for d in theta_deltas:
        big = dri_theta(grid, kbar, alpha_prime, d)
        small = dri_theta(grid, kbar, alpha_prime, d / 2)
        rep.add("theta", d, big.value, big.upper, big.tail_bound)
        # rigorous: upper bound at d/2 below the partial (lower) value at d
        ok_half &= small.upper <= big.value
    ok_two = True
    for dp in theta_deltas:
        ref = dri_theta(grid, kbar, alpha_prime, dp).value
        for d in np.linspace(dp / 2, dp, theta_pairs + 2)[1:-1]:
            t = dri_theta(grid, kbar, alpha_prime, float(d))
            rep.add("theta_ratio", float(d), t.upper / ref, 2.0, max(t.upper / ref - 2.0, 0.0))
            ok_two &= t.upper <= 2 * ref
    rep.verdicts["theta_halving"] = bool(ok_half)
    rep.verdicts["theta_factor_two"] = bool(ok_two)
    return rep, traces, mcs


# ---------------------------------------------------------------------------
# invariance principle


def invariance_suite(
    law: StepLaw,
    N: int = 4096,
    eps: float = 0.5,
    n_samples: int = 100_000,
    seed=0,
    ks_threshold: float = 0.02,
    control_threshold: float = 0.1,
    uniff_N: Sequence[int] = (256, 1024, 4096),
    uniff_eps: float = 0.25,
    uniff_rel: float = 0.05,
    strictness="strict",
    tight_N: int = 1024,
    tight_samples: int = 2000,
    deltas: Sequence[float] = (0.2, 0.1, 0.05, 0.025, 0.0125, 0.00625),
    eta: float = 0.25,
    workers: int = 1,
):
    """Marginal fit, negative control, density convergence and tightness.

    Returns ``(report, samples, control)``: the rescaled marginal samples and
    the free-bridge control, for plotting.
    """
    from .invariance import bridge_marginal_samples, unconditioned_bridge_samples

    rep = DiagnosticReport(
        "invariance",
        config={
            "law": law.to_dict(), "N": N, "eps": eps, "n_samples": n_samples, "seed": seed,
            "ks_threshold": ks_threshold, "control_threshold": control_threshold, "uniff_N": list(uniff_N),
            "uniff_eps": uniff_eps, "strictness": strictness, "tight_N": tight_N, "tight_samples": tight_samples,
            "deltas": list(deltas), "eta": eta,
        },
    )
    samples = bridge_marginal_samples(law, N, eps, n_samples, seed, strictness, workers=workers)
    fit = excursion_marginal_fit(law, N, eps, n_samples, seed, ks_threshold, strictness, samples)
    rep.add("ks_excursion", N, fit.value, ks_threshold, fit.value)
    rep.verdicts["ks_excursion"] = fit.verdict
    control = unconditioned_bridge_samples(law, N, eps, n_samples, seed)
    neg = negative_control_fit(law, N, eps, n_samples, seed, control_threshold)
    rep.add("ks_free_bridge", N, neg.value, control_threshold, neg.value)
    rep.verdicts["negative_control"] = neg.verdict

    gaps = uniff_gap(law, None, uniff_N, uniff_eps)
    bound = uniff_rel * float(f_eps_t(0.0, uniff_eps))
    for n_, g in gaps:
        rep.add("uniff_gap", n_, g, 0.0)
    gv = [g for _, g in gaps]
    rep.verdicts["uniff_gap"] = bool(gv[-1] < bound and all(b <= a for a, b in zip(gv, gv[1:])))
    rep.notes.append(f"uniff bound {bound:.6g}")

    # tightness near the endpoint; reported without a verdict
    batch = sample_bridges(law, 0, 0, tight_N, tight_samples, strictness, seed, workers=workers)
    t = np.linspace(0, 1, 257)
    X = rescale_values(batch.values, norming(law, None, tight_N), t)
    for d, p in tightness_diagnostic(X, deltas, eta, t):
        rep.add("tightness", d, p, 0.0)
    return rep, samples, control


# ---------------------------------------------------------------------------
# Brownian oracles


def oracle_suite(eps_list: Sequence[float] = (0.1, 0.25, 0.5, 0.75), tol: float = 1e-8, rn_tol: float = 1e-12) -> DiagnosticReport:
    rep = DiagnosticReport("oracles", config={"eps_list": list(eps_list), "tol": tol, "rn_tol": rn_tol})
    for e in eps_list:
        for k, v in normalization_checks(e).items():
            rep.add(f"mass_{k}", e, v, 1.0)
    rep.verdicts["normalization"] = bool(all(r.gap <= tol for r in rep.rows))
    worst = 0.0
    u = np.linspace(0.0, 4.0, 100)
    for e in eps_list:
        lhs = f_eps_t(u, e) * bessel3_marginal(u, 1 - e)
        # compare densities relative to the peak of the marginal
        g = _max_abs(lhs, excursion_marginal(u, e))
        rep.add("rn_identity", e, g, 0.0)
        worst = max(worst, g)
    rep.verdicts["rn_identity"] = bool(worst <= rn_tol)
    ok = True
    for a in (1.5, 2.0):
        for t, e in ((1.0, 0.5), (2.0, 0.25), (1.0, 0.1)):
            v = f_eps_t(0.0, e, t, a)
            want = (t / e) ** (1 + 1 / a)
            rep.add(f"f_at_zero_alpha{a:g}", t / e, v, want)
            ok &= v == want
    rep.verdicts["f_at_zero"] = bool(ok)
    rep.notes.append(f"g(0) = {G0!r}")
    return rep
