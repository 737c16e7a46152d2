"""Desk-scale checks of the invariance principle for positive bridges.

The rescaled bridge from 0 to 0 converges to the normalised excursion.  The
checks are: the one-dimensional marginal at time ``1 - eps`` against its
closed form (a Maxwell law), the convergence of the discrete Radon-Nikodym
density against the Bessel(3) reference, and a modulus-of-continuity tail
near the endpoint.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy import stats

from .brownian import excursion_cdf, f_eps_t
from .errors import ZeroBridgeProbability
from .fluctuation import RenewalTable, renewal_for
from .kernels import Strictness, killed_walk, transition_vector
from .report import dump_json, version_stamp
from .samplers import BridgeBatch, PathSample, make_rng, sample_bridges
from .steps import StepLaw, norming

# guards floor(z * a_N) against z = k / a_N landing just below k
_FLOOR_EPS = 1e-9


@dataclass
class RescaledPath:
    original: PathSample | None
    t_grid: np.ndarray
    values: np.ndarray
    mode: str


def rescale_values(S: np.ndarray, a_N: float, t_grid: np.ndarray, mode: str = "cadlag") -> np.ndarray:
    """Rescale paths (rows of ``S``, times ``0..N``) onto ``t_grid``."""
    if a_N <= 0:
        raise ValueError("a_N must be positive")
    S = np.atleast_2d(np.asarray(S, dtype=float))
    N = S.shape[1] - 1
    t = np.asarray(t_grid, dtype=float)
    if mode == "cadlag":
        idx = np.floor(N * t + _FLOOR_EPS).astype(int)
        return S[:, np.clip(idx, 0, N)] / a_N
    if mode == "linear":
        u = N * t
        k = np.clip(np.floor(u).astype(int), 0, max(N - 1, 0))
        frac = u - k
        nxt = np.minimum(k + 1, N)
        return (S[:, k] * (1 - frac) + S[:, nxt] * frac) / a_N
    raise ValueError("mode must be 'cadlag' or 'linear'")


def rescale(path: PathSample, a_N: float, mode: str = "cadlag", t_grid: Sequence[float] | None = None) -> RescaledPath:
    N = len(path.values) - 1
    t = np.arange(N + 1) / N if t_grid is None else np.asarray(t_grid, dtype=float)
    vals = rescale_values(path.values, a_N, t, mode)[0]
    return RescaledPath(path, t, vals, mode)


# ---------------------------------------------------------------------------
# Radon-Nikodym density


@dataclass
class RNDensity:
    """``f^{(N)}_eps(z)`` for a fixed ``(N, eps, x_N, y_N)``.

    ``f(z) = underline V(x) / qh_N(x, y) * qh_{eps(N)}(k, y) / underline V(k)``
    with ``k = floor(z a_N)`` and ``eps(N) = N - floor((1 - eps) N)``.
    """

    N: int
    eps: float
    x: int
    y: int
    a_N: float
    m: int
    log_qN: float
    column: np.ndarray  # qh_m(k, y), k = 0..len-1, times exp(-col_scale)
    col_scale: float
    Vunder: np.ndarray

    def __call__(self, z):
        z = np.asarray(z, dtype=float)
        k = np.floor(z * self.a_N + _FLOOR_EPS).astype(int)
        if np.any(k < 0):
            raise ValueError("z must be non-negative")
        if k.size and k.max() >= len(self.column):
            raise ValueError("z beyond tabulated range")
        logv = (
            math.log(self.Vunder[self.x])
            - self.log_qN
            + self.col_scale
            - np.log(self.Vunder[k])
        )
        out = self.column[k] * np.exp(logv)
        return float(out) if out.ndim == 0 else out


def rn_density(law: StepLaw, renewal: RenewalTable | None, N: int, eps: float, x_N: int = 0, y_N: int = 0, z_max: float = 4.0) -> RNDensity:
    if not 0 < eps < 1:
        raise ValueError("eps must lie in (0, 1)")
    a = norming(law, None, N)
    k_max = int(math.floor(z_max * a)) + 1
    if renewal is None or renewal.x_max < max(k_max, x_N):
        renewal = renewal_for(law, "descending", max(k_max, x_N) + 1)
    m = N - int(math.floor((1 - eps) * N))
    # qh_N(x, y) from the forward pass
    top = max(x_N, y_N) + int(math.ceil(12 * a)) + 2 * law.max_up
    last = None
    for st in killed_walk(law, [x_N], N, top, "strict"):
        last = st
    qN = last.q[0, y_N]
    if qN <= 0:
        raise ZeroBridgeProbability(f"qh_N({x_N}, {y_N}) = 0")
    log_qN = math.log(qN) + last.log_scale
    # column k -> qh_m(k, y) is the reflected-law row from y
    a_m = norming(law, None, m)
    col_top = max(k_max, y_N) + int(math.ceil(12 * a_m)) + 2 * (law.max_up + law.max_down)
    last = None
    for st in killed_walk(law.reflected(), [y_N], m, col_top, "strict"):
        last = st
    col = last.q[0, : k_max + 1].copy()
    return RNDensity(N, eps, x_N, y_N, a, m, log_qN, col, last.log_scale, renewal.Vunder[: k_max + 1])


def radon_nikodym_fN(law: StepLaw, renewal: RenewalTable | None, N: int, eps: float, x_N: int, y_N: int, z):
    return rn_density(law, renewal, N, eps, x_N, y_N, float(np.max(z)) + 0.1)(z)


def uniff_gap(
    law: StepLaw,
    renewal: RenewalTable | None,
    N_list: Iterable[int],
    eps: float,
    z_grid: Sequence[float] | None = None,
) -> list[tuple[int, float]]:
    """``sup_z |f^{(N)}_eps(z) - f_eps(z)|`` over ``z_grid`` for each ``N``."""
    z = np.linspace(0.0, 3.0, 121) if z_grid is None else np.asarray(z_grid, dtype=float)
    target = f_eps_t(z, eps, 1.0)
    out = []
    for N in N_list:
        f = rn_density(law, renewal, int(N), eps, 0, 0, float(z.max()) + 0.1)
        out.append((int(N), float(np.max(np.abs(f(z) - target)))))
    return out


# ---------------------------------------------------------------------------
# marginal fit


@dataclass
class FitReport:
    statistic: str
    value: float
    threshold: float
    n_samples: int
    seed: object
    passes_if: str = "below"  # or "above" for negative controls
    config: dict = field(default_factory=dict)

    @property
    def verdict(self) -> bool:
        return self.value < self.threshold if self.passes_if == "below" else self.value > self.threshold

    def to_dict(self) -> dict:
        d = dict(self.config)
        d.update(
            statistic=self.statistic,
            value=self.value,
            threshold=self.threshold,
            n_samples=self.n_samples,
            seed=self.seed,
            passes_if=self.passes_if,
            verdict=self.verdict,
            stamp=version_stamp(),
        )
        return d

    def to_json(self, path) -> None:
        dump_json(self.to_dict(), path)


def marginal_time(N: int, eps: float) -> int:
    return int(math.floor((1 - eps) * N + _FLOOR_EPS))


def bridge_marginal_samples(
    law: StepLaw, N: int, eps: float, n_samples: int, seed=0, strictness: Strictness = "strict", batch: BridgeBatch | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Rescaled positive-bridge values ``S_{floor((1-eps)N)} / a_N``."""
    m = marginal_time(N, eps)
    if batch is None:
        batch = sample_bridges(law, 0, 0, N, n_samples, strictness, seed, record=[m], workers=workers)
    return batch.column(m) / norming(law, None, N)


def unconditioned_bridge_samples(law: StepLaw, N: int, eps: float, n_samples: int, seed=0) -> np.ndarray:
    """Exact marginal of the free bridge from 0 to 0 at the same time."""
    m = marginal_time(N, eps)
    pos1, p1, _ = transition_vector(law, m)
    _, p2, _ = transition_vector(law, N - m)
    w = np.array([p1[z] * p2.get(-z, 0.0) for z in pos1.tolist()])
    w /= w.sum()
    rng = make_rng(seed)
    return rng.choice(pos1, size=n_samples, p=w) / norming(law, None, N)


def ks_to_excursion(samples: np.ndarray, eps: float) -> float:
    return float(stats.kstest(samples, lambda u: excursion_cdf(u, eps)).statistic)


def excursion_marginal_fit(
    law: StepLaw,
    N: int,
    eps: float,
    n_samples: int,
    seed=0,
    threshold: float = 0.02,
    strictness: Strictness = "strict",
    samples: np.ndarray | None = None,
) -> FitReport:
    """KS distance between the rescaled bridge marginal at ``1 - eps`` and
    the excursion marginal.

    The strict bridge is the default: the weak bridge from 0 to 0 is, up to
    the shift by one lattice unit, the strict bridge from 1 to 1, and that
    shift costs an extra ``O(1/a_N)`` in the statistic.
    """
    if samples is None:
        samples = bridge_marginal_samples(law, N, eps, n_samples, seed, strictness)
    ks = ks_to_excursion(samples, eps)
    cfg = {"law": law.to_dict(), "N": N, "eps": eps, "strictness": strictness}
    return FitReport("KS", ks, threshold, len(samples), seed, "below", cfg)


def negative_control_fit(law: StepLaw, N: int, eps: float, n_samples: int, seed=0, threshold: float = 0.1) -> FitReport:
    """Same statistic for the unconditioned bridge; it must be large."""
    ks = ks_to_excursion(unconditioned_bridge_samples(law, N, eps, n_samples, seed), eps)
    cfg = {"law": law.to_dict(), "N": N, "eps": eps, "control": "unconditioned bridge"}
    return FitReport("KS", ks, threshold, n_samples, seed, "above", cfg)


# ---------------------------------------------------------------------------
# tightness


def tightness_diagnostic(
    paths: Sequence[RescaledPath] | np.ndarray,
    delta_list: Sequence[float],
    eta: float = 0.25,
    t_grid: np.ndarray | None = None,
) -> list[tuple[float, float]]:
    """Empirical ``P(sup_{s,t in [1-delta, 1]} |X_t - X_s| > eta)`` per ``delta``.

    ``paths`` is a list of :class:`RescaledPath` or a 2-D array of rescaled
    values on ``t_grid``.
    """
    if isinstance(paths, np.ndarray):
        X = np.atleast_2d(paths)
        if t_grid is None:
            t_grid = np.linspace(0, 1, X.shape[1])
    else:
        if not paths:
            raise ValueError("need at least one path")
        X = np.vstack([p.values for p in paths])
        t_grid = paths[0].t_grid
    t = np.asarray(t_grid, dtype=float)
    out = []
    for d in delta_list:
        sel = t >= 1 - d - 1e-12
        w = X[:, sel]
        osc = w.max(axis=1) - w.min(axis=1)
        out.append((float(d), float(np.mean(osc > eta))))
    return out


def marginal_csv(samples: np.ndarray, path) -> None:
    np.savetxt(path, samples, delimiter=",", header="value", comments="", fmt="%.12g")
