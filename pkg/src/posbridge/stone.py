"""Riemann sandwich bounds for the killed kernel of a walk with a density.

Everything is an enclosure.  Space ``[0, L)`` is cut into cells of width
``h``.  For a symmetric unimodal step density the cell-to-cell transfer

    K_{ij}(u) = P(X in [jh - u, (j+1)h - u]),   u in [ih, (i+1)h]

depends on ``m = j - i`` and is monotone in ``u`` unless ``m = 0``, so its
minimum and maximum over the source cell are explicit.  Propagating lower
masses with the minimum and upper masses with the maximum (plus what escaped
above ``L``) gives rigorous cell bounds for the killed walk; the same kernel,
read backwards, bounds ``f_k^+(u, y)`` over each cell in ``u``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import ndtr

from .errors import GridTooCoarse, NonFinite


def _as_float(v):
    return float(v) if np.ndim(v) == 0 else v


class StepDensity:
    """Symmetric unimodal step density: ``gaussian`` (unit variance) or
    ``pareto`` with ``f(x) = (beta/2) (1 + |x|)^{-(beta+1)}``."""

    def __init__(self, kind: str = "gaussian", beta: float = 3.0):
        if kind not in ("gaussian", "pareto"):
            raise ValueError(f"unknown density {kind!r}")
        if kind == "pareto" and beta <= 2:
            raise ValueError("beta must exceed 2 for a finite variance")
        self.kind = kind
        self.beta = beta

    def pdf(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return _as_float(np.exp(-0.5 * x * x) / math.sqrt(2 * math.pi))
        return _as_float(0.5 * self.beta * (1 + np.abs(x)) ** (-(self.beta + 1)))

    def sf(self, x):
        """``P(X > x)``, accurate in the right tail."""
        x = np.asarray(x, dtype=float)
        if self.kind == "gaussian":
            return _as_float(ndtr(-x))
        t = 0.5 * (1 + np.abs(x)) ** (-self.beta)
        return _as_float(np.where(x >= 0, t, 1 - t))

    def cdf(self, x):
        return self.sf(-np.asarray(x, dtype=float))

    def mass(self, a, b):
        """``P(a <= X <= b)`` without cancellation in either tail."""
        a = np.asarray(a, dtype=float)
        b = np.asarray(b, dtype=float)
        right = np.asarray(self.sf(a)) - np.asarray(self.sf(b))
        left = np.asarray(self.cdf(b)) - np.asarray(self.cdf(a))
        return _as_float(np.maximum(np.where(a >= 0, right, left), 0.0))

    @property
    def f_max(self) -> float:
        return float(self.pdf(0.0))

    @property
    def variance(self) -> float:
        if self.kind == "gaussian":
            return 1.0
        b = self.beta
        return 2.0 / ((b - 1) * (b - 2))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        if self.kind == "gaussian":
            return rng.standard_normal(size)
        mag = rng.random(size) ** (-1.0 / self.beta) - 1.0
        return np.where(rng.random(size) < 0.5, -mag, mag)


@dataclass
class DensityGrid:
    """Cell discretisation of ``[0, L)`` with width ``h`` and cached
    forward/backward enclosures."""

    density: StepDensity
    h: float = 1 / 256
    L: float = 12.0
    max_ratio: float = 1.5
    _fwd: dict = field(default_factory=dict, repr=False)
    _bwd: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.M = int(round(self.L / self.h))
        if self.M < 2:
            raise GridTooCoarse("fewer than two cells")
        self.L = self.M * self.h
        M, h = self.M, self.h
        k = np.arange(-M - 1, M + 1)
        Kd = np.asarray(self.density.mass(k * h, (k + 1) * h))  # K(kh)
        K = lambda j: Kd[j + M + 1]
        m = np.arange(-M, M + 1)
        self.Kmax = np.where(m <= -1, K(m), K(m - 1))
        self.Kmin = np.where(m <= -1, K(m - 1), K(m))
        self.Kmax[M] = float(self.density.mass(-h / 2, h / 2))
        self.Kmin[M] = min(K(0), K(-1))
        self.K_peak = self.Kmax[M]
        self.edges = np.arange(M + 1) * h

    # grid bookkeeping
    def total_mass_check(self) -> float:
        """Mass of the transfer kernel on ``[-L, L]`` plus the two tails."""
        inner = math.fsum(np.asarray(self.density.mass(-self.L, self.L)).ravel())
        return inner + 2 * float(self.density.sf(self.L))

    def _conv(self, v: np.ndarray, K: np.ndarray) -> np.ndarray:
        return np.convolve(v, K)[self.M : 2 * self.M]

    def _escape(self, hi: np.ndarray) -> float:
        # mass leaving [0, L) upward from cell i is at most P(X >= L - (i+1)h)
        p = np.asarray(self.density.sf(self.L - self.edges[1:]))
        return float(np.dot(hi, p))

    def forward(self, x: float, steps: int):
        """Bounds ``(lo, hi, esc)`` on ``P_x(S_1..S_m > 0, S_m in cell)`` for
        ``m = steps``; ``esc`` bounds the mass above ``L``."""
        key = (float(x), int(steps))
        if key in self._fwd:
            return self._fwd[key]
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if steps == 1:
            p = np.asarray(self.density.mass(self.edges[:-1] - x, self.edges[1:] - x))
            out = (p.copy(), p.copy(), float(self.density.sf(self.L - x)))
        else:
            lo, hi, esc = self.forward(x, steps - 1)
            nlo = self._conv(lo, self.Kmin)
            nhi = self._conv(hi, self.Kmax) + esc * self.K_peak
            out = (nlo, nhi, esc + self._escape(hi))
        self._fwd[key] = out
        return out

    def backward(self, y: float, steps: int):
        """Cell bounds ``(glo, ghi)`` of ``u -> f_k^+(u, y)`` on ``[0, L)``."""
        key = (float(y), int(steps))
        if key in self._bwd:
            return self._bwd[key]
        if steps < 1:
            raise ValueError("steps must be >= 1")
        if steps == 1:
            a = y - self.edges[:-1]
            b = y - self.edges[1:]
            fa = np.asarray(self.density.pdf(a))
            fb = np.asarray(self.density.pdf(b))
            glo = np.minimum(fa, fb)
            ghi = np.maximum(fa, fb)
            inside = (self.edges[:-1] <= y) & (y <= self.edges[1:])
            ghi[inside] = self.density.f_max
            out = (glo, ghi)
        else:
            glo, ghi = self.backward(y, steps - 1)
            tail = self.density.f_max * np.asarray(self.density.sf(self.L - self.edges[1:]))
            out = (self._conv(glo, self.Kmin), self._conv(ghi, self.Kmax) + tail)
        self._bwd[key] = out
        return out

    def _check_ratio(self, lo: float, hi: float, what: str) -> None:
        if hi > 1e-10 and (lo <= 0 or hi / lo > self.max_ratio):
            raise GridTooCoarse(f"{what}: enclosure [{lo:.3g}, {hi:.3g}] too wide for h={self.h}")


def make_grid(kind: str = "gaussian", h: float = 1 / 256, L: float = 12.0, beta: float = 3.0, max_ratio: float = 1.5) -> DensityGrid:
    return DensityGrid(StepDensity(kind, beta), h, L, max_ratio)


def interval_kernel(grid: DensityGrid, n: int, x: float, y: float, delta: float) -> tuple[float, float]:
    """Enclosure of ``P_x(S_1 > 0, ..., S_n > 0, S_n in [y, y + delta))``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    if delta < 0:
        raise ValueError("delta must be non-negative")
    if delta == 0:
        return 0.0, 0.0
    y = max(y, 0.0)
    d = grid.density
    if n == 1:
        v = float(d.mass(y - x, y + delta - x))
        return v, v
    lo, hi, esc = grid.forward(x, n - 1)
    a, b = grid.edges[:-1], grid.edges[1:]
    # u -> P(X in [y-u, y+delta-u]) is unimodal with peak at u = y + delta/2
    pa = np.asarray(d.mass(y - a, y + delta - a))
    pb = np.asarray(d.mass(y - b, y + delta - b))
    peak_u = y + delta / 2
    p_peak = float(d.mass(-delta / 2, delta / 2))
    wmin = np.minimum(pa, pb)
    wmax = np.maximum(pa, pb)
    inside = (a <= peak_u) & (peak_u <= b)
    wmax[inside] = p_peak
    lower = math.fsum(lo * wmin)
    upper = math.fsum(hi * wmax) + esc * p_peak
    grid._check_ratio(lower, upper, "interval_kernel")
    return lower, upper


def _cells_per(grid: DensityGrid, delta: float) -> int:
    r = delta / grid.h
    k = int(round(r))
    if k < 1 or abs(r - k) > 1e-9:
        raise GridTooCoarse(f"delta={delta} is not a positive multiple of h={grid.h}")
    if grid.M % k:
        raise GridTooCoarse(f"delta={delta} does not tile [0, L)")
    return k


def sandwich_bounds(grid: DensityGrid, n: int, kbar: int, x: float, y: float, delta: float) -> tuple[float, float]:
    """Lower bound on ``s_{n,delta}^+(x, y)`` and upper bound on
    ``S_{n,delta}^+(x, y)``; together they enclose the density
    ``f_n^+(x, y)``.

    ``delta`` must be a multiple of ``h`` that tiles ``[0, L)``.
    """
    if not (n > kbar >= 1):
        raise ValueError("need n > kbar >= 1")
    k = _cells_per(grid, delta)
    lo, hi, esc = grid.forward(x, n - kbar)
    glo, ghi = grid.backward(y, kbar)
    Flo = lo.reshape(-1, k).sum(axis=1)
    Fhi = hi.reshape(-1, k).sum(axis=1)
    ginf = glo.reshape(-1, k).min(axis=1)
    gsup = ghi.reshape(-1, k).max(axis=1)
    s = math.fsum(Flo * ginf)
    S = math.fsum(Fhi * gsup) + esc * grid.density.f_max
    return s, S


@dataclass
class RefinementTrace:
    n: int
    kbar: int
    x: float
    y: float
    deltas: list[float]
    s: list[float]
    S: list[float]

    @property
    def widths(self) -> list[float]:
        return [b - a for a, b in zip(self.s, self.S)]

    def monotone(self) -> bool:
        w = self.widths
        return all(b <= a for a, b in zip(w, w[1:]))

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["delta", "s", "S", "width"])
            for d, a, b in zip(self.deltas, self.s, self.S):
                w.writerow([d, repr(a), repr(b), repr(b - a)])


def refinement_trace(grid: DensityGrid, n: int, kbar: int, x: float, y: float, delta0: float, halvings: int = 3) -> RefinementTrace:
    ds = [delta0 / 2**i for i in range(halvings + 1)]
    sS = [sandwich_bounds(grid, n, kbar, x, y, d) for d in ds]
    return RefinementTrace(n, kbar, x, y, ds, [a for a, _ in sS], [b for _, b in sS])


def refine_until(kind: str, n: int, kbar: int, x: float, y: float, delta: float,
                 h0: float = 1 / 64, ratio: float = 1.05, h_min: float = 1 / 1024, L: float = 12.0):
    """Halve ``h`` (and ``delta`` with it when needed) until ``S/s < ratio``
    or ``h`` reaches ``h_min``.  Returns ``(h, delta, s, S)`` of the last
    attempt."""
    h = h0
    while True:
        d = max(delta, h)
        s, S = sandwich_bounds(make_grid(kind, h, L), n, kbar, x, y, d)
        if (s > 0 and S / s < ratio) or h / 2 < h_min:
            return h, d, s, S
        h /= 2
        delta = min(delta, d / 2)


# ---------------------------------------------------------------------------
# direct Riemann integrability


@dataclass
class ThetaResult:
    delta: float
    value: float  # partial upper Riemann sum over [-W, W)
    W: float
    tail_bound: float  # bound on the terms with |w| >= W

    @property
    def upper(self) -> float:
        return self.value + self.tail_bound


def _fk(density: StepDensity, kbar: int):
    """``(f_kbar, critical points of (1+|u|)^a f_kbar, tail integral)``."""
    if density.kind == "gaussian":
        var = float(kbar)

        def f(u):
            u = np.asarray(u, dtype=float)
            return np.exp(-u * u / (2 * var)) / math.sqrt(2 * math.pi * var)

        return f, var
    if kbar != 1:
        raise NotImplementedError("closed-form f_kbar for the Pareto density only exists for kbar = 1")
    return density.pdf, None


def _phi_sup(density: StepDensity, kbar: int, ap: float, left: np.ndarray, delta: float) -> np.ndarray:
    f, var = _fk(density, kbar)
    phi = lambda u: (1 + np.abs(u)) ** ap * np.asarray(f(u))
    right = left + delta
    sup = np.maximum(phi(left), phi(right))
    crit = [0.0]
    if density.kind == "gaussian":
        # d/du log phi = ap/(1+u) - u/var vanishes at u*
        us = (-1 + math.sqrt(1 + 4 * ap * var)) / 2
        crit += [us, -us]
    for c in crit:
        inside = (left <= c) & (c <= right)
        sup = np.where(inside, np.maximum(sup, float(phi(c))), sup)
    return sup


def dri_theta(density: StepDensity | DensityGrid, kbar: int, alpha_prime: float, delta: float, W: float | None = None) -> ThetaResult:
    """Upper Riemann sum ``sum_w delta * sup_{[w, w+delta)} (1+|u|)^a f_kbar(u)``.

    The sum runs over cells inside ``[-W, W)`` with ``W`` rounded up to a
    multiple of ``delta``; beyond it ``phi`` is decreasing and the remainder
    is bounded by ``2 (delta phi(W) + int_W^inf phi)``.
    """
    if isinstance(density, DensityGrid):
        density = density.density
    if delta <= 0:
        raise ValueError("delta must be positive")
    if alpha_prime <= 0:
        raise ValueError("alpha_prime must be positive")
    f, var = _fk(density, kbar)
    if W is None:
        W = 40.0 * math.sqrt(kbar) if density.kind == "gaussian" else 1e4
    ncell = int(math.ceil(W / delta))
    W = ncell * delta
    left = np.arange(-ncell, ncell) * delta
    sup = _phi_sup(density, kbar, alpha_prime, left, delta)
    value = math.fsum((delta * sup).tolist())
    phiW = float((1 + W) ** alpha_prime * f(W))
    if density.kind == "pareto":
        b = density.beta
        if alpha_prime >= b:
            raise NonFinite("alpha_prime >= beta: the Riemann sum diverges")
        integral = 0.5 * b * (1 + W) ** (alpha_prime - b) / (b - alpha_prime)
    else:
        integral = integrate.quad(lambda u: (1 + u) ** alpha_prime * float(f(u)), W, np.inf)[0]
    tail = 2 * (delta * phiW + integral)
    if not (math.isfinite(value) and math.isfinite(tail)):
        raise NonFinite("Riemann sum is not finite")
    return ThetaResult(delta, value, W, tail)


def dri_tail(density: StepDensity | DensityGrid, kbar: int, alpha_prime: float, delta: float, M: float) -> float:
    """Bound on the part of the upper Riemann sum from cells with ``|w| > M``."""
    if isinstance(density, DensityGrid):
        density = density.density
    th = dri_theta(density, kbar, alpha_prime, delta)
    ncell = int(round(th.W / delta))
    left = np.arange(-ncell, ncell) * delta
    sup = _phi_sup(density, kbar, alpha_prime, left, delta)
    far = np.abs(left) > M
    return math.fsum((delta * sup[far]).tolist()) + th.tail_bound


# ---------------------------------------------------------------------------
# Monte Carlo oracle


def mc_killed_density(density: StepDensity, n: int, x: float, y: float, n_paths: int, half_width: float, seed=0) -> tuple[float, float]:
    """Box-kernel estimate of ``f_n^+(x, y)`` and its standard error."""
    from .samplers import make_rng

    rng = make_rng(seed)
    hits = 0
    chunk = 250_000
    done = 0
    while done < n_paths:
        m = min(chunk, n_paths - done)
        s = np.full(m, float(x))
        alive = np.ones(m, dtype=bool)
        for _ in range(n):
            s += density.sample(rng, m)
            alive &= s > 0
        hits += int(np.count_nonzero(alive & (np.abs(s - y) < half_width)))
        done += m
    p = hits / n_paths
    scale = 1.0 / (2 * half_width)
    return p * scale, math.sqrt(p * (1 - p) / n_paths) * scale


def mc_interval_kernel(density: StepDensity, n: int, x: float, y: float, delta: float, n_paths: int, seed=0) -> tuple[float, float]:
    est, se = mc_killed_density(density, n, x, y + delta / 2, n_paths, delta / 2, seed)
    return est * delta, se * delta
