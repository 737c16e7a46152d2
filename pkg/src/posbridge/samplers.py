"""Exact samplers for conditioned walks and small-N enumeration oracles.

Bridges of the walk killed below zero are sampled forward with a backward
table ``h_m(z) = q_{N-m}(z, y)`` (or its strict version).  The one-step law

    P(S_{m+1} = z' | S_m = z) = p(z' - z) 1{z' allowed} h_{m+1}(z') / h_m(z)

is renormalised at every step, so each table row may carry its own scale.
The table is a column of the kernel, obtained as a row of the reflected-law
kernel: ``q_k(z, y)`` for ``p`` equals ``q_k(y, z)`` for ``-X``.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np

from .errors import ExplosionGuard, RenewalRangeExceeded, ZeroBridgeProbability
from .fluctuation import RenewalTable
from .kernels import Strictness, floor_of, killed_walk, moments
from .steps import StepLaw

MAX_ENUMERATED_PATHS = 10**7
_CHUNK = 50000


def make_rng(seed) -> np.random.Generator:
    """Counter-based generator; ``seed`` may be an int or a SeedSequence."""
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(ss))


def _streams(seed, n_streams: int) -> list[np.random.Generator]:
    return [make_rng(s) for s in np.random.SeedSequence(seed).spawn(n_streams)]


@dataclass
class PathSample:
    values: np.ndarray
    law_tag: str
    log_weight: float
    strictness: Strictness = "weak"
    seed: object = None

    def check(self, x: int | None = None, y: int | None = None) -> bool:
        """Pathwise check of the constraint encoded in ``law_tag``."""
        v = self.values
        floor = floor_of(self.strictness)
        if self.law_tag == "bridge":
            ok = bool(np.all(v[1:-1] >= floor))
            if y is not None:
                ok &= int(v[-1]) == y
        else:
            ok = bool(np.all(v[1:] >= floor))
        if x is not None:
            ok &= int(v[0]) == x
        return ok


def _check_walk_state(z: np.ndarray, floor: int) -> None:
    if np.any(z < floor):
        raise AssertionError("sampler left the allowed set")


# ---------------------------------------------------------------------------
# h-transform walk


def up_walk_step_law(law: StepLaw, renewal: RenewalTable, z: int, strictness: Strictness = "weak"):
    """One-step law of the walk conditioned to stay non-negative (weak) or
    positive (strict): returns ``(targets, probs, norm_residual)``."""
    h = renewal.V if strictness == "weak" else renewal.Vunder
    floor = floor_of(strictness)
    tg = np.array([z + k for k in law.offsets])
    if tg.max() > renewal.x_max:
        raise RenewalRangeExceeded(f"state {tg.max()} beyond renewal table ({renewal.x_max})")
    w = np.array([p * h[t] if t >= floor else 0.0 for t, p in zip(tg, law.probs)])
    total = math.fsum(w)
    return tg, w / total, abs(total / h[z] - 1.0)


def sample_up_walks(
    law: StepLaw,
    renewal: RenewalTable,
    x: int,
    N: int,
    n_samples: int,
    strictness: Strictness = "weak",
    seed=0,
) -> np.ndarray:
    """``n_samples`` paths ``S_0..S_N`` of the h-transformed walk, as rows."""
    floor = floor_of(strictness)
    if x < 0:
        raise ValueError("x must be >= 0")
    h = renewal.V if strictness == "weak" else renewal.Vunder
    offs = np.array(law.offsets)
    probs = np.array(law.probs)
    rng = make_rng(seed)
    out = np.empty((n_samples, N + 1), dtype=np.int64)
    out[:, 0] = x
    z = np.full(n_samples, x, dtype=np.int64)
    for m in range(N):
        tg = z[:, None] + offs[None, :]
        if tg.max() > renewal.x_max:
            raise RenewalRangeExceeded(f"state {tg.max()} beyond renewal table ({renewal.x_max})")
        w = probs[None, :] * np.where(tg >= floor, h[np.clip(tg, 0, None)], 0.0)
        cw = np.cumsum(w, axis=1)
        u = rng.random(n_samples) * cw[:, -1]
        idx = (cw < u[:, None]).sum(axis=1)
        z = tg[np.arange(n_samples), np.minimum(idx, len(offs) - 1)]
        out[:, m + 1] = z
    return out


def sample_up_walk(
    law: StepLaw, renewal: RenewalTable, x: int, N: int, strictness: Strictness = "weak", rng_seed=0
) -> PathSample:
    path = sample_up_walks(law, renewal, x, N, 1, strictness, rng_seed)[0]
    h = renewal.V if strictness == "weak" else renewal.Vunder
    lw = 0.0
    for a, b in zip(path[:-1], path[1:]):
        lw += math.log(law.prob(int(b - a)) * h[b] / h[a])
    return PathSample(path, "up", lw, strictness, rng_seed)


# ---------------------------------------------------------------------------
# bridges


@dataclass
class BridgeTable:
    """Backward table for bridges of length ``N`` ending at ``y``.

    ``rows[m][i]`` is ``h_m(lo + i) * exp(-log_scale[m])`` on the window
    ``[lo, hi]``; ``h_m`` is the kernel of length ``N - m`` into ``y``.
    """

    law: StepLaw
    N: int
    y: int
    strictness: Strictness
    lo: int
    hi: int
    rows: np.ndarray
    log_scale: np.ndarray
    leak: float

    def log_h(self, m: int, z: int) -> float:
        if not self.lo <= z <= self.hi:
            return -math.inf
        v = self.rows[m, z - self.lo]
        return math.log(v) + self.log_scale[m] if v > 0 else -math.inf

    def log_bridge_prob(self, x: int) -> float:
        """``log q_N(x, y)``."""
        return self.log_h(0, x)


def bridge_transition_table(
    law: StepLaw, N: int, y: int, strictness: Strictness = "weak", z_max: int | None = None
) -> BridgeTable:
    if N < 1:
        raise ValueError("N must be >= 1")
    if y < 0:
        raise ValueError("y must be >= 0")
    if z_max is None:
        sig = math.sqrt(moments(law)[1])
        z_max = y + int(math.ceil(12 * sig * math.sqrt(N))) + 2 * (law.max_up + law.max_down)
        z_max = min(z_max, y + N * law.max_down)
    z_max = max(z_max, y)
    rows = np.zeros((N + 1, z_max + 1))
    scales = np.zeros(N + 1)
    rows[N, y] = 1.0
    leak = 0.0
    # a row of the reflected-law kernel from y is a column of the kernel into y
    for st in killed_walk(law.reflected(), [y], N, z_max, strictness):
        m = N - st.n
        r = st.q[0].copy()
        top = r.max()
        if top > 0:
            rows[m] = r / top
            scales[m] = st.log_scale + math.log(top)
        leak = float(st.leak[0])
    return BridgeTable(law, N, y, strictness, 0, z_max, rows, scales, leak)


@dataclass
class BridgeBatch:
    """Samples of a bridge at the recorded ``times``.

    ``values[i, j]`` is ``S_{times[j]}`` of sample ``i``; ``path_min``,
    ``path_max`` and ``path_mean`` are over the full path ``S_0..S_N``.
    """

    law_tag: str
    strictness: Strictness
    x: int
    y: int
    N: int
    seed: object
    times: np.ndarray
    values: np.ndarray
    log_weight: np.ndarray
    path_min: np.ndarray
    path_max: np.ndarray
    path_mean: np.ndarray
    max_norm_residual: float = 0.0
    config: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return self.values.shape[0]

    def column(self, t: int) -> np.ndarray:
        j = int(np.searchsorted(self.times, t))
        if j >= len(self.times) or self.times[j] != t:
            raise KeyError(f"time {t} was not recorded")
        return self.values[:, j]

    def paths(self) -> list[PathSample]:
        if len(self.times) != self.N + 1:
            raise ValueError("full paths were not recorded")
        return [PathSample(v, self.law_tag, float(w), self.strictness, self.seed) for v, w in zip(self.values, self.log_weight)]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["sample_id", "t", "S_t"])
            for i, row in enumerate(self.values):
                for t, s in zip(self.times, row):
                    w.writerow([i, int(t), int(s)])

    def summary(self) -> dict:
        return {
            "law_tag": self.law_tag,
            "strictness": self.strictness,
            "x": self.x,
            "y": self.y,
            "N": self.N,
            "seed": self.seed if isinstance(self.seed, (int, type(None))) else str(self.seed),
            "n_samples": len(self),
            "max_norm_residual": self.max_norm_residual,
            "paths": [
                {"min": int(a), "max": int(b), "endpoint": int(self.y), "time_average": float(c)}
                for a, b, c in zip(self.path_min, self.path_max, self.path_mean)
            ],
        }

    def to_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.summary(), fh)


def sample_bridges(
    law: StepLaw,
    x: int,
    y: int,
    N: int,
    n_samples: int,
    strictness: Strictness = "weak",
    seed=0,
    record: Sequence[int] | None = None,
    table: BridgeTable | None = None,
    log_weights: bool | None = None,
    workers: int = 1,
) -> BridgeBatch:
    """Exact i.i.d. bridges from ``x`` to ``y`` in ``N`` steps.

    ``record`` lists the times to keep (all by default).  Samples are drawn
    in chunks, each with its own spawned Philox stream, so the output for a
    given seed does not depend on anything but ``n_samples``.  Per-path log
    weights are computed when full paths are kept unless ``log_weights`` says
    otherwise; the normalisation residual is then checked at every step
    instead of every 64th.  ``workers`` runs chunks on a thread pool.
    """
    if table is None:
        table = bridge_transition_table(law, N, y, strictness)
    if table.N != N or table.y != y or table.strictness != strictness:
        raise ValueError("table does not match the requested bridge")
    if not table.lo <= x <= table.hi or table.rows[0, x - table.lo] <= 0:
        raise ZeroBridgeProbability(f"no admissible path from {x} to {y} in {N} steps")
    times = np.arange(N + 1) if record is None else np.array(sorted(set(int(t) for t in record)))
    if len(times) and (times[0] < 0 or times[-1] > N):
        raise ValueError("record times must lie in [0, N]")
    if log_weights is None:
        log_weights = record is None
    slot = {int(t): j for j, t in enumerate(times)}
    floor = floor_of(strictness)
    offs = np.array(law.offsets)
    logp = np.log(np.array(law.probs))
    probs = np.array(law.probs)
    K = len(offs)
    # padded copy: out-of-window and forbidden positions carry weight 0
    pad = law.max_up + law.max_down + 1
    padded = np.zeros((N + 1, table.hi - table.lo + 1 + 2 * pad))
    padded[:, pad:-pad] = table.rows
    if floor > table.lo:
        padded[1:N, pad : pad + floor - table.lo] = 0.0
    shift = pad - table.lo
    ratio = np.exp(table.log_scale[:-1] - table.log_scale[1:])
    n_chunks = max(1, -(-n_samples // _CHUNK))
    rngs = _streams(seed, n_chunks)
    values = np.empty((n_samples, len(times)), dtype=np.int64)
    lw = np.zeros(n_samples)
    pmin = np.empty(n_samples, dtype=np.int64)
    pmax = np.empty(n_samples, dtype=np.int64)
    psum = np.zeros(n_samples)
    def run_chunk(c: int) -> float:
        rng = rngs[c]
        worst = 0.0
        a, b = c * _CHUNK, min(n_samples, (c + 1) * _CHUNK)
        n = b - a
        z = np.full(n, x, dtype=np.int64)
        lo_, hi_, s_ = z.copy(), z.copy(), z.astype(float)
        rows_n = np.arange(n)
        if 0 in slot:
            values[a:b, slot[0]] = z
        for m in range(N):
            tg = z[:, None] + offs[None, :]
            hn = padded[m + 1][tg + shift]
            w = probs * hn
            tot = w.sum(axis=1)
            if log_weights or m % 64 == 0:
                # residual of the unnormalised law against h_m(z)
                hm = padded[m][z + shift] * ratio[m]
                worst = max(worst, float(np.max(np.abs(tot / hm - 1.0))))
            cw = np.cumsum(w, axis=1)
            u = rng.random(n) * tot
            idx = np.minimum((cw <= u[:, None]).sum(axis=1), K - 1)
            # rounding can select a zero-weight column; fall back to the heaviest
            bad = w[rows_n, idx] == 0
            if bad.any():
                idx[bad] = np.argmax(w[bad], axis=1)
            z = tg[rows_n, idx]
            if log_weights:
                lw[a:b] += logp[idx] + np.log(hn[rows_n, idx] / tot)
            np.minimum(lo_, z, out=lo_)
            np.maximum(hi_, z, out=hi_)
            s_ += z
            if m + 1 in slot:
                values[a:b, slot[m + 1]] = z
        if np.any(z != y):
            raise AssertionError("bridge sampler missed its endpoint")
        pmin[a:b], pmax[a:b], psum[a:b] = lo_, hi_, s_
        return worst

    # chunks write disjoint slices, so the worker count cannot change the output
    if workers > 1 and n_chunks > 1:
        with ThreadPoolExecutor(max_workers=workers) as ex:
            worst = max(ex.map(run_chunk, range(n_chunks)))
    else:
        worst = max(run_chunk(c) for c in range(n_chunks))
    return BridgeBatch(
        "bridge", strictness, x, y, N, seed, times, values, lw, pmin, pmax, psum / (N + 1), worst,
        {"law": law.to_dict(), "x": x, "y": y, "N": N, "strictness": strictness, "seed": seed, "n_samples": n_samples},
    )


def sample_bridge(law: StepLaw, x: int, y: int, N: int, strictness: Strictness = "weak", rng_seed=0) -> PathSample:
    b = sample_bridges(law, x, y, N, 1, strictness, rng_seed)
    return PathSample(b.values[0], "bridge", float(b.log_weight[0]), strictness, rng_seed)


def bridge_marginal(law: StepLaw, x: int, y: int, N: int, m: int, strictness: Strictness = "weak") -> dict[int, float]:
    """``P(S_m = z)`` under the bridge: ``q_m(x,z) q_{N-m}(z,y) / q_N(x,y)``."""
    table = bridge_transition_table(law, N, y, strictness)
    lq = table.log_bridge_prob(x)
    if lq == -math.inf:
        raise ZeroBridgeProbability(f"no admissible path from {x} to {y} in {N} steps")
    if m == 0:
        return {x: 1.0}
    if m == N:
        return {y: 1.0}
    fwd = None
    for st in killed_walk(law, [x], m, table.hi, strictness):
        fwd = st
    floor = floor_of(strictness)
    out = {}
    for z in range(floor, table.hi + 1):
        a = fwd.q[0, z]
        lh = table.log_h(m, z)
        if a > 0 and lh > -math.inf:
            out[z] = math.exp(math.log(a) + fwd.log_scale + lh - lq)
    return out


# ---------------------------------------------------------------------------
# enumeration oracles


def count_bridge_paths(law: StepLaw, x: int, y: int, N: int, strictness: Strictness = "weak") -> int:
    """Number of admissible step sequences (integer DP, no probabilities)."""
    floor = floor_of(strictness)
    cur = {x: 1}
    for m in range(1, N + 1):
        nxt: dict[int, int] = {}
        for z, c in cur.items():
            for k in law.offsets:
                t = z + k
                if m < N and t < floor:
                    continue
                nxt[t] = nxt.get(t, 0) + c
        cur = nxt
    return cur.get(y, 0)


def bridge_pmf_exact(
    law: StepLaw, x: int, y: int, N: int, strictness: Strictness = "weak"
) -> dict[tuple[int, ...], Fraction | float]:
    """Every admissible bridge path with its conditional probability.

    Probabilities are exact ``Fraction``s when the law has rational weights.
    Raises :class:`ExplosionGuard` beyond ``10**7`` paths and
    :class:`ZeroBridgeProbability` when there is none.
    """
    if N < 1:
        raise ValueError("N must be >= 1")
    count = count_bridge_paths(law, x, y, N, strictness)
    if count > MAX_ENUMERATED_PATHS:
        raise ExplosionGuard(f"{count} paths exceed the enumeration limit")
    if count == 0:
        raise ZeroBridgeProbability(f"no admissible path from {x} to {y} in {N} steps")
    floor = floor_of(strictness)
    exact = law.exact is not None
    weights = law.exact if exact else law.probs
    steps = list(zip(law.offsets, weights))
    lo, hi = law.lo, law.hi
    out: dict = {}

    def walk(path: list[int], w) -> None:
        m = len(path) - 1
        z = path[-1]
        if m == N:
            if z == y:
                out[tuple(path)] = w
            return
        rem = N - m - 1
        for k, p in steps:
            t = z + k
            if m + 1 < N and t < floor:
                continue
            if not rem * lo <= y - t <= rem * hi:
                continue
            path.append(t)
            walk(path, w * p)
            path.pop()

    walk([x], Fraction(1) if exact else 1.0)
    total = sum(out.values()) if exact else math.fsum(out.values())
    return {k: v / total for k, v in out.items()}


def time_reversal_residual(law: StepLaw, x: int, y: int, N: int, strictness: Strictness = "weak") -> float:
    """Total variation between the reversed bridge ``(S_{N-M})_M`` from ``x``
    to ``y`` and the reflected-law bridge from ``y`` to ``x``."""
    fwd = bridge_pmf_exact(law, x, y, N, strictness)
    bwd = bridge_pmf_exact(law.reflected(), y, x, N, strictness)
    rev = {k[::-1]: v for k, v in fwd.items()}
    keys = set(rev) | set(bwd)
    zero = Fraction(0) if isinstance(next(iter(fwd.values())), Fraction) else 0.0
    tv = sum(abs(rev.get(k, zero) - bwd.get(k, zero)) for k in keys) / 2
    return float(tv)
