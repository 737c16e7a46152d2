"""Exact dynamic programming for the killed walk.

The positivity kernels are

    q_n(x, y)  = P_x(S_1 >= 0, ..., S_{n-1} >= 0, S_n = y)    (weak)
    qh_n(x, y) = P_x(S_1 >  0, ..., S_{n-1} >  0, S_n = y)    (strict)

Everything here is a forward recursion on a finite window ``[0, y_max]``.
Mass pushed above the window is dropped and accumulated as ``leak``; since
dropped mass could have come back, every reported probability is a lower
bound that is exact up to the leak.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Iterable, Iterator, Literal

import numpy as np

from .errors import TruncationExceeded
from .steps import StepLaw, moments

Strictness = Literal["weak", "strict"]

LEAK_TOL = 1e-12
_RESCALE_BELOW = 1e-250


def floor_of(strictness: Strictness) -> int:
    """Smallest allowed intermediate position."""
    if strictness == "weak":
        return 0
    if strictness == "strict":
        return 1
    raise ValueError(f"strictness must be 'weak' or 'strict', not {strictness!r}")


def _sigma(law: StepLaw) -> float:
    return math.sqrt(moments(law)[1])


def default_y_max(law: StepLaw, n: int, x_max: int = 0) -> int:
    """Window top: ``x_max + ceil(8 a_n)`` (never more than reachable)."""
    reach = x_max + n * law.max_up
    return int(min(reach, x_max + math.ceil(8 * _sigma(law) * math.sqrt(n)) + 2 * law.max_up))


def _step(U: np.ndarray, law: StepLaw) -> np.ndarray:
    """Convolve along the last axis; output index j is position ``j + law.lo``
    relative to the input index 0."""
    width = U.shape[-1]
    out = np.zeros(U.shape[:-1] + (width + law.hi - law.lo,))
    # ascending probability: small terms first
    for k, p in sorted(zip(law.offsets, law.probs), key=lambda kp: kp[1]):
        i = k - law.lo
        out[..., i : i + width] += p * U
    return out


@dataclass
class KilledStep:
    """One time slice of the killed walk started from ``xs``.

    ``q[i, y]`` is the kernel from ``xs[i]`` to ``y`` in ``[0, y_max]`` (no
    constraint at the final time); ``u`` is ``q`` restricted to allowed
    positions, the state carried to the next step; ``below[i, h-1]`` is the
    mass landing at ``-h``.  Arrays are multiplied by ``exp(-log_scale)``;
    ``leak`` is unscaled.
    """

    n: int
    q: np.ndarray
    u: np.ndarray
    below: np.ndarray
    log_scale: float
    leak: np.ndarray


def killed_walk(
    law: StepLaw,
    xs: Iterable[int],
    n_max: int,
    y_max: int,
    strictness: Strictness,
) -> Iterator[KilledStep]:
    """Yield a :class:`KilledStep` for ``n = 1..n_max``."""
    xs = np.asarray(list(xs), dtype=int)
    if np.any(xs < 0) or np.any(xs > y_max):
        raise ValueError("starting points must lie in [0, y_max]")
    floor = floor_of(strictness)
    u = np.zeros((len(xs), y_max + 1))
    u[np.arange(len(xs)), xs] = 1.0
    log_scale = 0.0
    leak = np.zeros(len(xs))
    lo = law.lo
    for n in range(1, n_max + 1):
        full = _step(u, law)
        # full index j <-> position j + lo
        start = -lo  # index of position 0
        q = full[:, start : start + y_max + 1].copy()
        above = full[:, start + y_max + 1 :]
        leak += above.sum(axis=1) * math.exp(log_scale)
        u = q.copy()
        u[:, :floor] = 0.0
        below = full[:, :start][:, ::-1]
        yield KilledStep(n, q, u, below, log_scale, leak.copy())
        top = u.max(initial=0.0)
        if 0.0 < top < _RESCALE_BELOW:
            u /= top
            log_scale += math.log(top)


@dataclass
class KernelTable:
    n: int
    x_max: int
    y_max: int
    values: np.ndarray  # log-probabilities, -inf for exact zeros
    strictness: Strictness
    leak: np.ndarray  # per x

    def prob(self, x: int, y: int) -> float:
        if not (0 <= x <= self.x_max and 0 <= y <= self.y_max):
            raise IndexError((x, y))
        return float(np.exp(self.values[x, y]))

    def probs(self) -> np.ndarray:
        return np.exp(self.values)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["n", "x", "y", "log_value"])
            for x in range(self.x_max + 1):
                for y in range(self.y_max + 1):
                    w.writerow([self.n, x, y, repr(float(self.values[x, y]))])


def _log(a: np.ndarray, log_scale: float) -> np.ndarray:
    with np.errstate(divide="ignore"):
        return np.log(a) + log_scale


def q_plus(
    law: StepLaw,
    n: int,
    x_max: int,
    y_max: int | None = None,
    strictness: Strictness = "weak",
    leak_tol: float = LEAK_TOL,
) -> KernelTable:
    """Kernel table of ``q_n`` (weak) or ``qh_n`` (strict) on ``[0,x_max] x [0,y_max]``.

    The positivity constraint applies at times ``1..n-1`` only; for ``n = 1``
    the table is the step pmf.  Raises :class:`TruncationExceeded` when the
    leaked mass exceeds ``leak_tol`` times the surviving mass.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if y_max is None:
        y_max = default_y_max(law, n, x_max)
    y_max = max(y_max, x_max)
    last = None
    for st in killed_walk(law, range(x_max + 1), n, y_max, strictness):
        last = st
    q, ls, leak = last.q, last.log_scale, last.leak
    surv = q.sum(axis=1) * math.exp(ls)
    bad = leak > leak_tol * np.maximum(surv, np.finfo(float).tiny)
    if np.any(bad & (leak > 0)):
        raise TruncationExceeded(f"leak {leak.max():.3g} exceeds tolerance at y_max={y_max}")
    return KernelTable(n, x_max, y_max, _log(q, ls), strictness, leak)


def transition_pmf(law: StepLaw, n: int, x: int, y: int) -> float:
    """Exact ``P_x(S_n = y)`` by iterated convolution on a window with
    truncated mass below ``1e-15``."""
    return float(transition_vector(law, n)[1].get(y - x, 0.0))


def transition_vector(law: StepLaw, n: int, tail_tol: float = 1e-15):
    """Return ``(positions, dict offset -> P(S_n = offset), leaked)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    pmf = law.pmf_array()
    half = int(math.ceil(14 * _sigma(law) * math.sqrt(n))) + abs(law.lo) + law.hi
    v = np.array([1.0])
    base = 0
    leaked = 0.0
    for _ in range(n):
        v = np.convolve(v, pmf)
        base += law.lo
        lo_cut = max(0, -half - base)
        hi_cut = min(len(v), half - base + 1)
        if lo_cut > 0 or hi_cut < len(v):
            leaked += v[:lo_cut].sum() + v[hi_cut:].sum()
            v = v[lo_cut:hi_cut]
            base += lo_cut
    if leaked > tail_tol:
        raise TruncationExceeded(f"transition window leaked {leaked:.3g}")
    positions = np.arange(base, base + len(v))
    return positions, dict(zip(positions.tolist(), v.tolist())), leaked


def positivity_survival(
    law: StepLaw,
    n: int,
    x: int = 0,
    strictness: Strictness = "strict",
    y_max: int | None = None,
) -> float:
    """``P_x(S_1 > 0, ..., S_n > 0)`` (strict) or with ``>=`` (weak)."""
    return float(survival_sequence(law, [n], x, strictness, y_max)[n])


def survival_sequence(
    law: StepLaw,
    n_list: Iterable[int],
    x: int = 0,
    strictness: Strictness = "strict",
    y_max: int | None = None,
    leak_tol: float = LEAK_TOL,
) -> dict[int, float]:
    """Survival probabilities for several horizons in one forward pass."""
    wanted = sorted(set(int(n) for n in n_list))
    n_max = wanted[-1]
    if y_max is None:
        y_max = default_y_max(law, n_max, x)
    out = {}
    floor = floor_of(strictness)
    wanted_set = set(wanted)
    for st in killed_walk(law, [x], n_max, y_max, strictness):
        if st.n not in wanted_set:
            continue
        s = st.u[0, floor:].sum() * math.exp(st.log_scale)
        if st.leak[0] > leak_tol * s:
            raise TruncationExceeded(f"survival leak {st.leak[0]:.3g} at n={st.n}")
        # leaked mass was alive when it left the window
        out[st.n] = float(s + st.leak[0])
    return out
