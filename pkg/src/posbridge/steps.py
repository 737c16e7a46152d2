"""Lattice step laws, stable parameters and the norming sequence."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import DegenerateLaw, PeriodicSupport, ProbabilityMassError, UnsupportedAlpha

MASS_TOL = 1e-14


def _as_fraction(p) -> Fraction | None:
    if isinstance(p, Fraction):
        return p
    if isinstance(p, int):
        return Fraction(p)
    if isinstance(p, str):
        return Fraction(p)
    if isinstance(p, float):
        # binary floats are exact rationals; keep them only when short
        fr = Fraction(p)
        return fr if fr.denominator <= 2**20 else None
    return None


@dataclass(frozen=True)
class StepLaw:
    """A finitely supported step distribution on the integers.

    ``offsets`` are sorted and distinct.  ``exact`` holds the probabilities as
    :class:`~fractions.Fraction` when every input probability was rational
    with a small denominator; the enumeration oracles use it.
    """

    offsets: tuple[int, ...]
    probs: tuple[float, ...]
    name: str = "custom"
    exact: tuple[Fraction, ...] | None = field(default=None, compare=False, repr=False)
    periodic_ok: bool = field(default=False, compare=False, repr=False)

    @property
    def lo(self) -> int:
        return self.offsets[0]

    @property
    def hi(self) -> int:
        return self.offsets[-1]

    @property
    def max_down(self) -> int:
        """Largest downward jump size (``L`` in ``[-L, R]``), zero if none."""
        return max(0, -self.lo)

    @property
    def max_up(self) -> int:
        return max(0, self.hi)

    def pmf_array(self) -> np.ndarray:
        """Dense pmf on ``lo..hi`` (index ``k - lo``)."""
        arr = np.zeros(self.hi - self.lo + 1)
        for k, p in zip(self.offsets, self.probs):
            arr[k - self.lo] = p
        return arr

    def prob(self, k: int) -> float:
        try:
            return self.probs[self.offsets.index(k)]
        except ValueError:
            return 0.0

    def exact_prob(self, k: int) -> Fraction:
        if self.exact is None:
            return Fraction(self.prob(k))
        try:
            return self.exact[self.offsets.index(k)]
        except ValueError:
            return Fraction(0)

    def reflected(self) -> "StepLaw":
        """Law of ``-X``."""
        pairs = sorted(zip((-k for k in self.offsets), self.probs))
        exact = None
        if self.exact is not None:
            exact = tuple(e for _, e in sorted(zip((-k for k in self.offsets), self.exact)))
        return StepLaw(
            tuple(k for k, _ in pairs),
            tuple(p for _, p in pairs),
            name=f"reflected({self.name})",
            exact=exact,
            periodic_ok=self.periodic_ok,
        )

    def to_dict(self) -> dict:
        return {"name": self.name, "offsets": list(self.offsets), "probs": list(self.probs)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "StepLaw":
        d = json.loads(text)
        return make_step_law(list(zip(d["offsets"], d["probs"])), name=d.get("name", "custom"))


@dataclass(frozen=True)
class StableParams:
    alpha: float = 2.0
    rho: float = 0.5
    sigma: float | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 2:
            raise ValueError(f"alpha must lie in (0, 2], got {self.alpha}")
        if not 0 < self.rho < 1:
            raise ValueError(f"rho must lie in (0, 1), got {self.rho}")
        if self.sigma is not None and self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if self.alpha == 2 and self.rho != 0.5:
            raise ValueError("alpha = 2 forces rho = 1/2")
        if self.alpha > 1 and not (1 - 1 / self.alpha <= self.rho <= 1 / self.alpha):
            raise ValueError("rho violates 1 - 1/alpha <= rho <= 1/alpha")


def _preset_pairs(name: str) -> list[tuple[int, Fraction]]:
    if name == "lazy":
        return [(-1, Fraction(1, 4)), (0, Fraction(1, 2)), (1, Fraction(1, 4))]
    if name == "trinomial":
        return [(-1, Fraction(1, 3)), (0, Fraction(1, 3)), (1, Fraction(1, 3))]
    if name == "skew":
        # zero mean, aperiodic, not symmetric
        return [(-1, Fraction(1, 2)), (0, Fraction(1, 4)), (2, Fraction(1, 4))]
    if name == "geom-diff":
        # difference of two Geometric(1/2) variables, truncated to |k| <= 8
        w = {k: Fraction(1, 2 ** abs(k)) for k in range(-8, 9)}
        tot = sum(w.values())
        return [(k, v / tot) for k, v in sorted(w.items())]
    if name == "simple":
        return [(-1, Fraction(1, 2)), (1, Fraction(1, 2))]
    raise KeyError(f"unknown preset {name!r}")


PRESETS = ("lazy", "trinomial", "skew", "geom-diff")


def make_step_law(
    spec: str | Mapping | Sequence[tuple[int, object]],
    name: str | None = None,
    allow_periodic: bool = False,
) -> StepLaw:
    """Build and validate a :class:`StepLaw`.

    ``spec`` is a preset name, a mapping ``{offset: prob}``, a mapping with
    ``offsets``/``probs`` keys (the JSON form), or a sequence of pairs.
    Probabilities may be floats, ints, ``Fraction`` or strings like ``"1/3"``.

    ``allow_periodic`` bypasses the aperiodicity check; only the test-suite
    uses it (the simple +-1 walk).
    """
    if isinstance(spec, str):
        if spec == "simple":
            allow_periodic = True
        pairs: list = _preset_pairs(spec)
        name = name or spec
    elif isinstance(spec, Mapping) and "offsets" in spec:
        pairs = list(zip(spec["offsets"], spec["probs"]))
        name = name or spec.get("name", "custom")
    elif isinstance(spec, Mapping):
        pairs = list(spec.items())
    else:
        pairs = list(spec)
    name = name or "custom"

    merged: dict[int, list] = {}
    for k, p in pairs:
        merged.setdefault(int(k), []).append(p)
    offsets = sorted(merged)
    fracs: list[Fraction | None] = []
    floats: list[float] = []
    for k in offsets:
        fs = [_as_fraction(p) for p in merged[k]]
        fr = sum(fs, Fraction(0)) if all(f is not None for f in fs) else None
        fracs.append(fr)
        floats.append(float(fr) if fr is not None else math.fsum(float(p) for p in merged[k]))

    if any(p < 0 for p in floats):
        raise ProbabilityMassError("negative probability")
    keep = [i for i, p in enumerate(floats) if p > 0]
    offsets = [offsets[i] for i in keep]
    floats = [floats[i] for i in keep]
    fracs = [fracs[i] for i in keep]

    total = math.fsum(floats)
    if abs(total - 1.0) > MASS_TOL:
        raise ProbabilityMassError(f"probabilities sum to {total!r}, not 1")
    if len(offsets) < 2:
        raise DegenerateLaw("step law has a single atom")
    period = support_period(offsets)
    if period != 1 and not allow_periodic:
        raise PeriodicSupport(f"support lies in {period}Z + {offsets[0] % period}")

    exact = tuple(fracs) if all(f is not None for f in fracs) else None
    if exact is not None and sum(exact) != 1:
        exact = None
    return StepLaw(tuple(offsets), tuple(floats), name=name, exact=exact, periodic_ok=allow_periodic)


def support_period(offsets: Iterable[int]) -> int:
    offs = list(offsets)
    return reduce(math.gcd, (abs(k - offs[0]) for k in offs[1:]), 0)


def moments(law: StepLaw) -> tuple[float, float]:
    """Exact mean and variance (finite sums, compensated)."""
    if law.exact is not None:
        m = sum(k * p for k, p in zip(law.offsets, law.exact))
        v = sum((k - m) ** 2 * p for k, p in zip(law.offsets, law.exact))
        return float(m), float(v)
    m = math.fsum(k * p for k, p in zip(law.offsets, law.probs))
    v = math.fsum((k - m) ** 2 * p for k, p in zip(law.offsets, law.probs))
    return m, v


def stable_params(law: StepLaw) -> StableParams:
    """Brownian-domain parameters for a finite-variance law."""
    _, var = moments(law)
    return StableParams(alpha=2.0, rho=0.5, sigma=math.sqrt(var))


def norming(law: StepLaw, params: StableParams | None, n) -> float | np.ndarray:
    """Norming sequence ``a_n = sigma * sqrt(n)``.

    With this choice ``S_n / a_n`` converges to a standard normal, so every
    Brownian oracle is used without extra constants.
    """
    if params is None:
        params = stable_params(law)
    if params.alpha != 2:
        raise UnsupportedAlpha("finitely supported steps have finite variance; only alpha = 2 applies")
    n_arr = np.asarray(n, dtype=float)
    if np.any(n_arr <= 0):
        raise ValueError("n must be positive")
    sigma = params.sigma if params.sigma is not None else math.sqrt(moments(law)[1])
    out = sigma * np.sqrt(n_arr)
    return float(out) if out.ndim == 0 else out
