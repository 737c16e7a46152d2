"""Ladder variables, zeta, renewal functions and the exact fluctuation identities.

Conventions.  ``tau_1^-`` is the first time ``S_n <= 0`` (weak descending
epoch) and ``H_1^- = -S_{tau_1^-}``; the strict epoch uses ``S_n < 0``.
Ascending variables are the descending ones of the reflected law.

Two routes to the ladder-height marginals are provided.  The joint table
``P(tau_1 = n, H_1 = h)`` is a truncated kernel computation whose defect
decays only like ``n^{-1/2}``.  For a zero-mean law the marginals are also
available exactly from the Wiener-Hopf factorisation

    z^L (1 - phi(z)) = (1 - E z^{Hh^+}) * z^L (1 - E z^{-H^-})

where ``phi`` is the step generating function on ``[-L, R]``.  The second
factor is a degree ``L`` polynomial whose roots are the roots of the left
side in the closed unit disc, so it is pinned down by those roots plus the
known top coefficient ``P(H^- = L) = p(-L)``.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Literal, Sequence

import numpy as np

from .errors import DefectTooLarge, RenewalRangeExceeded
from .kernels import Strictness, default_y_max, killed_walk, survival_sequence, transition_vector
from .steps import StepLaw, moments

Direction = Literal["ascending", "descending"]

DEFECT_TOL = 1e-6
_MEAN_TOL = 1e-12


def _descending_law(law: StepLaw, direction: Direction) -> StepLaw:
    if direction == "descending":
        return law
    if direction == "ascending":
        return law.reflected()
    raise ValueError(f"direction must be 'ascending' or 'descending', not {direction!r}")


# ---------------------------------------------------------------------------
# Wiener-Hopf marginals


def _deflate_unit_root(coeffs: list) -> list:
    """Divide a polynomial (leading coefficient first) by ``z - 1``."""
    out = [coeffs[0]]
    for c in coeffs[1:-1]:
        out.append(c + out[-1])
    return out


def _polish(poly: np.ndarray, r: complex, steps: int = 3) -> complex:
    dpoly = np.polyder(poly)
    for _ in range(steps):
        d = np.polyval(dpoly, r)
        if d == 0:
            break
        r = r - np.polyval(poly, r) / d
    return r


@dataclass(frozen=True)
class HeightLaws:
    """Exact descending ladder-height marginals of a zero-mean law.

    ``weak[h] = P(H_1^- = h)`` for ``h = 0..L`` and ``strict[h] =
    P(Hh_1^- = h)`` (``strict[0] = 0``).  ``one_minus_zeta`` is the leading
    coefficient of the descending factor.
    """

    weak: np.ndarray
    strict: np.ndarray
    one_minus_zeta: float


def descending_heights(law: StepLaw) -> HeightLaws:
    """Exact descending ladder-height laws via the Wiener-Hopf factorisation.

    Raises ``ValueError`` for a law with non-zero mean (the double root at
    one splits and the factor is no longer determined this way).
    """
    mean, _ = moments(law)
    if abs(mean) > _MEAN_TOL:
        raise ValueError("exact ladder heights need a zero-mean law")
    L, R = law.max_down, law.max_up
    deg = L + R
    if law.exact is not None:
        coef = [Fraction(0)] * (deg + 1)
        coef[L] += 1
        for k, p in zip(law.offsets, law.exact):
            coef[k + L] -= p
    else:
        coef = [0.0] * (deg + 1)
        coef[L] += 1.0
        for k, p in zip(law.offsets, law.probs):
            coef[k + L] -= p
    lead_first = coef[::-1]
    # zero mean: z = 1 is a double root, removed exactly
    quot = _deflate_unit_root(_deflate_unit_root(lead_first))
    Q = np.array([float(c) for c in quot])
    if len(Q) > 1:
        roots = np.roots(Q)
        roots = np.array([_polish(Q, r) for r in roots])
    else:
        roots = np.array([], dtype=complex)
    inside = roots[np.abs(roots) < 1.0]
    if len(inside) != L - 1:
        raise ValueError(f"expected {L - 1} roots inside the unit disc, found {len(inside)}")
    monic = np.real(np.poly(np.concatenate([[1.0], inside])))
    strict = np.zeros(L + 1)
    strict[1:] = -monic[1:]
    c = law.prob(-L) / strict[L]
    weak = c * strict
    weak[0] = 1.0 - c
    return HeightLaws(weak=weak, strict=strict, one_minus_zeta=float(c))


def exact_height_pmf(law: StepLaw, direction: Direction, strictness: Strictness) -> np.ndarray:
    h = descending_heights(_descending_law(law, direction))
    return h.weak if strictness == "weak" else h.strict


# ---------------------------------------------------------------------------
# Ladder joint laws


@dataclass
class LadderLaw:
    """Joint law of the first ladder epoch and height.

    ``joint[n, h] = P(tau_1 = n, H_1 = h)`` for ``1 <= n <= n_max`` (row 0 is
    unused) and ``0 <= h <= h_max``.  ``height_pmf`` is the exact marginal
    when one is available (zero-mean laws), else ``None``.
    """

    direction: Direction
    strictness: Strictness
    n_max: int
    h_max: int
    joint: np.ndarray
    defect: float
    law: StepLaw = field(repr=False)
    height_pmf: np.ndarray | None = None

    def marginal(self) -> np.ndarray:
        """Height marginal: exact if available, else the truncated column sums."""
        if self.height_pmf is not None:
            return self.height_pmf
        return self.joint.sum(axis=0)

    def epoch_pmf(self) -> np.ndarray:
        return self.joint.sum(axis=1)


def ladder_law(
    law: StepLaw,
    direction: Direction = "descending",
    strictness: Strictness = "weak",
    n_max: int = 200,
    h_max: int | None = None,
) -> LadderLaw:
    if n_max < 1:
        raise ValueError("n_max must be >= 1")
    d = _descending_law(law, direction)
    if h_max is None:
        h_max = d.max_down
    if h_max < 1:
        raise ValueError("h_max must be >= 1")
    joint = np.zeros((n_max + 1, h_max + 1))
    # weak ladder: survive while > 0, stop at <= 0; strict: stop at < 0
    kill = "strict" if strictness == "weak" else "weak"
    y_max = default_y_max(d, n_max)
    for st in killed_walk(d, [0], n_max, y_max, kill):
        sc = math.exp(st.log_scale)
        if strictness == "weak":
            joint[st.n, 0] = st.q[0, 0] * sc
        w = min(h_max, st.below.shape[1])
        joint[st.n, 1 : w + 1] = st.below[0, :w] * sc
    captured = math.fsum(joint.ravel())
    try:
        hp = exact_height_pmf(law, direction, strictness)
    except ValueError:
        hp = None
    return LadderLaw(direction, strictness, n_max, h_max, joint, 1.0 - captured, law, hp)


def zeta(law: StepLaw, n_max: int | None = 200) -> tuple[float, float]:
    """``zeta = P(H_1^+ = 0)`` with an error bound.

    With ``n_max`` the value is the truncated sum of ``P(tau_1^+ = n, H_1^+ =
    0)`` and the bound is the remaining ladder defect; the descending value
    ``P(H_1^- = 0)`` is computed the same way and must agree within the bound.
    With ``n_max=None`` the Wiener-Hopf value is returned and the bound is the
    disagreement between the ascending and descending factorisations.
    """
    if n_max is None:
        up = descending_heights(law.reflected()).one_minus_zeta
        down = descending_heights(law).one_minus_zeta
        return 1.0 - up, abs(up - down) + 4 * np.finfo(float).eps
    asc = ladder_law(law, "ascending", "weak", n_max)
    desc = ladder_law(law, "descending", "weak", n_max)
    z_up = math.fsum(asc.joint[:, 0])
    z_dn = math.fsum(desc.joint[:, 0])
    bound = max(asc.defect, 0.0)
    if abs(z_up - z_dn) > bound + max(desc.defect, 0.0) + 1e-12:
        raise AssertionError(f"ascending and descending zeta disagree: {z_up} vs {z_dn}")
    return z_up, bound


def zeta_exact(law: StepLaw) -> float:
    return zeta(law, None)[0]


# ---------------------------------------------------------------------------
# Renewal functions


def _solve_renewal(pmf: np.ndarray, x_max: int) -> np.ndarray:
    """``V(x) = 1 + sum_{h<=x} pmf[h] V(x-h)`` by forward substitution."""
    p0 = pmf[0]
    if p0 >= 1.0:
        raise RenewalRangeExceeded("ladder height is a.s. zero")
    V = np.zeros(x_max + 1)
    hmax = len(pmf) - 1
    for x in range(x_max + 1):
        terms = [1.0]
        for h in range(1, min(x, hmax) + 1):
            terms.append(pmf[h] * V[x - h])
        V[x] = math.fsum(terms) / (1.0 - p0)
    return V


@dataclass
class RenewalTable:
    """``V``, ``Vhat`` and their underlined versions on ``[0, x_max]``."""

    x_max: int
    V: np.ndarray
    Vhat: np.ndarray
    Vunder: np.ndarray
    Vhatunder: np.ndarray
    zeta: float
    direction: Direction = "descending"

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["x", "V", "Vhat", "Vunder", "Vhatunder"])
            for x in range(self.x_max + 1):
                w.writerow([x] + [repr(float(a[x])) for a in (self.V, self.Vhat, self.Vunder, self.Vhatunder)])


def renewal_table(ladder: LadderLaw, x_max: int) -> RenewalTable:
    """Renewal functions for the ladder's direction.

    ``V`` is solved from the weak height law and ``Vhat`` from the strict one,
    independently; for zero-mean laws both come from the exact marginals.
    Without exact marginals the truncated table is used and a defect above
    ``1e-6`` raises :class:`DefectTooLarge`.
    """
    law, direction = ladder.law, ladder.direction
    if ladder.height_pmf is not None:
        weak = exact_height_pmf(law, direction, "weak")
        strict = exact_height_pmf(law, direction, "strict")
        z = zeta(law, None)[0]
    else:
        if ladder.defect > DEFECT_TOL:
            raise DefectTooLarge(f"ladder defect {ladder.defect:.3g} exceeds {DEFECT_TOL}")
        other = ladder_law(law, direction, "strict" if ladder.strictness == "weak" else "weak", ladder.n_max)
        if other.defect > DEFECT_TOL:
            raise DefectTooLarge(f"ladder defect {other.defect:.3g} exceeds {DEFECT_TOL}")
        pair = {ladder.strictness: ladder.marginal(), other.strictness: other.marginal()}
        weak, strict = pair["weak"], pair["strict"]
        z = float(weak[0])
    V = _solve_renewal(weak, x_max)
    Vhat = _solve_renewal(strict, x_max)
    Vunder = np.concatenate([[1.0], V[:-1]])
    Vhatunder = np.concatenate([[1.0 - z], Vhat[:-1]])
    return RenewalTable(x_max, V, Vhat, Vunder, Vhatunder, z, direction)


def renewal_for(law: StepLaw, direction: Direction, x_max: int, n_max: int = 1) -> RenewalTable:
    """Shortcut: renewal table from the exact marginals (``n_max`` only sizes
    the unused joint table)."""
    return renewal_table(ladder_law(law, direction, "weak", n_max), x_max)


# ---------------------------------------------------------------------------
# Identities


def harmonic_residual(law: StepLaw, renewal: RenewalTable, x: int, N: int, strictness: Strictness = "weak") -> float:
    """``|h(x) - E_x[h(S_N); walk stays in the allowed set up to N]|``.

    ``h`` is ``V^-`` on ``{0, 1, ...}`` (weak) or ``underline V^-`` on
    ``{1, 2, ...}`` (strict).  ``renewal`` must be the descending table.
    """
    if N == 0:
        return 0.0
    y_top = x + N * law.max_up
    if y_top > renewal.x_max:
        raise RenewalRangeExceeded(f"need renewal values up to {y_top}, table stops at {renewal.x_max}")
    h = renewal.V if strictness == "weak" else renewal.Vunder
    floor = 0 if strictness == "weak" else 1
    last = None
    for st in killed_walk(law, [x], N, y_top, strictness):
        last = st
    row = last.q[0] * math.exp(last.log_scale)
    ys = np.arange(floor, y_top + 1)
    rhs = math.fsum((row[ys] * h[ys]).tolist())
    return abs(h[x] - rhs)


def _joint_dp_table(law: StepLaw, n: int, strictness: Strictness) -> np.ndarray:
    """``J[m, h] = P(tau_1^+ = m, H_1^+ = h)``, ``m <= n``, all reachable ``h``."""
    lad = ladder_law(law, "ascending", strictness, n, h_max=max(1, law.max_up))
    return lad.joint


def duality_profile(
    law: StepLaw, n: int, sign: int = 1, strictness: Strictness = "strict"
) -> tuple[np.ndarray, np.ndarray]:
    """Both sides of the duality lemma for every endpoint ``y = 0..n*R``.

    Left: ``sum_k P(tau_k = n, sign*S_n = y)`` over ascending ladder epochs of
    ``sign*S`` (strict by default), from convolution powers of the first
    ladder pair.  Right: ``P(sign*S_1 > 0, ..., sign*S_n > 0, sign*S_n = y)``
    (``>= 0`` for the weak variant).  Only ``y >= 1`` is meaningful.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    w = law if sign > 0 else law.reflected()
    J = _joint_dp_table(w, n, strictness)
    hm = n * w.max_up
    W = np.zeros((n + 1, hm + 1))
    W[0, 0] = 1.0
    for t in range(1, n + 1):
        acc = np.zeros(hm + 1)
        for m in range(1, t + 1):
            for h in range(J.shape[1]):
                p = J[m, h]
                if p != 0.0:
                    acc[h:] += p * W[t - m, : hm + 1 - h]
        W[t] = acc
    last = None
    for st in killed_walk(w, [0], n, hm, strictness):
        last = st
    rhs = last.q[0] * math.exp(last.log_scale)
    return W[n], rhs


def duality_sides(
    law: StepLaw, n: int, interval: Iterable[int], sign: int = 1, strictness: Strictness = "strict"
) -> tuple[float, float]:
    ys = sorted(set(int(y) for y in interval))
    if ys and ys[0] < 1:
        raise ValueError("interval must lie in (0, inf)")
    if not ys:
        return 0.0, 0.0
    lhs, rhs = duality_profile(law, n, sign, strictness)
    keep = [y for y in ys if y < len(lhs)]
    return math.fsum(lhs[keep]), math.fsum(rhs[keep])


def duality_residual(law: StepLaw, n: int, interval: Iterable[int], sign: int = 1, strictness: Strictness = "strict") -> float:
    lhs, rhs = duality_sides(law, n, interval, sign, strictness)
    return abs(lhs - rhs)


def _strict_rows(law: StepLaw, n: int) -> np.ndarray:
    """``rows[j, m] = qh_j(0, m)`` for ``j = 0..n`` and ``m = 0..n*R``."""
    top = n * law.max_up
    rows = np.zeros((n + 1, top + 1))
    rows[0, 0] = 1.0
    for st in killed_walk(law, [0], n, top, "strict"):
        rows[st.n] = st.q[0] * math.exp(st.log_scale)
    return rows


def alili_doney_sides(law: StepLaw, n: int) -> dict[str, float]:
    """Sides of the cyclic identity for the strict excursion kernel.

    ``lhs = qh_n(0, 0)``; ``cyclic = (1/n) P(S_n = 0, minimum of S_0..S_{n-1}
    attained once)``, split on the time ``j`` and depth ``m`` of the minimum
    into a reflected strict meander of length ``j`` and a strict kernel of
    length ``n - j``.  ``ladder_form = (1/n) P(H_1^- > 0, S_n = 0)`` is
    returned for comparison; it is not an identity at finite ``n``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    fwd = _strict_rows(law, n)
    bwd = _strict_rows(law.reflected(), n)
    bwd[1:, 0] = 0.0  # the reflected meander ends strictly above its start
    width = min(fwd.shape[1], bwd.shape[1])
    terms = [float(np.dot(bwd[j, :width], fwd[n - j, :width])) for j in range(n)]
    cyclic = math.fsum(terms) / n
    lad = ladder_law(law, "descending", "weak", n)
    lt = []
    for j in range(1, n):
        _, pm, _ = transition_vector(law, n - j)
        for h in range(1, lad.joint.shape[1]):
            if lad.joint[j, h]:
                lt.append(lad.joint[j, h] * pm.get(h, 0.0))
    return {"lhs": float(fwd[n, 0]), "cyclic": cyclic, "ladder_form": math.fsum(lt) / n}


def alili_doney_residual(law: StepLaw, n: int) -> float:
    s = alili_doney_sides(law, n)
    return abs(s["lhs"] - s["cyclic"])


def renewal_mass_sides(law: StepLaw, n: int) -> tuple[float, float]:
    """``q_n(0,0)`` and ``sum_k K^{*k}(n)`` with ``K(m) = qh_m(0,0)``.

    ``K(1) = P(S_1 = 0)``: the strict constraint set is empty for ``m = 1``,
    which is what makes the decomposition by returns to zero exact at ``n=1``.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    K = np.zeros(n + 1)
    for st in killed_walk(law, [0], n, n * law.max_up, "strict"):
        K[st.n] = st.q[0, 0] * math.exp(st.log_scale)
    u = np.zeros(n + 1)
    u[0] = 1.0
    for t in range(1, n + 1):
        u[t] = math.fsum(K[1 : t + 1] * u[t - 1 :: -1][:t])
    weak = None
    for st in killed_walk(law, [0], n, n * law.max_up, "weak"):
        weak = st.q[0, 0] * math.exp(st.log_scale)
    return float(weak), float(u[n])


def renewal_mass_residual(law: StepLaw, n: int) -> float:
    a, b = renewal_mass_sides(law, n)
    return abs(a - b)


def tail_ratio_sequence(law: StepLaw, n_list: Sequence[int], zeta_value: float | None = None) -> list[float]:
    """``P(tauh_1^- > n) (1 - zeta) / P(tau_1^- > n)`` for each ``n``.

    ``tauh_1^- > n`` means ``S_1..S_n >= 0``; ``tau_1^- > n`` means ``> 0``.
    """
    if zeta_value is None:
        zeta_value = zeta(law, None)[0]
    ns = [int(n) for n in n_list]
    weak = survival_sequence(law, ns, 0, "weak")
    strict = survival_sequence(law, ns, 0, "strict")
    return [weak[n] * (1.0 - zeta_value) / strict[n] for n in ns]
