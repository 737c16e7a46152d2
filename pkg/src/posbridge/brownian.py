"""Closed-form Brownian densities used as limits by the diagnostics.

All functions accept scalars or numpy arrays.  Only the Gaussian case is
implemented; the meander densities have no closed form for other indices.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, stats

from .errors import DomainError, UnsupportedAlpha

SQRT_2PI = math.sqrt(2 * math.pi)
G0 = 1 / SQRT_2PI
C_PLUS = C_MINUS = SQRT_2PI
QUAD_TOL = 1e-10


def _out(v):
    v = np.asarray(v, dtype=float)
    return float(v) if v.ndim == 0 else v


def gauss_density(x):
    x = np.asarray(x, dtype=float)
    return _out(np.exp(-0.5 * x * x) / SQRT_2PI)


def meander_density(x):
    """Rayleigh density ``x exp(-x^2/2)`` on ``(0, inf)``, zero elsewhere."""
    x = np.asarray(x, dtype=float)
    return _out(np.where(x > 0, x * np.exp(-0.5 * x * x), 0.0))


def f_eps_t(x, eps: float, t: float = 1.0, alpha: float = 2.0):
    """Radon-Nikodym density of the excursion at time ``t - eps`` against
    the Bessel(3) marginal.

    For ``alpha = 2`` this is ``(t/eps)^{3/2} exp(-x^2 / (2 eps))``.  For other
    indices only the value at zero, ``(t/eps)^{1 + 1/alpha}``, is known.
    """
    if not t > 0:
        raise DomainError("t must be positive")
    if not 0 < eps < t:
        raise DomainError(f"eps must lie in (0, t), got eps={eps}, t={t}")
    if not 0 < alpha <= 2:
        raise UnsupportedAlpha(f"alpha must lie in (0, 2], got {alpha}")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("x must be non-negative")
    if alpha != 2:
        if np.any(x != 0):
            raise UnsupportedAlpha("for alpha != 2 only x = 0 has a closed form")
        return _out(np.full(x.shape, (t / eps) ** (1 + 1 / alpha)))
    return _out((t / eps) ** 1.5 * np.exp(-x * x / (2 * eps)))


def excursion_marginal(x, eps: float):
    """Density of the normalised excursion at time ``1 - eps``."""
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    x = np.asarray(x, dtype=float)
    a = meander_density(x / math.sqrt(1 - eps)) / (1 - eps)
    b = meander_density(x / math.sqrt(eps)) / eps
    return _out(2 / SQRT_2PI * np.asarray(a) * np.asarray(b))


def excursion_cdf(x, eps: float):
    """CDF of :func:`excursion_marginal`: a Maxwell law with scale
    ``sqrt(eps (1 - eps))``."""
    if not 0 < eps < 1:
        raise DomainError(f"eps must lie in (0, 1), got {eps}")
    return _out(stats.maxwell.cdf(np.asarray(x, dtype=float), scale=math.sqrt(eps * (1 - eps))))


def bessel3_marginal(x, t: float):
    """Density of a three-dimensional Bessel process from 0 at time ``t``."""
    if not t > 0:
        raise DomainError("t must be positive")
    x = np.asarray(x, dtype=float)
    v = math.sqrt(2 / (math.pi * t)) * (x * x / t) * np.exp(-x * x / (2 * t))
    return _out(np.where(x >= 0, v, 0.0))


def bessel3_cdf(x, t: float):
    return _out(stats.maxwell.cdf(np.asarray(x, dtype=float), scale=math.sqrt(t)))


def integrate_density(f, lo: float, hi: float, tol: float = QUAD_TOL) -> tuple[float, float]:
    """Adaptive Gauss-Kronrod quadrature: ``(value, error estimate)``."""
    val, err = integrate.quad(lambda u: float(f(u)), lo, hi, epsabs=tol, epsrel=tol, limit=200)
    return val, err


def normalization_checks(eps: float = 0.5, t: float = 1.0) -> dict[str, float]:
    """Total mass of every oracle density, integrated over 12 standard
    deviations of its own scale."""
    s = math.sqrt(eps * (1 - eps))
    return {
        "gauss": integrate_density(gauss_density, -12, 12)[0],
        "meander": integrate_density(meander_density, 0, 12)[0],
        "excursion": integrate_density(lambda u: excursion_marginal(u, eps), 0, 12 * s)[0],
        "bessel3": integrate_density(lambda u: bessel3_marginal(u, t), 0, 12 * math.sqrt(t))[0],
    }


def meander_ratio(x, alpha_rho: float = 1.0):
    """Diagnostic ratio ``g^+(x) / (C x^{alpha rho} g(x))``; not an oracle."""
    x = np.asarray(x, dtype=float)
    return _out(np.asarray(meander_density(x)) / (C_PLUS * x**alpha_rho * np.asarray(gauss_density(x))))
