"""Closed-form and quadrature mean exceedance times.

Times are in sample steps. For the Ornstein-Uhlenbeck model ``theta`` is
the mean-reversion rate per sample step and ``z_b`` the threshold on the
standard normal scale, ``z_b = Phi^{-1}(F_V(b))``.
"""

import math
import warnings

import mpmath
import numpy as np
from scipy import integrate
from scipy.special import log_ndtr, ndtri

from ..errors import DomainError, NumericError, ParameterError

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def iid_mean_exceedance(b, scale, shape):
    """``F(b) / (1 - F(b)) = exp((b / lambda)^alpha) - 1`` for iid Weibull values.

    The hitting time from a random start is geometric with success
    probability ``1 - F(b)``, counting failures.
    """
    b = np.asarray(b, dtype=float)
    if np.any(b < 0):
        raise DomainError("b must be nonnegative")
    if scale <= 0 or shape <= 0:
        raise ParameterError("Weibull scale and shape must be positive")
    out = np.expm1((b / scale) ** shape)
    return float(out) if out.ndim == 0 else out


def weibull_normal_score(b, scale, shape):
    """``Phi^{-1}(F(b))`` for a Weibull marginal, accurate far in the upper tail."""
    b = np.asarray(b, dtype=float)
    sf = np.exp(-(np.maximum(b, 0.0) / scale) ** shape)
    out = -ndtri(sf)
    return float(out) if out.ndim == 0 else out


def ou_phi_series(x, theta, tolerance=1e-12, max_terms=500):
    """``phi(x) = (1/(2 theta)) sum_{i>=1} (sqrt(2) x)^i Gamma(i/2) / i!``.

    The alternating terms for negative ``x`` cancel by roughly
    ``exp(x^2/2)``, so the sum runs in extended precision. Summation stops
    once a term falls below ``tolerance`` times the partial sum, past the
    largest term; hitting ``max_terms`` raises a warning.
    """
    if theta <= 0:
        raise ParameterError(f"theta={theta} must be positive")
    x = float(x)
    digits = 20 + int(x * x / (2.0 * math.log(10.0))) + 1
    with mpmath.workdps(digits):
        s = mpmath.sqrt(2) * x
        two_x2 = 2 * mpmath.mpf(x) ** 2
        # Two interleaved recurrences: term_{i+2} = term_i * 2 x^2 (i/2) / ((i+1)(i+2)).
        terms = {1: s * mpmath.sqrt(mpmath.pi), 2: s * s / 2}
        total = mpmath.mpf(0)
        peak = mpmath.mpf(0)
        converged = False
        for i in range(1, max_terms + 1):
            if i > 2:
                terms[i] = terms[i - 2] * two_x2 * (mpmath.mpf(i - 2) / 2) / ((i - 1) * i)
            term = terms[i]
            total += term
            peak = max(peak, abs(term))
            if i > 2 and abs(term) < peak and abs(term) + abs(terms[i - 1]) <= \
                    tolerance * abs(total):
                converged = True
                break
        if not converged:
            warnings.warn(f"phi series not converged after {max_terms} terms at x={x}",
                          RuntimeWarning, stacklevel=2)
        return float(total / (2 * theta))


def _ou_series(theta, z_b, tolerance, nodes=96, lower=-8.5):
    phi_b = ou_phi_series(z_b, theta, tolerance)
    x, w = np.polynomial.legendre.leggauss(nodes)
    half = 0.5 * (z_b - lower)
    pts = lower + half * (x + 1.0)
    dens = np.exp(-0.5 * pts * pts) / _SQRT_2PI
    vals = np.array([phi_b - ou_phi_series(p, theta, tolerance) for p in pts])
    return float(half * np.dot(w, vals * dens))


def _ou_integral(theta, z_b, tolerance):
    # E[int_{Z0}^{z} Phi(t) e^{t^2/2} dt; Z0 < z] = int_{-inf}^{z} Phi(t)^2 e^{t^2/2} dt.
    f = lambda t: math.exp(2.0 * log_ndtr(t) + 0.5 * t * t)  # noqa: E731
    pieces = [(-math.inf, min(z_b, -5.0))]
    if z_b > -5.0:
        pieces.append((-5.0, z_b))
    total = 0.0
    for a, c in pieces:
        val, err = integrate.quad(f, a, c, epsabs=0.0, epsrel=max(tolerance, 1e-13), limit=200)
        total += val
    return _SQRT_2PI / theta * total


def ou_mean_exceedance(theta, z_b, method="integral", tolerance=1e-12):
    """Mean exceedance time of a standardised OU process sampled from stationarity.

    ``method`` selects one of three evaluations:

    ``"series"``
        ``E[(phi(z_b) - phi(Z_0)) 1(Z_0 < z_b)]`` with the power series
        :func:`ou_phi_series` and Gauss-Legendre quadrature over ``Z_0``.
    ``"integral"``
        ``(sqrt(2 pi)/theta) int_{-inf}^{z_b} Phi(t)^2 exp(t^2/2) dt``, the
        same expectation after exchanging the order of integration.
    ``"asymptotic"``
        ``sqrt(2 pi) exp(z_b^2/2) / (theta z_b)``, valid for large ``z_b``.
    """
    if not theta > 0:
        raise ParameterError(f"theta={theta} must be positive")
    if not math.isfinite(z_b):
        raise DomainError(f"z_b={z_b} must be finite")
    if method == "series":
        out = _ou_series(theta, z_b, tolerance)
    elif method == "integral":
        out = _ou_integral(theta, z_b, tolerance)
    elif method == "asymptotic":
        if z_b <= 0:
            raise DomainError("the asymptotic form needs z_b > 0")
        out = _SQRT_2PI * math.exp(0.5 * z_b * z_b) / (theta * z_b)
    else:
        raise DomainError(f"unknown method {method!r}")
    if not math.isfinite(out):
        raise NumericError(f"OU mean exceedance overflowed at z_b={z_b}")
    return out
