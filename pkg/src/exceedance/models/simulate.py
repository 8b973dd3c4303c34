"""Simulators for the stationary and seasonal process models.

Every simulator is a deterministic function of ``(parameters, T, seed)``.
Seeds feed the Philox counter-based generator (see ``make_rng``), so a
replication study can hand out independent streams with
``numpy.random.SeedSequence(seed).spawn(n)``.
"""

import math

import numpy as np
from scipy import linalg, signal, special

from .._validation import make_rng
from ..errors import CovarianceError, ParameterError


def _check_length(T):
    if int(T) != T or T < 1:
        raise ParameterError(f"T must be a positive integer, got {T}")
    return int(T)


def _check_rho(rho, name="rho"):
    if not -1.0 < rho < 1.0:
        raise ParameterError(f"{name}={rho} must lie in (-1, 1)")
    return float(rho)


def ar1_filter(noise, rho):
    """Stationary AR(1) path ``V_t = rho V_{t-1} + sqrt(1 - rho^2) X_t`` with ``V_0 = X_0``."""
    noise = np.asarray(noise, dtype=float)
    out = np.empty_like(noise)
    out[0] = noise[0]
    if len(noise) > 1:
        gain = math.sqrt(1.0 - rho * rho)
        out[1:], _ = signal.lfilter([gain], [1.0, -rho], noise[1:], zi=[rho * noise[0]])
    return out


def simulate_ar1(rho, T, seed=None):
    """Standard-normal Gaussian AR(1) path of length ``T`` started in stationarity."""
    rho = _check_rho(rho)
    T = _check_length(T)
    return ar1_filter(make_rng(seed).standard_normal(T), rho)


def seasonal_scale(t, period, phase_shift=0):
    """``S_t = (1 + sin(pi (t mod Y) / Y)^2) / 2``, optionally phase shifted.

    ``S`` is 1/2 at multiples of the period and 1 half-way through it.
    ``phase_shift=period // 2`` gives the variant that starts at 1.
    """
    if period < 2:
        raise ParameterError(f"period must be at least 2, got {period}")
    phase = np.mod(np.asarray(t) + phase_shift, period)
    return 0.5 * (1.0 + np.sin(np.pi * phase / period) ** 2)


def simulate_seasonal_scaled_ar1(rho, period, T, seed=None, phase_shift=0, scale=None):
    """``V_t = Z_t S_t`` with ``Z`` from :func:`simulate_ar1` and a periodic scale.

    ``scale`` overrides :func:`seasonal_scale` with any callable of the
    time index. The AR(1) draw uses the same stream as
    :func:`simulate_ar1` for the same seed.
    """
    T = _check_length(T)
    if scale is None:
        if period < 2:
            raise ParameterError(f"period must be at least 2, got {period}")
        scale = lambda t: seasonal_scale(t, period, phase_shift)  # noqa: E731
    Z = simulate_ar1(rho, T, seed)
    return Z * np.broadcast_to(np.asarray(scale(np.arange(T)), dtype=float), (T,))


def _embedding_eigenvalues(acf, T, m):
    lags = np.arange(m)
    ring = np.asarray(acf(np.minimum(lags, m - lags)), dtype=float)
    return np.fft.rfft(ring).real


def simulate_gaussian_acf(acf, T, seed=None, max_doublings=3, cholesky_limit=4096,
                          tolerance=1e-10):
    """Stationary standard Gaussian path with autocorrelation ``acf`` (callable on lag arrays).

    Uses circulant embedding of the covariance ring of size ``m >= 2(T - 1)``,
    enlarging ``m`` up to ``max_doublings`` times when the embedding has
    negative eigenvalues. If that fails and ``T <= cholesky_limit`` a dense
    Cholesky factor with increasing jitter is used; otherwise
    :class:`CovarianceError` is raised.
    """
    T = _check_length(T)
    rng = make_rng(seed)
    if T == 1:
        return rng.standard_normal(1)
    m = 2 * (T - 1)
    for _ in range(max_doublings + 1):
        eig = _embedding_eigenvalues(acf, T, m)
        if eig.min() >= -tolerance * max(eig.max(), 1.0):
            eig = np.clip(eig, 0.0, None)
            full = np.concatenate([eig, eig[1:m // 2][::-1]])
            noise = rng.standard_normal(m) + 1j * rng.standard_normal(m)
            path = np.fft.fft(np.sqrt(full / m) * noise)
            return path.real[:T].copy()
        m *= 2
    if T > cholesky_limit:
        raise CovarianceError(
            f"circulant embedding has negative spectrum and T={T} exceeds the Cholesky limit")
    cov = linalg.toeplitz(np.asarray(acf(np.arange(T)), dtype=float))
    for jitter in (0.0, 1e-10, 1e-8, 1e-6):
        try:
            chol = linalg.cholesky(cov + jitter * np.eye(T), lower=True)
        except linalg.LinAlgError:
            continue
        return chol @ rng.standard_normal(T)
    raise CovarianceError("covariance sequence is not positive definite")


def simulate_t_markov(nu, rho_t, T, seed=None):
    """Stationary Markov chain whose consecutive pairs are bivariate Student t.

    ``Y_0 ~ t_nu``; given ``Y_t = y`` the next value is ``rho_t y`` plus
    ``sqrt((nu + y^2)(1 - rho_t^2)/(nu + 1))`` times a ``t_{nu+1}`` draw,
    which is the conditional law of a bivariate t with ``nu`` degrees of
    freedom and correlation ``rho_t``. Marginals are ``t_nu`` at every step.
    """
    if not nu > 2:
        raise ParameterError(f"nu={nu} must exceed 2")
    rho = _check_rho(rho_t, "rho_t")
    T = _check_length(T)
    rng = make_rng(seed)
    first = rng.standard_t(nu)
    shocks = rng.standard_t(nu + 1.0, size=T - 1).tolist()
    c = (1.0 - rho * rho) / (nu + 1.0)
    out = [0.0] * T
    y = out[0] = float(first)
    sqrt = math.sqrt
    for i, e in enumerate(shocks, 1):
        y = rho * y + sqrt((nu + y * y) * c) * e
        out[i] = y
    return np.array(out)


def t_markov_from_uniforms(nu, rho_t, uniforms):
    """The chain of :func:`simulate_t_markov` driven by given uniforms through inversion.

    Reusing one uniform stream across parameter values gives common random
    numbers, which keeps simulation-based objectives smooth in ``nu``.
    """
    if not nu > 2:
        raise ParameterError(f"nu={nu} must exceed 2")
    rho = _check_rho(rho_t, "rho_t")
    u = np.asarray(uniforms, dtype=float)
    first = float(special.stdtrit(nu, u[0]))
    shocks = special.stdtrit(nu + 1.0, u[1:]).tolist()
    c = (1.0 - rho * rho) / (nu + 1.0)
    out = [0.0] * len(u)
    y = out[0] = first
    sqrt = math.sqrt
    for i, e in enumerate(shocks, 1):
        y = rho * y + sqrt((nu + y * y) * c) * e
        out[i] = y
    return np.array(out)
