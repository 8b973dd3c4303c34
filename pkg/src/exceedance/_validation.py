"""Input validation helpers shared by the functional API and the estimators."""

import numbers

import numpy as np

from .errors import DataError, DomainError


def check_series(series, *, allow_multivariate=False, name="series"):
    """Return ``series`` as a finite float array.

    One-dimensional input is the common case. Two-dimensional ``(T, N)``
    input is accepted when ``allow_multivariate`` is set; a column vector
    ``(T, 1)`` is always flattened so that sklearn-style ``X`` works.
    """
    values = np.asarray(series, dtype=float)
    if values.ndim == 2 and values.shape[1] == 1:
        values = values[:, 0]
    if values.ndim == 0:
        raise DataError(f"{name} must be a sequence, got a scalar")
    if values.ndim > 2 or (values.ndim == 2 and not allow_multivariate):
        raise DataError(f"{name} must be one-dimensional, got shape {values.shape}")
    if values.shape[0] < 1:
        raise DataError(f"{name} is empty")
    finite = np.isfinite(values)
    if not finite.all():
        bad = int(np.flatnonzero(~finite.reshape(len(values), -1).all(axis=1))[0])
        raise DataError(f"{name} has a non-finite value at index {bad}")
    return values


def check_index(t, T, name="t"):
    if not isinstance(t, numbers.Integral) or isinstance(t, bool):
        raise DomainError(f"{name} must be an integer, got {t!r}")
    if not 0 <= t < T:
        raise DomainError(f"{name}={t} outside [0, {T})")
    return int(t)


def check_probability(p, name, *, open_interval=False):
    p = float(p)
    ok = (0.0 < p < 1.0) if open_interval else (0.0 <= p <= 1.0)
    if not ok:
        raise DomainError(f"{name}={p} is not a valid probability")
    return p


def make_rng(seed=None):
    """Return a ``numpy.random.Generator`` backed by the Philox counter-based bit generator.

    ``seed`` may be an int, a ``SeedSequence`` or an existing ``Generator``
    (returned unchanged).
    """
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.Philox(seed))
