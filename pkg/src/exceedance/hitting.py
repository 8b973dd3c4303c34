"""Hitting times, the looped (censoring-corrected) estimator and run-length closed forms.

Hitting times are returned as Python ``int`` when finite and ``math.inf``
otherwise; vectorised variants return float arrays holding integer values
or ``inf``. Threshold intervals are open: ``V_t == b`` is not an exceedance.

All estimators assume the process (or its transformed version, see
:mod:`exceedance.nonstat`) is ergodic; the variance results in
:mod:`exceedance.uncertainty` further assume strong mixing with uniformly
integrable normalised sums. Neither assumption is checked from data.
"""

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from ._validation import check_index, check_series
from .errors import CensoredTransitError, DomainError


class ThresholdSchedule:
    """A time-indexed family of threshold sets ``beta_s`` for ``s = 0, 1, ...``.

    Subclasses answer membership for a relative time ``s`` and a value
    ``x``. ``floor_contains`` describes a constant region contained in every
    ``beta_s`` (``None`` when undeclared).
    """

    def contains(self, s, x):
        raise NotImplementedError

    def floor_contains(self, x):
        return None

    def shifted(self, shift):
        """The schedule ``s -> beta_{s + shift}``."""
        return GeneralRegion(lambda s, x: self.contains(s + shift, x),
                             floor=self.floor_contains)


@dataclass(frozen=True)
class ConstantInterval(ThresholdSchedule):
    """``beta_s = (b, inf)`` for every ``s``."""

    b: float

    def lower(self, s):
        return np.full(np.shape(s), float(self.b))

    def contains(self, s, x):
        return x > self.b

    def floor_contains(self, x):
        return x > self.b

    def shifted(self, shift):
        return self


@dataclass(frozen=True)
class VaryingInterval(ThresholdSchedule):
    """``beta_s = (b(s), inf)`` with ``b`` vectorised over integer arrays.

    ``floor`` is an optional constant ``b~`` with ``b(s) <= b~`` for all
    ``s``, i.e. ``(b~, inf)`` is contained in every ``beta_s``.
    """

    b: Callable[[np.ndarray], np.ndarray]
    floor: Optional[float] = None

    def lower(self, s):
        s = np.asarray(s)
        return np.broadcast_to(np.asarray(self.b(s), dtype=float), s.shape)

    def contains(self, s, x):
        return x > float(self.lower(np.asarray(s)))

    def floor_contains(self, x):
        if self.floor is None:
            return None
        return x > self.floor

    def shifted(self, shift):
        return VaryingInterval(lambda s: self.b(np.asarray(s) + shift), floor=self.floor)


@dataclass(frozen=True)
class GeneralRegion(ThresholdSchedule):
    """Arbitrary regions given by a membership predicate ``contains(s, x)``.

    ``x`` is a scalar for univariate series and a length-``N`` vector
    otherwise. Evaluation is a plain Python loop, so this form suits small
    series and tests; interval schedules have vectorised fast paths.
    """

    predicate: Callable[[int, object], bool]
    floor: Optional[Callable[[object], bool]] = None

    def contains(self, s, x):
        return bool(self.predicate(s, x))

    def floor_contains(self, x):
        if self.floor is None:
            return None
        return bool(self.floor(x))


def as_schedule(schedule):
    """Coerce a bare number to :class:`ConstantInterval`."""
    if isinstance(schedule, ThresholdSchedule):
        return schedule
    if np.ndim(schedule) == 0:
        return ConstantInterval(float(schedule))
    raise TypeError(f"cannot interpret {schedule!r} as a threshold schedule")


def everything():
    """The schedule whose sets cover all of the real line."""
    return ConstantInterval(-math.inf)


@dataclass(frozen=True)
class RunDecomposition:
    """Visit indices ``theta`` of a constant region and the wrapped gaps between them.

    ``gaps[i] = theta[i+1] - theta[i]`` with ``theta[n] = T + theta[0]``,
    so ``gaps`` sums to ``T``.
    """

    theta: np.ndarray
    T: int

    @property
    def wrapped_last(self):
        return self.T + int(self.theta[0])

    @property
    def gaps(self):
        return np.diff(np.append(self.theta, self.wrapped_last))


def run_decomposition(series, b):
    """Visits of ``(b, inf)`` and their wrapped gaps; ``theta`` may be empty."""
    values = check_series(series)
    theta = np.flatnonzero(values > b)
    return RunDecomposition(theta=theta, T=len(values))


def _as_time(x):
    return math.inf if x == math.inf else int(x)


def _member_mask(values, schedule, s):
    """Vectorised ``values[i] in beta_{s[i]}`` for interval schedules."""
    return values > schedule.lower(s)


def hitting_time(series, schedule, t):
    """Raw hitting time ``min{s >= 0 : V_{t+s} in beta_s}`` within the observed window.

    Returns ``math.inf`` when no index ``t + s < T`` qualifies, which is the
    right-censored case that :func:`looped_hitting_time` resolves.
    """
    schedule = as_schedule(schedule)
    values = check_series(series, allow_multivariate=isinstance(schedule, GeneralRegion))
    T = len(values)
    t = check_index(t, T)
    if isinstance(schedule, GeneralRegion):
        for s in range(T - t):
            if schedule.contains(s, values[t + s]):
                return s
        return math.inf
    hit = np.flatnonzero(_member_mask(values[t:], schedule, np.arange(T - t)))
    return int(hit[0]) if hit.size else math.inf


def looped_hitting_time(series, schedule, t):
    """Censoring-corrected hitting time obtained by reading the data modulo ``T``.

    Scans ``s = 0, ..., 2T - t - 1`` testing ``V_{(t+s) mod T} in beta_s``.
    Agrees with :func:`hitting_time` whenever that is finite.
    """
    schedule = as_schedule(schedule)
    values = check_series(series, allow_multivariate=isinstance(schedule, GeneralRegion))
    T = len(values)
    t = check_index(t, T)
    n = 2 * T - t
    if isinstance(schedule, GeneralRegion):
        for s in range(n):
            if schedule.contains(s, values[(t + s) % T]):
                return s
        return math.inf
    idx = (t + np.arange(n)) % T
    hit = np.flatnonzero(_member_mask(values[idx], schedule, np.arange(n)))
    return int(hit[0]) if hit.size else math.inf


def _next_true(mask):
    """``out[j] = min{k >= j : mask[k]}`` with ``len(mask)`` as the not-found sentinel."""
    n = len(mask)
    pos = np.where(mask, np.arange(n), n)
    return np.minimum.accumulate(pos[::-1])[::-1]


def looped_hitting_times(series, schedule):
    """:func:`looped_hitting_time` for every ``t`` at once, as a float array.

    Constant thresholds use an O(T) next-visit sweep. Varying intervals jump
    between candidate indices (values above the smallest threshold) and
    test each candidate against the threshold at the candidate's offset, so
    the cost is driven by the number of rejected candidates rather than by
    the length of the hitting times.
    """
    schedule = as_schedule(schedule)
    if isinstance(schedule, GeneralRegion):
        values = check_series(series, allow_multivariate=True)
        return np.array([looped_hitting_time(values, schedule, t) for t in range(len(values))],
                        dtype=float)
    values = check_series(series)
    T = len(values)
    ts = np.arange(T)
    if isinstance(schedule, ConstantInterval):
        nxt = _next_true(np.tile(values > schedule.b, 2))[:T]
        out = (nxt - ts).astype(float)
        out[nxt == 2 * T] = math.inf
        return out

    doubled = np.tile(values, 2)
    lower = schedule.lower(np.arange(2 * T))
    nxt = np.append(_next_true(doubled > lower.min()), 2 * T)
    out = np.full(T, math.inf)
    active = ts
    pos = nxt[active]
    while True:
        keep = pos < 2 * T
        active, pos = active[keep], pos[keep]
        if not active.size:
            break
        ok = doubled[pos] > lower[pos - active]
        out[active[ok]] = pos[ok] - active[ok]
        active, pos = active[~ok], nxt[pos[~ok] + 1]
    return out


def raw_hitting_times(series, schedule):
    """:func:`hitting_time` for every ``t``; ``inf`` marks censored starts."""
    schedule = as_schedule(schedule)
    looped = looped_hitting_times(series, schedule)
    T = len(looped)
    return np.where(looped < T - np.arange(T), looped, math.inf)


def transit_time(series, region, T_ref):
    """Gap between the nearest visits to a constant region around ``T_ref``, minus one.

    ``region`` is a threshold ``b`` (meaning ``(b, inf)``) or a predicate.
    Raises :class:`CensoredTransitError` if either side has no visit in the
    data; its ``bound`` is the transit time the observed side already implies.
    """
    if callable(region):
        values = check_series(series, allow_multivariate=True)
        inside = np.array([bool(region(x)) for x in values])
    else:
        values = check_series(series)
        inside = values > float(region)
    T = len(values)
    T_ref = check_index(T_ref, T, name="T_ref")
    before = np.flatnonzero(inside[:T_ref + 1])
    after = np.flatnonzero(inside[T_ref:])
    if not before.size or not after.size:
        lo = int(before[-1]) if before.size else -1
        hi = T_ref + int(after[0]) if after.size else T
        raise CensoredTransitError(
            f"region not visited {'before' if not before.size else 'after'} T_ref={T_ref}",
            bound=max(hi - lo - 1, 0))
    theta_minus = int(before[-1])
    theta_plus = T_ref + int(after[0])
    return max(theta_plus - theta_minus - 1, 0)


def run_length_moment(series, b, f):
    """``(1/T) sum_t f(tau_hat(t))`` through the gap decomposition, in O(T).

    ``f`` must accept an integer array. Returns ``math.inf`` when the series
    never exceeds ``b``. The sum is accumulated before the single division
    by ``T``.
    """
    runs = run_decomposition(series, b)
    if not runs.theta.size:
        return math.inf
    gaps = runs.gaps
    partial = np.cumsum(np.asarray(f(np.arange(gaps.max())), dtype=float))
    return float(partial[gaps - 1].sum()) / runs.T


def closed_form_mean(series, b):
    """``sum_i dtheta_i (dtheta_i - 1) / (2T)``, accumulated in integers."""
    runs = run_decomposition(series, b)
    if not runs.theta.size:
        return math.inf
    gaps = runs.gaps.astype(np.int64)
    return int((gaps * (gaps - 1)).sum()) / (2 * runs.T)


def mean_exceedance_estimate(series, schedule):
    """Ergodic estimate of the mean exceedance (return) time.

    Constant thresholds use the gap closed form; other schedules average the
    looped hitting times. The estimate is ``math.inf`` when any looped time
    is infinite. For constant thresholds a finite value never exceeds
    ``(T - 1) / 2``.
    """
    schedule = as_schedule(schedule)
    if isinstance(schedule, ConstantInterval):
        return closed_form_mean(series, schedule.b)
    return mean_of_times(looped_hitting_times(series, schedule))


def mean_of_times(times):
    """Exact mean of integer-valued times; ``inf`` if any is infinite."""
    times = np.asarray(times)
    if not np.isfinite(times).all():
        return math.inf
    return int(times.astype(np.int64).sum()) / len(times)


def discard_censored_estimate(series, schedule):
    """Average of raw hitting times over the uncensored prefix ``t < T~``.

    ``T~`` is the first start whose hitting time is censored. Kept as a
    comparator for the looped estimator.
    """
    raw = raw_hitting_times(series, schedule)
    censored = np.flatnonzero(~np.isfinite(raw))
    T_tilde = int(censored[0]) if censored.size else len(raw)
    if T_tilde == 0:
        return math.inf
    return mean_of_times(raw[:T_tilde])


def discrepancy_bound(transit, lambda_bar, p, q, C1, C2):
    """Upper bound on ``sum_t |f(tau) - f(tau_hat)|^q`` for ``|f(t)| <= C1 + C2 t^p``.

    ``transit`` is the transit time at the end of the data and
    ``lambda_bar`` bounds the wrap-around correction.
    """
    for name, v in (("transit", transit), ("lambda_bar", lambda_bar), ("p", p),
                    ("q", q), ("C1", C1), ("C2", C2)):
        if v < 0:
            raise DomainError(f"{name} must be nonnegative, got {v}")
    if transit == 0:
        return 0.0
    near = (C1 + C2 * transit ** p) ** q
    far = (C1 + C2 * (transit + lambda_bar) ** p) ** q
    return float(transit * (near + far))
