"""Maximum-likelihood power-law fits for positive integer samples.

Two estimators are available:

``"discrete"`` (default)
    Exact discrete MLE.  The likelihood ``prod x**-alpha / zeta(alpha, x_min)``
    is maximized numerically and goodness of fit uses the exact discrete CDF
    ``1 - zeta(alpha, x + 1) / zeta(alpha, x_min)``.
``"approx"``
    Closed form ``alpha = 1 + n / sum(log(x / (x_min - 0.5)))``, with the
    matching continuous CDF evaluated at ``x + 0.5``.  Fast, but biased for
    small ``x_min`` (about 2.10 for true alpha 2.5 at ``x_min = 1``).

With ``x_min=None`` every distinct sample value is tried as a cutoff and the
one minimizing the KS distance wins (ties go to the smaller cutoff).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import zeta

from . import kernels

ALPHA_BOUNDS = (1.0 + 1e-6, 60.0)


class PowerLawFitError(ValueError):
    pass


class TooFewSamplesError(PowerLawFitError):
    pass


class FitUndefinedError(PowerLawFitError):
    pass


@dataclass(frozen=True)
class PowerLawFit:
    alpha: float
    x_min: int
    ks_distance: float
    n_tail: int
    method: str = "discrete"

    def to_dict(self) -> dict:
        return asdict(self)


def _as_samples(samples) -> np.ndarray:
    x = np.asarray(list(samples) if not hasattr(samples, "__len__") else samples, dtype=np.float64)
    if x.ndim != 1:
        x = x.ravel()
    if x.size and (np.any(~np.isfinite(x)) or np.any(x < 1) or np.any(x != np.round(x))):
        raise ValueError("samples must be positive integers")
    return np.sort(x)


def _ks(values: np.ndarray, counts_upto: np.ndarray, m: int, cdf_at, cdf_before) -> float:
    c = counts_upto / m
    c_before = np.concatenate([[0.0], c[:-1]])
    return float(max(np.abs(c - cdf_at).max(), np.abs(c_before - cdf_before).max()))


def _tail_summary(tail: np.ndarray):
    uniq, counts = np.unique(tail, return_counts=True)
    return uniq, np.cumsum(counts)


def discrete_alpha(tail: np.ndarray, x_min: float) -> float:
    m = tail.size
    log_sum = float(np.log(tail).sum())

    def nll(a):
        return m * math.log(zeta(a, x_min)) + a * log_sum

    res = minimize_scalar(nll, bounds=ALPHA_BOUNDS, method="bounded", options={"xatol": 1e-10})
    return float(res.x)


def _fit_discrete_at(tail: np.ndarray, x_min: float) -> PowerLawFit:
    alpha = discrete_alpha(tail, x_min)
    uniq, upto = _tail_summary(tail)
    z0 = zeta(alpha, x_min)
    cdf_at = 1.0 - zeta(alpha, uniq + 1.0) / z0
    cdf_before = 1.0 - zeta(alpha, uniq) / z0
    d = _ks(uniq, upto, tail.size, cdf_at, cdf_before)
    return PowerLawFit(alpha, int(x_min), d, int(tail.size), "discrete")


def _fit_approx_at(tail: np.ndarray, x_min: float) -> PowerLawFit:
    m = tail.size
    s = float(np.log(tail / (x_min - 0.5)).sum())
    alpha = 1.0 + m / s
    uniq, upto = _tail_summary(tail)
    base = x_min - 0.5
    cdf_at = 1.0 - ((uniq + 0.5) / base) ** (1.0 - alpha)
    cdf_before = 1.0 - ((uniq - 0.5) / base) ** (1.0 - alpha)
    d = _ks(uniq, upto, m, cdf_at, cdf_before)
    return PowerLawFit(alpha, int(x_min), d, m, "approx")


def fit_power_law(
    samples,
    x_min: int | None = None,
    method: str = "discrete",
    min_tail: int = 10,
) -> PowerLawFit:
    """Fit ``P(x) ~ x**-alpha`` for ``x >= x_min``.

    Parameters
    ----------
    samples : iterable of positive integers
    x_min : int or None
        Fixed lower cutoff, or ``None`` to scan for the KS-minimizing cutoff.
    method : {"discrete", "approx"}
    min_tail : int
        Fewest samples a tail may hold.

    Raises
    ------
    TooFewSamplesError
        Fewer than ``min_tail`` samples at or above the cutoff.
    FitUndefinedError
        Every candidate tail is a single repeated value.
    """
    if method not in ("discrete", "approx"):
        raise ValueError(f"unknown method {method!r}")
    x = _as_samples(samples)
    fit_at = _fit_discrete_at if method == "discrete" else _fit_approx_at

    if x_min is not None:
        if x_min < 1:
            raise ValueError("x_min must be >= 1")
        tail = x[x >= x_min]
        if tail.size < min_tail:
            raise TooFewSamplesError(f"{tail.size} samples >= x_min={x_min}, need {min_tail}")
        if tail[0] == tail[-1]:
            raise FitUndefinedError("all tail samples are equal")
        return fit_at(tail, float(x_min))

    if x.size < min_tail:
        raise TooFewSamplesError(f"{x.size} samples, need {min_tail}")
    if x[0] == x[-1]:
        raise FitUndefinedError("all samples are equal")

    if method == "approx":
        xmins, alphas, dists, tails = kernels.approx_xmin_scan(x, min_tail)
        if xmins.size == 0:
            raise FitUndefinedError("no cutoff leaves a usable tail")
        best = int(np.argmin(dists))
        return PowerLawFit(
            float(alphas[best]), int(xmins[best]), float(dists[best]), int(tails[best]), "approx"
        )

    best_fit = None
    for cand in np.unique(x):
        tail = x[x >= cand]
        if tail.size < min_tail:
            break
        if tail[0] == tail[-1]:
            break
        fit = _fit_discrete_at(tail, float(cand))
        if best_fit is None or fit.ks_distance < best_fit.ks_distance:
            best_fit = fit
    if best_fit is None:
        raise FitUndefinedError("no cutoff leaves a usable tail")
    return best_fit


def sample_discrete_power_law(alpha: float, n: int, rng: np.random.Generator, x_min: int = 1,
                              x_max: int = 10**7) -> np.ndarray:
    """Inverse-CDF draws from the discrete power law on ``[x_min, x_max]``.

    The survival function ``zeta(alpha, x) / zeta(alpha, x_min)`` is inverted
    by bisection, so draws are exact up to the truncation at ``x_max``.
    """
    u = rng.random(n)
    z0 = zeta(alpha, x_min)
    lo = np.full(n, x_min, dtype=np.int64)
    hi = np.full(n, x_max, dtype=np.int64)
    # invariant: survival(lo) >= u, answer is the largest such x
    while True:
        active = hi > lo
        if not active.any():
            break
        mid = (lo + hi + 1) // 2
        ok = zeta(alpha, mid.astype(np.float64)) / z0 >= u
        lo = np.where(active & ok, mid, lo)
        hi = np.where(active & ~ok, mid - 1, hi)
    return lo
