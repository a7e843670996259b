"""Gamma shape/rate estimation with pseudo-count priors.

Prior knowledge is expressed as pseudo sufficient statistics
``(n, sum, sum_logs)`` that are added to the observed ones before solving
the maximum-likelihood equation for the shape,

    log(a) - digamma(a) = log(mean) - mean_log = s,

with the closed-form starting point of Choi & Wette / Minka followed by
Newton steps. The rate is then ``a / mean``.
"""

from __future__ import annotations

from typing import NamedTuple

import numpy as np
from scipy.special import digamma, gammaln, zeta

from .exceptions import InvalidParameterError

SHAPE_MAX = 1e4
NEWTON_TOL = 1e-8
NEWTON_MAX_ITER = 50


class GammaPrior(NamedTuple):
    """Pseudo-count, pseudo-sum and pseudo-log-sum."""

    n: float = 1.0
    sum: float = 1.0
    sum_logs: float = 0.0

    @classmethod
    def from_params(cls, shape, rate, weight):
        """Pseudo-statistics whose own fit returns exactly ``(shape, rate)``."""
        mean = shape / rate
        mean_log = digamma(shape) - np.log(rate)
        return cls(weight, weight * mean, weight * mean_log)


def initial_shape(s):
    """Closed-form approximation to the root of ``log(a) - digamma(a) = s``."""
    s = np.asarray(s, dtype=np.float64)
    return (3.0 - s + np.sqrt((s - 3.0) ** 2 + 24.0 * s)) / (12.0 * s)


def solve_shape(s):
    """Solve ``log(a) - digamma(a) = s`` elementwise for ``s > 0``.

    Entries with ``s <= 0`` (no spread in log space) are clamped to
    ``SHAPE_MAX``.
    """
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    out = np.full(s.shape, SHAPE_MAX)
    ok = s > 0
    if not np.any(ok):
        return out
    ss = s[ok]
    a = np.minimum(initial_shape(ss), SHAPE_MAX)
    # converged entries keep taking (negligible) steps until every entry is done
    for _ in range(NEWTON_MAX_ITER):
        f = np.log(a) - digamma(a) - ss
        fp = 1.0 / a - zeta(2.0, a)  # trigamma
        new = a - f / fp
        # f is convex and decreasing; an overshoot below zero is pulled back
        new = np.where(new <= 0, a / 2.0, new)
        done = np.all(np.abs(new - a) <= NEWTON_TOL * a)
        a = new
        if done:
            break
    out[ok] = np.minimum(a, SHAPE_MAX)
    return out


def fit_gamma_arrays(count, total, total_logs, prior_n, prior_sum, prior_logs):
    """Vectorised shape/rate fit over arrays of sufficient statistics."""
    n = np.asarray(count, dtype=np.float64) + prior_n
    sx = np.asarray(total, dtype=np.float64) + prior_sum
    sl = np.asarray(total_logs, dtype=np.float64) + prior_logs
    if not (np.all(np.isfinite(n)) and np.all(np.isfinite(sx)) and np.all(np.isfinite(sl))):
        raise InvalidParameterError("non-finite Gamma sufficient statistics")
    if np.any(n <= 0):
        raise InvalidParameterError("Gamma fit needs a positive (pseudo-)count")
    mean = sx / n
    if np.any(mean <= 0):
        raise InvalidParameterError("Gamma fit needs a positive mean")
    s = np.log(mean) - sl / n
    shape = solve_shape(s.reshape(-1)).reshape(s.shape)
    return shape, shape / mean


def fit_gamma_shape_rate(count, sum, sum_logs, prior=GammaPrior()):
    """Fit ``(shape, rate)`` from observed plus prior sufficient statistics.

    Parameters
    ----------
    count, sum, sum_logs : float
        Number of observations, their sum and the sum of their logarithms.
    prior : GammaPrior
        Pseudo-statistics merged additively with the observed ones.

    Returns
    -------
    shape, rate : float
    """
    vals = (count, sum, sum_logs) + tuple(prior)
    if not all(np.isfinite(v) for v in vals):
        raise InvalidParameterError("non-finite input to Gamma fit")
    a, b = fit_gamma_arrays(count, sum, sum_logs, *prior)
    return float(a), float(b)


def shape_residual(shape, s):
    """``log(a) - digamma(a) - s``; zero at an exact fixed point."""
    return np.log(shape) - digamma(shape) - s


def gamma_logpdf(x, shape, rate):
    """Log density, broadcasting ``x`` against ``shape``/``rate``."""
    return shape * np.log(rate) - gammaln(shape) + (shape - 1.0) * np.log(x) - rate * x
