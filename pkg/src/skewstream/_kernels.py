"""Compiled inner loop of the Gibbs sampler."""

import math

import numpy as np
from numba import njit


@njit(cache=True)
def draw_from_log_weights(logw, u):
    """Inverse-CDF draw from unnormalised log weights using uniform ``u``.

    Returns ``(index, fell_back)``; falls back to a uniform draw when no
    weight is finite and positive.
    """
    K = logw.shape[0]
    mx = -np.inf
    for k in range(K):
        if logw[k] > mx:
            mx = logw[k]
    if not math.isfinite(mx):
        return min(int(u * K), K - 1), True
    w = np.empty(K)
    total = 0.0
    for k in range(K):
        v = math.exp(logw[k] - mx)
        if not math.isfinite(v):
            v = 0.0
        w[k] = v
        total += v
    if not (total > 0.0) or not math.isfinite(total):
        return min(int(u * K), K - 1), True
    target = u * total
    cum = 0.0
    for k in range(K):
        cum += w[k]
        if target < cum:
            return k, False
    # rounding left target at the very top
    for k in range(K - 1, -1, -1):
        if w[k] > 0.0:
            return k, False
    return K - 1, False


@njit(cache=True)
def gibbs_sweep_kernel(z, ticks, cats, offsets, fixed_ll, time_counts, time_prior,
                       comp_counts, cat_counts, cat_prior, cat_prior_sum, collapse,
                       uniforms):
    """Reassign every event once, keeping the count tables in sync.

    ``z[i] < 0`` marks an unassigned event (sequential initialisation).
    With ``collapse`` the categorical terms use the collapsed predictive
    ``(n_ku + prior_ku) / (n_k + sum_u prior_ku)``; otherwise all
    non-temporal terms must already be folded into ``fixed_ll``.
    Returns the number of uniform fallbacks.
    """
    N = z.shape[0]
    K = time_counts.shape[1]
    M1 = cats.shape[1]
    logw = np.empty(K)
    n_fallback = 0
    for i in range(N):
        t = ticks[i]
        old = z[i]
        if old >= 0:
            time_counts[t, old] -= 1
            comp_counts[old] -= 1
            if collapse:
                for m in range(M1):
                    cat_counts[old, offsets[m] + cats[i, m]] -= 1
        for k in range(K):
            lw = math.log(time_counts[t, k] + time_prior[t, k]) + fixed_ll[i, k]
            if collapse:
                for m in range(M1):
                    c = offsets[m] + cats[i, m]
                    lw += math.log(cat_counts[k, c] + cat_prior[k, c])
                    lw -= math.log(comp_counts[k] + cat_prior_sum[m, k])
            logw[k] = lw
        new, fell_back = draw_from_log_weights(logw, uniforms[i])
        if fell_back:
            n_fallback += 1
        z[i] = new
        time_counts[t, new] += 1
        comp_counts[new] += 1
        if collapse:
            for m in range(M1):
                cat_counts[new, offsets[m] + cats[i, m]] += 1
    return n_fallback
