"""Window decomposition into categorical/Gamma components by collapsed Gibbs sampling.

Each event carries one latent component. Categorical attributes are
multinomial per component and are collapsed out against Dirichlet priors;
continuous attributes are Gamma per component, with shape and rate
re-estimated once per sweep from the component's sufficient statistics
plus prior pseudo-statistics. The per-tick component mixture is collapsed
against its own Dirichlet prior.

Priors come either from :func:`initial_priors` or from a previous fit via
:func:`carry_priors`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Optional

import numpy as np
from scipy.special import gammaln, logsumexp

from ._kernels import draw_from_log_weights, gibbs_sweep_kernel
from .config import DetectorConfig
from .exceptions import EmptyWindowError, InvalidParameterError, NumericalError
from .gamma import GammaPrior, fit_gamma_arrays, gamma_logpdf
from .types import AttributeSchema, ComponentMatrices, CurrentTensor, Event, Regime

logger = logging.getLogger(__name__)


@dataclass
class PriorMatrices:
    """Dirichlet pseudo-counts and Gamma pseudo-statistics.

    ``gamma_priors[m]`` is ``K x 3`` with columns (count, sum, sum of logs).
    """

    cat_priors: list[np.ndarray]
    gamma_priors: list[np.ndarray]
    time_priors: np.ndarray

    @property
    def K(self) -> int:
        return int(self.time_priors.shape[1])

    def time_prior_for(self, n_ticks: int) -> np.ndarray:
        if self.time_priors.shape[0] == n_ticks:
            return self.time_priors
        return np.tile(self.time_priors.mean(axis=0), (n_ticks, 1))

    @cached_property
    def _prior_params(self):
        if not self.gamma_priors:
            return np.empty((self.K, 0)), np.empty((self.K, 0))
        g = np.stack(self.gamma_priors, axis=1)  # K x M2 x 3
        return fit_gamma_arrays(0.0, 0.0, 0.0, g[..., 0], g[..., 1], g[..., 2])

    def gamma_prior_params(self):
        """Shape/rate obtained from the prior statistics alone, ``K x M2`` each.

        Computed once; the prior arrays are not meant to change afterwards.
        """
        return self._prior_params


@dataclass
class GibbsState:
    """Assignments and the count tables derived from them.

    ``z[i] == -1`` marks an event that has not been assigned yet.
    Categorical counts for all attributes live side by side in one
    ``K x sum(U)`` table; :attr:`cat_counts` exposes per-attribute views.
    """

    z: np.ndarray
    ticks: np.ndarray
    time_counts: np.ndarray
    comp_counts: np.ndarray
    packed_cat_counts: np.ndarray
    offsets: np.ndarray
    cont_sum: np.ndarray
    cont_sum_logs: np.ndarray
    shape: np.ndarray
    rate: np.ndarray

    @property
    def K(self) -> int:
        return int(self.comp_counts.shape[0])

    @property
    def cat_counts(self) -> list[np.ndarray]:
        ends = list(self.offsets[1:]) + [self.packed_cat_counts.shape[1]]
        return [self.packed_cat_counts[:, a:b] for a, b in zip(self.offsets, ends)]

    @property
    def cont_count(self) -> np.ndarray:
        return self.comp_counts

    def copy(self) -> "GibbsState":
        return GibbsState(*(np.array(getattr(self, f)) for f in self.__dataclass_fields__))


# -- priors ---------------------------------------------------------------

def initial_priors(schema: AttributeSchema, K: int, n_ticks: int = 1) -> PriorMatrices:
    """Flat priors for the very first window: ``1/K`` pseudo-counts and a unit Gamma prior."""
    if K < 1:
        raise InvalidParameterError("K must be >= 1")
    cat = [np.full((K, max(u, 1)), 1.0 / K) for u in schema.vocab_sizes]
    gam = [np.tile(np.array(GammaPrior(), dtype=np.float64), (K, 1))
           for _ in range(schema.n_continuous)]
    return PriorMatrices(cat, gam, np.full((n_ticks, K), 1.0 / K))


def carry_priors(matrices: ComponentMatrices, beta: float, floor: float = 1e-3,
                 n_ticks: Optional[int] = None) -> PriorMatrices:
    """Turn fitted matrices into priors for the next window.

    Each component contributes ``beta * support_k`` pseudo-events, spread
    over units according to its distributions; every cell is floored.
    """
    K = matrices.K
    weight = beta * matrices.support
    cat = [np.maximum(weight[:, None] * a, floor) for a in matrices.cat_dists]
    gam = []
    for g in matrices.gamma_params:
        pseudo = np.maximum(weight, floor)
        gam.append(np.column_stack(GammaPrior.from_params(g[:, 0], g[:, 1], pseudo)))
    T = matrices.n_ticks if n_ticks is None else n_ticks
    time = np.maximum(np.tile(weight / T, (T, 1)), floor)
    return PriorMatrices(cat, gam, time)


def _vocab_for(window: CurrentTensor, widths) -> list[int]:
    sizes = []
    for m, w in enumerate(widths):
        u = max(int(w), int(window.vocab_sizes[m]) if window.vocab_sizes else 1, 1)
        if len(window):
            u = max(u, int(window.cats[:, m].max()) + 1)
        sizes.append(u)
    return sizes


def _pad_columns(a: np.ndarray, width: int, value: float) -> np.ndarray:
    if a.shape[1] >= width:
        return a
    return np.hstack([a, np.full((a.shape[0], width - a.shape[1]), value)])


def extend_vocab(matrices: ComponentMatrices, vocab_sizes) -> ComponentMatrices:
    """Grow categorical distributions to new dictionary sizes.

    Existing rows are treated as ``max(support_k, 1)`` pseudo-events; each
    new unit receives ``1/K`` extra pseudo-mass before renormalising.
    """
    K = matrices.K
    out = []
    for a, u in zip(matrices.cat_dists, vocab_sizes):
        extra = u - a.shape[1]
        if extra <= 0:
            out.append(a)
            continue
        w = np.maximum(matrices.support, 1.0)[:, None]
        grown = np.hstack([a * w, np.full((K, extra), 1.0 / K)])
        out.append(grown / grown.sum(axis=1, keepdims=True))
    return ComponentMatrices(out, matrices.gamma_params, matrices.time_mix, matrices.support)


# -- state ----------------------------------------------------------------

def _packed_priors(priors: PriorMatrices, vocab):
    K = priors.K
    parts = [_pad_columns(p, u, 1.0 / K) for p, u in zip(priors.cat_priors, vocab)]
    sums = np.array([p.sum(axis=1) for p in parts]).reshape(len(parts), K)
    packed = np.hstack(parts) if parts else np.empty((K, 0))
    return packed, sums


def _offsets(vocab) -> np.ndarray:
    return np.concatenate([[0], np.cumsum(vocab)[:-1]]).astype(np.int64) if vocab else np.zeros(
        0, dtype=np.int64)


def init_state(window: CurrentTensor, priors: PriorMatrices) -> GibbsState:
    """Empty state for ``window``: nothing assigned, Gamma parameters from the prior."""
    K = priors.K
    n = len(window)
    vocab = _vocab_for(window, [p.shape[1] for p in priors.cat_priors])
    shape, rate = priors.gamma_prior_params()
    M2 = window.conts.shape[1]
    return GibbsState(
        z=np.full(n, -1, dtype=np.int64),
        ticks=window.ticks,
        time_counts=np.zeros((window.n_ticks, K), dtype=np.int64),
        comp_counts=np.zeros(K, dtype=np.int64),
        packed_cat_counts=np.zeros((K, int(sum(vocab))), dtype=np.int64),
        offsets=_offsets(vocab),
        cont_sum=np.zeros((K, M2)),
        cont_sum_logs=np.zeros((K, M2)),
        shape=shape.reshape(K, M2),
        rate=rate.reshape(K, M2),
    )


def rebuild_counts(window: CurrentTensor, state: GibbsState) -> GibbsState:
    """Recompute every count table from the assignments by direct enumeration."""
    K = state.K
    fresh = state.copy()
    fresh.time_counts[:] = 0
    fresh.comp_counts[:] = 0
    fresh.packed_cat_counts[:] = 0
    fresh.cont_sum[:] = 0.0
    fresh.cont_sum_logs[:] = 0.0
    for i in range(len(window)):
        k = state.z[i]
        if k < 0:
            continue
        fresh.time_counts[state.ticks[i], k] += 1
        fresh.comp_counts[k] += 1
        for m in range(window.cats.shape[1]):
            fresh.packed_cat_counts[k, state.offsets[m] + window.cats[i, m]] += 1
        for m in range(window.conts.shape[1]):
            fresh.cont_sum[k, m] += window.conts[i, m]
            fresh.cont_sum_logs[k, m] += np.log(window.conts[i, m])
    assert fresh.comp_counts.shape == (K,)
    return fresh


def _gamma_ll(conts: np.ndarray, shape: np.ndarray, rate: np.ndarray,
              log_conts: Optional[np.ndarray] = None) -> np.ndarray:
    """Summed Gamma log-density of each event under each component, ``N x K``."""
    n, M2 = conts.shape
    K = shape.shape[0]
    if M2 == 0:
        return np.zeros((n, K))
    if log_conts is None:
        log_conts = np.log(conts)
    const = (shape * np.log(rate) - gammaln(shape)).sum(axis=1)
    return log_conts @ (shape - 1.0).T - conts @ rate.T + const


def _refresh_gamma(window: CurrentTensor, state: GibbsState, priors: PriorMatrices,
                   log_conts: np.ndarray):
    M2 = window.conts.shape[1]
    if M2 == 0:
        return
    K = state.K
    z = state.z
    for m in range(M2):
        state.cont_sum[:, m] = np.bincount(z, weights=window.conts[:, m], minlength=K)
        state.cont_sum_logs[:, m] = np.bincount(z, weights=log_conts[:, m], minlength=K)
    g = np.stack(priors.gamma_priors, axis=1)  # K x M2 x 3
    counts = np.repeat(state.comp_counts[:, None].astype(np.float64), M2, axis=1)
    shape, rate = fit_gamma_arrays(counts, state.cont_sum, state.cont_sum_logs,
                                   g[..., 0], g[..., 1], g[..., 2])
    prior_shape, prior_rate = priors.gamma_prior_params()
    thin = counts < 2
    state.shape = np.where(thin, prior_shape, shape)
    state.rate = np.where(thin, prior_rate, rate)


def _run_kernel(window, state, fixed_ll, collapse, time_prior, cat_prior, cat_prior_sum, rng):
    uniforms = rng.random(len(window))
    cats = window.cats if collapse else np.zeros((len(window), 0), dtype=np.int64)
    n_fallback = gibbs_sweep_kernel(
        state.z, state.ticks, cats, state.offsets, fixed_ll, state.time_counts, time_prior,
        state.comp_counts, state.packed_cat_counts, cat_prior, cat_prior_sum, collapse,
        uniforms)
    if n_fallback:
        logger.warning("window %d: %d events had no finite component weight; "
                       "sampled uniformly", window.window_index, n_fallback)


def gibbs_sweep(window: CurrentTensor, state: GibbsState, priors: PriorMatrices,
                rng: np.random.Generator) -> GibbsState:
    """Reassign every event once, then refit the Gamma parameters.

    The state is updated in place and returned.
    """
    if len(window) == 0:
        return state
    vocab = np.diff(np.append(state.offsets, state.packed_cat_counts.shape[1]))
    cat_prior, cat_prior_sum = _packed_priors(priors, list(vocab))
    log_conts = np.log(window.conts)
    fixed_ll = _gamma_ll(window.conts, state.shape, state.rate, log_conts)
    _run_kernel(window, state, fixed_ll, True, priors.time_prior_for(window.n_ticks),
                cat_prior, cat_prior_sum, rng)
    _refresh_gamma(window, state, priors, log_conts)
    return state


def assignment_log_weights(event: Event, tick: int, state: GibbsState,
                           priors: PriorMatrices) -> np.ndarray:
    """Unnormalised log conditional of each component for one (removed) event."""
    K = state.K
    n_ticks = state.time_counts.shape[0]
    logw = np.log(state.time_counts[tick] + priors.time_prior_for(n_ticks)[tick])
    vocab = list(np.diff(np.append(state.offsets, state.packed_cat_counts.shape[1])))
    cat_prior, cat_prior_sum = _packed_priors(priors, vocab)
    for m, u in enumerate(event.cat_values):
        c = state.offsets[m] + u
        logw = logw + np.log(state.packed_cat_counts[:, c] + cat_prior[:, c])
        logw = logw - np.log(state.comp_counts + cat_prior_sum[m])
    if event.cont_values:
        x = np.asarray(event.cont_values, dtype=np.float64)
        logw = logw + gamma_logpdf(x[None, :], state.shape, state.rate).sum(axis=1)
    assert logw.shape == (K,)
    return logw


def sample_assignment(event: Event, tick: int, state: GibbsState, priors: PriorMatrices,
                      rng: np.random.Generator) -> int:
    """Draw a component for ``event`` from its collapsed conditional.

    The event must already be removed from the count tables.
    """
    logw = assignment_log_weights(event, tick, state, priors)
    k, fell_back = draw_from_log_weights(logw, rng.random())
    if fell_back:
        logger.warning("no finite component weight; sampled uniformly")
    return int(k)


# -- window-level fits ----------------------------------------------------

def decompose(window: CurrentTensor, priors: PriorMatrices, config: DetectorConfig,
              rng: np.random.Generator, return_state: bool = False):
    """Fit component matrices to one window.

    Runs ``config.burn_in`` discarded sweeps followed by ``config.n_samples``
    sweeps whose count tables are averaged into posterior-mean estimates.
    Gamma parameters are those of the final sweep.
    """
    if len(window) == 0:
        raise EmptyWindowError(f"window {window.window_index} has no events")
    state = init_state(window, priors)
    K = priors.K
    acc_time = np.zeros(state.time_counts.shape)
    acc_cat = np.zeros(state.packed_cat_counts.shape)
    acc_comp = np.zeros(K)
    for sweep in range(config.burn_in + config.n_samples):
        gibbs_sweep(window, state, priors, rng)
        if sweep >= config.burn_in:
            acc_time += state.time_counts
            acc_cat += state.packed_cat_counts
            acc_comp += state.comp_counts
    acc_time /= config.n_samples
    acc_cat /= config.n_samples
    acc_comp /= config.n_samples

    vocab = list(np.diff(np.append(state.offsets, acc_cat.shape[1])))
    cat_prior, _ = _packed_priors(priors, vocab)
    cat_dists = []
    for m, u in enumerate(vocab):
        sl = slice(state.offsets[m], state.offsets[m] + u)
        num = acc_cat[:, sl] + cat_prior[:, sl]
        cat_dists.append(num / num.sum(axis=1, keepdims=True))
    tp = priors.time_prior_for(window.n_ticks)
    num = acc_time + tp
    time_mix = num / num.sum(axis=1, keepdims=True)
    gamma_params = [np.column_stack([state.shape[:, m], state.rate[:, m]])
                    for m in range(window.conts.shape[1])]
    out = ComponentMatrices(cat_dists, gamma_params, time_mix, support=acc_comp)
    return (out, state) if return_state else out


def _fixed_log_lik(window: CurrentTensor, matrices: ComponentMatrices) -> np.ndarray:
    """``N x K`` log-probability of each event's attributes under each component."""
    n = len(window)
    ll = np.zeros((n, matrices.K))
    with np.errstate(divide="ignore"):
        for m, a in enumerate(matrices.cat_dists):
            ll += np.log(a[:, window.cats[:, m]]).T
    if matrices.gamma_params:
        shape = np.column_stack([g[:, 0] for g in matrices.gamma_params])
        rate = np.column_stack([g[:, 1] for g in matrices.gamma_params])
        ll += _gamma_ll(window.conts, shape, rate)
    return ll


def refit_time_mixture(window: CurrentTensor, regime: Regime, config: DetectorConfig,
                       rng: np.random.Generator):
    """Re-estimate only the per-tick mixture of a stored regime on ``window``.

    Categorical and Gamma parameters stay fixed; Gibbs sweeps resample the
    assignments against the regime's distributions and a prior carried from
    the regime's own mixture.

    Returns
    -------
    matrices : ComponentMatrices
        The regime's parameters with ``time_mix`` fitted to this window.
    state : GibbsState
    """
    if len(window) == 0:
        raise EmptyWindowError(f"window {window.window_index} has no events")
    base = regime.matrices
    vocab = _vocab_for(window, [a.shape[1] for a in base.cat_dists])
    base = extend_vocab(base, vocab)
    K = base.K
    T = window.n_ticks
    priors = carry_priors(base, config.beta, config.prior_floor, n_ticks=T)
    state = init_state(window, priors)
    fixed_ll = _fixed_log_lik(window, base)
    empty_cat = np.zeros((K, 0))
    empty_sum = np.zeros((0, K))
    acc = np.zeros((T, K))
    for sweep in range(config.refit_burn_in + config.refit_samples):
        _run_kernel(window, state, fixed_ll, False, priors.time_priors, empty_cat, empty_sum, rng)
        if sweep >= config.refit_burn_in:
            acc += state.time_counts
    acc /= config.refit_samples
    num = acc + priors.time_priors
    time_mix = num / num.sum(axis=1, keepdims=True)
    return base.with_time_mix(time_mix), state


def event_log_likelihoods(window: CurrentTensor, matrices: ComponentMatrices) -> np.ndarray:
    """Natural-log mixture likelihood of every event, shape ``(N,)``."""
    if len(window) == 0:
        return np.zeros(0)
    vocab = _vocab_for(window, [a.shape[1] for a in matrices.cat_dists])
    matrices = extend_vocab(matrices, vocab)
    B = matrices.time_mix
    if B.shape[0] == 1:
        rows = np.zeros(len(window), dtype=np.int64)
    elif B.shape[0] == window.n_ticks:
        rows = window.ticks
    else:
        raise InvalidParameterError(
            f"time_mix has {B.shape[0]} ticks but the window has {window.n_ticks}")
    with np.errstate(divide="ignore"):
        logB = np.log(B[rows])
    return logsumexp(logB + _fixed_log_lik(window, matrices), axis=1)


def log_likelihood(window: CurrentTensor, matrices: ComponentMatrices,
                   state: Optional[GibbsState] = None) -> float:
    """Natural-log likelihood of the window under the component mixture."""
    if state is not None and state.z.shape[0] != len(window):
        raise InvalidParameterError("state does not belong to this window")
    ll = event_log_likelihoods(window, matrices)
    bad = np.flatnonzero(~np.isfinite(ll))
    if bad.size:
        raise NumericalError(f"non-finite likelihood at event {bad[0]}", event_index=int(bad[0]))
    return float(ll.sum())
