"""Description-length bookkeeping and regime selection.

All costs are in bits. The incremental model cost of describing a new
window depends on whether the window stays in the active regime (free),
switches to another stored regime (one more switch record), or needs a
brand new regime (one more regime plus one more switch record).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .config import DetectorConfig
from .exceptions import InvalidParameterError
from .sifi import log_likelihood, refit_time_mixture
from .types import AttributeSchema, ComponentMatrices, CompactDescription, CurrentTensor, Regime

LOG_STAR_C0 = 2.865064
LN2 = math.log(2.0)


class Case(str, enum.Enum):
    SAME_REGIME = "same_regime"
    SWITCH_EXISTING = "switch_existing"
    NEW_REGIME = "new_regime"


_CASE_RANK = {Case.SAME_REGIME: 0, Case.SWITCH_EXISTING: 1, Case.NEW_REGIME: 2}


@dataclass(frozen=True)
class CostBreakdown:
    case: Case
    regime_id: int
    delta_model_cost: float
    data_cost: float

    @property
    def total(self) -> float:
        return self.delta_model_cost + self.data_cost


def log_star(n: int) -> float:
    """Universal code length of a positive integer, in bits."""
    if n < 1 or int(n) != n:
        raise InvalidParameterError(f"log_star needs a positive integer, got {n!r}")
    bits = math.log2(LOG_STAR_C0)
    x = math.log2(n)
    while x > 0:
        bits += x
        x = math.log2(x)
    return bits


def _log_star0(n: int) -> float:
    # counts that may legitimately be zero (no regimes/switches yet) cost nothing
    return 0.0 if n == 0 else log_star(n)


def n_free_parameters(K: int, vocab_sizes, n_continuous: int, n_ticks: int) -> int:
    return K * sum(u - 1 for u in vocab_sizes) + 2 * K * n_continuous + n_ticks * (K - 1)


def model_cost_regime(matrices: ComponentMatrices, schema: AttributeSchema = None,
                      float_bits: float = 32.0) -> float:
    """Bits to describe one regime: dimension headers plus its free parameters."""
    K = matrices.K
    vocab = [a.shape[1] for a in matrices.cat_dists]
    if schema is not None and schema.vocab_sizes:
        vocab = [max(u, s) for u, s in zip(vocab, schema.vocab_sizes)]
    header = log_star(K) + sum(log_star(max(u, 1)) for u in vocab)
    params = n_free_parameters(K, vocab, len(matrices.gamma_params), matrices.n_ticks)
    return header + float_bits * params


def model_cost_switch(t_s: int, R: int) -> float:
    """Bits for one switch record: its position and the target regime's id."""
    if R < 1:
        raise InvalidParameterError("need at least one regime")
    return log_star(t_s) + math.log2(R)


def delta_model_cost(case: Case, regime: Regime, c: CompactDescription, t_s: int,
                     float_bits: float = 32.0) -> float:
    """Increase of the model cost caused by describing the next window with ``regime``.

    ``t_s`` is the 1-based position of the window. For a new regime the
    identifier is coded among ``R + 1`` regimes.
    """
    case = Case(case)
    if case is Case.SAME_REGIME:
        return 0.0
    G, R = c.G, c.R
    switch = _log_star0(G + 1) - _log_star0(G)
    if case is Case.SWITCH_EXISTING:
        return switch + model_cost_switch(t_s, R)
    return (_log_star0(R + 1) - _log_star0(R) + model_cost_regime(regime.matrices,
                                                                    float_bits=float_bits)
            + switch + model_cost_switch(t_s, R + 1))


def data_cost_bits(window: CurrentTensor, regime: Regime, config: DetectorConfig,
                   rng: np.random.Generator) -> float:
    """Bits to encode ``window`` with a stored regime (mixture refitted, rest frozen)."""
    if len(window) == 0:
        return 0.0
    adapted, state = refit_time_mixture(window, regime, config, rng)
    return -log_likelihood(window, adapted, state) / LN2


def select_regime(window: CurrentTensor, candidate: Regime, c: CompactDescription,
                  config: DetectorConfig, rng: np.random.Generator):
    """Pick the cheapest way to describe ``window``.

    Considers staying in the active regime, switching to each other stored
    regime and adopting ``candidate`` as a new regime. Ties prefer staying,
    then the lowest regime id, then the new regime.

    Returns
    -------
    chosen : Regime
    costs : list of CostBreakdown
        One entry per option considered, the chosen one first.
    """
    active = c.active_regime
    if len(window) == 0:
        if active is None:
            raise InvalidParameterError("empty window and no regime to fall back on")
        return active, [CostBreakdown(Case.SAME_REGIME, active.id, 0.0, 0.0)]
    t_s = window.window_index + 1
    # every stored regime is priced with the same random stream
    seed = int(rng.integers(2**63 - 1))
    costs = []
    for regime in c.regimes:
        case = Case.SAME_REGIME if regime is active else Case.SWITCH_EXISTING
        data = data_cost_bits(window, regime, config, np.random.default_rng(seed))
        costs.append(CostBreakdown(case, regime.id,
                                   delta_model_cost(case, regime, c, t_s, config.float_bits),
                                   data))
    costs.append(CostBreakdown(Case.NEW_REGIME, candidate.id,
                               delta_model_cost(Case.NEW_REGIME, candidate, c, t_s,
                                                config.float_bits),
                               -log_likelihood(window, candidate.matrices) / LN2))
    costs.sort(key=lambda b: (b.total, _CASE_RANK[b.case], b.regime_id))
    best = costs[0]
    chosen = candidate if best.case is Case.NEW_REGIME else c.regime(best.regime_id)
    return chosen, costs
