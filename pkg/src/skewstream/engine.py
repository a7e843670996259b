"""The streaming loop: decompose, select a regime, update, score.

:func:`process_window` is the pure-ish core; :class:`StreamEngine` owns a
description, a config and a random generator and can persist all three to
a JSON snapshot from which a stream resumes bit-exactly.
"""

from __future__ import annotations

import json
import logging
import os
from typing import Optional

import numpy as np

from .config import DetectorConfig
from .exceptions import InvalidStateError
from .mdl import LN2, Case, CostBreakdown, data_cost_bits, delta_model_cost, select_regime
from .sifi import carry_priors, decompose, initial_priors, log_likelihood
from .types import (AttributeSchema, ComponentMatrices, CompactDescription, CurrentTensor,
                    Regime, ScoredWindow, SwitchRecord)

logger = logging.getLogger(__name__)

SNAPSHOT_FORMAT = "skewstream-snapshot"
SNAPSHOT_VERSION = 1


def majority_regime(c: CompactDescription) -> Regime:
    """Regime covering the most windows so far; ties go to the lowest id."""
    if not c.regimes:
        raise InvalidStateError("no regimes yet")
    return min(c.regimes, key=lambda r: (-r.total_segment_length, r.id))


def anomaly_score(window: CurrentTensor, c: CompactDescription, config: DetectorConfig,
                  rng: np.random.Generator) -> float:
    """Bits needed to encode ``window`` with the majority regime.

    Divided by the number of events when ``config.per_event_normalization``.
    Continuous attributes are coded by their density, so very tightly
    explained windows can score below zero.
    """
    if len(window) == 0:
        return 0.0
    bits = data_cost_bits(window, majority_regime(c), config, rng)
    if config.per_event_normalization:
        bits /= len(window)
    return bits


def _window_schema(window: CurrentTensor) -> AttributeSchema:
    m1, m2 = window.cats.shape[1], window.conts.shape[1]
    return AttributeSchema([f"c{i}" for i in range(m1)], [f"x{i}" for i in range(m2)],
                           list(window.vocab_sizes))


def _first_window_costs(window, candidate, c, config):
    delta = delta_model_cost(Case.NEW_REGIME, candidate, c, window.window_index + 1,
                             config.float_bits)
    data = -log_likelihood(window, candidate.matrices) / LN2
    return [CostBreakdown(Case.NEW_REGIME, candidate.id, delta, data)]


def process_window(window: CurrentTensor, c: CompactDescription, config: DetectorConfig,
                   rng: np.random.Generator):
    """Advance the stream by one window.

    ``c`` is updated in place and returned together with the window's
    record. The anomaly score is measured against the majority regime as
    it stood before this window was absorbed (for the very first window,
    against the window's own fit).
    """
    active = c.active_regime
    if len(window) == 0:
        rid = active.id if active is not None else -1
        return c, ScoredWindow(window.window_index, window.start_time, rid, False,
                               0.0, 0.0, 0.0, 0)

    T = window.n_ticks
    K = config.n_components
    if active is None:
        priors = initial_priors(_window_schema(window), K, T)
    else:
        priors = carry_priors(active.matrices, config.beta, config.prior_floor, n_ticks=T)
    next_id = max((r.id for r in c.regimes), default=-1) + 1
    candidate = Regime(next_id, decompose(window, priors, config, rng), 0)

    if c.regimes:
        chosen, costs = select_regime(window, candidate, c, config, rng)
        score = anomaly_score(window, c, config, rng)
    else:
        chosen, costs = candidate, _first_window_costs(window, candidate, c, config)
        score = anomaly_score(window, CompactDescription([Regime(candidate.id, candidate.matrices,
                                                                 1)]), config, rng)
    best = costs[0]

    if best.case is Case.NEW_REGIME:
        c.regimes.append(candidate)
        c.switches.append(SwitchRecord(window.window_index, candidate.id))
    elif best.case is Case.SWITCH_EXISTING:
        c.switches.append(SwitchRecord(window.window_index, chosen.id))
        if config.refresh_regimes:
            own = carry_priors(chosen.matrices, config.beta, config.prior_floor, n_ticks=T)
            chosen.matrices = decompose(window, own, config, rng)
    elif config.refresh_regimes:
        chosen.matrices = candidate.matrices
    chosen.total_segment_length += 1
    c.n_windows += 1

    record = ScoredWindow(window.window_index, window.start_time, chosen.id,
                          best.case is Case.NEW_REGIME, best.delta_model_cost, best.data_cost,
                          score, len(window))
    return c, record


# -- serialisation --------------------------------------------------------

def matrices_to_dict(m: ComponentMatrices) -> dict:
    return {
        "cat_dists": [a.tolist() for a in m.cat_dists],
        "gamma_params": [g.tolist() for g in m.gamma_params],
        "time_mix": m.time_mix.tolist(),
        "support": m.support.tolist(),
    }


def matrices_from_dict(d: dict) -> ComponentMatrices:
    K = len(d["support"])
    return ComponentMatrices(
        [np.array(a, dtype=np.float64).reshape(K, -1) for a in d["cat_dists"]],
        [np.array(g, dtype=np.float64).reshape(K, 2) for g in d["gamma_params"]],
        np.array(d["time_mix"], dtype=np.float64).reshape(-1, K),
        np.array(d["support"], dtype=np.float64))


def description_to_dict(c: CompactDescription) -> dict:
    return {
        "n_windows": c.n_windows,
        "regimes": [{"id": r.id, "total_segment_length": r.total_segment_length,
                     "matrices": matrices_to_dict(r.matrices)} for r in c.regimes],
        "switches": [[s.switch_time, s.regime_id] for s in c.switches],
    }


def description_from_dict(d: dict) -> CompactDescription:
    regimes = [Regime(r["id"], matrices_from_dict(r["matrices"]), r["total_segment_length"])
               for r in d["regimes"]]
    switches = [SwitchRecord(int(t), int(r)) for t, r in d["switches"]]
    return CompactDescription(regimes, switches, int(d["n_windows"]))


class StreamEngine:
    """Single-owner streaming state: description, config and random generator.

    Parameters
    ----------
    config : DetectorConfig
    seed : int, optional
        Seed of the generator driving every Gibbs sweep.
    """

    def __init__(self, config: DetectorConfig, seed: Optional[int] = None):
        self.config = config
        self.rng = np.random.default_rng(seed)
        self.description = CompactDescription()
        self.windows_seen = 0
        self.extra: dict = {}

    def process(self, window: CurrentTensor) -> ScoredWindow:
        if window.window_index != self.windows_seen:
            raise InvalidStateError(
                f"expected window {self.windows_seen}, got {window.window_index}")
        _, record = process_window(window, self.description, self.config, self.rng)
        self.windows_seen += 1
        return record

    def majority_regime(self) -> Regime:
        return majority_regime(self.description)

    # snapshots

    def to_dict(self) -> dict:
        return {
            "format": SNAPSHOT_FORMAT,
            "version": SNAPSHOT_VERSION,
            "config": self.config.to_dict(),
            "rng": self.rng.bit_generator.state,
            "windows_seen": self.windows_seen,
            "description": description_to_dict(self.description),
            "extra": self.extra,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StreamEngine":
        if d.get("format") != SNAPSHOT_FORMAT:
            raise ValueError("not a snapshot file")
        if d.get("version") != SNAPSHOT_VERSION:
            raise ValueError(f"unsupported snapshot version {d.get('version')}")
        engine = cls(DetectorConfig.from_dict(d["config"]))
        engine.rng.bit_generator.state = d["rng"]
        engine.windows_seen = int(d["windows_seen"])
        engine.description = description_from_dict(d["description"])
        engine.extra = d.get("extra", {})
        return engine

    def save(self, path):
        tmp = f"{path}.tmp"
        with open(tmp, "w") as fh:
            json.dump(self.to_dict(), fh)
        os.replace(tmp, path)

    @classmethod
    def load(cls, path) -> "StreamEngine":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))
