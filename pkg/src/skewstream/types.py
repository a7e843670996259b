"""Domain types shared across the package.

Everything here is a plain container. Arrays are numpy ``float64`` /
``int64``; matrices are stored row-per-component so that ``cat_dists[m][k]``
is the unit distribution of component ``k`` for categorical attribute ``m``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator, Optional

import numpy as np

STOCHASTIC_ATOL = 1e-9


@dataclass
class AttributeSchema:
    categorical_names: list[str]
    continuous_names: list[str]
    vocab_sizes: list[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.vocab_sizes:
            self.vocab_sizes = [0] * len(self.categorical_names)
        if len(self.vocab_sizes) != len(self.categorical_names):
            raise ValueError("vocab_sizes must have one entry per categorical attribute")
        if self.n_categorical + self.n_continuous < 1:
            raise ValueError("schema needs at least one attribute")

    @property
    def n_categorical(self) -> int:
        return len(self.categorical_names)

    @property
    def n_continuous(self) -> int:
        return len(self.continuous_names)


@dataclass(frozen=True)
class Event:
    time: float
    cat_values: tuple[int, ...]
    cont_values: tuple[float, ...]


def _as_columns(a, n: int, dtype) -> np.ndarray:
    a = np.asarray(a, dtype=dtype)
    if a.ndim == 2 and a.shape[0] == n:
        return a
    return a.reshape(n, -1) if n else a.reshape(0, a.shape[1] if a.ndim == 2 else 0)


@dataclass
class CurrentTensor:
    """All events falling in ``[start_time, start_time + duration)``.

    Events are held column-wise: ``times`` (N,), ``cats`` (N, M1) unit
    indices and ``conts`` (N, M2) positive reals. ``vocab_sizes`` is the
    dictionary size of each categorical attribute when the window was cut;
    ``labels`` optionally flags attack events for evaluation.
    """

    window_index: int
    start_time: float
    duration: float
    times: np.ndarray
    cats: np.ndarray
    conts: np.ndarray
    tick_seconds: float = 1.0
    vocab_sizes: Optional[list[int]] = None
    labels: Optional[np.ndarray] = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.float64).reshape(-1)
        n = self.times.shape[0]
        self.cats = _as_columns(self.cats, n, np.int64)
        self.conts = _as_columns(self.conts, n, np.float64)
        if self.vocab_sizes is None:
            self.vocab_sizes = [int(c) + 1 for c in self.cats.max(axis=0)] if n else [
                1] * self.cats.shape[1]

    @classmethod
    def from_events(cls, window_index, start_time, duration, events, n_categorical,
                    n_continuous, tick_seconds=1.0, vocab_sizes=None):
        n = len(events)
        times = np.fromiter((e.time for e in events), dtype=np.float64, count=n)
        cats = np.array([e.cat_values for e in events], dtype=np.int64).reshape(n, n_categorical)
        conts = np.array([e.cont_values for e in events], dtype=np.float64).reshape(n, n_continuous)
        return cls(window_index, start_time, duration, times, cats, conts,
                   tick_seconds=tick_seconds, vocab_sizes=vocab_sizes)

    def __len__(self) -> int:
        return int(self.times.shape[0])

    @property
    def n_events(self) -> int:
        return len(self)

    @property
    def n_ticks(self) -> int:
        return max(1, math.ceil(self.duration / self.tick_seconds - 1e-12))

    @property
    def ticks(self) -> np.ndarray:
        """Tick index of every event, in ``0 .. n_ticks - 1``."""
        t = np.floor((self.times - self.start_time) / self.tick_seconds).astype(np.int64)
        return np.clip(t, 0, self.n_ticks - 1)

    @property
    def per_tick_counts(self) -> np.ndarray:
        return np.bincount(self.ticks, minlength=self.n_ticks)

    @property
    def events(self) -> list[Event]:
        return list(self.iter_events())

    def iter_events(self) -> Iterator[Event]:
        for i in range(len(self)):
            yield Event(float(self.times[i]), tuple(int(v) for v in self.cats[i]),
                        tuple(float(v) for v in self.conts[i]))


@dataclass
class ComponentMatrices:
    """Parameters of ``K`` components for one window or regime.

    ``support`` holds the (expected) number of events each component
    explained in the window it was fitted on; it sets the strength of the
    priors when these matrices seed the next decomposition.
    """

    cat_dists: list[np.ndarray]
    gamma_params: list[np.ndarray]
    time_mix: np.ndarray
    support: Optional[np.ndarray] = None

    def __post_init__(self):
        self.cat_dists = [np.asarray(a, dtype=np.float64) for a in self.cat_dists]
        self.gamma_params = [np.asarray(g, dtype=np.float64) for g in self.gamma_params]
        self.time_mix = np.atleast_2d(np.asarray(self.time_mix, dtype=np.float64))
        if self.support is None:
            self.support = np.ones(self.K)
        self.support = np.asarray(self.support, dtype=np.float64)

    @property
    def K(self) -> int:
        return int(self.time_mix.shape[1])

    @property
    def n_ticks(self) -> int:
        return int(self.time_mix.shape[0])

    def copy(self) -> "ComponentMatrices":
        return ComponentMatrices([a.copy() for a in self.cat_dists],
                                 [g.copy() for g in self.gamma_params],
                                 self.time_mix.copy(), self.support.copy())

    def with_time_mix(self, time_mix) -> "ComponentMatrices":
        return ComponentMatrices(self.cat_dists, self.gamma_params, time_mix, self.support)


@dataclass
class Regime:
    id: int
    matrices: ComponentMatrices
    total_segment_length: int = 0


@dataclass(frozen=True)
class SwitchRecord:
    switch_time: int
    regime_id: int


@dataclass
class CompactDescription:
    regimes: list[Regime] = field(default_factory=list)
    switches: list[SwitchRecord] = field(default_factory=list)
    n_windows: int = 0

    @property
    def R(self) -> int:
        return len(self.regimes)

    @property
    def G(self) -> int:
        return len(self.switches)

    @property
    def active_regime(self) -> Optional[Regime]:
        if not self.switches:
            return None
        return self.regime(self.switches[-1].regime_id)

    def regime(self, regime_id: int) -> Regime:
        for r in self.regimes:
            if r.id == regime_id:
                return r
        raise KeyError(f"no regime with id {regime_id}")


@dataclass
class ScoredWindow:
    window_index: int
    start_time: float
    chosen_regime_id: int
    is_new_regime: bool
    delta_model_cost: float
    data_cost: float
    anomaly_score: float
    n_events: int = 0


# -- checks ---------------------------------------------------------------

def check_row_stochastic(mat, name="matrix", atol=STOCHASTIC_ATOL):
    """Raise ``ValueError`` unless every row of ``mat`` is a distribution."""
    mat = np.asarray(mat)
    if mat.size == 0:
        return
    if np.any(mat < 0) or not np.all(np.isfinite(mat)):
        raise ValueError(f"{name} has negative or non-finite entries")
    err = np.max(np.abs(mat.sum(axis=-1) - 1.0))
    if err > atol:
        raise ValueError(f"{name} rows do not sum to 1 (max error {err:.3g})")


def check_matrices(m: ComponentMatrices):
    for i, a in enumerate(m.cat_dists):
        if a.shape[0] != m.K:
            raise ValueError(f"cat_dists[{i}] has {a.shape[0]} rows, expected K={m.K}")
        check_row_stochastic(a, f"cat_dists[{i}]")
    for i, g in enumerate(m.gamma_params):
        if g.shape != (m.K, 2):
            raise ValueError(f"gamma_params[{i}] must be K x 2")
        if not np.all(g > 0) or not np.all(np.isfinite(g)):
            raise ValueError(f"gamma_params[{i}] must be finite and strictly positive")
    check_row_stochastic(m.time_mix, "time_mix")


def validate_description(c: CompactDescription) -> list[str]:
    """List every broken invariant of ``c``; empty when the description is sound."""
    problems = []
    ids = {r.id for r in c.regimes}
    if len(ids) != len(c.regimes):
        problems.append("duplicate regime id")
    for r in c.regimes:
        if r.total_segment_length < 1:
            problems.append(f"regime {r.id} has no assigned windows")
    prev = None
    for s in c.switches:
        if s.regime_id not in ids:
            problems.append("dangling regime id")
        if prev is not None:
            if s.switch_time <= prev.switch_time:
                problems.append("switch times not increasing")
            if s.regime_id == prev.regime_id:
                problems.append("redundant switch")
        prev = s
    total = sum(r.total_segment_length for r in c.regimes)
    if total != c.n_windows:
        problems.append(f"segment lengths sum to {total}, expected {c.n_windows}")
    return problems
