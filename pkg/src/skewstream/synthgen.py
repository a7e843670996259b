"""Forward sampler of the component model, plus labelled stream scenarios.

Used as the ground-truth oracle in tests: windows are drawn by choosing a
component per event from the tick's mixture, then every categorical value
from the component's unit distribution and every continuous value from the
component's Gamma distribution.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import yaml

from .exceptions import ConfigError
from .types import ComponentMatrices, CurrentTensor

DEFAULT_SHAPE_RANGE = (0.3, 2.0)


def random_matrices(K: int, vocab_sizes: Sequence[int], n_continuous: int,
                    rng: np.random.Generator, concentration: float = 0.3,
                    shape_range=DEFAULT_SHAPE_RANGE, rate_range=(0.5, 2.0),
                    mixture: Optional[Sequence[float]] = None) -> ComponentMatrices:
    """Random component matrices with right-skewed Gamma components.

    Unit distributions are Dirichlet(``concentration``) draws, shapes are
    uniform on ``shape_range`` and rates log-uniform on ``rate_range``.
    """
    cat = [rng.dirichlet(np.full(u, concentration), size=K) for u in vocab_sizes]
    gam = []
    for _ in range(n_continuous):
        shape = rng.uniform(*shape_range, size=K)
        rate = np.exp(rng.uniform(np.log(rate_range[0]), np.log(rate_range[1]), size=K))
        gam.append(np.column_stack([shape, rate]))
    mix = np.full(K, 1.0 / K) if mixture is None else np.asarray(mixture, dtype=np.float64)
    return ComponentMatrices(cat, gam, mix[None, :] / mix.sum())


def _draw_rows(probs: np.ndarray, rows: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One categorical draw per entry of ``rows`` from ``probs[rows]``."""
    cdf = np.cumsum(probs, axis=1)
    cdf[:, -1] = 1.0
    u = rng.random(rows.shape[0])
    out = np.empty(rows.shape[0], dtype=np.int64)
    for r in np.unique(rows):
        sel = rows == r
        out[sel] = np.searchsorted(cdf[r], u[sel], side="right")
    return np.minimum(out, probs.shape[1] - 1)


def sample_window(matrices: ComponentMatrices, events_per_tick, rng: np.random.Generator,
                  window_index: int = 0, start_time: float = 0.0, tick_seconds: float = 1.0,
                  duration: Optional[float] = None):
    """Draw one window from the generative model.

    Parameters
    ----------
    matrices : ComponentMatrices
        ``time_mix`` may hold one row (shared by all ticks) or one per tick.
    events_per_tick : int or sequence of int
        ``N_t`` for every tick; a scalar applies to all ticks.

    Returns
    -------
    window : CurrentTensor
    z : ndarray of int
        Component that generated each event.
    """
    if np.ndim(events_per_tick) == 0:
        n_ticks = matrices.n_ticks if duration is None else max(
            1, int(np.ceil(duration / tick_seconds)))
        counts = np.full(n_ticks, int(events_per_tick), dtype=np.int64)
    else:
        counts = np.asarray(events_per_tick, dtype=np.int64)
    n_ticks = counts.shape[0]
    if duration is None:
        duration = n_ticks * tick_seconds
    tick_of = np.repeat(np.arange(n_ticks), counts)
    n = tick_of.shape[0]
    B = matrices.time_mix
    mix_rows = np.zeros(n, dtype=np.int64) if B.shape[0] == 1 else tick_of
    z = _draw_rows(B, mix_rows, rng)
    cats = np.column_stack([_draw_rows(a, z, rng) for a in matrices.cat_dists]) \
        if matrices.cat_dists else np.zeros((n, 0), dtype=np.int64)
    conts = np.column_stack([rng.gamma(g[z, 0], 1.0 / g[z, 1]) for g in matrices.gamma_params]) \
        if matrices.gamma_params else np.zeros((n, 0))
    offsets = rng.random(n)
    # tick_of is already grouped, so this orders events in time within each tick
    offsets = offsets[np.lexsort((offsets, tick_of))]
    times = start_time + (tick_of + offsets) * tick_seconds
    vocab = [a.shape[1] for a in matrices.cat_dists]
    window = CurrentTensor(window_index, start_time, duration, times, cats, conts,
                           tick_seconds=tick_seconds, vocab_sizes=vocab)
    return window, z


# -- scenarios ------------------------------------------------------------

@dataclass
class Scenario:
    """A labelled synthetic stream: regimes laid out in segments, plus optional anomalies."""

    categorical: list[tuple[str, int]]
    continuous: list[str]
    regimes: dict[str, ComponentMatrices]
    segments: list[tuple[str, int]]
    tau: float = 60.0
    tick_seconds: float = 1.0
    events_per_window: int = 1000
    anomaly_regime: Optional[str] = None
    anomaly_fraction: float = 0.0
    start_time: float = 0.0
    n_components: int = 3
    label_column: str = "label"
    time_column: str = "timestamp"

    def __post_init__(self):
        if not self.segments:
            raise ConfigError("scenario needs at least one segment")
        for name, n in self.segments:
            if name not in self.regimes:
                raise ConfigError(f"segment refers to unknown regime {name!r}")
            if n < 1:
                raise ConfigError("segment lengths must be positive")
        if self.anomaly_regime is not None and self.anomaly_regime not in self.regimes:
            raise ConfigError(f"unknown anomaly regime {self.anomaly_regime!r}")
        if not 0.0 <= self.anomaly_fraction <= 1.0:
            raise ConfigError("anomaly fraction must lie in [0, 1]")

    @property
    def n_windows(self) -> int:
        return sum(n for _, n in self.segments)

    @property
    def regime_ids(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.regimes)}

    def run_config(self) -> dict:
        """A config that lets ``skewstream run`` read this scenario's event file."""
        attrs = [{"column": n, "type": "categorical"} for n, _ in self.categorical]
        attrs += [{"column": n, "type": "continuous"} for n in self.continuous]
        return {
            "schema": {
                "timestamp": {"column": self.time_column, "format": "epoch"},
                "attributes": attrs,
                "label": {"column": self.label_column, "benign": ["BENIGN"]},
            },
            "detector": {"n_components": self.n_components, "tau": self.tau,
                         "tick_seconds": self.tick_seconds},
            "run": {"start_time": self.start_time},
        }


@dataclass
class TruthRow:
    window_index: int
    regime_id: int
    is_anomaly: bool


@dataclass
class StreamSample:
    windows: list[CurrentTensor]
    assignments: list[np.ndarray]
    truth: list[TruthRow]
    labels: list[str] = field(default_factory=list)


def sample_stream(scenario: Scenario, rng: np.random.Generator) -> StreamSample:
    """Draw every window of ``scenario`` in order."""
    ids = scenario.regime_ids
    plan = [name for name, n in scenario.segments for _ in range(n)]
    anomalous = np.zeros(len(plan), dtype=bool)
    if scenario.anomaly_regime is not None and scenario.anomaly_fraction > 0:
        n_anom = int(round(scenario.anomaly_fraction * len(plan)))
        # the first window is kept normal so the baseline is defined
        picks = rng.choice(np.arange(1, len(plan)), size=min(n_anom, len(plan) - 1),
                           replace=False)
        anomalous[picks] = True
    windows, zs, truth, labels = [], [], [], []
    T = max(1, int(np.ceil(scenario.tau / scenario.tick_seconds)))
    for i, name in enumerate(plan):
        if anomalous[i]:
            name = scenario.anomaly_regime
        start = scenario.start_time + i * scenario.tau
        per_tick = rng.multinomial(scenario.events_per_window, np.full(T, 1.0 / T))
        w, z = sample_window(scenario.regimes[name], per_tick, rng, window_index=i,
                             start_time=start, tick_seconds=scenario.tick_seconds,
                             duration=scenario.tau)
        windows.append(w)
        zs.append(z)
        truth.append(TruthRow(i, ids[name], bool(anomalous[i])))
        labels.append("ANOMALY" if anomalous[i] else "BENIGN")
    return StreamSample(windows, zs, truth, labels)


def write_stream(sample: StreamSample, scenario: Scenario, events_path, truth_path):
    """Write the event file (delimited, with header) and the per-window truth file."""
    cat_names = [n for n, _ in scenario.categorical]
    header = [scenario.time_column] + cat_names + list(scenario.continuous) + [
        scenario.label_column]
    with open(events_path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(header)
        for w, label in zip(sample.windows, sample.labels):
            for i in range(len(w)):
                out.writerow([repr(float(w.times[i]))]
                             + [f"u{int(v)}" for v in w.cats[i]]
                             + [repr(float(v)) for v in w.conts[i]]
                             + [label])
    write_truth(sample.truth, truth_path)


def write_truth(truth: Sequence[TruthRow], path):
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["window_index", "regime_id", "is_anomaly"])
        for row in truth:
            out.writerow([row.window_index, row.regime_id, int(row.is_anomaly)])


def _regime_from_spec(spec: dict, K: int, vocab, n_cont: int) -> ComponentMatrices:
    if "cat_dists" in spec or "gamma_params" in spec:
        mix = spec.get("mixture", [1.0 / K] * K)
        return ComponentMatrices([np.asarray(a, dtype=np.float64) for a in spec.get("cat_dists", [])],
                                 [np.asarray(g, dtype=np.float64) for g in
                                  spec.get("gamma_params", [])],
                                 np.asarray(mix, dtype=np.float64)[None, :])
    rng = np.random.default_rng(spec.get("seed", 0))
    return random_matrices(K, vocab, n_cont, rng,
                           concentration=spec.get("concentration", 0.3),
                           shape_range=tuple(spec.get("shape_range", DEFAULT_SHAPE_RANGE)),
                           rate_range=tuple(spec.get("rate_range", (0.5, 2.0))),
                           mixture=spec.get("mixture"))


def scenario_from_dict(d: dict) -> Scenario:
    """Build a scenario from its YAML form.

    Regimes are either given explicitly (``cat_dists``, ``gamma_params``,
    ``mixture``) or generated from a ``seed`` with optional
    ``concentration``, ``shape_range`` and ``rate_range``.
    """
    try:
        categorical = [(c["name"], int(c["vocab"])) for c in d.get("categorical", [])]
        continuous = [str(n) for n in d.get("continuous", [])]
        K = int(d.get("n_components", 3))
        vocab = [u for _, u in categorical]
        regimes = {name: _regime_from_spec(spec or {}, K, vocab, len(continuous))
                   for name, spec in d["regimes"].items()}
        segments = [(s["regime"], int(s["windows"])) for s in d["segments"]]
        anomaly = d.get("anomaly") or {}
        return Scenario(
            categorical=categorical, continuous=continuous, regimes=regimes,
            segments=segments, tau=float(d.get("tau", 60.0)),
            tick_seconds=float(d.get("tick_seconds", 1.0)),
            events_per_window=int(d.get("events_per_window", 1000)),
            anomaly_regime=anomaly.get("regime"),
            anomaly_fraction=float(anomaly.get("fraction", 0.0)),
            start_time=float(d.get("start_time", 0.0)), n_components=K)
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"invalid scenario: {exc!r}") from exc


def load_scenario(path) -> Scenario:
    with open(path) as fh:
        return scenario_from_dict(yaml.safe_load(fh))
