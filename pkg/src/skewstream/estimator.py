"""scikit-learn style front end to the streaming detector."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, OutlierMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_event_array, check_windows
from .config import DetectorConfig
from .engine import StreamEngine, anomaly_score, majority_regime
from .ingestion import window_stream
from .mdl import select_regime
from .sifi import carry_priors, decompose
from .types import CurrentTensor, Event, Regime


class SkewStreamDetector(OutlierMixin, BaseEstimator):
    """Streaming anomaly detector for events with categorical and skewed continuous attributes.

    The stream is cut into windows of ``tau`` seconds. Every window is
    decomposed into ``n_components`` latent components, assigned to a
    regime by description-length minimisation and scored by the number of
    bits the majority regime needs to encode it.

    Input is either an iterable of :class:`~skewstream.types.CurrentTensor`
    or an event matrix whose first column is the time in seconds, followed by
    ``n_categorical`` integer-coded categorical columns and then the
    continuous columns.

    Parameters
    ----------
    n_components : int, default=48
    tau : float, default=30.0
        Window length in seconds.
    tick_seconds : float, default=1.0
    beta : float, default=0.1
        Strength of priors carried from the previous window.
    prior_floor : float, default=1e-3
    burn_in, n_samples : int, default=10, 5
    refit_burn_in, refit_samples : int, default=2, 3
    float_bits : float, default=32.0
        Bits per free model parameter.
    per_event_normalization : bool, default=True
    refresh_regimes : bool, default=True
    n_categorical : int, optional
        Number of categorical columns in an event matrix.
    start_time : float, optional
        Left edge of the first window for event matrices; defaults to the
        first event's time.
    random_state : int, optional

    Attributes
    ----------
    engine_ : StreamEngine
    records_ : list of ScoredWindow
        One record per processed window, in stream order.
    """

    def __init__(self, n_components=48, tau=30.0, tick_seconds=1.0, beta=0.1, prior_floor=1e-3,
                 burn_in=10, n_samples=5, refit_burn_in=2, refit_samples=3, float_bits=32.0,
                 per_event_normalization=True, refresh_regimes=True, n_categorical=None,
                 start_time=None, random_state=None):
        self.n_components = n_components
        self.tau = tau
        self.tick_seconds = tick_seconds
        self.beta = beta
        self.prior_floor = prior_floor
        self.burn_in = burn_in
        self.n_samples = n_samples
        self.refit_burn_in = refit_burn_in
        self.refit_samples = refit_samples
        self.float_bits = float_bits
        self.per_event_normalization = per_event_normalization
        self.refresh_regimes = refresh_regimes
        self.n_categorical = n_categorical
        self.start_time = start_time
        self.random_state = random_state

    def _config(self) -> DetectorConfig:
        return DetectorConfig(
            n_components=self.n_components, tau=self.tau, tick_seconds=self.tick_seconds,
            beta=self.beta, prior_floor=self.prior_floor, burn_in=self.burn_in,
            n_samples=self.n_samples, refit_burn_in=self.refit_burn_in,
            refit_samples=self.refit_samples, float_bits=self.float_bits,
            per_event_normalization=self.per_event_normalization,
            refresh_regimes=self.refresh_regimes)

    def _windows(self, X, first_index, start=None):
        if isinstance(X, CurrentTensor):
            return [X]
        if isinstance(X, (list, tuple)) and X and isinstance(X[0], CurrentTensor):
            return check_windows(X)
        times, cats, conts = check_event_array(X, self.n_categorical)
        events = (Event(float(t), tuple(c), tuple(x)) for t, c, x in
                  zip(times, cats.tolist(), conts.tolist()))
        vocab = [int(c) + 1 for c in cats.max(axis=0)] if len(times) else None
        return list(window_stream(events, self.tau, start=start, tick_seconds=self.tick_seconds,
                                  n_categorical=cats.shape[1], n_continuous=conts.shape[1],
                                  first_index=first_index, vocab_sizes=vocab))

    def fit(self, X, y=None):
        """Process a whole stream from scratch."""
        self.engine_ = StreamEngine(self._config(), seed=self.random_state)
        self.records_ = []
        self.origin_ = None
        return self.partial_fit(X)

    def partial_fit(self, X, y=None):
        """Continue the stream with more windows (or a later chunk of events).

        Event-matrix chunks are windowed on the grid fixed by the first
        chunk, so a chunk should end on a window boundary.
        """
        if not hasattr(self, "engine_"):
            self.engine_ = StreamEngine(self._config(), seed=self.random_state)
            self.records_ = []
            self.origin_ = None
        if self.origin_ is None and not isinstance(X, (CurrentTensor, list, tuple)):
            arr = np.asarray(X)
            if self.start_time is not None:
                self.origin_ = float(self.start_time)
            elif arr.size:
                self.origin_ = float(arr[0, 0])
        start = self.origin_
        for w in self._windows(X, self.engine_.windows_seen, start):
            self.records_.append(self.engine_.process(w))
        return self

    @property
    def description_(self):
        check_is_fitted(self, "engine_")
        return self.engine_.description

    @property
    def anomaly_scores_(self) -> np.ndarray:
        check_is_fitted(self, "records_")
        return np.array([r.anomaly_score for r in self.records_])

    @property
    def regime_labels_(self) -> np.ndarray:
        check_is_fitted(self, "records_")
        return np.array([r.chosen_regime_id for r in self.records_])

    def fit_predict(self, X, y=None):
        """Regime id chosen for every window while fitting."""
        return self.fit(X).regime_labels_

    def _scoring_rng(self):
        return np.random.default_rng(self.random_state)

    def anomaly_score(self, X) -> np.ndarray:
        """Per-window score against the current majority regime, without updating."""
        check_is_fitted(self, "engine_")
        c = self.engine_.description
        rng = self._scoring_rng()
        start = getattr(self, "origin_", None)
        return np.array([anomaly_score(w, c, self.engine_.config, rng)
                         for w in self._windows(X, 0, start)])

    def score_samples(self, X) -> np.ndarray:
        """Opposite of :meth:`anomaly_score`; lower means more abnormal."""
        return -self.anomaly_score(X)

    def decision_function(self, X) -> np.ndarray:
        return self.score_samples(X)

    def transform(self, X) -> np.ndarray:
        """Anomaly scores as a one-column feature matrix, one row per window."""
        return self.anomaly_score(X)[:, None]

    def predict(self, X) -> np.ndarray:
        """Regime each window would be assigned to; ``-1`` marks a new regime."""
        check_is_fitted(self, "engine_")
        c = self.engine_.description
        cfg = self.engine_.config
        rng = self._scoring_rng()
        out = []
        for w in self._windows(X, 0, getattr(self, "origin_", None)):
            if len(w) == 0:
                out.append(c.active_regime.id if c.active_regime else -1)
                continue
            active = c.active_regime
            priors = carry_priors(active.matrices, cfg.beta, cfg.prior_floor, n_ticks=w.n_ticks)
            cand = Regime(-1, decompose(w, priors, cfg, rng), 0)
            chosen, _ = select_regime(w, cand, c, cfg, rng)
            out.append(chosen.id)
        return np.array(out)

    def majority_regime(self):
        check_is_fitted(self, "engine_")
        return majority_regime(self.engine_.description)
