"""Reading delimited flow logs into events and cutting them into windows.

The schema is declared in YAML::

    schema:
      timestamp: {column: Timestamp, format: "%d/%m/%Y %H:%M:%S"}
      attributes:
        - {column: Dst Port, type: categorical}
        - {column: Flow Duration, type: continuous}
      label: {column: Label, benign: [BENIGN, Benign]}
      delimiter: ","

``format`` may be ``epoch`` (numeric seconds), ``auto`` (numeric, then a
few common date layouts) or any ``strptime`` pattern. Dates are read as
UTC.
"""

from __future__ import annotations

import bz2
import csv
import gzip
import io
import lzma
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from functools import lru_cache
from typing import Iterable, Iterator, Optional

import numpy as np
import yaml

from .exceptions import ConfigError
from .types import AttributeSchema, CurrentTensor, Event

AUTO_FORMATS = (
    "%Y-%m-%d %H:%M:%S",
    "%Y-%m-%d %H:%M:%S.%f",
    "%Y-%m-%dT%H:%M:%S",
    "%d/%m/%Y %H:%M:%S",
    "%d/%m/%Y %H:%M",
    "%d/%m/%Y %I:%M:%S %p",
    "%d/%m/%Y %I:%M %p",
)


class RowRejected(ValueError):
    pass


@dataclass
class ColumnBindings:
    timestamp: str
    timestamp_format: str = "auto"
    categorical: list[str] = field(default_factory=list)
    continuous: list[str] = field(default_factory=list)
    label: Optional[str] = None
    benign: tuple[str, ...] = ("BENIGN", "Benign", "benign")
    delimiter: str = ","


def _line(node) -> int:
    return node.start_mark.line + 1


def _mapping_get(node, key):
    if not isinstance(node, yaml.MappingNode):
        return None
    for k, v in node.value:
        if k.value == key:
            return v
    return None


def parse_schema(text: str):
    """Parse a schema declaration (alone or under a top-level ``schema`` key).

    Returns
    -------
    schema : AttributeSchema
    bindings : ColumnBindings
    """
    try:
        root = yaml.compose(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config is not valid YAML: {exc}") from exc
    if root is None:
        raise ConfigError("config is empty")
    data = yaml.safe_load(text)
    node = root
    if isinstance(data, dict) and "schema" in data:
        data, node = data["schema"], _mapping_get(root, "schema")
    if not isinstance(data, dict):
        raise ConfigError(f"line {_line(node)}: schema must be a mapping")

    ts = data.get("timestamp")
    if ts is None:
        raise ConfigError(f"line {_line(node)}: schema.timestamp is missing")
    if isinstance(ts, str):
        ts = {"column": ts}
    if not ts.get("column"):
        raise ConfigError(f"line {_line(_mapping_get(node, 'timestamp'))}: "
                          "schema.timestamp.column is missing")

    attrs_node = _mapping_get(node, "attributes")
    attrs = data.get("attributes") or []
    if not attrs:
        raise ConfigError(f"line {_line(node)}: schema.attributes declares no attributes")
    seen = {}
    cat, cont = [], []
    for i, a in enumerate(attrs):
        where = f"line {_line(attrs_node.value[i])}: schema.attributes[{i}]"
        if not isinstance(a, dict) or "column" not in a:
            raise ConfigError(f"{where} needs a 'column'")
        col = str(a["column"])
        kind = a.get("type")
        if col in seen:
            raise ConfigError(f"{where}: column {col!r} already declared at {seen[col]}")
        if col == ts["column"]:
            raise ConfigError(f"{where}: column {col!r} is the timestamp")
        seen[col] = where
        if kind == "categorical":
            cat.append(col)
        elif kind == "continuous":
            cont.append(col)
        else:
            raise ConfigError(f"{where}: type must be 'categorical' or 'continuous', got {kind!r}")

    label = data.get("label") or {}
    if isinstance(label, str):
        label = {"column": label}
    bindings = ColumnBindings(
        timestamp=str(ts["column"]), timestamp_format=str(ts.get("format", "auto")),
        categorical=cat, continuous=cont, label=label.get("column"),
        benign=tuple(label.get("benign", ColumnBindings.benign)),
        delimiter=str(data.get("delimiter", ",")))
    return AttributeSchema(list(cat), list(cont)), bindings


# -- rows -----------------------------------------------------------------

class Dictionaries:
    """Dense integer codes for the categorical values seen so far."""

    def __init__(self, n: int, values: Optional[list[list[str]]] = None):
        self.values: list[list[str]] = values if values is not None else [[] for _ in range(n)]
        self.index = [{v: i for i, v in enumerate(vals)} for vals in self.values]

    def encode(self, m: int, value: str) -> int:
        idx = self.index[m].get(value)
        if idx is None:
            idx = len(self.values[m])
            self.index[m][value] = idx
            self.values[m].append(value)
        return idx

    @property
    def sizes(self) -> list[int]:
        return [len(v) for v in self.values]


@lru_cache(maxsize=65536)
def parse_timestamp(text: str, fmt: str = "auto") -> float:
    """Seconds since the Unix epoch."""
    text = text.strip()
    if fmt in ("epoch", "auto"):
        try:
            val = float(text)
        except ValueError:
            if fmt == "epoch":
                raise RowRejected(f"bad timestamp {text!r}") from None
        else:
            if not math.isfinite(val):
                raise RowRejected(f"bad timestamp {text!r}")
            return val
    formats = AUTO_FORMATS if fmt == "auto" else (fmt,)
    for f in formats:
        try:
            dt = datetime.strptime(text, f)
        except ValueError:
            continue
        return dt.replace(tzinfo=timezone.utc).timestamp()
    raise RowRejected(f"bad timestamp {text!r}")


def parse_event(row: dict, bindings: ColumnBindings, schema: AttributeSchema,
                dictionaries: Dictionaries, clamp_epsilon: float = 1e-6) -> Event:
    """Turn one row (column name -> text) into an :class:`Event`.

    Raises :class:`RowRejected` on a missing column or an unparsable value.
    Continuous values ``<= 0`` are clamped to ``clamp_epsilon``.
    """
    try:
        t = parse_timestamp(row[bindings.timestamp], bindings.timestamp_format)
        conts = []
        for col in bindings.continuous:
            try:
                x = float(row[col])
            except ValueError:
                raise RowRejected(f"bad number {row[col]!r} in {col!r}") from None
            if not math.isfinite(x):
                raise RowRejected(f"non-finite {row[col]!r} in {col!r}")
            conts.append(x if x > 0 else clamp_epsilon)
        raw_cats = [row[col].strip() for col in bindings.categorical]
    except (KeyError, TypeError, AttributeError) as exc:
        raise RowRejected(f"missing column: {exc}") from None
    # only accepted rows may grow the dictionaries
    cats = [dictionaries.encode(m, v) for m, v in enumerate(raw_cats)]
    schema.vocab_sizes = dictionaries.sizes
    return Event(t, tuple(cats), tuple(conts))


def open_text(path) -> io.TextIOBase:
    """Open a text file, transparently decompressing ``.gz``, ``.bz2`` and ``.xz``."""
    path = str(path)
    if path == "-":
        import sys
        return sys.stdin
    if path.endswith(".gz"):
        return gzip.open(path, "rt", newline="")
    if path.endswith(".bz2"):
        return bz2.open(path, "rt", newline="")
    if path.endswith(".xz"):
        return lzma.open(path, "rt", newline="")
    return open(path, newline="")


@dataclass
class IngestStats:
    rows: int = 0
    accepted: int = 0
    rejected: int = 0
    out_of_order: int = 0
    skipped: int = 0

    @property
    def rejection_rate(self) -> float:
        return (self.rejected + self.out_of_order) / self.rows if self.rows else 0.0


@dataclass
class LabeledEvent:
    event: Event
    is_attack: bool = False


class EventReader:
    """Iterates accepted events of a delimited log with a header row.

    Rows before ``skip_before`` (seconds) are passed over without touching
    the dictionaries; this is how a resumed run fast-forwards.
    """

    def __init__(self, bindings: ColumnBindings, schema: AttributeSchema,
                 dictionaries: Optional[Dictionaries] = None, clamp_epsilon: float = 1e-6,
                 skip_before: Optional[float] = None, last_time: float = -math.inf):
        self.bindings = bindings
        self.schema = schema
        self.dictionaries = dictionaries or Dictionaries(schema.n_categorical)
        self.schema.vocab_sizes = self.dictionaries.sizes
        self.clamp_epsilon = clamp_epsilon
        self.skip_before = skip_before
        self.last_time = last_time
        self.stats = IngestStats()

    def read(self, fh) -> Iterator[LabeledEvent]:
        b = self.bindings
        reader = csv.reader(fh, delimiter=b.delimiter)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            return
        needed = [b.timestamp] + b.categorical + b.continuous
        missing = [c for c in needed if c not in header]
        if missing:
            raise ConfigError(f"input lacks column(s): {', '.join(missing)}")
        cols = {name: header.index(name) for name in needed}
        label_idx = header.index(b.label) if b.label and b.label in header else None
        for fields in reader:
            if not fields:
                continue
            self.stats.rows += 1
            try:
                row = {name: fields[i] for name, i in cols.items()}
            except IndexError:
                self.stats.rejected += 1
                continue
            try:
                t = parse_timestamp(row[b.timestamp], b.timestamp_format)
            except RowRejected:
                self.stats.rejected += 1
                continue
            if self.skip_before is not None and t < self.skip_before:
                self.stats.skipped += 1
                continue
            if t < self.last_time:
                self.stats.out_of_order += 1
                continue
            try:
                ev = parse_event(row, b, self.schema, self.dictionaries, self.clamp_epsilon)
            except RowRejected:
                self.stats.rejected += 1
                continue
            self.last_time = ev.time
            self.stats.accepted += 1
            attack = False
            if label_idx is not None and label_idx < len(fields):
                attack = fields[label_idx].strip() not in b.benign
            yield LabeledEvent(ev, attack)

    def read_path(self, path) -> Iterator[LabeledEvent]:
        with open_text(path) as fh:
            yield from self.read(fh)


# -- windows --------------------------------------------------------------

def _build_window(index, start, tau, buf, n_cat, n_cont, tick_seconds, vocab):
    n = len(buf)
    times = np.fromiter((le.event.time for le in buf), dtype=np.float64, count=n)
    cats = np.array([le.event.cat_values for le in buf], dtype=np.int64).reshape(n, n_cat)
    conts = np.array([le.event.cont_values for le in buf], dtype=np.float64).reshape(n, n_cont)
    w = CurrentTensor(index, start, tau, times, cats, conts, tick_seconds=tick_seconds,
                      vocab_sizes=list(vocab) if n_cat else [])
    w.labels = np.fromiter((le.is_attack for le in buf), dtype=bool, count=n)
    return w


def window_stream(events: Iterable, tau: float, start: Optional[float] = None,
                  tick_seconds: float = 1.0, n_categorical: Optional[int] = None,
                  n_continuous: Optional[int] = None, first_index: int = 0,
                  vocab_sizes=None, stats: Optional[IngestStats] = None) -> Iterator[CurrentTensor]:
    """Cut a time-ordered event sequence into consecutive windows of length ``tau``.

    Windows are half-open, ``[start + i*tau, start + (i+1)*tau)``, with
    ``i`` counted from ``first_index``; empty windows are emitted too.
    ``start`` defaults to the first event's time. Events earlier than the
    current window are dropped and counted in ``stats.out_of_order``.
    ``events`` may hold :class:`Event` or :class:`LabeledEvent` items;
    ``vocab_sizes`` is a callable returning the current dictionary sizes.
    """
    if tau <= 0:
        raise ConfigError("tau must be positive")
    index = first_index
    buf: list[LabeledEvent] = []
    lo = hi = None
    for item in events:
        le = item if isinstance(item, LabeledEvent) else LabeledEvent(item)
        ev = le.event
        if n_categorical is None:
            n_categorical, n_continuous = len(ev.cat_values), len(ev.cont_values)
        if lo is None:
            origin = ev.time if start is None else start
            lo = origin + index * tau
            hi = lo + tau
        if ev.time < lo:
            if stats is not None:
                stats.out_of_order += 1
            continue
        while ev.time >= hi:
            yield _build_window(index, lo, tau, buf, n_categorical, n_continuous, tick_seconds,
                                _sizes(vocab_sizes, buf, n_categorical))
            buf = []
            index += 1
            lo = hi
            hi = lo + tau
        buf.append(le)
    if lo is not None and buf:
        yield _build_window(index, lo, tau, buf, n_categorical, n_continuous, tick_seconds,
                            _sizes(vocab_sizes, buf, n_categorical))


def _sizes(vocab_sizes, buf, n_cat):
    if callable(vocab_sizes):
        return vocab_sizes()
    if vocab_sizes is not None:
        return vocab_sizes
    sizes = [1] * n_cat
    for le in buf:
        for m, v in enumerate(le.event.cat_values):
            sizes[m] = max(sizes[m], v + 1)
    return sizes
