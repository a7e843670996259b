import gzip
import io

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skewstream.exceptions import ConfigError
from skewstream.ingestion import (Dictionaries, EventReader, IngestStats, RowRejected,
                                  parse_event, parse_schema, parse_timestamp, window_stream)
from skewstream.types import Event

FLOW_SCHEMA = """
schema:
  timestamp: {column: Timestamp, format: "%d/%m/%Y %I:%M:%S %p"}
  attributes:
    - {column: Dst Port, type: categorical}
    - {column: Flow Duration, type: continuous}
    - {column: Tot Fwd Pkts, type: continuous}
    - {column: Tot Bwd Pkts, type: continuous}
    - {column: TotLen Fwd Pkts, type: continuous}
    - {column: TotLen Bwd Pkts, type: continuous}
    - {column: Flow Byts/s, type: continuous}
    - {column: Flow Pkts/s, type: continuous}
  label: {column: Label, benign: [BENIGN]}
"""

MINIMAL = """
timestamp: ts
attributes:
  - {column: port, type: categorical}
"""


class TestParseSchema:
    def test_flow_log_schema(self):
        schema, b = parse_schema(FLOW_SCHEMA)
        assert (schema.n_categorical, schema.n_continuous) == (1, 7)
        assert b.categorical == ["Dst Port"]
        assert b.continuous[0] == "Flow Duration" and b.continuous[-1] == "Flow Pkts/s"
        assert b.label == "Label" and b.benign == ("BENIGN",)

    def test_minimal(self):
        schema, b = parse_schema(MINIMAL)
        assert (schema.n_categorical, schema.n_continuous) == (1, 0)
        assert b.timestamp == "ts" and b.timestamp_format == "auto" and b.delimiter == ","

    def test_duplicate_column(self):
        text = MINIMAL + "  - {column: port, type: continuous}\n"
        with pytest.raises(ConfigError, match=r"line 5.*already declared"):
            parse_schema(text)

    def test_missing_timestamp(self):
        with pytest.raises(ConfigError, match="timestamp"):
            parse_schema("attributes:\n  - {column: port, type: categorical}\n")

    def test_zero_attributes(self):
        with pytest.raises(ConfigError, match="no attributes"):
            parse_schema("timestamp: ts\nattributes: []\n")

    def test_bad_type(self):
        with pytest.raises(ConfigError, match="type must be"):
            parse_schema("timestamp: ts\nattributes:\n  - {column: x, type: ordinal}\n")

    def test_timestamp_as_attribute(self):
        with pytest.raises(ConfigError, match="timestamp"):
            parse_schema("timestamp: ts\nattributes:\n  - {column: ts, type: continuous}\n")

    def test_not_yaml(self):
        with pytest.raises(ConfigError):
            parse_schema("timestamp: [unclosed\n")


def _bound(text=FLOW_SCHEMA):
    schema, b = parse_schema(text)
    return schema, b, Dictionaries(schema.n_categorical)


def _row(**over):
    row = {"Timestamp": "16/02/2018 09:00:01 AM", "Dst Port": "443", "Flow Duration": "1200",
           "Tot Fwd Pkts": "3", "Tot Bwd Pkts": "2", "TotLen Fwd Pkts": "400",
           "TotLen Bwd Pkts": "900", "Flow Byts/s": "1083.3", "Flow Pkts/s": "4166.7"}
    row.update(over)
    return row


class TestParseEvent:
    def test_first_unit(self):
        schema, b, d = _bound()
        ev = parse_event(_row(), b, schema, d)
        assert ev.cat_values == (0,)
        assert d.sizes == [1] and schema.vocab_sizes == [1]
        assert ev.time == 1518771601.0

    def test_dictionary_is_dense(self):
        schema, b, d = _bound()
        ports = ["443", "80", "443", "53", "80"]
        codes = [parse_event(_row(**{"Dst Port": p}), b, schema, d).cat_values[0] for p in ports]
        assert codes == [0, 1, 0, 2, 1]
        assert d.values[0] == ["443", "80", "53"]

    def test_zero_clamped(self):
        schema, b, d = _bound()
        assert parse_event(_row(**{"Flow Duration": "0"}), b, schema, d).cont_values[0] == 1e-6
        ev = parse_event(_row(**{"Flow Duration": "-4"}), b, schema, d, clamp_epsilon=0.5)
        assert ev.cont_values[0] == 0.5

    @pytest.mark.parametrize("bad", ["NaN", "inf", "abc", ""])
    def test_bad_number_rejected(self, bad):
        schema, b, d = _bound()
        with pytest.raises(RowRejected):
            parse_event(_row(**{"Flow Duration": bad, "Dst Port": "22"}), b, schema, d)
        assert d.sizes == [0]

    def test_missing_column(self):
        schema, b, d = _bound()
        row = _row()
        del row["Flow Pkts/s"]
        with pytest.raises(RowRejected):
            parse_event(row, b, schema, d)

    def test_timestamps(self):
        assert parse_timestamp("1518771601.5") == 1518771601.5
        assert parse_timestamp("2018-02-16 09:00:01") == 1518771601.0
        assert parse_timestamp("16/02/2018 09:00:01 PM", "%d/%m/%Y %I:%M:%S %p") == \
            1518771601.0 + 12 * 3600
        with pytest.raises(RowRejected):
            parse_timestamp("yesterday")
        with pytest.raises(RowRejected):
            parse_timestamp("2018-02-16", "epoch")


@settings(max_examples=50, deadline=None)
@given(st.lists(st.text(alphabet="abcdefgh", min_size=1, max_size=3), max_size=60))
def test_dictionary_bijection(values):
    d = Dictionaries(1)
    codes = [d.encode(0, v) for v in values]
    assert sorted(set(codes)) == list(range(d.sizes[0]))
    for v, c in zip(values, codes):
        assert d.values[0][c] == v
    assert len(set(values)) == d.sizes[0]


def _events(times):
    return [Event(float(t), (0,), (1.0,)) for t in times]


class TestWindowStream:
    def test_sizes_with_gap(self):
        ws = list(window_stream(_events([0, 100, 250]), tau=120, start=0.0))
        assert [len(w) for w in ws] == [2, 0, 1]
        assert [w.start_time for w in ws] == [0.0, 120.0, 240.0]
        assert [w.window_index for w in ws] == [0, 1, 2]

    @pytest.mark.parametrize("tau", [0.0, -5.0])
    def test_tau_must_be_positive(self, tau):
        with pytest.raises(ConfigError):
            list(window_stream(_events([0, 1]), tau=tau))

    @pytest.mark.parametrize("tau", [240.0, 30.0])
    def test_common_window_lengths(self, tau):
        times = np.arange(0, 3600, 7.0)
        ws = list(window_stream(_events(times), tau=tau, start=0.0))
        assert len(ws) == 3600 // tau
        assert all(w.duration == tau for w in ws)
        assert sum(len(w) for w in ws) == times.size

    def test_half_open_boundaries(self):
        ws = list(window_stream(_events([0, 119.999, 120, 240]), tau=120, start=0.0))
        assert [len(w) for w in ws] == [2, 1, 1]

    def test_out_of_order_dropped(self):
        stats = IngestStats()
        ws = list(window_stream(_events([0, 130, 10, 140]), tau=120, start=0.0, stats=stats))
        assert [len(w) for w in ws] == [1, 2]
        assert stats.out_of_order == 1

    def test_first_index_offsets_start(self):
        ws = list(window_stream(_events([250]), tau=120, start=0.0, first_index=2))
        assert ws[0].window_index == 2 and ws[0].start_time == 240.0

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.floats(0, 1000, allow_nan=False), max_size=80),
           st.floats(1.0, 200.0))
    def test_every_event_in_one_window(self, times, tau):
        times = sorted(times)
        ws = list(window_stream(_events(times), tau=tau, start=0.0))
        assert sum(len(w) for w in ws) == len(times)
        for w in ws:
            assert np.all((w.times >= w.start_time) & (w.times < w.start_time + tau))


FLOW_HEADER = ("Timestamp,Dst Port,Flow Duration,Tot Fwd Pkts,Tot Bwd Pkts,TotLen Fwd Pkts,"
               "TotLen Bwd Pkts,Flow Byts/s,Flow Pkts/s,Label\n")
FLOW_ROWS = [
    "16/02/2018 09:00:01 AM,443,1200,3,2,400,900,1083.3,4166.7,BENIGN",
    "16/02/2018 09:00:02 AM,80,0,1,0,0,0,0,0,DoS Hulk",
    "16/02/2018 09:00:02 AM,53,NaN,1,1,40,80,1,1,BENIGN",
    "16/02/2018 09:00:01 AM,53,5,1,1,40,80,1,1,BENIGN",
    "garbage,53,5,1,1,40,80,1,1,BENIGN",
    "16/02/2018 09:00:40 AM,53,5,1,1,40,80,1,1,BENIGN",
    "16/02/2018 09:00:41 AM,443",
]


class TestEventReader:
    def _read(self, text):
        schema, b = parse_schema(FLOW_SCHEMA)
        reader = EventReader(b, schema)
        return reader, list(reader.read(io.StringIO(text)))

    def test_counts(self):
        reader, evs = self._read(FLOW_HEADER + "\n".join(FLOW_ROWS) + "\n")
        s = reader.stats
        assert s.rows == len(FLOW_ROWS)
        assert s.accepted == len(evs) == 3
        assert s.accepted + s.rejected + s.out_of_order == s.rows
        assert s.out_of_order == 1
        assert s.rejection_rate == pytest.approx(4 / 7)
        assert [e.is_attack for e in evs] == [False, True, False]
        assert reader.dictionaries.values[0] == ["443", "80", "53"]

    def test_reparse_identical(self):
        text = FLOW_HEADER + "\n".join(FLOW_ROWS) + "\n"
        _, a = self._read(text)
        _, b = self._read(text)
        assert [e.event for e in a] == [e.event for e in b]

    def test_missing_input_column(self):
        with pytest.raises(ConfigError, match="Flow Duration"):
            self._read("Timestamp,Dst Port\n1,2\n")

    def test_gzip_input(self, tmp_path):
        text = FLOW_HEADER + "\n".join(FLOW_ROWS) + "\n"
        (tmp_path / "f.csv").write_text(text)
        with gzip.open(tmp_path / "f.csv.gz", "wt") as fh:
            fh.write(text)
        schema, b = parse_schema(FLOW_SCHEMA)
        plain = [e.event for e in EventReader(b, schema).read_path(tmp_path / "f.csv")]
        schema, b = parse_schema(FLOW_SCHEMA)
        packed = [e.event for e in EventReader(b, schema).read_path(tmp_path / "f.csv.gz")]
        assert plain == packed and len(plain) == 3

    def test_skip_before_leaves_dictionary_alone(self):
        schema, b = parse_schema(FLOW_SCHEMA)
        reader = EventReader(b, schema, skip_before=1518771630.0)
        evs = list(reader.read(io.StringIO(FLOW_HEADER + "\n".join(FLOW_ROWS) + "\n")))
        assert len(evs) == 1 and evs[0].event.cat_values == (0,)
        assert reader.dictionaries.values[0] == ["53"]

    def test_windows_carry_labels(self):
        _, evs = self._read(FLOW_HEADER + "\n".join(FLOW_ROWS) + "\n")
        ws = list(window_stream(evs, tau=30.0))
        assert [len(w) for w in ws] == [2, 1]
        assert ws[0].labels.tolist() == [False, True]

    def test_custom_delimiter(self):
        schema, b = parse_schema(MINIMAL + "delimiter: ';'\n")
        reader = EventReader(b, schema)
        evs = list(reader.read(io.StringIO("ts;port\n1;a\n2;b\n")))
        assert [e.event.cat_values for e in evs] == [(0,), (1,)]
