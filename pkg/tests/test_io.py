import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from czxlab import __version__
from czxlab.io import (FORMAT_VERSION, MAGIC, FormatError, csv_with_config, dumps, envelope,
                       load_signal, read_csv_with_config, rows_to_csv, save_signal,
                       signal_from_bytes, signal_from_csv, signal_to_bytes, signal_to_csv)
from czxlab.lattice import BOX, TORUS
from czxlab.signals import Signal2D


@given(st.integers(1, 4), st.sampled_from([TORUS, BOX]), st.integers(0, 2 ** 32 - 1))
@settings(max_examples=20, deadline=None)
def test_binary_round_trip(n, domain, seed):
    v = np.random.default_rng(seed).standard_normal((1 << n, 1 << n))
    s = Signal2D(v, domain)
    back = signal_from_bytes(signal_to_bytes(s))
    assert back.domain == domain
    assert np.array_equal(back.values, v)


def test_binary_header_layout():
    data = signal_to_bytes(Signal2D(np.arange(4.0).reshape(2, 2), BOX))
    assert data[:4] == MAGIC
    assert int.from_bytes(data[4:6], "little") == FORMAT_VERSION
    assert int.from_bytes(data[6:8], "little") == 1
    assert int.from_bytes(data[8:12], "little") == 1
    assert np.frombuffer(data[12:], "<f8").tolist() == [0.0, 1.0, 2.0, 3.0]


def test_binary_errors():
    good = signal_to_bytes(Signal2D(np.zeros((2, 2))))
    for bad in (good[:5], b"XXXX" + good[4:], good[:-8]):
        with pytest.raises(FormatError):
            signal_from_bytes(bad)
    with pytest.raises(FormatError):
        signal_from_bytes(good[:4] + (99).to_bytes(2, "little") + good[6:])
    with pytest.raises(FormatError):
        signal_from_bytes(good[:6] + (7).to_bytes(2, "little") + good[8:])


def test_file_and_csv_round_trip(tmp_path, rng):
    s = Signal2D(rng.standard_normal((4, 4)))
    save_signal(tmp_path / "s.czxs", s)
    assert np.array_equal(load_signal(tmp_path / "s.czxs").values, s.values)
    text = signal_to_csv(s)
    assert text.splitlines()[0] == "i1,i2,value"
    assert np.array_equal(signal_from_csv(text).values, s.values)
    with pytest.raises(FormatError):
        signal_from_csv("i1,i2,value\n0,0,1\n0,1,1\n")


def test_envelope_and_csv_config():
    doc = envelope({"seed": np.int64(3), "xs": np.array([0.5])},
                   {"ok": np.bool_(True), "v": float("nan")}, timestamp="T")
    assert doc == {"config": {"seed": 3, "xs": [0.5]}, "version": __version__,
                   "result": {"ok": True, "v": "nan"}, "timestamp": "T"}
    assert json.loads(dumps(doc)) == doc
    text = csv_with_config({"a": 1}, rows_to_csv(["x", "y"], [[1, 0.5], [2, np.float64(1 / 3)]]))
    cfg, rows = read_csv_with_config(text)
    assert cfg == {"a": 1}
    assert rows[1] == {"x": "2", "y": "0.333333333333"}
    assert text.startswith(f"# version: {__version__}\n")
