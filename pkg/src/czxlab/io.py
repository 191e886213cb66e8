"""Serialisation of signals and experiment outputs.

Binary signal layout: header ``<4sHHI`` (magic ``CZXS``, format version,
domain code, n) followed by the 4**n cell values as little-endian float64,
row-major.
"""

from __future__ import annotations

import csv
import datetime as _dt
import io as _io
import json
import struct
from pathlib import Path

import numpy as np

from . import __version__
from .lattice import BOX, TORUS
from .signals import Signal2D

MAGIC = b"CZXS"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHHI")
_DOMAIN_CODE = {TORUS: 0, BOX: 1}
_CODE_DOMAIN = {v: k for k, v in _DOMAIN_CODE.items()}


class FormatError(ValueError):
    pass


def signal_to_bytes(s: Signal2D) -> bytes:
    head = _HEADER.pack(MAGIC, FORMAT_VERSION, _DOMAIN_CODE[s.domain], s.n)
    return head + np.ascontiguousarray(s.values, dtype="<f8").tobytes()


def signal_from_bytes(data: bytes) -> Signal2D:
    if len(data) < _HEADER.size:
        raise FormatError("truncated header")
    magic, version, code, n = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise FormatError(f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported format version {version}")
    if code not in _CODE_DOMAIN:
        raise FormatError(f"unknown domain code {code}")
    N = 1 << n
    body = data[_HEADER.size:]
    if len(body) != 8 * N * N:
        raise FormatError(f"expected {8 * N * N} data bytes, found {len(body)}")
    v = np.frombuffer(body, dtype="<f8").reshape(N, N).astype(np.float64)
    return Signal2D(v, _CODE_DOMAIN[code])


def save_signal(path, s: Signal2D) -> None:
    Path(path).write_bytes(signal_to_bytes(s))


def load_signal(path) -> Signal2D:
    return signal_from_bytes(Path(path).read_bytes())


def signal_to_csv(s: Signal2D) -> str:
    """One row per cell: i1, i2, value."""
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["i1", "i2", "value"])
    for (i, j), v in np.ndenumerate(s.values):
        w.writerow([i, j, repr(float(v))])
    return buf.getvalue()


def signal_from_csv(text: str, domain: str = TORUS) -> Signal2D:
    rows = list(csv.DictReader(_io.StringIO(text)))
    N = int(round(len(rows) ** 0.5))
    if N * N != len(rows) or N & (N - 1):
        raise FormatError("cell count is not a power-of-two square")
    v = np.zeros((N, N))
    for r in rows:
        v[int(r["i1"]), int(r["i2"])] = float(r["value"])
    return Signal2D(v, domain)


def rows_to_csv(header: list[str], rows) -> str:
    buf = _io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_fmt(x) for x in r])
    return buf.getvalue()


def _fmt(x):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}"
    return x


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_,)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        f = float(x)
        if f != f or f in (float("inf"), float("-inf")):
            return str(f)
        return f
    return x


def envelope(config: dict, result: dict, timestamp: str | None = None) -> dict:
    """Output document: config, library version, result and a timestamp."""
    stamp = timestamp or _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")
    return {"config": _jsonable(config), "version": __version__,
            "result": _jsonable(result), "timestamp": stamp}


def dumps(doc: dict) -> str:
    return json.dumps(doc, sort_keys=True, indent=2) + "\n"


def csv_with_config(config: dict, text: str) -> str:
    """Prefix CSV text with comment lines carrying the config and version."""
    head = f"# version: {__version__}\n# config: {json.dumps(_jsonable(config), sort_keys=True)}\n"
    return head + text


def read_csv_with_config(text: str) -> tuple[dict, list[dict]]:
    lines = text.splitlines()
    config = {}
    body = []
    for ln in lines:
        if ln.startswith("# config: "):
            config = json.loads(ln[len("# config: "):])
        elif not ln.startswith("#"):
            body.append(ln)
    return config, list(csv.DictReader(body))
