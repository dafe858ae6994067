"""Serialization of scattering data, kernels and reports.

JSON files are written canonically: keys sorted, floats as ``%.17g`` (enough digits to
round-trip every double), non-finite floats as the strings ``"inf"``, ``"-inf"`` and ``"nan"``.
Loading and saving a file therefore reproduces it byte for byte.  CSV files have a header
row, comma separators and LF line endings.
"""

from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .background import SpectrumPartition
from .direct import BandSegment, ScatteringData

SCHEMA_VERSION = 1
META_KEYS = ("checks", "cutoff", "omega", "potential", "window")


def _float(x: float) -> str:
    if math.isnan(x):
        return '"nan"'
    if math.isinf(x):
        return '"inf"' if x > 0 else '"-inf"'
    return "%.17g" % x


def _encode(obj, level: int) -> str:
    pad = "  " * (level + 1)
    end = "  " * level
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(obj[k], level + 1)}"
                 for k in sorted(obj, key=str)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        seq = list(obj.tolist() if isinstance(obj, np.ndarray) else obj)
        if not seq:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in seq):
            return "[" + ", ".join(_encode(v, level + 1) for v in seq) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, level + 1) for v in seq) + "\n" + end + "]"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if obj is None:
        return "null"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    """Canonical JSON text (trailing newline included)."""
    return _encode(obj, 0) + "\n"


def _decode_float(v):
    if isinstance(v, str):
        return {"inf": np.inf, "-inf": -np.inf, "nan": np.nan}[v]
    return float(v)


def _floats(seq) -> np.ndarray:
    return np.array([_decode_float(v) for v in seq], dtype=float)


# ---------------------------------------------------------------------- scattering data


def _segment_to_dict(seg: BandSegment) -> dict:
    return {
        "a": float(seg.a), "b": float(seg.b), "kind": seg.kind, "n": int(seg.n), "map": seg.map,
        "cutoff": None if seg.cutoff is None else float(seg.cutoff),
        "lambda": np.asarray(seg.lam, float), "re_R": np.real(seg.R), "im_R": np.imag(seg.R),
        "re_T": np.real(seg.T), "im_T": np.imag(seg.T),
    }


def _segment_from_dict(d: dict) -> BandSegment:
    lam = _floats(d["lambda"])
    R = _floats(d["re_R"]) + 1j * _floats(d["im_R"])
    T = _floats(d["re_T"]) + 1j * _floats(d["im_T"])
    if not (lam.size == R.size == T.size == int(d["n"])):
        raise ValueError("segment arrays are not parallel")
    cutoff = None if d.get("cutoff") is None else _decode_float(d["cutoff"])
    return BandSegment(_decode_float(d["a"]), _decode_float(d["b"]), d["kind"], int(d["n"]),
                       d["map"], cutoff, lam, R, T)


def data_to_dict(data: ScatteringData) -> dict:
    meta = {k: data.meta[k] for k in META_KEYS if k in data.meta}
    if "checks" not in meta and data.checks:
        meta["checks"] = dict(data.checks)
    return {
        "schema": SCHEMA_VERSION,
        "bands_plus": [_segment_to_dict(s) for s in data.bands_plus],
        "bands_minus": [_segment_to_dict(s) for s in data.bands_minus],
        "eigenvalues": np.asarray(data.eigenvalues, float),
        "gamma_plus": np.asarray(data.gamma_plus, float),
        "gamma_minus": np.asarray(data.gamma_minus, float),
        "virtual_levels": [{k: float(v) for k, v in vl.items()} for vl in data.virtual_levels],
        "partition": data.partition.to_dict(),
        "meta": meta,
    }


def data_from_dict(d: dict) -> ScatteringData:
    for key in ("bands_plus", "bands_minus", "eigenvalues", "gamma_plus", "gamma_minus",
                "virtual_levels", "partition"):
        if key not in d:
            raise ValueError(f"scattering data lack {key!r}")
    ev = _floats(d["eigenvalues"])
    gp, gm = _floats(d["gamma_plus"]), _floats(d["gamma_minus"])
    if not (ev.size == gp.size == gm.size):
        raise ValueError("eigenvalue and norming-constant arrays are not parallel")
    meta = dict(d.get("meta", {}))
    data = ScatteringData([_segment_from_dict(s) for s in d["bands_plus"]],
                          [_segment_from_dict(s) for s in d["bands_minus"]], ev, gp, gm,
                          [{k: _decode_float(v) for k, v in vl.items()} for vl in d["virtual_levels"]],
                          SpectrumPartition.from_dict(d["partition"]),
                          checks=dict(meta.get("checks", {})), meta=meta)
    return data


def save_data(data: ScatteringData, path) -> Path:
    path = Path(path)
    path.write_text(dumps(data_to_dict(data)), encoding="utf-8", newline="\n")
    return path


def load_data(path) -> ScatteringData:
    with open(path, encoding="utf-8") as fh:
        return data_from_dict(json.load(fh))


def save_json(obj, path) -> Path:
    path = Path(path)
    path.write_text(dumps(obj), encoding="utf-8", newline="\n")
    return path


# ---------------------------------------------------------------------- CSV


def write_csv(path, header, columns) -> Path:
    """Columns of equal length under a header row; floats as ``%.17g``."""
    columns = [np.asarray(c) for c in columns]
    if len(header) != len(columns) or len({c.size for c in columns}) > 1:
        raise ValueError("header and columns must match and columns must be parallel")
    lines = [",".join(header)]
    for row in zip(*columns):
        lines.append(",".join(_csv_cell(v) for v in row))
    path = Path(path)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def _csv_cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        x = float(v)
        if math.isnan(x):
            return "nan"
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        return "%.17g" % x
    return str(v)


def read_csv(path) -> dict:
    """Columns of a CSV written by :func:`write_csv` as float arrays keyed by header name."""
    raw = np.genfromtxt(path, delimiter=",", names=True, dtype=float, encoding="utf-8")
    raw = np.atleast_1d(raw)
    return {name: np.asarray(raw[name], float) for name in raw.dtype.names}


def kernel_to_dict(K) -> dict:
    """Lattice samples of a transformation kernel (``x``, ``y``, ``K`` flattened, parallel)."""
    x, y, k = K.samples()
    keep = np.ones(k.shape, bool)
    return {"side": int(K.side), "h": float(K.h), "window": list(K.window),
            "x": x[keep], "y": y[keep], "K": k[keep]}
