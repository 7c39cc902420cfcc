"""File formats: 16-bit PGM images, sinogram CSV/binary, traces, metrics.

Numeric text output uses ``repr`` floats (shortest round-trip form), so
rerunning an experiment reproduces every CSV byte for byte.  The binary
sinogram format is little-endian float64 with a 16-byte header: the magic
``SINO``, u32 angle count, u32 detector count, 4 reserved zero bytes.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np

from .optimize import IterationTrace
from .radon import Sinogram, SinogramGeometry

SINO_MAGIC = b"SINO"


def _fmt(x: float) -> str:
    return repr(float(x))


# --- portable graymap (exact 16-bit quantization with recorded scaling) ---

def write_pgm16(path, values: np.ndarray, vmin: float | None = None, vmax: float | None = None):
    """Write a P5 graymap with 16-bit linear scaling; returns (vmin, vmax)."""
    values = np.asarray(values, dtype=float)
    vmin = float(values.min()) if vmin is None else float(vmin)
    vmax = float(values.max()) if vmax is None else float(vmax)
    span = vmax - vmin
    scaled = np.zeros_like(values) if span == 0.0 else (values - vmin) / span
    quant = np.clip(np.round(scaled * 65535.0), 0, 65535).astype(">u2")
    header = f"P5\n{values.shape[1]} {values.shape[0]}\n65535\n".encode("ascii")
    Path(path).write_bytes(header + quant.tobytes())
    return vmin, vmax


def read_pgm16(path, vmin: float | None = None, vmax: float | None = None) -> np.ndarray:
    """Read a P5/16-bit graymap; rescales into [vmin, vmax] when given."""
    raw = Path(path).read_bytes()
    fields, pos = [], 0
    while len(fields) < 4:
        while pos < len(raw) and raw[pos : pos + 1].isspace():
            pos += 1
        if raw[pos : pos + 1] == b"#":  # comment line
            pos = raw.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(raw) and not raw[pos : pos + 1].isspace():
            pos += 1
        fields.append(raw[start:pos])
    pos += 1  # single whitespace after maxval
    if fields[0] != b"P5" or fields[3] != b"65535":
        raise ValueError(f"{path}: not a 16-bit P5 graymap")
    width, height = int(fields[1]), int(fields[2])
    data = np.frombuffer(raw[pos:], dtype=">u2", count=width * height)
    img = data.reshape(height, width).astype(float) / 65535.0
    if vmin is None or vmax is None:
        return img
    return vmin + img * (vmax - vmin)


def write_image_meta(path, entries: dict) -> None:
    lines = [f"{k}: {_fmt(v) if isinstance(v, float) else v}" for k, v in entries.items()]
    Path(path).write_text("\n".join(lines) + "\n")


def read_image_meta(path) -> dict:
    out = {}
    for line in Path(path).read_text().splitlines():
        if not line.strip():
            continue
        key, _, val = line.partition(":")
        out[key.strip()] = val.strip()
    return out


# --- dense float CSV (images and sinograms) ---

def write_matrix_csv(path, values: np.ndarray) -> None:
    rows = (",".join(_fmt(x) for x in row) for row in np.asarray(values, dtype=float))
    Path(path).write_text("\n".join(rows) + "\n")


def read_matrix_csv(path) -> np.ndarray:
    rows = [
        [float(x) for x in line.split(",")]
        for line in Path(path).read_text().splitlines()
        if line.strip()
    ]
    return np.array(rows, dtype=float)


def write_sinogram_csv(path, sino: Sinogram) -> None:
    write_matrix_csv(path, sino.values)


def read_sinogram_csv(path) -> Sinogram:
    values = read_matrix_csv(path)
    return Sinogram(SinogramGeometry(*values.shape), values)


def write_sinogram_bin(path, sino: Sinogram) -> None:
    p, q = sino.geometry.p, sino.geometry.q
    header = SINO_MAGIC + struct.pack("<II", p, q) + b"\x00" * 4
    Path(path).write_bytes(header + sino.values.astype("<f8").tobytes())


def read_sinogram_bin(path) -> Sinogram:
    raw = Path(path).read_bytes()
    if raw[:4] != SINO_MAGIC:
        raise ValueError(f"{path}: bad magic, not a sinogram file")
    p, q = struct.unpack("<II", raw[4:12])
    values = np.frombuffer(raw[16:], dtype="<f8", count=p * q).reshape(p, q)
    return Sinogram(SinogramGeometry(p, q), values.copy())


# --- iteration traces and metric blocks ---

def write_trace_csv(path, trace: IterationTrace) -> None:
    Path(path).write_text(trace.csv_text())


def write_metrics_files(txt_path, csv_path, metrics: dict) -> None:
    Path(txt_path).write_text("".join(f"{k}: {_fmt(v)}\n" for k, v in metrics.items()))
    keys = list(metrics)
    Path(csv_path).write_text(
        ",".join(keys) + "\n" + ",".join(_fmt(metrics[k]) for k in keys) + "\n"
    )


# --- flux-derivative pattern tables ---

def read_flux_pattern_csv(path) -> np.ndarray:
    """Two-column (s, flux-derivative) CSV; a non-numeric header row is allowed."""
    rows = []
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split(",")
        try:
            rows.append((float(parts[0]), float(parts[1])))
        except ValueError:
            if rows:
                raise
            continue  # header
    if not rows:
        raise ValueError(f"{path}: no numeric rows")
    return np.array(rows, dtype=float)


def write_flux_pattern_csv(path, pattern: np.ndarray) -> None:
    write_matrix_csv(path, pattern)


# --- minimal TOML emitter for manifests (config schema: tables of scalars/lists) ---

def _toml_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if v == float("inf"):
            return "inf"
        if v == float("-inf"):
            return "-inf"
        return _fmt(v)
    if isinstance(v, str):
        return '"' + v.replace("\\", "\\\\").replace('"', '\\"') + '"'
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_toml_value(x) for x in v) + "]"
    raise TypeError(f"cannot serialize {type(v).__name__} to TOML")


def toml_dumps(data: dict) -> str:
    """Serialize a two-level dict (scalars at top, tables of scalars below)."""
    top, tables = [], []
    for key, val in data.items():
        if isinstance(val, dict):
            body = "".join(f"{k} = {_toml_value(v)}\n" for k, v in val.items())
            tables.append(f"[{key}]\n{body}")
        else:
            top.append(f"{key} = {_toml_value(val)}\n")
    return "".join(top) + ("\n" if top and tables else "") + "\n".join(tables)
