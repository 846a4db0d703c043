"""Artifact emission: CSV time series, JSON reports, binary checkpoints, SVG.

Checkpoints are little-endian with a fixed header (magic "OLDB", format
version, grid and physics parameters, time) followed by the raw complex
coefficients of the velocity (3 components) and stress (6 components) as
IEEE-754 float64 (real, imaginary) pairs in row-major mode order.  Round
trips are bit-exact.

Floats in CSV and JSON are written with 17 significant digits so every value
parses back exactly; all emitters are deterministic functions of their
inputs (the SVG is hand-assembled for that reason).
"""

from __future__ import annotations

import math
import struct
from pathlib import Path

import numpy as np

from .rates import SCHEMA_COLUMNS, TimeSeries
from .solver import SimState
from .spectral import FluidParams, FourierGrid, SpectralTensorField, SpectralVectorField

CHECKPOINT_MAGIC = b"OLDB"
CHECKPOINT_VERSION = 1
_HEADER = struct.Struct("<4sII6d")


class CheckpointError(ValueError):
    """Malformed checkpoint file or version mismatch."""


def format_float(x: float) -> str:
    """17-significant-digit decimal form; round-trips through float exactly."""
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite value {x!r}")
    return f"{x:.17g}"


# -- time series --------------------------------------------------------------

def emit_timeseries(series: TimeSeries, path) -> None:
    """Write the diagnostics CSV with the fixed column schema."""
    missing = [c for c in SCHEMA_COLUMNS if c not in series.columns]
    if missing:
        raise ValueError(f"series lacks schema columns: {', '.join(missing)}")
    lines = ["t," + ",".join(SCHEMA_COLUMNS)]
    for i, t in enumerate(series.times):
        row = [format_float(float(t))]
        row += [format_float(float(series.columns[c][i])) for c in SCHEMA_COLUMNS]
        lines.append(",".join(row))
    Path(path).write_text("\n".join(lines) + "\n", encoding="ascii")


def read_timeseries(path) -> TimeSeries:
    text = Path(path).read_text(encoding="ascii")
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = lines[0].split(",")
    if header[0] != "t":
        raise ValueError(f"malformed series header in {path}")
    names = header[1:]
    data = np.array([[float(v) for v in ln.split(",")] for ln in lines[1:]])
    if data.size == 0:
        data = data.reshape(0, len(names) + 1)
    return TimeSeries(data[:, 0], {name: data[:, i + 1] for i, name in enumerate(names)})


# -- JSON reports -------------------------------------------------------------

def _json_value(obj) -> str:
    if obj is None:
        return "null"
    if obj is True:
        return "true"
    if obj is False:
        return "false"
    if isinstance(obj, str):
        escaped = obj.replace("\\", "\\\\").replace('"', '\\"')
        for ch, code in (("\n", "\\n"), ("\r", "\\r"), ("\t", "\\t")):
            escaped = escaped.replace(ch, code)
        return f'"{escaped}"'
    if isinstance(obj, (int, np.integer)) and not isinstance(obj, bool):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_float(float(obj))
    if isinstance(obj, dict):
        items = (f"{_json_value(str(k))}: {_json_value(v)}" for k, v in obj.items())
        return "{" + ", ".join(items) + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        return "[" + ", ".join(_json_value(v) for v in obj) + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__} to JSON")


def emit_report(report, path) -> None:
    """Write a JSON report with deterministic field order and exact floats."""
    Path(path).write_text(_json_value(report) + "\n", encoding="ascii")


def fit_record(quantity: str, predicted: float, slope_fit, verdict: str) -> dict:
    """One report record in the fixed field order."""
    return {
        "quantity": quantity,
        "predicted_exponent": predicted,
        "fitted_slope": slope_fit.slope,
        "stderr": slope_fit.stderr,
        "window": list(slope_fit.window),
        "verdict": verdict,
    }


def checkpoint_path(out_dir, tag: str) -> Path:
    return Path(out_dir) / f"checkpoint_{tag}.oldb"


def report_path(out_dir, name: str) -> Path:
    return Path(out_dir) / f"{name}.json"


# -- binary checkpoints -------------------------------------------------------

def write_checkpoint(path, state: SimState) -> None:
    grid = state.grid
    params = state.params
    header = _HEADER.pack(
        CHECKPOINT_MAGIC,
        CHECKPOINT_VERSION,
        grid.n_per_axis,
        grid.box_scale,
        params.omega,
        params.a,
        params.reynolds,
        params.weissenberg,
        state.time,
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(np.ascontiguousarray(state.u.coeffs, dtype="<c16").tobytes())
        fh.write(np.ascontiguousarray(state.tau.coeffs, dtype="<c16").tobytes())


def read_checkpoint(path) -> SimState:
    blob = Path(path).read_bytes()
    if len(blob) < _HEADER.size:
        raise CheckpointError(f"{path}: truncated header")
    magic, version, n, box_scale, omega, a, reynolds, weissenberg, time = _HEADER.unpack_from(blob)
    if magic != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {magic!r}")
    if version != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: format version {version} unsupported (expected {CHECKPOINT_VERSION})"
        )
    grid = FourierGrid(n_per_axis=n, box_scale=box_scale)
    params = FluidParams(omega=omega, a=a, reynolds=reynolds, weissenberg=weissenberg)
    count = n**3
    expected = _HEADER.size + 9 * count * 16
    if len(blob) != expected:
        raise CheckpointError(f"{path}: expected {expected} bytes, found {len(blob)}")
    body = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size)
    u = body[: 3 * count].reshape(3, n, n, n).astype(np.complex128)
    tau = body[3 * count:].reshape(6, n, n, n).astype(np.complex128)
    return SimState(
        time=time,
        u=SpectralVectorField(grid, u),
        tau=SpectralTensorField(grid, tau),
        params=params,
    )


# -- SVG plots ----------------------------------------------------------------

_PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")
_W, _H = 720.0, 540.0
_ML, _MR, _MT, _MB = 72.0, 16.0, 16.0, 48.0


def _ticks(lo: float, hi: float) -> list[int]:
    return list(range(math.ceil(lo - 1e-9), math.floor(hi + 1e-9) + 1))


def emit_plot(series: TimeSeries, columns, path, guides=None) -> None:
    """Log-log SVG plot of the named columns against 1 + t.

    ``guides`` is an optional list of reference exponents drawn as dashed
    slope lines.  Output bytes depend only on the inputs.
    """
    for name in columns:
        if name not in series.columns:
            raise ValueError(f"unknown column {name!r}")
    xs = np.log10(1.0 + series.times)
    data = {}
    for name in columns:
        vals = series.columns[name]
        keep = vals > 0
        if not np.any(keep):
            raise ValueError(f"column {name!r} has no positive values to plot")
        data[name] = (xs[keep], np.log10(vals[keep]))
    x_lo = min(float(np.min(x)) for x, _ in data.values())
    x_hi = max(float(np.max(x)) for x, _ in data.values())
    y_lo = min(float(np.min(y)) for _, y in data.values())
    y_hi = max(float(np.max(y)) for _, y in data.values())
    if x_hi - x_lo < 1e-12:
        x_hi = x_lo + 1.0
    span = y_hi - y_lo
    y_lo -= 0.05 * span + 1e-12
    y_hi += 0.05 * span + 1e-12

    def px(x):
        return _ML + (x - x_lo) / (x_hi - x_lo) * (_W - _ML - _MR)

    def py(y):
        return _H - _MB - (y - y_lo) / (y_hi - y_lo) * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W:.0f}" height="{_H:.0f}" '
        f'viewBox="0 0 {_W:.0f} {_H:.0f}">',
        f'<rect x="0" y="0" width="{_W:.0f}" height="{_H:.0f}" fill="white"/>',
    ]
    for tick in _ticks(x_lo, x_hi):
        x = px(tick)
        parts.append(
            f'<line x1="{x:.2f}" y1="{py(y_lo):.2f}" x2="{x:.2f}" y2="{py(y_hi):.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{x:.2f}" y="{_H - _MB + 18:.2f}" font-size="12" '
            f'text-anchor="middle" font-family="sans-serif">1e{tick}</text>'
        )
    for tick in _ticks(y_lo, y_hi):
        y = py(tick)
        parts.append(
            f'<line x1="{px(x_lo):.2f}" y1="{y:.2f}" x2="{px(x_hi):.2f}" y2="{y:.2f}" '
            'stroke="#dddddd" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{_ML - 6:.2f}" y="{y + 4:.2f}" font-size="12" '
            f'text-anchor="end" font-family="sans-serif">1e{tick}</text>'
        )
    parts.append(
        f'<rect x="{_ML:.2f}" y="{_MT:.2f}" width="{_W - _ML - _MR:.2f}" '
        f'height="{_H - _MT - _MB:.2f}" fill="none" stroke="#333333"/>'
    )
    parts.append(
        f'<text x="{(_ML + _W - _MR) / 2:.2f}" y="{_H - 10:.2f}" font-size="13" '
        'text-anchor="middle" font-family="sans-serif">1 + t</text>'
    )
    for idx, (label, exponent) in enumerate(guides or []):
        x0, y0 = x_lo + 0.05 * (x_hi - x_lo), y_hi - 0.08 * (y_hi - y_lo)
        x1 = x_hi - 0.05 * (x_hi - x_lo)
        y1 = y0 + exponent * (x1 - x0)
        parts.append(
            f'<line x1="{px(x0):.2f}" y1="{py(y0):.2f}" x2="{px(x1):.2f}" y2="{py(y1):.2f}" '
            'stroke="#888888" stroke-width="1" stroke-dasharray="6,4"/>'
        )
        parts.append(
            f'<text x="{px(x1):.2f}" y="{py(y1) - 5:.2f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif" fill="#666666">{label}</text>'
        )
    for idx, name in enumerate(columns):
        color = _PALETTE[idx % len(_PALETTE)]
        x, y = data[name]
        points = " ".join(f"{px(a):.2f},{py(b):.2f}" for a, b in zip(x, y))
        parts.append(
            f'<polyline points="{points}" fill="none" stroke="{color}" stroke-width="1.6"/>'
        )
        ly = _MT + 18 + 16 * idx
        parts.append(
            f'<line x1="{_W - _MR - 150:.2f}" y1="{ly:.2f}" x2="{_W - _MR - 126:.2f}" '
            f'y2="{ly:.2f}" stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{_W - _MR - 120:.2f}" y="{ly + 4:.2f}" font-size="12" '
            f'font-family="sans-serif">{name}</text>'
        )
    parts.append("</svg>")
    Path(path).write_text("\n".join(parts) + "\n", encoding="ascii")
