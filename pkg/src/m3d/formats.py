"""File formats: PFM, ASCII PLY, PNG, CSV tables, flat config and manifests.

Everything here is deterministic byte-for-byte given identical inputs, which
the CLI's reproducibility contract depends on. Field semantics are documented
in docs/formats.md.
"""

from __future__ import annotations

import struct
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InvalidArgumentError


# ---------------------------------------------------------------- PFM

def write_pfm(path, data: np.ndarray) -> None:
    """Little-endian PFM; rows are stored bottom-up per the format convention."""
    a = np.asarray(data, dtype=np.float32)
    if a.ndim == 2:
        header = b"Pf"
        rows = a[::-1]
    elif a.ndim == 3 and a.shape[2] == 3:
        header = b"PF"
        rows = a[::-1]
    elif a.ndim == 3 and a.shape[2] == 1:
        header = b"Pf"
        rows = a[::-1, :, 0]
    else:
        raise InvalidArgumentError(f"PFM supports 1 or 3 channels, got shape {a.shape}")
    h, w = a.shape[:2]
    with open(path, "wb") as f:
        f.write(header + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(np.ascontiguousarray(rows, dtype="<f4").tobytes())


def read_pfm(path) -> np.ndarray:
    with open(path, "rb") as f:
        header = f.readline().strip()
        if header not in (b"Pf", b"PF"):
            raise InvalidArgumentError(f"not a PFM file: {path}")
        dims = f.readline().split()
        w, h = int(dims[0]), int(dims[1])
        scale = float(f.readline())
        count = w * h * (3 if header == b"PF" else 1)
        fmt = "<f4" if scale < 0 else ">f4"
        data = np.frombuffer(f.read(count * 4), dtype=fmt).astype(np.float32)
    if header == b"PF":
        arr = data.reshape(h, w, 3)
    else:
        arr = data.reshape(h, w)
    return arr[::-1].copy()


# ---------------------------------------------------------------- PNG

def write_png(path, data: np.ndarray, bit_depth: int = 8, scale: float | None = None) -> None:
    """Store an intensity field as 8- or 16-bit PNG.

    For 8-bit, data is treated as [0, 1] intensities. For 16-bit, `scale`
    gives units per integer step (e.g. millimeters), recorded by the caller's
    manifest, value = round(data / scale).
    """
    a = np.asarray(data, dtype=np.float64)
    if a.ndim == 3 and a.shape[2] == 1:
        a = a[:, :, 0]
    if bit_depth == 8:
        q = np.clip(np.round(a * 255.0), 0, 255).astype(np.uint8)
        img = Image.fromarray(q if q.ndim == 2 else q, mode="L" if q.ndim == 2 else "RGB")
    elif bit_depth == 16:
        if a.ndim != 2:
            raise InvalidArgumentError("16-bit PNG supports single-channel data only")
        s = 1.0 if scale is None else scale
        q = np.clip(np.round(a / s), 0, 65535).astype(np.uint16)
        img = Image.fromarray(q)
    else:
        raise InvalidArgumentError("bit_depth must be 8 or 16")
    img.save(path, format="PNG")


def read_png(path) -> np.ndarray:
    """Load a PNG back to float: [0,1] for 8-bit, raw integers for 16-bit."""
    img = Image.open(path)
    a = np.asarray(img)
    if a.dtype == np.uint8:
        return a.astype(np.float64) / 255.0
    return a.astype(np.float64)


# ---------------------------------------------------------------- PLY

def write_ply(path, points: np.ndarray) -> None:
    pts = np.asarray(points, dtype=np.float64).reshape(-1, 3)
    lines = [
        "ply",
        "format ascii 1.0",
        f"element vertex {len(pts)}",
        "property double x",
        "property double y",
        "property double z",
        "end_header",
    ]
    body = "\n".join(" ".join(repr(float(v)) for v in p) for p in pts)
    text = "\n".join(lines) + ("\n" + body if len(pts) else "") + "\n"
    Path(path).write_text(text)


def read_ply(path) -> np.ndarray:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != "ply":
        raise InvalidArgumentError(f"not a PLY file: {path}")
    n = 0
    start = 0
    for i, line in enumerate(lines):
        if line.startswith("element vertex"):
            n = int(line.split()[-1])
        if line == "end_header":
            start = i + 1
            break
    pts = [tuple(float(v) for v in lines[start + k].split()[:3]) for k in range(n)]
    return np.asarray(pts, dtype=np.float64).reshape(-1, 3)


# ---------------------------------------------------------------- CSV

def write_csv(path, header, rows) -> None:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_csv_cell(v) for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def _csv_cell(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def read_csv(path):
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    rows = [line.split(",") for line in lines[1:] if line]
    return header, rows


# ------------------------------------------------- flat config / manifest

def write_flat_config(path, entries: dict) -> None:
    """key = value lines, sorted for byte-stable output."""
    lines = [f"{k} = {entries[k]}" for k in sorted(entries)]
    Path(path).write_text("\n".join(lines) + "\n")


def read_flat_config(path, known_keys=None) -> dict:
    """Parse key = value lines; unknown keys are errors to catch typos."""
    out = {}
    for ln, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise InvalidArgumentError(f"{path}:{ln}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if known_keys is not None and key not in known_keys:
            raise InvalidArgumentError(f"{path}:{ln}: unknown key {key!r}")
        out[key] = value
    return out
