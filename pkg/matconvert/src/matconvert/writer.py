"""Standalone writers for the normative cube and label byte formats.

The layouts are an external contract shared with the consuming library:
an ASCII header (``MAGIC 1`` line, ``key value`` lines, ``END`` line)
followed by a little-endian payload.  Cubes store f32 values
band-sequentially with row-major pixel order; label maps store one u16
per pixel with 0 as background.
"""

from __future__ import annotations

import numpy as np

CUBE_MAGIC = "SMSB-CUBE"
LABEL_MAGIC = "SMSB-LABELS"


def _header(magic: str, fields) -> bytes:
    lines = [f"{magic} 1"]
    for key, value in fields:
        lines.append(f"{key} {value}")
    lines.append("END")
    return ("\n".join(lines) + "\n").encode("ascii")


def write_cube(data: np.ndarray, width: int, height: int, band_trim: int, path) -> None:
    """Write an S x N matrix (bands x pixels, row-major pixel scan)."""
    bands, n = data.shape
    if n != width * height:
        raise ValueError(f"expected {width * height} pixels, got {n}")
    if not np.all(np.isfinite(data)):
        raise ValueError("cube contains non-finite values")
    fields = [
        ("width", width),
        ("height", height),
        ("bands", bands),
        ("band_trim", band_trim),
        ("dtype", "f32le"),
        ("order", "band-sequential,row-major-pixels"),
    ]
    with open(path, "wb") as fh:
        fh.write(_header(CUBE_MAGIC, fields))
        fh.write(np.ascontiguousarray(data, dtype="<f4").tobytes())


def write_labels(
    labels: np.ndarray, width: int, height: int, colors: np.ndarray, path
) -> None:
    """Write per-pixel u16 class ids (0 = background) with a color table."""
    if labels.size != width * height:
        raise ValueError(f"expected {width * height} labels, got {labels.size}")
    classes = int(labels.max(initial=0))
    fields = [
        ("width", width),
        ("height", height),
        ("classes", classes),
        ("dtype", "u16le"),
    ]
    for c in range(1, classes + 1):
        rgb = colors[c - 1]
        fields.append((f"color_{c}", f"{int(rgb[0])},{int(rgb[1])},{int(rgb[2])}"))
    with open(path, "wb") as fh:
        fh.write(_header(LABEL_MAGIC, fields))
        fh.write(np.ascontiguousarray(labels, dtype="<u2").tobytes())
