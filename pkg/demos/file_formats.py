"""
Cube, label, model and map files on disk
========================================

Every artifact uses the same container: an ASCII header (magic + version
line, key/value lines, END) followed by a little-endian binary payload.
This writes each artifact for a tiny synthetic scene and reads it back.
"""

import os
import tempfile

import numpy as np

from smsb import FitParams, SynthSpec, fit, generate
from smsb.formats import (
    CLASS_COLORS,
    read_cube,
    read_labels,
    read_model,
    write_cube,
    write_labels,
    write_map,
    write_model,
)

out = tempfile.mkdtemp()
scene = generate(SynthSpec(width=16, height=16, bands=16, class_count=3,
                           B=4, discriminative_blocks=(0,), seed=1))
cube, labels = scene["cube"], scene["labels"]

# cube: f32le payload, band-sequential, row-major pixel scan
cube_path = os.path.join(out, "scene-cube.smsb")
write_cube(cube, cube_path)
back = read_cube(cube_path)
print(f"cube round trip: {back.bands} bands x {back.n_pixels} pixels, "
      f"max error {np.max(np.abs(back.data - cube.data)):.2e}")
with open(cube_path, "rb") as fh:
    print("cube header:", fh.read(120).split(b"END")[0].decode().replace("\n", " | "))

# labels: u16le per pixel, 0 is background; color table in the header
labels_path = os.path.join(out, "scene-labels.smsb")
write_labels(labels, cube.width, cube.height, labels_path)
back_labels, w, h = read_labels(labels_path)
print(f"labels round trip: {w}x{h}, "
      f"identical: {np.array_equal(back_labels.labels, labels.labels)}")

# model: learned atoms (f32le, column-major) + partition and mask settings
model = fit(cube, FitParams(m=4, B=4, k=3, mask_mode="top_n", active_blocks=1, epochs=2))
model_path = os.path.join(out, "scene-model.smsb")
write_model(model, model_path)
back_model, _ = read_model(model_path)
print(f"model round trip: atoms {back_model.dict.atoms.shape}, "
      f"max error {np.max(np.abs(back_model.dict.atoms - model.dict.atoms)):.2e}")

# classification map: plain binary PPM, one palette color per class
map_path = os.path.join(out, "scene-map.ppm")
write_map(labels, cube.width, cube.height, CLASS_COLORS, map_path)
with open(map_path, "rb") as fh:
    head = fh.read(16)
print(f"map file starts with {head[:2]!r} (P6 = binary PPM), "
      f"{os.path.getsize(map_path)} bytes")
