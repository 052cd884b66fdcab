"""Flat checkpoint archive: named little-endian float32 buffers + manifest.

A checkpoint is a zip file containing ``manifest.json`` (format version,
tensor shapes, optional metadata such as the training config) and one raw
``data/<name>.bin`` entry per tensor.
"""

from __future__ import annotations

import json
import zipfile

import numpy as np

FORMAT_VERSION = 1
_MANIFEST = "manifest.json"


def save_checkpoint(path, tensors, meta=None):
    """Write named arrays as little-endian float32 buffers."""
    manifest = {"format_version": FORMAT_VERSION, "meta": meta or {}, "tensors": {}}
    for name, arr in tensors.items():
        arr = np.asarray(arr)
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"refusing to checkpoint non-finite values in {name!r}")
        manifest["tensors"][name] = {"shape": list(arr.shape), "dtype": "float32"}
    with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
        zf.writestr(_MANIFEST, json.dumps(manifest, indent=1, sort_keys=True))
        for name, arr in tensors.items():
            buf = np.ascontiguousarray(np.asarray(arr), dtype="<f4")
            zf.writestr(f"data/{name}.bin", buf.tobytes())


def load_checkpoint(path):
    """Return ({name: float32 array}, meta dict)."""
    with zipfile.ZipFile(path, "r") as zf:
        manifest = json.loads(zf.read(_MANIFEST).decode("utf-8"))
        version = manifest.get("format_version")
        if version != FORMAT_VERSION:
            raise ValueError(
                f"checkpoint {path} has format_version {version}, expected {FORMAT_VERSION}"
            )
        tensors = {}
        for name, info in manifest["tensors"].items():
            raw = zf.read(f"data/{name}.bin")
            arr = np.frombuffer(raw, dtype="<f4").reshape(info["shape"])
            tensors[name] = arr.astype(np.float32)
    return tensors, manifest.get("meta", {})
