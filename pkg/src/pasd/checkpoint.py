"""Versioned binary checkpoint container.

Layout: 8-byte magic, uint32 format version, uint64 manifest length, a JSON
manifest, then the raw little-endian float64 arrays back to back in manifest
order. Round-trips are bit-exact, including Adam accumulators, so training
can resume deterministically.
"""

from __future__ import annotations

import json
import struct
from pathlib import Path

import numpy as np

from .nets import NetworkSpec, ParamSet

MAGIC = b"PASDNET\x00"
FORMAT_VERSION = 1

_SLOTS = ("weights", "biases", "m_w", "v_w", "m_b", "v_b")


def _head_entry(params: ParamSet) -> tuple[dict, list[np.ndarray]]:
    arrays: list[np.ndarray] = []
    slots = {}
    for slot in _SLOTS:
        shapes = []
        for arr in getattr(params, slot):
            shapes.append(list(arr.shape))
            arrays.append(np.ascontiguousarray(arr, dtype="<f8"))
        slots[slot] = shapes
    entry = {
        "spec": {
            "sizes": list(params.spec.sizes),
            "hidden": params.spec.hidden,
            "output": params.spec.output,
        },
        "slots": slots,
        "adam_step": params.step,
    }
    return entry, arrays


def save_checkpoint(
    path: str | Path,
    heads: dict[str, ParamSet],
    step: int = 0,
    config_hash: str = "",
    extra: dict | None = None,
) -> None:
    """Write named parameter heads plus a manifest to *path*."""
    manifest: dict = {
        "format_version": FORMAT_VERSION,
        "step": step,
        "config_hash": config_hash,
        "heads": {},
        "extra": extra or {},
    }
    payload: list[np.ndarray] = []
    for name in sorted(heads):
        entry, arrays = _head_entry(heads[name])
        manifest["heads"][name] = entry
        payload.extend(arrays)

    blob = json.dumps(manifest, sort_keys=True).encode("utf-8")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<I", FORMAT_VERSION))
        fh.write(struct.pack("<Q", len(blob)))
        fh.write(blob)
        for arr in payload:
            fh.write(arr.tobytes())


def load_checkpoint(path: str | Path) -> tuple[dict[str, ParamSet], dict]:
    """Read a checkpoint back into named ParamSets and its manifest."""
    with open(path, "rb") as fh:
        magic = fh.read(len(MAGIC))
        if magic != MAGIC:
            raise ValueError(f"{path}: not a checkpoint file")
        (version,) = struct.unpack("<I", fh.read(4))
        if version != FORMAT_VERSION:
            raise ValueError(f"{path}: unsupported checkpoint version {version}")
        (blob_len,) = struct.unpack("<Q", fh.read(8))
        manifest = json.loads(fh.read(blob_len).decode("utf-8"))

        heads: dict[str, ParamSet] = {}
        for name in sorted(manifest["heads"]):
            entry = manifest["heads"][name]
            spec = NetworkSpec(
                sizes=tuple(entry["spec"]["sizes"]),
                hidden=entry["spec"]["hidden"],
                output=entry["spec"]["output"],
            )
            slot_arrays = {}
            for slot in _SLOTS:
                arrs = []
                for shape in entry["slots"][slot]:
                    count = int(np.prod(shape)) if shape else 1
                    raw = fh.read(count * 8)
                    arrs.append(np.frombuffer(raw, dtype="<f8").reshape(shape).copy())
                slot_arrays[slot] = arrs
            heads[name] = ParamSet(
                spec=spec,
                weights=slot_arrays["weights"],
                biases=slot_arrays["biases"],
                m_w=slot_arrays["m_w"],
                v_w=slot_arrays["v_w"],
                m_b=slot_arrays["m_b"],
                v_b=slot_arrays["v_b"],
                step=entry["adam_step"],
            )
    return heads, manifest
