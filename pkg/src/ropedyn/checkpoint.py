"""Model checkpoints: one JSON header line, then the parameter tensors as
little-endian float64 bytes concatenated in the header's declared order.
Round-trips are bit-exact."""

from __future__ import annotations

import json

import numpy as np

from .models import ModelBundle, param_spec

FORMAT_TOKEN = "ropedyn-checkpoint"
FORMAT_VERSION = 1


def save_checkpoint(bundle: ModelBundle, path) -> None:
    header = {
        "format": FORMAT_TOKEN,
        "version": FORMAT_VERSION,
        "variant": bundle.variant,
        "obs_kind": bundle.obs_kind,
        "embed_dim": bundle.embed_dim,
        "image_size": bundle.image_size,
        "geom_count": bundle.geom_count,
        "meta": bundle.meta,
        "tensors": [[name, list(arr.shape)] for name, arr in bundle.params.items()],
    }
    with open(path, "wb") as f:
        f.write(json.dumps(header, sort_keys=True, separators=(",", ":")).encode() + b"\n")
        for arr in bundle.params.values():
            f.write(np.ascontiguousarray(arr, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelBundle:
    with open(path, "rb") as f:
        header_line = f.readline()
        payload = f.read()
    try:
        header = json.loads(header_line)
    except json.JSONDecodeError:
        raise ValueError("not a checkpoint file (bad header)") from None
    if header.get("format") != FORMAT_TOKEN or header.get("version") != FORMAT_VERSION:
        raise ValueError(f"unsupported checkpoint format/version: "
                         f"{header.get('format')!r} v{header.get('version')!r}")
    params = {}
    offset = 0
    for name, shape in header["tensors"]:
        shape = tuple(shape)
        n = int(np.prod(shape)) if shape else 1
        nbytes = n * 8
        if offset + nbytes > len(payload):
            raise ValueError(f"checkpoint payload truncated at tensor {name!r}")
        params[name] = np.frombuffer(payload[offset : offset + nbytes], dtype="<f8").reshape(shape).copy()
        offset += nbytes
    if offset != len(payload):
        raise ValueError(f"checkpoint payload has {len(payload) - offset} trailing bytes")
    expected = [name for name, _ in param_spec(header["variant"], header["obs_kind"],
                                               header["geom_count"], header["embed_dim"],
                                               header["image_size"])]
    if expected != list(params.keys()):
        raise ValueError("checkpoint tensor list does not match the declared architecture")
    return ModelBundle(
        variant=header["variant"],
        obs_kind=header["obs_kind"],
        params=params,
        embed_dim=header["embed_dim"],
        image_size=header["image_size"],
        geom_count=header["geom_count"],
        meta=header["meta"],
    )
