"""The learnable maps: state encoder, action encoder/decoder, forward and
inverse dynamics models.

All are MLPs (ReLU hidden layers, linear output); the raster state encoder
uses three stride-2 3x3 conv stages before its final linear layer.  Variants:

  fi  all five maps; forward model consumes 16-D action embeddings
  f   state encoder + forward model only; raw 4-D actions (scaled by
      1/image_size) are concatenated to the state embedding
  i   no forward model; inverse model predicts action embeddings that the
      decoder maps back to pixel-space actions

Pixel-valued inputs (coords observations, actions) are scaled by
1/image_size on the way in; the action decoder outputs pixel units directly.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tape, Node
from .rng import child_rng

VARIANTS = ("f", "i", "fi")
EMBED_DIM = 16
STATE_HIDDEN = 128
ACTION_HIDDEN = 64
CONV_CHANNELS = (8, 16, 32)


@dataclass
class ModelBundle:
    variant: str
    obs_kind: str
    params: dict[str, np.ndarray]
    embed_dim: int = EMBED_DIM
    image_size: int = 64
    geom_count: int = 25
    meta: dict = field(default_factory=dict)

    def has_forward(self) -> bool:
        return self.variant in ("f", "fi")

    def has_inverse(self) -> bool:
        return self.variant in ("i", "fi")

    def has_action_codec(self) -> bool:
        return self.variant in ("i", "fi")


def _mlp_spec(prefix: str, dims: list[int]):
    out = []
    for k in range(len(dims) - 1):
        out.append((f"{prefix}.w{k}", (dims[k], dims[k + 1])))
        out.append((f"{prefix}.b{k}", (dims[k + 1],)))
    return out


def param_spec(variant: str, obs_kind: str, geom_count: int = 25,
               embed_dim: int = EMBED_DIM, image_size: int = 64):
    """Ordered (name, shape) list; the canonical tensor order for checkpoints."""
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}")
    if obs_kind not in ("coords", "raster"):
        raise ValueError(f"unknown observation kind {obs_kind!r}")
    spec = []
    if obs_kind == "coords":
        spec += _mlp_spec("state_enc", [2 * geom_count, STATE_HIDDEN, STATE_HIDDEN,
                                        STATE_HIDDEN, embed_dim])
    else:
        c_in = 1
        for k, c_out in enumerate(CONV_CHANNELS):
            spec.append((f"state_enc.conv{k}.w", (c_out, c_in, 3, 3)))
            spec.append((f"state_enc.conv{k}.b", (c_out,)))
            c_in = c_out
        feat = CONV_CHANNELS[-1] * (image_size // 8) ** 2
        spec.append(("state_enc.fc.w", (feat, embed_dim)))
        spec.append(("state_enc.fc.b", (embed_dim,)))
    if variant in ("i", "fi"):
        spec += _mlp_spec("act_enc", [4, ACTION_HIDDEN, ACTION_HIDDEN, ACTION_HIDDEN, embed_dim])
        spec += _mlp_spec("act_dec", [embed_dim, ACTION_HIDDEN, ACTION_HIDDEN, ACTION_HIDDEN, 4])
    if variant in ("f", "fi"):
        fwd_in = embed_dim + (embed_dim if variant == "fi" else 4)
        spec += _mlp_spec("forward", [fwd_in, STATE_HIDDEN, STATE_HIDDEN, STATE_HIDDEN, embed_dim])
    if variant in ("i", "fi"):
        spec += _mlp_spec("inverse", [2 * embed_dim, STATE_HIDDEN, STATE_HIDDEN,
                                      STATE_HIDDEN, embed_dim])
    return spec


def _xavier(shape, rng):
    if len(shape) == 2:
        fan_in, fan_out = shape
    elif len(shape) == 4:
        fan_in = shape[1] * shape[2] * shape[3]
        fan_out = shape[0] * shape[2] * shape[3]
    else:
        return np.zeros(shape)  # biases
    bound = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=shape)


def init_bundle(variant: str, obs_kind: str, seed: int, geom_count: int = 25,
                image_size: int = 64, embed_dim: int = EMBED_DIM,
                meta: dict | None = None) -> ModelBundle:
    """Xavier-uniform weights, zero biases; bit-reproducible from seed."""
    rng = child_rng(seed, "model-init")
    params = {}
    for name, shape in param_spec(variant, obs_kind, geom_count, embed_dim, image_size):
        params[name] = _xavier(shape, rng) if not name.split(".")[-1].startswith("b") else np.zeros(shape)
    return ModelBundle(variant=variant, obs_kind=obs_kind, params=params,
                       embed_dim=embed_dim, image_size=image_size,
                       geom_count=geom_count, meta=dict(meta or {}))


# -- graph builders (training path) ------------------------------------------

def bind_params(g: Tape, bundle: ModelBundle) -> dict[str, Node]:
    return {name: g.leaf(value, trainable=True, name=name)
            for name, value in bundle.params.items()}


def _mlp(g: Tape, p: dict, prefix: str, x: Node) -> Node:
    k = 0
    while f"{prefix}.w{k}" in p:
        x = g.add(g.matmul(x, p[f"{prefix}.w{k}"]), p[f"{prefix}.b{k}"])
        k += 1
        if f"{prefix}.w{k}" in p:  # hidden layer
            x = g.relu(x)
    return x


def encode_state_g(g: Tape, p: dict, bundle: ModelBundle, obs: Node) -> Node:
    if bundle.obs_kind == "coords":
        return _mlp(g, p, "state_enc", obs)
    x = obs  # (N, 1, H, W)
    for k in range(len(CONV_CHANNELS)):
        x = g.relu(g.conv2d(x, p[f"state_enc.conv{k}.w"], p[f"state_enc.conv{k}.b"],
                            stride=2, pad=1))
    n = x.shape[0]
    feat = int(np.prod(x.shape[1:]))
    x = g.reshape(x, (n, feat))
    return g.add(g.matmul(x, p["state_enc.fc.w"]), p["state_enc.fc.b"])


def encode_action_g(g: Tape, p: dict, bundle: ModelBundle, action: Node) -> Node:
    if not bundle.has_action_codec():
        raise ValueError(f"variant {bundle.variant!r} has no action encoder")
    return _mlp(g, p, "act_enc", g.scale(action, 1.0 / bundle.image_size))


def decode_action_g(g: Tape, p: dict, bundle: ModelBundle, z: Node) -> Node:
    if not bundle.has_action_codec():
        raise ValueError(f"variant {bundle.variant!r} has no action decoder")
    return _mlp(g, p, "act_dec", z)


def forward_predict_g(g: Tape, p: dict, bundle: ModelBundle, h: Node, z: Node) -> Node:
    if not bundle.has_forward():
        raise ValueError(f"variant {bundle.variant!r} has no forward model")
    if bundle.variant == "f":
        z = g.scale(z, 1.0 / bundle.image_size)  # raw pixel actions in
    return _mlp(g, p, "forward", g.concat([h, z], axis=1))


def inverse_predict_g(g: Tape, p: dict, bundle: ModelBundle, h_t: Node, h_t1: Node) -> Node:
    if not bundle.has_inverse():
        raise ValueError(f"variant {bundle.variant!r} has no inverse model")
    return _mlp(g, p, "inverse", g.concat([h_t, h_t1], axis=1))


# -- numpy-level inference wrappers ------------------------------------------

def _obs_batch(bundle: ModelBundle, obs: np.ndarray) -> tuple[np.ndarray, bool]:
    obs = np.asarray(obs, dtype=np.float64)
    if bundle.obs_kind == "coords":
        if obs.ndim == 1:
            return obs[None, :], True
        return obs, False
    if obs.ndim == 2:
        return obs[None, None, :, :], True
    return obs[:, None, :, :], False


def _row_batch(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _run(build, single: bool) -> np.ndarray:
    out = build()
    return out.value[0] if single else out.value


def encode_state(bundle: ModelBundle, obs: np.ndarray) -> np.ndarray:
    batch, single = _obs_batch(bundle, obs)
    g = Tape()
    p = bind_params(g, bundle)
    return _run(lambda: encode_state_g(g, p, bundle, g.leaf(batch)), single)


def encode_action(bundle: ModelBundle, action: np.ndarray) -> np.ndarray:
    batch, single = _row_batch(action)
    g = Tape()
    p = bind_params(g, bundle)
    return _run(lambda: encode_action_g(g, p, bundle, g.leaf(batch)), single)


def decode_action(bundle: ModelBundle, z: np.ndarray) -> np.ndarray:
    """Decode to a pixel-space action, clamped into [0, image_size)."""
    batch, single = _row_batch(z)
    g = Tape()
    p = bind_params(g, bundle)
    out = _run(lambda: decode_action_g(g, p, bundle, g.leaf(batch)), single)
    return np.clip(out, 0.0, np.nextafter(float(bundle.image_size), 0.0))


def forward_predict(bundle: ModelBundle, h: np.ndarray, z: np.ndarray) -> np.ndarray:
    hb, single = _row_batch(h)
    zb, _ = _row_batch(z)
    g = Tape()
    p = bind_params(g, bundle)
    return _run(lambda: forward_predict_g(g, p, bundle, g.leaf(hb), g.leaf(zb)), single)


def inverse_predict(bundle: ModelBundle, h_t: np.ndarray, h_t1: np.ndarray) -> np.ndarray:
    hb, single = _row_batch(h_t)
    h1b, _ = _row_batch(h_t1)
    g = Tape()
    p = bind_params(g, bundle)
    return _run(lambda: inverse_predict_g(g, p, bundle, g.leaf(hb), g.leaf(h1b)), single)
