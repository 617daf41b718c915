"""Reverse-mode autodiff over dense float64 arrays.

A ``Tape`` records an append-only list of nodes (leaves and ops).  Values are
computed eagerly when all inputs are bound, or lazily via ``forward`` when
placeholder leaves are used.  ``backward`` walks the tape in reverse and
accumulates gradients.  The op set is closed: exactly what the models and
losses in this project need, each op gradient-tested against central finite
differences.

Tensors are plain numpy float64 arrays.  Nodes are immutable once written
except for value rebinding through ``forward(feed=...)``.
"""

from __future__ import annotations

import numpy as np

_F64 = np.float64


def _as_array(x) -> np.ndarray:
    a = np.asarray(x, dtype=_F64)
    return a


class Node:
    __slots__ = ("id", "kind", "inputs", "value", "grad", "trainable", "name", "aux")

    def __init__(self, nid, kind, inputs, value, trainable=False, name=None, aux=None):
        self.id = nid
        self.kind = kind
        self.inputs = inputs
        self.value = value
        self.grad = None
        self.trainable = trainable
        self.name = name
        self.aux = aux or {}

    @property
    def shape(self):
        if self.value is not None:
            return self.value.shape
        return self.aux.get("shape")

    def __repr__(self):
        return f"Node({self.id}, {self.kind}, shape={self.shape})"


class Tape:
    """Computation graph: append-only, acyclic by construction."""

    def __init__(self, check_finite: bool = False):
        self.nodes: list[Node] = []
        self.check_finite = check_finite

    # -- construction -----------------------------------------------------

    def _append(self, kind, inputs, aux=None, trainable=False, name=None, value=None,
                out_shape=None):
        aux = aux or {}
        if out_shape is not None:
            aux["shape"] = tuple(out_shape)
        node = Node(len(self.nodes), kind, list(inputs), value, trainable, name, aux)
        self.nodes.append(node)
        if kind != "leaf" and all(i.value is not None for i in node.inputs):
            node.value = _FORWARD[kind](node)
            self._check(node)
        return node

    def _check(self, node):
        if self.check_finite and node.value is not None and not np.all(np.isfinite(node.value)):
            raise FloatingPointError(f"non-finite value in node {node.id} ({node.kind})")

    def leaf(self, value=None, *, shape=None, trainable=False, name=None):
        """Input node.  Either bind a value now or declare a shape and feed later."""
        if value is None and shape is None:
            raise ValueError("leaf needs a value or a shape")
        val = None if value is None else _as_array(value)
        aux = {"shape": tuple(shape) if shape is not None else val.shape}
        node = self._append("leaf", [], aux=aux, trainable=trainable, name=name, value=val)
        self._check(node)
        return node

    # -- ops ---------------------------------------------------------------

    def matmul(self, a, b):
        if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[0]:
            raise ValueError(f"matmul shape mismatch: {a.shape} @ {b.shape}")
        return self._append("matmul", [a, b], out_shape=(a.shape[0], b.shape[1]))

    def add(self, a, b):
        """Elementwise add; also broadcasts a 1-D bias over the rows of a 2-D a."""
        if b.shape == a.shape:
            mode = "same"
        elif len(a.shape) == 2 and b.shape == (a.shape[1],):
            mode = "bias"
        elif b.shape == ():
            mode = "scalar"
        else:
            raise ValueError(f"add shape mismatch: {a.shape} + {b.shape}")
        return self._append("add", [a, b], aux={"mode": mode}, out_shape=a.shape)

    def mul(self, a, b):
        if a.shape != b.shape and b.shape != ():
            raise ValueError(f"mul shape mismatch: {a.shape} * {b.shape}")
        return self._append("mul", [a, b], out_shape=a.shape)

    def scale(self, a, c: float):
        return self._append("scale", [a], aux={"c": float(c)}, out_shape=a.shape)

    def relu(self, a):
        return self._append("relu", [a], out_shape=a.shape)

    def tanh(self, a):
        return self._append("tanh", [a], out_shape=a.shape)

    def log(self, a):
        return self._append("log", [a], out_shape=a.shape)

    def exp(self, a):
        return self._append("exp", [a], out_shape=a.shape)

    def concat(self, parts, axis=1):
        parts = list(parts)
        if not parts:
            raise ValueError("concat of nothing")
        axis = int(axis)
        shape = list(parts[0].shape)
        shape[axis] = sum(p.shape[axis] for p in parts)
        return self._append("concat", parts, aux={"axis": axis}, out_shape=shape)

    def reshape(self, a, shape):
        shape = tuple(int(s) for s in shape)
        if int(np.prod(shape)) != int(np.prod(a.shape)):
            raise ValueError(f"reshape size mismatch: {a.shape} -> {shape}")
        return self._append("reshape", [a], aux={"shape_out": shape, "shape_in": tuple(a.shape)}, out_shape=shape)

    def sum(self, a):
        """Sum over all entries -> scalar."""
        return self._append("sum", [a], out_shape=())

    def cosine(self, u, v):
        """Cosine similarity of two 1-D vectors -> scalar.  Zero norm is a domain error."""
        if len(u.shape) != 1 or u.shape != v.shape or u.shape[0] < 1:
            raise ValueError(f"cosine expects equal-length 1-D vectors, got {u.shape}, {v.shape}")
        return self._append("cosine", [u, v], out_shape=())

    def cos_rows(self, a, b):
        """Row-wise cosine similarity of two (N,D) matrices -> (N,)."""
        if len(a.shape) != 2 or a.shape != b.shape:
            raise ValueError(f"cos_rows shape mismatch: {a.shape}, {b.shape}")
        return self._append("cos_rows", [a, b], out_shape=(a.shape[0],))

    def cos_pairwise(self, a, b):
        """All-pairs cosine similarity: (N,D) x (M,D) -> (N,M)."""
        if len(a.shape) != 2 or len(b.shape) != 2 or a.shape[1] != b.shape[1]:
            raise ValueError(f"cos_pairwise shape mismatch: {a.shape}, {b.shape}")
        return self._append("cos_pairwise", [a, b], out_shape=(a.shape[0], b.shape[0]))

    def masked_lse(self, x, mask):
        """Row-wise log-sum-exp over entries where mask is True: (N,M) -> (N,)."""
        mask = np.asarray(mask, dtype=bool)
        if mask.shape != x.shape:
            raise ValueError(f"mask shape {mask.shape} != {x.shape}")
        if not mask.any(axis=1).all():
            raise ValueError("masked_lse: some row has no unmasked entry")
        return self._append("masked_lse", [x], aux={"mask": mask}, out_shape=(x.shape[0],))

    def logsumexp(self, x):
        return self.masked_lse(x, np.ones(x.shape, dtype=bool))

    def conv2d(self, x, w, b, stride=2, pad=1):
        """2-D convolution with bias: x (N,C,H,W), w (O,C,kh,kw), b (O,)."""
        if len(x.shape) != 4 or len(w.shape) != 4 or x.shape[1] != w.shape[1]:
            raise ValueError(f"conv2d shape mismatch: x {x.shape}, w {w.shape}")
        if b.shape != (w.shape[0],):
            raise ValueError(f"conv2d bias shape {b.shape} != ({w.shape[0]},)")
        stride = int(stride)
        pad = int(pad)
        ho = (x.shape[2] + 2 * pad - w.shape[2]) // stride + 1
        wo = (x.shape[3] + 2 * pad - w.shape[3]) // stride + 1
        return self._append("conv2d", [x, w, b], aux={"stride": stride, "pad": pad},
                            out_shape=(x.shape[0], w.shape[0], ho, wo))

    # sugar built from the closed op set
    def sub(self, a, b):
        return self.add(a, self.scale(b, -1.0))

    def square(self, a):
        return self.mul(a, a)

    def mean(self, a):
        n = int(np.prod(a.shape))
        return self.scale(self.sum(a), 1.0 / n)

    # -- evaluation ---------------------------------------------------------

    def forward(self, feed=None, node=None):
        """(Re)compute every node in order; returns the value of `node` (default: last).

        `feed` maps leaf nodes (or their ids) to new values.  Identical feeds
        produce bit-identical outputs.
        """
        if feed:
            for key, val in feed.items():
                lf = self.nodes[key] if isinstance(key, int) else key
                if lf.kind != "leaf":
                    raise ValueError(f"feed target {lf.id} is not a leaf")
                val = _as_array(val)
                if val.shape != tuple(lf.aux["shape"]):
                    raise ValueError(f"feed shape {val.shape} != leaf shape {lf.aux['shape']}")
                lf.value = val
        for n in self.nodes:
            if n.kind == "leaf":
                if n.value is None:
                    raise ValueError(f"unbound leaf {n.id} ({n.name})")
            else:
                n.value = _FORWARD[n.kind](n)
            self._check(n)
        target = node if node is not None else self.nodes[-1]
        return target.value

    def backward(self, loss):
        """Populate gradients for every node feeding `loss`; return {leaf id: grad}
        for trainable leaves.  Loss must be scalar and already evaluated."""
        if loss.value is None:
            raise ValueError("run forward before backward")
        if loss.value.size != 1:
            raise ValueError(f"loss node must be scalar, got shape {loss.value.shape}")
        for n in self.nodes:
            n.grad = None
        loss.grad = np.ones_like(loss.value)
        for n in reversed(self.nodes[: loss.id + 1]):
            if n.grad is None or n.kind == "leaf":
                continue
            grads = _BACKWARD[n.kind](n, n.grad)
            for inp, g in zip(n.inputs, grads):
                if g is None:
                    continue
                inp.grad = g if inp.grad is None else inp.grad + g
        out = {}
        for n in self.nodes:
            if n.trainable:
                if n.grad is None:
                    n.grad = np.zeros(n.aux["shape"], dtype=_F64)
                out[n.id] = n.grad
        return out


# -- forward implementations ---------------------------------------------

def _fw_matmul(n):
    return n.inputs[0].value @ n.inputs[1].value


def _fw_add(n):
    return n.inputs[0].value + n.inputs[1].value


def _fw_mul(n):
    return n.inputs[0].value * n.inputs[1].value


def _fw_scale(n):
    return n.inputs[0].value * n.aux["c"]


def _fw_relu(n):
    return np.maximum(n.inputs[0].value, 0.0)


def _fw_tanh(n):
    return np.tanh(n.inputs[0].value)


def _fw_log(n):
    return np.log(n.inputs[0].value)


def _fw_exp(n):
    return np.exp(n.inputs[0].value)


def _fw_concat(n):
    return np.concatenate([i.value for i in n.inputs], axis=n.aux["axis"])


def _fw_reshape(n):
    return n.inputs[0].value.reshape(n.aux["shape_out"])


def _fw_sum(n):
    return np.asarray(np.sum(n.inputs[0].value), dtype=_F64)


def _norms_or_raise(a, what):
    nrm = np.linalg.norm(a, axis=-1)
    if np.any(nrm == 0.0):
        raise ValueError(f"{what}: zero-norm input")
    return nrm


def _fw_cosine(n):
    u, v = n.inputs[0].value, n.inputs[1].value
    nu = np.linalg.norm(u)
    nv = np.linalg.norm(v)
    if nu == 0.0 or nv == 0.0:
        raise ValueError("cosine: zero-norm input")
    n.aux["cache"] = (nu, nv)
    return np.asarray(float(u @ v) / (nu * nv), dtype=_F64)


def _fw_cos_rows(n):
    a, b = n.inputs[0].value, n.inputs[1].value
    na = _norms_or_raise(a, "cos_rows")
    nb = _norms_or_raise(b, "cos_rows")
    s = np.sum(a * b, axis=1) / (na * nb)
    n.aux["cache"] = (na, nb, s)
    return s


def _fw_cos_pairwise(n):
    a, b = n.inputs[0].value, n.inputs[1].value
    na = _norms_or_raise(a, "cos_pairwise")
    nb = _norms_or_raise(b, "cos_pairwise")
    ah = a / na[:, None]
    bh = b / nb[:, None]
    s = ah @ bh.T
    n.aux["cache"] = (na, nb, ah, bh, s)
    return s


def _fw_masked_lse(n):
    x = n.inputs[0].value
    mask = n.aux["mask"]
    neg = np.where(mask, x, -np.inf)
    m = np.max(neg, axis=1)
    lse = m + np.log(np.sum(np.where(mask, np.exp(x - m[:, None]), 0.0), axis=1))
    n.aux["cache"] = lse
    return lse


def _conv_cols(x, kh, kw, stride, pad):
    xp = np.pad(x, ((0, 0), (0, 0), (pad, pad), (pad, pad)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(2, 3))
    win = win[:, :, ::stride, ::stride]  # (N, C, Ho, Wo, kh, kw)
    nb, c, ho, wo = win.shape[:4]
    cols = win.transpose(0, 2, 3, 1, 4, 5).reshape(nb, ho * wo, c * kh * kw)
    return cols, ho, wo


def _fw_conv2d(n):
    x, w, b = (i.value for i in n.inputs)
    o, c, kh, kw = w.shape
    cols, ho, wo = _conv_cols(x, kh, kw, n.aux["stride"], n.aux["pad"])
    out = cols @ w.reshape(o, -1).T + b
    n.aux["cache"] = (cols, ho, wo)
    return out.transpose(0, 2, 1).reshape(x.shape[0], o, ho, wo)


_FORWARD = {
    "matmul": _fw_matmul,
    "add": _fw_add,
    "mul": _fw_mul,
    "scale": _fw_scale,
    "relu": _fw_relu,
    "tanh": _fw_tanh,
    "log": _fw_log,
    "exp": _fw_exp,
    "concat": _fw_concat,
    "reshape": _fw_reshape,
    "sum": _fw_sum,
    "cosine": _fw_cosine,
    "cos_rows": _fw_cos_rows,
    "cos_pairwise": _fw_cos_pairwise,
    "masked_lse": _fw_masked_lse,
    "conv2d": _fw_conv2d,
}


# -- backward implementations ----------------------------------------------

def _bw_matmul(n, g):
    a, b = n.inputs[0].value, n.inputs[1].value
    return [g @ b.T, a.T @ g]


def _bw_add(n, g):
    mode = n.aux["mode"]
    if mode == "same":
        return [g, g]
    if mode == "bias":
        return [g, g.sum(axis=0)]
    return [g, np.asarray(g.sum(), dtype=_F64)]


def _bw_mul(n, g):
    a, b = n.inputs[0].value, n.inputs[1].value
    gb = g * a
    if b.shape == ():
        gb = np.asarray(gb.sum(), dtype=_F64)
    return [g * b, gb]


def _bw_scale(n, g):
    return [g * n.aux["c"]]


def _bw_relu(n, g):
    return [g * (n.inputs[0].value > 0.0)]


def _bw_tanh(n, g):
    return [g * (1.0 - n.value**2)]


def _bw_log(n, g):
    return [g / n.inputs[0].value]


def _bw_exp(n, g):
    return [g * n.value]


def _bw_concat(n, g):
    axis = n.aux["axis"]
    sizes = [i.value.shape[axis] for i in n.inputs]
    splits = np.cumsum(sizes)[:-1]
    return list(np.split(g, splits, axis=axis))


def _bw_reshape(n, g):
    return [g.reshape(n.aux["shape_in"])]


def _bw_sum(n, g):
    return [np.full(n.inputs[0].value.shape, float(g), dtype=_F64)]


def _bw_cosine(n, g):
    u, v = n.inputs[0].value, n.inputs[1].value
    nu, nv = n.aux["cache"]
    s = float(n.value)
    gu = (v / (nu * nv) - s * u / nu**2) * float(g)
    gv = (u / (nu * nv) - s * v / nv**2) * float(g)
    return [gu, gv]


def _bw_cos_rows(n, g):
    a, b = n.inputs[0].value, n.inputs[1].value
    na, nb, s = n.aux["cache"]
    ah = a / na[:, None]
    bh = b / nb[:, None]
    ga = (bh - s[:, None] * ah) / na[:, None] * g[:, None]
    gb = (ah - s[:, None] * bh) / nb[:, None] * g[:, None]
    return [ga, gb]


def _bw_cos_pairwise(n, g):
    na, nb, ah, bh, s = n.aux["cache"]
    gs = g * s
    ga = (g @ bh - gs.sum(axis=1, keepdims=True) * ah) / na[:, None]
    gb = (g.T @ ah - gs.sum(axis=0)[:, None] * bh) / nb[:, None]
    return [ga, gb]


def _bw_masked_lse(n, g):
    x = n.inputs[0].value
    mask = n.aux["mask"]
    lse = n.aux["cache"]
    p = np.where(mask, np.exp(x - lse[:, None]), 0.0)
    return [p * g[:, None]]


def _bw_conv2d(n, g):
    x, w, _ = (i.value for i in n.inputs)
    o, c, kh, kw = w.shape
    stride, pad = n.aux["stride"], n.aux["pad"]
    cols, ho, wo = n.aux["cache"]
    nb = x.shape[0]
    gmat = g.reshape(nb, o, ho * wo).transpose(0, 2, 1)  # (N, Ho*Wo, O)
    gw = np.einsum("npo,npk->ok", gmat, cols).reshape(w.shape)
    gb = g.sum(axis=(0, 2, 3))
    dcols = gmat @ w.reshape(o, -1)  # (N, Ho*Wo, C*kh*kw)
    dwin = dcols.reshape(nb, ho, wo, c, kh, kw).transpose(0, 3, 1, 2, 4, 5)
    hpad, wpad = x.shape[2] + 2 * pad, x.shape[3] + 2 * pad
    dxp = np.zeros((nb, c, hpad, wpad), dtype=_F64)
    for i in range(kh):
        for j in range(kw):
            dxp[:, :, i : i + ho * stride : stride, j : j + wo * stride : stride] += dwin[..., i, j]
    dx = dxp[:, :, pad : pad + x.shape[2], pad : pad + x.shape[3]]
    return [dx, gw, gb]


_BACKWARD = {
    "matmul": _bw_matmul,
    "add": _bw_add,
    "mul": _bw_mul,
    "scale": _bw_scale,
    "relu": _bw_relu,
    "tanh": _bw_tanh,
    "log": _bw_log,
    "exp": _bw_exp,
    "concat": _bw_concat,
    "reshape": _bw_reshape,
    "sum": _bw_sum,
    "cosine": _bw_cosine,
    "cos_rows": _bw_cos_rows,
    "cos_pairwise": _bw_cos_pairwise,
    "masked_lse": _bw_masked_lse,
    "conv2d": _bw_conv2d,
}
