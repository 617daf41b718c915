"""Finite-difference verification of every trained composite.

Each case exposes the same computation two ways: a scalar evaluation that
reads the current contents of its arrays (used for central differences), and
a backward pass returning analytic gradients.  The finite-difference side
never touches the backward machinery.
"""

from __future__ import annotations

from dataclasses import dataclass

from . import losses as L
from . import models as M
from .autodiff import Tape
from .rng import child_rng

FD_STEP = 1e-6
REL_TOL = 1e-4


@dataclass
class GradCase:
    name: str
    arrays: dict          # name -> ndarray, perturbed in place by the checker
    run: callable         # run(want_grads: bool) -> float | dict[name, ndarray]


def case_encode_state(obs_kind: str, seed: int) -> GradCase:
    rng = child_rng(seed, f"gradcase/state-{obs_kind}")
    size = 64 if obs_kind == "coords" else 16
    bundle = M.init_bundle("fi", obs_kind, seed, image_size=size)
    if obs_kind == "coords":
        obs = rng.uniform(0.0, 1.0, (3, 2 * bundle.geom_count))
    else:
        obs = rng.uniform(0.0, 1.0, (2, 1, size, size))
    wout = rng.standard_normal((obs.shape[0], bundle.embed_dim))
    arrays = {k: v for k, v in bundle.params.items() if k.startswith("state_enc")}
    arrays["input"] = obs

    def run(want_grads):
        g = Tape()
        p = M.bind_params(g, bundle)
        obs_node = g.leaf(obs, trainable=True)
        h = M.encode_state_g(g, p, bundle, obs_node)
        loss = g.sum(g.mul(h, g.leaf(wout)))
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        return {**{k: p[k].grad for k in arrays if k != "input"}, "input": obs_node.grad}

    return GradCase(f"encode_state[{obs_kind}]", arrays, run)


def _simple_map_case(name, builder, in_shapes, prefixes, seed, variant="fi"):
    rng = child_rng(seed, f"gradcase/{name}")
    bundle = M.init_bundle(variant, "coords", seed)
    inputs = {k: rng.standard_normal(shape) for k, shape in in_shapes.items()}
    arrays = {k: v for k, v in bundle.params.items() if any(k.startswith(p) for p in prefixes)}
    arrays.update(inputs)
    out_rows = next(iter(in_shapes.values()))[0]
    wout = rng.standard_normal((out_rows, bundle.embed_dim))

    def run(want_grads):
        g = Tape()
        p = M.bind_params(g, bundle)
        in_nodes = {k: g.leaf(v, trainable=True) for k, v in inputs.items()}
        out = builder(g, p, bundle, in_nodes)
        loss = g.sum(g.mul(out, g.leaf(wout)))
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        grads = {k: p[k].grad for k in arrays if k not in inputs}
        grads.update({k: in_nodes[k].grad for k in inputs})
        return grads

    return GradCase(name, arrays, run)


def case_encode_action(seed):
    return _simple_map_case(
        "encode_action",
        lambda g, p, b, ins: M.encode_action_g(g, p, b, ins["action"]),
        {"action": (3, 4)}, ["act_enc"], seed)


def case_forward_predict(seed, variant="fi"):
    z_shape = (3, 16) if variant == "fi" else (3, 4)
    return _simple_map_case(
        f"forward_predict[{variant}]",
        lambda g, p, b, ins: M.forward_predict_g(g, p, b, ins["h"], ins["z"]),
        {"h": (3, 16), "z": z_shape}, ["forward"], seed, variant=variant)


def case_inverse_predict(seed):
    return _simple_map_case(
        "inverse_predict",
        lambda g, p, b, ins: M.inverse_predict_g(g, p, b, ins["h_t"], ins["h_t1"]),
        {"h_t": (3, 16), "h_t1": (3, 16)}, ["inverse"], seed)


def _nce_case(name, loss_fn, mode, seed):
    rng = child_rng(seed, f"gradcase/{name}")
    n, d = 4, 16
    arrays = {
        "pred": rng.standard_normal((n, d)),
        "real_t": rng.standard_normal((n, d)),
        "real_t1": rng.standard_normal((n, d)),
    }

    def run(want_grads):
        g = Tape()
        nodes = {k: g.leaf(v, trainable=True) for k, v in arrays.items()}
        loss = loss_fn(g, nodes["pred"], nodes["real_t"], nodes["real_t1"], 0.1, mode)
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        return {k: nodes[k].grad for k in arrays}

    return GradCase(name, arrays, run)


def case_forward_nce(seed, mode="paper"):
    return _nce_case(f"forward_nce_loss[{mode}]", L.forward_nce_loss, mode, seed)


def case_inverse_nce(seed, mode="paper"):
    return _nce_case(f"inverse_nce_loss[{mode}]", L.inverse_nce_loss, mode, seed)


def case_decoder_loss(seed):
    rng = child_rng(seed, "gradcase/decoder")
    bundle = M.init_bundle("fi", "coords", seed)
    actions = rng.uniform(0.0, 64.0, (4, 4))
    arrays = {k: v for k, v in bundle.params.items()
              if k.startswith("act_enc") or k.startswith("act_dec")}
    arrays["action"] = actions

    def run(want_grads):
        g = Tape()
        p = M.bind_params(g, bundle)
        act = g.leaf(actions, trainable=True)
        loss = L.decoder_loss(g, p, bundle, act)
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        return {**{k: p[k].grad for k in arrays if k != "action"}, "action": act.grad}

    return GradCase("decoder_loss", arrays, run)


def case_baseline_loss(seed):
    rng = child_rng(seed, "gradcase/baseline")
    bundle = M.init_bundle("fi", "coords", seed)
    obs_t = rng.uniform(0.0, 1.0, (4, 50))
    obs_t1 = rng.uniform(0.0, 1.0, (4, 50))
    actions = rng.uniform(0.0, 64.0, (4, 4))
    arrays = dict(bundle.params)
    arrays.update({"obs_t": obs_t, "obs_t1": obs_t1, "action": actions})

    def run(want_grads):
        g = Tape()
        p = M.bind_params(g, bundle)
        nodes = {"obs_t": g.leaf(obs_t, trainable=True),
                 "obs_t1": g.leaf(obs_t1, trainable=True),
                 "action": g.leaf(actions, trainable=True)}
        parts = L.baseline_regression_loss(g, p, bundle, nodes["obs_t"],
                                           nodes["obs_t1"], nodes["action"])
        loss = parts["total"]
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        grads = {k: p[k].grad for k in bundle.params}
        grads.update({k: nodes[k].grad for k in nodes})
        return grads

    return GradCase("baseline_regression_loss", arrays, run)


def case_cosine(seed):
    rng = child_rng(seed, "gradcase/cosine")
    arrays = {"u": rng.standard_normal(8), "v": rng.standard_normal(8)}

    def run(want_grads):
        g = Tape()
        u = g.leaf(arrays["u"], trainable=True)
        v = g.leaf(arrays["v"], trainable=True)
        loss = g.cosine(u, v)
        if not want_grads:
            return float(loss.value)
        g.backward(loss)
        return {"u": u.grad, "v": v.grad}

    return GradCase("cosine_sim", arrays, run)


def default_cases(seed: int = 7) -> list[GradCase]:
    return [
        case_encode_state("coords", seed),
        case_encode_state("raster", seed),
        case_encode_action(seed),
        case_forward_predict(seed, "fi"),
        case_forward_predict(seed, "f"),
        case_inverse_predict(seed),
        case_forward_nce(seed, "paper"),
        case_forward_nce(seed, "standard"),
        case_inverse_nce(seed, "paper"),
        case_inverse_nce(seed, "standard"),
        case_decoder_loss(seed),
        case_baseline_loss(seed),
        case_cosine(seed),
    ]


def check_case(case: GradCase, n_points: int = 20, step: float = FD_STEP,
               seed: int = 0) -> float:
    """Max relative error between analytic and central-difference gradients at
    n_points randomly chosen coordinates."""
    rng = child_rng(seed, f"gradcheck/{case.name}")
    analytic = case.run(True)
    names = sorted(case.arrays)
    worst = 0.0
    for _ in range(n_points):
        name = names[int(rng.integers(len(names)))]
        arr = case.arrays[name]
        flat = arr.reshape(-1)
        i = int(rng.integers(flat.shape[0]))
        orig = flat[i]
        flat[i] = orig + step
        up = case.run(False)
        flat[i] = orig - step
        down = case.run(False)
        flat[i] = orig
        fd = (up - down) / (2.0 * step)
        an = float(analytic[name].reshape(-1)[i])
        rel = abs(fd - an) / max(abs(fd), abs(an), 1e-6)
        worst = max(worst, rel)
    return worst


def run_suite(seed: int = 7, n_points: int = 20):
    """Returns [(case name, max rel err, passed)] over all composites."""
    rows = []
    for case in default_cases(seed):
        err = check_case(case, n_points=n_points, seed=seed)
        rows.append((case.name, err, err < REL_TOL))
    return rows
