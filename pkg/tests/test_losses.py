import math

import numpy as np
import pytest

from ropedyn import losses as L
from ropedyn import models as M
from ropedyn.autodiff import Tape
from ropedyn.rng import child_rng


from oracles import nce_oracle


def fwd_loss(pred, h_t, h_t1, tau=0.1, mode="paper"):
    g = Tape()
    return float(L.forward_nce_loss(g, g.leaf(pred), g.leaf(h_t), g.leaf(h_t1), tau, mode).value)


def inv_loss(pred, z_t, z_next, tau=0.1, mode="paper"):
    g = Tape()
    return float(L.inverse_nce_loss(g, g.leaf(pred), g.leaf(z_t), g.leaf(z_next), tau, mode).value)


# -- identities -----------------------------------------------------------------

@pytest.mark.parametrize("n", [2, 8, 128])
@pytest.mark.parametrize("tau", [0.1, 0.7])
def test_all_equal_similarity_gives_log_2n_minus_2(n, tau):
    rng = child_rng(0, "ident", n)
    base = rng.standard_normal(16)
    def stack():
        return base[None, :] * rng.uniform(0.2, 5.0, (n, 1))  # positive scalings
    val = fwd_loss(stack(), stack(), stack(), tau=tau)
    assert val == pytest.approx(math.log(2 * (n - 1)), abs=1e-9)
    val = inv_loss(stack(), stack(), stack(), tau=tau)
    assert val == pytest.approx(math.log(2 * (n - 1)), abs=1e-9)


def test_n2_identity_is_log_two():
    rng = child_rng(1, "log2")
    e = np.tile(rng.standard_normal(8), (2, 1))
    assert fwd_loss(e, e, e) == pytest.approx(math.log(2.0), abs=1e-12)


def test_closed_form_minus_twenty_plus_log_two():
    # positive similarity 1 and every negative similarity -1 at tau=0.1, N=2
    z = np.array([[1.0, 0.0], [-1.0, 0.0]])
    val = inv_loss(z, z, z)
    assert val == pytest.approx(-20.0 + math.log(2.0), abs=1e-9)
    assert val < 0.0  # excluding the positive from the denominator allows negative loss


def test_two_entry_hand_instance_matches_scalar_oracle():
    pred = np.array([[1.0, 0.0], [0.0, 1.0]])
    h_t = np.array([[0.0, 1.0], [0.0, 1.0]])
    h_t1 = np.array([[1.0, 0.0], [-1.0, 0.0]])
    got = fwd_loss(pred, h_t, h_t1)
    want = nce_oracle(pred.tolist(), h_t1.tolist(), h_t.tolist(), h_t1.tolist(), 0.1)
    assert got == pytest.approx(want, abs=1e-10)


@pytest.mark.parametrize("mode", ["paper", "standard"])
def test_random_batches_match_scalar_oracle(mode):
    rng = child_rng(2, f"oracle-{mode}")
    for _ in range(20):
        n = int(rng.integers(2, 7))
        pred, a, b = (rng.standard_normal((n, 5)) for _ in range(3))
        got = fwd_loss(pred, a, b, mode=mode)
        want = nce_oracle(pred.tolist(), b.tolist(), a.tolist(), b.tolist(), 0.1, mode)
        assert got == pytest.approx(want, abs=1e-10)
        got = inv_loss(pred, a, b, mode=mode)
        want = nce_oracle(pred.tolist(), a.tolist(), a.tolist(), b.tolist(), 0.1, mode)
        assert got == pytest.approx(want, abs=1e-10)


def test_positive_scaling_leaves_losses_unchanged():
    rng = child_rng(3, "scale")
    pred, a, b = (rng.standard_normal((6, 16)) for _ in range(3))
    base_f = fwd_loss(pred, a, b)
    base_i = inv_loss(pred, a, b)
    assert fwd_loss(3.7 * pred, 3.7 * a, 3.7 * b) == pytest.approx(base_f, abs=1e-12)
    scales = [rng.uniform(0.1, 9.0, (6, 1)) for _ in range(3)]
    assert fwd_loss(pred * scales[0], a * scales[1], b * scales[2]) == pytest.approx(base_f, abs=1e-12)
    assert inv_loss(pred * scales[0], a * scales[1], b * scales[2]) == pytest.approx(base_i, abs=1e-12)


def test_batch_order_permutation_invariance():
    rng = child_rng(4, "perm")
    pred, a, b = (rng.standard_normal((8, 16)) for _ in range(3))
    perm = rng.permutation(8)
    assert fwd_loss(pred[perm], a[perm], b[perm]) == pytest.approx(fwd_loss(pred, a, b), abs=1e-12)


def test_standard_mode_differs_and_is_nonnegative_shifted():
    rng = child_rng(5, "modes")
    pred, a, b = (rng.standard_normal((4, 8)) for _ in range(3))
    lit = fwd_loss(pred, a, b, mode="paper")
    std = fwd_loss(pred, a, b, mode="standard")
    assert std > lit  # adding the positive to the denominator raises the loss


def test_batch_too_small_errors():
    one = np.ones((1, 4))
    with pytest.raises(ValueError, match=">= 2"):
        fwd_loss(one, one, one)


def test_zero_norm_embedding_errors():
    e = np.zeros((2, 4))
    e[0, 0] = 1.0
    with pytest.raises(ValueError, match="zero-norm"):
        fwd_loss(e, e, e)


# -- decoder loss ----------------------------------------------------------------

def constant_decoder_bundle(c):
    b = M.init_bundle("fi", "coords", seed=0)
    for name in b.params:
        if name.startswith("act_dec"):
            b.params[name] = np.zeros_like(b.params[name])
    b.params["act_dec.b3"] = np.asarray(c, dtype=float)
    return b


def run_decoder_loss(bundle, actions):
    g = Tape()
    p = M.bind_params(g, bundle)
    return float(L.decoder_loss(g, p, bundle, g.leaf(actions)).value)


def test_decoder_perfect_round_trip_is_zero():
    a0 = np.array([12.0, 30.0, 40.0, 5.0])
    bundle = constant_decoder_bundle(a0)
    actions = np.tile(a0, (5, 1))
    assert run_decoder_loss(bundle, actions) == pytest.approx(0.0, abs=1e-30)


def test_decoder_constant_output_matches_direct_formula():
    c = np.array([10.0, 20.0, 30.0, 40.0])
    bundle = constant_decoder_bundle(c)
    rng = child_rng(6, "dec")
    actions = rng.uniform(0, 64, (7, 4))
    want = float(np.mean(np.sum(((c - actions) / 64.0) ** 2, axis=1)))
    assert run_decoder_loss(bundle, actions) == pytest.approx(want, abs=1e-12)


def test_decoder_random_instance_matches_scalar_recompute():
    bundle = M.init_bundle("fi", "coords", seed=8)
    rng = child_rng(7, "dec2")
    actions = rng.uniform(0, 64, (6, 4))
    # straight-line numpy recomputation
    x = actions / 64.0
    for k in range(4):
        x = x @ bundle.params[f"act_enc.w{k}"] + bundle.params[f"act_enc.b{k}"]
        if k < 3:
            x = np.maximum(x, 0.0)
    for k in range(4):
        x = x @ bundle.params[f"act_dec.w{k}"] + bundle.params[f"act_dec.b{k}"]
        if k < 3:
            x = np.maximum(x, 0.0)
    want = float(np.mean(np.sum(((x - actions) / 64.0) ** 2, axis=1)))
    assert run_decoder_loss(bundle, actions) == pytest.approx(want, abs=1e-12)


# -- total loss -------------------------------------------------------------------

def run_total(bundle, n, seed, **kw):
    rng = child_rng(seed, "total")
    g = Tape()
    p = M.bind_params(g, bundle)
    obs_t = g.leaf(rng.uniform(0, 1, (n, 50)))
    obs_t1 = g.leaf(rng.uniform(0, 1, (n, 50)))
    act = g.leaf(rng.uniform(0, 64, (n, 4)))
    act_next = g.leaf(rng.uniform(0, 64, (n, 4)))
    parts = L.total_loss(g, p, bundle, obs_t, obs_t1, act, act_next, **kw)
    return {k: float(v.value) for k, v in parts.items()}


def test_total_with_zero_decoder_weight_is_sum_of_nce_terms():
    bundle = M.init_bundle("fi", "coords", seed=9)
    parts = run_total(bundle, 5, 10, decoder_weight=0.0)
    assert parts["total"] == parts["forward"] + parts["inverse"]


def test_total_components_sum_exactly():
    bundle = M.init_bundle("fi", "coords", seed=11)
    w = 16.0
    parts = run_total(bundle, 5, 12, decoder_weight=w)
    want = parts["forward"] + parts["inverse"] + w * parts["decoder"]
    assert parts["total"] == pytest.approx(want, abs=1e-12)


def test_variant_f_total_is_forward_only():
    bundle = M.init_bundle("f", "coords", seed=13)
    assert not any(k.startswith(("inverse", "act_")) for k in bundle.params)
    parts = run_total(bundle, 4, 14)
    assert set(parts) == {"forward", "total"}
    assert parts["total"] == parts["forward"]


def test_variant_i_total_has_no_forward_term():
    bundle = M.init_bundle("i", "coords", seed=15)
    parts = run_total(bundle, 4, 16, decoder_weight=2.0)
    assert "forward" not in parts
    assert parts["total"] == pytest.approx(parts["inverse"] + 2.0 * parts["decoder"], abs=1e-12)


# -- baseline regression loss ------------------------------------------------------

def test_baseline_forward_term_is_squared_offset():
    delta = 0.37
    bundle = M.init_bundle("fi", "coords", seed=17)
    bias = np.linspace(0.5, 2.0, 16)
    for prefix in ("state_enc", "forward", "inverse", "act_enc", "act_dec"):
        for name in list(bundle.params):
            if name.startswith(prefix):
                bundle.params[name] = np.zeros_like(bundle.params[name])
    bundle.params["state_enc.b3"] = bias                    # h_t = h_t1 = bias
    fwd_bias = bias.copy()
    fwd_bias[0] += delta                                    # pred_h = bias + delta*e1
    bundle.params["forward.b3"] = fwd_bias
    a0 = np.array([4.0, 8.0, 15.0, 16.0])
    bundle.params["act_dec.b3"] = a0                        # decoder always emits a0

    g = Tape()
    p = M.bind_params(g, bundle)
    n = 3
    obs = child_rng(18, "obs").uniform(0, 1, (n, 50))
    parts = L.baseline_regression_loss(g, p, bundle, g.leaf(obs), g.leaf(obs),
                                       g.leaf(np.tile(a0, (n, 1))))
    assert float(parts["forward"].value) == pytest.approx(delta**2, abs=1e-12)
    assert float(parts["inverse"].value) == pytest.approx(0.0, abs=1e-30)
    assert float(parts["decoder"].value) == pytest.approx(0.0, abs=1e-30)
    assert float(parts["total"].value) == pytest.approx(delta**2, abs=1e-12)


def test_baseline_random_instance_matches_scalar_recompute():
    bundle = M.init_bundle("fi", "coords", seed=19)
    rng = child_rng(20, "base")
    n = 4
    obs_t = rng.uniform(0, 1, (n, 50))
    obs_t1 = rng.uniform(0, 1, (n, 50))
    act = rng.uniform(0, 64, (n, 4))

    def mlp(prefix, x):
        k = 0
        while f"{prefix}.w{k}" in bundle.params:
            x = x @ bundle.params[f"{prefix}.w{k}"] + bundle.params[f"{prefix}.b{k}"]
            k += 1
            if f"{prefix}.w{k}" in bundle.params:
                x = np.maximum(x, 0.0)
        return x

    h_t = mlp("state_enc", obs_t)
    h_t1 = mlp("state_enc", obs_t1)
    z = mlp("act_enc", act / 64.0)
    pred_h = mlp("forward", np.concatenate([h_t, z], axis=1))
    pred_z = mlp("inverse", np.concatenate([h_t, h_t1], axis=1))
    want_fwd = float(np.mean(np.sum((pred_h - h_t1) ** 2, axis=1)))
    want_inv = float(np.mean(np.sum(((mlp("act_dec", pred_z) - act) / 64.0) ** 2, axis=1)))
    want_dec = float(np.mean(np.sum(((mlp("act_dec", z) - act) / 64.0) ** 2, axis=1)))

    g = Tape()
    p = M.bind_params(g, bundle)
    parts = L.baseline_regression_loss(g, p, bundle, g.leaf(obs_t), g.leaf(obs_t1),
                                       g.leaf(act), decoder_weight=16.0)
    assert float(parts["forward"].value) == pytest.approx(want_fwd, abs=1e-12)
    assert float(parts["inverse"].value) == pytest.approx(want_inv, abs=1e-12)
    assert float(parts["decoder"].value) == pytest.approx(want_dec, abs=1e-12)
    assert float(parts["total"].value) == pytest.approx(
        want_fwd + want_inv + 16.0 * want_dec, rel=1e-12)


def test_baseline_requires_full_architecture():
    bundle = M.init_bundle("f", "coords", seed=21)
    g = Tape()
    p = M.bind_params(g, bundle)
    with pytest.raises(ValueError, match="fi"):
        L.baseline_regression_loss(g, p, bundle, g.leaf(np.ones((2, 50))),
                                   g.leaf(np.ones((2, 50))), g.leaf(np.ones((2, 4))))
