"""Contrastive and regression training objectives.

Both contrastive losses score a predicted embedding against its real
counterpart with temperature-scaled cosine similarity, normalizing over the
2(N-1) real embeddings of the *other* batch entries.  Denominator modes:

  paper     the positive pair is excluded from the denominator (both sums
            run over j != i); the loss can go negative
  standard  the positive term is added to the denominator (InfoNCE
            convention), keeping the loss nonnegative

The decoder loss is an MSE round-trip on actions scaled to [0,1]; the
regression baseline replaces the contrastive terms with latent-space MSE
plus a decoded-action regression that anchors the embeddings.
"""

from __future__ import annotations

import numpy as np

from .autodiff import Tape, Node
from . import models as M


def _nce(g: Tape, anchors: Node, positives: Node, bank_a: Node, bank_b: Node,
         tau: float, mode: str) -> Node:
    n = anchors.shape[0]
    if n < 2:
        raise ValueError(f"contrastive loss needs a batch of >= 2, got {n}")
    if tau <= 0:
        raise ValueError("temperature must be positive")
    if mode not in ("paper", "standard"):
        raise ValueError(f"unknown denominator mode {mode!r}")
    pos = g.cos_rows(anchors, positives)        # (N,)
    s_a = g.cos_pairwise(anchors, bank_a)       # (N,N)
    s_b = g.cos_pairwise(anchors, bank_b)       # (N,N)
    off = ~np.eye(n, dtype=bool)
    if mode == "standard":
        logits = g.concat([s_a, s_b, g.reshape(pos, (n, 1))], axis=1)
        mask = np.concatenate([off, off, np.ones((n, 1), dtype=bool)], axis=1)
    else:
        logits = g.concat([s_a, s_b], axis=1)
        mask = np.concatenate([off, off], axis=1)
    lse = g.masked_lse(g.scale(logits, 1.0 / tau), mask)
    per_anchor = g.sub(lse, g.scale(pos, 1.0 / tau))
    return g.mean(per_anchor)


def forward_nce_loss(g: Tape, predictions: Node, states_t: Node, states_t1: Node,
                     tau: float, mode: str = "paper") -> Node:
    """Anchors: predicted next-state embeddings; positives: the real next-state
    embeddings; negatives: the other entries' real embeddings at t and t+1."""
    return _nce(g, predictions, states_t1, states_t, states_t1, tau, mode)


def inverse_nce_loss(g: Tape, predictions: Node, actions_t: Node, actions_next: Node,
                     tau: float, mode: str = "paper") -> Node:
    """Anchors: predicted action embeddings; positives: the real action
    embeddings; negatives: the other entries' action embeddings at t and t+1."""
    return _nce(g, predictions, actions_t, actions_t, actions_next, tau, mode)


def _mse_rows(g: Tape, a: Node, b: Node, scale: float = 1.0) -> Node:
    """Mean over rows of the squared 2-norm of (a - b) * scale."""
    d = g.sub(a, b)
    if scale != 1.0:
        d = g.scale(d, scale)
    return g.scale(g.sum(g.square(d)), 1.0 / a.shape[0])


def decoder_loss(g: Tape, p: dict, bundle: M.ModelBundle, actions: Node) -> Node:
    """Round-trip MSE |p(q(a)) - a|^2 with actions scaled to [0,1]."""
    z = M.encode_action_g(g, p, bundle, actions)
    decoded = M.decode_action_g(g, p, bundle, z)
    return _mse_rows(g, decoded, actions, scale=1.0 / bundle.image_size)


def total_loss(g: Tape, p: dict, bundle: M.ModelBundle,
               obs_t: Node, obs_t1: Node, actions: Node, actions_next: Node,
               tau: float = 0.1, mode: str = "paper", decoder_weight: float = 1.0,
               objective: str = "contrastive") -> dict[str, Node]:
    """Joint objective for one batch; returns nodes keyed forward / inverse /
    decoder / total (missing terms omitted per variant)."""
    if objective == "regression":
        return baseline_regression_loss(g, p, bundle, obs_t, obs_t1, actions,
                                        decoder_weight=decoder_weight)
    parts: dict[str, Node] = {}
    h_t = M.encode_state_g(g, p, bundle, obs_t)
    if bundle.variant == "f":
        h_t1 = M.encode_state_g(g, p, bundle, obs_t1)
        pred = M.forward_predict_g(g, p, bundle, h_t, actions)
        parts["forward"] = forward_nce_loss(g, pred, h_t, h_t1, tau, mode)
        parts["total"] = parts["forward"]
        return parts
    z_t = M.encode_action_g(g, p, bundle, actions)
    z_next = M.encode_action_g(g, p, bundle, actions_next)
    h_t1 = M.encode_state_g(g, p, bundle, obs_t1)
    if bundle.variant == "fi":
        pred_h = M.forward_predict_g(g, p, bundle, h_t, z_t)
        parts["forward"] = forward_nce_loss(g, pred_h, h_t, h_t1, tau, mode)
    pred_z = M.inverse_predict_g(g, p, bundle, h_t, h_t1)
    parts["inverse"] = inverse_nce_loss(g, pred_z, z_t, z_next, tau, mode)
    parts["decoder"] = decoder_loss(g, p, bundle, actions)
    total = g.add(parts["inverse"], g.scale(parts["decoder"], decoder_weight))
    if "forward" in parts:
        total = g.add(parts["forward"], total)
    parts["total"] = total
    return parts


def baseline_regression_loss(g: Tape, p: dict, bundle: M.ModelBundle,
                             obs_t: Node, obs_t1: Node, actions: Node,
                             decoder_weight: float = 1.0) -> dict[str, Node]:
    """Deterministic-regression analog on the full architecture: latent MSE for
    the forward model, decoded-action MSE for the inverse model (grounding the
    embeddings in action space), plus the decoder round-trip term."""
    if bundle.variant != "fi":
        raise ValueError("regression baseline expects the full (fi) architecture")
    h_t = M.encode_state_g(g, p, bundle, obs_t)
    h_t1 = M.encode_state_g(g, p, bundle, obs_t1)
    z_t = M.encode_action_g(g, p, bundle, actions)
    pred_h = M.forward_predict_g(g, p, bundle, h_t, z_t)
    pred_z = M.inverse_predict_g(g, p, bundle, h_t, h_t1)
    parts = {
        "forward": _mse_rows(g, pred_h, h_t1),
        "inverse": _mse_rows(g, M.decode_action_g(g, p, bundle, pred_z), actions,
                             scale=1.0 / bundle.image_size),
        "decoder": decoder_loss(g, p, bundle, actions),
    }
    parts["total"] = g.add(g.add(parts["forward"], parts["inverse"]),
                           g.scale(parts["decoder"], decoder_weight))
    return parts
