"""Bidirectional LSTM sequence classifier with analytic backpropagation.

Everything runs on plain float64 numpy arrays.  The network is a stack of
bidirectional LSTM layers (gate order i, f, g, o) followed by a two-layer
ReLU head over the concatenated final hidden states of the top layer.
Dropout (inverted convention) sits between LSTM layers and after the ReLU.

Parameters live in a flat dict keyed as documented by `param_names`, which
also fixes the serialization order.
"""

from dataclasses import dataclass

import numpy as np

from ..errors import ShapeMismatch


@dataclass
class BiLstmModel:
    """Parameter container plus the hyperparameters that fix all shapes.

    norm_mean/norm_std, when set, standardize inputs feature-wise; they are
    fitted on the training split and travel with the model.
    """

    input_dim: int
    classes: int
    hidden: int = 64
    layers: int = 2
    dropout_p: float = 0.2
    params: dict = None
    norm_mean: np.ndarray | None = None
    norm_std: np.ndarray | None = None

    @property
    def layer_input_dims(self):
        return [self.input_dim] + [2 * self.hidden] * (self.layers - 1)


def param_names(layers: int) -> list:
    """Canonical parameter order: per layer f/b gates, then the head."""
    names = []
    for k in range(layers):
        for d in ("f", "b"):
            names += [f"l{k}_{d}_Wx", f"l{k}_{d}_Wh", f"l{k}_{d}_b"]
    return names + ["W1", "b1", "W2", "b2"]


def init_model(
    input_dim: int,
    classes: int,
    hidden: int = 64,
    layers: int = 2,
    dropout_p: float = 0.2,
    seed: int = 0,
) -> BiLstmModel:
    """Uniform(-1/sqrt(H), 1/sqrt(H)) init, forget-gate bias +1."""
    rng = np.random.default_rng(seed)
    H = hidden
    lim = 1.0 / np.sqrt(H)
    params = {}
    d_in = input_dim
    for k in range(layers):
        for d in ("f", "b"):
            params[f"l{k}_{d}_Wx"] = rng.uniform(-lim, lim, (4 * H, d_in))
            params[f"l{k}_{d}_Wh"] = rng.uniform(-lim, lim, (4 * H, H))
            b = rng.uniform(-lim, lim, 4 * H)
            b[H : 2 * H] += 1.0
            params[f"l{k}_{d}_b"] = b
        d_in = 2 * H
    params["W1"] = rng.uniform(-lim, lim, (H, 2 * H))
    params["b1"] = rng.uniform(-lim, lim, H)
    params["W2"] = rng.uniform(-lim, lim, (classes, H))
    params["b2"] = rng.uniform(-lim, lim, classes)
    return BiLstmModel(input_dim, classes, hidden, layers, dropout_p, params)


def _sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


def _run_direction(Wx, Wh, b, xs):
    """LSTM recurrence over xs (T x B x D_in, already in processing order)."""
    T, B, _ = xs.shape
    H = Wh.shape[1]
    gates = {k: np.empty((T, B, H)) for k in ("i", "f", "g", "o", "c", "tc", "h")}
    h = np.zeros((B, H))
    c = np.zeros((B, H))
    for t in range(T):
        z = xs[t] @ Wx.T + h @ Wh.T + b
        i = _sigmoid(z[:, :H])
        f = _sigmoid(z[:, H : 2 * H])
        g = np.tanh(z[:, 2 * H : 3 * H])
        o = _sigmoid(z[:, 3 * H :])
        c = f * c + i * g
        tc = np.tanh(c)
        h = o * tc
        for k, v in (("i", i), ("f", f), ("g", g), ("o", o), ("c", c), ("tc", tc), ("h", h)):
            gates[k][t] = v
    gates["xs"] = xs
    return gates


def _run_direction_backward(Wx, Wh, cache, dh_ext):
    """BPTT for one direction; dh_ext holds per-step external gradients."""
    xs = cache["xs"]
    T, B, _ = xs.shape
    H = Wh.shape[1]
    dWx = np.zeros_like(Wx)
    dWh = np.zeros_like(Wh)
    db = np.zeros(4 * H)
    dxs = np.empty_like(xs)
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i, f, g, o = cache["i"][t], cache["f"][t], cache["g"][t], cache["o"][t]
        tc = cache["tc"][t]
        c_prev = cache["c"][t - 1] if t > 0 else np.zeros((B, H))
        h_prev = cache["h"][t - 1] if t > 0 else np.zeros((B, H))
        dh = dh_ext[t] + dh_next
        dc = dc_next + dh * o * (1.0 - tc * tc)
        dzo = dh * tc * o * (1.0 - o)
        dzf = dc * c_prev * f * (1.0 - f)
        dzi = dc * g * i * (1.0 - i)
        dzg = dc * i * (1.0 - g * g)
        dz = np.concatenate([dzi, dzf, dzg, dzo], axis=1)
        dWx += dz.T @ xs[t]
        dWh += dz.T @ h_prev
        db += dz.sum(axis=0)
        dxs[t] = dz @ Wx
        dh_next = dz @ Wh
        dc_next = dc * f
    return dWx, dWh, db, dxs


def _dropout_mask(shape, p, rng):
    if p <= 0:
        return np.ones(shape)
    return (rng.random(shape) >= p) / (1.0 - p)


def bilstm_forward(model, x, training=False, rng=None, dropout_masks=None):
    """Forward pass; returns (logits B x C, cache for backward).

    In training mode dropout masks are drawn from `rng` unless a cached set
    is supplied (finite-difference checks reuse masks this way).
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 3 or x.shape[2] != model.input_dim:
        raise ShapeMismatch(
            f"expected batch of shape (B, T, {model.input_dim}), got {x.shape}"
        )
    if model.norm_mean is not None:
        x = (x - model.norm_mean) / model.norm_std
    p = model.dropout_p if training else 0.0
    if training and p > 0 and dropout_masks is None:
        if rng is None:
            raise ValueError("training-mode forward with dropout needs an rng")
        dropout_masks = {}
        draw = True
    else:
        draw = False

    params = model.params
    seq = np.ascontiguousarray(np.swapaxes(x, 0, 1))  # T x B x D
    cache = {"x": x, "layers": [], "masks_between": [], "training": training}
    for k in range(model.layers):
        fwd = _run_direction(
            params[f"l{k}_f_Wx"], params[f"l{k}_f_Wh"], params[f"l{k}_f_b"], seq
        )
        bwd = _run_direction(
            params[f"l{k}_b_Wx"], params[f"l{k}_b_Wh"], params[f"l{k}_b_b"], seq[::-1]
        )
        cache["layers"].append({"f": fwd, "b": bwd})
        out = np.concatenate([fwd["h"], bwd["h"][::-1]], axis=2)  # T x B x 2H
        if k < model.layers - 1:
            if draw:
                mask = _dropout_mask(out.shape, p, rng)
                dropout_masks[f"between_{k}"] = mask
            elif dropout_masks is not None:
                mask = dropout_masks[f"between_{k}"]
            else:
                mask = None
            if mask is not None:
                out = out * mask
            cache["masks_between"].append(mask)
            seq = out

    top = cache["layers"][-1]
    h_final = np.concatenate([top["f"]["h"][-1], top["b"]["h"][-1]], axis=1)  # B x 2H
    a1 = h_final @ params["W1"].T + params["b1"]
    r = np.maximum(a1, 0.0)
    if draw:
        mask_head = _dropout_mask(r.shape, p, rng)
        dropout_masks["head"] = mask_head
    elif dropout_masks is not None:
        mask_head = dropout_masks.get("head")
    else:
        mask_head = None
    rd = r * mask_head if mask_head is not None else r
    logits = rd @ params["W2"].T + params["b2"]
    cache.update(
        h_final=h_final, a1=a1, rd=rd, mask_head=mask_head, dropout_masks=dropout_masks
    )
    return logits, cache


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def cross_entropy(logits, labels) -> float:
    """Mean negative log softmax probability of the true classes."""
    labels = np.asarray(labels, dtype=int)
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    return float(np.mean(lse - z[np.arange(len(labels)), labels]))


def backward(model, cache, labels, logits):
    """Exact cross-entropy gradients for every parameter tensor."""
    params = model.params
    labels = np.asarray(labels, dtype=int)
    B = logits.shape[0]
    H = model.hidden
    T = cache["x"].shape[1]

    dz = softmax(logits)
    dz[np.arange(B), labels] -= 1.0
    dz /= B

    grads = {}
    grads["W2"] = dz.T @ cache["rd"]
    grads["b2"] = dz.sum(axis=0)
    drd = dz @ params["W2"]
    if cache["mask_head"] is not None:
        drd = drd * cache["mask_head"]
    da1 = drd * (cache["a1"] > 0)
    grads["W1"] = da1.T @ cache["h_final"]
    grads["b1"] = da1.sum(axis=0)
    dh_final = da1 @ params["W1"]

    # Top layer: gradient enters only at each direction's last processed step.
    dh_f = np.zeros((T, B, H))
    dh_b = np.zeros((T, B, H))
    dh_f[-1] = dh_final[:, :H]
    dh_b[-1] = dh_final[:, H:]

    for k in range(model.layers - 1, -1, -1):
        layer = cache["layers"][k]
        dWx_f, dWh_f, db_f, dxs_f = _run_direction_backward(
            params[f"l{k}_f_Wx"], params[f"l{k}_f_Wh"], layer["f"], dh_f
        )
        dWx_b, dWh_b, db_b, dxs_b = _run_direction_backward(
            params[f"l{k}_b_Wx"], params[f"l{k}_b_Wh"], layer["b"], dh_b
        )
        grads[f"l{k}_f_Wx"] = dWx_f
        grads[f"l{k}_f_Wh"] = dWh_f
        grads[f"l{k}_f_b"] = db_f
        grads[f"l{k}_b_Wx"] = dWx_b
        grads[f"l{k}_b_Wh"] = dWh_b
        grads[f"l{k}_b_b"] = db_b
        if k == 0:
            break
        dinput = dxs_f + dxs_b[::-1]  # T x B x 2H, time order
        mask = cache["masks_between"][k - 1]
        if mask is not None:
            dinput = dinput * mask
        dh_f = np.ascontiguousarray(dinput[:, :, :H])
        dh_b = np.ascontiguousarray(dinput[::-1, :, H:])
    return grads


def predict(model, x):
    """(argmax symbol indices, per-class probabilities) in inference mode."""
    logits, _ = bilstm_forward(model, x, training=False)
    probs = softmax(logits)
    return np.argmax(probs, axis=1), probs
