"""Sequence model assembly: parameter initialization, forward passes,
hand-derived backward passes, and leakage-safe test-time prediction.

Architectures
-------------
rnn / lstm / gru : causal; the output at position t is a function of inputs
    at positions <= t only, so a single forward pass over the full sequence
    yields valid test predictions as a slice.
bilstm : forward + backward LSTM, hidden states concatenated; position t
    sees the whole sequence. Training uses the full pass; test predictions
    must use predict_iterative.
transformer : one multi-head scaled dot-product self-attention block (no
    positional encoding) feeding a causal GRU layer and a linear head. The
    attention block makes it bidirectional, so the same iterative protocol
    applies.

Arrays are batch-major (B, T, I) at this level and transposed to the
time-major kernel layout internally.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import json

import numpy as np

from ..errors import NonFiniteActivationError
from .backend import get_kernels
from .config import ARCHITECTURES, NetConfig

CAUSAL = ("rnn", "lstm", "gru")
BIDIRECTIONAL = ("bilstm", "transformer")

_LSTM_GATES = ("f", "i", "o", "c")
_GRU_GATES = ("r", "z", "h")


@dataclass
class SequenceModel:
    """Architecture tag, hyper-parameters, and named parameter tensors."""

    config: NetConfig
    params: dict[str, np.ndarray]

    @property
    def arch(self) -> str:
        return self.config.arch

    def param_norm(self) -> float:
        return float(np.sqrt(sum(float((p * p).sum()) for p in self.params.values())))

    def n_params(self) -> int:
        return sum(p.size for p in self.params.values())

    def copy(self) -> "SequenceModel":
        return SequenceModel(self.config, {k: v.copy() for k, v in self.params.items()})


def _recurrent_spec(prefix: str, gates: Sequence[str], idim: int, hdim: int):
    out = []
    for gate in gates:
        out.append((f"{prefix}W_{gate}", (idim, hdim), "glorot"))
        out.append((f"{prefix}U_{gate}", (hdim, hdim), "glorot"))
        init = "one" if gate == "f" else "zero"   # LSTM forget-gate bias +1
        out.append((f"{prefix}b_{gate}", (hdim,), init))
    return out


def param_spec(config: NetConfig) -> list[tuple[str, tuple[int, ...], str]]:
    """Ordered (name, shape, init) triplets; the order fixes the RNG stream."""
    idim, hdim = config.input_dim, config.hidden
    arch = config.arch
    spec: list[tuple[str, tuple[int, ...], str]] = []
    if arch == "rnn":
        spec += [("W_x", (idim, hdim), "glorot"), ("W_h", (hdim, hdim), "glorot"),
                 ("b_h", (hdim,), "zero")]
        head_in = hdim
    elif arch == "lstm":
        spec += _recurrent_spec("", _LSTM_GATES, idim, hdim)
        head_in = hdim
    elif arch == "gru":
        spec += _recurrent_spec("", _GRU_GATES, idim, hdim)
        head_in = hdim
    elif arch == "bilstm":
        spec += _recurrent_spec("fw_", _LSTM_GATES, idim, hdim)
        spec += _recurrent_spec("bw_", _LSTM_GATES, idim, hdim)
        head_in = 2 * hdim
    elif arch == "transformer":
        for h in range(config.heads):
            spec += [(f"Q_{h}", (idim, config.d_k), "glorot"),
                     (f"K_{h}", (idim, config.d_k), "glorot"),
                     (f"V_{h}", (idim, config.d_k), "glorot")]
        spec += _recurrent_spec("", _GRU_GATES, config.attention_dim, hdim)
        head_in = hdim
    else:
        raise ValueError(f"unknown architecture {arch!r}")
    spec += [("W_y", (head_in, 1), "glorot"), ("b_y", (1,), "zero")]
    return spec


def init_model(config: NetConfig, rng: np.random.Generator) -> SequenceModel:
    """Glorot-uniform weights, zero biases, LSTM forget bias +1."""
    params: dict[str, np.ndarray] = {}
    for name, shape, kind in param_spec(config):
        if kind == "glorot":
            fan_in = shape[0] if len(shape) > 1 else shape[0]
            fan_out = shape[-1]
            lim = np.sqrt(6.0 / (fan_in + fan_out))
            params[name] = rng.uniform(-lim, lim, size=shape)
        elif kind == "one":
            params[name] = np.ones(shape)
        else:
            params[name] = np.zeros(shape)
    return SequenceModel(config, params)


# --- attention block -------------------------------------------------------------

def attention_forward(x_tm: np.ndarray, params: dict[str, np.ndarray],
                      config: NetConfig):
    """Multi-head scaled dot-product self-attention over the full sequence.

    x_tm is time-major (T, B, I); returns (T, B, heads*d_k) plus caches.
    Every position attends to every other (no mask, no positional encoding).
    """
    scale = 1.0 / np.sqrt(config.d_k)
    outs = []
    caches = []
    for h in range(config.heads):
        q = x_tm @ params[f"Q_{h}"]          # (T, B, dk)
        k = x_tm @ params[f"K_{h}"]
        v = x_tm @ params[f"V_{h}"]
        scores = np.einsum("tbd,sbd->bts", q, k) * scale
        scores -= scores.max(axis=2, keepdims=True)
        e = np.exp(scores)
        alpha = e / e.sum(axis=2, keepdims=True)      # (B, T, Ts)
        out = np.einsum("bts,sbd->tbd", alpha, v)
        outs.append(out)
        caches.append((q, k, v, alpha))
    return np.concatenate(outs, axis=2), caches


def attention_backward(d_out: np.ndarray, x_tm: np.ndarray, caches,
                       params: dict[str, np.ndarray], config: NetConfig):
    """Gradients of the attention block; returns (dX, grads dict)."""
    t_len, b_len, idim = x_tm.shape
    scale = 1.0 / np.sqrt(config.d_k)
    d_x = np.zeros_like(x_tm)
    grads: dict[str, np.ndarray] = {}
    x_f = x_tm.reshape(-1, idim)
    for h in range(config.heads):
        q, k, v, alpha = caches[h]
        d_o = d_out[:, :, h * config.d_k:(h + 1) * config.d_k]
        d_alpha = np.einsum("tbd,sbd->bts", d_o, v)
        d_v = np.einsum("bts,tbd->sbd", alpha, d_o)
        d_scores = alpha * (d_alpha - (alpha * d_alpha).sum(axis=2, keepdims=True))
        d_q = np.einsum("bts,sbd->tbd", d_scores, k) * scale
        d_k = np.einsum("bts,tbd->sbd", d_scores, q) * scale
        grads[f"Q_{h}"] = x_f.T @ d_q.reshape(-1, config.d_k)
        grads[f"K_{h}"] = x_f.T @ d_k.reshape(-1, config.d_k)
        grads[f"V_{h}"] = x_f.T @ d_v.reshape(-1, config.d_k)
        d_x += d_q @ params[f"Q_{h}"].T
        d_x += d_k @ params[f"K_{h}"].T
        d_x += d_v @ params[f"V_{h}"].T
    return d_x, grads


def attention_weights(model: SequenceModel, x: np.ndarray) -> np.ndarray:
    """(B, heads, T, T) attention distributions, for inspection and tests."""
    x_tm = _to_time_major(x, model.config.input_dim)
    _, caches = attention_forward(x_tm, model.params, model.config)
    return np.stack([c[3] for c in caches], axis=1)


# --- forward / backward cores ------------------------------------------------------

def _to_time_major(x: np.ndarray, idim: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    if x.shape[2] != idim:
        raise ValueError(f"expected {idim} input features, got {x.shape[2]}")
    return np.ascontiguousarray(x.transpose(1, 0, 2))


def _check_finite_steps(h: np.ndarray) -> None:
    ok = np.isfinite(h.reshape(h.shape[0], -1)).all(axis=1)
    if not ok.all():
        raise NonFiniteActivationError(int(np.argmin(ok)))


def _core_forward(model: SequenceModel, x_tm: np.ndarray):
    """Hidden sequence feeding the output head, plus kernel caches."""
    kern = get_kernels()
    p = model.params
    arch = model.arch
    if arch == "rnn":
        cache = kern.rnn_forward(x_tm, p["W_x"], p["W_h"], p["b_h"])
        return cache[0], ("rnn", x_tm, cache)
    if arch == "lstm":
        cache = kern.lstm_forward(
            x_tm, p["W_f"], p["W_i"], p["W_o"], p["W_c"],
            p["U_f"], p["U_i"], p["U_o"], p["U_c"],
            p["b_f"], p["b_i"], p["b_o"], p["b_c"])
        return cache[0], ("lstm", x_tm, cache)
    if arch == "gru":
        cache = kern.gru_forward(
            x_tm, p["W_r"], p["W_z"], p["W_h"],
            p["U_r"], p["U_z"], p["U_h"],
            p["b_r"], p["b_z"], p["b_h"])
        return cache[0], ("gru", x_tm, cache)
    if arch == "bilstm":
        fw = kern.lstm_forward(
            x_tm, p["fw_W_f"], p["fw_W_i"], p["fw_W_o"], p["fw_W_c"],
            p["fw_U_f"], p["fw_U_i"], p["fw_U_o"], p["fw_U_c"],
            p["fw_b_f"], p["fw_b_i"], p["fw_b_o"], p["fw_b_c"])
        x_rev = np.ascontiguousarray(x_tm[::-1])
        bw = kern.lstm_forward(
            x_rev, p["bw_W_f"], p["bw_W_i"], p["bw_W_o"], p["bw_W_c"],
            p["bw_U_f"], p["bw_U_i"], p["bw_U_o"], p["bw_U_c"],
            p["bw_b_f"], p["bw_b_i"], p["bw_b_o"], p["bw_b_c"])
        h = np.concatenate([fw[0], bw[0][::-1]], axis=2)
        return h, ("bilstm", x_tm, (fw, bw, x_rev))
    if arch == "transformer":
        att, att_caches = attention_forward(x_tm, p, model.config)
        cache = kern.gru_forward(
            att, p["W_r"], p["W_z"], p["W_h"],
            p["U_r"], p["U_z"], p["U_h"],
            p["b_r"], p["b_z"], p["b_h"])
        return cache[0], ("transformer", x_tm, (att, att_caches, cache))
    raise ValueError(f"unknown architecture {arch!r}")


def _core_backward(model: SequenceModel, core_cache, d_h: np.ndarray):
    """Gradients of all recurrent/attention parameters given dLoss/dh_t."""
    kern = get_kernels()
    p = model.params
    kind, x_tm, cache = core_cache
    grads: dict[str, np.ndarray] = {}
    if kind == "rnn":
        _, d_wx, d_wh, d_b = kern.rnn_backward(x_tm, cache[0], d_h, p["W_x"], p["W_h"])
        grads.update(W_x=d_wx, W_h=d_wh, b_h=d_b)
        return grads
    if kind == "lstm":
        out = kern.lstm_backward(
            x_tm, *cache, d_h,
            p["W_f"], p["W_i"], p["W_o"], p["W_c"],
            p["U_f"], p["U_i"], p["U_o"], p["U_c"])
        _unpack_lstm(grads, "", out)
        return grads
    if kind == "gru":
        out = kern.gru_backward(
            x_tm, *cache, d_h,
            p["W_r"], p["W_z"], p["W_h"], p["U_r"], p["U_z"], p["U_h"])
        _unpack_gru(grads, out)
        return grads
    if kind == "bilstm":
        fw, bw, x_rev = cache
        hdim = model.config.hidden
        out_f = kern.lstm_backward(
            x_tm, *fw, np.ascontiguousarray(d_h[:, :, :hdim]),
            p["fw_W_f"], p["fw_W_i"], p["fw_W_o"], p["fw_W_c"],
            p["fw_U_f"], p["fw_U_i"], p["fw_U_o"], p["fw_U_c"])
        _unpack_lstm(grads, "fw_", out_f)
        d_h_bw = np.ascontiguousarray(d_h[::-1, :, hdim:])
        out_b = kern.lstm_backward(
            x_rev, *bw, d_h_bw,
            p["bw_W_f"], p["bw_W_i"], p["bw_W_o"], p["bw_W_c"],
            p["bw_U_f"], p["bw_U_i"], p["bw_U_o"], p["bw_U_c"])
        _unpack_lstm(grads, "bw_", out_b)
        return grads
    if kind == "transformer":
        att, att_caches, gru_cache = cache
        out = kern.gru_backward(
            att, *gru_cache, d_h,
            p["W_r"], p["W_z"], p["W_h"], p["U_r"], p["U_z"], p["U_h"])
        d_att = out[0]
        _unpack_gru(grads, out)
        _, att_grads = attention_backward(d_att, x_tm, att_caches, p, model.config)
        grads.update(att_grads)
        return grads
    raise ValueError(kind)


def _unpack_lstm(grads, prefix, out):
    (_, d_wf, d_wi, d_wo, d_wc, d_uf, d_ui, d_uo, d_uc,
     d_bf, d_bi, d_bo, d_bc) = out
    grads[f"{prefix}W_f"], grads[f"{prefix}W_i"] = d_wf, d_wi
    grads[f"{prefix}W_o"], grads[f"{prefix}W_c"] = d_wo, d_wc
    grads[f"{prefix}U_f"], grads[f"{prefix}U_i"] = d_uf, d_ui
    grads[f"{prefix}U_o"], grads[f"{prefix}U_c"] = d_uo, d_uc
    grads[f"{prefix}b_f"], grads[f"{prefix}b_i"] = d_bf, d_bi
    grads[f"{prefix}b_o"], grads[f"{prefix}b_c"] = d_bo, d_bc


def _unpack_gru(grads, out):
    (_, d_wr, d_wz, d_wc, d_ur, d_uz, d_uc, d_br, d_bz, d_bc) = out
    grads["W_r"], grads["W_z"], grads["W_h"] = d_wr, d_wz, d_wc
    grads["U_r"], grads["U_z"], grads["U_h"] = d_ur, d_uz, d_uc
    grads["b_r"], grads["b_z"], grads["b_h"] = d_br, d_bz, d_bc


def forward_train(model: SequenceModel, x: np.ndarray,
                  dropout_mask: np.ndarray | None):
    """Full-sequence pass with optional (inverted) dropout on the hidden
    output before the head; returns (predictions (B, T), cache)."""
    x_tm = _to_time_major(x, model.config.input_dim)
    h, core_cache = _core_forward(model, x_tm)
    _check_finite_steps(h)
    h_used = h if dropout_mask is None else h * dropout_mask
    y = (h_used @ model.params["W_y"] + model.params["b_y"])[:, :, 0]
    return y.T, (core_cache, h, h_used, dropout_mask)


def backward_train(model: SequenceModel, cache, d_y: np.ndarray):
    """Gradients of every parameter given dLoss/dprediction (B, T)."""
    core_cache, h, h_used, mask = cache
    t_len, b_len, head_in = h.shape
    d_y_tm = d_y.T[:, :, None]
    grads: dict[str, np.ndarray] = {}
    grads["W_y"] = h_used.reshape(-1, head_in).T @ d_y_tm.reshape(-1, 1)
    grads["b_y"] = d_y_tm.sum(axis=(0, 1))
    d_h = d_y_tm @ model.params["W_y"].T
    if mask is not None:
        d_h = d_h * mask
    grads.update(_core_backward(model, core_cache, d_h))
    return grads


def forward_causal(model: SequenceModel, x: np.ndarray) -> np.ndarray:
    """Single full-sequence pass for causal architectures; (B, T) output.

    Valid for test-slice prediction because position t never sees inputs
    after t.
    """
    if model.arch not in CAUSAL:
        raise ValueError(f"{model.arch} is not causal; use predict_iterative")
    y, _ = forward_train(model, x, None)
    return y


def forward_bidirectional(model: SequenceModel, x: np.ndarray) -> np.ndarray:
    """Full-sequence pass where position t may depend on future inputs.

    Training-only for bilstm/transformer: slicing test positions out of
    this output would leak future information.
    """
    if model.arch not in BIDIRECTIONAL:
        raise ValueError(f"{model.arch} is causal; use forward_causal")
    y, _ = forward_train(model, x, None)
    return y


def forward_full(model: SequenceModel, x: np.ndarray) -> np.ndarray:
    y, _ = forward_train(model, x, None)
    return y


def predict_iterative(model: SequenceModel, x: np.ndarray,
                      positions: Sequence[int]) -> np.ndarray:
    """One-step-ahead protocol: for each position t, run the model on the
    inputs truncated at t and read the final output.

    Mandatory for the bidirectional architectures; for causal models it
    reproduces the corresponding slice of forward_causal exactly.
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        x = x[:, :, None]
    out = np.empty((x.shape[0], len(positions)))
    for j, t in enumerate(positions):
        if not 0 <= t < x.shape[1]:
            raise ValueError(f"position {t} outside sequence of length {x.shape[1]}")
        y, _ = forward_train(model, x[:, :t + 1], None)
        out[:, j] = y[:, -1]
    return out


# --- checkpoint io ----------------------------------------------------------------

def save_model(model: SequenceModel, path: str) -> None:
    """Binary tensor archive with a JSON manifest; round-trips bitwise."""
    manifest = {
        "format": "panelcast-model-v1",
        "config": {k: getattr(model.config, k) for k in (
            "arch", "hidden", "heads", "d_k", "dropout", "learning_rate",
            "clip_norm", "epochs", "batch_size", "feature_set", "seed")},
        "shapes": {k: list(v.shape) for k, v in model.params.items()},
    }
    arrays = {f"param::{k}": v for k, v in model.params.items()}
    with open(path, "wb") as fh:
        np.savez(fh, __manifest__=np.frombuffer(
            json.dumps(manifest, sort_keys=True).encode(), dtype=np.uint8),
            **arrays)


def load_model(path: str) -> SequenceModel:
    with np.load(path) as data:
        manifest = json.loads(bytes(data["__manifest__"]).decode())
        if manifest.get("format") != "panelcast-model-v1":
            raise ValueError(f"unrecognized checkpoint format in {path}")
        config = NetConfig(**manifest["config"])
        params = {}
        for key in data.files:
            if key.startswith("param::"):
                params[key[len("param::"):]] = data[key]
    model = SequenceModel(config, params)
    expected = {name for name, _, _ in param_spec(config)}
    if set(params) != expected:
        raise ValueError("checkpoint parameter names do not match architecture")
    return model
