"""Mini-batch MSE training with Adam and global-norm gradient clipping.

The loop is deterministic given the config seed: one RNG drives parameter
initialization, per-epoch batch shuffling, and dropout masks, in a fixed
draw order. Per-unit losses are reduced in array order, so two runs with
the same seed and backend produce bitwise-identical parameters and loss
traces (wall-clock excluded).
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np

from ..errors import NonFiniteGradientError
from .backend import backend_name
from .config import NetConfig
from .models import SequenceModel, backward_train, forward_train, init_model


@dataclass(frozen=True)
class TrainReport:
    epoch_mse: np.ndarray      # (epochs,)
    final_param_norm: float
    wall_clock: float
    seed: int
    backend: str

    def deterministic_payload(self) -> dict:
        """Everything the determinism contract covers (wall-clock excluded)."""
        return {
            "epoch_mse": self.epoch_mse,
            "final_param_norm": self.final_param_norm,
            "seed": self.seed,
            "backend": self.backend,
        }


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale all gradients in place so the global L2 norm is <= max_norm.

    Returns the pre-clip norm.
    """
    total = 0.0
    for g in grads.values():
        total += float((g * g).sum())
    norm = np.sqrt(total)
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return float(norm)


class AdamState:
    """First/second moment accumulators with bias correction."""

    def __init__(self, params: dict[str, np.ndarray],
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0
        self.beta1, self.beta2, self.eps = beta1, beta2, eps

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
             lr: float) -> None:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for k, p in params.items():
            g = grads[k]
            m = self.m[k]
            v = self.v[k]
            m *= b1
            m += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * (g * g)
            p -= lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def train(config: NetConfig, features: np.ndarray, targets: np.ndarray
          ) -> tuple[SequenceModel, TrainReport]:
    """Train one sequence model on train-window sequences.

    features : (N, T_tr) or (N, T_tr, I) standardized inputs
    targets  : (N, T_tr) standardized outputs
    Only the sequences passed in enter the loss; callers slice the train
    window beforehand. On a non-finite gradient the step is aborted and
    NonFiniteGradientError carries the last good model and partial report.
    """
    t0 = time.perf_counter()
    features = np.asarray(features, dtype=np.float64)
    if features.ndim == 2:
        features = features[:, :, None]
    targets = np.asarray(targets, dtype=np.float64)
    n, t_len, idim = features.shape
    if targets.shape != (n, t_len):
        raise ValueError(f"targets shape {targets.shape} != ({n}, {t_len})")
    if idim != config.input_dim:
        raise ValueError(f"config expects {config.input_dim} features, got {idim}")

    rng = np.random.default_rng(config.seed)
    model = init_model(config, rng)
    adam = AdamState(model.params)
    head_in = model.params["W_y"].shape[0]
    keep = 1.0 - config.dropout

    epoch_mse = np.zeros(config.epochs)
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        sse = 0.0
        count = 0
        for start in range(0, n, config.batch_size):
            idx = order[start:start + config.batch_size]
            xb = features[idx]
            yb = targets[idx]
            mask = None
            if config.dropout > 0.0:
                mask = (rng.random((t_len, len(idx), head_in)) < keep) / keep
            yhat, cache = forward_train(model, xb, mask)
            err = yhat - yb
            loss = float((err * err).mean())
            grads = backward_train(model, cache, 2.0 * err / err.size)
            if not all(np.isfinite(g).all() for g in grads.values()):
                partial = TrainReport(epoch_mse[:epoch].copy(), model.param_norm(),
                                      time.perf_counter() - t0, config.seed,
                                      backend_name())
                raise NonFiniteGradientError(epoch, model=model.copy(), report=partial)
            clip_global_norm(grads, config.clip_norm)
            adam.step(model.params, grads, config.learning_rate)
            sse += loss * err.size
            count += err.size
        epoch_mse[epoch] = sse / count

    report = TrainReport(
        epoch_mse=epoch_mse,
        final_param_norm=model.param_norm(),
        wall_clock=time.perf_counter() - t0,
        seed=config.seed,
        backend=backend_name(),
    )
    return model, report
