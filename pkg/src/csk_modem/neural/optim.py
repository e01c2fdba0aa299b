"""Adam optimizer and reduce-on-plateau learning-rate schedule."""

import numpy as np

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8


class AdamState:
    """First/second moment estimates, keyed per parameter tensor."""

    def __init__(self, params):
        self.m = {k: np.zeros_like(v) for k, v in params.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.items()}
        self.t = 0


def adam_step(params, grads, state: AdamState, lr: float,
              beta1=ADAM_BETA1, beta2=ADAM_BETA2, eps=ADAM_EPS):
    """One bias-corrected Adam update, applied in place; returns (params, state)."""
    state.t += 1
    bc1 = 1.0 - beta1**state.t
    bc2 = 1.0 - beta2**state.t
    for k, g in grads.items():
        m = state.m[k]
        v = state.v[k]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        params[k] -= lr * (m / bc1) / (np.sqrt(v / bc2) + eps)
    return params, state


class PlateauScheduler:
    """Multiply lr by `factor` after `patience` epochs without improvement.

    An epoch improves when its metric beats the best seen so far by more
    than `min_delta`.  The bad-epoch counter resets on improvement and on
    each reduction, so a flat metric halves the rate exactly every
    `patience` epochs.
    """

    def __init__(self, lr0=1e-3, factor=0.5, patience=5, min_delta=1e-6):
        if not 0 < factor < 1:
            raise ValueError("factor must lie in (0, 1)")
        if patience < 1:
            raise ValueError("patience must be >= 1")
        self.lr = lr0
        self.factor = factor
        self.patience = patience
        self.min_delta = min_delta
        self.best = np.inf
        self.bad_epochs = 0

    def step(self, metric: float) -> float:
        """Record one epoch's validation metric; returns the lr to use next."""
        if metric < self.best - self.min_delta:
            self.best = metric
            self.bad_epochs = 0
        else:
            self.bad_epochs += 1
            if self.bad_epochs >= self.patience:
                self.lr *= self.factor
                self.bad_epochs = 0
        return self.lr
