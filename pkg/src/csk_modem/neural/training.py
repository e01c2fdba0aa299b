"""Mini-batch training loop, model persistence, and the dataset container."""

import copy
import json
from dataclasses import dataclass, field

import numpy as np

from ..errors import ShapeMismatch
from .lstm import BiLstmModel, backward, bilstm_forward, cross_entropy, init_model, param_names
from .optim import AdamState, PlateauScheduler, adam_step

MODEL_FORMAT_VERSION = 1


@dataclass
class SequenceBatch:
    """B sequences of T steps with D features each, plus integer labels."""

    data: np.ndarray
    labels: np.ndarray

    def __post_init__(self):
        self.data = np.asarray(self.data, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.data.ndim != 3:
            raise ShapeMismatch("data must be (B, T, D)")
        if self.labels.shape != (self.data.shape[0],):
            raise ShapeMismatch("labels must be one per sequence")

    def __len__(self):
        return self.data.shape[0]

    def subset(self, idx):
        return SequenceBatch(self.data[idx], self.labels[idx])


@dataclass
class TrainConfig:
    lr0: float = 1e-3
    plateau_factor: float = 0.5
    plateau_patience: int = 5
    max_epochs: int = 100
    batch_size: int = 64
    early_stop_patience: int = 15
    seed: int = 0
    val_fraction: float = 0.2
    min_delta: float = 1e-6
    # Optional early exit once validation loss is good enough; keeps the
    # noiseless end-to-end runs cheap without touching the schedule contract.
    target_val_loss: float | None = None

    def __post_init__(self):
        if not 0 < self.plateau_factor < 1:
            raise ValueError("plateau_factor must lie in (0, 1)")
        if self.plateau_patience < 1 or self.early_stop_patience < 1:
            raise ValueError("patience values must be >= 1")
        if not 0 < self.val_fraction < 1:
            raise ValueError("val_fraction must lie in (0, 1)")


@dataclass
class TrainLog:
    epochs: list = field(default_factory=list)  # dicts: epoch, train_loss, val_loss, lr
    best_epoch: int = 0
    best_val_loss: float = np.inf
    no_improvement: bool = False
    stopped_early: bool = False


def train(
    dataset: SequenceBatch,
    cfg: TrainConfig,
    hidden: int = 64,
    layers: int = 2,
    dropout_p: float = 0.2,
    classes: int | None = None,
):
    """Train a bidirectional LSTM classifier; returns (model, TrainLog).

    Deterministic per cfg.seed: the validation split, batch shuffles, and
    dropout masks all flow from one generator.  The returned model carries
    the parameters of the best validation epoch.
    """
    if classes is None:
        classes = int(dataset.labels.max()) + 1
    if classes < 2:
        raise ValueError("need at least 2 classes")
    n = len(dataset)
    rng = np.random.default_rng(cfg.seed)
    perm = rng.permutation(n)
    n_val = max(1, int(round(cfg.val_fraction * n)))
    if n_val >= n:
        raise ValueError("dataset too small for the validation split")
    val = dataset.subset(perm[n - n_val :])
    tr = dataset.subset(perm[: n - n_val])

    model = init_model(
        dataset.data.shape[2], classes, hidden, layers, dropout_p, seed=cfg.seed
    )
    # Standardize inputs by the training split; constant features pass through.
    flat = tr.data.reshape(-1, tr.data.shape[2])
    std = flat.std(axis=0)
    model.norm_mean = flat.mean(axis=0)
    model.norm_std = np.where(std > 1e-12, std, 1.0)
    state = AdamState(model.params)
    sched = PlateauScheduler(cfg.lr0, cfg.plateau_factor, cfg.plateau_patience, cfg.min_delta)
    log = TrainLog()
    best_params = copy.deepcopy(model.params)
    bad = 0

    for epoch in range(1, cfg.max_epochs + 1):
        lr = sched.lr
        order = rng.permutation(len(tr))
        losses = []
        for lo in range(0, len(tr), cfg.batch_size):
            idx = order[lo : lo + cfg.batch_size]
            xb, yb = tr.data[idx], tr.labels[idx]
            logits, cache = bilstm_forward(model, xb, training=True, rng=rng)
            losses.append(cross_entropy(logits, yb) * len(idx))
            grads = backward(model, cache, yb, logits)
            adam_step(model.params, grads, state, lr)
        train_loss = float(np.sum(losses) / len(tr))
        val_logits, _ = bilstm_forward(model, val.data, training=False)
        val_loss = cross_entropy(val_logits, val.labels)
        log.epochs.append(
            {"epoch": epoch, "train_loss": train_loss, "val_loss": val_loss, "lr": lr}
        )
        if val_loss < log.best_val_loss - cfg.min_delta:
            log.best_val_loss = val_loss
            log.best_epoch = epoch
            best_params = copy.deepcopy(model.params)
            bad = 0
        else:
            bad += 1
        sched.step(val_loss)
        if cfg.target_val_loss is not None and val_loss <= cfg.target_val_loss:
            break
        if bad >= cfg.early_stop_patience:
            log.stopped_early = True
            break

    first_val = log.epochs[0]["val_loss"]
    log.no_improvement = not (log.best_val_loss < first_val - cfg.min_delta) and len(log.epochs) > 1
    model.params = best_params
    return model, log


def save_model(model: BiLstmModel, path):
    """Versioned container: JSON header + parameter tensors in fixed order."""
    meta = {
        "version": MODEL_FORMAT_VERSION,
        "layers": model.layers,
        "hidden": model.hidden,
        "input_dim": model.input_dim,
        "classes": model.classes,
        "dropout_p": model.dropout_p,
        "param_order": param_names(model.layers),
        "normalized": model.norm_mean is not None,
    }
    extra = {}
    if model.norm_mean is not None:
        extra = {"__norm_mean__": model.norm_mean, "__norm_std__": model.norm_std}
    with open(path, "wb") as f:
        np.savez(f, __meta__=np.frombuffer(json.dumps(meta).encode(), dtype=np.uint8),
                 **extra, **model.params)


def load_model(path) -> BiLstmModel:
    with np.load(path) as archive:
        meta = json.loads(archive["__meta__"].tobytes().decode())
        if meta["version"] != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format version {meta['version']}")
        params = {k: archive[k] for k in meta["param_order"]}
        norm_mean = archive["__norm_mean__"] if meta.get("normalized") else None
        norm_std = archive["__norm_std__"] if meta.get("normalized") else None
    return BiLstmModel(
        input_dim=meta["input_dim"],
        classes=meta["classes"],
        hidden=meta["hidden"],
        layers=meta["layers"],
        dropout_p=meta["dropout_p"],
        params=params,
        norm_mean=norm_mean,
        norm_std=norm_std,
    )
