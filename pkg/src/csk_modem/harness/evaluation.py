"""Cross-validation, leave-one-out, anchor-selection, and sweep protocols."""

from dataclasses import dataclass, field, replace
from itertools import combinations, product

import numpy as np

from .. import phy_tx as tx
from ..colorspace import default_vertices, make_constellation
from ..neural import SequenceBatch, TrainConfig, train
from .datasets import collect_windows, train_decoder
from .trials import DECODERS, TrialConfig, anchors_for_count, run_trial

DISTANCE_GRID_M = (0.25, 0.30, 0.35, 0.40, 0.45, 0.50)
LUX_GRID = (0.0, 147.0, 618.0, 1154.0)
BAUD_GRID_HZ = (50.0, 100.0, 200.0, 300.0, 400.0, 500.0, 600.0, 700.0, 800.0, 900.0, 1000.0)

SWEEP_VARIABLES = ("baud", "lux", "distance", "n_cells", "n_anchors", "order")

DEFAULT_GRIDS = {
    "baud": BAUD_GRID_HZ,
    "lux": LUX_GRID,
    "distance": DISTANCE_GRID_M,
    "n_cells": (1, 3, 5, 7),
    "n_anchors": (3, 4, 5, 6, 7, 8),
    "order": (4, 8, 16),
}


def apply_variable(cfg: TrialConfig, variable: str, value) -> TrialConfig:
    if variable == "baud":
        return replace(cfg, baud_hz=float(value))
    if variable == "lux":
        return replace(cfg, ambient_lux=float(value))
    if variable == "distance":
        return replace(cfg, distance_m=float(value))
    if variable == "n_cells":
        return replace(cfg, n_cells=int(value))
    if variable == "order":
        return replace(cfg, order=int(value))
    if variable == "n_anchors":
        ids, anchor_order = anchors_for_count(int(value))
        layout = tx.FrameLayout(
            preamble_slots=cfg.layout.preamble_slots,
            anchor_ids=ids,
            slots_per_anchor=cfg.layout.slots_per_anchor,
            etb_state_slots=cfg.layout.etb_state_slots,
        )
        return replace(cfg, layout=layout, anchor_order=anchor_order)
    raise ValueError(f"unknown sweep variable {variable!r}")


@dataclass
class SweepSpec:
    variable: str
    values: tuple = None
    base: TrialConfig = field(default_factory=TrialConfig)
    decoders: tuple = ("ls",)
    trials: int = 100
    base_seed: int = 0
    train_packets: int = 60  # per value, for inline ml training
    train_cfg: TrainConfig | None = None

    def __post_init__(self):
        if self.variable not in SWEEP_VARIABLES:
            raise ValueError(f"variable must be one of {SWEEP_VARIABLES}")
        if self.values is None:
            self.values = DEFAULT_GRIDS[self.variable]
        self.values = tuple(self.values)
        if not self.values:
            raise ValueError("values must be non-empty")
        for d in self.decoders:
            if d not in DECODERS:
                raise ValueError(f"unknown decoder {d!r}")


def run_sweep(spec: SweepSpec) -> list:
    """All trials of a sweep, in deterministic (value, decoder, trial) order.

    ml decoders are trained inline per sweep value on extra packets seeded
    away from the evaluation stream.
    """
    results = []
    for vi, value in enumerate(spec.values):
        cfg = apply_variable(spec.base, spec.variable, value)
        models = {}
        for decoder in spec.decoders:
            if decoder in ("ml_raw", "ml_anchor"):
                mode = decoder.split("_")[1]
                model, _ = train_decoder(
                    mode, cfg, spec.train_packets,
                    base_seed=spec.base_seed + 100_000 + 1000 * vi,
                    train_cfg=spec.train_cfg,
                )
                models[decoder] = model
        for decoder in spec.decoders:
            for t in range(spec.trials):
                seed = spec.base_seed + 1000 * vi + t
                results.append(
                    run_trial(cfg, decoder, seed, model=models.get(decoder))
                )
    return results


def mean_ber(results) -> float:
    errors = sum(r.n_errors for r in results)
    bits = sum(r.n_bits for r in results)
    return errors / bits if bits else 0.0


def kfold_eval(packet_specs, k: int = 5, decoder: str = "ls",
               mode_seed: int = 0, train_cfg: TrainConfig | None = None,
               **model_kw):
    """k-fold cross-validation over (config, seed) packet specs.

    Fold assignment is a seeded permutation of the specs in their given
    (trial id) order, cut into k contiguous chunks.  Returns
    (mean BER, sample std over folds, per-fold BERs).
    """
    specs = list(packet_specs)
    if len(specs) < k:
        raise ValueError("need at least k packets")
    order = np.random.default_rng(mode_seed).permutation(len(specs))
    folds = np.array_split(order, k)
    fold_bers = []
    for fi, fold in enumerate(folds):
        test = [specs[i] for i in fold]
        model = None
        if decoder in ("ml_raw", "ml_anchor"):
            train_idx = [i for i in order if i not in set(fold)]
            mode = decoder.split("_")[1]
            batches = [collect_windows([specs[i][0]], mode, 1, specs[i][1]) for i in train_idx]
            data = np.concatenate([b.data for b in batches])
            labels = np.concatenate([b.labels for b in batches])
            cfg0 = specs[0][0]
            tc = train_cfg if train_cfg is not None else TrainConfig(seed=mode_seed)
            model, _ = train(SequenceBatch(data, labels), tc, classes=cfg0.order, **model_kw)
        rs = [run_trial(cfg, decoder, seed, model=model) for cfg, seed in test]
        fold_bers.append(mean_ber(rs))
    fold_bers = np.array(fold_bers)
    std = float(fold_bers.std(ddof=1)) if k > 1 else 0.0
    return float(fold_bers.mean()), std, fold_bers.tolist()


def leave_one_out(
    variable: str,
    held_value,
    decoders=("ls", "ml_raw", "ml_anchor"),
    base: TrialConfig | None = None,
    grid=None,
    train_packets: int = 60,
    test_packets: int = 10,
    base_seed: int = 0,
    train_cfg: TrainConfig | None = None,
    **model_kw,
):
    """Train on every grid value except `held_value`, test on the held one.

    Returns {decoder: mean BER} plus the training grid actually used.
    """
    if variable not in ("distance", "lux"):
        raise ValueError("leave-one-out supports 'distance' and 'lux'")
    if grid is None:
        grid = DISTANCE_GRID_M if variable == "distance" else LUX_GRID
    grid = tuple(grid)
    if held_value not in grid:
        raise ValueError(f"held value {held_value} is not in the grid {grid}")
    if len(grid) < 2:
        raise ValueError("grid needs at least 2 values")
    if base is None:
        base = TrialConfig()
    train_cfgs = [apply_variable(base, variable, v) for v in grid if v != held_value]
    test_cfg = apply_variable(base, variable, held_value)

    out = {"held": held_value, "train_grid": tuple(v for v in grid if v != held_value)}
    bers = {}
    for decoder in decoders:
        model = None
        if decoder in ("ml_raw", "ml_anchor"):
            mode = decoder.split("_")[1]
            model, _ = train_decoder(
                mode, train_cfgs, train_packets, base_seed + 500_000,
                train_cfg=train_cfg, **model_kw,
            )
        rs = [
            run_trial(test_cfg, decoder, base_seed + t, model=model)
            for t in range(test_packets)
        ]
        bers[decoder] = mean_ber(rs)
    out["ber"] = bers
    return out


# ---------------------------------------------------------------------------
# Anchor-selection strategies over the 8-CSK candidate points


def kmeans_xy(points: np.ndarray, k: int = 3, seed: int = 0, iters: int = 64):
    """Plain Lloyd k-means on 2-D points; deterministic by seed."""
    rng = np.random.default_rng(seed)
    centers = points[rng.choice(len(points), size=k, replace=False)]
    labels = np.zeros(len(points), dtype=int)
    for it in range(iters):
        d = np.linalg.norm(points[:, None, :] - centers[None, :, :], axis=2)
        new_labels = np.argmin(d, axis=1)
        if it > 0 and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for j in range(k):
            sel = points[labels == j]
            if len(sel):
                centers[j] = sel.mean(axis=0)
    return labels, centers


def anchor_groups(seed: int = 0) -> tuple:
    """Three spatial groups of the 8-CSK points (sorted for determinism)."""
    c8 = make_constellation(8, default_vertices())
    labels, centers = kmeans_xy(c8.xy, k=3, seed=seed)
    groups = [tuple(int(i) for i in np.flatnonzero(labels == j)) for j in range(3)]
    order = np.argsort(centers[:, 0] + 1e-3 * centers[:, 1])
    return tuple(groups[j] for j in order)


def strategy_selections(strategy: str, groups) -> list:
    """All 3-anchor selections allowed by a strategy (no repeated points)."""
    if strategy == "S1":
        return [sel for g in groups for sel in combinations(g, 3)]
    if strategy == "S2":
        out = []
        for gi in groups:
            for gj in groups:
                if gi is gj:
                    continue
                for two in combinations(gi, 2):
                    out.extend(two + (one,) for one in gj)
        return out
    if strategy == "S3":
        return [tuple(sel) for sel in product(*groups)]
    raise ValueError(f"unknown strategy {strategy!r}")


def mean_pairwise_distance(selection, xy: np.ndarray) -> float:
    pts = xy[list(selection)]
    return float(
        np.mean([np.linalg.norm(pts[i] - pts[j]) for i in range(3) for j in range(i + 1, 3)])
    )


def anchor_strategy_eval(
    strategies=("S1", "S2", "S3"),
    base: TrialConfig | None = None,
    n_seeds: int = 5,
    base_seed: int = 0,
    decoder: str = "ls",
    group_seed: int = 0,
):
    """Mean anchor spacing and mean BER per anchor-selection strategy.

    Candidates are the 8-CSK points split into three spatial groups; each
    selection becomes the packet's anchor set (3 anchors from 8-CSK) while
    the payload stays at the base order.
    """
    if base is None:
        base = TrialConfig(distance_m=0.45)
    c8 = make_constellation(8, default_vertices())
    groups = anchor_groups(group_seed)
    results = {}
    for strategy in strategies:
        sels = strategy_selections(strategy, groups)
        dists = [mean_pairwise_distance(s, c8.xy) for s in sels]
        trial_results = []
        for si, sel in enumerate(sels):
            layout = tx.FrameLayout(
                preamble_slots=base.layout.preamble_slots,
                anchor_ids=sel,
                slots_per_anchor=base.layout.slots_per_anchor,
                etb_state_slots=base.layout.etb_state_slots,
            )
            cfg = replace(base, layout=layout, anchor_order=8)
            for t in range(n_seeds):
                trial_results.append(run_trial(cfg, decoder, base_seed + 37 * si + t))
        results[strategy] = {
            "n_selections": len(sels),
            "mean_distance": float(np.mean(dists)),
            "mean_ber": mean_ber(trial_results),
            "groups": groups,
        }
    return results
