"""Training-set collection and on-disk packet datasets.

A dataset directory holds one ADC-code CSV per packet plus a manifest with
the generating config (and its hash), the seed, and the true payload
symbols, so leave-one-out and cross-validation splits stay auditable.
"""

import hashlib
import json
import os
from dataclasses import dataclass, replace

import numpy as np

from .. import phy_tx as tx
from ..channel import AdcTrace
from ..errors import AnchorUnderflow, OutOfBounds, SyncNotFound
from ..neural import SequenceBatch, TrainConfig, train
from .trials import (
    TrialConfig,
    anchor_features,
    build_packet,
    payload_windows,
    raw_features,
    receive_front_end,
    transmit,
)

MANIFEST_NAME = "manifest.json"


def packet_features(cfg: TrialConfig, seed: int, mode: str, trace: AdcTrace | None = None):
    """(features B x T x D, labels) for one packet, or None if sync fails."""
    pkt, _, _, _ = build_packet(cfg)
    if trace is None:
        pkt, trace, _ = transmit(cfg, seed)
    try:
        windows, anchors = receive_front_end(cfg, pkt, trace)
    except (SyncNotFound, AnchorUnderflow, OutOfBounds):
        # A packet that cannot be synchronized and anchored is unusable
        # for training.
        return None
    pw = payload_windows(cfg, pkt, windows)
    if mode == "raw":
        feats = raw_features(pw)
    elif mode == "anchor":
        feats = anchor_features(pw, anchors)
    else:
        raise ValueError(f"unknown feature mode {mode!r}")
    return feats, np.array(pkt.payload_symbols)


def random_payload_cfgs(base: TrialConfig, n: int, seed: int, n_bits: int = 64) -> list:
    """Copies of `base` with seeded random payload bits (training coverage)."""
    rng = np.random.default_rng([seed, 911])
    out = []
    for _ in range(n):
        bits = "".join("1" if b else "0" for b in rng.integers(0, 2, n_bits))
        out.append(replace(base, payload_bits=bits))
    return out


def collect_windows(cfgs, mode: str, n_packets: int, base_seed: int) -> SequenceBatch:
    """Payload windows from n_packets packets, cycling over the configs."""
    cfgs = list(cfgs)
    xs, ys = [], []
    for i in range(n_packets):
        out = packet_features(cfgs[i % len(cfgs)], base_seed + i, mode)
        if out is None:
            continue
        xs.append(out[0])
        ys.append(out[1])
    if not xs:
        raise ValueError("no packets survived synchronization")
    return SequenceBatch(np.concatenate(xs), np.concatenate(ys))


def train_decoder(
    mode: str,
    cfgs,
    n_packets: int,
    base_seed: int,
    train_cfg: TrainConfig | None = None,
    **model_kw,
):
    """Train a classifier for `ml_raw`/`ml_anchor` on freshly simulated packets."""
    cfgs = [cfgs] if isinstance(cfgs, TrialConfig) else list(cfgs)
    order = cfgs[0].order
    batch = collect_windows(cfgs, mode, n_packets, base_seed)
    if train_cfg is None:
        train_cfg = TrainConfig(seed=base_seed)
    return train(batch, train_cfg, classes=order, **model_kw)


# ---------------------------------------------------------------------------
# Disk format


def _layout_dict(layout: tx.FrameLayout) -> dict:
    return {
        "preamble_slots": layout.preamble_slots,
        "anchor_ids": list(layout.anchor_ids),
        "slots_per_anchor": layout.slots_per_anchor,
        "etb_state_slots": layout.etb_state_slots,
    }


def trial_config_to_dict(cfg: TrialConfig) -> dict:
    return {
        "order": cfg.order,
        "baud_hz": cfg.baud_hz,
        "distance_m": cfg.distance_m,
        "ambient_lux": cfg.ambient_lux,
        "noise_sigma": cfg.noise_sigma,
        "n_cells": cfg.n_cells,
        "payload_bits": cfg.payload_bits,
        "layout": _layout_dict(cfg.layout),
        "anchor_order": cfg.anchor_order,
        "fs_hz": cfg.fs_hz,
        "adc_bits": cfg.adc_bits,
        "full_scale_v": cfg.full_scale_v,
        "tau_scale": cfg.tau_scale,
        "profile_set": cfg.profile_set,
        "quantize": cfg.quantize,
        "pad_slots": list(cfg.pad_slots),
    }


def trial_config_from_dict(d: dict) -> TrialConfig:
    d = dict(d)
    layout = tx.FrameLayout(**{k: tuple(v) if k == "anchor_ids" else v
                               for k, v in d.pop("layout").items()})
    d["pad_slots"] = tuple(d["pad_slots"])
    return TrialConfig(layout=layout, **d)


def config_hash(cfg: TrialConfig) -> str:
    blob = json.dumps(trial_config_to_dict(cfg), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


def generate_dataset(cfgs, n_packets: int, base_seed: int, out_dir):
    """Simulate packets and persist their ADC captures under out_dir."""
    cfgs = [cfgs] if isinstance(cfgs, TrialConfig) else list(cfgs)
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for i in range(n_packets):
        cfg = cfgs[i % len(cfgs)]
        seed = base_seed + i
        pkt, trace, pad = transmit(cfg, seed)
        fname = f"packet_{i:04d}.csv"
        np.savetxt(os.path.join(out_dir, fname), trace.codes, fmt="%d", delimiter=",")
        entries.append(
            {
                "file": fname,
                "seed": seed,
                "config": trial_config_to_dict(cfg),
                "config_hash": config_hash(cfg),
                "payload_symbols": list(pkt.payload_symbols),
                "pad_count": pad,
                "fs_hz": trace.fs_hz,
                "full_scale_v": trace.full_scale_v,
                "adc_bits": trace.adc_bits,
            }
        )
    with open(os.path.join(out_dir, MANIFEST_NAME), "w") as f:
        json.dump({"packets": entries}, f, indent=1)
        f.write("\n")


@dataclass
class PacketRecord:
    config: TrialConfig
    seed: int
    trace: AdcTrace
    payload_symbols: tuple
    pad_count: int


def load_dataset(path) -> list:
    with open(os.path.join(path, MANIFEST_NAME)) as f:
        manifest = json.load(f)
    records = []
    for e in manifest["packets"]:
        codes = np.loadtxt(os.path.join(path, e["file"]), dtype=np.int64, delimiter=",",
                           ndmin=2)
        q = 2 ** e["adc_bits"] - 1
        volts = codes * (e["full_scale_v"] / q)
        trace = AdcTrace(e["fs_hz"], codes, volts, volts, e["full_scale_v"], e["adc_bits"])
        records.append(
            PacketRecord(
                config=trial_config_from_dict(e["config"]),
                seed=e["seed"],
                trace=trace,
                payload_symbols=tuple(e["payload_symbols"]),
                pad_count=e["pad_count"],
            )
        )
    return records


def dataset_features(records, mode: str) -> SequenceBatch:
    xs, ys = [], []
    for r in records:
        out = packet_features(r.config, r.seed, mode, trace=r.trace)
        if out is None:
            continue
        xs.append(out[0])
        ys.append(out[1])
    if not xs:
        raise ValueError("no packets survived synchronization")
    return SequenceBatch(np.concatenate(xs), np.concatenate(ys))
