"""Single-trial pipeline: frame, propagate, synchronize, decode, score.

A trial transmits one packet (the 40-bit ascii payload "hello" by default)
through a seeded channel instance and decodes it with one of three
decoders: classical least-squares channel estimation (`ls`), the learned
classifier on raw per-sample voltages (`ml_raw`), or the learned classifier
on anchor-differential features (`ml_anchor`).  Failed synchronization and
decoder errors are recorded on the result and charged as all-bits-wrong.
"""

import time
from dataclasses import dataclass, field, replace

import numpy as np

from .. import channel as ch
from .. import phy_rx as rx
from .. import phy_tx as tx
from ..colorspace import default_vertices, make_constellation
from ..errors import CskModemError, LengthMismatch
from ..neural import predict

DECODERS = ("ls", "ml_raw", "ml_anchor")

HELLO_TEXT = "hello"


def text_to_bits(s: str) -> str:
    return "".join(format(b, "08b") for b in s.encode("ascii"))


DEFAULT_PAYLOAD_BITS = text_to_bits(HELLO_TEXT)


def ber(tx_bits, rx_bits) -> float:
    """Fraction of differing bits between two equal-length sequences."""
    a = _bit_array(tx_bits)
    b = _bit_array(rx_bits)
    if a.size != b.size:
        raise LengthMismatch(f"bit sequences differ in length: {a.size} vs {b.size}")
    return float(np.count_nonzero(a != b) / a.size)


def _bit_array(bits):
    if isinstance(bits, str):
        return np.frombuffer(bits.encode(), dtype=np.uint8) - ord("0")
    return np.asarray(bits, dtype=np.uint8)


@dataclass(frozen=True)
class TrialConfig:
    """Everything one trial depends on besides the decoder and seed."""

    order: int = 4
    baud_hz: float = 500.0
    distance_m: float = 0.25
    ambient_lux: float = 0.0
    noise_sigma: float = ch.DEFAULT_NOISE_SIGMA
    n_cells: int = 7
    payload_bits: str = DEFAULT_PAYLOAD_BITS
    layout: tx.FrameLayout = field(default_factory=tx.FrameLayout)
    anchor_order: int = 4
    fs_hz: float | None = None  # None: nearest slot-aligned rate to 2 kHz
    adc_bits: int = ch.DEFAULT_ADC_BITS
    full_scale_v: float = ch.DEFAULT_FULL_SCALE_V
    tau_scale: float = 1.0      # 0 disables cell dynamics
    profile_set: str = "default"  # "default" | "silicon"
    quantize: bool = True       # False: decode pre-ADC volts (diagnostics)
    pad_slots: tuple = (2, 2)

    def resolved_fs(self) -> float:
        if self.fs_hz is not None:
            return self.fs_hz
        sps = max(1, round(ch.DEFAULT_FS_HZ / self.baud_hz))
        return sps * self.baud_hz

    def profiles(self, seed: int) -> tuple:
        base = ch.silicon_profiles() if self.profile_set == "silicon" else ch.default_profiles()
        if self.tau_scale != 1.0:
            base = tuple(
                ch.CellProfile(p.name, p.responsivity, p.gain, p.tau_ms * self.tau_scale)
                for p in base
            )
        if self.n_cells >= len(base):
            return base
        # Mirrors the random-subset cell-count protocol; independent of the
        # channel noise stream.
        rng = np.random.default_rng([seed, 71])
        idx = sorted(rng.choice(len(base), size=self.n_cells, replace=False))
        return tuple(base[i] for i in idx)

    def channel_config(self, seed: int) -> ch.ChannelConfig:
        return ch.ChannelConfig(
            profiles=self.profiles(seed),
            distance_m=self.distance_m,
            ambient_lux=self.ambient_lux,
            noise_sigma=self.noise_sigma,
            adc_bits=self.adc_bits,
            fs_hz=self.resolved_fs(),
            full_scale_v=self.full_scale_v,
            seed=seed,
        )

    def snapshot(self) -> dict:
        return {
            "order": self.order,
            "baud": self.baud_hz,
            "distance_m": self.distance_m,
            "lux": self.ambient_lux,
            "noise_sigma": self.noise_sigma,
            "n_cells": self.n_cells,
            "n_anchors": self.layout.n_anchors,
            "fs_hz": self.resolved_fs(),
        }


@dataclass
class TrialResult:
    config: dict
    decoder: str
    seed: int
    ber: float
    n_bits: int
    n_errors: int
    sync_ok: bool
    error: str | None = None
    wall_ms: float = 0.0


def build_packet(cfg: TrialConfig):
    """(packet, constellation, anchor constellation, pad_count) for a trial."""
    verts = default_vertices()
    c = make_constellation(cfg.order, verts)
    anchor_c = c if cfg.anchor_order == cfg.order else make_constellation(cfg.anchor_order, verts)
    symbols, pad = tx.bits_to_symbols(cfg.payload_bits, c)
    pkt = tx.frame_packet(symbols, cfg.layout, c, anchor_c)
    return pkt, c, anchor_c, pad


def transmit(cfg: TrialConfig, seed: int):
    """Run the TX + channel half of a trial; returns (packet, trace, pad_count)."""
    pkt, c, anchor_c, pad = build_packet(cfg)
    wave = tx.packet_to_waveform(pkt, cfg.baud_hz)
    trace = ch.propagate(wave, cfg.channel_config(seed), pad_slots=cfg.pad_slots)
    if not cfg.quantize:
        trace = trace.as_unquantized()
    return pkt, trace, pad


def receive_front_end(cfg: TrialConfig, pkt, trace):
    """Sync and segment one packet; returns (windows, anchors)."""
    start = rx.detect_preamble(trace, cfg.baud_hz, cfg.layout, pkt.constellation)
    windows = rx.segment(trace, start, pkt.n_slots, trace.fs_hz, cfg.baud_hz)
    anchors = rx.extract_anchors(
        windows, cfg.layout, pkt.anchor_constellation, trace.full_scale_v
    )
    return windows, anchors


def payload_windows(cfg: TrialConfig, pkt, windows):
    span = rx.payload_slot_range(cfg.layout, len(pkt.payload_symbols))
    return [windows[i] for i in span]


def raw_features(windows) -> np.ndarray:
    """Stack windows as (B, T, n_cells) batches of raw voltages."""
    return np.stack([w.samples.T for w in windows])


def anchor_features(windows, anchors) -> np.ndarray:
    """Stack windows as (B, T, n_cells * n_anchors) ratio-feature batches."""
    return np.stack([rx.differential_time_features(w.samples, anchors) for w in windows])


def decode_payload(cfg: TrialConfig, decoder: str, pkt, windows, anchors, model=None):
    """Symbol decisions for the payload slots of one packet."""
    pw = payload_windows(cfg, pkt, windows)
    c = pkt.constellation
    if decoder == "ls":
        H = rx.calibrate_H(anchors)
        return [rx.ls_decode(w, H, c) for w in pw]
    if decoder == "ml_raw":
        feats = raw_features(pw)
    elif decoder == "ml_anchor":
        feats = anchor_features(pw, anchors)
    else:
        raise ValueError(f"unknown decoder {decoder!r}")
    if model is None:
        raise ValueError(f"decoder {decoder!r} needs a trained model")
    idx, _ = predict(model, feats)
    return [int(i) for i in idx]


def run_trial(cfg: TrialConfig, decoder: str, seed: int, model=None) -> TrialResult:
    """One packet end to end; module errors are recorded, not raised."""
    t0 = time.perf_counter()
    pkt, trace, pad = transmit(cfg, seed)
    n_bits = len(cfg.payload_bits)
    result = TrialResult(
        config=cfg.snapshot(), decoder=decoder, seed=seed,
        ber=1.0, n_bits=n_bits, n_errors=n_bits, sync_ok=False,
    )
    try:
        windows, anchors = receive_front_end(cfg, pkt, trace)
        result.sync_ok = True
        symbols = decode_payload(cfg, decoder, pkt, windows, anchors, model)
        bits_rx = rx.symbols_to_bits(symbols, pkt.constellation, pad)
        result.ber = ber(cfg.payload_bits, bits_rx)
        result.n_errors = round(result.ber * n_bits)
    except CskModemError as exc:
        result.error = type(exc).__name__
    result.wall_ms = (time.perf_counter() - t0) * 1e3
    return result


def with_overrides(cfg: TrialConfig, **kw) -> TrialConfig:
    return replace(cfg, **kw)


def anchors_for_count(n: int) -> tuple:
    """(layout anchor ids, anchor constellation order) for an anchor-count sweep."""
    if n <= 4:
        return tuple(range(n)), 4
    if n <= 8:
        return tuple(range(n)), 8
    raise ValueError("at most 8 anchor candidates")
