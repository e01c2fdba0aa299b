"""Receiver chain: sync, slot segmentation, anchors, and LS decoding.

Synchronization correlates the highest-variance cell against the red/blue
preamble template.  Each slot's scalar feature is a trimmed mean over the
middle of its sample window, which skips the settling transient of slow
cells.  Anchor observations support two decoders: the classical
least-squares channel estimate (solve y = H s, then nearest constellation
point in chromaticity), and gain-invariant ratio features |d - a| / a
consumed by the learned decoder.
"""

from dataclasses import dataclass

import numpy as np

from .channel import AdcTrace, DEFAULT_FULL_SCALE_V, samples_per_slot
from .colorspace import ChromaticityPoint, Constellation, nearest_symbol
from .errors import (
    AnchorUnderflow,
    OutOfBounds,
    RankDeficient,
    SyncNotFound,
    Underdetermined,
)
from .phy_tx import FrameLayout, SlotKind, vertex_indices

SYNC_THRESHOLD = 0.6

# Ratio features divide by anchor components; reject anchors below this
# fraction of ADC full scale.
ANCHOR_EPS_FRACTION = 1e-6


@dataclass(frozen=True)
class SymbolWindow:
    """One slot's samples (n_cells x sps) and its per-cell scalar feature."""

    slot_index: int
    samples: np.ndarray
    feature: np.ndarray


@dataclass(frozen=True)
class AnchorSet:
    """Observed anchor feature vectors and their known power triples."""

    anchor_ids: tuple
    vectors: np.ndarray  # n_anchors x n_cells
    powers: np.ndarray   # n_anchors x 3

    @property
    def n_anchors(self) -> int:
        return self.vectors.shape[0]


@dataclass(frozen=True)
class ChannelMatrix:
    """Estimated map from RGB powers to cell voltages.

    entries is n_cells x 3, or n_cells x 4 with the last column holding the
    per-cell ambient offset (affine mode).
    """

    entries: np.ndarray
    affine: bool

    @property
    def linear_part(self) -> np.ndarray:
        return self.entries[:, :3]

    @property
    def offset(self) -> np.ndarray:
        if not self.affine:
            return np.zeros(self.entries.shape[0])
        return self.entries[:, 3]


def preamble_template(layout: FrameLayout, sps: int) -> np.ndarray:
    """+-1 red/blue alternation at sample rate, one preamble long."""
    slot_signs = np.where(np.arange(layout.preamble_slots) % 2 == 0, 1.0, -1.0)
    return np.repeat(slot_signs, sps)


def _normalized_correlation(x: np.ndarray, tpl: np.ndarray) -> np.ndarray:
    """|corr| of a zero-mean template against every window of x."""
    L = tpl.size
    dots = np.correlate(x, tpl, mode="valid")
    csum = np.concatenate(([0.0], np.cumsum(x)))
    csum2 = np.concatenate(([0.0], np.cumsum(x * x)))
    wsum = csum[L:] - csum[:-L]
    wsum2 = csum2[L:] - csum2[:-L]
    var = np.maximum(wsum2 - wsum**2 / L, 0.0)
    denom = np.sqrt(float(tpl @ tpl)) * np.sqrt(var)
    # tpl is zero-mean, so the dot products already ignore the window mean.
    corr = np.zeros(dots.size)
    ok = denom > 0
    corr[ok] = dots[ok] / denom[ok]
    return np.abs(corr)


def _anchor_block_score(trace, lag, layout, sps) -> float:
    """Within-anchor-block feature scatter; minimal at the true alignment.

    Each anchor repeats its symbol for slots_per_anchor slots, so the
    feature difference between consecutive slots of one block is small only
    when the segmentation is slot-aligned with the frame.
    """
    score = 0.0
    for j in range(layout.n_anchors):
        first = layout.preamble_slots + j * layout.slots_per_anchor
        prev = None
        for s in range(layout.slots_per_anchor):
            a = lag + (first + s) * sps
            f = trimmed_feature(trace.volts[:, a : a + sps])
            if prev is not None:
                score += float(np.sum((f - prev) ** 2))
            prev = f
    return score


def detect_preamble(
    trace: AdcTrace, baud_hz: float, layout: FrameLayout, c: Constellation
) -> int:
    """Sample index where the packet starts.

    Slides the red/blue template over every cell and takes the lag of the
    strongest |normalized correlation|.  Because a pure alternation is
    nearly symmetric under one-slot shifts (and under sign for
    blue-dominant cells), lags one or two slots around the peak are then
    disambiguated by the anchor-block consistency score.  Raises
    SyncNotFound when the correlation peak stays below the threshold.
    """
    sps = samples_per_slot(trace.fs_hz, baud_hz)
    tpl = preamble_template(layout, sps)
    L = tpl.size
    if trace.n_samples < L + 1:
        raise SyncNotFound("trace shorter than one preamble")

    corr = np.array([_normalized_correlation(x, tpl) for x in trace.volts])
    peak_by_lag = corr.max(axis=0)
    lag0 = int(np.argmax(peak_by_lag))
    if peak_by_lag[lag0] < SYNC_THRESHOLD:
        raise SyncNotFound(
            f"best preamble correlation {peak_by_lag[lag0]:.3f} < {SYNC_THRESHOLD}"
        )

    if layout.slots_per_anchor < 2:
        return lag0
    anchor_end = layout.preamble_slots + layout.n_anchors * layout.slots_per_anchor
    best = None
    for k in range(-2, 3):
        lag = lag0 + k * sps
        if lag < 0 or lag + anchor_end * sps > trace.n_samples:
            continue
        if peak_by_lag[lag] < SYNC_THRESHOLD:
            continue
        s = _anchor_block_score(trace, lag, layout, sps)
        if best is None or s < best[0]:
            best = (s, lag)
    return best[1] if best is not None else lag0


def trimmed_feature(samples: np.ndarray) -> np.ndarray:
    """Mean of the middle ~50% of each row (at least one sample)."""
    sps = samples.shape[1]
    lo = sps // 4
    hi = max(lo + 1, sps - sps // 4)
    return samples[:, lo:hi].mean(axis=1)


def segment(trace: AdcTrace, start: int, n_slots: int, fs_hz: float, baud_hz: float):
    """Split the trace into n_slots contiguous symbol windows from `start`."""
    sps = samples_per_slot(fs_hz, baud_hz)
    end = start + n_slots * sps
    if start < 0 or end > trace.n_samples:
        raise OutOfBounds(
            f"slots [{start}, {end}) exceed trace of {trace.n_samples} samples"
        )
    windows = []
    for m in range(n_slots):
        chunk = trace.volts[:, start + m * sps : start + (m + 1) * sps]
        windows.append(SymbolWindow(m, chunk, trimmed_feature(chunk)))
    return windows


def extract_anchors(
    windows,
    layout: FrameLayout,
    c: Constellation,
    full_scale_v: float = DEFAULT_FULL_SCALE_V,
) -> AnchorSet:
    """Anchor observations from a packet's windows (indexed from slot 0).

    Each anchor's vector comes from the LAST slot of its block, giving slow
    cells the full block to settle.
    """
    eps = ANCHOR_EPS_FRACTION * full_scale_v
    vectors = []
    for j in range(layout.n_anchors):
        slot = layout.preamble_slots + (j + 1) * layout.slots_per_anchor - 1
        if slot >= len(windows):
            raise OutOfBounds("windows do not cover the anchor block")
        vectors.append(windows[slot].feature)
    vectors = np.array(vectors)
    if np.any(np.abs(vectors) < eps):
        raise AnchorUnderflow("anchor observation too close to zero for ratio features")
    powers = c.powers[list(layout.anchor_ids)]
    return AnchorSet(tuple(layout.anchor_ids), vectors, powers)


def differential_features(d: np.ndarray, anchors: AnchorSet) -> np.ndarray:
    """Concatenated |d - a_j| / a_j over anchors; gain-invariant by ratio."""
    d = np.asarray(d, dtype=float)
    return (np.abs(d[None, :] - anchors.vectors) / anchors.vectors).reshape(-1)


def differential_time_features(samples: np.ndarray, anchors: AnchorSet) -> np.ndarray:
    """Per-time-step ratio features for a window: sps x (n_cells * n_anchors)."""
    s = samples.T  # sps x n_cells
    feats = np.abs(s[:, None, :] - anchors.vectors[None, :, :]) / anchors.vectors[None, :, :]
    return feats.reshape(s.shape[0], -1)


def _anchor_design_matrix(anchors: AnchorSet, affine: bool) -> np.ndarray:
    S = anchors.powers.T  # 3 x m
    if affine:
        S = np.vstack([S, np.ones(S.shape[1])])
    return S


def _is_full_rank(S: np.ndarray) -> bool:
    sv = np.linalg.svd(S, compute_uv=False)
    return sv.size >= S.shape[0] and sv[-1] >= 1e-10 * sv[0]


def calibrate_H(anchors: AnchorSet, affine: bool | None = None) -> ChannelMatrix:
    """Least-squares channel estimate from anchor observations.

    Solves H S = Y over the stacked anchor powers S (with a ones row in
    affine mode) and observations Y.  With affine=None the affine column is
    used only when >= 4 anchors give a full-rank augmented matrix; note that
    constant-sum CSK power triples make the ones row linearly dependent, so
    standard anchors always fall back to the linear form.
    """
    m = anchors.n_anchors
    if affine is None:
        affine = m >= 4 and _is_full_rank(_anchor_design_matrix(anchors, True))
    need = 4 if affine else 3
    if m < need:
        raise Underdetermined(
            f"{m} anchors underdetermine the {'affine' if affine else 'linear'} channel"
        )
    S = _anchor_design_matrix(anchors, affine)
    if not _is_full_rank(S):
        raise RankDeficient("anchor power matrix is numerically rank-deficient")
    Y = anchors.vectors.T  # n_cells x m
    H, *_ = np.linalg.lstsq(S.T, Y.T, rcond=None)
    return ChannelMatrix(H.T, affine)


def ls_decode(window: SymbolWindow, H: ChannelMatrix, c: Constellation) -> int:
    """Recover the RGB power estimate for one window and map to a symbol.

    The LS power estimate is clamped, normalized to unit sum (decoding is
    thus invariant to overall channel gain), mapped to chromaticity through
    the constellation vertices, and decided by shortest Euclidean distance.
    """
    d = window.feature - H.offset
    s_hat, *_ = np.linalg.lstsq(H.linear_part, d, rcond=None)
    s_hat = np.where(s_hat < 0, 0.0, s_hat)
    total = s_hat.sum()
    vx = np.array([[v.x, v.y] for v in c.vertices])
    if total <= 1e-12:
        xy = vx.mean(axis=0)  # hopeless estimate: decide at the centroid
    else:
        xy = (s_hat / total) @ vx
    return nearest_symbol(ChromaticityPoint(float(xy[0]), float(xy[1])), c)


def symbols_to_bits(symbols, c: Constellation, pad_count: int = 0) -> str:
    """Concatenate bit patterns and drop the trailing padding bits."""
    if not 0 <= pad_count < c.bits_per_symbol:
        raise ValueError("pad_count must be < bits_per_symbol")
    bits = "".join(c.bit_map[int(s)] for s in symbols)
    return bits[: len(bits) - pad_count] if pad_count else bits


def payload_slot_range(layout: FrameLayout, n_payload: int) -> range:
    """Slot indices of the payload inside a framed packet."""
    start = layout.preamble_slots + layout.n_anchors * layout.slots_per_anchor
    return range(start, start + n_payload)
