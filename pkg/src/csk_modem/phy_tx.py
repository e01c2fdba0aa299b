"""Bits -> symbols -> framed packet -> per-slot RGB power waveform.

Packets carry a red/blue alternating preamble, a block of known anchor
symbols, the payload, and a red/blue end-of-transmission toggle.  Anchor
and control slots index a separate (default 4-CSK) constellation so the
payload order can vary independently.  LED efficiency calibration turns
power triples into commanded duty triples; the simulated LED divides the
efficiency back out, so calibrated channels emit equal optical power.
"""

import enum
from dataclasses import dataclass, field

import numpy as np

from . import colorspace
from .colorspace import Constellation, make_constellation, symbol_powers, vertex_indices

__all__ = [
    "EfficiencyTriple",
    "FrameLayout",
    "Packet",
    "PowerWaveform",
    "SlotKind",
    "apply_efficiency",
    "bits_to_symbols",
    "frame_packet",
    "packet_to_waveform",
    "symbol_powers",
]

# Per-channel light efficiencies relative to the red LED at full drive.
DEFAULT_EFFICIENCY = (1.00, 0.45, 0.75)


class SlotKind(enum.Enum):
    PREAMBLE = "preamble"
    ANCHOR = "anchor"
    PAYLOAD = "payload"
    ETB = "etb"


@dataclass(frozen=True)
class EfficiencyTriple:
    """Relative duty-to-power efficiencies of the R/G/B LED channels."""

    e_r: float = DEFAULT_EFFICIENCY[0]
    e_g: float = DEFAULT_EFFICIENCY[1]
    e_b: float = DEFAULT_EFFICIENCY[2]

    def __post_init__(self):
        for name, v in (("e_r", self.e_r), ("e_g", self.e_g), ("e_b", self.e_b)):
            if not 0 < v <= 1:
                raise ValueError(f"{name} must lie in (0, 1]")

    def as_array(self) -> np.ndarray:
        return np.array([self.e_r, self.e_g, self.e_b])


@dataclass(frozen=True)
class FrameLayout:
    """Slot counts and anchor identities for one packet."""

    preamble_slots: int = 10
    anchor_ids: tuple = (0, 1, 2, 3)
    slots_per_anchor: int = 2
    etb_state_slots: int = 10

    def __post_init__(self):
        if self.preamble_slots < 2 or self.preamble_slots % 2:
            raise ValueError("preamble_slots must be even and >= 2")
        ids = tuple(int(i) for i in self.anchor_ids)
        if not ids or len(set(ids)) != len(ids):
            raise ValueError("anchor_ids must be non-empty and distinct")
        if self.slots_per_anchor < 1:
            raise ValueError("slots_per_anchor must be >= 1")
        object.__setattr__(self, "anchor_ids", ids)

    @property
    def n_anchors(self) -> int:
        return len(self.anchor_ids)

    def total_slots(self, payload_len: int) -> int:
        return (
            self.preamble_slots
            + self.n_anchors * self.slots_per_anchor
            + payload_len
            + self.etb_state_slots
        )


@dataclass(frozen=True)
class Packet:
    """Fully resolved slot sequence of one transmission."""

    layout: FrameLayout
    payload_symbols: tuple
    slots: tuple  # (SlotKind, index) pairs; control slots index anchor_constellation
    constellation: Constellation
    anchor_constellation: Constellation

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    def slot_point(self, i: int):
        kind, idx = self.slots[i]
        c = self.constellation if kind is SlotKind.PAYLOAD else self.anchor_constellation
        return c.points[idx], c.powers[idx]


@dataclass(frozen=True)
class PowerWaveform:
    """Piecewise-constant per-slot RGB drive.

    `powers` are the pre-calibration optical power triples (rows sum to 1);
    `samples` are the commanded duty triples after efficiency calibration.
    """

    baud_hz: float
    powers: np.ndarray   # n_slots x 3
    samples: np.ndarray  # n_slots x 3, duty = powers * efficiency
    efficiency: EfficiencyTriple
    slot_kinds: tuple
    slot_symbols: tuple

    @property
    def n_slots(self) -> int:
        return self.powers.shape[0]

    @property
    def duration_s(self) -> float:
        return self.n_slots / self.baud_hz


def bits_to_symbols(bits, c: Constellation):
    """Pack a bit sequence into symbol indices, MSB first.

    Returns (symbols, pad_count); trailing zero bits are appended when the
    length is not a multiple of bits_per_symbol.
    """
    bitstr = _as_bitstring(bits)
    k = c.bits_per_symbol
    pad = (-len(bitstr)) % k
    bitstr += "0" * pad
    symbols = [int(bitstr[i : i + k], 2) for i in range(0, len(bitstr), k)]
    return symbols, pad


def _as_bitstring(bits) -> str:
    if isinstance(bits, str):
        s = bits.replace(" ", "")
    else:
        s = "".join(str(int(b)) for b in bits)
    if set(s) - {"0", "1"}:
        raise ValueError("bit sequence may only contain 0 and 1")
    return s


def apply_efficiency(p: np.ndarray, e: EfficiencyTriple) -> np.ndarray:
    """Commanded duty triple: component-wise power times efficiency."""
    return np.asarray(p, dtype=float) * e.as_array()


def frame_packet(
    payload,
    layout: FrameLayout,
    c: Constellation,
    anchor_constellation: Constellation | None = None,
) -> Packet:
    """Assemble preamble + anchors + payload + ETB into a slot sequence.

    The preamble alternates red/blue starting red; the ETB toggles red/blue
    with each state held for two slots.  Control slots index the anchor
    constellation (default: 4-CSK over the same vertices).
    """
    payload = tuple(int(s) for s in payload)
    if not payload:
        raise ValueError("payload must be non-empty")
    if any(s < 0 or s >= c.order for s in payload):
        raise ValueError("payload symbol out of range for the constellation")
    if anchor_constellation is None:
        anchor_constellation = make_constellation(4, c.vertices)
    if any(a >= anchor_constellation.order for a in layout.anchor_ids):
        raise ValueError("anchor id out of range for the anchor constellation")

    red, _, blue = vertex_indices(anchor_constellation)
    slots = []
    for k in range(layout.preamble_slots):
        slots.append((SlotKind.PREAMBLE, red if k % 2 == 0 else blue))
    for a in layout.anchor_ids:
        slots.extend((SlotKind.ANCHOR, a) for _ in range(layout.slots_per_anchor))
    slots.extend((SlotKind.PAYLOAD, s) for s in payload)
    for k in range(layout.etb_state_slots):
        slots.append((SlotKind.ETB, red if (k // 2) % 2 == 0 else blue))
    return Packet(
        layout=layout,
        payload_symbols=payload,
        slots=tuple(slots),
        constellation=c,
        anchor_constellation=anchor_constellation,
    )


def packet_to_waveform(
    pkt: Packet, baud_hz: float, e: EfficiencyTriple | None = None
) -> PowerWaveform:
    """One calibrated duty triple per slot, in slot order."""
    if baud_hz <= 0:
        raise ValueError("baud_hz must be positive")
    if e is None:
        e = EfficiencyTriple()
    powers = np.empty((pkt.n_slots, 3))
    for i in range(pkt.n_slots):
        _, p = pkt.slot_point(i)
        powers[i] = p
    duty = powers * e.as_array()
    kinds = tuple(kind for kind, _ in pkt.slots)
    syms = tuple(idx for _, idx in pkt.slots)
    return PowerWaveform(
        baud_hz=float(baud_hz),
        powers=powers,
        samples=duty,
        efficiency=e,
        slot_kinds=kinds,
        slot_symbols=syms,
    )


def waveform_rows(w: PowerWaveform):
    """Rows (slot, kind, symbol, p_r, p_g, p_b) of the duty waveform."""
    for i in range(w.n_slots):
        d = w.samples[i]
        yield (i, w.slot_kinds[i].value, w.slot_symbols[i],
               float(d[0]), float(d[1]), float(d[2]))
