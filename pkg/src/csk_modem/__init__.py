"""Color-shift-keying VLC modem with a multi-material solar-cell receiver.

Subpackages follow the signal path: `colorspace` (CIE 1931 geometry and
constellations), `phy_tx` (framing and power waveforms), `channel` (cell
array and ADC simulation), `phy_rx` (sync and least-squares decoding),
`neural` (biLSTM decoder trained from scratch), and `harness` (trials,
sweeps, and evaluation protocols).
"""

__version__ = "0.1.0"
