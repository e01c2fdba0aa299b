"""Optical channel and multi-material solar-cell array simulator.

The receiver is an array of cells with distinct spectral responsivities.
Cell i sees LED channel c through the coupling K[i, c] = integral of its
responsivity against the (unit-power) LED line spectrum; symbols mix those
couplings linearly.  Propagation applies inverse-square distance loss, a DC
ambient term, a per-cell first-order low-pass (slow cells smear fast
symbols), additive Gaussian noise, and a 12-bit ADC.

The shipped default profiles are synthetic stand-ins with the qualitative
spectral diversity of a mixed poly-Si / amorphous / organic array; an
all-silicon variant with nearly identical broadband curves is provided as
the inseparable counterpoint.
"""

import json
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.signal import lfilter

from .colorspace import Spectrum, default_cmf, gaussian_line
from .errors import GridMismatch, SaturatedTrace
from .phy_tx import DEFAULT_EFFICIENCY, PowerWaveform

# Lux-to-power scale: per unit ambient coupling and unit gain, one lux adds
# 1/5000 of the inverse-square factor at the 25 cm reference distance.
# Simulator constant, not a photometric claim.
AMBIENT_LUX_SCALE = (1.0 / 0.25**2) / 5000.0

# ADC reference chosen so the 25 cm / 0 lux reference peaks near 60% of range.
DEFAULT_FULL_SCALE_V = 62.0

DEFAULT_TAU_MS = (0.2, 0.2, 0.3, 0.4, 0.5, 1.2, 0.6)

DEFAULT_DISTANCE_M = 0.25
DEFAULT_FS_HZ = 2000.0
DEFAULT_ADC_BITS = 12
DEFAULT_NOISE_SIGMA = 0.02


@dataclass(frozen=True)
class CellProfile:
    """One solar cell: spectral responsivity, amplifier gain, response time."""

    name: str
    responsivity: Spectrum
    gain: float = 1.0
    tau_ms: float = 0.0

    def __post_init__(self):
        if self.gain <= 0:
            raise ValueError("gain must be positive")
        if self.tau_ms < 0:
            raise ValueError("tau_ms must be non-negative")
        if not np.any(self.responsivity.power > 0):
            raise ValueError("responsivity must not be all-zero")


def default_led_spectra(fwhm_nm: float = 20.0) -> tuple:
    """Gaussian R/G/B LED lines (625/525/465 nm) on the CMF grid."""
    grid = default_cmf().wavelengths_nm
    return tuple(gaussian_line(c, fwhm_nm, grid) for c in (625.0, 525.0, 465.0))


def flat_spectrum() -> Spectrum:
    grid = default_cmf().wavelengths_nm
    return Spectrum(grid, np.ones_like(grid))


def _unit_power(s: Spectrum) -> np.ndarray:
    total = np.trapezoid(s.power, s.wavelengths_nm)
    if total <= 0:
        raise ValueError("spectrum has no power to normalize")
    return s.power / total


def coupling_matrix(profiles, led_spectra) -> np.ndarray:
    """N_cells x 3 coupling of unit-power LED lines into each cell."""
    grid = profiles[0].responsivity.wavelengths_nm
    for p in profiles:
        if not np.array_equal(p.responsivity.wavelengths_nm, grid):
            raise GridMismatch("cell profile grids differ")
    K = np.empty((len(profiles), len(led_spectra)))
    for c, led in enumerate(led_spectra):
        if not np.array_equal(led.wavelengths_nm, grid):
            raise GridMismatch("LED spectrum grid differs from cell grid")
        lc = _unit_power(led)
        for i, p in enumerate(profiles):
            K[i, c] = np.trapezoid(p.responsivity.power * lc, grid)
    return K


def ambient_coupling(profiles, ambient_spectrum: Spectrum) -> np.ndarray:
    """Per-cell coupling of the (unit-power) ambient spectrum."""
    amb = _unit_power(ambient_spectrum)
    grid = ambient_spectrum.wavelengths_nm
    out = np.empty(len(profiles))
    for i, p in enumerate(profiles):
        if not np.array_equal(p.responsivity.wavelengths_nm, grid):
            raise GridMismatch("ambient spectrum grid differs from cell grid")
        out[i] = np.trapezoid(p.responsivity.power * amb, grid)
    return out


@dataclass
class ChannelConfig:
    """Everything the simulated channel needs besides the waveform."""

    profiles: tuple = None
    led_spectra: tuple = None
    distance_m: float = DEFAULT_DISTANCE_M
    ambient_lux: float = 0.0
    ambient_spectrum: Spectrum = None
    noise_sigma: float = DEFAULT_NOISE_SIGMA
    adc_bits: int = DEFAULT_ADC_BITS
    fs_hz: float = DEFAULT_FS_HZ
    full_scale_v: float = DEFAULT_FULL_SCALE_V
    seed: int = 0

    def __post_init__(self):
        if self.profiles is None:
            self.profiles = default_profiles()
        if self.led_spectra is None:
            self.led_spectra = default_led_spectra()
        if self.ambient_spectrum is None:
            self.ambient_spectrum = flat_spectrum()
        if self.distance_m <= 0:
            raise ValueError("distance_m must be positive")
        if not 8 <= self.adc_bits <= 16:
            raise ValueError("adc_bits must lie in [8, 16]")
        if len(self.profiles) < 1:
            raise ValueError("need at least one cell profile")

    @property
    def n_cells(self) -> int:
        return len(self.profiles)

    def gains(self) -> np.ndarray:
        return np.array([p.gain for p in self.profiles])

    def taus_s(self) -> np.ndarray:
        return np.array([p.tau_ms for p in self.profiles]) / 1000.0


@dataclass(frozen=True)
class AdcTrace:
    """Per-cell digitized voltage time series; the receiver's only input."""

    fs_hz: float
    codes: np.ndarray      # n_cells x n_samples, int
    volts: np.ndarray      # dequantized codes
    raw_volts: np.ndarray  # pre-quantization (post noise/filter), for oracles
    full_scale_v: float
    adc_bits: int

    @property
    def n_cells(self) -> int:
        return self.codes.shape[0]

    @property
    def n_samples(self) -> int:
        return self.codes.shape[1]

    def as_unquantized(self) -> "AdcTrace":
        """Copy whose volts bypass the ADC (diagnostic use)."""
        return AdcTrace(
            self.fs_hz, self.codes, self.raw_volts, self.raw_volts,
            self.full_scale_v, self.adc_bits,
        )


def samples_per_slot(fs_hz: float, baud_hz: float) -> int:
    ratio = fs_hz / baud_hz
    sps = int(round(ratio))
    if sps < 1 or abs(ratio - sps) > 1e-9:
        raise ValueError(f"fs {fs_hz} is not an integer multiple of baud {baud_hz}")
    return sps


def propagate(w: PowerWaveform, cfg: ChannelConfig, pad_slots=(0, 0)) -> AdcTrace:
    """Simulate the optical link and ADC capture of one waveform.

    pad_slots = (before, after) ambient-only slots around the packet, so the
    receiver has silence to synchronize against.
    """
    sps = samples_per_slot(cfg.fs_hz, w.baud_hz)
    K = coupling_matrix(cfg.profiles, cfg.led_spectra)
    gains = cfg.gains()

    # LED model: commanded duty divided by the true channel efficiencies.
    emission = w.samples / np.array(DEFAULT_EFFICIENCY)

    sig = (K @ emission.T) / cfg.distance_m**2  # n_cells x n_slots
    amb = cfg.ambient_lux * ambient_coupling(cfg.profiles, cfg.ambient_spectrum) \
        * AMBIENT_LUX_SCALE
    ideal = gains[:, None] * (sig + amb[:, None])

    before, after = pad_slots
    pad_col = (gains * amb)[:, None]
    cols = []
    if before:
        cols.append(np.repeat(pad_col, before, axis=1))
    cols.append(ideal)
    if after:
        cols.append(np.repeat(pad_col, after, axis=1))
    slot_levels = np.concatenate(cols, axis=1)
    x = np.repeat(slot_levels, sps, axis=1)

    # First-order cell dynamics; alpha = 1 - exp(-1/(fs*tau)), zero initial state.
    taus = cfg.taus_s()
    y = np.empty_like(x)
    for i in range(cfg.n_cells):
        if taus[i] == 0:
            y[i] = x[i]
        else:
            alpha = 1.0 - np.exp(-1.0 / (cfg.fs_hz * taus[i]))
            y[i] = lfilter([alpha], [1.0, -(1.0 - alpha)], x[i])

    rng = np.random.default_rng(cfg.seed)
    y = y + rng.normal(0.0, cfg.noise_sigma * cfg.full_scale_v, size=y.shape)

    q = 2**cfg.adc_bits - 1
    n_clipped = int(np.count_nonzero(y > cfg.full_scale_v))
    if n_clipped > 0.01 * y.size:
        warnings.warn(
            f"{n_clipped}/{y.size} samples clipped at full scale", SaturatedTrace
        )
    codes = np.clip(np.rint(y / cfg.full_scale_v * q), 0, q).astype(np.int32)
    volts = codes * (cfg.full_scale_v / q)
    return AdcTrace(cfg.fs_hz, codes, volts, y, cfg.full_scale_v, cfg.adc_bits)


# ---------------------------------------------------------------------------
# Shipped cell profile sets


def _gauss(grid, center, amp, sigma):
    return amp * np.exp(-0.5 * ((grid - center) / sigma) ** 2)


def _calibrate_gains(profiles) -> list:
    """Scale gains so every cell reads 1.0 for equal-power white at 1 m."""
    K = coupling_matrix(profiles, default_led_spectra())
    white = K @ np.full(3, 1.0 / 3.0)
    return [
        CellProfile(p.name, p.responsivity, float(p.gain / w), p.tau_ms)
        for p, w in zip(profiles, white)
    ]


def default_profiles() -> tuple:
    """Seven synthetic cells: poly-Si, amorphous-Si, five distinct organics."""
    grid = default_cmf().wavelengths_nm
    t = (grid - 380.0) / 400.0
    curves = [
        ("poly_si", 1.0 - 0.65 * t),
        ("amorph_si", 0.12 + _gauss(grid, 470, 0.88, 70)),
        ("organic_a", 0.04 + _gauss(grid, 430, 0.90, 30) + _gauss(grid, 590, 0.55, 45)),
        ("organic_b", 0.04 + _gauss(grid, 480, 0.90, 30) + _gauss(grid, 660, 0.45, 35)),
        ("organic_c", 0.04 + _gauss(grid, 530, 0.95, 35) + _gauss(grid, 710, 0.35, 45)),
        ("organic_d", 0.04 + _gauss(grid, 430, 0.45, 25) + _gauss(grid, 620, 0.95, 32)),
        ("organic_e", 0.04 + _gauss(grid, 515, 0.60, 26) + _gauss(grid, 680, 0.70, 35)),
    ]
    profiles = [
        CellProfile(name, Spectrum(grid, power), 1.0, tau)
        for (name, power), tau in zip(curves, DEFAULT_TAU_MS)
    ]
    return tuple(_calibrate_gains(profiles))


def silicon_profiles() -> tuple:
    """Seven nearly identical broadband silicon cells (the failure mode)."""
    grid = default_cmf().wavelengths_nm
    t = (grid - 380.0) / 400.0
    profiles = []
    for i in range(7):
        tilt = 1.0 + 0.01 * (i - 3)  # per-cell fabrication spread, < +/- 3%
        power = (1.0 - 0.45 * t) ** tilt
        profiles.append(
            CellProfile(f"silicon_{i}", Spectrum(grid, power), 1.0, DEFAULT_TAU_MS[i])
        )
    return tuple(_calibrate_gains(profiles))


def steady_state_voltages(profiles, powers, distance_m=DEFAULT_DISTANCE_M,
                          led_spectra=None) -> np.ndarray:
    """Noiseless settled cell voltages for each RGB power triple (rows)."""
    if led_spectra is None:
        led_spectra = default_led_spectra()
    K = coupling_matrix(profiles, led_spectra)
    gains = np.array([p.gain for p in profiles])
    return (gains[:, None] * (K @ np.atleast_2d(powers).T) / distance_m**2).T


def separation_ratio(profiles, powers, distance_m=DEFAULT_DISTANCE_M,
                     noise_sigma=DEFAULT_NOISE_SIGMA,
                     full_scale_v=DEFAULT_FULL_SCALE_V) -> float:
    """Min pairwise distance of color centroids in cell-voltage space, in
    units of the per-sample noise standard deviation."""
    v = steady_state_voltages(profiles, powers, distance_m)
    n = v.shape[0]
    dists = [
        np.linalg.norm(v[i] - v[j]) for i in range(n) for j in range(i + 1, n)
    ]
    return float(min(dists) / (noise_sigma * full_scale_v))


# ---------------------------------------------------------------------------
# Profile persistence


def save_profiles(profiles, path):
    payload = {
        "profiles": [
            {
                "name": p.name,
                "gain": p.gain,
                "tau_ms": p.tau_ms,
                "wavelengths_nm": p.responsivity.wavelengths_nm.tolist(),
                "responsivity": p.responsivity.power.tolist(),
            }
            for p in profiles
        ]
    }
    with open(path, "w") as f:
        json.dump(payload, f, indent=1)
        f.write("\n")


def load_profiles(path) -> tuple:
    with open(path) as f:
        payload = json.load(f)
    return tuple(
        CellProfile(
            d["name"],
            Spectrum(np.array(d["wavelengths_nm"]), np.array(d["responsivity"])),
            d["gain"],
            d["tau_ms"],
        )
        for d in payload["profiles"]
    )
