"""CIE 1931 colorimetry and CSK constellation geometry.

Chromaticity follows the standard construction: tristimulus values X, Y, Z
are integrals of a spectral power distribution against the 2-degree standard
observer weights, and (x, y) = (X, Y) / (X + Y + Z).  Constellations for
orders 4/8/16 are barycentric layouts inside the triangle spanned by the
three LED chromaticities; each symbol carries the RGB power triple that
reproduces its chromaticity at constant total optical power.
"""

from dataclasses import dataclass, field
from functools import lru_cache
from importlib import resources

import numpy as np

from .errors import DegenerateTriangle, GridMismatch, OutOfGamut, SingularMatrix, ZeroTristimulus

CMF_DATA_FILE = "cie1931_2deg_5nm.txt"

# FWHM -> sigma for a Gaussian line shape (2*sqrt(2*ln 2), rounded as used throughout)
FWHM_TO_SIGMA = 2.3548

# Default LED line centers (nm): red 625, green 525, blue 465.
DEFAULT_LED_CENTERS_NM = (625.0, 525.0, 465.0)
DEFAULT_LED_FWHM_NM = 20.0

VALID_ORDERS = (4, 8, 16)


@dataclass(frozen=True)
class CmfTable:
    """Standard-observer color matching functions on an ascending nm grid."""

    wavelengths_nm: np.ndarray
    xbar: np.ndarray
    ybar: np.ndarray
    zbar: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=float)
        for name in ("xbar", "ybar", "zbar"):
            col = np.asarray(getattr(self, name), dtype=float)
            if col.shape != wl.shape:
                raise GridMismatch(f"{name} length {col.size} != grid length {wl.size}")
            if np.any(col < 0):
                raise ValueError(f"{name} must be non-negative")
            object.__setattr__(self, name, col)
        if wl.size < 2:
            raise ValueError("CMF grid needs at least 2 wavelengths")
        if np.any(np.diff(wl) <= 0):
            raise ValueError("CMF grid must be strictly ascending")
        object.__setattr__(self, "wavelengths_nm", wl)


@dataclass(frozen=True)
class Spectrum:
    """Non-negative spectral power on the same grid convention as CmfTable."""

    wavelengths_nm: np.ndarray
    power: np.ndarray

    def __post_init__(self):
        wl = np.asarray(self.wavelengths_nm, dtype=float)
        p = np.asarray(self.power, dtype=float)
        if p.shape != wl.shape:
            raise GridMismatch(f"power length {p.size} != grid length {wl.size}")
        if np.any(p < 0):
            raise ValueError("spectral power must be non-negative")
        object.__setattr__(self, "wavelengths_nm", wl)
        object.__setattr__(self, "power", p)

    def scaled(self, k: float) -> "Spectrum":
        return Spectrum(self.wavelengths_nm, self.power * k)


@dataclass(frozen=True)
class ChromaticityPoint:
    x: float
    y: float

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y])


@dataclass(frozen=True)
class Constellation:
    """Ordered CSK symbol set: chromaticities, power triples, bit mapping."""

    order: int
    vertices: tuple  # (red, green, blue) ChromaticityPoint
    points: tuple    # order ChromaticityPoints
    powers: np.ndarray  # order x 3, rows sum to 1
    bits_per_symbol: int
    bit_map: tuple   # index -> bit string, MSB first

    @property
    def xy(self) -> np.ndarray:
        return np.array([[p.x, p.y] for p in self.points])

    def min_pairwise_distance(self) -> float:
        xy = self.xy
        d = np.linalg.norm(xy[:, None, :] - xy[None, :, :], axis=-1)
        return float(d[np.triu_indices(self.order, k=1)].min())


def load_cmf(path) -> CmfTable:
    """Load a CMF table from whitespace-separated text (# comments allowed)."""
    data = np.loadtxt(path, comments="#")
    return CmfTable(data[:, 0], data[:, 1], data[:, 2], data[:, 3])


@lru_cache(maxsize=1)
def default_cmf() -> CmfTable:
    """The CIE 1931 2-degree observer table shipped with the package."""
    ref = resources.files(__package__).joinpath("data", CMF_DATA_FILE)
    with resources.as_file(ref) as path:
        return load_cmf(path)


def _check_grid(a: np.ndarray, b: np.ndarray):
    if a.shape != b.shape or not np.array_equal(a, b):
        raise GridMismatch("wavelength grids differ")


def xy_from_spectrum(s: Spectrum, cmf: CmfTable) -> ChromaticityPoint:
    """Chromaticity of a spectrum via trapezoidal integration against the CMFs."""
    _check_grid(s.wavelengths_nm, cmf.wavelengths_nm)
    wl = cmf.wavelengths_nm
    X = np.trapezoid(s.power * cmf.xbar, wl)
    Y = np.trapezoid(s.power * cmf.ybar, wl)
    Z = np.trapezoid(s.power * cmf.zbar, wl)
    total = X + Y + Z
    if total <= 1e-15:
        raise ZeroTristimulus("all-dark spectrum has no chromaticity")
    return ChromaticityPoint(X / total, Y / total)


def gaussian_line(center_nm: float, fwhm_nm: float, grid_nm: np.ndarray) -> Spectrum:
    """Unit-peak Gaussian emission line sampled on a wavelength grid."""
    if fwhm_nm <= 0:
        raise ValueError("fwhm_nm must be positive")
    sigma = fwhm_nm / FWHM_TO_SIGMA
    power = np.exp(-0.5 * ((grid_nm - center_nm) / sigma) ** 2)
    return Spectrum(grid_nm, power)


def led_chromaticity(center_nm: float, fwhm_nm: float, cmf: CmfTable) -> ChromaticityPoint:
    """Chromaticity of a Gaussian LED line on the CMF grid."""
    if not 380.0 < center_nm < 780.0:
        raise ValueError("LED center must lie strictly inside 380-780 nm")
    return xy_from_spectrum(gaussian_line(center_nm, fwhm_nm, cmf.wavelengths_nm), cmf)


@lru_cache(maxsize=1)
def default_vertices() -> tuple:
    """(red, green, blue) chromaticities for the default LED lines."""
    cmf = default_cmf()
    return tuple(
        led_chromaticity(c, DEFAULT_LED_FWHM_NM, cmf) for c in DEFAULT_LED_CENTERS_NM
    )


def mixture_matrix(vertices) -> np.ndarray:
    """3x3 matrix M with rows (x_R x_G x_B / y_R y_G y_B / 1 1 1).

    M @ P maps an RGB power triple (summing to 1) to [x, y, 1] of the mix.
    """
    (r, g, b) = vertices
    return np.array([[r.x, g.x, b.x], [r.y, g.y, b.y], [1.0, 1.0, 1.0]])


def triangle_area(vertices) -> float:
    (r, g, b) = vertices
    return 0.5 * abs((g.x - r.x) * (b.y - r.y) - (b.x - r.x) * (g.y - r.y))


def symbol_powers(sym: ChromaticityPoint, vertices) -> np.ndarray:
    """RGB power triple reproducing `sym` at unit total power.

    Solves M @ P = [x, y, 1] for the mixture matrix of the vertex triangle.
    Raises SingularMatrix for collinear vertices and OutOfGamut when the
    point lies outside the triangle (a power component < -1e-9).
    """
    M = mixture_matrix(vertices)
    try:
        p = np.linalg.solve(M, np.array([sym.x, sym.y, 1.0]))
    except np.linalg.LinAlgError as exc:
        raise SingularMatrix("collinear LED vertices") from exc
    if np.any(p < -1e-9):
        raise OutOfGamut(f"point ({sym.x:.4f}, {sym.y:.4f}) outside the LED triangle")
    p[(p >= -1e-12) & (p < 0)] = 0.0
    return p


# Barycentric layouts (weights on R, G, B).  8-CSK: vertices, edge midpoints,
# and two interior points chosen to spread the minimum pairwise distance.
# 16-CSK: the 15 degree-4 lattice points plus the centroid.
_LAYOUT_4 = [(1, 0, 0), (0, 1, 0), (0, 0, 1), (1 / 3, 1 / 3, 1 / 3)]
_LAYOUT_8 = _LAYOUT_4[:3] + [
    (0.5, 0.5, 0.0),
    (0.0, 0.5, 0.5),
    (0.5, 0.0, 0.5),
    (0.5, 0.25, 0.25),
    (0.25, 0.25, 0.5),
]
_LAYOUT_16 = [
    (i / 4, j / 4, (4 - i - j) / 4)
    for i in range(4, -1, -1)
    for j in range(4 - i, -1, -1)
] + [(1 / 3, 1 / 3, 1 / 3)]

_LAYOUTS = {4: _LAYOUT_4, 8: _LAYOUT_8, 16: _LAYOUT_16}


def make_constellation(order: int, vertices) -> Constellation:
    """Build the CSK constellation of a given order inside the vertex triangle."""
    if order not in VALID_ORDERS:
        raise ValueError(f"order must be one of {VALID_ORDERS}")
    if triangle_area(vertices) <= 1e-9:
        raise DegenerateTriangle("LED vertices are collinear")
    vx = np.array([[v.x, v.y] for v in vertices])
    points = []
    powers = []
    for w in _LAYOUTS[order]:
        xy = np.array(w) @ vx
        pt = ChromaticityPoint(float(xy[0]), float(xy[1]))
        points.append(pt)
        powers.append(symbol_powers(pt, vertices))
    bits = int(np.log2(order))
    bit_map = tuple(format(i, f"0{bits}b") for i in range(order))
    return Constellation(
        order=order,
        vertices=tuple(vertices),
        points=tuple(points),
        powers=np.array(powers),
        bits_per_symbol=bits,
        bit_map=bit_map,
    )


def nearest_symbol(p: ChromaticityPoint, c: Constellation) -> int:
    """Index of the constellation point closest to p (ties -> lowest index)."""
    d2 = (c.xy[:, 0] - p.x) ** 2 + (c.xy[:, 1] - p.y) ** 2
    return int(np.argmin(d2))


def vertex_indices(c: Constellation) -> tuple:
    """Indices of the points coinciding with the (R, G, B) vertices."""
    return tuple(nearest_symbol(v, c) for v in c.vertices)


def constellation_rows(c: Constellation):
    """Rows (index, x, y, p_r, p_g, p_b, bits) for CSV export."""
    for i, pt in enumerate(c.points):
        pr, pg, pb = (float(v) for v in c.powers[i])
        yield (i, float(pt.x), float(pt.y), pr, pg, pb, c.bit_map[i])
