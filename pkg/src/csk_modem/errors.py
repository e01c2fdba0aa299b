"""Exception types and warnings shared across the modem pipeline."""


class CskModemError(Exception):
    """Base class for all csk-modem errors."""


class ZeroTristimulus(CskModemError):
    """Spectrum integrates to (near) zero light; chromaticity undefined."""


class DegenerateTriangle(CskModemError):
    """Constellation vertices are collinear."""


class SingularMatrix(CskModemError):
    """Mixture matrix cannot be inverted."""


class OutOfGamut(CskModemError):
    """Chromaticity point lies outside the LED triangle."""


class GridMismatch(CskModemError):
    """Wavelength grids of two spectral curves differ."""


class SyncNotFound(CskModemError):
    """Preamble correlation peak below the detection threshold."""


class OutOfBounds(CskModemError):
    """Requested slot range exceeds the captured trace."""


class AnchorUnderflow(CskModemError):
    """An anchor observation is too close to zero for ratio features."""


class Underdetermined(CskModemError):
    """Too few anchors to estimate the channel matrix."""


class RankDeficient(CskModemError):
    """Anchor power matrix is numerically rank-deficient."""


class ShapeMismatch(CskModemError):
    """Array shapes disagree with the model or batch layout."""


class LengthMismatch(CskModemError):
    """Bit sequences of unequal length."""


class EmptyResults(CskModemError):
    """No trial results to report."""


class ConfigError(CskModemError):
    """Malformed or unknown key in a config file."""


class SaturatedTrace(UserWarning):
    """More than 1% of ADC samples clipped at full scale."""
