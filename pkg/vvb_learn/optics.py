"""
Vector vortex beam synthesis and Stokes polarimetry on a pixel grid.

Jones vectors are stored in the circular basis ``(E_L, E_R)``. The linear
analyzer states are frozen as::

    H = (e_L + e_R) / sqrt(2)      V = -i (e_L - e_R) / sqrt(2)
    D = (H + V) / sqrt(2)          A = (H - V) / sqrt(2)

Grid row 0 holds the most negative ``y``; ``y`` grows with the row index
and ``x`` with the column index.
"""

# Standard Library
import math
from dataclasses import dataclass
from functools import lru_cache

# Scientific
import numpy as np
from scipy.special import eval_genlaguerre

# This module
from .errors import DomainError, ShapeMismatchError


SQRT2 = math.sqrt(2.0)

CLEAN_THRESHOLD = 1e-6
NOISY_THRESHOLD = 1e-2

# Trigonometric weights below this are exactly zero (poles of the sphere).
_EXACT_ZERO = 1e-15

# Reduced azimuths are rounded to this many decimals, so phi and phi + 2 pi
# land on the same double.
PHI_DIGITS = 12

ANALYZERS = {
    'H': (1 / SQRT2, 1 / SQRT2),
    'V': (-1j / SQRT2, 1j / SQRT2),
    'D': ((1 - 1j) / 2, (1 + 1j) / 2),
    'A': ((1 + 1j) / 2, (1 - 1j) / 2),
    'L': (1.0, 0.0),
    'R': (0.0, 1.0),
}

BASES = (('H', 'V'), ('D', 'A'), ('L', 'R'))


@dataclass(frozen=True)
class GridSpec:
    resolution: int = 64
    half_extent: float = 4.0
    waist: float = 1.0

    def __post_init__(self):
        if int(self.resolution) != self.resolution or self.resolution < 8:
            raise DomainError(
                'Grid resolution must be an integer >= 8, got {}'.format(
                    self.resolution
                )
            )
        if not self.half_extent > 0:
            raise DomainError('Grid half_extent must be positive')
        if not self.waist > 0:
            raise DomainError('Beam waist must be positive')

        object.__setattr__(self, 'resolution', int(self.resolution))
        object.__setattr__(self, 'half_extent', float(self.half_extent))
        object.__setattr__(self, 'waist', float(self.waist))

    @property
    def pixel_size(self) -> float:
        return 2 * self.half_extent / self.resolution

    @property
    def pixel_area(self) -> float:
        return self.pixel_size ** 2

    @property
    def shape(self):
        return self.resolution, self.resolution

    def coordinates(self):
        """
        Pixel-center coordinates.

        Returns:
            ``(x, y)`` arrays of shape ``(resolution, resolution)``.

        """
        return _coordinates(self)


@lru_cache(maxsize=16)
def _coordinates(grid: GridSpec):
    centers = -grid.half_extent + (np.arange(grid.resolution) + 0.5) * (
        grid.pixel_size
    )
    x, y = np.meshgrid(centers, centers)
    x.flags.writeable = False
    y.flags.writeable = False
    return x, y


@dataclass(frozen=True)
class VVBState:
    m1: int
    m2: int
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if self.m1 == self.m2:
            raise DomainError(
                'VVB needs distinct OAM indices, got m1 = m2 = {}'.format(
                    self.m1
                )
            )
        if not 0.0 <= self.theta <= math.pi:
            raise DomainError(
                'theta must lie in [0, pi], got {}'.format(self.theta)
            )

        phi = round(float(self.phi) % (2 * math.pi), PHI_DIGITS)
        if phi >= 2 * math.pi:
            phi = 0.0
        object.__setattr__(self, 'phi', phi)
        object.__setattr__(self, 'theta', float(self.theta))
        object.__setattr__(self, 'm1', int(self.m1))
        object.__setattr__(self, 'm2', int(self.m2))


@dataclass(frozen=True, eq=False)
class JonesField:
    grid: GridSpec
    e_l: np.ndarray
    e_r: np.ndarray

    def __post_init__(self):
        for name in ('e_l', 'e_r'):
            values = np.asarray(getattr(self, name), dtype=np.complex128)
            if values.shape != self.grid.shape:
                raise ShapeMismatchError(
                    '{} has shape {}, grid expects {}'.format(
                        name, values.shape, self.grid.shape
                    )
                )
            if not np.all(np.isfinite(values)):
                raise DomainError('Jones field has non-finite entries')
            object.__setattr__(self, name, values)

    @property
    def resolution(self) -> int:
        return self.grid.resolution

    def power(self) -> float:
        """Total power ``sum(|E_L|^2 + |E_R|^2) * pixel_area``."""
        density = np.abs(self.e_l) ** 2 + np.abs(self.e_r) ** 2
        return float(density.sum() * self.grid.pixel_area)

    def scaled(self, factor: complex) -> 'JonesField':
        return JonesField(self.grid, self.e_l * factor, self.e_r * factor)


@dataclass(frozen=True, eq=False)
class StokesImage:
    s1: np.ndarray
    s2: np.ndarray
    s3: np.ndarray
    intensity: np.ndarray
    threshold: float = CLEAN_THRESHOLD

    def __post_init__(self):
        shape = np.shape(self.intensity)
        if len(shape) != 2 or shape[0] != shape[1]:
            raise ShapeMismatchError(
                'Stokes planes must be square, got {}'.format(shape)
            )
        for name in ('s1', 's2', 's3'):
            if np.shape(getattr(self, name)) != shape:
                raise ShapeMismatchError(
                    '{} has shape {}, intensity has {}'.format(
                        name, np.shape(getattr(self, name)), shape
                    )
                )

    @classmethod
    def from_planes(cls, planes: np.ndarray) -> 'StokesImage':
        """Build an image from a ``(4, R, R)`` stack ``s1, s2, s3, I``."""
        planes = np.asarray(planes)
        if planes.ndim != 3 or planes.shape[0] != 4:
            raise ShapeMismatchError(
                'Expected (4, R, R) planes, got {}'.format(planes.shape)
            )
        return cls(planes[0], planes[1], planes[2], planes[3])

    @property
    def resolution(self) -> int:
        return int(np.shape(self.intensity)[0])

    def planes(self) -> np.ndarray:
        return np.stack([self.s1, self.s2, self.s3, self.intensity])

    def features(self) -> np.ndarray:
        """Concatenated ``s1, s2, s3`` planes; intensity is left out."""
        return np.concatenate(
            [np.ravel(self.s1), np.ravel(self.s2), np.ravel(self.s3)]
        )

    def norm_squared(self) -> np.ndarray:
        return (
            np.asarray(self.s1) ** 2
            + np.asarray(self.s2) ** 2
            + np.asarray(self.s3) ** 2
        )

    def lit(self) -> np.ndarray:
        """Mask of pixels above the dark threshold."""
        intensity = np.asarray(self.intensity)
        peak = intensity.max(initial=0.0)
        if peak <= 0:
            return np.zeros(intensity.shape, dtype=bool)
        return intensity >= self.threshold * peak


@dataclass(frozen=True, eq=False)
class RGBImage:
    channels: np.ndarray

    @property
    def resolution(self) -> int:
        return int(self.channels.shape[0])


def lg_amplitude(m: int, r, az, w: float, p: int = 0):
    """
    Unnormalized Laguerre-Gauss amplitude at the waist plane.

    ``(r sqrt2 / w)^|m| L_p^|m|(2 r^2 / w^2) exp(-r^2 / w^2) exp(i m az)``.
    Only ``p`` in {0, 1} is supported; ``p = 1`` feeds the mode impurity
    model of :mod:`vvb_learn.noise`.

    Args:
        m: Azimuthal index.
        r: Radius (scalar or array), same units as ``w``.
        az: Azimuth in radians.
        w: Beam waist.
        p: Radial index.

    Returns:
        Complex amplitude with the shape of ``r``.

    """
    if not w > 0:
        raise DomainError('Beam waist must be positive')
    if p not in (0, 1):
        raise DomainError('Only radial indices 0 and 1 are modelled')

    r = np.asarray(r, dtype=np.float64)
    az = np.asarray(az, dtype=np.float64)
    order = abs(int(m))
    rho2 = 2 * r ** 2 / w ** 2

    radial = (r * SQRT2 / w) ** order * np.exp(-(r ** 2) / w ** 2)
    if p:
        radial = radial * eval_genlaguerre(p, order, rho2)

    result = radial * np.exp(1j * m * az)
    if result.ndim == 0:
        return complex(result)
    return result


def _normalize(mode: np.ndarray, pixel_area: float) -> np.ndarray:
    norm = math.sqrt(float(np.sum(np.abs(mode) ** 2)) * pixel_area)
    if norm == 0:
        return mode
    return mode / norm


def _mode(m, r, az, waist, impurity, pixel_area):
    mode = _normalize(lg_amplitude(m, r, az, waist), pixel_area)
    if impurity:
        radial = _normalize(lg_amplitude(m, r, az, waist, p=1), pixel_area)
        mode = math.sqrt(1 - impurity ** 2) * mode + impurity * radial
        mode = _normalize(mode, pixel_area)

    return mode


def _weights(theta: float):
    c = math.cos(theta / 2)
    s = math.sin(theta / 2)
    if abs(c) < _EXACT_ZERO:
        c = 0.0
    if abs(s) < _EXACT_ZERO:
        s = 0.0
    return c, s


def synthesize(
    state: VVBState,
    grid: GridSpec,
    center=(0.0, 0.0),
    waist: float = None,
    impurity: float = 0.0,
) -> JonesField:
    """
    Superpose the two circular components of a VVB on the grid.

    Args:
        state: Sphere coordinates and OAM pair.
        grid: Sampling grid.
        center: Beam axis position ``(x, y)``.
        waist: Beam waist, defaults to ``grid.waist``.
        impurity: Amplitude of the ``p = 1`` admixture.

    Returns:
        Jones field with unit total power.

    """
    if waist is None:
        waist = grid.waist

    x, y = grid.coordinates()
    xs = x - center[0]
    ys = y - center[1]
    r = np.hypot(xs, ys)
    az = np.arctan2(ys, xs)

    area = grid.pixel_area
    c, s = _weights(state.theta)
    e_l = c * _mode(state.m1, r, az, waist, impurity, area)
    e_r = (np.exp(1j * state.phi) * s) * _mode(
        state.m2, r, az, waist, impurity, area
    )
    return JonesField(grid, e_l, e_r)


def render(state: VVBState, grid: GridSpec = None) -> JonesField:
    """
    Ideal VVB field.

    ``E = e_L cos(theta/2) LG_m1 + e_R e^{i phi} sin(theta/2) LG_m2``.
    Each LG factor is normalized numerically on the grid before weighting,
    so the returned field carries total power 1.

    """
    if grid is None:
        grid = GridSpec()
    return synthesize(state, grid)


def rotate_polarization(field: JonesField, angle: float) -> JonesField:
    """Rotate every polarization ellipse by ``angle`` radians."""
    if angle == 0:
        return field
    return JonesField(
        field.grid,
        field.e_l * np.exp(-1j * angle),
        field.e_r * np.exp(1j * angle),
    )


def basis_intensities(field: JonesField) -> dict:
    """
    Intensity behind each of the six analyzers.

    Returns:
        Analyzer name (key) - intensity array (value).

    """
    intensities = {}
    for name, (a_l, a_r) in ANALYZERS.items():
        amplitude = np.conj(a_l) * field.e_l + np.conj(a_r) * field.e_r
        intensities[name] = amplitude.real ** 2 + amplitude.imag ** 2

    return intensities


def stokes_from_intensities(
    intensities: dict, threshold: float = CLEAN_THRESHOLD
) -> StokesImage:
    """
    Normalized Stokes planes from the six analyzer intensities.

    ``S_j = (I_j1 - I_j2) / (I_j1 + I_j2)``; the intensity plane is
    ``I_H + I_V`` scaled to peak 1. Pixels below ``threshold * peak`` are
    reported as unpolarized ``(0, 0, 0)``.

    """
    total = intensities['H'] + intensities['V']
    peak = float(total.max(initial=0.0))
    if peak <= 0:
        zeros = np.zeros_like(total)
        return StokesImage(zeros, zeros.copy(), zeros.copy(), zeros.copy())

    dark = total < threshold * peak
    planes = []
    for first, second in BASES:
        a = intensities[first]
        b = intensities[second]
        norm = a + b
        with np.errstate(invalid='ignore', divide='ignore'):
            s = np.where(norm > 0, (a - b) / norm, 0.0)
        s[dark] = 0.0
        planes.append(s)

    return StokesImage(*planes, total / peak, threshold=threshold)


def stokes(field: JonesField) -> StokesImage:
    """Measure the Stokes image of a field in the H/V, D/A and L/R bases."""
    return stokes_from_intensities(basis_intensities(field), CLEAN_THRESHOLD)


def to_rgb(img: StokesImage) -> RGBImage:
    """Color-encode ``(S1, S2, S3)`` as ``(r, g, b)``; unpolarized is grey."""
    planes = np.stack([img.s1, img.s2, img.s3], axis=-1)
    channels = np.floor(255 * (planes + 1) / 2 + 0.5)
    return RGBImage(np.clip(channels, 0, 255).astype(np.uint8))


def ppm_bytes(rgb: RGBImage) -> bytes:
    """Binary PPM (P6) with +y at the top of the picture."""
    rows = np.ascontiguousarray(np.flipud(rgb.channels))
    height, width = rows.shape[:2]
    header = 'P6\n{} {}\n255\n'.format(width, height).encode('ascii')
    return header + rows.tobytes()
