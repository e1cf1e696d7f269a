"""
Higher-order Poincare sphere bookkeeping.

The north pole is the pure ``e_L LG_m1`` state (``theta = 0``), the south
pole the pure ``e_R LG_m2`` state.
"""

# Standard Library
import math
from dataclasses import dataclass

# Scientific
import numpy as np
from scipy import linalg

# This module
from .errors import DomainError, RankError, ShapeMismatchError


UNIT_TOLERANCE = 1e-6

THETA_EDGES = np.array([0.0, 1, 3, 5, 7, 8]) * (math.pi / 8)
PHI_EDGES = np.arange(9) * (math.pi / 4)

NORTH_CAP = 0
SOUTH_CAP = 25
SECTOR_COUNT = 26
PHI_CELLS = 8


def bloch_from_angles(theta, phi) -> np.ndarray:
    """
    Unit Bloch vector ``(sin t cos p, sin t sin p, cos t)``.

    Accepts scalars or equally shaped arrays; the vector axis is last.

    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = np.asarray(phi, dtype=np.float64)
    if np.any((theta < 0) | (theta > math.pi)):
        raise DomainError('theta must lie in [0, pi]')

    sin_theta = np.sin(theta)
    return np.stack(
        [sin_theta * np.cos(phi), sin_theta * np.sin(phi), np.cos(theta)],
        axis=-1,
    )


def angles_from_bloch(vectors):
    """
    Invert :func:`bloch_from_angles`.

    Vectors are normalized first; ``phi`` is returned in ``[0, 2 pi)``.

    Returns:
        ``(theta, phi)`` arrays.

    """
    vectors = np.asarray(vectors, dtype=np.float64)
    norms = np.linalg.norm(vectors, axis=-1, keepdims=True)
    unit = vectors / np.where(norms > 0, norms, 1.0)
    theta = np.arccos(np.clip(unit[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(unit[..., 1], unit[..., 0]), 2 * math.pi)
    return theta, phi


def _reduce_phi(phi: np.ndarray) -> np.ndarray:
    phi = np.mod(phi, 2 * math.pi)
    return np.where(phi >= 2 * math.pi, 0.0, phi)


def sector_indices(theta, phi) -> np.ndarray:
    """
    Vectorized :func:`sector_index`.

    Returns:
        Integer array with the broadcast shape of the inputs.

    """
    theta = np.asarray(theta, dtype=np.float64)
    phi = _reduce_phi(np.asarray(phi, dtype=np.float64))
    if np.any((theta < 0) | (theta > math.pi) | np.isnan(theta)):
        raise DomainError('theta must lie in [0, pi]')

    # Half-open [lo, hi) cells; theta = pi folds back into the south cap.
    ring = np.searchsorted(THETA_EDGES, theta, side='right') - 1
    ring = np.minimum(ring, len(THETA_EDGES) - 2)
    cell = np.searchsorted(PHI_EDGES, phi, side='right') - 1
    cell = np.clip(cell, 0, PHI_CELLS - 1)

    index = 1 + PHI_CELLS * (ring - 1) + cell
    index = np.where(ring == 0, NORTH_CAP, index)
    index = np.where(ring == len(THETA_EDGES) - 2, SOUTH_CAP, index)
    return index.astype(np.int64)


def sector_index(theta: float, phi: float) -> int:
    """
    Sector of the 26-cell partition containing ``(theta, phi)``.

    Index 0 is the north cap ``theta < pi/8``, 25 the south cap
    ``theta >= 7 pi/8``. Band cells are ``1 + 8 * band + t`` with
    ``band`` 0..2 for ``theta`` in ``[pi/8, 3pi/8)``, ``[3pi/8, 5pi/8)``,
    ``[5pi/8, 7pi/8)`` and ``t`` the ``pi/4`` wide ``phi`` cell.

    Raises:
        DomainError: ``theta`` outside ``[0, pi]``.

    """
    return int(sector_indices(theta, phi))


@dataclass(frozen=True)
class SectorBounds:
    theta_lo: float
    theta_hi: float
    phi_lo: float
    phi_hi: float

    @property
    def is_cap(self) -> bool:
        return self.phi_hi - self.phi_lo >= 2 * math.pi

    def contains(self, theta, phi) -> np.ndarray:
        """Brute-force membership with the partition's boundary ownership."""
        theta = np.asarray(theta, dtype=np.float64)
        phi = _reduce_phi(np.asarray(phi, dtype=np.float64))
        if self.theta_hi >= math.pi:
            in_theta = (theta >= self.theta_lo) & (theta <= self.theta_hi)
        else:
            in_theta = (theta >= self.theta_lo) & (theta < self.theta_hi)
        in_phi = (phi >= self.phi_lo) & (phi < self.phi_hi)
        return in_theta & in_phi


def sector_bounds(index: int) -> SectorBounds:
    """Solid-angle patch of one sector."""
    if not 0 <= index < SECTOR_COUNT:
        raise DomainError('Sector index must lie in [0, 25]')

    if index == NORTH_CAP:
        return SectorBounds(0.0, THETA_EDGES[1], 0.0, 2 * math.pi)
    if index == SOUTH_CAP:
        return SectorBounds(THETA_EDGES[4], math.pi, 0.0, 2 * math.pi)

    band, cell = divmod(index - 1, PHI_CELLS)
    return SectorBounds(
        float(THETA_EDGES[band + 1]),
        float(THETA_EDGES[band + 2]),
        float(PHI_EDGES[cell]),
        float(PHI_EDGES[cell + 1]),
    )


def sample_in_sector(index: int, rng: np.random.Generator):
    """
    Draw ``(theta, phi)`` uniformly over the solid angle of a sector.

    Returns:
        Angles that :func:`sector_index` maps back to ``index``.

    """
    bounds = sector_bounds(index)
    cos_hi = math.cos(bounds.theta_lo)
    cos_lo = math.cos(bounds.theta_hi)
    theta = math.acos(min(1.0, max(-1.0, rng.uniform(cos_lo, cos_hi))))
    phi = rng.uniform(bounds.phi_lo, bounds.phi_hi)

    # Rounding can land exactly on an open upper edge.
    if index != SOUTH_CAP and theta >= bounds.theta_hi:
        theta = math.nextafter(bounds.theta_hi, 0.0)
    theta = max(theta, bounds.theta_lo)
    if phi >= bounds.phi_hi:
        phi = math.nextafter(bounds.phi_hi, 0.0)

    return theta, phi


def _check_unit(vector: np.ndarray, name: str):
    norm = np.linalg.norm(vector, axis=-1)
    if np.any(np.abs(norm - 1) > UNIT_TOLERANCE):
        raise DomainError(
            '{} is not a unit Bloch vector (norm {})'.format(name, norm)
        )


def fidelity(a, b):
    """
    Pure-state fidelity ``sqrt((1 + a.b) / 2)`` of two Bloch vectors.

    Works on single vectors or stacks along the last axis.

    Raises:
        DomainError: either input is not unit length within 1e-6.

    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    _check_unit(a, 'a')
    _check_unit(b, 'b')

    overlap = np.sum(a * b, axis=-1)
    value = np.sqrt(np.clip((1 + overlap) / 2, 0.0, 1.0))
    if value.ndim == 0:
        return float(value)
    return value


@dataclass(frozen=True, eq=False)
class SphereAlignment:
    """
    Similarity transform ``n = scale * rotation @ (p - offset)``.

    ``rotation`` is orthogonal and may include a reflection.
    """

    rotation: np.ndarray
    scale: float
    offset: np.ndarray

    def apply(self, points) -> np.ndarray:
        """Map points to estimated Bloch vectors of unit length."""
        points = np.asarray(points, dtype=np.float64)
        if points.shape[-1] != 3:
            raise ShapeMismatchError(
                'Alignment maps 3-vectors, got shape {}'.format(points.shape)
            )
        mapped = self.scale * (points - self.offset) @ self.rotation.T
        norms = np.linalg.norm(mapped, axis=-1, keepdims=True)
        return mapped / np.where(norms > 0, norms, 1.0)

    def residual_rms(self, points, references) -> float:
        points = np.asarray(points, dtype=np.float64)
        mapped = self.scale * (points - self.offset) @ self.rotation.T
        diff = mapped - np.asarray(references, dtype=np.float64)
        return float(np.sqrt(np.mean(np.sum(diff ** 2, axis=-1))))


def align_to_sphere(points, references) -> SphereAlignment:
    """
    Least-squares similarity fit of PCA points onto reference Bloch vectors.

    Minimizes ``sum |scale R (p_i - offset) - n_i|^2`` over orthogonal ``R``
    (reflections allowed, PCA axes carry no orientation), ``scale`` and
    ``offset``.

    Args:
        points: ``(N, 3)`` calibration points.
        references: ``(N, 3)`` Bloch vectors of the same states.

    Returns:
        The fitted transform.

    Raises:
        RankError: fewer than 4 pairs, or the points are coplanar.

    """
    points = np.asarray(points, dtype=np.float64)
    references = np.asarray(references, dtype=np.float64)
    if points.shape != references.shape or points.shape[-1:] != (3,):
        raise ShapeMismatchError(
            'Points {} and references {} must both be (N, 3)'.format(
                points.shape, references.shape
            )
        )
    if len(points) < 4:
        raise RankError('Alignment needs at least 4 point pairs')

    p_mean = points.mean(axis=0)
    n_mean = references.mean(axis=0)
    p_centered = points - p_mean
    n_centered = references - n_mean

    spread = linalg.svdvals(p_centered)
    if spread[-1] <= 1e-10 * max(spread[0], 1e-300):
        raise RankError('Calibration points are coplanar or degenerate')

    covariance = p_centered.T @ n_centered
    u, s, vt = linalg.svd(covariance)
    rotation = vt.T @ u.T
    scale = float(s.sum() / np.sum(p_centered ** 2))

    translation = n_mean - scale * rotation @ p_mean
    offset = -(rotation.T @ translation) / scale
    return SphereAlignment(rotation, scale, offset)
