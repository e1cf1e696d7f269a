"""Linear PCA over flattened Stokes planes."""

# Standard Library
import logging
from dataclasses import dataclass

# Scientific
import numpy as np
from scipy import linalg

# This module
from .dataset import Dataset
from .errors import DomainError, FormatError, ShapeMismatchError
from .fileformat import ModelFile
from .optics import StokesImage


logger = logging.getLogger(__name__)

# Above this many samples (and when N < D) the fit diagonalizes the N x N
# Gram matrix instead of keeping the full N x D right factor.
GRAM_SAMPLE_LIMIT = 2000

# Gram eigenvalues below this fraction of the largest count as zero variance.
GRAM_RANK_TOL = 1e-10

DEFAULT_BINS = 30


@dataclass(frozen=True, eq=False)
class PCAModel:
    mean: np.ndarray
    components: np.ndarray
    explained_variance: np.ndarray
    total_variance: float
    resolution: int = None

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def dimension(self) -> int:
        return self.components.shape[1]

    @property
    def explained_share(self) -> np.ndarray:
        """Fraction of the total variance carried by each component."""
        if self.total_variance <= 0:
            return np.zeros_like(self.explained_variance)
        return self.explained_variance / self.total_variance

    def _features(self, data) -> np.ndarray:
        if isinstance(data, Dataset):
            x = data.features()
        elif isinstance(data, StokesImage):
            x = data.features()[np.newaxis]
        else:
            x = np.asarray(data, dtype=np.float64)
            if x.ndim == 1:
                x = x[np.newaxis]
        if x.ndim != 2 or x.shape[1] != self.dimension:
            raise ShapeMismatchError(
                'PCA model expects {}-dim features, got shape {}'.format(
                    self.dimension, x.shape
                )
            )
        return x

    def transform(self, data) -> np.ndarray:
        """``(N, n_c)`` coordinates of a dataset, image or feature matrix."""
        return (self._features(data) - self.mean) @ self.components.T

    def reconstruct(self, coordinates) -> np.ndarray:
        coordinates = np.atleast_2d(np.asarray(coordinates, dtype=np.float64))
        if coordinates.shape[1] > self.n_components:
            raise ShapeMismatchError(
                'Got {} coordinates for {} components'.format(
                    coordinates.shape[1], self.n_components
                )
            )
        used = self.components[: coordinates.shape[1]]
        return self.mean + coordinates @ used

    def truncated(self, n_components: int) -> 'PCAModel':
        """The same fit restricted to its leading ``n_components``."""
        if not 1 <= n_components <= self.n_components:
            raise DomainError(
                'Cannot keep {} of {} components'.format(
                    n_components, self.n_components
                )
            )
        return PCAModel(
            self.mean,
            self.components[:n_components],
            self.explained_variance[:n_components],
            self.total_variance,
            self.resolution,
        )

    def to_file(self) -> ModelFile:
        return ModelFile(
            'pca',
            {
                'resolution': self.resolution,
                'total_variance': self.total_variance,
            },
            {
                'mean': self.mean,
                'components': self.components,
                'explained_variance': self.explained_variance,
            },
        )

    @classmethod
    def from_file(cls, model: ModelFile) -> 'PCAModel':
        if model.kind != 'pca':
            raise FormatError(
                'Expected a pca model, got {}'.format(model.kind)
            )
        return cls(
            mean=model.tensor('mean'),
            components=model.tensor('components'),
            explained_variance=model.tensor('explained_variance'),
            total_variance=float(model.metadata['total_variance']),
            resolution=model.metadata.get('resolution'),
        )


def _orient(components: np.ndarray) -> np.ndarray:
    # Largest-magnitude loading of every component is positive.
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(len(components)), pivots])
    signs[signs == 0] = 1
    return components * signs[:, np.newaxis]


def _complete_basis(rows: np.ndarray, n_components: int) -> np.ndarray:
    # Orthonormal rows spanning ``rows`` first, then seeded directions from
    # their orthogonal complement.
    d = rows.shape[1]
    rng = np.random.default_rng(0)
    candidates = np.hstack([rows.T, rng.standard_normal((d, n_components))])
    q, _ = linalg.qr(candidates, mode='economic')
    return q[:, :n_components].T


def _top_directions(centered: np.ndarray, n_components: int):
    n, d = centered.shape
    if n > GRAM_SAMPLE_LIMIT and n < d:
        gram = centered @ centered.T
        values, vectors = linalg.eigh(
            gram, subset_by_index=[n - n_components, n - 1]
        )
        order = np.argsort(values)[::-1]
        values = values[order]
        vectors = vectors[:, order]

        rank = int(np.sum(values > GRAM_RANK_TOL * max(values[0], 0.0)))
        singular = np.zeros(n_components)
        singular[:rank] = np.sqrt(values[:rank])
        components = (centered.T @ vectors[:, :rank] / singular[:rank]).T
        if rank < n_components:
            logger.debug(
                'Data rank %d is below n_c = %d; completing the basis',
                rank,
                n_components,
            )
        return singular, _complete_basis(components, n_components)

    _, singular, vt = linalg.svd(centered, full_matrices=False)
    return singular[:n_components], vt[:n_components]


def pca_fit(data, n_components: int) -> PCAModel:
    """
    Fit principal components by SVD of the centered data matrix.

    Args:
        data: A :class:`Dataset` (its ``s1, s2, s3`` planes are flattened) or
            an ``(N, D)`` feature matrix.
        n_components: Number of components ``n_c`` to keep.

    Returns:
        Model with orthonormal component rows and non-increasing explained
        variances ``s^2 / (N - 1)``.

    Raises:
        DomainError: ``n_c`` is below 1 or above ``min(N, D)``.

    """
    resolution = None
    if isinstance(data, Dataset):
        resolution = data.resolution
        x = data.features()
    else:
        x = np.asarray(data, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeMismatchError('PCA needs an (N, D) matrix')

    n, d = x.shape
    if not 1 <= n_components <= min(n, d):
        raise DomainError(
            'n_c = {} must lie in [1, min(N, D) = {}]'.format(
                n_components, min(n, d)
            )
        )

    mean = x.mean(axis=0)
    centered = x - mean
    dof = max(n - 1, 1)
    singular, components = _top_directions(centered, n_components)
    explained = singular ** 2 / dof
    total = float(np.sum(centered ** 2) / dof)

    model = PCAModel(mean, _orient(components), explained, total, resolution)
    logger.info(
        'PCA on %d x %d: top-%d share %.4f',
        n,
        d,
        min(3, n_components),
        float(model.explained_share[:3].sum()),
    )
    return model


def pca_transform(model: PCAModel, img: StokesImage) -> np.ndarray:
    """
    Coordinates ``components (flatten(img) - mean)`` of a single image.

    Raises:
        ShapeMismatchError: the image resolution does not match the fit.

    """
    return model.transform(img)[0]


def pca_reconstruct(model: PCAModel, coordinates) -> np.ndarray:
    """``mean + components^T y`` for one or many coordinate vectors."""
    result = model.reconstruct(coordinates)
    if np.ndim(coordinates) == 1:
        return result[0]
    return result


def reconstruction_error(model: PCAModel, data) -> float:
    """Frobenius norm of ``x - reconstruct(transform(x))``."""
    x = model._features(data)
    return float(np.linalg.norm(x - model.reconstruct(model.transform(x))))


@dataclass(frozen=True, eq=False)
class RadiiStats:
    mean: float
    std: float
    counts: np.ndarray
    edges: np.ndarray

    @property
    def relative_spread(self) -> float:
        return self.std / self.mean if self.mean > 0 else float('inf')


def radii_stats(points, center=None, bins: int = DEFAULT_BINS) -> RadiiStats:
    """
    Distances of reduced points from their centroid or a given center.

    Returns:
        Mean, standard deviation and a ``bins``-bin histogram of the radii.

    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or len(points) < 2:
        raise DomainError('Radii statistics need at least two points')

    center = points.mean(axis=0) if center is None else np.asarray(center)
    if center.shape != points.shape[1:]:
        raise ShapeMismatchError(
            'Center {} does not match points {}'.format(
                center.shape, points.shape
            )
        )

    radii = np.linalg.norm(points - center, axis=1)
    counts, edges = np.histogram(radii, bins=bins)
    return RadiiStats(float(radii.mean()), float(radii.std()), counts, edges)
