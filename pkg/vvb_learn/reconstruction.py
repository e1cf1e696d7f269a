"""Bloch-vector reconstruction from the leading three PCA coordinates."""

# Standard Library
import logging
from dataclasses import dataclass

# Scientific
import numpy as np

# This module
from .dataset import Dataset
from .errors import DomainError, FormatError
from .fileformat import ModelFile
from .pca import PCAModel
from .sphere import (
    SphereAlignment,
    align_to_sphere,
    angles_from_bloch,
    fidelity,
)


logger = logging.getLogger(__name__)

SPHERE_DIMENSIONS = 3


def _sphere_points(pca: PCAModel, data) -> np.ndarray:
    if pca.n_components < SPHERE_DIMENSIONS:
        raise DomainError(
            'Sphere reconstruction needs n_c >= 3, model has {}'.format(
                pca.n_components
            )
        )
    return pca.transform(data)[:, :SPHERE_DIMENSIONS]


def calibrate(pca: PCAModel, dataset: Dataset) -> SphereAlignment:
    """Fit the PCA-to-Bloch similarity on images with known angles."""
    alignment = align_to_sphere(
        _sphere_points(pca, dataset), dataset.bloch_vectors()
    )
    logger.info(
        'Sphere alignment scale %.4g, residual rms %.4g',
        alignment.scale,
        alignment.residual_rms(
            _sphere_points(pca, dataset), dataset.bloch_vectors()
        ),
    )
    return alignment


@dataclass(frozen=True, eq=False)
class Reconstruction:
    bloch: np.ndarray
    theta: np.ndarray
    phi: np.ndarray
    fidelity: np.ndarray = None

    @property
    def mean_fidelity(self) -> float:
        if self.fidelity is None:
            raise DomainError('No reference angles to compare against')
        return float(np.mean(self.fidelity))

    def to_csv(self) -> str:
        lines = ['index,theta,phi,fidelity']
        for index, (theta, phi) in enumerate(zip(self.theta, self.phi)):
            value = '' if self.fidelity is None else repr(self.fidelity[index])
            lines.append('{},{!r},{!r},{}'.format(index, theta, phi, value))
        return '\n'.join(lines) + '\n'


def reconstruct(
    pca: PCAModel, alignment: SphereAlignment, dataset: Dataset
) -> Reconstruction:
    """
    Estimated states of every image.

    When the dataset carries true angles, the fidelity of each estimate
    against its true Bloch vector is included.

    """
    bloch = alignment.apply(_sphere_points(pca, dataset))
    theta, phi = angles_from_bloch(bloch)
    scores = None
    if dataset.angles is not None:
        scores = np.atleast_1d(fidelity(bloch, dataset.bloch_vectors()))
        logger.info('Mean reconstruction fidelity %.4f', float(scores.mean()))
    return Reconstruction(bloch, theta, phi, scores)


def alignment_to_file(alignment: SphereAlignment) -> ModelFile:
    return ModelFile(
        'alignment',
        {'scale': alignment.scale},
        {'rotation': alignment.rotation, 'offset': alignment.offset},
    )


def alignment_from_file(model: ModelFile) -> SphereAlignment:
    if model.kind != 'alignment':
        raise FormatError(
            'Expected an alignment model, got {}'.format(model.kind)
        )
    return SphereAlignment(
        model.tensor('rotation'),
        float(model.metadata['scale']),
        model.tensor('offset'),
    )
