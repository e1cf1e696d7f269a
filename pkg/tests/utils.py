# Scientific
import numpy as np
from scipy.spatial.transform import Rotation


def nearest_template(templates, images) -> np.ndarray:
    """
    Classify images by the closest template in Euclidean distance.

    Args:
        templates: ``(C, D)`` feature rows, one per class.
        images: ``(N, D)`` feature rows.

    Returns:
        Index of the nearest template for every image.

    """
    templates = np.asarray(templates, dtype=np.float64)
    images = np.asarray(images, dtype=np.float64)
    distances = np.linalg.norm(
        images[:, np.newaxis, :] - templates[np.newaxis, :, :], axis=-1
    )
    return np.argmin(distances, axis=1)


def random_rotation(seed: int) -> np.ndarray:
    """Proper 3 x 3 rotation matrix drawn uniformly."""
    return Rotation.random(random_state=seed).as_matrix()


def random_unit_vectors(count: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    vectors = rng.normal(size=(count, 3))
    return vectors / np.linalg.norm(vectors, axis=1, keepdims=True)
