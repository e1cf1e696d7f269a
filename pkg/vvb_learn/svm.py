"""
One-vs-rest linear SVM trained with the Pegasos stochastic subgradient method.

All ``C`` binary problems share one pass over the data: at step ``t`` every
class ``c`` sees the same sample with target ``+1`` if it is the sample's
class and ``-1`` otherwise. The bias is an extra constant feature, so it is
regularized together with the weights.
"""

# Standard Library
import logging
import math
from dataclasses import dataclass, field

# Scientific
import numpy as np

# This module
from .errors import DomainError, FormatError, ShapeMismatchError
from .fileformat import ModelFile
from .noise import stage_rng


logger = logging.getLogger(__name__)

DEFAULT_LAMBDA = 1e-4
DEFAULT_EPOCHS = 50


@dataclass(frozen=True, eq=False)
class SVMModel:
    weights: np.ndarray
    biases: np.ndarray
    task: str = None
    hyperparameters: dict = field(default_factory=dict)
    history: tuple = ()

    def __post_init__(self):
        if self.weights.ndim != 2 or self.weights.shape[0] < 2:
            raise ShapeMismatchError('SVM needs a (C >= 2, n_c) weight matrix')
        if self.biases.shape != (self.weights.shape[0],):
            raise ShapeMismatchError('One bias per class required')
        finite = np.isfinite(self.weights).all()
        if not (finite and np.isfinite(self.biases).all()):
            raise DomainError('SVM parameters must be finite')

    @property
    def n_classes(self) -> int:
        return self.weights.shape[0]

    @property
    def dimension(self) -> int:
        return self.weights.shape[1]

    def scores(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        if x.shape[-1] != self.dimension:
            raise ShapeMismatchError(
                'SVM expects {}-dim inputs, got {}'.format(
                    self.dimension, x.shape[-1]
                )
            )
        return x @ self.weights.T + self.biases

    def to_file(self) -> ModelFile:
        return ModelFile(
            'svm',
            {
                'task': self.task,
                'hyperparameters': self.hyperparameters,
                'history': list(self.history),
            },
            {'weights': self.weights, 'biases': self.biases},
        )

    @classmethod
    def from_file(cls, model: ModelFile) -> 'SVMModel':
        if model.kind != 'svm':
            raise FormatError(
                'Expected an svm model, got {}'.format(model.kind)
            )
        return cls(
            weights=model.tensor('weights'),
            biases=model.tensor('biases'),
            task=model.metadata.get('task'),
            hyperparameters=model.metadata.get('hyperparameters', {}),
            history=tuple(model.metadata.get('history', ())),
        )


def _objective(w: np.ndarray, x_aug: np.ndarray, targets: np.ndarray, lam):
    margins = targets * (x_aug @ w.T)
    hinge = np.maximum(0.0, 1.0 - margins).mean(axis=0).sum()
    return float(lam / 2 * np.sum(w ** 2) + hinge)


def svm_train(
    x,
    y,
    lam: float = DEFAULT_LAMBDA,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
    n_classes: int = None,
    projection: bool = True,
    task: str = None,
) -> SVMModel:
    """
    Fit ``C`` one-vs-rest hinge-loss separators.

    Each class minimizes ``lam/2 |w|^2 + mean hinge loss`` with step size
    ``1 / (lam t)``. The returned model is the average of all iterates.

    Args:
        x: ``(N, n_c)`` reduced feature vectors.
        y: ``N`` class indices.
        lam: Regularization strength.
        epochs: Passes over the data, each in a seeded shuffled order.
        seed: Shuffle seed.
        n_classes: Class count; defaults to ``max(y) + 1``.
        projection: Project every iterate onto the ball of radius
            ``1 / sqrt(lam)``.
        task: Task name stored with the model.

    Raises:
        DomainError: fewer than two classes present, or ``lam <= 0``.

    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or len(x) != len(y):
        raise ShapeMismatchError(
            'Features {} and labels {} do not agree'.format(x.shape, y.shape)
        )
    if len(np.unique(y)) < 2:
        raise DomainError('SVM training needs at least two classes')
    if not lam > 0:
        raise DomainError('Regularization must be positive')
    if epochs < 1:
        raise DomainError('At least one epoch required')

    n, dim = x.shape
    n_classes = int(y.max()) + 1 if n_classes is None else n_classes
    if y.min() < 0 or y.max() >= n_classes:
        raise DomainError('Labels must lie in [0, {})'.format(n_classes))
    x_aug = np.hstack([x, np.ones((n, 1))])
    targets = np.where(
        y[:, np.newaxis] == np.arange(n_classes)[np.newaxis], 1.0, -1.0
    )

    w = np.zeros((n_classes, dim + 1))
    w_avg = np.zeros_like(w)
    radius = 1 / math.sqrt(lam)
    history = []
    t = 0

    for epoch in range(epochs):
        order = stage_rng(seed, epoch, 'shuffle').permutation(n)
        for i in order:
            t += 1
            eta = 1.0 / (lam * t)
            row = x_aug[i]
            violated = targets[i] * (w @ row) < 1

            w *= 1 - eta * lam
            w[violated] += eta * targets[i][violated][:, np.newaxis] * row

            if projection:
                norms = np.linalg.norm(w, axis=1)
                over = norms > radius
                w[over] *= (radius / norms[over])[:, np.newaxis]

            w_avg += (w - w_avg) / t

        history.append(_objective(w_avg, x_aug, targets, lam))
        logger.debug('Epoch %d objective %.6f', epoch + 1, history[-1])

    return SVMModel(
        weights=w_avg[:, :-1].copy(),
        biases=w_avg[:, -1].copy(),
        task=task,
        hyperparameters={
            'lambda': lam,
            'epochs': epochs,
            'seed': seed,
            'projection': projection,
        },
        history=tuple(history),
    )


def predict_batch(model: SVMModel, x) -> np.ndarray:
    """Argmax class for every row; ties go to the lowest class index."""
    return np.argmax(model.scores(np.atleast_2d(x)), axis=1)


def svm_predict(model: SVMModel, x) -> int:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeMismatchError('svm_predict takes a single vector')
    return int(predict_batch(model, x)[0])
