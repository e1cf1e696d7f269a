"""
Evaluation helpers and parameter sweeps built on the learning modules.

``ncomp_curve`` traces SVM accuracy against the number of PCA dimensions;
``mixing_curve`` traces CNN accuracy on noisy images against the share of
noisy images in an otherwise clean training set.
"""

# Standard Library
import logging
from dataclasses import dataclass

# Scientific
import numpy as np

# This module
from .cnn import CNNModel, cnn_predict, cnn_train, init_model
from .dataset import Dataset, mix
from .errors import ConfigError, ShapeMismatchError
from .metrics import ConfusionMatrix, confusion_matrix
from .pca import PCAModel, pca_fit
from .svm import (
    DEFAULT_EPOCHS,
    DEFAULT_LAMBDA,
    SVMModel,
    predict_batch,
    svm_train,
)


logger = logging.getLogger(__name__)


def evaluate(model, dataset: Dataset, pca: PCAModel = None) -> ConfusionMatrix:
    """
    Confusion matrix of a trained classifier on a labelled dataset.

    SVM models need the PCA model their features were reduced with.

    """
    if isinstance(model, SVMModel):
        if pca is None:
            raise ConfigError('Evaluating an SVM requires its PCA model')
        reduced = pca.transform(dataset)
        if reduced.shape[1] < model.dimension:
            raise ShapeMismatchError(
                'SVM uses {} dimensions, PCA provides {}'.format(
                    model.dimension, reduced.shape[1]
                )
            )
        predicted = predict_batch(model, reduced[:, : model.dimension])
        n_classes = model.n_classes
    elif isinstance(model, CNNModel):
        predicted = cnn_predict(model, dataset)
        n_classes = model.n_classes
    else:
        raise TypeError('Cannot evaluate {!r}'.format(type(model).__name__))

    return confusion_matrix(
        dataset.labels, predicted, max(n_classes, dataset.n_classes)
    )


@dataclass(frozen=True)
class CurvePoint:
    parameter: float
    accuracy: float


def ncomp_curve(
    train: Dataset,
    val: Dataset,
    n_components,
    lam: float = DEFAULT_LAMBDA,
    epochs: int = DEFAULT_EPOCHS,
    seed: int = 0,
):
    """
    Average SVM accuracy for each requested number of PCA dimensions.

    One PCA is fitted with the largest ``n_c``; every smaller value uses its
    leading columns.

    Returns:
        List of :class:`CurvePoint` in the order of ``n_components``.

    """
    n_components = [int(n) for n in n_components]
    if not n_components or min(n_components) < 1:
        raise ConfigError('n_c values must be >= 1')

    pca = pca_fit(train, max(n_components))
    x_train = pca.transform(train)
    x_val = pca.transform(val)

    curve = []
    for n_c in n_components:
        model = svm_train(
            x_train[:, :n_c],
            train.labels,
            lam=lam,
            epochs=epochs,
            seed=seed,
            n_classes=train.n_classes,
        )
        predicted = predict_batch(model, x_val[:, :n_c])
        accuracy = confusion_matrix(
            val.labels, predicted, val.n_classes
        ).average_accuracy
        logger.info('n_c = %d: average accuracy %.4f', n_c, accuracy)
        curve.append(CurvePoint(n_c, accuracy))

    return curve


def mixing_curve(
    clean: Dataset,
    noisy: Dataset,
    noisy_val: Dataset,
    fractions,
    epochs: int = 10,
    batch_size: int = 32,
    learning_rate: float = 0.01,
    seed: int = 0,
    jobs: int = 1,
):
    """
    Validation accuracy on noisy images for each noisy-share of training.

    Every point trains a fresh network from the same initialization.

    """
    curve = []
    for fraction in fractions:
        train = mix(clean, noisy, fraction, seed=seed)
        model = init_model(
            train.resolution,
            train.n_classes,
            seed=seed,
            task=train.label_spec.task,
        )
        model, _ = cnn_train(
            model,
            train,
            epochs=epochs,
            batch_size=batch_size,
            learning_rate=learning_rate,
            seed=seed,
            jobs=jobs,
        )
        predicted = cnn_predict(model, noisy_val)
        accuracy = float(np.mean(predicted == noisy_val.labels))
        logger.info('Noisy share %.3f: accuracy %.4f', fraction, accuracy)
        curve.append(CurvePoint(float(fraction), accuracy))

    return curve


def curve_csv(curve, parameter: str) -> str:
    lines = ['{},accuracy'.format(parameter)]
    lines.extend(
        '{},{!r}'.format(
            int(p.parameter) if parameter == 'n_c' else p.parameter, p.accuracy
        )
        for p in curve
    )
    return '\n'.join(lines) + '\n'
