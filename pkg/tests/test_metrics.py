# Standard Library
import math

# Third Party
import pytest

# Scientific
import numpy as np

# Project
from vvb_learn.errors import ShapeMismatchError
from vvb_learn.metrics import ConfusionMatrix, confusion_matrix


def test_counts_and_accuracies():
    matrix = confusion_matrix([0, 0, 1, 1, 1, 2], [0, 1, 1, 1, 2, 2], 3)

    assert matrix.counts.tolist() == [[1, 1, 0], [0, 2, 1], [0, 0, 1]]
    np.testing.assert_allclose(matrix.per_class_accuracy, [0.5, 2 / 3, 1.0])
    assert matrix.average_accuracy == pytest.approx((0.5 + 2 / 3 + 1) / 3)
    assert matrix.overall_accuracy == pytest.approx(4 / 6)


def test_empty_classes_are_skipped():
    matrix = confusion_matrix([0, 0, 2], [0, 0, 1], 4)

    assert math.isnan(matrix.per_class_accuracy[1])
    assert matrix.average_accuracy == pytest.approx(0.5)


def test_empty_matrix():
    matrix = ConfusionMatrix(np.zeros((3, 3), dtype=np.int64))

    assert math.isnan(matrix.average_accuracy)
    assert math.isnan(matrix.overall_accuracy)


def test_length_mismatch():
    with pytest.raises(ShapeMismatchError):
        confusion_matrix([0, 1], [0], 2)


def test_text_and_csv():
    matrix = confusion_matrix([0, 1, 1], [0, 1, 0], 2)

    text = matrix.to_text(['left', 'right'])
    assert 'left' in text.splitlines()[1]
    assert text.rstrip().endswith('average accuracy 0.7500')

    rows = matrix.to_csv().splitlines()
    assert rows[0] == 'true,pred_0,pred_1,accuracy'
    assert rows[1] == '0,1,0,1.0'
    assert rows[2] == '1,1,1,0.5'
    assert rows[3] == 'average,,,0.75'
