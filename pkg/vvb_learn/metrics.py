# Standard Library
import io
import warnings
from dataclasses import dataclass

# Scientific
import numpy as np

# This module
from .errors import ShapeMismatchError


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    """Counts with rows = true class and columns = predicted class."""

    counts: np.ndarray

    @property
    def n_classes(self) -> int:
        return self.counts.shape[0]

    @property
    def per_class_accuracy(self) -> np.ndarray:
        """Diagonal over row totals; NaN for classes with no samples."""
        totals = self.counts.sum(axis=1)
        diagonal = np.diag(self.counts).astype(np.float64)
        with np.errstate(invalid='ignore', divide='ignore'):
            return np.where(totals > 0, diagonal / totals, np.nan)

    @property
    def average_accuracy(self) -> float:
        """Mean of the per-class accuracies over the classes present."""
        accuracy = self.per_class_accuracy
        if np.all(np.isnan(accuracy)):
            return float('nan')
        with warnings.catch_warnings():
            warnings.simplefilter('ignore', RuntimeWarning)
            return float(np.nanmean(accuracy))

    @property
    def overall_accuracy(self) -> float:
        total = self.counts.sum()
        return float(np.trace(self.counts) / total) if total else float('nan')

    def to_text(self, class_names=None) -> str:
        names = class_names or [str(i) for i in range(self.n_classes)]
        width = max(5, max(len(n) for n in names), len(str(self.counts.max())))
        lines = [' ' * width + ' ' + ' '.join(n.rjust(width) for n in names)]
        for name, row in zip(names, self.counts):
            cells = ' '.join(str(int(c)).rjust(width) for c in row)
            lines.append('{} {}'.format(name.rjust(width), cells))
        lines.append('average accuracy {:.4f}'.format(self.average_accuracy))
        return '\n'.join(lines) + '\n'

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(
            'true,'
            + ','.join('pred_{}'.format(i) for i in range(self.n_classes))
            + ',accuracy\n'
        )
        for index, (row, accuracy) in enumerate(
            zip(self.counts, self.per_class_accuracy)
        ):
            out.write(
                '{},{},{}\n'.format(
                    index, ','.join(str(int(c)) for c in row), accuracy
                )
            )
        padding = ',' * (self.n_classes - 1)
        out.write('average,{},{}\n'.format(padding, self.average_accuracy))
        return out.getvalue()


def confusion_matrix(y_true, y_pred, n_classes: int) -> ConfusionMatrix:
    y_true = np.asarray(y_true, dtype=np.int64)
    y_pred = np.asarray(y_pred, dtype=np.int64)
    if y_true.shape != y_pred.shape:
        raise ShapeMismatchError(
            '{} labels but {} predictions'.format(len(y_true), len(y_pred))
        )

    counts = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(counts, (y_true, y_pred), 1)
    return ConfusionMatrix(counts)
