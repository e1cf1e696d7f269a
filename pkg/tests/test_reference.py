# Standard Library
import configparser
import os
import shutil

# Third Party
import pytest

# Project
from vvb_learn import fileformat
from vvb_learn.cli import main
from vvb_learn.experiments import evaluate
from vvb_learn.pca import PCAModel
from vvb_learn.svm import SVMModel


REFERENCE_DIR = os.path.join(os.path.dirname(__file__), 'data', 'reference')
REFERENCE_FILES = ('val.vvbd', 'pca.vvbm', 'svm.vvbm')
TOLERANCE = 1e-6


@pytest.fixture(scope='module')
def expected():
    parser = configparser.ConfigParser()
    parser.read(os.path.join(REFERENCE_DIR, 'expected.cfg'))
    return parser


@pytest.fixture
def reference(tmp_path):
    # eval writes a manifest beside the model; keep the committed copy clean.
    for name in REFERENCE_FILES:
        shutil.copy(os.path.join(REFERENCE_DIR, name), tmp_path / name)
    return tmp_path


def _summary(path):
    values = {}
    for line in path.read_text().splitlines():
        key, value = line.split()
        values[key] = float(value)
    return values


def test_reference_files_load(reference, expected):
    dataset = fileformat.load(reference / 'val.vvbd')
    pca = PCAModel.from_file(fileformat.load_model(reference / 'pca.vvbm'))
    svm = SVMModel.from_file(fileformat.load_model(reference / 'svm.vvbm'))

    assert len(dataset) == 6
    assert dataset.resolution == 8
    assert dataset.labels.tolist() == [0, 1, 2, 3, 4, 4]
    assert pca.dimension == 3 * 8 * 8
    assert svm.n_classes == 15

    matrix = evaluate(svm, dataset, pca)
    assert matrix.overall_accuracy == pytest.approx(
        expected.getfloat('eval', 'overall_accuracy'), abs=TOLERANCE
    )


def test_eval_reproduces_recorded_accuracy(reference, expected):
    out = reference / 'evaluation'
    code = main(
        [
            'eval',
            '--model',
            str(reference / 'svm.vvbm'),
            '--dataset',
            str(reference / 'val.vvbd'),
            '--out',
            str(out),
        ]
    )

    assert code == 0
    last = (out / 'confusion.csv').read_text().splitlines()[-1]
    assert last.startswith('average,')
    assert float(last.split(',')[-1]) == pytest.approx(
        expected.getfloat('eval', 'average_accuracy'), abs=TOLERANCE
    )


def test_pca_report_reproduces_recorded_statistics(reference, expected):
    out = reference / 'report'
    dataset = str(reference / 'val.vvbd')
    code = main(['pca-report', '--dataset', dataset, '--out', str(out)])

    assert code == 0
    summary = _summary(out / 'summary.txt')
    for key in ('top3_share', 'radius_mean', 'radius_std'):
        assert summary[key] == pytest.approx(
            expected.getfloat('pca-report', key), abs=TOLERANCE
        )

    rows = (out / 'explained_variance.csv').read_text().splitlines()[1:4]
    recorded = expected.get('pca-report', 'explained_variance').split(',')
    assert [float(row.split(',')[1]) for row in rows] == pytest.approx(
        [float(value) for value in recorded], abs=TOLERANCE
    )
