# Third Party
import pytest

# Scientific
import numpy as np

# Project
from vvb_learn.errors import DomainError, FormatError, ShapeMismatchError
from vvb_learn.fileformat import ModelFile
from vvb_learn.pca import pca_fit
from vvb_learn.reconstruction import (
    Reconstruction,
    alignment_from_file,
    alignment_to_file,
    calibrate,
    reconstruct,
)


@pytest.fixture(scope='module')
def calibrated(sphere):
    train, _ = sphere
    pca = pca_fit(train, 3)
    return pca, calibrate(pca, train)


def test_clean_states_are_recovered(sphere, calibrated):
    _, val = sphere
    pca, alignment = calibrated

    result = reconstruct(pca, alignment, val)

    assert result.fidelity.shape == (len(val),)
    assert result.mean_fidelity >= 0.99
    np.testing.assert_allclose(np.linalg.norm(result.bloch, axis=1), 1.0)
    assert np.all((result.theta >= 0) & (result.theta <= np.pi))


def test_extra_components_are_ignored(sphere, calibrated):
    train, val = sphere
    pca, alignment = calibrated
    wide = pca_fit(train, 6)

    a = reconstruct(pca, alignment, val)
    b = reconstruct(wide, alignment, val)

    np.testing.assert_allclose(a.bloch, b.bloch, atol=1e-8)


def test_needs_three_components(sphere):
    train, _ = sphere
    pca = pca_fit(train, 2)

    with pytest.raises(DomainError):
        calibrate(pca, train)


def test_calibration_needs_angles(class15):
    train, _ = class15
    pca = pca_fit(train, 3)

    with pytest.raises(DomainError):
        calibrate(pca, train)


def test_resolution_must_match(class15, calibrated):
    pca, alignment = calibrated

    with pytest.raises(ShapeMismatchError):
        reconstruct(pca, alignment, class15[1])


def test_without_reference_angles():
    result = Reconstruction(
        np.array([[0.0, 0.0, 1.0]]), np.array([0.0]), np.array([0.0])
    )

    with pytest.raises(DomainError):
        result.mean_fidelity
    assert result.to_csv().splitlines() == [
        'index,theta,phi,fidelity',
        '0,0.0,0.0,',
    ]


def test_csv_lists_every_image(sphere, calibrated):
    _, val = sphere
    pca, alignment = calibrated

    rows = reconstruct(pca, alignment, val).to_csv().splitlines()

    assert rows[0] == 'index,theta,phi,fidelity'
    assert len(rows) == len(val) + 1
    assert rows[1].startswith('0,')


def test_alignment_file_round_trip(calibrated):
    _, alignment = calibrated
    again = alignment_from_file(alignment_to_file(alignment))

    assert np.array_equal(again.rotation, alignment.rotation)
    assert np.array_equal(again.offset, alignment.offset)
    assert again.scale == alignment.scale

    with pytest.raises(FormatError):
        alignment_from_file(ModelFile('pca'))
