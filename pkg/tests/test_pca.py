# Third Party
import pytest

# Scientific
import numpy as np

# Project
from vvb_learn import pca as pca_module
from vvb_learn.dataset import generate_regression
from vvb_learn.errors import DomainError, FormatError, ShapeMismatchError
from vvb_learn.fileformat import ModelFile
from vvb_learn.pca import (
    PCAModel,
    pca_fit,
    pca_reconstruct,
    pca_transform,
    radii_stats,
    reconstruction_error,
)


@pytest.fixture(scope='module')
def low_rank():
    rng = np.random.default_rng(0)
    basis = np.linalg.qr(rng.normal(size=(50, 4)))[0].T
    scales = np.array([5.0, 3.0, 2.0, 1.0])[:, np.newaxis]
    coordinates = rng.normal(size=(80, 4))
    return coordinates @ (scales * basis) + 7.0


def test_components_are_orthonormal(low_rank):
    model = pca_fit(low_rank, 4)

    np.testing.assert_allclose(
        model.components @ model.components.T, np.eye(4), atol=1e-8
    )
    assert np.all(np.diff(model.explained_variance) <= 0)
    assert model.explained_share.sum() == pytest.approx(1.0)


def test_largest_loading_is_positive(low_rank):
    model = pca_fit(low_rank, 3)
    pivots = np.argmax(np.abs(model.components), axis=1)

    assert np.all(model.components[np.arange(3), pivots] > 0)


def test_full_rank_reconstruction_is_exact(low_rank):
    model = pca_fit(low_rank, 4)

    assert reconstruction_error(model, low_rank) == pytest.approx(
        0.0, abs=1e-9
    )
    np.testing.assert_allclose(
        pca_reconstruct(model, model.transform(low_rank[0])[0]),
        low_rank[0],
        atol=1e-9,
    )


def test_explained_variance_matches_sample_variance(low_rank):
    model = pca_fit(low_rank, 2)
    coordinates = model.transform(low_rank)

    np.testing.assert_allclose(
        coordinates.var(axis=0, ddof=1), model.explained_variance, rtol=1e-9
    )


def test_gram_path_agrees_with_svd(monkeypatch):
    rng = np.random.default_rng(1)
    data = rng.normal(size=(30, 60)) @ np.diag(np.linspace(3, 0.1, 60))

    direct = pca_fit(data, 5)
    monkeypatch.setattr(pca_module, 'GRAM_SAMPLE_LIMIT', 10)
    gram = pca_fit(data, 5)

    np.testing.assert_allclose(
        gram.explained_variance, direct.explained_variance, rtol=1e-8
    )
    np.testing.assert_allclose(
        gram.components, direct.components, atol=1e-6
    )


def test_gram_path_completes_rank_deficient_basis(monkeypatch):
    rng = np.random.default_rng(2)
    basis = np.linalg.qr(rng.normal(size=(80, 3)))[0].T
    data = rng.normal(size=(40, 3)) @ (np.array([[4.0], [2.0], [1.0]]) * basis)

    direct = pca_fit(data, 3)
    monkeypatch.setattr(pca_module, 'GRAM_SAMPLE_LIMIT', 10)
    model = pca_fit(data, 8)

    np.testing.assert_allclose(
        model.components @ model.components.T, np.eye(8), atol=1e-8
    )
    assert np.all(model.explained_variance[3:] == 0)
    np.testing.assert_allclose(
        model.explained_variance[:3], direct.explained_variance, rtol=1e-8
    )
    assert reconstruction_error(model.truncated(3), data) == pytest.approx(
        0.0, abs=1e-9
    )


def test_n_components_range(low_rank):
    with pytest.raises(DomainError):
        pca_fit(low_rank, 0)
    with pytest.raises(DomainError):
        pca_fit(low_rank[:3], 4)


def test_dataset_input(class15):
    train, val = class15
    model = pca_fit(train, 10)

    assert model.resolution == 16
    assert model.dimension == 3 * 16 * 16
    assert model.transform(val).shape == (len(val), 10)
    assert pca_transform(model, val.image(0)).shape == (10,)
    np.testing.assert_allclose(
        pca_transform(model, val.image(0)), model.transform(val)[0]
    )


def test_resolution_mismatch(class15, sphere):
    model = pca_fit(class15[0], 5)

    with pytest.raises(ShapeMismatchError):
        model.transform(sphere[0])


def test_truncated_model(low_rank):
    model = pca_fit(low_rank, 4)
    small = model.truncated(2)

    np.testing.assert_allclose(
        small.transform(low_rank), model.transform(low_rank)[:, :2]
    )
    with pytest.raises(DomainError):
        model.truncated(5)


def test_reconstruction_error_falls_with_more_components():
    rng = np.random.default_rng(3)
    data = rng.normal(size=(60, 20)) * np.linspace(4, 0.5, 20)
    model = pca_fit(data, 12)

    errors = [
        reconstruction_error(model.truncated(k), data) for k in range(1, 13)
    ]
    assert np.all(np.diff(errors) <= 1e-9)


def test_projection_is_idempotent(low_rank):
    model = pca_fit(low_rank, 2)
    coordinates = model.transform(low_rank)
    projected = model.reconstruct(coordinates)

    np.testing.assert_allclose(
        model.transform(projected), coordinates, atol=1e-9
    )
    np.testing.assert_allclose(
        model.reconstruct(model.transform(projected)), projected, atol=1e-9
    )


def test_model_file_round_trip(low_rank):
    model = pca_fit(low_rank, 3)
    again = PCAModel.from_file(model.to_file())

    assert np.array_equal(again.components, model.components)
    assert again.total_variance == model.total_variance

    with pytest.raises(FormatError):
        PCAModel.from_file(ModelFile('svm'))


def test_clean_sphere_needs_three_directions(sphere):
    train, _ = sphere
    model = pca_fit(train, 8)

    assert model.explained_share[:3].sum() >= 0.9


def test_clean_sphere_radii_are_uniform(sphere):
    train, _ = sphere
    model = pca_fit(train, 3)
    stats = radii_stats(model.transform(train))

    assert stats.relative_spread <= 0.15
    assert stats.counts.sum() == len(train)
    assert len(stats.edges) == 31


def test_noise_spreads_the_radii(sphere, fine_grid, labproxy):
    clean, _ = sphere
    noisy, _ = generate_regression(
        300, 1, cfg=labproxy, grid=fine_grid, seed=5
    )

    clean_stats = radii_stats(pca_fit(clean, 3).transform(clean))
    noisy_stats = radii_stats(pca_fit(noisy, 3).transform(noisy))

    assert noisy_stats.relative_spread > clean_stats.relative_spread


def test_phi_rotation_keeps_radius(sphere):
    train, _ = sphere
    model = pca_fit(train, 3)
    points = model.transform(train)
    center = points.mean(axis=0)
    radii = np.linalg.norm(points - center, axis=1)

    equator = np.abs(train.angles[:, 0] - np.pi / 2) < 0.15
    assert equator.sum() >= 2
    spread = radii[equator]
    assert spread.std() / spread.mean() <= 0.15


def test_radii_need_points():
    with pytest.raises(DomainError):
        radii_stats(np.zeros((1, 3)))
    with pytest.raises(ShapeMismatchError):
        radii_stats(np.zeros((4, 3)), center=np.zeros(2))
