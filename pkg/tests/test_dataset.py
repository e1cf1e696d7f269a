# Standard Library
import math

# Third Party
import pytest

# Scientific
import numpy as np

# Project
from tests.utils import nearest_template
from vvb_learn.dataset import (
    CLASS15_PAIRS,
    Dataset,
    LabelSpec,
    generate_class15,
    generate_regression,
    generate_sector26,
    mix,
    render_planes,
    split_halves,
    subsample_per_class,
)
from vvb_learn.errors import DomainError, ShapeMismatchError
from vvb_learn.noise import NoiseConfig
from vvb_learn.optics import GridSpec, VVBState
from vvb_learn.sphere import sector_index


def test_label_specs():
    assert len(CLASS15_PAIRS) == 15
    assert all(m1 < m2 for m1, m2 in CLASS15_PAIRS)
    assert LabelSpec('class15').n_classes == 15
    assert LabelSpec('sector26').n_classes == 26
    assert LabelSpec('regression').has_angles
    assert not LabelSpec('class15').has_angles
    assert LabelSpec.from_tag(LabelSpec('sector26').tag).task == 'sector26'
    assert LabelSpec('class15').class_name(0) == '(-5,-3)'

    with pytest.raises(DomainError):
        LabelSpec('class16')
    with pytest.raises(DomainError):
        LabelSpec('class15', class_list=CLASS15_PAIRS[::-1])


def test_dataset_validation():
    spec = LabelSpec('class15')
    planes = np.zeros((2, 4, 8, 8))

    with pytest.raises(ShapeMismatchError):
        Dataset(np.zeros((2, 3, 8, 8)), [0, 1], spec)
    with pytest.raises(ShapeMismatchError):
        Dataset(planes, [0], spec)
    with pytest.raises(DomainError):
        Dataset(planes, [0, 15], spec)
    with pytest.raises(ShapeMismatchError):
        Dataset(planes, [0, 1], LabelSpec('sector26'))


def test_class15_sizes_and_splits(class15):
    train, val = class15

    assert len(train) == 15 * 4
    assert len(val) == 15 * 2
    assert train.class_counts().tolist() == [4] * 15
    assert val.class_counts().tolist() == [2] * 15
    assert train.planes.shape == (60, 4, 16, 16)
    assert train.planes.dtype == np.float32
    assert train.angles is None
    assert not set(train.sample_indices) & set(val.sample_indices)
    assert train.provenance['split'] == 'train'
    assert val.provenance['sample_offset'] == 60


def test_class15_templates_are_distinct():
    grid = GridSpec(resolution=32)
    train, _ = generate_class15(1, 1, grid=grid, seed=0)

    features = train.features()
    predicted = nearest_template(features, features)

    assert predicted.tolist() == list(range(15))


def test_generation_is_deterministic(grid):
    a = generate_class15(2, 1, grid=grid, seed=17)
    b = generate_class15(2, 1, grid=grid, seed=17)
    c = generate_class15(2, 1, grid=grid, seed=18)

    assert a[0] == b[0]
    assert a[1] == b[1]
    assert not np.array_equal(a[0].planes, c[0].planes)


def test_parallel_generation_matches_serial(grid, labproxy):
    serial = generate_class15(2, 1, cfg=labproxy, grid=grid, seed=1)
    parallel = generate_class15(
        2, 1, cfg=labproxy, grid=grid, seed=1, jobs=2
    )

    assert serial[0] == parallel[0]
    assert serial[1] == parallel[1]


def test_sector26_labels_match_angles(grid):
    train, val = generate_sector26(3, 1, grid=grid, seed=2)

    assert len(train) == 26 * 3
    assert len(val) == 26
    for (theta, phi), label in zip(train.angles, train.labels):
        assert sector_index(theta, phi) == label

    north = train.angles[train.labels == 0, 0]
    south = train.angles[train.labels == 25, 0]
    assert np.all(north <= math.pi / 8)
    assert np.all(south >= 7 * math.pi / 8)


def test_regression_dataset(grid):
    train, val = generate_regression(40, 10, grid=grid, seed=3)

    assert len(train) == 40
    assert len(val) == 10
    assert val.sample_indices.tolist() == list(range(40, 50))
    for (theta, phi), label in zip(train.angles, train.labels):
        assert sector_index(theta, phi) == label
    np.testing.assert_allclose(
        np.linalg.norm(train.bloch_vectors(), axis=1), 1.0
    )


def test_bloch_vectors_need_angles(class15):
    with pytest.raises(DomainError):
        class15[0].bloch_vectors()


def test_counts_must_be_positive(grid):
    with pytest.raises(DomainError):
        generate_class15(0, 1, grid=grid)
    with pytest.raises(DomainError):
        generate_regression(10, 1.5, grid=grid)


def test_render_planes_keeps_order(grid):
    states = [VVBState(-1, 1, 0.3 * k, 0.1) for k in range(1, 4)]
    planes = render_planes(states, [5, 6, 7], grid, NoiseConfig())
    reversed_ = render_planes(states[::-1], [7, 6, 5], grid, NoiseConfig())

    assert planes.shape == (3, 4, 16, 16)
    assert np.array_equal(planes, reversed_[::-1])


def test_subsample_per_class(class15):
    train, _ = class15
    small = subsample_per_class(train, 2, seed=1)

    assert small.class_counts().tolist() == [2] * 15
    assert set(small.sample_indices) <= set(train.sample_indices)
    assert small.provenance['per_class_limit'] == 2
    assert small == subsample_per_class(train, 2, seed=1)
    assert len(subsample_per_class(train, 10)) == len(train)


def test_split_halves(class15):
    train, _ = class15
    first, second = split_halves(train)

    assert first.class_counts().tolist() == [2] * 15
    assert second.class_counts().tolist() == [2] * 15
    assert not set(first.sample_indices) & set(second.sample_indices)


def test_mix_keeps_class_sizes(class15, noisy_class15):
    clean, _ = class15
    noisy, _ = noisy_class15

    mixed = mix(clean, noisy, 0.5, seed=2)

    assert mixed.class_counts().tolist() == clean.class_counts().tolist()
    clean_rows = {p.tobytes() for p in clean.planes}
    swapped = sum(p.tobytes() not in clean_rows for p in mixed.planes)
    assert swapped == 15 * 2
    assert mixed.provenance['mixed']['fraction'] == 0.5

    unchanged = mix(clean, noisy, 0.0)
    assert {p.tobytes() for p in unchanged.planes} == clean_rows


def test_mix_checks_inputs(class15, noisy_class15, grid):
    clean, _ = class15
    noisy, noisy_val = noisy_class15

    with pytest.raises(DomainError):
        mix(clean, noisy, 1.5)
    with pytest.raises(DomainError):
        mix(clean, noisy_val, 1.0)

    sector, _ = generate_sector26(1, 1, grid=grid)
    with pytest.raises(DomainError):
        mix(clean, sector, 0.5)
