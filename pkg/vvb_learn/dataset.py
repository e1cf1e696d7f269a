"""Labelled Stokes-image datasets for classification and regression."""

# Standard Library
import itertools
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

# Scientific
import numpy as np

# This module
from .errors import DomainError, ShapeMismatchError
from .noise import NoiseConfig, perturb_field, perturb_stokes, stage_rng
from .optics import GridSpec, StokesImage, VVBState, stokes
from .sphere import SECTOR_COUNT, sample_in_sector, sector_indices


logger = logging.getLogger(__name__)

CLASS15 = 'class15'
SECTOR26 = 'sector26'
REGRESSION = 'regression'

TASK_TAGS = {CLASS15: 1, SECTOR26: 2, REGRESSION: 3}
TASKS_WITH_ANGLES = {SECTOR26, REGRESSION}

ODD_OAM = (-5, -3, -1, 1, 3, 5)
CLASS15_PAIRS = tuple(itertools.combinations(ODD_OAM, 2))

# The m2 = -m1 = 1 sphere.
SPHERE_PAIR = (-1, 1)

CHANNELS = 4


@dataclass(frozen=True)
class LabelSpec:
    task: str
    class_list: tuple = None

    def __post_init__(self):
        if self.task not in TASK_TAGS:
            raise DomainError('Unknown task "{}"'.format(self.task))
        if self.task == CLASS15:
            pairs = tuple(tuple(p) for p in (self.class_list or CLASS15_PAIRS))
            if pairs != CLASS15_PAIRS:
                raise DomainError('class15 requires the 15 canonical pairs')
            object.__setattr__(self, 'class_list', pairs)

    @classmethod
    def for_task(cls, task: str) -> 'LabelSpec':
        return cls(task)

    @classmethod
    def from_tag(cls, tag: int) -> 'LabelSpec':
        for task, value in TASK_TAGS.items():
            if value == tag:
                return cls(task)
        raise DomainError('Unknown task tag {}'.format(tag))

    @property
    def tag(self) -> int:
        return TASK_TAGS[self.task]

    @property
    def n_classes(self) -> int:
        if self.task == CLASS15:
            return len(CLASS15_PAIRS)
        return SECTOR_COUNT

    @property
    def has_angles(self) -> bool:
        return self.task in TASKS_WITH_ANGLES

    def class_name(self, index: int) -> str:
        if self.task == CLASS15:
            return '({},{})'.format(*self.class_list[index])
        return 'sector{}'.format(index)


@dataclass(eq=False)
class Dataset:
    """
    Stokes images with labels.

    ``planes`` is a ``(N, 4, R, R)`` float32 stack of ``s1, s2, s3, I``;
    ``angles`` holds the true ``(theta, phi)`` per image for tasks that
    carry them.
    """

    planes: np.ndarray
    labels: np.ndarray
    label_spec: LabelSpec
    angles: np.ndarray = None
    sample_indices: np.ndarray = None
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float32)
        self.labels = np.asarray(self.labels, dtype=np.uint16)
        n = len(self.labels)

        if self.planes.ndim != 4 or self.planes.shape[1] != CHANNELS:
            raise ShapeMismatchError(
                'Dataset planes must be (N, 4, R, R), got {}'.format(
                    self.planes.shape
                )
            )
        if self.planes.shape[0] != n:
            raise ShapeMismatchError(
                '{} images but {} labels'.format(self.planes.shape[0], n)
            )
        if n and int(self.labels.max()) >= self.label_spec.n_classes:
            raise DomainError(
                'Label {} out of range for {} classes'.format(
                    int(self.labels.max()), self.label_spec.n_classes
                )
            )

        if self.label_spec.has_angles:
            if self.angles is None:
                raise ShapeMismatchError(
                    '{} datasets carry (theta, phi) per image'.format(
                        self.label_spec.task
                    )
                )
            self.angles = np.asarray(self.angles, dtype=np.float64)
            if self.angles.shape != (n, 2):
                raise ShapeMismatchError(
                    'Angles must be (N, 2), got {}'.format(self.angles.shape)
                )
        else:
            self.angles = None

        if self.sample_indices is None:
            self.sample_indices = np.arange(n, dtype=np.int64)
        self.sample_indices = np.asarray(self.sample_indices, dtype=np.int64)
        if self.sample_indices.shape != (n,):
            raise ShapeMismatchError('One sample index per image required')

    def __len__(self) -> int:
        return len(self.labels)

    def __eq__(self, other) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        angles_equal = (self.angles is None and other.angles is None) or (
            self.angles is not None
            and other.angles is not None
            and np.array_equal(self.angles, other.angles)
        )
        return (
            self.label_spec == other.label_spec
            and self.planes.shape == other.planes.shape
            and np.array_equal(self.planes, other.planes)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.sample_indices, other.sample_indices)
            and angles_equal
            and self.provenance == other.provenance
        )

    @property
    def resolution(self) -> int:
        return int(self.planes.shape[-1])

    @property
    def n_classes(self) -> int:
        return self.label_spec.n_classes

    def image(self, index: int) -> StokesImage:
        return StokesImage.from_planes(self.planes[index])

    def features(self) -> np.ndarray:
        """``(N, 3 R^2)`` float64 matrix of concatenated Stokes planes."""
        return self.planes[:, :3].reshape(len(self), -1).astype(np.float64)

    def bloch_vectors(self) -> np.ndarray:
        # Local import keeps dataset loading free of the sphere helpers.
        from .sphere import bloch_from_angles

        if self.angles is None:
            raise DomainError(
                'Dataset has no (theta, phi) labels ({} task)'.format(
                    self.label_spec.task
                )
            )
        return bloch_from_angles(self.angles[:, 0], self.angles[:, 1])

    def class_counts(self) -> np.ndarray:
        return np.bincount(self.labels, minlength=self.n_classes)

    def subset(self, indices, **provenance) -> 'Dataset':
        indices = np.asarray(indices, dtype=np.int64)
        return Dataset(
            planes=self.planes[indices],
            labels=self.labels[indices],
            label_spec=self.label_spec,
            angles=None if self.angles is None else self.angles[indices],
            sample_indices=self.sample_indices[indices],
            provenance=dict(self.provenance, **provenance),
        )


def _make_image(state: VVBState, grid: GridSpec, cfg: NoiseConfig, index: int):
    field_ = perturb_field(state, grid, cfg, index)
    img = perturb_stokes(stokes(field_), cfg, index)
    return img.planes().astype(np.float32)


def _make_image_packed(args):
    return _make_image(*args)


def render_planes(states, sample_indices, grid, cfg, jobs: int = 1):
    """
    Render, perturb and measure a batch of states.

    Output order follows the input order regardless of ``jobs``.

    Returns:
        ``(N, 4, R, R)`` float32 array.

    """
    work = [
        (state, grid, cfg, int(index))
        for state, index in zip(states, sample_indices)
    ]
    if jobs > 1 and len(work) > 1:
        chunk = max(1, len(work) // (4 * jobs))
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            images = list(pool.map(_make_image_packed, work, chunksize=chunk))
    else:
        images = [_make_image_packed(args) for args in work]

    if not images:
        return np.zeros((0, CHANNELS) + grid.shape, dtype=np.float32)
    return np.stack(images)


def _check_counts(*counts):
    for count in counts:
        if int(count) != count or count < 1:
            raise DomainError('Image counts must be integers >= 1')


def _provenance(task, grid, cfg, seed, split, offset, **extra):
    data = {
        'task': task,
        'split': split,
        'seed': int(seed),
        'sample_offset': int(offset),
        'grid': asdict(grid),
        'noise': cfg.to_dict(),
    }
    data.update(extra)
    return data


def _build(task, draws, per_class, grid, cfg, seed, split, offset, jobs):
    """Assemble one split; ``draws(label, rng)`` gives (state, angles)."""
    spec = LabelSpec.for_task(task)
    states, labels, angles, indices = [], [], [], []

    for label in range(spec.n_classes):
        for k in range(per_class):
            index = offset + label * per_class + k
            rng = stage_rng(seed, index, 'state')
            state, label_ = draws(label, rng)
            states.append(state)
            labels.append(label_)
            angles.append((state.theta, state.phi))
            indices.append(index)

    planes = render_planes(states, indices, grid, cfg, jobs)
    logger.info('Generated %d %s %s images', len(states), task, split)
    return Dataset(
        planes=planes,
        labels=np.array(labels),
        label_spec=spec,
        angles=np.array(angles) if spec.has_angles else None,
        sample_indices=np.array(indices),
        provenance=_provenance(
            task, grid, cfg, seed, split, offset, per_class=per_class
        ),
    )


def _class15_draw(label, rng):
    m1, m2 = CLASS15_PAIRS[label]
    return VVBState(m1, m2, math.pi / 2, rng.uniform(0.0, 2 * math.pi)), label


def _sector26_draw(label, rng):
    theta, phi = sample_in_sector(label, rng)
    return VVBState(SPHERE_PAIR[0], SPHERE_PAIR[1], theta, phi), label


def _sphere_draw(_, rng):
    theta = math.acos(rng.uniform(-1.0, 1.0))
    phi = rng.uniform(0.0, 2 * math.pi)
    state = VVBState(SPHERE_PAIR[0], SPHERE_PAIR[1], theta, phi)
    return state, int(sector_indices(state.theta, state.phi))


def _generate(task, draw, n_train, n_val, cfg, grid, seed, jobs, n_classes):
    _check_counts(n_train, n_val)
    grid = grid or GridSpec()
    cfg = cfg or NoiseConfig()
    train = _build(task, draw, n_train, grid, cfg, seed, 'train', 0, jobs)
    val = _build(
        task, draw, n_val, grid, cfg, seed, 'val', n_classes * n_train, jobs
    )
    return train, val


def generate_class15(
    n_train_per_class: int,
    n_val_per_class: int,
    cfg: NoiseConfig = None,
    grid: GridSpec = None,
    seed: int = 0,
    jobs: int = 1,
):
    """
    Train and validation sets for the 15 ``(m1, m2)`` classes.

    States sit on the equator (``theta = pi/2``) with ``phi`` uniform in
    ``[0, 2 pi)``. Validation sample indices continue after the training
    ones, so the splits never share a sample.

    Returns:
        ``(train, val)`` datasets.

    """
    return _generate(
        CLASS15,
        _class15_draw,
        n_train_per_class,
        n_val_per_class,
        cfg,
        grid,
        seed,
        jobs,
        len(CLASS15_PAIRS),
    )


def generate_sector26(
    n_train_per_class: int,
    n_val_per_class: int,
    cfg: NoiseConfig = None,
    grid: GridSpec = None,
    seed: int = 0,
    jobs: int = 1,
):
    """
    Train and validation sets for the 26 Poincare sphere sectors.

    States use ``m1 = -1, m2 = 1`` with ``(theta, phi)`` uniform over each
    sector's solid angle.

    Returns:
        ``(train, val)`` datasets.

    """
    return _generate(
        SECTOR26,
        _sector26_draw,
        n_train_per_class,
        n_val_per_class,
        cfg,
        grid,
        seed,
        jobs,
        SECTOR_COUNT,
    )


def generate_regression(
    n_train: int,
    n_val: int,
    cfg: NoiseConfig = None,
    grid: GridSpec = None,
    seed: int = 0,
    jobs: int = 1,
):
    """
    States uniform over the whole ``m1 = -1, m2 = 1`` sphere.

    Labels are sector indices; the true angles ride along for sphere
    discovery and Bloch reconstruction.

    """
    _check_counts(n_train, n_val)
    grid = grid or GridSpec()
    cfg = cfg or NoiseConfig()

    def build(count, split, offset):
        states, labels, indices = [], [], []
        for k in range(count):
            index = offset + k
            state, label = _sphere_draw(None, stage_rng(seed, index, 'state'))
            states.append(state)
            labels.append(label)
            indices.append(index)

        planes = render_planes(states, indices, grid, cfg, jobs)
        logger.info('Generated %d regression %s images', count, split)
        return Dataset(
            planes=planes,
            labels=np.array(labels),
            label_spec=LabelSpec.for_task(REGRESSION),
            angles=np.array([(s.theta, s.phi) for s in states]),
            sample_indices=np.array(indices),
            provenance=_provenance(
                REGRESSION, grid, cfg, seed, split, offset, count=count
            ),
        )

    return build(n_train, 'train', 0), build(n_val, 'val', n_train)


def _class_indices(ds: Dataset, label: int) -> np.ndarray:
    return np.flatnonzero(ds.labels == label)


def subsample_per_class(ds: Dataset, n: int, seed: int = 0) -> Dataset:
    """Keep ``n`` seeded-random images of every class (all if fewer)."""
    _check_counts(n)
    rng = stage_rng(seed, 0, 'shuffle')
    keep = []
    for label in range(ds.n_classes):
        members = _class_indices(ds, label)
        if len(members) > n:
            members = np.sort(rng.choice(members, size=n, replace=False))
        keep.extend(members.tolist())

    return ds.subset(sorted(keep), per_class_limit=int(n))


def split_halves(ds: Dataset):
    """
    Class-stratified half/half split.

    Alternate images of every class go to the first and second half.

    Returns:
        ``(first, second)`` datasets.

    """
    first, second = [], []
    for label in range(ds.n_classes):
        members = _class_indices(ds, label)
        first.extend(members[0::2].tolist())
        second.extend(members[1::2].tolist())

    return (
        ds.subset(sorted(first), half='first'),
        ds.subset(sorted(second), half='second'),
    )


def mix(clean: Dataset, noisy: Dataset, fraction: float, seed: int = 0):
    """
    Replace a fraction of every class of ``clean`` by images from ``noisy``.

    Class sizes stay unchanged; the replaced images and their substitutes are
    chosen by a seeded generator.

    Raises:
        DomainError: fraction outside ``[0, 1]``, mismatched tasks or too few
            noisy images in a class.

    """
    if not 0.0 <= fraction <= 1.0:
        raise DomainError('Mixing fraction must lie in [0, 1]')
    if clean.label_spec != noisy.label_spec:
        raise DomainError('Cannot mix datasets of different tasks')
    if clean.resolution != noisy.resolution:
        raise ShapeMismatchError('Cannot mix datasets of different resolution')

    rng = stage_rng(seed, 1, 'shuffle')
    planes, labels, angles, indices = [], [], [], []
    for label in range(clean.n_classes):
        members = _class_indices(clean, label)
        donors = _class_indices(noisy, label)
        n_swap = int(round(fraction * len(members)))
        if n_swap > len(donors):
            raise DomainError(
                'Class {} needs {} noisy images, only {} available'.format(
                    label, n_swap, len(donors)
                )
            )

        kept = np.sort(rng.permutation(members)[n_swap:])
        taken = np.sort(rng.permutation(donors)[:n_swap])
        for source, picked in ((clean, kept), (noisy, taken)):
            planes.append(source.planes[picked])
            labels.append(source.labels[picked])
            indices.append(source.sample_indices[picked])
            if source.angles is not None:
                angles.append(source.angles[picked])

    return Dataset(
        planes=np.concatenate(planes),
        labels=np.concatenate(labels),
        label_spec=clean.label_spec,
        angles=np.concatenate(angles) if angles else None,
        sample_indices=np.concatenate(indices),
        provenance={
            'task': clean.label_spec.task,
            'mixed': {
                'fraction': float(fraction),
                'seed': int(seed),
                'clean': clean.provenance,
                'noisy': noisy.provenance,
            },
        },
    )
