"""
Experimental-like imperfections for simulated VVB images.

Source-side imperfections (beam displacement, waist error, radial mode
impurity, polarization crosstalk) act on the Jones field; detector-side
imperfections (relative intensity noise, uniform background) act on the six
analyzer intensities behind a Stokes image.

Every random draw comes from a generator keyed by
``(seed, sample_index, stage)``, so a sample's noise does not depend on the
order in which samples are produced.
"""

# Standard Library
import math
from dataclasses import asdict, dataclass, fields, replace

# Scientific
import numpy as np

# This module
from .errors import ConfigError, DomainError
from .optics import (
    BASES,
    CLEAN_THRESHOLD,
    NOISY_THRESHOLD,
    GridSpec,
    JonesField,
    StokesImage,
    VVBState,
    rotate_polarization,
    stokes_from_intensities,
    synthesize,
)


STAGE_TAGS = {
    'center': 1,
    'waist': 2,
    'rotation': 3,
    'detector': 4,
    'state': 5,
    'shuffle': 6,
    'init': 7,
}

# Jittered waists never shrink below this fraction of the nominal waist.
MIN_WAIST_FACTOR = 0.05

PRESETS = {
    'none': {},
    'labproxy': {
        'center_jitter_sigma': 0.05,
        'waist_jitter_rel': 0.03,
        'impurity_eps': 0.15,
        'pol_crosstalk_rad': 0.05,
        'intensity_noise_rel': 0.03,
        'background_rel': 0.02,
    },
}


def stage_rng(seed: int, sample_index: int, stage: str) -> np.random.Generator:
    """
    Counter-based generator for one noise stage of one sample.

    Args:
        seed: Run seed.
        sample_index: Global index of the sample within its dataset.
        stage: Key of ``STAGE_TAGS``.

    Returns:
        Philox-backed numpy generator.

    """
    entropy = [int(seed), int(sample_index), STAGE_TAGS[stage]]
    sequence = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(sequence))


@dataclass(frozen=True)
class NoiseConfig:
    seed: int = 0
    center_jitter_sigma: float = 0.0
    waist_jitter_rel: float = 0.0
    impurity_eps: float = 0.0
    pol_crosstalk_rad: float = 0.0
    intensity_noise_rel: float = 0.0
    background_rel: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            if f.name == 'seed':
                continue
            value = getattr(self, f.name)
            if not value >= 0:
                raise DomainError(
                    '{} must be >= 0, got {}'.format(f.name, value)
                )
        if self.impurity_eps >= 1:
            raise DomainError(
                'impurity_eps must be < 1, got {}'.format(self.impurity_eps)
            )

    @classmethod
    def preset(cls, name: str, seed: int = 0, **overrides) -> 'NoiseConfig':
        try:
            values = dict(PRESETS[name])
        except KeyError:
            raise ConfigError(
                'Unknown noise preset "{}"; known: {}'.format(
                    name, ', '.join(sorted(PRESETS))
                )
            )
        values.update(overrides)
        return cls(seed=seed, **values)

    @classmethod
    def from_dict(cls, data: dict) -> 'NoiseConfig':
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    def with_seed(self, seed: int) -> 'NoiseConfig':
        return replace(self, seed=seed)

    @property
    def detector_active(self) -> bool:
        return self.intensity_noise_rel > 0 or self.background_rel > 0

    @property
    def dark_threshold(self) -> float:
        return NOISY_THRESHOLD if self.detector_active else CLEAN_THRESHOLD


def perturb_field(
    state: VVBState, grid: GridSpec, cfg: NoiseConfig, sample_index: int
) -> JonesField:
    """
    Render a state through an imperfect source.

    Stages, each skipped when its strength is zero: beam center displaced by
    a Gaussian draw (std ``center_jitter_sigma * waist`` per axis), waist
    scaled by ``1 + N(0, waist_jitter_rel)``, every ``LG_m0`` replaced by
    ``sqrt(1 - eps^2) LG_m0 + eps LG_m1``, then a global polarization
    rotation by ``N(0, pol_crosstalk_rad)``. With every strength zero the
    result is bit-identical to :func:`vvb_learn.optics.render`.

    """
    if cfg.impurity_eps >= 1:
        raise DomainError('impurity_eps must be < 1')

    center = (0.0, 0.0)
    if cfg.center_jitter_sigma:
        rng = stage_rng(cfg.seed, sample_index, 'center')
        dx, dy = rng.normal(0.0, cfg.center_jitter_sigma * grid.waist, 2)
        center = (float(dx), float(dy))

    waist = grid.waist
    if cfg.waist_jitter_rel:
        rng = stage_rng(cfg.seed, sample_index, 'waist')
        factor = 1.0 + rng.normal(0.0, cfg.waist_jitter_rel)
        waist = grid.waist * max(factor, MIN_WAIST_FACTOR)

    field = synthesize(state, grid, center, waist, cfg.impurity_eps)

    if cfg.pol_crosstalk_rad:
        rng = stage_rng(cfg.seed, sample_index, 'rotation')
        field = rotate_polarization(
            field, float(rng.normal(0.0, cfg.pol_crosstalk_rad))
        )

    return field


def analyzer_intensities(img: StokesImage) -> dict:
    """Invert ``(S, I)`` into the six analyzer intensities."""
    intensity = np.asarray(img.intensity, dtype=np.float64)
    result = {}
    for (first, second), s in zip(BASES, (img.s1, img.s2, img.s3)):
        s = np.asarray(s, dtype=np.float64)
        result[first] = intensity * (1 + s) / 2
        result[second] = intensity * (1 - s) / 2

    return result


def perturb_stokes(
    img: StokesImage, cfg: NoiseConfig, sample_index: int
) -> StokesImage:
    """
    Pass a Stokes image through a noisy detector.

    Each analyzer intensity becomes ``max(0, I (1 + sigma g) + b * peak)``
    with ``g ~ N(0, 1)``. Ratios are recomputed, Stokes vectors longer than
    one are scaled back onto the unit sphere and the post-noise dark
    threshold is applied. Without detector noise the image only makes the
    round trip through the intensities.

    """
    intensities = analyzer_intensities(img)
    threshold = img.threshold

    if cfg.detector_active:
        threshold = cfg.dark_threshold
        peak = float(np.max(intensities['H'] + intensities['V'], initial=0))
        rng = stage_rng(cfg.seed, sample_index, 'detector')
        draws = rng.standard_normal((len(intensities),) + img.intensity.shape)
        background = cfg.background_rel * peak
        for draw, name in zip(draws, sorted(intensities)):
            noisy = intensities[name] * (1 + cfg.intensity_noise_rel * draw)
            intensities[name] = np.maximum(noisy + background, 0.0)

    result = stokes_from_intensities(intensities, threshold)

    norm = np.sqrt(result.norm_squared())
    excess = norm > 1
    if np.any(excess):
        scale = np.ones_like(norm)
        scale[excess] = 1 / norm[excess]
        result = StokesImage(
            result.s1 * scale,
            result.s2 * scale,
            result.s3 * scale,
            result.intensity,
            threshold=threshold,
        )

    return result


def purity(img: StokesImage) -> float:
    """Mean degree of polarization over the lit pixels."""
    lit = img.lit()
    if not np.any(lit):
        return math.nan
    return float(np.mean(np.sqrt(img.norm_squared()[lit])))
