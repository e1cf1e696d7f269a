# This module
from .dataset import Dataset, LabelSpec
from .noise import NoiseConfig
from .optics import GridSpec, StokesImage, VVBState


__version__ = '0.3.0'
__all__ = [
    '__version__',
    'Dataset',
    'GridSpec',
    'LabelSpec',
    'NoiseConfig',
    'StokesImage',
    'VVBState',
]
