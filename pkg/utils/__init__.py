"""
工具包
"""
from .region_features import FeatureExtractor, Image, RegionGrid, decompose, phi, gamma, aggregate
from .linear_models import LinearModel, TrainConfig, fit, predict_class, predict_region, score

__all__ = [
    'FeatureExtractor', 'Image', 'RegionGrid', 'decompose', 'phi', 'gamma', 'aggregate',
    'LinearModel', 'TrainConfig', 'fit', 'predict_class', 'predict_region', 'score',
]
