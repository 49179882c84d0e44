"""
策略包
"""
from .types import LabeledDataset, PolicyBundle
from .training import TrainingPlan, TrainingLog, learn_full_policy
from .inference import InferenceResult, classify, classify_random

__all__ = [
    'LabeledDataset', 'PolicyBundle', 'TrainingPlan', 'TrainingLog', 'learn_full_policy',
    'InferenceResult', 'classify', 'classify_random',
]
