"""
预算推理

从起始区域出发，依次用 π^1 … π^{B-1} 选择下一个区域，最后用 f_θ 分类。
只有被获取的区域才会计算特征，phi_calls 记录每次推理的特征计算次数。
"""
from dataclasses import dataclass, field
from itertools import combinations
from typing import List, Optional, Sequence, Tuple

import numpy as np

from policies.types import PolicyBundle
from utils.errors import ConfigError, DimensionTooSmallError, IncompatibleImageError
from utils.linear_models import LinearModel, predict_class, predict_region, score
from utils.region_features import FeatureExtractor, Image, LazyRegionFeatures, decompose


@dataclass
class InferenceResult:
    """单张图像的推理结果"""

    predicted: int
    trajectory: List[int]
    phi_calls: int
    scores: List[np.ndarray] = field(default_factory=list)


def image_features(image: Image, grid: Tuple[int, int], extractor: FeatureExtractor) -> LazyRegionFeatures:
    """为推理建立一次性的惰性特征会话"""
    try:
        region_grid = decompose(image, *grid)
        extractor.check_grid(region_grid)
    except DimensionTooSmallError as e:
        raise IncompatibleImageError(
            f"图像 {image.width}x{image.height} 与网格 {grid[0]}x{grid[1]} 不兼容: {e}"
        ) from e
    return LazyRegionFeatures(image, region_grid, extractor)


def classify(image: Image, bundle: PolicyBundle, trace: bool = False) -> InferenceResult:
    """按学习到的探索策略获取 B 个区域并分类"""
    features = image_features(image, bundle.grid, bundle.extractor)
    trajectory = [bundle.start_region]
    aggregated = features.aggregate(trajectory)
    scores = []

    for policy in bundle.sub_policies:
        if trace:
            scores.append(score(policy, aggregated))
        region = predict_region(policy, aggregated, trajectory)
        aggregated = features.extend(aggregated, region)
        trajectory.append(region)

    if trace:
        scores.append(score(bundle.f_theta, aggregated))
    return InferenceResult(predict_class(bundle.f_theta, aggregated), trajectory, features.phi_calls, scores)


def classify_random(image: Image, f_theta: LinearModel, budget: int, rng: np.random.Generator, *,
                    grid: Tuple[int, int], extractor: FeatureExtractor,
                    start_region: int) -> InferenceResult:
    """随机探索基线：起始区域固定，其余 B-1 个区域均匀随机抽取，用同一个 f_θ 分类"""
    grid_size = grid[0] * grid[1]
    if not 1 <= budget <= grid_size:
        raise ConfigError(f"预算 B={budget} 必须在 [1, {grid_size}] 内")
    features = image_features(image, grid, extractor)
    others = np.array([r for r in range(grid_size) if r != start_region])
    rest = rng.choice(others, size=budget - 1, replace=False) if budget > 1 else []
    trajectory = [start_region] + [int(r) for r in rest]
    aggregated = features.aggregate(trajectory)
    return InferenceResult(predict_class(f_theta, aggregated), trajectory, features.phi_calls)


def classify_bundle_random(image: Image, bundle: PolicyBundle, rng: np.random.Generator) -> InferenceResult:
    """使用模型自带的 f_θ、网格和起始区域的随机基线"""
    return classify_random(image, bundle.f_theta, bundle.budget, rng, grid=bundle.grid,
                           extractor=bundle.extractor, start_region=bundle.start_region)


def predict_full(image: Image, bundle: PolicyBundle) -> int:
    """获取全部区域时的预测（全信息参照）"""
    features = image_features(image, bundle.grid, bundle.extractor)
    return predict_class(bundle.f_theta, features.aggregate(range(bundle.grid_size)))


def expected_random_accuracy(items: Sequence[Tuple[Image, int]], f_theta: LinearModel, budget: int, *,
                             grid: Tuple[int, int], extractor: FeatureExtractor,
                             start_region: int) -> float:
    """
    随机基线的精确期望准确率

    枚举所有包含起始区域的 B 区域子集（共 C(N·M-1, B-1) 个），只适用于小网格。
    """
    grid_size = grid[0] * grid[1]
    others = [r for r in range(grid_size) if r != start_region]
    subsets = list(combinations(others, budget - 1))
    correct = 0
    for image, label in items:
        features = image_features(image, grid, extractor)
        for subset in subsets:
            aggregated = features.aggregate([start_region, *subset])
            correct += predict_class(f_theta, aggregated) == label
    return correct / (len(items) * len(subsets))
