from typing import Tuple

import numpy as np

from policies.types import LabeledDataset, PolicyBundle
from utils.linear_models import LinearModel
from utils.region_features import FeatureExtractor, Image


def random_image(rng: np.random.Generator, width: int = 16, height: int = 16) -> Image:
    return Image(rng.integers(0, 256, size=(height, width)))


def random_bundle(rng: np.random.Generator, grid: Tuple[int, int] = (4, 4), k: int = 4, budget: int = 3,
                  n_classes: int = 3, start_region: int = 5) -> PolicyBundle:
    grid_size = grid[0] * grid[1]
    dim = k * grid_size
    return PolicyBundle(
        f_theta=LinearModel(rng.normal(size=(n_classes, dim + 1))),
        sub_policies=[LinearModel(rng.normal(size=(grid_size, dim + 1))) for _ in range(budget - 1)],
        grid=grid,
        extractor=FeatureExtractor(k=k),
        budget=budget,
        start_region=start_region,
        class_names=[f"class{c}" for c in range(n_classes)],
    )


def random_dataset(rng: np.random.Generator, n_items: int = 12, n_classes: int = 3,
                   size: Tuple[int, int] = (16, 16)) -> LabeledDataset:
    items = [(random_image(rng, *size), int(i % n_classes)) for i in range(n_items)]
    return LabeledDataset(items, [f"class{c}" for c in range(n_classes)])




def level_bin(level: int, k: int) -> int:
    return level * k // 256


def pointer_models(layout, grid_size: int, k: int, n_classes: int, miss_class: bool = False):
    """
    指针任务的手工模型：π^1 读取指针编码跳到对应目标区域，f_θ 读取目标区域的类别编码

    miss_class 为真时 f_θ 多一个输出，没看到目标区域时总是预测它（永远错误）。
    """
    dim = k * grid_size
    policy = np.zeros((grid_size, dim + 1))
    for target, region in enumerate(layout.target_regions):
        policy[region, layout.pointer_region * k + level_bin(layout.pointer_level(target), k)] = 1.0

    f_theta = np.zeros((n_classes + int(miss_class), dim + 1))
    for region in layout.target_regions:
        for c in range(n_classes):
            f_theta[c, region * k + level_bin(layout.class_level(c), k)] = 1.0
    if miss_class:
        f_theta[n_classes, -1] = 0.5
    return LinearModel(policy), LinearModel(f_theta)


def pointer_bundle(layout, grid: Tuple[int, int], k: int, n_classes: int) -> PolicyBundle:
    policy, f_theta = pointer_models(layout, grid[0] * grid[1], k, n_classes)
    return PolicyBundle(f_theta=f_theta, sub_policies=[policy], grid=grid, extractor=FeatureExtractor(k=k),
                        budget=2, start_region=layout.pointer_region,
                        class_names=[f"class{c}" for c in range(n_classes)])
