"""
策略相关的数据类型
"""
from dataclasses import dataclass, field
from typing import List, Tuple

from utils.errors import ConfigError, EmptyDatasetError, LabelRangeError
from utils.linear_models import LinearModel
from utils.region_features import FeatureExtractor, Image


@dataclass
class LabeledDataset:
    """带标签的图像集合，标签为 class_names 中的下标"""

    items: List[Tuple[Image, int]]
    class_names: List[str]
    filenames: List[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.items:
            raise EmptyDatasetError("数据集为空")
        n_classes = len(self.class_names)
        for position, (_, label) in enumerate(self.items):
            if not 0 <= label < n_classes:
                raise LabelRangeError(f"第 {position} 个样本的标签 {label} 超出 [0, {n_classes - 1}]")

    def __len__(self) -> int:
        return len(self.items)

    @property
    def images(self) -> List[Image]:
        return [image for image, _ in self.items]

    @property
    def labels(self) -> List[int]:
        return [label for _, label in self.items]

    def subset(self, indices) -> "LabeledDataset":
        names = [self.filenames[i] for i in indices] if self.filenames else []
        return LabeledDataset([self.items[i] for i in indices], list(self.class_names), names)


@dataclass(eq=False)
class PolicyBundle:
    """
    完整策略：探索子策略 (π^1, …, π^{B-1}) 加分类策略 f_θ

    sub_policies[t - 1] 保存 π^t。
    """

    f_theta: LinearModel
    sub_policies: List[LinearModel]
    grid: Tuple[int, int]
    extractor: FeatureExtractor
    budget: int
    start_region: int
    class_names: List[str]

    def __post_init__(self):
        if len(self.grid) != 2:
            raise ConfigError(f"网格应为 (行数, 列数)，实际为 {list(self.grid)}")
        self.grid = (int(self.grid[0]), int(self.grid[1]))
        if min(self.grid) < 1:
            raise ConfigError(f"网格 {self.grid[0]}x{self.grid[1]} 不合法")
        grid_size = self.grid_size
        if not 1 <= self.budget <= grid_size:
            raise ConfigError(f"预算 B={self.budget} 必须在 [1, {grid_size}] 内")
        if len(self.sub_policies) != self.budget - 1:
            raise ConfigError(f"子策略数量 {len(self.sub_policies)} 应为 B-1={self.budget - 1}")
        if not 0 <= self.start_region < grid_size:
            raise ConfigError(f"起始区域 {self.start_region} 超出 [0, {grid_size - 1}]")
        dim = self.extractor.k * grid_size
        if self.f_theta.dim != dim or self.f_theta.n_outputs != len(self.class_names):
            raise ConfigError(
                f"f_θ 形状 ({self.f_theta.n_outputs}, {self.f_theta.dim}) 与 ({len(self.class_names)}, {dim}) 不符"
            )
        for t, policy in enumerate(self.sub_policies, 1):
            if policy.dim != dim or policy.n_outputs != grid_size:
                raise ConfigError(f"π^{t} 形状 ({policy.n_outputs}, {policy.dim}) 与 ({grid_size}, {dim}) 不符")

    @property
    def grid_size(self) -> int:
        return self.grid[0] * self.grid[1]

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolicyBundle):
            return NotImplemented
        return (
            self.f_theta == other.f_theta
            and len(self.sub_policies) == len(other.sub_policies)
            and all(a == b for a, b in zip(self.sub_policies, other.sub_policies))
            and self.grid == other.grid
            and self.extractor == other.extractor
            and self.budget == other.budget
            and self.start_region == other.start_region
            and list(self.class_names) == list(other.class_names)
        )
