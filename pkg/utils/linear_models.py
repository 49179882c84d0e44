"""
线性模型

一对多（one-vs-all）铰链损失感知机，既用作分类策略 f_θ，也用作每一步的探索子策略 π^t。
权重矩阵最后一列为偏置（输入末尾追加常数 1）。
"""
from dataclasses import dataclass
from typing import Collection, List, Sequence, Tuple

import numpy as np

from config.settings import (
    DEFAULT_AVERAGED,
    DEFAULT_EPOCHS,
    DEFAULT_L2,
    DEFAULT_LEARNING_RATE,
    DEFAULT_SEED,
)
from utils.errors import (
    AllRegionsAcquiredError,
    ConfigError,
    DimensionMismatchError,
    EmptyDatasetError,
    LabelRangeError,
    RegionIndexError,
)
from utils.logger import get_logger

logger = get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """
    感知机训练参数

    参数:
        epochs: 训练轮数
        learning_rate: 学习率
        l2: L2 正则系数（每步权重乘以 1 - lr·l2）
        seed: 打乱样本顺序的随机种子
        averaged: 是否返回权重迭代的平均值
    """

    epochs: int = DEFAULT_EPOCHS
    learning_rate: float = DEFAULT_LEARNING_RATE
    l2: float = DEFAULT_L2
    seed: int = DEFAULT_SEED
    averaged: bool = DEFAULT_AVERAGED

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs 必须 ≥ 1，实际为 {self.epochs}")
        if not self.learning_rate > 0:
            raise ConfigError(f"learning_rate 必须为正，实际为 {self.learning_rate}")
        if self.l2 < 0:
            raise ConfigError(f"l2 不能为负，实际为 {self.l2}")

    def with_seed(self, seed: int) -> "TrainConfig":
        return TrainConfig(self.epochs, self.learning_rate, self.l2, seed, self.averaged)


@dataclass(eq=False)
class LinearModel:
    """多输出线性模型，weights 形状为 (n_outputs, dim + 1)"""

    weights: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        if self.weights.ndim != 2 or self.weights.shape[1] < 2:
            raise ConfigError(f"权重矩阵形状不合法: {self.weights.shape}")
        if not np.all(np.isfinite(self.weights)):
            raise ConfigError("权重矩阵包含非有限值")

    @classmethod
    def zeros(cls, n_outputs: int, dim: int) -> "LinearModel":
        return cls(np.zeros((n_outputs, dim + 1)))

    @property
    def n_outputs(self) -> int:
        return int(self.weights.shape[0])

    @property
    def dim(self) -> int:
        return int(self.weights.shape[1] - 1)

    def __eq__(self, other) -> bool:
        return isinstance(other, LinearModel) and np.array_equal(self.weights, other.weights)


def score(model: LinearModel, features: np.ndarray) -> np.ndarray:
    """每个输出的线性得分 w_c · [x; 1]"""
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (model.dim,):
        raise DimensionMismatchError(f"输入维度 {features.shape} 与模型维度 {model.dim} 不符")
    return model.weights[:, :-1] @ features + model.weights[:, -1]


def predict_class(model: LinearModel, features: np.ndarray) -> int:
    """得分最大的类别，并列时取最小索引"""
    return int(np.argmax(score(model, features)))


def predict_region(model: LinearModel, features: np.ndarray, acquired: Collection[int]) -> int:
    """在未获取的区域中选择得分最大的一个，并列时取最小索引"""
    scores = score(model, features)
    acquired = set(acquired)
    if len(acquired) >= model.n_outputs:
        raise AllRegionsAcquiredError(f"全部 {model.n_outputs} 个区域均已获取")
    for region_index in acquired:
        if not 0 <= region_index < model.n_outputs:
            raise RegionIndexError(f"已获取区域 {region_index} 超出范围 [0, {model.n_outputs - 1}]")
    scores[list(acquired)] = -np.inf
    return int(np.argmax(scores))


def hinge_loss(model: LinearModel, examples: Sequence[Tuple[np.ndarray, int]]) -> float:
    """一对多铰链损失之和"""
    total = 0.0
    for features, label in examples:
        targets = -np.ones(model.n_outputs)
        targets[label] = 1.0
        total += float(np.maximum(0.0, 1.0 - targets * score(model, features)).sum())
    return total


def fit(examples: Sequence[Tuple[np.ndarray, int]], n_outputs: int, config: TrainConfig) -> LinearModel:
    """
    训练一对多铰链感知机

    对每个输出 c，目标 t = +1 当且仅当标签为 c，否则 -1。每一步先做 L2 收缩
    w_c *= (1 - lr·l2)，再对 t·(w_c·[x;1]) < 1 的输出执行 w_c += lr·t·[x;1]。
    每轮样本顺序由带种子的随机数打乱，结果只取决于样本（按给定顺序）和配置。
    """
    if not examples:
        raise EmptyDatasetError("训练集为空，无法训练模型")

    inputs = np.asarray([np.asarray(features, dtype=np.float64) for features, _ in examples])
    labels = np.asarray([label for _, label in examples], dtype=np.int64)
    if inputs.ndim != 2:
        raise DimensionMismatchError("训练样本的特征维度不一致")
    bad = np.flatnonzero((labels < 0) | (labels >= n_outputs))
    if len(bad):
        raise LabelRangeError(f"第 {int(bad[0])} 个样本的标签 {int(labels[bad[0]])} 超出 [0, {n_outputs - 1}]")

    n_examples, dim = inputs.shape
    augmented = np.hstack([inputs, np.ones((n_examples, 1))])
    weights = np.zeros((n_outputs, dim + 1))
    weight_sum = np.zeros_like(weights)
    shrink = 1.0 - config.learning_rate * config.l2
    rng = np.random.default_rng(config.seed)
    steps = 0

    for _ in range(config.epochs):
        for i in rng.permutation(n_examples):
            x = augmented[i]
            targets = -np.ones(n_outputs)
            targets[labels[i]] = 1.0
            violated = targets * (weights @ x) < 1.0
            weights *= shrink
            if violated.any():
                weights[violated] += config.learning_rate * np.outer(targets[violated], x)
            if config.averaged:
                weight_sum += weights
            steps += 1

    model = LinearModel(weight_sum / steps if config.averaged else weights)
    logger.debug("感知机训练完成: 样本=%d, 输出=%d, 维度=%d, 步数=%d", n_examples, n_outputs, dim, steps)
    return model
