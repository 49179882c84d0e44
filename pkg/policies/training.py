"""
策略学习

先在随机 B 区域子集上训练分类策略 f_θ，再从 π^{B-1} 倒序到 π^1 逐个学习探索子策略：
对每个采样前缀尝试所有剩余区域，用已学好的后续子策略和 f_θ 做 rollout，
能得到正确类别的候选区域作为当前子策略的监督信号。
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from config.settings import DEFAULT_BUDGET, DEFAULT_SAMPLES_PER_IMAGE, DEFAULT_SEED, DEFAULT_WORKERS
from policies.types import LabeledDataset, PolicyBundle
from utils.errors import ConfigError, EmptyDatasetError, SuffixLengthError, TrajectoryLengthError
from utils.linear_models import LinearModel, TrainConfig, fit, predict_class, predict_region
from utils.logger import get_logger
from utils.region_features import FeatureExtractor, LazyRegionFeatures, central_region, decompose

logger = get_logger(__name__)

CLASSIFIER_PHASE = 0


def derived_seed(seed: int, *keys: int) -> int:
    """由主种子和若干键派生独立的子种子"""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


def image_rng(seed: int, phase: int, image_index: int) -> np.random.Generator:
    """每张图像、每个阶段独立的随机数生成器，与并行方式无关"""
    return np.random.default_rng([seed, phase, image_index])


@dataclass(frozen=True)
class TrainingPlan:
    """
    训练计划

    参数:
        budget: 预算 B
        grid: 网格 (N, M)
        extractor: 区域特征提取器
        samples_per_image: 每张图像采样的前缀数 n
        classifier_config: f_θ 的训练参数
        policy_config: 各 π^t 的训练参数
        seed: 采样种子
        start_region: 起始区域，默认网格中心
        workers: 构建训练样本的线程数
    """

    budget: int = DEFAULT_BUDGET
    grid: Tuple[int, int] = (4, 4)
    extractor: FeatureExtractor = field(default_factory=FeatureExtractor)
    samples_per_image: int = DEFAULT_SAMPLES_PER_IMAGE
    classifier_config: TrainConfig = field(default_factory=TrainConfig)
    policy_config: TrainConfig = field(default_factory=TrainConfig)
    seed: int = DEFAULT_SEED
    start_region: Optional[int] = None
    workers: int = DEFAULT_WORKERS

    def __post_init__(self):
        grid_size = self.grid_size
        if self.samples_per_image < 1:
            raise ConfigError(f"samples_per_image 必须 ≥ 1，实际为 {self.samples_per_image}")
        if not 1 <= self.budget <= grid_size:
            raise ConfigError(f"预算 B={self.budget} 必须在 [1, {grid_size}] 内")
        if not 0 <= self.start_region_index < grid_size:
            raise ConfigError(f"起始区域 {self.start_region} 超出 [0, {grid_size - 1}]")
        if self.seed < 0:
            raise ConfigError(f"种子必须非负，实际为 {self.seed}")
        if self.workers < 1:
            raise ConfigError(f"workers 必须 ≥ 1，实际为 {self.workers}")

    @property
    def grid_size(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def start_region_index(self) -> int:
        if self.start_region is None:
            return central_region(*self.grid)
        return self.start_region


@dataclass
class TrainingLog:
    """纯文本训练日志：各阶段样本数、rollout 次数、特征计算次数和耗时"""

    lines: List[str] = field(default_factory=list)
    build_order: List[Tuple[int, Tuple[int, ...]]] = field(default_factory=list)
    rollouts: dict = field(default_factory=dict)

    def record(self, phase: str, **values):
        text = ", ".join(f"{key}={value}" for key, value in values.items())
        self.lines.append(f"[{phase}] {text}")
        logger.info("[%s] %s", phase, text)

    def record_build(self, k: int, uses: Sequence[int]):
        """记录 π^k 训练时用到的后续子策略编号"""
        self.build_order.append((k, tuple(uses)))
        used = ",".join(f"pi{t}" for t in uses) or "-"
        self.lines.append(f"[build] pi{k} <- {used},f_theta")

    def text(self) -> str:
        return "\n".join(self.lines) + "\n"

    def write(self, path: Path):
        Path(path).write_text(self.text(), encoding="utf-8")


@dataclass(frozen=True)
class SupervisionPair:
    """π^k 的一条监督样本：前缀的 Φ 和一个 rollout 正确的候选区域"""

    image_index: int
    prefix: Tuple[int, ...]
    candidate: int
    features: np.ndarray


def _map_images(plan: TrainingPlan, fn: Callable[[int], object], count: int) -> list:
    """按图像顺序执行 fn，结果顺序与线程数无关"""
    if plan.workers == 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=plan.workers) as executor:
        return list(executor.map(fn, range(count)))


def feature_caches(data: LabeledDataset, plan: TrainingPlan) -> List[LazyRegionFeatures]:
    """为训练集每张图像建立惰性特征缓存"""
    caches = []
    for image in data.images:
        grid = decompose(image, *plan.grid)
        plan.extractor.check_grid(grid)
        caches.append(LazyRegionFeatures(image, grid, plan.extractor))
    return caches


def sample_trajectory_prefix(length: int, grid_size: int, start_region: int,
                             rng: np.random.Generator) -> List[int]:
    """随机探索前缀：首元素固定为起始区域，其余从其他区域中无放回均匀抽取"""
    if not 1 <= length <= grid_size:
        raise TrajectoryLengthError(f"前缀长度 {length} 超出 [1, {grid_size}]")
    others = np.array([r for r in range(grid_size) if r != start_region])
    rest = rng.choice(others, size=length - 1, replace=False) if length > 1 else []
    return [start_region] + [int(r) for r in rest]


def build_classifier_examples(data: LabeledDataset, plan: TrainingPlan,
                              caches: Optional[List[LazyRegionFeatures]] = None
                              ) -> List[Tuple[np.ndarray, int]]:
    """每张图像采样 n 个随机 B 前缀，得到 (Φ, y) 样本"""
    caches = caches if caches is not None else feature_caches(data, plan)
    start = plan.start_region_index

    def examples_for(index: int):
        rng = image_rng(plan.seed, CLASSIFIER_PHASE, index)
        label = data.items[index][1]
        out = []
        for _ in range(plan.samples_per_image):
            prefix = sample_trajectory_prefix(plan.budget, plan.grid_size, start, rng)
            out.append((caches[index].aggregate(prefix), label))
        return out

    per_image = _map_images(plan, examples_for, len(data))
    return [example for chunk in per_image for example in chunk]


def learn_classifier(data: LabeledDataset, plan: TrainingPlan,
                     caches: Optional[List[LazyRegionFeatures]] = None,
                     log: Optional[TrainingLog] = None) -> LinearModel:
    """在随机 B 区域子集上训练 f_θ"""
    began = time.perf_counter()
    caches = caches if caches is not None else feature_caches(data, plan)
    examples = build_classifier_examples(data, plan, caches)
    model = fit(examples, len(data.class_names), plan.classifier_config.with_seed(
        derived_seed(plan.seed, CLASSIFIER_PHASE)))
    if log is not None:
        log.record("f_theta", examples=len(examples), phi_calls=sum(c.phi_calls for c in caches),
                   seconds=f"{time.perf_counter() - began:.3f}")
    return model


def rollout_trajectory(policies: Sequence[LinearModel], f_theta: LinearModel,
                       features: LazyRegionFeatures, prefix: Sequence[int],
                       budget: int) -> Tuple[List[int], int]:
    """
    从前缀出发依次使用后续子策略贪心扩展到 B 个区域，再用 f_θ 分类

    返回 (完整轨迹, 预测类别)。
    """
    if len(prefix) + len(policies) != budget:
        raise SuffixLengthError(
            f"前缀长度 {len(prefix)} 加后续子策略数 {len(policies)} 不等于预算 {budget}"
        )
    if len(set(prefix)) != len(prefix):
        raise TrajectoryLengthError(f"前缀 {list(prefix)} 含重复区域")

    trajectory = list(prefix)
    aggregated = features.aggregate(trajectory)
    for policy in policies:
        region = predict_region(policy, aggregated, trajectory)
        aggregated = features.extend(aggregated, region)
        trajectory.append(region)
    return trajectory, predict_class(f_theta, aggregated)


def rollout(policies: Sequence[LinearModel], f_theta: LinearModel, features: LazyRegionFeatures,
            prefix: Sequence[int], budget: int) -> int:
    """一次确定性 rollout 的预测类别"""
    return rollout_trajectory(policies, f_theta, features, prefix, budget)[1]


def build_subpolicy_examples(k: int, later: Sequence[LinearModel], f_theta: LinearModel,
                             data: LabeledDataset, plan: TrainingPlan,
                             caches: Optional[List[LazyRegionFeatures]] = None
                             ) -> Tuple[List[SupervisionPair], int]:
    """
    构建 π^k 的监督样本

    每张图像采样 n 个长度为 k 的前缀，对每个不在前缀中的候选区域做一次 rollout，
    预测正确的候选区域都成为 (Φ(前缀), 候选) 样本。返回 (样本, rollout 次数)。
    """
    if not 1 <= k <= plan.budget - 1:
        raise ConfigError(f"子策略编号 k={k} 必须在 [1, {plan.budget - 1}] 内")
    if len(later) != plan.budget - 1 - k:
        raise SuffixLengthError(f"π^{k} 需要 {plan.budget - 1 - k} 个后续子策略，实际为 {len(later)}")

    caches = caches if caches is not None else feature_caches(data, plan)
    start = plan.start_region_index

    def pairs_for(index: int):
        rng = image_rng(plan.seed, k, index)
        label = data.items[index][1]
        cache = caches[index]
        pairs, count = [], 0
        for _ in range(plan.samples_per_image):
            prefix = sample_trajectory_prefix(k, plan.grid_size, start, rng)
            aggregated = cache.aggregate(prefix)
            for candidate in range(plan.grid_size):
                if candidate in prefix:
                    continue
                count += 1
                if rollout(later, f_theta, cache, prefix + [candidate], plan.budget) == label:
                    pairs.append(SupervisionPair(index, tuple(prefix), candidate, aggregated))
        return pairs, count

    per_image = _map_images(plan, pairs_for, len(data))
    pairs = [pair for chunk, _ in per_image for pair in chunk]
    return pairs, sum(count for _, count in per_image)


def learn_subpolicy(k: int, later: Sequence[LinearModel], f_theta: LinearModel,
                    data: LabeledDataset, plan: TrainingPlan,
                    caches: Optional[List[LazyRegionFeatures]] = None,
                    log: Optional[TrainingLog] = None) -> LinearModel:
    """学习探索子策略 π^k（later 为 π^{k+1} … π^{B-1}）"""
    began = time.perf_counter()
    caches = caches if caches is not None else feature_caches(data, plan)
    pairs, rollouts = build_subpolicy_examples(k, later, f_theta, data, plan, caches)
    if not pairs:
        raise EmptyDatasetError(
            f"子策略 π^{k} 没有任何候选区域的 rollout 预测正确（共 {rollouts} 次 rollout），无法训练"
        )
    model = fit([(pair.features, pair.candidate) for pair in pairs], plan.grid_size,
                plan.policy_config.with_seed(derived_seed(plan.seed, k)))
    if log is not None:
        log.rollouts[k] = rollouts
        log.record(f"pi{k}", examples=len(pairs), rollouts=rollouts,
                   phi_calls=sum(c.phi_calls for c in caches),
                   seconds=f"{time.perf_counter() - began:.3f}")
    return model


def learn_full_policy(data: LabeledDataset, plan: TrainingPlan,
                      log: Optional[TrainingLog] = None) -> PolicyBundle:
    """完整学习流程：先学 f_θ，再按 k = B-1 … 1 倒序学习各子策略"""
    log = log if log is not None else TrainingLog()
    log.record("plan", images=len(data), classes=len(data.class_names), budget=plan.budget,
               grid=f"{plan.grid[0]}x{plan.grid[1]}", samples_per_image=plan.samples_per_image,
               extractor=plan.extractor.kind, k=plan.extractor.k, seed=plan.seed)

    caches = feature_caches(data, plan)
    f_theta = learn_classifier(data, plan, caches, log)

    later: List[LinearModel] = []
    for k in range(plan.budget - 1, 0, -1):
        log.record_build(k, range(k + 1, plan.budget))
        later.insert(0, learn_subpolicy(k, later, f_theta, data, plan, caches, log))

    return PolicyBundle(
        f_theta=f_theta,
        sub_policies=later,
        grid=plan.grid,
        extractor=plan.extractor,
        budget=plan.budget,
        start_region=plan.start_region_index,
        class_names=list(data.class_names),
    )
