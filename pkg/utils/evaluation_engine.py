"""
评估引擎
"""
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from config.settings import CSV_FLOAT_FORMAT, DEFAULT_SEED, DEFAULT_TRIALS, DEFAULT_WORKERS
from policies.inference import InferenceResult, classify, classify_bundle_random, predict_full
from policies.types import LabeledDataset, PolicyBundle
from utils.errors import ConfigError
from utils.logger import get_logger

logger = get_logger(__name__)


def write_csv(frame: pd.DataFrame, path=None) -> str:
    """写出带表头的 CSV；path 为空时只返回文本"""
    text = frame.to_csv(index=False, lineterminator="\n", float_format=CSV_FLOAT_FORMAT)
    if path is not None:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        Path(path).write_text(text, encoding="utf-8")
    return text


@dataclass
class SweepRow:
    budget: int
    learned_accuracy: float
    learned_std: float
    random_mean: float
    random_std: float
    full_accuracy: float
    mean_phi_calls: float
    mean_wall_time: float
    speedup: float


@dataclass
class SweepReport:
    """预算扫描结果，每个 B 一行"""

    rows: List[SweepRow] = field(default_factory=list)

    def to_frame(self) -> pd.DataFrame:
        columns = list(SweepRow.__dataclass_fields__)
        return pd.DataFrame([[getattr(row, c) for c in columns] for row in self.rows], columns=columns)


@dataclass
class TransitionGraph:
    """
    测试轨迹统计

    counts[i][j] 为区域 j 紧接在区域 i 之后被获取的轨迹数；
    step_counts[t][r] 为第 t 步获取区域 r 的轨迹数。
    """

    grid: Tuple[int, int]
    counts: np.ndarray
    step_counts: np.ndarray
    n_trajectories: int

    @classmethod
    def from_trajectories(cls, trajectories: Sequence[Sequence[int]], grid: Tuple[int, int],
                          budget: int) -> "TransitionGraph":
        grid_size = grid[0] * grid[1]
        counts = np.zeros((grid_size, grid_size), dtype=np.int64)
        step_counts = np.zeros((budget, grid_size), dtype=np.int64)
        for trajectory in trajectories:
            for step, region in enumerate(trajectory):
                step_counts[step, region] += 1
            for source, target in zip(trajectory, trajectory[1:]):
                counts[source, target] += 1
        return cls(grid, counts, step_counts, len(trajectories))

    def transitions_frame(self) -> pd.DataFrame:
        # 同时给出按全部轨迹和按源区域两种归一化
        out_degree = self.counts.sum(axis=1)
        rows = [
            (i, j, int(self.counts[i, j]), self.counts[i, j] / self.n_trajectories,
             self.counts[i, j] / out_degree[i])
            for i, j in zip(*np.nonzero(self.counts))
        ]
        return pd.DataFrame(rows, columns=["source", "target", "count",
                                           "proportion_of_trajectories", "proportion_of_source"])

    def step_frame(self) -> pd.DataFrame:
        n_cols = self.grid[1]
        rows = [
            (step, region, region // n_cols, region % n_cols, int(self.step_counts[step, region]),
             self.step_counts[step, region] / self.n_trajectories)
            for step in range(self.step_counts.shape[0])
            for region in range(self.step_counts.shape[1])
        ]
        return pd.DataFrame(rows, columns=["step", "region", "row", "col", "count", "frequency"])

    def region_frequency_frame(self) -> pd.DataFrame:
        """N×M 网格：获取过该区域的轨迹比例"""
        frequency = self.step_counts.sum(axis=0) / self.n_trajectories
        frame = pd.DataFrame(frequency.reshape(self.grid),
                             columns=[f"col{c}" for c in range(self.grid[1])])
        frame.insert(0, "row", range(self.grid[0]))
        return frame


class EvaluationEngine:
    """评估引擎：准确率、随机基线、预算扫描和轨迹统计"""

    def __init__(self, trials: int = DEFAULT_TRIALS, seed: int = DEFAULT_SEED,
                 workers: int = DEFAULT_WORKERS):
        if trials < 1:
            raise ConfigError(f"随机基线试验次数必须 ≥ 1，实际为 {trials}")
        if workers < 1:
            raise ConfigError(f"workers 必须 ≥ 1，实际为 {workers}")
        self.trials = trials
        self.seed = seed
        self.workers = workers
        self.results: Dict[str, Any] = {}

    def _map(self, fn: Callable[[int], Any], count: int) -> list:
        """按样本顺序汇总结果"""
        if self.workers == 1:
            return [fn(i) for i in range(count)]
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            return list(executor.map(fn, range(count)))

    def classify_all(self, bundle: PolicyBundle, data: LabeledDataset) -> List[Tuple[InferenceResult, float]]:
        """对每个样本推理，返回 (结果, 耗时秒)"""
        def run(index: int):
            began = time.perf_counter()
            result = classify(data.items[index][0], bundle)
            return result, time.perf_counter() - began

        return self._map(run, len(data))

    def random_accuracies(self, bundle: PolicyBundle, data: LabeledDataset) -> List[float]:
        """每次试验的随机基线准确率（与学习策略共用 f_θ）"""
        accuracies = []
        for trial in range(self.trials):
            def run(index: int, trial=trial):
                rng = np.random.default_rng([self.seed, trial, index])
                return classify_bundle_random(data.items[index][0], bundle, rng).predicted

            predictions = self._map(run, len(data))
            accuracies.append(float(np.mean(np.asarray(predictions) == np.asarray(data.labels))))
        return accuracies

    def full_accuracy(self, bundle: PolicyBundle, data: LabeledDataset) -> float:
        predictions = self._map(lambda i: predict_full(data.items[i][0], bundle), len(data))
        return float(np.mean(np.asarray(predictions) == np.asarray(data.labels)))

    def evaluate(self, bundle: PolicyBundle, data: LabeledDataset) -> Dict[str, Any]:
        """在数据集上评估模型"""
        if list(bundle.class_names) != list(data.class_names):
            raise ConfigError(f"模型类别 {bundle.class_names} 与数据集类别 {data.class_names} 不一致")
        outcomes = self.classify_all(bundle, data)
        labels = np.asarray(data.labels)
        predicted = np.asarray([result.predicted for result, _ in outcomes])
        correct = predicted == labels

        per_class = {}
        for c, name in enumerate(data.class_names):
            mask = labels == c
            if mask.any():
                per_class[name] = float(correct[mask].mean())

        filenames = data.filenames or [""] * len(data)
        predictions = pd.DataFrame({
            "index": range(len(data)),
            "filename": filenames,
            "true_label": [data.class_names[y] for y in labels],
            "predicted_label": [data.class_names[y] for y in predicted],
            "correct": correct.astype(int),
            "trajectory": [" ".join(map(str, result.trajectory)) for result, _ in outcomes],
        })

        self.results = {
            "budget": bundle.budget,
            "n_items": len(data),
            "n_correct": int(correct.sum()),
            "accuracy": float(correct.mean()),
            "per_class": per_class,
            "balanced_accuracy": float(np.mean(list(per_class.values()))),
            "mean_phi_calls": float(np.mean([result.phi_calls for result, _ in outcomes])),
            "mean_wall_time": float(np.mean([seconds for _, seconds in outcomes])),
            "predictions": predictions,
            "trajectories": [result.trajectory for result, _ in outcomes],
        }
        return self.results

    def sweep(self, budgets: Sequence[int], splits: Sequence[Tuple[LabeledDataset, LabeledDataset]],
              bundle_for: Callable[[int, LabeledDataset, int], PolicyBundle]) -> SweepReport:
        """
        预算扫描

        对每个 B 和每个划分取得模型（bundle_for(B, 训练集, 划分编号)），在测试集上比较
        学习策略与随机基线，结果在各划分间取平均。
        """
        report = SweepReport()
        for budget in budgets:
            learned, randoms, full, phi_calls, wall_times = [], [], [], [], []
            for repeat, (train, test) in enumerate(splits):
                bundle = bundle_for(budget, train, repeat)
                results = self.evaluate(bundle, test)
                learned.append(results["accuracy"])
                phi_calls.append(results["mean_phi_calls"])
                wall_times.append(results["mean_wall_time"])
                randoms.extend(self.random_accuracies(bundle, test))
                full.append(self.full_accuracy(bundle, test))
            grid_size = bundle.grid_size
            row = SweepRow(budget, float(np.mean(learned)), float(np.std(learned)),
                           float(np.mean(randoms)), float(np.std(randoms)), float(np.mean(full)),
                           float(np.mean(phi_calls)), float(np.mean(wall_times)), grid_size / budget)
            logger.info("B=%d: 学习策略 %.4f, 随机基线 %.4f ± %.4f", budget, row.learned_accuracy,
                        row.random_mean, row.random_std)
            report.rows.append(row)
        return report

    def trajectories(self, bundle: PolicyBundle, data: LabeledDataset) -> TransitionGraph:
        outcomes = self.classify_all(bundle, data)
        return TransitionGraph.from_trajectories([result.trajectory for result, _ in outcomes],
                                                 bundle.grid, bundle.budget)

    def print_results(self, console: Optional[Console] = None, per_class: bool = False):
        """打印评估结果"""
        console = console or Console()
        if not self.results:
            console.print("没有可用的评估结果")
            return

        table = Table(title=f"评估结果 - B={self.results['budget']}")
        table.add_column("指标")
        table.add_column("数值", justify="right")
        table.add_row("样本数", str(self.results["n_items"]))
        table.add_row("正确数", str(self.results["n_correct"]))
        table.add_row("准确率", f"{self.results['accuracy']:.4f}")
        table.add_row("类别平均准确率", f"{self.results['balanced_accuracy']:.4f}")
        table.add_row("平均特征计算次数", f"{self.results['mean_phi_calls']:.2f}")
        table.add_row("平均推理耗时(ms)", f"{self.results['mean_wall_time'] * 1000:.3f}")
        for name, accuracy in (self.results["per_class"].items() if per_class else ()):
            table.add_row(f"  {name}", f"{accuracy:.4f}")
        console.print(table)
