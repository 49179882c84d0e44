"""
预算序列区域分类研究项目主程序
"""
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import typer

from config.settings import (
    BUNDLE_FILE_FORMAT,
    DATA_DIR,
    DEFAULT_AVERAGED,
    DEFAULT_BINS,
    DEFAULT_BUDGET,
    DEFAULT_BUDGETS,
    DEFAULT_CLASSES,
    DEFAULT_EPOCHS,
    DEFAULT_EXTRACTOR,
    DEFAULT_GRID,
    DEFAULT_IMAGE_SIZE,
    DEFAULT_L2,
    DEFAULT_LEARNING_RATE,
    DEFAULT_NOISE_STD,
    DEFAULT_PATCH_SIZE,
    DEFAULT_PER_CLASS,
    DEFAULT_SAMPLES_PER_IMAGE,
    DEFAULT_SEED,
    DEFAULT_TARGETS,
    DEFAULT_TRIALS,
    DEFAULT_WORKERS,
    MODELS_DIR,
    RESULTS_DIR,
    TEST_MANIFEST,
    TRAIN_MANIFEST,
)
from policies.training import TrainingLog, TrainingPlan, derived_seed, learn_full_policy
from policies.types import LabeledDataset, PolicyBundle
from utils.data_io import (
    PointerTaskSpec,
    generate_pointer_task,
    load_bundle,
    load_dataset,
    merge_datasets,
    save_bundle,
    save_dataset,
    split_dataset,
)
from utils.errors import ConfigError, SeqRegionError
from utils.evaluation_engine import EvaluationEngine, write_csv
from utils.linear_models import TrainConfig
from utils.region_features import CODEBOOK, FeatureExtractor, build_codebook, parse_grid

app = typer.Typer(help="预算序列区域分类研究工具")


class ExtractorKind(str, Enum):
    hist = "hist"
    codebook = "codebook"


class Split(str, Enum):
    train = "train"
    test = "test"


def parse_size(text: str) -> Tuple[int, int]:
    """解析 "WxH" 形式的图像尺寸"""
    try:
        width, height = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"尺寸格式应为 WxH，实际为 {text!r}")
    return width, height


def parse_budgets(text: str, grid_size: int) -> List[int]:
    """解析逗号分隔的预算列表"""
    try:
        budgets = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise ConfigError(f"预算列表格式错误: {text!r}")
    if not budgets:
        raise ConfigError("预算列表为空")
    for budget in budgets:
        check_budget(budget, grid_size)
    return budgets


def check_budget(budget: int, grid_size: int):
    if not 1 <= budget <= grid_size:
        raise ConfigError(f"预算 B={budget} 必须在 [1, {grid_size}] 内")


def make_extractor(kind: ExtractorKind, bins: int, patch_size: int, data: LabeledDataset,
                   seed: int) -> FeatureExtractor:
    """直方图特征直接构造；码本特征在训练图像上做 k-means"""
    if kind.value == CODEBOOK:
        return build_codebook(data.images, patch_size, bins, seed)
    return FeatureExtractor(kind=kind.value, k=bins, patch_size=patch_size)


def make_plan(budget: int, grid: Tuple[int, int], extractor: FeatureExtractor, samples_per_image: int,
              epochs: int, lr: float, l2: float, averaged: bool, seed: int,
              start_region: Optional[int], workers: int) -> TrainingPlan:
    config = TrainConfig(epochs=epochs, learning_rate=lr, l2=l2, seed=seed, averaged=averaged)
    return TrainingPlan(budget=budget, grid=grid, extractor=extractor, samples_per_image=samples_per_image,
                        classifier_config=config, policy_config=config, seed=seed,
                        start_region=start_region, workers=workers)


def load_split(data_dir: Path, split: Split, class_names: Optional[List[str]] = None) -> LabeledDataset:
    manifest = TRAIN_MANIFEST if split == Split.train else TEST_MANIFEST
    return load_dataset(Path(data_dir) / manifest, class_names)


@app.command()
def train(
    data: Path = typer.Option(..., "--data", "-d", help="数据集目录（含 train.tsv）"),
    grid: str = typer.Option(DEFAULT_GRID, "--grid", "-g", help="区域网格 NxM"),
    budget: int = typer.Option(DEFAULT_BUDGET, "--budget", "-b", help="预算 B"),
    bins: int = typer.Option(DEFAULT_BINS, "--bins", "-k", help="特征维度 K"),
    extractor: ExtractorKind = typer.Option(ExtractorKind(DEFAULT_EXTRACTOR), "--extractor", help="区域特征类型"),
    patch_size: int = typer.Option(DEFAULT_PATCH_SIZE, "--patch-size", help="码本图块边长"),
    samples_per_image: int = typer.Option(DEFAULT_SAMPLES_PER_IMAGE, "--samples-per-image", "-n",
                                          help="每张图像采样的前缀数"),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="感知机训练轮数"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="学习率"),
    l2: float = typer.Option(DEFAULT_L2, "--l2", help="L2 正则系数"),
    averaged: bool = typer.Option(DEFAULT_AVERAGED, "--averaged/--no-averaged", help="是否使用平均感知机"),
    start_region: Optional[int] = typer.Option(None, "--start-region", help="起始区域，默认网格中心"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="随机种子"),
    workers: int = typer.Option(DEFAULT_WORKERS, "--workers", help="构建训练样本的线程数"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="模型输出路径"),
):
    """训练完整策略（f_θ 与全部探索子策略）"""
    try:
        n_rows, n_cols = parse_grid(grid)
        check_budget(budget, n_rows * n_cols)

        dataset = load_split(data, Split.train)
        typer.echo(f"📊 加载训练集: {len(dataset)} 张图像, {len(dataset.class_names)} 个类别")

        feature_extractor = make_extractor(extractor, bins, patch_size, dataset, seed)
        plan = make_plan(budget, (n_rows, n_cols), feature_extractor, samples_per_image, epochs, lr, l2,
                         averaged, seed, start_region, workers)
        log = TrainingLog()
        bundle = learn_full_policy(dataset, plan, log)

        out = out or MODELS_DIR / BUNDLE_FILE_FORMAT.format(budget=budget, seed=seed)
        out.parent.mkdir(parents=True, exist_ok=True)
        save_bundle(bundle, out)
        log.write(out.with_name(out.name + ".log"))
        typer.echo(f"✅ 训练完成，模型已保存到: {out}")
    except (SeqRegionError, OSError) as e:
        typer.echo(f"❌ 训练失败: {e}")
        raise typer.Exit(1)


@app.command(name="eval")
def evaluate(
    model: Path = typer.Option(..., "--model", "-m", help="模型文件"),
    data: Path = typer.Option(..., "--data", "-d", help="数据集目录"),
    split: Split = typer.Option(Split.test, "--split", help="评估的数据划分"),
    per_class: bool = typer.Option(False, "--per-class", help="输出各类别准确率"),
    predictions: Optional[Path] = typer.Option(None, "--predictions", help="逐样本预测 CSV 输出路径"),
    workers: int = typer.Option(DEFAULT_WORKERS, "--workers", help="推理线程数"),
):
    """在数据集上评估模型准确率"""
    try:
        bundle = load_bundle(model)
        dataset = load_split(data, split, bundle.class_names)
        engine = EvaluationEngine(workers=workers)
        results = engine.evaluate(bundle, dataset)

        typer.echo(f"accuracy={results['accuracy']:.6f} ({results['n_correct']}/{results['n_items']})")
        if per_class:
            for name, accuracy in results["per_class"].items():
                typer.echo(f"class {name}: accuracy={accuracy:.6f}")
            typer.echo(f"balanced_accuracy={results['balanced_accuracy']:.6f}")
        if predictions is not None:
            write_csv(results["predictions"], predictions)
            typer.echo(f"✅ 逐样本预测已保存到: {predictions}")
        engine.print_results(per_class=per_class)
    except (SeqRegionError, OSError) as e:
        typer.echo(f"❌ 评估失败: {e}")
        raise typer.Exit(1)


@app.command()
def sweep(
    data: Path = typer.Option(..., "--data", "-d", help="数据集目录"),
    budgets: str = typer.Option(DEFAULT_BUDGETS, "--budgets", help="预算列表，逗号分隔"),
    trials: int = typer.Option(DEFAULT_TRIALS, "--trials", help="随机基线试验次数"),
    repeats: int = typer.Option(1, "--repeats", help="重新随机划分数据的次数"),
    models_dir: Optional[Path] = typer.Option(None, "--models-dir", help="已训练模型目录（缺失时现场训练）"),
    grid: str = typer.Option(DEFAULT_GRID, "--grid", "-g", help="区域网格 NxM"),
    bins: int = typer.Option(DEFAULT_BINS, "--bins", "-k", help="特征维度 K"),
    extractor: ExtractorKind = typer.Option(ExtractorKind(DEFAULT_EXTRACTOR), "--extractor", help="区域特征类型"),
    patch_size: int = typer.Option(DEFAULT_PATCH_SIZE, "--patch-size", help="码本图块边长"),
    samples_per_image: int = typer.Option(DEFAULT_SAMPLES_PER_IMAGE, "--samples-per-image", "-n",
                                          help="每张图像采样的前缀数"),
    epochs: int = typer.Option(DEFAULT_EPOCHS, "--epochs", help="感知机训练轮数"),
    lr: float = typer.Option(DEFAULT_LEARNING_RATE, "--lr", help="学习率"),
    l2: float = typer.Option(DEFAULT_L2, "--l2", help="L2 正则系数"),
    averaged: bool = typer.Option(DEFAULT_AVERAGED, "--averaged/--no-averaged", help="是否使用平均感知机"),
    start_region: Optional[int] = typer.Option(None, "--start-region", help="起始区域，默认网格中心"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="随机种子"),
    workers: int = typer.Option(DEFAULT_WORKERS, "--workers", help="线程数"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="CSV 输出路径，默认输出到终端"),
):
    """预算扫描：学习策略与随机基线对比"""
    try:
        n_rows, n_cols = parse_grid(grid)
        budget_list = parse_budgets(budgets, n_rows * n_cols)
        if repeats < 1:
            raise ConfigError(f"repeats 必须 ≥ 1，实际为 {repeats}")

        train_set = load_split(data, Split.train)
        test_set = load_split(data, Split.test, train_set.class_names)
        if repeats == 1:
            splits = [(train_set, test_set)]
        else:
            pooled = merge_datasets(train_set, test_set)
            splits = [split_dataset(pooled, derived_seed(seed, repeat)) for repeat in range(repeats)]
        typer.echo(f"📊 加载数据: 训练 {len(train_set)} 张, 测试 {len(test_set)} 张, 划分 {repeats} 次")

        def bundle_for(budget: int, train_data: LabeledDataset, repeat: int) -> PolicyBundle:
            if models_dir is not None and repeats == 1:
                path = models_dir / BUNDLE_FILE_FORMAT.format(budget=budget, seed=seed)
                if path.exists():
                    return load_bundle(path)
            run_seed = seed + repeat
            feature_extractor = make_extractor(extractor, bins, patch_size, train_data, run_seed)
            plan = make_plan(budget, (n_rows, n_cols), feature_extractor, samples_per_image, epochs, lr, l2,
                             averaged, run_seed, start_region, workers)
            return learn_full_policy(train_data, plan)

        engine = EvaluationEngine(trials=trials, seed=seed, workers=workers)
        report = engine.sweep(budget_list, splits, bundle_for)
        text = write_csv(report.to_frame(), out)
        if out is None:
            typer.echo(text, nl=False)
        else:
            typer.echo(f"✅ 扫描结果已保存到: {out}")
    except (SeqRegionError, OSError) as e:
        typer.echo(f"❌ 扫描失败: {e}")
        raise typer.Exit(1)


@app.command()
def trajectories(
    model: Path = typer.Option(..., "--model", "-m", help="模型文件"),
    data: Path = typer.Option(..., "--data", "-d", help="数据集目录"),
    split: Split = typer.Option(Split.test, "--split", help="使用的数据划分"),
    workers: int = typer.Option(DEFAULT_WORKERS, "--workers", help="推理线程数"),
    out: Path = typer.Option(RESULTS_DIR / "trajectories", "--out", "-o", help="CSV 输出目录"),
):
    """统计测试轨迹：区域转移图、逐步区域分布和区域获取频率"""
    try:
        bundle = load_bundle(model)
        dataset = load_split(data, split, bundle.class_names)
        graph = EvaluationEngine(workers=workers).trajectories(bundle, dataset)

        out.mkdir(parents=True, exist_ok=True)
        write_csv(graph.transitions_frame(), out / "transitions.csv")
        write_csv(graph.step_frame(), out / "step_frequencies.csv")
        write_csv(graph.region_frequency_frame(), out / "region_frequencies.csv")
        typer.echo(f"✅ 已统计 {graph.n_trajectories} 条轨迹，结果保存到: {out}")
    except (SeqRegionError, OSError) as e:
        typer.echo(f"❌ 轨迹统计失败: {e}")
        raise typer.Exit(1)


@app.command()
def synth(
    grid: str = typer.Option(DEFAULT_GRID, "--grid", "-g", help="区域网格 NxM"),
    image_size: str = typer.Option(DEFAULT_IMAGE_SIZE, "--image-size", help="图像尺寸 WxH"),
    classes: int = typer.Option(DEFAULT_CLASSES, "--classes", "-c", help="类别数 C"),
    targets: int = typer.Option(DEFAULT_TARGETS, "--targets", help="候选目标区域数"),
    noise_std: float = typer.Option(DEFAULT_NOISE_STD, "--noise-std", help="噪声标准差"),
    per_class: int = typer.Option(DEFAULT_PER_CLASS, "--per-class", help="每类图像数"),
    pointer_region: Optional[int] = typer.Option(None, "--pointer-region", help="指针区域，默认网格中心"),
    seed: int = typer.Option(DEFAULT_SEED, "--seed", "-s", help="随机种子"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="数据集输出目录"),
):
    """生成合成指针任务数据集"""
    try:
        spec = PointerTaskSpec(grid=parse_grid(grid), image_size=parse_size(image_size), n_classes=classes,
                               n_targets=targets, noise_std=noise_std, per_class=per_class, seed=seed,
                               pointer_region=pointer_region)
        train_set, test_set = generate_pointer_task(spec)
        out = out or DATA_DIR / f"pointer_seed{seed}"
        save_dataset(out, train_set, test_set)
        typer.echo(f"✅ 数据集已生成: 训练 {len(train_set)} 张, 测试 {len(test_set)} 张, 保存到 {out}")
    except (SeqRegionError, OSError) as e:
        typer.echo(f"❌ 生成失败: {e}")
        raise typer.Exit(1)


if __name__ == "__main__":
    app()
