"""
使用示例
"""
from config.settings import DATA_DIR, MODELS_DIR
from policies import TrainingLog, TrainingPlan, classify, learn_full_policy
from utils.data_io import PointerTaskSpec, generate_pointer_task, save_bundle, save_dataset
from utils.evaluation_engine import EvaluationEngine
from utils.region_features import FeatureExtractor


def example_train_and_evaluate():
    """示例：生成指针任务，训练 B=2 的策略并与随机基线对比"""

    print("=== 预算序列区域分类示例 ===\n")

    # 1. 生成合成数据
    print("1. 生成指针任务数据...")
    spec = PointerTaskSpec(grid=(4, 4), image_size=(32, 32), n_classes=4, n_targets=4,
                           noise_std=8.0, per_class=60, seed=0)
    train, test = generate_pointer_task(spec)
    save_dataset(DATA_DIR / "example_pointer", train, test)
    print(f"✅ 训练 {len(train)} 张, 测试 {len(test)} 张\n")

    # 2. 训练完整策略
    print("2. 训练策略 (B=2)...")
    plan = TrainingPlan(budget=2, grid=(4, 4), extractor=FeatureExtractor(k=8), samples_per_image=4, seed=0)
    log = TrainingLog()
    bundle = learn_full_policy(train, plan, log)
    save_bundle(bundle, MODELS_DIR / "example_B2.json")
    print(log.text())

    # 3. 单张图像推理
    image, label = test.items[0]
    result = classify(image, bundle)
    print(f"3. 第一张测试图像: 真实类别 {label}, 预测 {result.predicted}, "
          f"轨迹 {result.trajectory}, 特征计算 {result.phi_calls} 次\n")

    # 4. 与随机基线对比
    print("4. 学习策略 vs 随机基线...")
    engine = EvaluationEngine(trials=5, seed=0)
    results = engine.evaluate(bundle, test)
    randoms = engine.random_accuracies(bundle, test)
    engine.print_results()
    print(f"学习策略: {results['accuracy']:.3f}, 随机基线: {sum(randoms) / len(randoms):.3f}")


if __name__ == "__main__":
    example_train_and_evaluate()
