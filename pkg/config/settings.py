"""
项目配置文件
"""
import os
from pathlib import Path
from dotenv import load_dotenv

# 加载环境变量
load_dotenv()

# 项目根目录
BASE_DIR = Path(__file__).parent.parent

# 数据目录
DATA_DIR = Path(os.getenv("SEQREGION_DATA_DIR", BASE_DIR / "data"))
RESULTS_DIR = Path(os.getenv("SEQREGION_RESULTS_DIR", BASE_DIR / "results"))
MODELS_DIR = Path(os.getenv("SEQREGION_MODELS_DIR", BASE_DIR / "models"))

# 确保目录存在
DATA_DIR.mkdir(parents=True, exist_ok=True)
RESULTS_DIR.mkdir(parents=True, exist_ok=True)
MODELS_DIR.mkdir(parents=True, exist_ok=True)

# 日志级别
LOG_LEVEL = os.getenv("SEQREGION_LOG_LEVEL", "INFO")

# 区域网格与特征默认参数
DEFAULT_GRID = os.getenv("SEQREGION_GRID", "4x4")
DEFAULT_BINS = int(os.getenv("SEQREGION_BINS", "8"))
DEFAULT_EXTRACTOR = os.getenv("SEQREGION_EXTRACTOR", "hist")
DEFAULT_PATCH_SIZE = int(os.getenv("SEQREGION_PATCH_SIZE", "4"))
KMEANS_MAX_ITER = 25  # k-means 最大迭代次数

# 训练默认参数
DEFAULT_BUDGET = int(os.getenv("SEQREGION_BUDGET", "2"))
DEFAULT_SAMPLES_PER_IMAGE = int(os.getenv("SEQREGION_SAMPLES_PER_IMAGE", "8"))
DEFAULT_EPOCHS = int(os.getenv("SEQREGION_EPOCHS", "10"))
DEFAULT_LEARNING_RATE = float(os.getenv("SEQREGION_LEARNING_RATE", "0.1"))
DEFAULT_L2 = float(os.getenv("SEQREGION_L2", "1e-5"))
DEFAULT_AVERAGED = os.getenv("SEQREGION_AVERAGED", "1") not in ("0", "false", "False")
DEFAULT_SEED = int(os.getenv("SEQREGION_SEED", "0"))
DEFAULT_WORKERS = int(os.getenv("SEQREGION_WORKERS", "1"))

# 评估默认参数
DEFAULT_TRIALS = int(os.getenv("SEQREGION_TRIALS", "10"))
DEFAULT_BUDGETS = os.getenv("SEQREGION_BUDGETS", "1,2,4,8,16")
TRAIN_FRACTION = 0.8  # 训练/测试划分比例

# 合成指针任务默认参数
DEFAULT_IMAGE_SIZE = os.getenv("SEQREGION_IMAGE_SIZE", "32x32")
DEFAULT_CLASSES = 4
DEFAULT_TARGETS = 4
DEFAULT_NOISE_STD = 8.0
DEFAULT_PER_CLASS = 156

# 模型文件格式
BUNDLE_FORMAT_VERSION = 1
BUNDLE_FILE_FORMAT = "bundle_B{budget}_seed{seed}.json"

# 数据集文件格式
TRAIN_MANIFEST = "train.tsv"
TEST_MANIFEST = "test.tsv"
IMAGE_FILE_FORMAT = "{label}_{index:05d}.pgm"

# CSV 输出浮点格式
CSV_FLOAT_FORMAT = "%.6f"
