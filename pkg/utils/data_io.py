"""
数据读写

PGM 图像、数据清单、合成指针任务以及模型文件（带版本的 JSON）。
"""
import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.settings import (
    BUNDLE_FORMAT_VERSION,
    DEFAULT_CLASSES,
    DEFAULT_NOISE_STD,
    DEFAULT_PER_CLASS,
    DEFAULT_SEED,
    DEFAULT_TARGETS,
    IMAGE_FILE_FORMAT,
    TEST_MANIFEST,
    TRAIN_FRACTION,
    TRAIN_MANIFEST,
)
from policies.types import LabeledDataset, PolicyBundle
from utils.errors import (
    BundleFormatError,
    BundleVersionError,
    ConfigError,
    EmptyManifestError,
    MalformedPGMError,
    ManifestError,
    MissingImageError,
    PointerTaskError,
    SeqRegionError,
)
from utils.linear_models import LinearModel
from utils.logger import get_logger
from utils.region_features import CODEBOOK, FeatureExtractor, Image, central_region, decompose

logger = get_logger(__name__)

PGM_MAGIC = b"P5"
PGM_MAXVAL = 255


# ---------------------------------------------------------------- PGM

def _pgm_header(data: bytes, path) -> Tuple[List[int], int]:
    """解析 P5 头部，返回 ([width, height, maxval], 像素数据起始位置)"""
    if not data.startswith(PGM_MAGIC):
        raise MalformedPGMError(f"{path}: 不是二进制 PGM (P5) 文件")
    pos = len(PGM_MAGIC)
    values = []
    while len(values) < 3:
        while pos < len(data) and data[pos:pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos:pos + 1] == b"#":
            while pos < len(data) and data[pos:pos + 1] not in (b"\n", b"\r"):
                pos += 1
            continue
        begin = pos
        while pos < len(data) and data[pos:pos + 1].isdigit():
            pos += 1
        if begin == pos:
            raise MalformedPGMError(f"{path}: PGM 头部不完整")
        values.append(int(data[begin:pos]))
    if pos >= len(data) or not data[pos:pos + 1].isspace():
        raise MalformedPGMError(f"{path}: PGM 头部之后缺少分隔符")
    return values, pos + 1


def read_pgm(path) -> Image:
    """读取二进制 PGM (P5, maxval 255) 图像"""
    path = Path(path)
    data = path.read_bytes()
    (width, height, maxval), offset = _pgm_header(data, path)
    if maxval != PGM_MAXVAL:
        raise MalformedPGMError(f"{path}: 仅支持 maxval=255，实际为 {maxval}")
    if width < 1 or height < 1:
        raise MalformedPGMError(f"{path}: 图像尺寸 {width}x{height} 不合法")
    pixels = np.frombuffer(data, dtype=np.uint8, count=-1, offset=offset)
    if pixels.size != width * height:
        raise MalformedPGMError(f"{path}: 像素数据长度 {pixels.size} 与尺寸 {width}x{height} 不符")
    return Image(pixels.reshape(height, width).copy())


def write_pgm(path, image: Image):
    """写出二进制 PGM (P5) 图像"""
    header = f"P5\n{image.width} {image.height}\n{PGM_MAXVAL}\n".encode("ascii")
    Path(path).write_bytes(header + image.pixels.astype(np.uint8).tobytes())


# ---------------------------------------------------------------- 数据清单

@dataclass
class DatasetManifest:
    """数据清单：根目录、(文件名, 类别名) 列表以及每条记录在文件中的行号"""

    root: Path
    entries: List[Tuple[str, str]]
    line_numbers: List[int] = field(default_factory=list)

    def __post_init__(self):
        if not self.line_numbers:
            self.line_numbers = list(range(1, len(self.entries) + 1))

    @property
    def class_names(self) -> List[str]:
        return sorted({label for _, label in self.entries})


def read_manifest(path) -> DatasetManifest:
    """读取 `文件名<TAB>类别` 格式的清单，空行跳过，报错行号为文件中的实际行号"""
    path = Path(path)
    if not path.exists():
        raise MissingImageError(f"清单文件不存在: {path}")
    try:
        frame = pd.read_csv(path, sep="\t", header=None, names=["filename", "label"], dtype=str,
                            keep_default_na=False, quoting=csv.QUOTE_NONE, encoding="utf-8",
                            skip_blank_lines=False)
    except pd.errors.EmptyDataError:
        raise EmptyManifestError(f"清单为空: {path}")
    except pd.errors.ParserError as e:
        raise ManifestError(f"{path}: 清单格式错误（{e}）")
    except UnicodeDecodeError:
        raise ManifestError(f"{path}: 清单不是 UTF-8 文本")

    frame = frame.fillna("")
    frame["line"] = np.arange(1, len(frame) + 1)
    frame = frame[(frame["filename"] != "") | (frame["label"] != "")]
    if frame.empty:
        raise EmptyManifestError(f"清单为空: {path}")
    for row in frame.itertuples(index=False):
        if not row.filename or not row.label:
            raise ManifestError(f"{path} 第 {row.line} 行: 应为 `文件名<TAB>类别`")
    return DatasetManifest(path.parent, list(zip(frame["filename"], frame["label"])),
                           [int(line) for line in frame["line"]])


def load_dataset(path, class_names: Optional[Sequence[str]] = None) -> LabeledDataset:
    """
    按清单加载数据集

    类别下标按类别名排序得到；给定 class_names 时按它映射（用于让测试集对齐模型的类别）。
    """
    manifest = read_manifest(path)
    names = list(class_names) if class_names is not None else manifest.class_names
    index_of = {name: i for i, name in enumerate(names)}

    items, filenames = [], []
    for line_no, (filename, label) in zip(manifest.line_numbers, manifest.entries):
        image_path = manifest.root / filename
        if not image_path.exists():
            raise MissingImageError(f"{path} 第 {line_no} 行: 图像文件不存在 {filename}")
        if label not in index_of:
            raise ManifestError(f"{path} 第 {line_no} 行: 未知类别 {label!r}")
        items.append((read_pgm(image_path), index_of[label]))
        filenames.append(filename)

    logger.info("加载数据集 %s: %d 张图像, %d 个类别", path, len(items), len(names))
    return LabeledDataset(items, names, filenames)


def write_manifest(path, filenames: Sequence[str], labels: Sequence[str]):
    frame = pd.DataFrame({"filename": list(filenames), "label": list(labels)})
    frame.to_csv(path, sep="\t", header=False, index=False, lineterminator="\n",
                 quoting=csv.QUOTE_NONE, encoding="utf-8")


def save_dataset(root, train: LabeledDataset, test: LabeledDataset) -> Path:
    """写出 images/*.pgm 和 train.tsv / test.tsv"""
    root = Path(root)
    (root / "images").mkdir(parents=True, exist_ok=True)
    counter = 0
    for manifest, data in ((TRAIN_MANIFEST, train), (TEST_MANIFEST, test)):
        names = []
        for position, (image, label) in enumerate(data.items):
            if data.filenames:
                name = data.filenames[position]
            else:
                name = "images/" + IMAGE_FILE_FORMAT.format(label=data.class_names[label], index=counter)
            counter += 1
            (root / name).parent.mkdir(parents=True, exist_ok=True)
            write_pgm(root / name, image)
            names.append(name)
        write_manifest(root / manifest, names, [data.class_names[label] for label in data.labels])
    return root


def split_dataset(data: LabeledDataset, seed: int,
                  fraction: float = TRAIN_FRACTION) -> Tuple[LabeledDataset, LabeledDataset]:
    """带种子的随机划分"""
    order = np.random.default_rng(seed).permutation(len(data))
    n_train = int(round(len(data) * fraction))
    if not 0 < n_train < len(data):
        raise ConfigError(f"{len(data)} 张图像无法按 {fraction:.0%} 划分出非空的训练集和测试集")
    return data.subset(order[:n_train].tolist()), data.subset(order[n_train:].tolist())


def merge_datasets(first: LabeledDataset, second: LabeledDataset) -> LabeledDataset:
    if list(first.class_names) != list(second.class_names):
        raise ConfigError("两个数据集的类别不一致，无法合并")
    return LabeledDataset(first.items + second.items, list(first.class_names),
                          first.filenames + second.filenames)


# ---------------------------------------------------------------- 指针任务

@dataclass(frozen=True)
class PointerTaskSpec:
    """
    合成指针任务参数

    指针区域的灰度编码指出哪个目标区域携带类别，目标区域的灰度编码给出类别，
    其余区域都是高斯噪声。
    """

    grid: Tuple[int, int] = (4, 4)
    image_size: Tuple[int, int] = (32, 32)
    n_classes: int = DEFAULT_CLASSES
    n_targets: int = DEFAULT_TARGETS
    noise_std: float = DEFAULT_NOISE_STD
    per_class: int = DEFAULT_PER_CLASS
    seed: int = DEFAULT_SEED
    pointer_region: Optional[int] = None

    @property
    def grid_size(self) -> int:
        return self.grid[0] * self.grid[1]

    @property
    def pointer_index(self) -> int:
        return central_region(*self.grid) if self.pointer_region is None else self.pointer_region


@dataclass(frozen=True)
class PointerTaskLayout:
    """由参数确定的任务布局：候选目标区域和灰度等级（levels[0] 为背景）"""

    pointer_region: int
    target_regions: Tuple[int, ...]
    levels: Tuple[int, ...]

    def pointer_level(self, target: int) -> int:
        return self.levels[target + 1]

    def class_level(self, label: int) -> int:
        return self.levels[label + 1]


def pointer_task_layout(spec: PointerTaskSpec) -> PointerTaskLayout:
    """校验参数并计算任务布局"""
    if spec.n_classes < 2:
        raise PointerTaskError(f"类别数必须 ≥ 2，实际为 {spec.n_classes}")
    if not 1 <= spec.n_targets <= spec.grid_size - 1:
        raise PointerTaskError(f"目标区域数 {spec.n_targets} 必须在 [1, {spec.grid_size - 1}] 内")
    if not 0 <= spec.pointer_index < spec.grid_size:
        raise PointerTaskError(f"指针区域 {spec.pointer_index} 超出 [0, {spec.grid_size - 1}]")
    if spec.per_class < 1:
        raise PointerTaskError(f"每类图像数必须 ≥ 1，实际为 {spec.per_class}")
    if spec.noise_std < 0:
        raise PointerTaskError(f"噪声标准差不能为负，实际为 {spec.noise_std}")

    # 等间距灰度等级，0 号给背景，其余给指针编码和类别编码
    n_codes = max(spec.n_classes, spec.n_targets)
    separation = 256 / (n_codes + 1)
    if separation < 4 * spec.noise_std:
        raise PointerTaskError(
            f"灰度等级间隔 {separation:.1f} 小于 4 倍噪声标准差 {4 * spec.noise_std:.1f}"
        )
    levels = tuple(min(255, int(round((slot + 0.5) * separation))) for slot in range(n_codes + 1))

    rng = np.random.default_rng([spec.seed, 0])
    candidates = [r for r in range(spec.grid_size) if r != spec.pointer_index]
    targets = sorted(int(r) for r in rng.choice(candidates, size=spec.n_targets, replace=False))
    return PointerTaskLayout(spec.pointer_index, tuple(targets), levels)


def generate_pointer_task(spec: PointerTaskSpec) -> Tuple[LabeledDataset, LabeledDataset]:
    """生成指针任务图像，按 80/20 随机划分为训练集和测试集"""
    layout = pointer_task_layout(spec)
    width, height = spec.image_size
    try:
        grid = decompose(Image(np.zeros((height, width))), *spec.grid)
    except SeqRegionError as e:
        raise PointerTaskError(f"图像尺寸与网格不兼容: {e}") from e

    class_names = [f"class{c}" for c in range(spec.n_classes)]
    rng = np.random.default_rng([spec.seed, 1])
    items, filenames = [], []
    for index, label in enumerate(np.repeat(np.arange(spec.n_classes), spec.per_class)):
        target = int(rng.integers(spec.n_targets))
        canvas = np.full((height, width), float(layout.levels[0]))
        for region, level in ((layout.pointer_region, layout.pointer_level(target)),
                              (layout.target_regions[target], layout.class_level(int(label)))):
            top, bottom, left, right = grid.bounds(region)
            canvas[top:bottom, left:right] = level
        if spec.noise_std > 0:
            canvas += rng.normal(0.0, spec.noise_std, size=canvas.shape)
        items.append((Image(np.clip(np.rint(canvas), 0, 255)), int(label)))
        filenames.append("images/" + IMAGE_FILE_FORMAT.format(label=class_names[label], index=index))

    data = LabeledDataset(items, class_names, filenames)
    train, test = split_dataset(data, int(rng.integers(2**31)))
    logger.info("指针任务生成完成: 训练 %d 张, 测试 %d 张, 目标区域 %s",
                len(train), len(test), list(layout.target_regions))
    return train, test


# ---------------------------------------------------------------- 模型文件

def bundle_to_document(bundle: PolicyBundle) -> dict:
    """按固定字段顺序转为 JSON 文档"""
    extractor = {
        "kind": bundle.extractor.kind,
        "K": bundle.extractor.k,
        "patch_size": bundle.extractor.patch_size,
    }
    if bundle.extractor.kind == CODEBOOK:
        extractor["codebook"] = bundle.extractor.codebook.tolist()
    return {
        "version": BUNDLE_FORMAT_VERSION,
        "grid": list(bundle.grid),
        "budget": bundle.budget,
        "start_region": bundle.start_region,
        "extractor": extractor,
        "class_names": list(bundle.class_names),
        "f_theta": bundle.f_theta.weights.tolist(),
        "sub_policies": [policy.weights.tolist() for policy in bundle.sub_policies],
    }


def bundle_from_document(document: dict) -> PolicyBundle:
    if not isinstance(document, dict):
        raise BundleFormatError("模型文件顶层必须是 JSON 对象")
    version = document.get("version")
    if version != BUNDLE_FORMAT_VERSION:
        raise BundleVersionError(f"不支持的模型文件版本 {version!r}，当前版本 {BUNDLE_FORMAT_VERSION}")
    try:
        spec = document["extractor"]
        extractor = FeatureExtractor(kind=spec["kind"], k=int(spec["K"]), patch_size=int(spec["patch_size"]),
                                     codebook=spec.get("codebook"))
        return PolicyBundle(
            f_theta=LinearModel(np.array(document["f_theta"], dtype=np.float64)),
            sub_policies=[LinearModel(np.array(w, dtype=np.float64)) for w in document["sub_policies"]],
            grid=tuple(document["grid"]),
            extractor=extractor,
            budget=int(document["budget"]),
            start_region=int(document["start_region"]),
            class_names=[str(name) for name in document["class_names"]],
        )
    except (KeyError, TypeError, ValueError) as e:
        raise BundleFormatError(f"模型文件内容不完整或不合法: {e}") from e


def save_bundle(bundle: PolicyBundle, path):
    """保存模型（字段顺序固定，同一模型输出的字节完全相同）"""
    text = json.dumps(bundle_to_document(bundle), separators=(",", ":"), allow_nan=False)
    Path(path).write_text(text + "\n", encoding="utf-8")
    logger.info("模型已保存到: %s", path)


def load_bundle(path) -> PolicyBundle:
    path = Path(path)
    try:
        document = json.loads(path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as e:
        raise BundleFormatError(f"{path}: 模型文件无法解析（{e}）") from e
    except UnicodeDecodeError as e:
        raise BundleFormatError(f"{path}: 模型文件不是 UTF-8 文本") from e
    return bundle_from_document(document)
