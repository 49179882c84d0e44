"""
区域特征

把图像划分为固定的 N×M 区域网格，按需计算单个区域的特征向量 φ，
并构造保留位置信息的聚合表示 Φ（第 i 个区域的特征放在 [i·K, (i+1)·K) 位置）。
"""
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial.distance import cdist

from config.settings import KMEANS_MAX_ITER, DEFAULT_PATCH_SIZE
from utils.errors import (
    ConfigError,
    DimensionTooSmallError,
    DuplicateRegionError,
    InsufficientPatchesError,
    RegionIndexError,
)
from utils.logger import get_logger

logger = get_logger(__name__)

HISTOGRAM = "hist"
CODEBOOK = "codebook"
EXTRACTOR_KINDS = (HISTOGRAM, CODEBOOK)


@dataclass(eq=False)
class Image:
    """灰度图像，pixels 形状为 (height, width)，取值 0..255"""

    pixels: np.ndarray

    def __post_init__(self):
        pixels = np.asarray(self.pixels)
        if pixels.ndim != 2 or pixels.size == 0:
            raise DimensionTooSmallError(f"图像必须是非空二维数组，实际形状 {pixels.shape}")
        if pixels.min() < 0 or pixels.max() > 255:
            raise ConfigError("像素取值必须在 [0, 255] 范围内")
        if not np.array_equal(pixels, np.rint(pixels)):
            raise ConfigError("像素取值必须是整数")
        self.pixels = pixels.astype(np.uint8)

    @property
    def width(self) -> int:
        return int(self.pixels.shape[1])

    @property
    def height(self) -> int:
        return int(self.pixels.shape[0])

    def __eq__(self, other) -> bool:
        return isinstance(other, Image) and np.array_equal(self.pixels, other.pixels)


def _split(length: int, parts: int) -> Tuple[int, ...]:
    """把长度均分为 parts 段，余数并入最后一段，返回边界"""
    base = length // parts
    edges = [i * base for i in range(parts)] + [length]
    return tuple(edges)


@dataclass(frozen=True)
class RegionGrid:
    """N×M 区域网格，索引按行优先从 0 开始"""

    n_rows: int
    n_cols: int
    row_edges: Tuple[int, ...]
    col_edges: Tuple[int, ...]

    @property
    def size(self) -> int:
        return self.n_rows * self.n_cols

    def position(self, region_index: int) -> Tuple[int, int]:
        """区域索引 -> (行, 列)"""
        self.check_index(region_index)
        return divmod(region_index, self.n_cols)

    def index(self, row: int, col: int) -> int:
        return row * self.n_cols + col

    def bounds(self, region_index: int) -> Tuple[int, int, int, int]:
        """返回 (top, bottom, left, right)，右开区间"""
        row, col = self.position(region_index)
        return (self.row_edges[row], self.row_edges[row + 1],
                self.col_edges[col], self.col_edges[col + 1])

    def check_index(self, region_index: int):
        if not 0 <= region_index < self.size:
            raise RegionIndexError(f"区域索引 {region_index} 超出范围 [0, {self.size - 1}]")


def central_region(n_rows: int, n_cols: int) -> int:
    """默认起始区域：网格中心单元 (⌊(N-1)/2⌋, ⌊(M-1)/2⌋)"""
    return ((n_rows - 1) // 2) * n_cols + (n_cols - 1) // 2


def parse_grid(text: str) -> Tuple[int, int]:
    """解析 "NxM" 形式的网格参数"""
    try:
        n_rows, n_cols = (int(part) for part in text.lower().split("x"))
    except ValueError:
        raise ConfigError(f"网格格式应为 NxM，实际为 {text!r}")
    if n_rows < 1 or n_cols < 1:
        raise ConfigError(f"网格尺寸必须为正: {text!r}")
    return n_rows, n_cols


def decompose(image: Image, n_rows: int, n_cols: int) -> RegionGrid:
    """
    把图像划分为 n_rows × n_cols 个区域

    每个区域宽 ⌊W/M⌋、高 ⌊H/N⌋，每行/列最后一个区域吸收余数像素。
    """
    if n_rows < 1 or n_cols < 1:
        raise ConfigError(f"网格尺寸必须为正: {n_rows}x{n_cols}")
    if image.width < n_cols or image.height < n_rows:
        raise DimensionTooSmallError(
            f"图像 {image.width}x{image.height} 无法划分为 {n_rows}x{n_cols} 网格（会出现空区域）"
        )
    return RegionGrid(n_rows, n_cols, _split(image.height, n_rows), _split(image.width, n_cols))


@dataclass(eq=False)
class FeatureExtractor:
    """
    区域特征提取器

    参数:
        kind: "hist"（强度直方图）或 "codebook"（图块码本词袋）
        k: 直方图箱数或码字个数
        patch_size: 图块边长（仅码本使用）
        codebook: k 个图块中心，形状 (k, patch_size²)
    """

    kind: str = HISTOGRAM
    k: int = 8
    patch_size: int = DEFAULT_PATCH_SIZE
    codebook: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in EXTRACTOR_KINDS:
            raise ConfigError(f"未知的特征类型 {self.kind!r}，可选: {', '.join(EXTRACTOR_KINDS)}")
        if self.k < 2:
            raise ConfigError(f"特征维度 K 必须 ≥ 2，实际为 {self.k}")
        if self.kind == CODEBOOK:
            if self.codebook is None:
                raise ConfigError("码本特征需要提供 codebook")
            self.codebook = np.asarray(self.codebook, dtype=np.float64)
            if self.codebook.shape != (self.k, self.patch_size * self.patch_size):
                raise ConfigError(
                    f"码本形状 {self.codebook.shape} 与 K={self.k}、patch_size={self.patch_size} 不符"
                )
        elif self.codebook is not None:
            raise ConfigError("直方图特征不能携带 codebook")

    def __eq__(self, other) -> bool:
        if not isinstance(other, FeatureExtractor):
            return NotImplemented
        if (self.kind, self.k, self.patch_size) != (other.kind, other.k, other.patch_size):
            return False
        if self.codebook is None or other.codebook is None:
            return self.codebook is None and other.codebook is None
        return np.array_equal(self.codebook, other.codebook)

    def check_grid(self, grid: RegionGrid):
        """码本特征要求最小的区域至少容纳一个图块"""
        if self.kind != CODEBOOK:
            return
        min_h = min(b - a for a, b in zip(grid.row_edges, grid.row_edges[1:]))
        min_w = min(b - a for a, b in zip(grid.col_edges, grid.col_edges[1:]))
        if min(min_h, min_w) < self.patch_size:
            raise DimensionTooSmallError(
                f"最小区域 {min_w}x{min_h} 容纳不下 {self.patch_size}x{self.patch_size} 图块"
            )


def _patches(pixels: np.ndarray, patch_size: int) -> np.ndarray:
    """切出互不重叠的图块，返回 (n, patch_size²) 浮点矩阵"""
    rows = pixels.shape[0] // patch_size
    cols = pixels.shape[1] // patch_size
    if rows == 0 or cols == 0:
        return np.empty((0, patch_size * patch_size))
    crop = pixels[:rows * patch_size, :cols * patch_size].astype(np.float64)
    tiles = crop.reshape(rows, patch_size, cols, patch_size).transpose(0, 2, 1, 3)
    return tiles.reshape(-1, patch_size * patch_size)


def phi(image: Image, grid: RegionGrid, region_index: int, extractor: FeatureExtractor) -> np.ndarray:
    """计算单个区域的 K 维特征（L1 归一化）。这是唯一读取区域像素的函数。"""
    top, bottom, left, right = grid.bounds(region_index)
    region = image.pixels[top:bottom, left:right]

    if extractor.kind == HISTOGRAM:
        # 箱 b 覆盖 [b·256/K, (b+1)·256/K)
        bins = region.ravel().astype(np.int64) * extractor.k // 256
        counts = np.bincount(bins, minlength=extractor.k)
    else:
        patches = _patches(region, extractor.patch_size)
        if len(patches) == 0:
            raise DimensionTooSmallError(
                f"区域 {region_index} 尺寸 {right - left}x{bottom - top} 小于图块 {extractor.patch_size}"
            )
        words = cdist(patches, extractor.codebook, "sqeuclidean").argmin(axis=1)
        counts = np.bincount(words, minlength=extractor.k)

    return counts.astype(np.float64) / counts.sum()


def gamma(feature: np.ndarray, region_index: int, grid_size: int) -> np.ndarray:
    """Γ 映射：把 K 维特征放到长度 K·grid_size 向量的第 region_index 块"""
    if not 0 <= region_index < grid_size:
        raise RegionIndexError(f"区域索引 {region_index} 超出范围 [0, {grid_size - 1}]")
    feature = np.asarray(feature, dtype=np.float64)
    k = feature.shape[0]
    out = np.zeros(k * grid_size)
    out[region_index * k:(region_index + 1) * k] = feature
    return out


def aggregate(features_by_region: Iterable[Tuple[int, np.ndarray]], grid_size: int,
              k: Optional[int] = None) -> np.ndarray:
    """
    Φ 聚合：各区域 Γ 映射之和

    各块互不重叠，因此结果与列表顺序无关（逐位相同）。列表为空时需要给出 k。
    """
    items = list(features_by_region)
    if not items:
        if k is None:
            raise ConfigError("空区域列表需要显式给出特征维度 k")
        return np.zeros(k * grid_size)

    k = len(items[0][1]) if k is None else k
    out = np.zeros(k * grid_size)
    seen = set()
    for region_index, feature in items:
        if region_index in seen:
            raise DuplicateRegionError(f"区域 {region_index} 重复出现")
        seen.add(region_index)
        out += gamma(feature, region_index, grid_size)
    return out


class LazyRegionFeatures:
    """
    单张图像的惰性特征缓存

    每个区域的 φ 最多计算一次，phi_calls 记录实际计算次数。
    一个实例同一时间只应被一个线程使用。
    """

    def __init__(self, image: Image, grid: RegionGrid, extractor: FeatureExtractor):
        self.image = image
        self.grid = grid
        self.extractor = extractor
        self.phi_calls = 0
        self._cache: Dict[int, np.ndarray] = {}

    @property
    def dim(self) -> int:
        return self.extractor.k * self.grid.size

    def feature(self, region_index: int) -> np.ndarray:
        if region_index not in self._cache:
            self._cache[region_index] = phi(self.image, self.grid, region_index, self.extractor)
            self.phi_calls += 1
        return self._cache[region_index]

    def aggregate(self, trajectory: Sequence[int]) -> np.ndarray:
        return aggregate([(i, self.feature(i)) for i in trajectory], self.grid.size, k=self.extractor.k)

    def extend(self, aggregated: np.ndarray, region_index: int) -> np.ndarray:
        """在已有 Φ 上加入一个新区域，返回新向量"""
        k = self.extractor.k
        block = aggregated[region_index * k:(region_index + 1) * k]
        if np.any(block):
            raise DuplicateRegionError(f"区域 {region_index} 已经在聚合特征中")
        out = aggregated.copy()
        out[region_index * k:(region_index + 1) * k] = self.feature(region_index)
        return out


def build_codebook(images: List[Image], patch_size: int, k: int, seed: int,
                   max_iter: int = KMEANS_MAX_ITER) -> FeatureExtractor:
    """
    用带种子的 k-means 构建图块码本

    初始化时随机抽取 k 个不同的图块；空簇重新放到离其最近中心最远的点上。
    """
    if k < 2:
        raise ConfigError(f"码字个数 K 必须 ≥ 2，实际为 {k}")
    if patch_size < 1:
        raise ConfigError(f"图块尺寸必须为正，实际为 {patch_size}")

    chunks = [_patches(image.pixels, patch_size) for image in images]
    data = np.concatenate(chunks) if chunks else np.empty((0, patch_size * patch_size))
    distinct = np.unique(data, axis=0) if len(data) else data
    if len(distinct) < k:
        raise InsufficientPatchesError(f"只有 {len(distinct)} 个不同图块，不足以构建 K={k} 的码本")

    rng = np.random.default_rng(seed)
    centroids = distinct[rng.choice(len(distinct), size=k, replace=False)].astype(np.float64)

    for iteration in range(max_iter):
        distances = cdist(data, centroids, "sqeuclidean")
        labels = distances.argmin(axis=1)
        nearest = distances[np.arange(len(data)), labels]

        updated = centroids.copy()
        for c in range(k):
            members = data[labels == c]
            if len(members):
                updated[c] = members.mean(axis=0)
            else:
                far = int(nearest.argmax())
                updated[c] = data[far]
                nearest[far] = -1.0

        if np.array_equal(updated, centroids):
            break
        centroids = updated

    logger.info("码本构建完成: K=%d, 图块=%d, 迭代=%d", k, len(data), iteration + 1)
    return FeatureExtractor(kind=CODEBOOK, k=k, patch_size=patch_size, codebook=centroids)
