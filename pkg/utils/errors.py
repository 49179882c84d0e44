"""
异常定义
"""


class SeqRegionError(ValueError):
    """项目内所有可预期错误的基类"""


# 区域与特征
class DimensionTooSmallError(SeqRegionError):
    """图像尺寸不足以划分网格（存在空区域）"""


class RegionIndexError(SeqRegionError):
    """区域索引越界"""


class DuplicateRegionError(SeqRegionError):
    """同一区域在轨迹中出现多次"""


class InsufficientPatchesError(SeqRegionError):
    """可用于构建码本的不同图块数量不足"""


# 线性模型
class DimensionMismatchError(SeqRegionError):
    """输入维度与模型维度不一致"""


class AllRegionsAcquiredError(SeqRegionError):
    """所有区域都已获取，无法再选择"""


class EmptyDatasetError(SeqRegionError):
    """训练集为空"""


class LabelRangeError(SeqRegionError):
    """标签超出输出范围"""


# 策略训练与推理
class TrajectoryLengthError(SeqRegionError):
    """轨迹长度超出允许范围"""


class SuffixLengthError(SeqRegionError):
    """后续子策略数量与前缀长度不匹配"""


class IncompatibleImageError(SeqRegionError):
    """图像与模型网格/特征不兼容"""


class ConfigError(SeqRegionError):
    """参数配置错误"""


# 数据读写
class ManifestError(SeqRegionError):
    """数据清单文件错误"""


class MissingImageError(ManifestError):
    """清单引用的图像文件不存在"""


class EmptyManifestError(ManifestError):
    """清单为空"""


class MalformedPGMError(SeqRegionError):
    """PGM 文件格式错误"""


class BundleFormatError(SeqRegionError):
    """模型文件无法解析"""


class BundleVersionError(BundleFormatError):
    """模型文件版本不受支持"""


class PointerTaskError(SeqRegionError):
    """指针任务参数错误"""
