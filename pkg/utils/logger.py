"""
日志工具
"""
import logging

from rich.console import Console
from rich.logging import RichHandler

from config.settings import LOG_LEVEL

console = Console(stderr=True)

_configured = False


def get_logger(name: str) -> logging.Logger:
    """获取带 rich 输出的日志记录器"""
    global _configured
    if not _configured:
        handler = RichHandler(console=console, show_path=False, markup=False)
        root = logging.getLogger("seqregion")
        root.addHandler(handler)
        root.setLevel(LOG_LEVEL)
        root.propagate = False
        _configured = True
    return logging.getLogger(f"seqregion.{name}")
