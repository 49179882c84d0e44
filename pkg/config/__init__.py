"""
配置包
"""
from .settings import *

__all__ = ['settings']
