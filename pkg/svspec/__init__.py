# svspec/__init__.py

"""
svspec 顶层命名空间。只暴露“门脸”级 API。
"""
from __future__ import annotations

from ._version import __version__
from .app import create_parser, main
from .config import get_settings
from .service import MatrixPotential, ReferenceFrame, SpectralDataset, WeylSeries, assemble_dataset

__all__: list[str] = [
    "__version__",
    "create_parser",
    "main",
    "get_settings",
    "MatrixPotential",
    "SpectralDataset",
    "WeylSeries",
    "ReferenceFrame",
    "assemble_dataset",
]
