# svspec/service/__init__.py
"""计算服务层: 势函数、ODE、谱定位、谱数据、Weyl 函数、逆问题工具与标量工具."""
from __future__ import annotations

from .exceptions import SpectralError
from .inversekit import ReferenceFrame, UnperturbedSpectrum, make_reference
from .matode import MatrixOde, solve_bundle
from .potential import HermitianMatrix, MatrixPotential, diagonalize_mean, load_potential
from .scalartools import ScalarSpectra, convert, discrete_hilbert, hadamard_products
from .spectraldata import EigenRecord, SpectralDataset, assemble_dataset
from .spectrum import SpectrumLocator, locate_all
from .weylm import WeylSeries, evaluate_M, reconstruct_M

__all__ = [
    "SpectralError",
    "HermitianMatrix",
    "MatrixPotential",
    "load_potential",
    "diagonalize_mean",
    "MatrixOde",
    "solve_bundle",
    "SpectrumLocator",
    "locate_all",
    "EigenRecord",
    "SpectralDataset",
    "assemble_dataset",
    "WeylSeries",
    "evaluate_M",
    "reconstruct_M",
    "ReferenceFrame",
    "UnperturbedSpectrum",
    "make_reference",
    "ScalarSpectra",
    "convert",
    "hadamard_products",
    "discrete_hilbert",
]
