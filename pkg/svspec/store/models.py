# svspec/store/models.py
"""
文件格式模型: 势函数 JSON、谱数据集 JSON、参考框架 JSON 与条件 (C) 输入 JSON。

Complex entries are stored as ``[re, im]`` pairs and matrices are row-major.
Channel indices ``j`` are 0-based; shell numbers ``n`` and eigenvalue labels
``alpha`` are 1-based.
"""
from __future__ import annotations

from typing import Literal, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from pydantic import BaseModel, ConfigDict, Field, model_validator

__all__: list[str] = [
    "ComplexMatrix",
    "matrix_to_pairs",
    "pairs_to_matrix",
    "HarmonicModel",
    "GridModel",
    "PotentialFile",
    "RecordModel",
    "TailsModel",
    "DatasetFile",
    "FrameFile",
    "ExceptionalModel",
    "ConditionCFile",
]

ComplexPair = tuple[float, float]
ComplexMatrix = list[list[ComplexPair]]


def matrix_to_pairs(a: ArrayLike) -> ComplexMatrix:
    arr = np.atleast_2d(np.asarray(a, dtype=complex))
    return [[(float(z.real), float(z.imag)) for z in row] for row in arr]


def pairs_to_matrix(m: ComplexMatrix) -> NDArray[np.complex128]:
    arr = np.asarray(m, dtype=float)
    if arr.ndim != 3 or arr.shape[-1] != 2:
        raise ValueError("matrix entries must be [re, im] pairs")
    return arr[..., 0] + 1j * arr[..., 1]


def _square(m: ComplexMatrix, n: int, what: str) -> None:
    if len(m) != n or any(len(row) != n for row in m):
        raise ValueError(f"{what} must be {n}x{n}")


class HarmonicModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    n: int = Field(ge=1)
    M: ComplexMatrix


class GridModel(BaseModel):
    model_config = ConfigDict(extra="forbid")

    M: int = Field(ge=64)
    samples: list[ComplexMatrix]

    @model_validator(mode="after")
    def _check_length(self) -> "GridModel":
        if len(self.samples) != self.M + 1:
            raise ValueError(f"grid needs M+1={self.M + 1} samples, got {len(self.samples)}")
        return self


class PotentialFile(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    N: int = Field(ge=1)
    representation: Literal["fourier", "grid"] = Field(default="fourier", alias="repr")
    mean: Optional[ComplexMatrix] = None
    cos: list[HarmonicModel] = Field(default_factory=list)
    sin: list[HarmonicModel] = Field(default_factory=list)
    grid: Optional[GridModel] = None

    @model_validator(mode="after")
    def _check_shapes(self) -> "PotentialFile":
        if self.representation == "fourier":
            if self.mean is None:
                raise ValueError("fourier potential requires 'mean'")
            _square(self.mean, self.N, "mean")
            for h in (*self.cos, *self.sin):
                _square(h.M, self.N, f"harmonic n={h.n}")
        else:
            if self.grid is None:
                raise ValueError("grid potential requires 'grid'")
            for i, s in enumerate(self.grid.samples):
                _square(s, self.N, f"sample {i}")
        return self


class RecordModel(BaseModel):
    model_config = ConfigDict(extra="forbid", populate_by_name=True)

    lam: float = Field(alias="lambda")
    k: int = Field(ge=1)
    h: ComplexMatrix
    P: ComplexMatrix
    g: ComplexMatrix
    B: ComplexMatrix
    index: Optional[tuple[int, int]] = None


class TailsModel(BaseModel):
    n: list[int]
    a: list[list[float]]
    b: list[list[float]]
    c: list[list[float]]
    d: list[float]
    partial_norms: dict[str, float]
    slopes: dict[str, float]
    cauchy: dict[str, float]
    verdicts: dict[str, bool]
    passed: bool


class DatasetFile(BaseModel):
    model_config = ConfigDict(extra="forbid")

    N: int = Field(ge=1)
    v0: list[float]
    n_diamond: int
    alpha_diamond: int
    records: list[RecordModel]
    tails: Optional[TailsModel] = None
    unitary: Optional[ComplexMatrix] = None
    potential: Optional[PotentialFile] = None


class FrameFile(BaseModel):
    """Reference frame input: one scalar potential per diagonal channel."""

    model_config = ConfigDict(extra="forbid")

    channels: list[PotentialFile] = Field(min_length=1)
    lambda_max: float = Field(gt=0.0)

    @model_validator(mode="after")
    def _scalar_channels(self) -> "FrameFile":
        if any(c.N != 1 for c in self.channels):
            raise ValueError("frame channels must be scalar (N=1) potentials")
        return self


class ExceptionalModel(BaseModel):
    alpha: int = Field(ge=1)
    projector: ComplexMatrix


class ConditionCFile(BaseModel):
    """Exceptional set over a free unperturbed spectrum pi^2 n^2 + v_j."""

    model_config = ConfigDict(extra="forbid")

    N: int = Field(ge=1)
    v0: list[float]
    n_known: int = Field(default=64, ge=4)
    exceptional: list[ExceptionalModel] = Field(min_length=1)

    @model_validator(mode="after")
    def _check_dims(self) -> "ConditionCFile":
        if len(self.v0) != self.N:
            raise ValueError("v0 must have N entries")
        for ex in self.exceptional:
            _square(ex.projector, self.N, f"projector alpha={ex.alpha}")
        return self
