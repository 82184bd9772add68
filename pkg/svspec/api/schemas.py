# svspec/api/schemas.py
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..store.models import ComplexMatrix

__all__: list[str] = [
    "ReportBase",
    "SpectrumSummary",
    "ConditionAResponse",
    "ConditionBResponse",
    "EquivalenceResponse",
    "BnResponse",
    "ShellsResponse",
    "TildeEntry",
    "TildesReport",
    "ShellEntry",
    "FrechetRow",
    "FrechetReport",
    "BiorthoRow",
    "BiorthoReport",
    "ForbiddenReport",
    "ConditionCResponse",
    "RieszReport",
    "ScalarCharacterizationResponse",
    "MfunSummary",
]


class ReportBase(BaseModel):
    """Every report carries the seed it ran with and an overall verdict."""

    seed: int
    passed: bool


# ---- spectrum / mfun ----
class SpectrumSummary(ReportBase):
    N: int
    eigenvalues: int
    n_diamond: int
    alpha_diamond: int
    shells: int
    lambda_max: float
    output: str


class MfunSummary(ReportBase):
    mode: Literal["direct", "series", "compare"]
    points: int
    flagged: int
    max_gap: Optional[float] = None
    output: str


# ---- check ----
class ConditionAResponse(ReportBase):
    which: Literal["A"] = "A"
    n_diamond: int
    alpha_diamond: int
    low_multiplicity: int
    simple_tail: bool
    counting_ok: bool
    shells: int


class ConditionBResponse(ReportBase):
    which: Literal["B"] = "B"
    n: list[int]
    sequences: dict[str, list[float]]
    partial_norms: dict[str, float]
    slopes: dict[str, Optional[float]]
    cauchy: dict[str, float]
    verdicts: dict[str, bool]


class EquivalenceResponse(ReportBase):
    which: Literal["equiv"] = "equiv"
    n: list[int]
    projector_sum_deviation: list[float]
    max_overlap: list[float]
    residue_deviation: list[float]
    gram_deviation: list[float]
    overlap_ratio_bounded: bool
    residue_ratio_bounded: bool


class BnResponse(ReportBase):
    which: Literal["Bn"] = "Bn"
    n: list[int]
    remainder: list[float]
    exponent: Optional[float]


class ShellsResponse(ReportBase):
    which: Literal["shells"] = "shells"
    n: list[int]
    lambda_error: list[float]
    basis_error: list[float]
    slopes: dict[str, Optional[float]]


# ---- inverse ----
class TildeEntry(BaseModel):
    alpha: int
    lam: float = Field(serialization_alias="lambda")
    channels: list[int]
    A_tilde: ComplexMatrix
    B_tilde: ComplexMatrix
    C: ComplexMatrix
    E: ComplexMatrix
    A_norm: float
    factor_residual: float


class ShellEntry(BaseModel):
    n: int
    a: list[float]
    c: list[float]
    U_unitarity: float
    phi2_log_norm: float
    phi2_s_norm: float
    Z_vs_B: float


class TildesReport(ReportBase):
    task: Literal["tildes"] = "tildes"
    entries: list[TildeEntry]
    shells: list[ShellEntry]
    max_A_norm: float


class FrechetRow(BaseModel):
    quantity: str
    label: str
    eps: float
    direction: int
    analytic: float
    finite_difference: float
    rel_error: float


class FrechetReport(ReportBase):
    task: Literal["frechet-check"] = "frechet-check"
    directions: int
    within_tolerance: int
    tolerance: float
    rows: list[FrechetRow]


class BiorthoRow(BaseModel):
    alpha: int
    beta: int
    j: int
    k: int
    limit: Optional[str] = None
    residual: float


class BiorthoReport(ReportBase):
    task: Literal["biortho"] = "biortho"
    tolerance: float
    max_residual: float
    rows: list[BiorthoRow]


class ForbiddenReport(ReportBase):
    task: Literal["forbidden"] = "forbidden"
    beta: int
    basis: ComplexMatrix
    angle: float


class ConditionCResponse(ReportBase):
    task: Literal["condC"] = "condC"
    m: int
    T: ComplexMatrix
    verdict: Literal["holds", "fails"]
    min_eig: float
    quadratic_form_gap: float


class RieszReport(ReportBase):
    task: Literal["riesz"] = "riesz"
    j: int
    k: int
    size: int
    min_eig: float
    max_eig: float
    shell_distance: dict[int, float]


# ---- scalar ----
class ScalarCharacterizationResponse(ReportBase):
    q0: float
    a: list[float]
    b: list[float]
    slopes: dict[str, Optional[float]]
    cauchy: dict[str, float]
    verdicts: dict[str, bool]
