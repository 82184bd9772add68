# svspec/config.py
from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

__all__: list[str] = [
    "OdeConfig",
    "PotentialConfig",
    "SpectrumConfig",
    "ResidueConfig",
    "SeriesConfig",
    "InverseConfig",
    "SvspecSettings",
    "get_settings",
]


class OdeConfig(BaseModel):
    """Shooting integrator settings."""

    rel_tol: float = 1e-10
    max_step_factor: float = Field(default=0.5, gt=0.0, le=4.0)
    method: Literal["DOP853", "RK45"] = "DOP853"
    lambda_limit: float = 1e8
    max_steps: int = Field(default=2_000_000, gt=0)

    @field_validator("rel_tol")
    @classmethod
    def _check_rel_tol(cls, value: float) -> float:
        if not 1e-14 < value < 1e-3:
            raise ValueError(f"rel_tol must lie in (1e-14, 1e-3), got {value!r}")
        return value


class PotentialConfig(BaseModel):
    tol_herm: float = 1e-12
    gap_min: float = 1e-8
    min_grid: int = 64
    quad_order: int = 8


class SpectrumConfig(BaseModel):
    contour_nodes: int = Field(default=64, ge=64)
    max_contour_nodes: int = 2**14
    sv_threshold: float = 1e-7
    newton_max_iter: int = 60
    newton_tol: float = 1e-13
    # 实轴扫描: 每个预期本征值的采样点数
    scan_density: int = 24
    max_scan_refinements: int = 4
    det_floor: float = 1e-13


class ResidueConfig(BaseModel):
    start_nodes: int = 64
    max_nodes: int = 8192
    tol: float = 1e-9
    tie_tol: float = 1e-6
    annulus: float = Field(default=0.05, gt=0.0, lt=0.5)


class SeriesConfig(BaseModel):
    # None: 数据集中最后一个完整壳层
    n_max: Optional[int] = Field(default=None, ge=1)
    tail_mode: Literal["truncate", "estimate"] = "truncate"
    tail_tol: float = 1e-3


class InverseConfig(BaseModel):
    coincide_tol: float = 1e-9
    ambiguity_tol: float = 1e-6
    cond_limit: float = 1e10
    pd_tol: float = 1e-10
    hermitian_tol: float = 1e-7
    kernel_grid: int = Field(default=1024, ge=64)
    product_tol: float = 1e-10
    n_trunc: int = 64


class SvspecSettings(BaseSettings):
    model_config = SettingsConfigDict(
        env_file=".env",
        env_prefix="SVSPEC_",
        env_nested_delimiter="__",
        case_sensitive=False,
    )

    # 基础
    threads: int = Field(default=1, ge=1)
    seed: int = 0
    log_level: str = "WARNING"

    # 数值子配置
    ode: OdeConfig = OdeConfig()
    potential: PotentialConfig = PotentialConfig()
    spectrum: SpectrumConfig = SpectrumConfig()
    residue: ResidueConfig = ResidueConfig()
    series: SeriesConfig = SeriesConfig()
    inverse: InverseConfig = InverseConfig()


def get_settings() -> SvspecSettings:
    return SvspecSettings()
