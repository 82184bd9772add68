# svspec/tests/conftest.py

from __future__ import annotations

import os

import numpy as np
import pytest

from svspec.config import SvspecSettings
from svspec.service.inversekit import ReferenceFrame, make_reference
from svspec.service.potential import MatrixPotential
from svspec.service.spectraldata import SpectralDataset, assemble_dataset

__all__: list[str] = []

# 固定随机种子, 可通过环境变量复现失败用例
SEED = int(os.environ.get("SVSPEC_TEST_SEED", "20240611"))


class Rand:
    """Seeded numpy generator whose repr shows the seed on failing tests."""

    def __init__(self, seed: int = SEED) -> None:
        self.seed = seed
        self.gen = np.random.default_rng(seed)

    def __repr__(self) -> str:
        return f"Rand({self.seed})"


@pytest.fixture
def rand() -> Rand:
    return Rand()


@pytest.fixture(scope="session")
def settings() -> SvspecSettings:
    return SvspecSettings(seed=SEED)


@pytest.fixture(scope="session")
def constant_frame(settings: SvspecSettings) -> ReferenceFrame:
    """diag(1, 2): every shell simple and separated, n_diamond = 1."""
    channels = [MatrixPotential.constant([[1.0]]), MatrixPotential.constant([[2.0]])]
    return make_reference(channels, 120.0, settings)


@pytest.fixture(scope="session")
def smooth_frame(settings: SvspecSettings) -> ReferenceFrame:
    """Two trigonometric channels with well separated means."""
    c0 = MatrixPotential.from_fourier([[0.0]], cos={1: [[0.4]]}, sin={2: [[-0.2]]})
    c1 = MatrixPotential.from_fourier([[5.0]], cos={1: [[-0.3]], 2: [[0.1]]})
    return make_reference([c0, c1], 120.0, settings)


@pytest.fixture(scope="session")
def coupled_potential() -> MatrixPotential:
    return MatrixPotential.from_fourier(
        [[0.0, 0.3], [0.3, 6.0]],
        cos={1: [[0.2, 0.1], [0.1, -0.1]]},
        sin={2: [[0.0, 0.05j], [-0.05j, 0.1]]},
    )


@pytest.fixture(scope="session")
def constant_dataset(settings: SvspecSettings) -> SpectralDataset:
    return assemble_dataset(MatrixPotential.constant(np.diag([1.0, 2.0])), 120.0, settings)


@pytest.fixture(scope="session")
def long_constant_dataset(settings: SvspecSettings) -> SpectralDataset:
    """diag(1, 2) through shell 11, enough for the pole series."""
    return assemble_dataset(MatrixPotential.constant(np.diag([1.0, 2.0])), 1250.0, settings)


@pytest.fixture(scope="session")
def coupled_dataset(coupled_potential: MatrixPotential, settings: SvspecSettings) -> SpectralDataset:
    return assemble_dataset(coupled_potential, 2500.0, settings)
