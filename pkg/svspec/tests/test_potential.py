# svspec/tests/test_potential.py

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st

from svspec.service.exceptions import BadKind, DegenerateMean, NotHermitian, OutOfDomain, ParseError
from svspec.service.potential import (
    MatrixPotential,
    composite_gauss_legendre,
    diagonalize_mean,
    load_potential,
)

from conftest import Rand

__all__: list[str] = []


def _write(tmp_path: Path, payload: dict) -> Path:
    path = tmp_path / "potential.json"
    path.write_text(json.dumps(payload), encoding="utf-8")
    return path


class TestMatrixPotential:
    def test_fourier_evaluation_matches_series(self) -> None:
        V = MatrixPotential.from_fourier([[1.0, 0.5], [0.5, -1.0]], cos={1: [[0.2, 0.0], [0.0, 0.1]]})
        x = 0.3
        expected = np.array([[1.0, 0.5], [0.5, -1.0]]) + 2.0 * np.cos(2 * np.pi * x) * np.diag([0.2, 0.1])
        assert np.allclose(V.values(x), expected, atol=1e-14)

    def test_values_outside_interval_raise(self) -> None:
        V = MatrixPotential.zero(2)
        with pytest.raises(OutOfDomain):
            V.values([0.5, 1.2])

    def test_non_hermitian_mean_rejected(self) -> None:
        with pytest.raises(NotHermitian):
            MatrixPotential.from_fourier([[0.0, 1.0], [0.0, 0.0]])

    def test_harmonic_zero_rejected(self) -> None:
        with pytest.raises(BadKind):
            MatrixPotential.from_fourier([[0.0]], cos={0: [[1.0]]})

    def test_unknown_coefficient_kind(self) -> None:
        with pytest.raises(BadKind):
            MatrixPotential.zero(1).fourier_coefficient("tan", 1)  # type: ignore[arg-type]

    def test_weighted_sin_of_constant(self) -> None:
        V = MatrixPotential.constant(np.diag([2.0, -1.0]))
        for n in (1, 3):
            ws = np.asarray(V.fourier_coefficient("weighted_sin", n))
            assert np.allclose(ws, np.diag([2.0, -1.0]) / (2 * np.pi * n), atol=1e-14)

    def test_weighted_sin_agrees_with_grid_quadrature(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2, harmonics=3)
        G = V.to_grid(1024)
        for n in (1, 2, 5):
            exact = np.asarray(V.fourier_coefficient("weighted_sin", n))
            approx = np.asarray(G.fourier_coefficient("weighted_sin", n))
            assert np.max(np.abs(exact - approx)) < 1e-6

    def test_reflect_is_involution(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 3)
        x = np.linspace(0.0, 1.0, 7)
        assert np.allclose(V.reflect().values(x), V.values(1.0 - x), atol=1e-13)
        assert np.allclose(V.reflect().reflect().values(x), V.values(x), atol=1e-13)

    def test_grid_interpolation_is_accurate(self) -> None:
        V = MatrixPotential.from_function(lambda x: np.cos(3.0 * x), grid_size=256)
        x = np.linspace(0.0, 1.0, 101)
        assert np.max(np.abs(V.values(x)[:, 0, 0] - np.cos(3.0 * x))) < 1e-7

    def test_grid_needs_enough_samples(self) -> None:
        with pytest.raises(ValueError):
            MatrixPotential.from_grid(np.zeros(33))

    def test_arithmetic_and_channels(self) -> None:
        a = MatrixPotential.constant(np.diag([1.0, 3.0]))
        b = MatrixPotential.from_fourier(np.zeros((2, 2)), sin={1: np.eye(2)})
        c = a + 2.0 * b - a
        assert np.allclose(c.values(0.25), 4.0 * np.eye(2), atol=1e-14)
        assert a.channel(1).dim == 1
        assert a.is_diagonal()
        assert MatrixPotential.diagonal([a.channel(0), a.channel(1)]).mean_matrix()[1, 1] == pytest.approx(3.0)

    def test_sup_norm_of_constant(self) -> None:
        assert MatrixPotential.constant(np.diag([1.0, -4.0])).sup_norm() == pytest.approx(4.0)

    @hsettings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**31 - 1), x=st.floats(0.0, 1.0))
    def test_random_potentials_are_hermitian(self, seed: int, x: float) -> None:
        V = MatrixPotential.random_trig(np.random.default_rng(seed), 3, harmonics=4)
        v = V.values(x)
        assert np.max(np.abs(v - v.conj().T)) < 1e-12


class TestQuadratureAndMean:
    def test_gauss_legendre_integrates_polynomials(self) -> None:
        t, w = composite_gauss_legendre(4, 8)
        assert np.sum(w) == pytest.approx(1.0, abs=1e-14)
        assert np.sum(w * t**9) == pytest.approx(0.1, abs=1e-14)

    def test_diagonalize_mean_orders_eigenvalues(self) -> None:
        V = MatrixPotential.constant([[2.0, 1.0], [1.0, 2.0]])
        diag = diagonalize_mean(V)
        assert np.allclose(diag.v0, [1.0, 3.0])
        assert np.allclose(diag.potential.mean_matrix(), np.diag([1.0, 3.0]), atol=1e-13)
        u = diag.unitary
        assert np.allclose(u.conj().T @ u, np.eye(2), atol=1e-14)

    def test_degenerate_mean(self) -> None:
        with pytest.raises(DegenerateMean):
            diagonalize_mean(MatrixPotential.constant(np.eye(2)))


class TestLoadPotential:
    def test_fourier_file(self, tmp_path: Path) -> None:
        payload = {
            "N": 2,
            "repr": "fourier",
            "mean": [[[1.0, 0.0], [0.0, 0.5]], [[0.0, -0.5], [2.0, 0.0]]],
            "cos": [{"n": 2, "M": [[[0.1, 0.0], [0.0, 0.0]], [[0.0, 0.0], [0.0, 0.0]]]}],
        }
        V = load_potential(_write(tmp_path, payload))
        assert V.dim == 2
        assert V.mean_matrix()[0, 1] == pytest.approx(0.5j)
        assert np.asarray(V.fourier_coefficient("cos", 2))[0, 0] == pytest.approx(0.1)

    def test_file_model_round_trip(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2, harmonics=2)
        W = MatrixPotential.from_file_model(V.to_file_model())
        x = np.linspace(0.0, 1.0, 9)
        assert np.allclose(V.values(x), W.values(x), atol=1e-14)

    def test_malformed_file(self, tmp_path: Path) -> None:
        path = tmp_path / "bad.json"
        path.write_text("{not json", encoding="utf-8")
        with pytest.raises(ParseError):
            load_potential(path)

    def test_missing_file(self, tmp_path: Path) -> None:
        with pytest.raises(ParseError):
            load_potential(tmp_path / "absent.json")

    def test_shape_mismatch(self, tmp_path: Path) -> None:
        with pytest.raises(ParseError):
            load_potential(_write(tmp_path, {"N": 2, "repr": "fourier", "mean": [[[1.0, 0.0]]]}))
