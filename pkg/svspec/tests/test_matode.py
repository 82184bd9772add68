# svspec/tests/test_matode.py

from __future__ import annotations

import numpy as np
import pytest

from svspec.config import OdeConfig
from svspec.service.exceptions import StepLimitExceeded
from svspec.service.matode import MatrixOde, free_solution_asymptote, sinc_sqrt, solve_bundle
from svspec.service.potential import MatrixPotential

from conftest import Rand

__all__: list[str] = []


class TestFreeSolutions:
    """V = 0: φ(1) = sin√λ/√λ, φ′(1) = cos√λ, χ(0) = sin√λ/√λ, χ′(0) = -cos√λ."""

    @pytest.mark.parametrize("lam", [-3.0, 0.5, 40.0, 5.0 + 2.0j])
    def test_endpoints(self, lam: complex) -> None:
        ode = MatrixOde(MatrixPotential.zero(2))
        b = ode.bundle(lam)
        s = np.sqrt(complex(lam))
        eye = np.eye(2)
        assert np.allclose(b.phi1, np.sin(s) / s * eye, atol=1e-9)
        assert np.allclose(b.dphi1, np.cos(s) * eye, atol=1e-9)
        assert np.allclose(b.chi0, np.sin(s) / s * eye, atol=1e-9)
        assert np.allclose(b.dchi0, -np.cos(s) * eye, atol=1e-9)

    def test_sinc_sqrt_near_zero(self) -> None:
        assert complex(sinc_sqrt(1e-6)) == pytest.approx(1.0 - 1e-6 / 6.0, abs=1e-15)
        assert complex(sinc_sqrt(-np.pi**2)) == pytest.approx(np.sinh(np.pi) / np.pi)

    def test_gram_at_first_eigenvalue(self) -> None:
        b = solve_bundle(MatrixPotential.zero(1), np.pi**2, gram=True)
        assert b.gram is not None
        assert b.gram[0, 0].real == pytest.approx(1.0 / (2.0 * np.pi**2), rel=1e-8)

    def test_path_matches_closed_form(self) -> None:
        ode = MatrixOde(MatrixPotential.zero(1))
        t = np.array([0.9, 0.1, 0.5])
        k = 2.0
        phi = ode.phi_path(k**2, t)
        chi = ode.chi_path(k**2, t)
        assert np.allclose(phi.values[:, 0, 0, 0], np.sin(k * t) / k, atol=1e-9)
        assert np.allclose(chi.values[:, 0, 0, 0], np.sin(k * (1.0 - t)) / k, atol=1e-9)
        assert np.allclose(chi.derivs[:, 0, 0, 0], -np.cos(k * (1.0 - t)), atol=1e-9)


class TestGeneralPotential:
    def test_lambda_derivatives_match_differences(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2, harmonics=2)
        ode = MatrixOde(V)
        lam, h = 7.3, 1e-3
        data = ode.phi_endpoint([lam - h, lam, lam + h], order=1)
        fd = (data.values[2, 0] - data.values[0, 0]) / (2 * h)
        assert np.max(np.abs(data.values[1, 1] - fd)) < 1e-6
        chi = ode.chi_endpoint([lam - h, lam, lam + h], order=1)
        fd_chi = (chi.derivs[2, 0] - chi.derivs[0, 0]) / (2 * h)
        assert np.max(np.abs(chi.derivs[1, 1] - fd_chi)) < 1e-6

    def test_batch_equals_single(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2)
        ode = MatrixOde(V)
        lams = [1.0, 30.0 + 1.0j, -4.0]
        batch = ode.phi_endpoint(lams).values[:, 0]
        single = np.array([ode.phi_endpoint([lam]).values[0, 0] for lam in lams])
        assert np.max(np.abs(batch - single)) < 1e-8

    def test_self_wronskian_vanishes_for_real_lambda(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 3)
        b = MatrixOde(V).bundle(12.5)
        w = b.phi1.conj().T @ b.dphi1 - b.dphi1.conj().T @ b.phi1
        assert np.max(np.abs(w)) < 1e-8

    @pytest.mark.parametrize("lam", [12.5, -3.0, 20.0 + 3.0j])
    def test_wronskian_is_constant(self, rand: Rand, lam: complex) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2)
        ode = MatrixOde(V)
        t = np.array([0.0, 0.5, 1.0])
        phi = ode.phi_path(lam, t)
        chi = ode.chi_path(np.conj(lam), t)
        adj = lambda a: np.conj(np.swapaxes(a, -1, -2))  # noqa: E731
        w = adj(chi.values[:, 0]) @ phi.derivs[:, 0] - adj(chi.derivs[:, 0]) @ phi.values[:, 0]
        scale = max(1.0, float(np.max(np.abs(w))))
        assert np.max(np.abs(w - w[0])) < 1e-7 * scale
        # x = 1 端 W = φ(1, λ)
        assert np.max(np.abs(w[2] - ode.bundle(lam).phi1)) < 1e-7 * scale

    def test_reflection_swaps_the_solutions(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2)
        lam = 8.0 + 1.0j
        direct, mirrored = MatrixOde(V), MatrixOde(V.reflect())
        phi = direct.phi_endpoint([lam])
        chi = mirrored.chi_endpoint([lam])
        assert np.max(np.abs(chi.values[0, 0] - phi.values[0, 0])) < 1e-8
        assert np.max(np.abs(chi.derivs[0, 0] + phi.derivs[0, 0])) < 1e-8
        t = np.array([0.2, 0.7])
        inner = direct.chi_path(lam, t).values[:, 0]
        assert np.max(np.abs(inner - mirrored.phi_path(lam, 1.0 - t).values[:, 0])) < 1e-8

    def test_gram_is_hermitian_positive(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2)
        b = solve_bundle(V, 3.0, gram=True)
        assert b.gram is not None
        g = b.gram
        assert np.max(np.abs(g - g.conj().T)) < 1e-8
        assert np.all(np.linalg.eigvalsh(0.5 * (g + g.conj().T)) > 0.0)

    def test_free_asymptote_for_large_lambda(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2)
        z = 40.3
        exact = MatrixOde(V).bundle(z**2).phi1
        approx = free_solution_asymptote(V, z)
        assert np.max(np.abs(exact - approx)) < V.sup_norm() ** 2 / z**3

    def test_lambda_limit(self) -> None:
        ode = MatrixOde(MatrixPotential.zero(1), OdeConfig(lambda_limit=1e4))
        with pytest.raises(StepLimitExceeded):
            ode.phi_endpoint([2e4])
