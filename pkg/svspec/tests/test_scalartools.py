# svspec/tests/test_scalartools.py

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from svspec.service.exceptions import (
    InsufficientShells,
    InterlacingViolated,
    NonPositiveAlpha,
    NotMonotone,
    ProductNotConverged,
)
from svspec.service.potential import MatrixPotential
from svspec.service.scalartools import (
    ScalarSpectra,
    check_scalar_characterization,
    convert,
    dirichlet_spectrum,
    discrete_hilbert,
    doubled_potential,
    hadamard_products,
    mixed_spectrum,
)

__all__: list[str] = []

N_TERMS = 60


def _free(count: int = N_TERMS, **kw: bool) -> ScalarSpectra:
    n = np.arange(1, count + 1, dtype=float)
    return ScalarSpectra(
        np.pi**2 * n**2,
        mixed=np.pi**2 * (n - 0.5) ** 2 if kw.get("mixed", True) else None,
        alpha=1.0 / (2.0 * np.pi**2 * n**2) if kw.get("alpha", True) else None,
        nu=np.zeros(count) if kw.get("nu", True) else None,
    )


class TestScalarSpectra:
    def test_unsorted_dirichlet(self) -> None:
        with pytest.raises(NotMonotone):
            ScalarSpectra(np.array([1.0, 3.0, 2.0]))

    def test_repeated_dirichlet(self) -> None:
        with pytest.raises(NotMonotone):
            ScalarSpectra(np.array([1.0, 2.0, 2.0]))

    def test_nonpositive_alpha(self) -> None:
        with pytest.raises(NonPositiveAlpha):
            ScalarSpectra(np.array([1.0, 2.0]), alpha=np.array([0.5, -0.1]))

    def test_interlacing(self) -> None:
        with pytest.raises(InterlacingViolated):
            ScalarSpectra(np.array([10.0, 40.0]), mixed=np.array([2.0, 50.0]))

    def test_q0_estimate(self) -> None:
        n = np.arange(1, 40, dtype=float)
        assert ScalarSpectra(np.pi**2 * n**2 + 0.75).q0 == pytest.approx(0.75)


class TestHadamard:
    def test_free_products_at_minus_one(self) -> None:
        vals = hadamard_products(_free(), -1.0)
        assert vals.f.real == pytest.approx(np.sinh(1.0), abs=1e-10)
        assert vals.g is not None
        assert vals.g.real == pytest.approx(np.cosh(1.0), abs=1e-10)

    def test_derivative_at_dirichlet_eigenvalue(self) -> None:
        # f(λ) = sin√λ/√λ, ḟ(π²n²) = (-1)ⁿ/(2π²n²)
        spectra = _free()
        for n in (1, 2, 3):
            vals = hadamard_products(spectra, np.pi**2 * n**2)
            assert abs(vals.f) < 1e-12
            assert vals.f_dot.real == pytest.approx((-1) ** n / (2.0 * np.pi**2 * n**2), rel=1e-9)

    def test_tail_too_far_out(self) -> None:
        with pytest.raises(ProductNotConverged):
            hadamard_products(_free(count=5), np.pi**2 * 30.0**2)


class TestConversions:
    def test_alpha_from_mu(self) -> None:
        spectra = _free(alpha=False, nu=False)
        out = convert(spectra, "mu", "alpha")
        assert out.alpha is not None
        n = np.arange(1, N_TERMS + 1)
        assert np.allclose(out.alpha[:10], 1.0 / (2.0 * np.pi**2 * n[:10] ** 2), rtol=1e-9)

    def test_nu_from_alpha(self) -> None:
        out = convert(_free(mixed=False, nu=False), "alpha", "nu")
        assert out.nu is not None
        assert np.max(np.abs(out.nu[:10])) < 1e-9

    def test_mu_from_nu(self) -> None:
        out = convert(_free(mixed=False, alpha=False), "nu", "mu")
        assert out.mixed is not None
        n = np.arange(1, 11, dtype=float)
        assert np.allclose(out.mixed[:10], np.pi**2 * (n - 0.5) ** 2, atol=1e-9)

    def test_alpha_nu_round_trip(self) -> None:
        q = MatrixPotential.from_fourier([[0.0]], cos={1: [[0.5]]})
        spectra = ScalarSpectra.from_potential(q, 40, with_mixed=False)
        nu = convert(spectra, "alpha", "nu")
        back = convert(ScalarSpectra(spectra.dirichlet, nu=nu.nu), "nu", "alpha")
        assert spectra.alpha is not None and back.alpha is not None
        assert np.allclose(back.alpha[:15], spectra.alpha[:15], rtol=1e-7)

    def test_missing_source(self) -> None:
        with pytest.raises(ValueError):
            convert(_free(alpha=False), "alpha", "nu")


class TestCharacterization:
    def test_free_data_passes(self) -> None:
        rep = check_scalar_characterization(_free())
        assert rep.passed
        assert rep.q0 == pytest.approx(0.0, abs=1e-12)

    def test_needs_enough_terms(self) -> None:
        with pytest.raises(InsufficientShells):
            check_scalar_characterization(_free(count=10))

    def test_growing_alpha_defect_fails(self) -> None:
        n = np.arange(1, N_TERMS + 1, dtype=float)
        alpha = (1.0 + 0.3 / np.sqrt(n)) / (2.0 * np.pi**2 * n**2)
        rep = check_scalar_characterization(ScalarSpectra(np.pi**2 * n**2, alpha=alpha))
        assert not rep.verdicts["b"]
        assert not rep.passed


class TestDiscreteHilbert:
    def test_delta_half_shifted(self) -> None:
        b = discrete_hilbert(np.array([1.0]), "half_shifted", 5)
        n = np.arange(1, 6, dtype=float)
        assert b[0] == pytest.approx(8.0 / (3.0 * np.pi))
        assert np.allclose(b, (2.0 * n / np.pi) / (n**2 - 0.25))

    def test_delta_isometry(self) -> None:
        b = discrete_hilbert(np.array([1.0]), "half_shifted", 10_000, threads=2, chunk=1500)
        assert np.linalg.norm(b) == pytest.approx(1.0, abs=1e-3)

    def test_full_integer_kernel(self) -> None:
        a = np.array([1.0, 0.0, 0.0])
        b = discrete_hilbert(a, "full_integer", 3)
        assert np.allclose(b, [0.5, 1.0 + 1.0 / 3.0, 0.5 + 0.25])
        assert np.allclose(discrete_hilbert(a, "full_integer", 3, normalize=True), b / np.pi)

    def test_output_shorter_than_input(self) -> None:
        with pytest.raises(ValueError):
            discrete_hilbert(np.ones(5), "half_shifted", 3)

    @hsettings(max_examples=20, deadline=None)
    @given(a=arrays(np.float64, st.integers(1, 12), elements=st.floats(-1.0, 1.0)))
    def test_half_shifted_is_nearly_isometric(self, a: np.ndarray) -> None:
        norm = float(np.linalg.norm(a))
        b = discrete_hilbert(a, "half_shifted", 20_000)
        assert float(np.linalg.norm(b)) == pytest.approx(norm, abs=2e-3 * max(norm, 1.0))


class TestFromPotential:
    def test_free_potential(self) -> None:
        spectra = ScalarSpectra.from_potential(MatrixPotential.zero(1), 6)
        n = np.arange(1, 7, dtype=float)
        assert np.allclose(spectra.dirichlet, np.pi**2 * n**2, atol=1e-8)
        assert spectra.alpha is not None and spectra.nu is not None and spectra.mixed is not None
        assert np.allclose(spectra.alpha, 1.0 / (2.0 * np.pi**2 * n**2), rtol=1e-8)
        assert np.max(np.abs(spectra.nu)) < 1e-9
        assert np.allclose(spectra.mixed, np.pi**2 * (n - 0.5) ** 2, atol=1e-9)

    @pytest.mark.slow
    def test_doubled_interval_spectrum(self) -> None:
        q = MatrixPotential.from_fourier([[0.0]], cos={1: [[0.5]]}, sin={1: [[0.25]]})
        lam = dirichlet_spectrum(q, 4)
        mu = mixed_spectrum(q, 4, dirichlet=lam)
        doubled = dirichlet_spectrum(doubled_potential(q), 8)
        merged = np.sort(np.concatenate([lam, mu]))
        assert np.allclose(doubled / 4.0, merged, atol=1e-5)
