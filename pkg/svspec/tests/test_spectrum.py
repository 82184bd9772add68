# svspec/tests/test_spectrum.py

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings as hsettings
from hypothesis import strategies as st
from numpy.typing import NDArray
from scipy.linalg import eig_banded

from svspec.config import SvspecSettings
from svspec.service.exceptions import NotAnEigenvalue
from svspec.service.matode import MatrixOde
from svspec.service.potential import MatrixPotential, diagonalize_mean
from svspec.service.spectraldata import SpectralDataset
from svspec.service.spectrum import CountingContour, SpectrumLocator, count_zeros, locate_all, multiplicity

from conftest import Rand

__all__: list[str] = []


class TestCounting:
    def test_free_disk_counts_multiplicity(self) -> None:
        V = MatrixPotential.zero(2)
        assert count_zeros(V, CountingContour.disk(np.pi**2, 3.0)) == 2
        assert count_zeros(V, CountingContour.disk(20.0, 3.0)) == 0

    def test_rectangle(self) -> None:
        V = MatrixPotential.constant(np.diag([1.0, 2.0]))
        box = CountingContour.rectangle(0.0, 50.0, -2.0, 2.0)
        assert count_zeros(V, box) == 4

    def test_contour_validation(self) -> None:
        with pytest.raises(ValueError):
            CountingContour.disk(0.0, 1.0, nodes=16)
        with pytest.raises(ValueError):
            CountingContour.rectangle(1.0, 0.0, -1.0, 1.0)

    def test_contour_is_closed_and_positive(self) -> None:
        c = CountingContour.rectangle(0.0, 2.0, -1.0, 1.0)
        s = np.linspace(0.0, 1.0, 400, endpoint=False)
        z = c.point(s)
        area = 0.5 * np.imag(np.sum(np.conj(z) * np.roll(z, -1)))
        assert area == pytest.approx(4.0, rel=1e-2)


class TestLocate:
    def test_free_spectrum(self) -> None:
        locs = locate_all(MatrixPotential.zero(1), 200.0)
        lams = np.array([loc.lam for loc in locs])
        # 扫描到 π²(5.5)², 其中的 25π² 超出 lambda_max
        assert lams.size == 4
        assert lams.max() <= 200.0
        assert np.allclose(lams, np.pi**2 * np.arange(1, 5) ** 2, atol=1e-8)
        assert all(loc.multiplicity == 1 and loc.certified_count for loc in locs)

    def test_pauli_mean_splits_each_level(self) -> None:
        V = diagonalize_mean(MatrixPotential.constant([[0.0, 1.0], [1.0, 0.0]])).potential
        locs = locate_all(V, 100.0)
        expected = np.sort([np.pi**2 * n**2 + s for n in (1, 2, 3) for s in (-1.0, 1.0)])
        assert np.allclose([loc.lam for loc in locs], expected, atol=1e-8)
        assert all(loc.multiplicity == 1 for loc in locs)

    def test_double_eigenvalue(self) -> None:
        locs = locate_all(MatrixPotential.zero(2), 50.0)
        assert [loc.multiplicity for loc in locs] == [2, 2]
        assert locs[0].basis.shape == (2, 2)

    def test_constant_diagonal(self) -> None:
        scan = SpectrumLocator(MatrixPotential.constant(np.diag([1.0, 2.0]))).scan(100.0)
        lams = scan.eigenvalues()
        expected = np.sort([np.pi**2 * n**2 + v for n in (1, 2, 3) for v in (1.0, 2.0)])
        assert np.allclose(lams[:6], expected, atol=1e-8)
        assert sum(w.count for w in scan.windows) == lams.size

    def test_multiplicity_rejects_non_eigenvalue(self) -> None:
        with pytest.raises(NotAnEigenvalue):
            multiplicity(MatrixPotential.zero(1), 5.0)

    def test_multiplicity_basis_spans_kernel(self) -> None:
        V = MatrixPotential.constant(np.diag([0.0, 0.0, 3.0]))
        k, basis = multiplicity(V, np.pi**2)
        assert k == 2
        assert np.allclose(np.abs(basis[2]), 0.0, atol=1e-8)

    @pytest.mark.slow
    def test_random_potential_counting(self, rand: Rand) -> None:
        V = MatrixPotential.random_trig(rand.gen, 3, harmonics=3)
        settings = SvspecSettings(threads=2)
        scan = SpectrumLocator(V, settings).scan(400.0)
        total = sum(loc.multiplicity for loc in scan.locations)
        assert total == sum(w.count for w in scan.windows)
        # 每个窗口 [π²(n-½)², π²(n+½)²) 在高处恰含 N 个本征值
        assert [w.count for w in scan.windows[2:]] == [3] * (len(scan.windows) - 2)
        ode = MatrixOde(V)
        for loc in scan.locations:
            s = np.linalg.svd(ode.phi_endpoint([loc.lam]).values[0, 0], compute_uv=False)
            assert s[-1] < 1e-7 * max(1.0, s[0])

    @hsettings(max_examples=5, deadline=None)
    @given(c=st.floats(-5.0, 5.0))
    def test_constant_shift(self, c: float) -> None:
        lams = SpectrumLocator(MatrixPotential.constant([[c]])).scan(60.0).eigenvalues()
        n = np.arange(1, lams.size + 1)
        assert np.allclose(lams, np.pi**2 * n**2 + c, atol=1e-8)

    def test_weyl_counting(self, coupled_dataset: SpectralDataset) -> None:
        ds = coupled_dataset
        assert ds.potential is not None
        norm = ds.potential.sup_norm()
        lams = np.array([r.lam for r in ds.records])
        ks = np.array([r.k for r in ds.records])
        for n in ds.shells()[:-1]:
            bound = np.pi**2 * n**2 + 3.0 * norm
            assert int(ks[lams <= bound].sum()) == ds.dim * n


def _fd_eigenvalues(V: MatrixPotential, intervals: int, count: int) -> NDArray[np.float64]:
    """Lowest eigenvalues of the second-order Dirichlet stencil, channels interleaved per node."""
    h = 1.0 / intervals
    x = np.linspace(0.0, 1.0, intervals + 1)[1:-1]
    N = V.dim
    vals = V.values(x)
    band = np.zeros((N + 1, x.size * N), complex)
    for a in range(N):
        for b in range(a, N):
            cols = N * np.arange(x.size) + b
            band[N + a - b, cols] = vals[:, a, b] + (2.0 / h**2 if a == b else 0.0)
    band[0, N:] = -1.0 / h**2
    return eig_banded(band, eigvals_only=True, select="i", select_range=(0, count - 1))


def _oracle(V: MatrixPotential, count: int) -> NDArray[np.float64]:
    # Richardson: 误差首项 O(h²)
    coarse = _fd_eigenvalues(V, 2000, count)
    fine = _fd_eigenvalues(V, 4000, count)
    return (4.0 * fine - coarse) / 3.0


class TestFiniteDifferenceOracle:
    def test_mathieu_potential(self) -> None:
        V = MatrixPotential.from_fourier([[0.0]], cos={1: [[1.0]]})
        lams = np.array([loc.lam for loc in locate_all(V, 200.0)])
        assert lams.size == 4
        assert np.allclose(lams, _oracle(V, lams.size), rtol=1e-5, atol=0.0)

    @pytest.mark.slow
    def test_first_thirty(self, rand: Rand) -> None:
        scalar = MatrixPotential.from_fourier([[0.0]], cos={1: [[1.0]]})
        coupled = MatrixPotential.random_trig(rand.gen, 2, harmonics=3, scale=0.5, mean=np.diag([0.0, 1.5]))
        for V, lambda_max in ((scalar, 9000.0), (coupled, 2400.0)):
            lams = np.array([loc.lam for loc in locate_all(V, lambda_max)])
            assert lams.size >= 30
            assert np.allclose(lams[:30], _oracle(V, 30), rtol=1e-5, atol=0.0)
