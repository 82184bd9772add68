# svspec/tests/test_spectraldata.py

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import pytest

from svspec.config import ResidueConfig, SvspecSettings
from svspec.service.exceptions import InsufficientShells, ToleranceNotMet, ZeroOnContour
from svspec.service.potential import MatrixPotential
from svspec.service.spectrum import EigenLocation
from svspec.service.spectraldata import (
    SpectralDataset,
    assemble_dataset,
    build_record,
    check_Bn_asymptote,
    check_condition_A,
    check_condition_B,
    check_shell_asymptotics,
    fit_power_law,
    predict_shell,
    projector_equivalence,
    residue_limit,
    residue_via_contour,
)

from conftest import Rand

__all__: list[str] = []


@dataclass(slots=True)
class _TestData:
    """Datasets shared by the class; built once because scans dominate the runtime."""

    constant: SpectralDataset = field(init=False)
    coupled: SpectralDataset = field(init=False)


class TestSpectralDataset:
    _data: _TestData

    @pytest.fixture(autouse=True, scope="class")
    def _datasets(
        self, request: pytest.FixtureRequest, constant_dataset: SpectralDataset, coupled_dataset: SpectralDataset
    ) -> None:
        data = _TestData()
        data.constant = constant_dataset
        data.coupled = coupled_dataset
        request.cls._data = data

    def test_constant_records_are_exact(self) -> None:
        ds = self._data.constant
        assert ds.n_diamond == 1 and ds.alpha_diamond == 0
        assert ds.shells() == [1, 2, 3]
        for n in ds.shells():
            for j, r in enumerate(ds.shell(n)):
                e = np.eye(2)[j]
                assert r.lam == pytest.approx(np.pi**2 * n**2 + 1.0 + j, abs=1e-8)
                assert np.allclose(r.B, 2.0 * np.pi**2 * n**2 * np.outer(e, e), atol=1e-6)
                assert float(np.real(r.g[0, 0])) == pytest.approx(1.0 / (2.0 * np.pi**2 * n**2), rel=1e-8)

    def test_condition_A(self) -> None:
        rep = check_condition_A(self._data.constant)
        assert rep.passed and rep.counting_ok and rep.simple_tail
        assert rep.low_multiplicity == 0

    def test_tails_need_enough_shells(self) -> None:
        ds = self._data.constant
        assert ds.tails is None
        with pytest.raises(InsufficientShells):
            check_condition_B(ds)

    def test_projector_equivalence_constant(self) -> None:
        rep = projector_equivalence(self._data.constant)
        assert rep.passed
        assert max(rep.projector_sum_deviation) < 1e-9

    def test_coupled_dataset_structure(self) -> None:
        ds = self._data.coupled
        assert np.all(np.diff(ds.v0) > 0.0)
        lams = [r.lam for r in ds.records]
        assert lams == sorted(lams)
        for r in ds.records:
            assert np.allclose(r.P @ r.P, r.P, atol=1e-9)
            assert np.allclose(r.B, r.B.conj().T, atol=1e-12)
            assert np.linalg.matrix_rank(r.B, tol=1e-6 * np.linalg.norm(r.B, 2)) == r.k
        for n in ds.shells():
            total = sum(r.P for r in ds.shell(n))
            assert np.linalg.norm(total - np.eye(2), 2) < 0.5

    def test_residue_routes_agree(self) -> None:
        ds = self._data.coupled
        V = ds.potential
        assert V is not None
        r = ds.records[0]
        gap = ds.records[1].lam - r.lam
        contour = np.asarray(residue_via_contour(V, r.lam, 0.4 * gap))
        assert np.max(np.abs(contour - r.B)) < 1e-6 * max(1.0, np.max(np.abs(r.B)))
        limit = residue_limit(V, r.lam)
        assert np.max(np.abs(limit - r.B)) < 1e-3 * max(1.0, np.max(np.abs(r.B)))

    def test_shell_prediction_first_order(self) -> None:
        ds = self._data.coupled
        assert ds.potential is not None
        n = ds.shells()[-1]
        pred = predict_shell(ds.potential, n, ds.v0)
        got = np.array([r.lam for r in ds.shell(n)])
        assert np.max(np.abs(got - pred.lam)) < 0.05

    def test_shell_asymptotics_report(self) -> None:
        rep = check_shell_asymptotics(self._data.coupled)
        assert rep.n == self._data.coupled.shells()
        assert all(e < 0.1 for e in rep.basis_error)

    def test_Bn_needs_indexed_shells(self) -> None:
        ds = self._data.coupled
        assert ds.potential is not None
        with pytest.raises(InsufficientShells):
            check_Bn_asymptote(ds.potential, ds, [ds.shells()[-1] + 5])

    def test_file_model_round_trip(self) -> None:
        ds = self._data.coupled
        back = SpectralDataset.from_file_model(ds.to_file_model())
        assert back.n_diamond == ds.n_diamond and back.alpha_diamond == ds.alpha_diamond
        assert back.shells() == ds.shells()
        for a, b in zip(ds.records, back.records):
            assert a.lam == b.lam and a.index == b.index
            assert np.array_equal(a.B, b.B)


class TestBuildRecord:
    def test_free_scalar_record(self) -> None:
        lam = 4.0 * np.pi**2
        loc = EigenLocation(lam, 1, True, 0.0, np.ones((1, 1), dtype=complex))
        r = build_record(MatrixPotential.zero(1), loc)
        assert r.k == 1
        assert np.allclose(r.P, [[1.0]])
        assert float(np.real(r.g[0, 0])) == pytest.approx(0.5 / lam, rel=1e-8)
        assert float(np.real(r.B[0, 0])) == pytest.approx(2.0 * lam, rel=1e-8)


class TestResidueContour:
    def test_free_residue(self) -> None:
        B = np.asarray(residue_via_contour(MatrixPotential.zero(1), np.pi**2, 3.0))
        assert float(np.real(B[0, 0])) == pytest.approx(2.0 * np.pi**2, rel=1e-8)

    def test_eigenvalue_in_annulus(self) -> None:
        # π² 距圆心 1, 落在 0.98·(1 ± 0.05) 之间
        with pytest.raises(ZeroOnContour):
            residue_via_contour(MatrixPotential.zero(1), np.pi**2 + 1.0, 0.98)

    def test_rule_must_settle(self) -> None:
        # 半径 20 靠近 4π², 32 个节点远不够
        settings = SvspecSettings(residue=ResidueConfig(start_nodes=16, max_nodes=32))
        with pytest.raises(ToleranceNotMet):
            residue_via_contour(MatrixPotential.zero(1), np.pi**2, 20.0, settings)


class TestTailHelpers:
    def test_power_law_slope(self) -> None:
        n = np.arange(5, 40, dtype=float)
        assert fit_power_law(n, 3.0 / n**2) == pytest.approx(-2.0, abs=1e-10)

    def test_power_law_below_floor(self) -> None:
        assert fit_power_law([1.0, 2.0, 3.0], [0.0, 0.0, 0.0]) is None


@pytest.mark.slow
class TestTailDiagnostics:
    def test_smooth_potential_passes(self, rand: Rand, settings: SvspecSettings) -> None:
        V = MatrixPotential.random_trig(rand.gen, 2, harmonics=3, mean=np.diag([0.0, 4.0]))
        ds = assemble_dataset(V, np.pi**2 * 22.0**2, settings)
        assert len(ds.shells()) >= 20
        assert ds.tails is not None and ds.tails.passed
        assert check_condition_A(ds).passed
        assert ds.potential is not None
        rep = check_Bn_asymptote(ds.potential, ds, ds.shells()[-6:])
        assert rep.passed
