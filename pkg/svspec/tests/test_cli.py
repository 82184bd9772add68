# svspec/tests/test_cli.py

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import pytest

from svspec.api.deps import EXIT_INTERNAL, CommandHandler
from svspec.app import main
from svspec.service.exceptions import InsufficientShells, NotMonotone, ParseError, WrongIndexCombination
from svspec.service.spectraldata import SpectralDataset
from svspec.service.weylm import sqrt_cot
from svspec.store.repository import CsvRepository, dataset_repository

__all__: list[str] = []

FREE_POTENTIAL = {"N": 1, "repr": "fourier", "mean": [[[0.0, 0.0]]]}


@dataclass(slots=True)
class _TestData:
    """Files produced by one command and consumed by the next."""

    root: Path = field(init=False)
    potential: Path = field(init=False)
    dataset: Path = field(init=False)


class TestCliLifecycle:
    """spectrum → mfun on a free scalar potential, through ``main``."""

    _data: _TestData

    def _step_1_spectrum(self, capsys: pytest.CaptureFixture[str]) -> None:
        d = self._data
        code = main(["--out", str(d.dataset), "spectrum", str(d.potential), "--lmax", "1200"])
        assert code == 0
        summary = json.loads(capsys.readouterr().out)
        assert summary["passed"] and summary["output"] == str(d.dataset)
        ds = SpectralDataset.from_file_model(dataset_repository().get(d.dataset))
        assert len(ds.records) == summary["eigenvalues"] >= 2
        assert ds.records[0].lam == pytest.approx(np.pi**2, abs=1e-8)

    def _step_2_mfun_direct(self, capsys: pytest.CaptureFixture[str]) -> None:
        d = self._data
        out = d.root / "m.csv"
        assert main(["--out", str(out), "mfun", str(d.potential), "--lambda-grid", "-5,-2,3"]) == 0
        assert json.loads(capsys.readouterr().out)["flagged"] == 0
        table = CsvRepository().get(out)
        assert table.header == ["lambda", "M00_re", "M00_im", "flag"]
        expected = [-float(np.real(sqrt_cot(lam))) for lam in (-5.0, -2.0, 3.0)]
        assert np.allclose(table["M00_re"], expected, atol=1e-8)

    def _step_3_mfun_pole_flagged(self, capsys: pytest.CaptureFixture[str]) -> None:
        d = self._data
        out = d.root / "poles.csv"
        grid = f"{np.pi**2!r},1.0"
        assert main(["--out", str(out), "mfun", str(d.dataset), "--lambda-grid", grid, "--mode", "compare"]) == 0
        assert json.loads(capsys.readouterr().out)["flagged"] == 1
        table = CsvRepository().get(out)
        assert table["flag"].tolist() == [1.0, 0.0]
        assert np.isnan(table["M00_re"][0])

    def test_lifecycle(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        data = _TestData()
        data.root = tmp_path
        data.potential = tmp_path / "v.json"
        data.potential.write_text(json.dumps(FREE_POTENTIAL))
        data.dataset = tmp_path / "dataset.json"
        self._data = data
        self._step_1_spectrum(capsys)
        self._step_2_mfun_direct(capsys)
        self._step_3_mfun_pole_flagged(capsys)


class TestExitCodes:
    def test_error_classes_map_to_documented_codes(self) -> None:
        assert CommandHandler.exit_code_for(ParseError("x")) == 1
        assert CommandHandler.exit_code_for(ValueError("x")) == 1
        assert CommandHandler.exit_code_for(InsufficientShells("x")) == 3
        assert CommandHandler.exit_code_for(NotMonotone("x")) == 4
        assert CommandHandler.exit_code_for(WrongIndexCombination("x")) == 6
        assert CommandHandler.exit_code_for(KeyError("x")) == EXIT_INTERNAL

    def test_unsorted_scalar_sequence(self, tmp_path: Path) -> None:
        seq = tmp_path / "seq.csv"
        seq.write_text("n,lambda\n1,40.0\n2,10.0\n")
        assert main(["scalar", str(seq), "--characterize"]) == 4

    def test_missing_input(self, tmp_path: Path) -> None:
        assert main(["spectrum", str(tmp_path / "nope.json"), "--lmax", "50"]) == 1

    def test_format_mismatch_writes_nothing(self, tmp_path: Path) -> None:
        pot = tmp_path / "v.json"
        pot.write_text(json.dumps(FREE_POTENTIAL))
        out = tmp_path / "d.json"
        assert main(["--format", "csv", "--out", str(out), "spectrum", str(pot), "--lmax", "50"]) == 1
        assert not out.exists()

    def test_tail_check_needs_shells(self, tmp_path: Path, constant_dataset: SpectralDataset) -> None:
        path = tmp_path / "dataset.json"
        path.write_text(dataset_repository().dumps(constant_dataset.to_file_model()))
        assert main(["check", str(path), "--which", "B"]) == 3

    def test_series_needs_shells_through_n_max(self, tmp_path: Path, constant_dataset: SpectralDataset) -> None:
        path = tmp_path / "dataset.json"
        path.write_text(dataset_repository().dumps(constant_dataset.to_file_model()))
        out = tmp_path / "m.csv"
        assert main(["--out", str(out), "mfun", str(path), "--lambda-grid", "-1.0", "--mode", "series"]) == 3
        assert not out.exists()

    def test_condition_A_report(
        self, tmp_path: Path, constant_dataset: SpectralDataset, capsys: pytest.CaptureFixture[str]
    ) -> None:
        path = tmp_path / "dataset.json"
        path.write_text(dataset_repository().dumps(constant_dataset.to_file_model()))
        assert main(["--seed", "7", "check", str(path), "--which", "A"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["seed"] == 7 and report["passed"]


class TestScalarCommand:
    def test_hilbert_table(self, tmp_path: Path) -> None:
        seq = tmp_path / "a.csv"
        seq.write_text("n,a\n1,1.0\n")
        out = tmp_path / "b.csv"
        assert main(["--out", str(out), "scalar", str(seq), "--hilbert", "half_shifted", "--l-out", "4"]) == 0
        b = CsvRepository().get(out)["b"]
        n = np.arange(1, 5, dtype=float)
        assert np.allclose(b, (2.0 * n / np.pi) / (n**2 - 0.25))

    def test_convert_mu_to_alpha(self, tmp_path: Path) -> None:
        n = np.arange(1, 41, dtype=float)
        seq = tmp_path / "seq.csv"
        rows = "\n".join(f"{int(k)},{float(np.pi**2 * k**2)!r},{float(np.pi**2 * (k - 0.5) ** 2)!r}" for k in n)
        seq.write_text("n,lambda,mu\n" + rows + "\n")
        out = tmp_path / "conv.csv"
        assert main(["--out", str(out), "scalar", str(seq), "--convert", "mu:alpha"]) == 0
        alpha = CsvRepository().get(out)["alpha"]
        assert np.allclose(alpha[:10], 1.0 / (2.0 * np.pi**2 * n[:10] ** 2), rtol=1e-8)

    def test_characterize_report_fields(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        n = np.arange(1, 41, dtype=float)
        seq = tmp_path / "seq.csv"
        rows = "\n".join(f"{int(k)},{float(np.pi**2 * k**2)!r},{float(1.0 / (2.0 * np.pi**2 * k**2))!r}" for k in n)
        seq.write_text("n,lambda,alpha\n" + rows + "\n")
        assert main(["scalar", str(seq), "--characterize"]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["passed"]
        assert set(report) == {"seed", "passed", "q0", "a", "b", "slopes", "cauchy", "verdicts"}


class TestInverseCommand:
    def test_condition_C_on_free_spectrum(self, tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
        spec = tmp_path / "condc.json"
        spec.write_text(json.dumps({"N": 1, "v0": [0.0], "exceptional": [{"alpha": 1, "projector": [[[1.0, 0.0]]]}]}))
        assert main(["inverse", "--task", "condC", "--condc", str(spec)]) == 0
        report = json.loads(capsys.readouterr().out)
        assert report["verdict"] == "holds" and report["m"] == 1
        assert report["T"][0][0][0] == pytest.approx(0.25, abs=1e-9)

    def test_task_needs_its_input(self) -> None:
        assert main(["inverse", "--task", "condC"]) == 1

    def test_kernels_csv(self, tmp_path: Path) -> None:
        frame = tmp_path / "frame.json"
        frame.write_text(json.dumps({
            "channels": [{"N": 1, "mean": [[[1.0, 0.0]]]}, {"N": 1, "mean": [[[2.0, 0.0]]]}],
            "lambda_max": 60.0,
        }))
        out = tmp_path / "k.csv"
        code = main(["--out", str(out), "inverse", "--task", "kernels", "--frame", str(frame), "--alpha", "1,0"])
        assert code == 0
        table = CsvRepository().get(out)
        assert table.header == ["t", "u", "u_tilde"]
        assert np.allclose(table["u"], np.sin(np.pi * table["t"]) ** 2 / np.pi**2, atol=1e-9)
