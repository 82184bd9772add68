# svspec/tests/test_store.py

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import pytest

from svspec.service.exceptions import ParseError
from svspec.store.models import ConditionCFile, PotentialFile, matrix_to_pairs, pairs_to_matrix
from svspec.store.repository import CsvRepository, Table, condition_c_repository, potential_repository
from svspec.store.unit_of_work import OutputUnitOfWork

__all__: list[str] = []


class TestModels:
    def test_pairs_round_trip(self) -> None:
        a = np.array([[1.0, 2.0 - 0.5j], [2.0 + 0.5j, -3.0]])
        assert np.array_equal(pairs_to_matrix(matrix_to_pairs(a)), a)

    def test_pairs_need_two_parts(self) -> None:
        with pytest.raises(ValueError):
            pairs_to_matrix([[(1.0, 0.0, 2.0)]])  # type: ignore[list-item]

    def test_potential_alias_and_shapes(self) -> None:
        model = PotentialFile.model_validate({"N": 1, "repr": "fourier", "mean": [[[0.5, 0.0]]]})
        assert model.representation == "fourier"
        with pytest.raises(ValueError):
            PotentialFile.model_validate({"N": 2, "mean": [[[0.5, 0.0]]]})
        with pytest.raises(ValueError):
            PotentialFile.model_validate({"N": 1, "repr": "grid"})

    def test_condition_c_dims(self) -> None:
        with pytest.raises(ValueError):
            ConditionCFile.model_validate({
                "N": 2, "v0": [0.0], "exceptional": [{"alpha": 1, "projector": [[[1, 0], [0, 0]], [[0, 0], [0, 0]]]}],
            })


class TestRepositories:
    def test_json_repository_reads_and_reports_errors(self, tmp_path: Path) -> None:
        good = tmp_path / "v.json"
        good.write_text(json.dumps({"N": 1, "mean": [[[1.0, 0.0]]], "cos": [{"n": 1, "M": [[[0.2, 0.0]]]}]}))
        model = potential_repository().get(good)
        assert model.cos[0].n == 1
        bad = tmp_path / "bad.json"
        bad.write_text(json.dumps({"N": 1, "mean": [[[1.0, 0.0]]], "extra": 3}))
        with pytest.raises(ParseError):
            potential_repository().get(bad)
        with pytest.raises(ParseError):
            condition_c_repository().get(tmp_path / "missing.json")

    def test_read_only_outside_unit_of_work(self, tmp_path: Path) -> None:
        with pytest.raises(RuntimeError):
            CsvRepository().add(tmp_path / "t.csv", Table({"x": [1.0]}))

    def test_csv_round_trip(self, tmp_path: Path) -> None:
        table = Table({"n": [1.0, 2.0, 3.0], "b": [0.1, 1.0 / 3.0, -2.5e-17]})
        path = tmp_path / "t.csv"
        path.write_text(CsvRepository().dumps(table))
        back = CsvRepository().get(path)
        assert back.header == ["n", "b"]
        assert np.array_equal(back["b"], table["b"])

    def test_csv_skips_comments_and_rejects_text(self, tmp_path: Path) -> None:
        path = tmp_path / "t.csv"
        path.write_text("# generated\nn,lambda\n1,9.8\n2,39.4\n")
        assert len(CsvRepository().get(path)) == 2
        path.write_text("n,lambda\n1,abc\n")
        with pytest.raises(ParseError):
            CsvRepository().get(path)

    def test_table_columns_must_match(self) -> None:
        with pytest.raises(ValueError):
            Table({"a": [1.0, 2.0], "b": [1.0]})


class TestOutputUnitOfWork:
    def test_commit_writes_everything(self, tmp_path: Path) -> None:
        with OutputUnitOfWork() as uow:
            uow.tables.add(tmp_path / "a.csv", Table({"x": [1.0]}))
            uow.tables.add(tmp_path / "sub" / "b.csv", Table({"y": [2.0]}))
            assert len(uow.pending) == 2
            written = uow.commit()
        assert sorted(p.name for p in written) == ["a.csv", "b.csv"]
        assert (tmp_path / "sub" / "b.csv").read_text().startswith("y\n")
        assert not list(tmp_path.glob(".*"))

    def test_exception_discards_batch(self, tmp_path: Path) -> None:
        with pytest.raises(KeyError):
            with OutputUnitOfWork() as uow:
                uow.tables.add(tmp_path / "a.csv", Table({"x": [1.0]}))
                raise KeyError("boom")
        assert uow.pending == []
        assert not (tmp_path / "a.csv").exists()
