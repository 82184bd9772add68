# svspec/store/repository.py
from __future__ import annotations

import csv
import io
import json
from pathlib import Path
from typing import Any, Callable, Generic, Mapping, Optional, Protocol, Sequence, Type, TypeVar

import numpy as np
from numpy.typing import NDArray
from pydantic import BaseModel, ValidationError

from ..service.exceptions import ParseError
from .models import ConditionCFile, DatasetFile, FrameFile, PotentialFile

__all__: list[str] = [
    "Repository",
    "Table",
    "JsonModelRepository",
    "ReportRepository",
    "CsvRepository",
    "dumps_json",
    "potential_repository",
    "dataset_repository",
    "frame_repository",
    "condition_c_repository",
]

T = TypeVar("T")
M = TypeVar("M", bound=BaseModel)

Stage = Callable[[Path, str], None]


class Repository(Protocol, Generic[T]):
    """A protocol for artifact repositories.

    Reads go straight to disk; writes are handed to a staging callback so a
    unit of work can commit them together.
    """

    def get(self, path: str | Path) -> T:
        """Reads and validates one artifact."""
        ...

    def add(self, path: str | Path, entity: T) -> None:
        """Stages one artifact for writing."""
        ...


def dumps_json(payload: Any) -> str:
    """Fixed field order, shortest round-trip floats, trailing newline."""
    return json.dumps(payload, indent=2, ensure_ascii=False, allow_nan=True) + "\n"


def _read_text(path: Path) -> str:
    try:
        return path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"{path}: {e.strerror or e}") from e


class JsonModelRepository(Generic[M]):
    """JSON files validated by one pydantic model."""

    def __init__(self, model: Type[M], stage: Optional[Stage] = None) -> None:
        self._model = model
        self._stage = stage

    def get(self, path: str | Path) -> M:
        p = Path(path)
        text = _read_text(p)
        try:
            return self._model.model_validate_json(text)
        except ValidationError as e:
            raise ParseError(f"{p}: {e.error_count()} schema error(s): {e.errors()[0]['msg']}") from e

    def dumps(self, entity: M) -> str:
        return dumps_json(entity.model_dump(mode="json", by_alias=True, exclude_none=True))

    def add(self, path: str | Path, entity: M) -> None:
        if self._stage is None:
            raise RuntimeError("repository is read-only outside a unit of work")
        self._stage(Path(path), self.dumps(entity))


class ReportRepository:
    """Report JSON of any pydantic report model (write-only)."""

    def __init__(self, stage: Optional[Stage] = None) -> None:
        self._stage = stage

    def dumps(self, report: BaseModel) -> str:
        return dumps_json(report.model_dump(mode="json", by_alias=True))

    def add(self, path: str | Path, report: BaseModel) -> None:
        if self._stage is None:
            raise RuntimeError("repository is read-only outside a unit of work")
        self._stage(Path(path), self.dumps(report))


class Table:
    """Named float columns of equal length, kept in header order."""

    def __init__(self, columns: Mapping[str, Sequence[float] | NDArray[np.float64]]) -> None:
        self.columns: dict[str, NDArray[np.float64]] = {k: np.asarray(v, dtype=float) for k, v in columns.items()}
        lengths = {v.shape[0] for v in self.columns.values()}
        if len(lengths) > 1:
            raise ValueError(f"columns have different lengths {sorted(lengths)}")

    def __len__(self) -> int:
        return next(iter(self.columns.values())).shape[0] if self.columns else 0

    def __contains__(self, name: object) -> bool:
        return name in self.columns

    def __getitem__(self, name: str) -> NDArray[np.float64]:
        return self.columns[name]

    @property
    def header(self) -> list[str]:
        return list(self.columns)


class CsvRepository:
    """CSV tables with a header row; numbers use repr so values round-trip."""

    def __init__(self, stage: Optional[Stage] = None) -> None:
        self._stage = stage

    def get(self, path: str | Path) -> Table:
        p = Path(path)
        rows = list(csv.reader(io.StringIO(_read_text(p))))
        rows = [r for r in rows if r and not r[0].startswith("#")]
        if not rows:
            raise ParseError(f"{p}: empty table")
        header = [h.strip() for h in rows[0]]
        try:
            body = np.array([[float(x) for x in r] for r in rows[1:]], dtype=float).reshape(len(rows) - 1, len(header))
        except ValueError as e:
            raise ParseError(f"{p}: non-numeric or ragged row ({e})") from e
        return Table({h: body[:, i] for i, h in enumerate(header)})

    def dumps(self, table: Table) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(table.header)
        cols = [table[h] for h in table.header]
        for i in range(len(table)):
            writer.writerow([repr(float(c[i])) for c in cols])
        return buf.getvalue()

    def add(self, path: str | Path, table: Table) -> None:
        if self._stage is None:
            raise RuntimeError("repository is read-only outside a unit of work")
        self._stage(Path(path), self.dumps(table))


def potential_repository(stage: Optional[Stage] = None) -> JsonModelRepository[PotentialFile]:
    return JsonModelRepository(PotentialFile, stage)


def dataset_repository(stage: Optional[Stage] = None) -> JsonModelRepository[DatasetFile]:
    return JsonModelRepository(DatasetFile, stage)


def frame_repository(stage: Optional[Stage] = None) -> JsonModelRepository[FrameFile]:
    return JsonModelRepository(FrameFile, stage)


def condition_c_repository(stage: Optional[Stage] = None) -> JsonModelRepository[ConditionCFile]:
    return JsonModelRepository(ConditionCFile, stage)
