# svspec/store/unit_of_work.py

from __future__ import annotations

import logging
import os
import tempfile
from pathlib import Path
from types import TracebackType
from typing import Optional, Type

from .repository import (
    CsvRepository,
    ReportRepository,
    condition_c_repository,
    dataset_repository,
    frame_repository,
    potential_repository,
)

__all__ = ["OutputUnitOfWork"]

logger = logging.getLogger(__name__)


class OutputUnitOfWork:
    """Collects every artifact of one command and writes them all or none.

    Each file is written to a temporary sibling and moved into place with
    ``os.replace`` on commit; an exception inside the block discards the batch.
    """

    def __init__(self) -> None:
        self._staged: dict[Path, str] = {}
        self.potentials = potential_repository(self._stage)
        self.datasets = dataset_repository(self._stage)
        self.frames = frame_repository(self._stage)
        self.condition_c = condition_c_repository(self._stage)
        self.reports = ReportRepository(self._stage)
        self.tables = CsvRepository(self._stage)

    def _stage(self, path: Path, text: str) -> None:
        self._staged[path] = text

    @property
    def pending(self) -> list[Path]:
        return list(self._staged)

    def __enter__(self) -> "OutputUnitOfWork":
        return self

    def __exit__(
        self,
        exc_type: Optional[Type[BaseException]],
        exc_val: Optional[BaseException],
        exc_tb: Optional[TracebackType],
    ) -> None:
        if exc_type:
            self.rollback()

    def commit(self) -> list[Path]:
        written: list[tuple[Path, Path]] = []
        try:
            for path, text in self._staged.items():
                path.parent.mkdir(parents=True, exist_ok=True)
                fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", dir=path.parent)
                with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
                    fh.write(text)
                written.append((Path(tmp), path))
        except OSError:
            for tmp, _ in written:
                tmp.unlink(missing_ok=True)
            raise
        for tmp, path in written:
            os.replace(tmp, path)
            logger.info("wrote %s", path)
        paths = [p for _, p in written]
        self._staged.clear()
        return paths

    def rollback(self) -> None:
        if self._staged:
            logger.debug("discarding %d staged artifact(s)", len(self._staged))
        self._staged.clear()
