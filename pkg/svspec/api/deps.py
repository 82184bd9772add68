# svspec/api/deps.py

from __future__ import annotations

import argparse
import logging
import os
import sys
from contextlib import contextmanager
from typing import Callable, Iterator, Optional, TypeVar

from pydantic import BaseModel, ValidationError

from ..config import SvspecSettings, get_settings
from ..service.exceptions import (
    BadKind,
    CoincidentEigenvalues,
    CountingHypothesisViolated,
    CountMismatch,
    DegenerateMean,
    GramNotPositive,
    IndexingAmbiguous,
    InsufficientShells,
    InterlacingViolated,
    LogDivergent,
    MeanNotZero,
    NearPole,
    NonIntegerWinding,
    NonPositiveAlpha,
    NotAnEigenvalue,
    NotHermitian,
    NotMonotone,
    OutOfDomain,
    OutOfNeighborhood,
    ParseError,
    ProductNotConverged,
    RankDeficientGram,
    SingularUpperBlock,
    SingularY,
    SpectraTooClose,
    StepLimitExceeded,
    TailTooLarge,
    ToleranceNotMet,
    WrongIndexCombination,
    ZeroOnContour,
)
from ..store.unit_of_work import OutputUnitOfWork

__all__ = ["CommandHandler", "EXIT_CODES", "EXIT_INTERNAL"]

logger = logging.getLogger(__name__)

T = TypeVar("T")

EXIT_INTERNAL = 70

# 每个错误类恰好对应一个退出码
EXIT_CODES: dict[type[BaseException], int] = {
    **dict.fromkeys((ParseError, NotHermitian, OutOfDomain, BadKind, DegenerateMean, MeanNotZero), 1),
    **dict.fromkeys((CountMismatch, ZeroOnContour, NonIntegerWinding, NotAnEigenvalue, IndexingAmbiguous, GramNotPositive), 2),
    **dict.fromkeys((InsufficientShells, TailTooLarge, NearPole), 3),
    **dict.fromkeys((NotMonotone, InterlacingViolated, NonPositiveAlpha, ProductNotConverged), 4),
    **dict.fromkeys((StepLimitExceeded, ToleranceNotMet), 5),
    **dict.fromkeys((
        OutOfNeighborhood, SpectraTooClose, WrongIndexCombination, CoincidentEigenvalues,
        RankDeficientGram, CountingHypothesisViolated, SingularUpperBlock, SingularY, LogDivergent,
    ), 6),
}


class CommandHandler:
    """
    命令层的依赖注入、输出事务与错误处理.
    Every subcommand runs through ``run`` so each failure maps to one documented exit code.
    """

    @staticmethod
    def get_settings(args: argparse.Namespace) -> SvspecSettings:
        """Environment and .env first, then global flags; SVSPEC_THREADS beats --threads."""
        settings = get_settings()
        update: dict[str, object] = {}
        if getattr(args, "seed", None) is not None:
            update["seed"] = args.seed
        if getattr(args, "log_level", None):
            update["log_level"] = args.log_level
        if getattr(args, "threads", None) is not None and "SVSPEC_THREADS" not in os.environ:
            update["threads"] = args.threads
        if getattr(args, "rel_tol", None) is not None:
            update["ode"] = settings.ode.model_copy(update={"rel_tol": args.rel_tol})
        settings = settings.model_copy(update=update)
        # model_copy 不做校验, 这里重新校验一次
        return SvspecSettings.model_validate(settings.model_dump())

    @staticmethod
    @contextmanager
    def get_uow() -> Iterator[OutputUnitOfWork]:
        with OutputUnitOfWork() as uow:
            yield uow

    @staticmethod
    def exit_code_for(exc: BaseException) -> int:
        for cls in type(exc).__mro__:
            if cls in EXIT_CODES:
                return EXIT_CODES[cls]
        if isinstance(exc, (ValueError, ValidationError)):
            return 1
        return EXIT_INTERNAL

    @classmethod
    def _handle_service_errors(cls, call: Callable[[], T]) -> tuple[Optional[T], int]:
        try:
            return call(), 0
        except Exception as e:
            code = cls.exit_code_for(e)
            if code == EXIT_INTERNAL:
                logger.exception("unexpected internal error")
            else:
                logger.error("%s: %s", type(e).__name__, e)
            return None, code

    @classmethod
    def run(cls, call: Callable[[], object]) -> int:
        """Runs a read-only command and returns its exit code."""
        _, code = cls._handle_service_errors(call)
        return code

    @classmethod
    def run_in_transaction(cls, uow: OutputUnitOfWork, call: Callable[[], object]) -> int:
        """Runs a command that stages artifacts and commits them only on success."""

        def _transactional_call() -> object:
            try:
                result = call()
                uow.commit()
                return result
            except Exception:
                uow.rollback()
                raise

        _, code = cls._handle_service_errors(_transactional_call)
        return code

    @staticmethod
    def emit_report(uow: OutputUnitOfWork, report: BaseModel, out: Optional[str]) -> None:
        """Stages the report at ``out`` or prints it to stdout."""
        if out:
            uow.reports.add(out, report)
        else:
            sys.stdout.write(uow.reports.dumps(report))

    @staticmethod
    def require_format(args: argparse.Namespace, fmt: str) -> None:
        """Rejects a global --format that the command cannot produce."""
        wanted = getattr(args, "format", None)
        if wanted is not None and wanted != fmt:
            raise ValueError(f"{args.command} writes {fmt}, not {wanted}")
