# svspec/api/commands/check.py

from __future__ import annotations

import argparse
from dataclasses import asdict
from typing import Optional

from pydantic import BaseModel

from ...service.exceptions import InsufficientShells, ParseError
from ...service.spectraldata import (
    SpectralDataset,
    check_Bn_asymptote,
    check_condition_A,
    check_condition_B,
    check_shell_asymptotics,
    projector_equivalence,
)
from ...store.repository import dataset_repository
from ..deps import CommandHandler
from ..schemas import (
    BnResponse,
    ConditionAResponse,
    ConditionBResponse,
    EquivalenceResponse,
    ShellsResponse,
)

__all__ = ["register", "run", "build_report"]


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("check", help="run a spectral-data check on a dataset")
    p.add_argument("dataset", help="spectral dataset JSON")
    p.add_argument("--which", choices=["A", "B", "equiv", "Bn", "shells"], required=True)
    p.add_argument("--n-list", default=None, help="shells for the Bn check, 'lo:hi' (default 10:40)")
    p.set_defaults(handler=run)


def _n_list(spec: Optional[str], ds: SpectralDataset) -> list[int]:
    lo, hi = (10, 40) if spec is None else (int(x) for x in spec.split(":"))
    available = set(ds.shells())
    chosen = [n for n in range(lo, hi + 1) if n in available]
    if len(chosen) < 3:
        raise InsufficientShells(f"only {len(chosen)} double-indexed shells in {lo}..{hi}")
    return chosen


def build_report(ds: SpectralDataset, which: str, seed: int, n_list: Optional[str] = None) -> BaseModel:
    if which == "A":
        rep = check_condition_A(ds)
        return ConditionAResponse(seed=seed, **asdict(rep))
    if which == "B":
        tails = check_condition_B(ds)
        return ConditionBResponse(
            seed=seed, passed=tails.passed, n=[int(n) for n in tails.n],
            sequences={
                "a": abs(tails.a).max(axis=1).tolist(), "b": abs(tails.b).max(axis=1).tolist(),
                "c": tails.c.max(axis=1).tolist(), "d": tails.d.tolist(),
            },
            partial_norms=tails.partial_norms, slopes=tails.slopes, cauchy=tails.cauchy, verdicts=tails.verdicts,
        )
    if which == "equiv":
        return EquivalenceResponse(seed=seed, **asdict(projector_equivalence(ds)))
    if ds.potential is None:
        raise ParseError(f"--which {which} needs the potential embedded in the dataset")
    if which == "Bn":
        return BnResponse(seed=seed, **asdict(check_Bn_asymptote(ds.potential, ds, _n_list(n_list, ds))))
    return ShellsResponse(seed=seed, **asdict(check_shell_asymptotics(ds, ds.potential)))


def run(args: argparse.Namespace) -> int:
    with CommandHandler.get_uow() as uow:

        def _call() -> None:
            CommandHandler.require_format(args, "json")
            settings = CommandHandler.get_settings(args)
            ds = SpectralDataset.from_file_model(dataset_repository().get(args.dataset))
            CommandHandler.emit_report(uow, build_report(ds, args.which, settings.seed, args.n_list), args.out)

        return CommandHandler.run_in_transaction(uow, _call)
