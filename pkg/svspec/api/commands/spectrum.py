# svspec/api/commands/spectrum.py

from __future__ import annotations

import argparse

from ...service.potential import load_potential
from ...service.spectraldata import assemble_dataset
from ..deps import CommandHandler
from ..schemas import SpectrumSummary

__all__ = ["register", "run"]


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("spectrum", help="locate the spectrum and write a spectral dataset JSON")
    p.add_argument("potential", help="potential JSON file")
    p.add_argument("--lmax", type=float, required=True, help="upper end of the spectral window")
    p.set_defaults(handler=run)


def run(args: argparse.Namespace) -> int:
    """谱计算: potential.json → dataset.json (默认输出 dataset.json)."""
    out = args.out or "dataset.json"
    with CommandHandler.get_uow() as uow:

        def _call() -> None:
            CommandHandler.require_format(args, "json")
            settings = CommandHandler.get_settings(args)
            V = load_potential(args.potential, settings.potential)
            ds = assemble_dataset(V, args.lmax, settings)
            uow.datasets.add(out, ds.to_file_model())
            summary = SpectrumSummary(
                seed=settings.seed, passed=True, N=ds.dim, eigenvalues=len(ds.records),
                n_diamond=ds.n_diamond, alpha_diamond=ds.alpha_diamond, shells=len(ds.shells()),
                lambda_max=args.lmax, output=out,
            )
            CommandHandler.emit_report(uow, summary, None)

        return CommandHandler.run_in_transaction(uow, _call)
