# svspec/api/commands/scalar.py

from __future__ import annotations

import argparse
from dataclasses import asdict
from typing import cast

import numpy as np

from ...service.scalartools import (
    ScalarSpectra,
    Sequence_,
    check_scalar_characterization,
    convert,
    discrete_hilbert,
)
from ...store.repository import CsvRepository, Table
from ..deps import CommandHandler
from ..schemas import ScalarCharacterizationResponse

__all__ = ["register", "run", "spectra_from_table", "table_from_spectra"]

_COLUMNS = {"mu": "mu", "alpha": "alpha", "nu": "nu"}


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("scalar", help="scalar spectral-data conversions and discrete Hilbert transforms")
    p.add_argument("sequences", help="CSV with columns n, lambda and optionally mu, alpha, nu (or n, a for --hilbert)")
    mode = p.add_mutually_exclusive_group(required=True)
    mode.add_argument("--convert", help="'source:target' with both in {mu, alpha, nu}")
    mode.add_argument("--hilbert", choices=["half_shifted", "full_integer"])
    mode.add_argument("--characterize", action="store_true")
    p.add_argument("--l-out", type=int, default=None, help="output length of the Hilbert transform")
    p.add_argument("--normalize", action=argparse.BooleanOptionalAction, default=None,
                   help="apply 1/pi to the full_integer kernel")
    p.set_defaults(handler=run)


def spectra_from_table(table: Table) -> ScalarSpectra:
    if "lambda" not in table:
        raise ValueError("sequence CSV needs a 'lambda' column")
    optional = {k: table[c] if c in table else None for k, c in _COLUMNS.items()}
    return ScalarSpectra(table["lambda"], optional["mu"], optional["alpha"], optional["nu"])


def table_from_spectra(spectra: ScalarSpectra) -> Table:
    cols: dict[str, np.ndarray] = {"n": np.arange(1, spectra.size + 1, dtype=float), "lambda": spectra.dirichlet}
    for key, name in (("mixed", "mu"), ("alpha", "alpha"), ("nu", "nu")):
        value = getattr(spectra, key)
        if value is not None:
            cols[name] = value[: spectra.size]
    return Table(cols)


def _parse_convert(text: str) -> tuple[Sequence_, Sequence_]:
    parts = text.split(":")
    if len(parts) != 2 or any(p not in _COLUMNS for p in parts):
        raise ValueError(f"--convert {text!r} must be 'source:target' with names in {sorted(_COLUMNS)}")
    return cast(Sequence_, parts[0]), cast(Sequence_, parts[1])


def run(args: argparse.Namespace) -> int:
    with CommandHandler.get_uow() as uow:

        def _call() -> None:
            settings = CommandHandler.get_settings(args)
            CommandHandler.require_format(args, "json" if args.characterize else "csv")
            table = CsvRepository().get(args.sequences)
            if args.hilbert:
                name = "a" if "a" in table else table.header[-1]
                b = discrete_hilbert(table[name], args.hilbert, args.l_out,
                                     normalize=args.normalize, threads=settings.threads)
                uow.tables.add(args.out or "hilbert.csv",
                               Table({"n": np.arange(1, b.size + 1, dtype=float), "b": b}))
                return
            spectra = spectra_from_table(table)
            if args.convert:
                source, target = _parse_convert(args.convert)
                uow.tables.add(args.out or "converted.csv", table_from_spectra(convert(spectra, source, target)))
                return
            rep = check_scalar_characterization(spectra)
            CommandHandler.emit_report(uow, ScalarCharacterizationResponse(seed=settings.seed, **asdict(rep)), args.out)

        return CommandHandler.run_in_transaction(uow, _call)
