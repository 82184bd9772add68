# svspec/api/commands/mfun.py

from __future__ import annotations

import argparse
import logging
from typing import Optional

import numpy as np
from numpy.typing import NDArray

from ...config import SvspecSettings
from ...service.exceptions import NearPole, ParseError
from ...service.matode import MatrixOde
from ...service.potential import MatrixPotential, load_potential
from ...service.spectraldata import SpectralDataset
from ...service.weylm import WeylSeries, evaluate_M
from ...store.repository import Table, dataset_repository
from ..deps import CommandHandler
from ..schemas import MfunSummary

__all__ = ["register", "run", "parse_lambda_grid"]

logger = logging.getLogger(__name__)

POLE_MARGIN = 1e-4


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("mfun", help="tabulate the Weyl function M(lambda) as CSV")
    p.add_argument("source", help="potential JSON or spectral dataset JSON")
    p.add_argument("--lambda-grid", required=True, help="'start:stop:count' or a comma separated list")
    p.add_argument("--mode", choices=["direct", "series", "compare"], default="direct")
    p.add_argument("--n-max", type=int, default=None, help="shells summed in series mode")
    p.set_defaults(handler=run)


def parse_lambda_grid(spec: str) -> NDArray[np.float64]:
    try:
        if ":" in spec:
            start, stop, count = spec.split(":")
            return np.linspace(float(start), float(stop), int(count))
        return np.array([float(x) for x in spec.split(",") if x.strip()])
    except ValueError as e:
        raise ValueError(f"bad --lambda-grid {spec!r}: {e}") from e


def _load_source(path: str, settings: SvspecSettings) -> tuple[Optional[MatrixPotential], Optional[SpectralDataset]]:
    """A dataset JSON, or failing that a potential JSON."""
    try:
        ds = SpectralDataset.from_file_model(dataset_repository().get(path))
    except ParseError as not_dataset:
        try:
            return load_potential(path, settings.potential), None
        except ParseError as e:
            raise ParseError(f"{path} is neither a spectral dataset nor a potential: {e}") from not_dataset
    return ds.potential, ds


def _columns(dim: int) -> list[str]:
    return [f"M{i}{j}_{part}" for i in range(dim) for j in range(dim) for part in ("re", "im")]


def _flatten(M: NDArray[np.complex128]) -> list[float]:
    return [v for z in M.ravel() for v in (float(z.real), float(z.imag))]


def run(args: argparse.Namespace) -> int:
    out = args.out or "mfun.csv"
    with CommandHandler.get_uow() as uow:

        def _call() -> None:
            CommandHandler.require_format(args, "csv")
            settings = CommandHandler.get_settings(args)
            if args.n_max is not None:
                settings.series.n_max = args.n_max
            V, ds = _load_source(args.source, settings)
            lams = parse_lambda_grid(args.lambda_grid)
            if args.mode in ("series", "compare") and ds is None:
                raise ValueError(f"--mode {args.mode} needs a spectral dataset")
            if args.mode in ("direct", "compare") and V is None:
                raise ParseError("dataset has no embedded potential for direct evaluation")

            dim = V.dim if V is not None else ds.dim  # type: ignore[union-attr]
            poles = np.array([r.lam for r in ds.records]) if ds is not None else np.zeros(0)
            ode = MatrixOde(V, settings.ode) if V is not None else None
            series = WeylSeries(ds, settings.series) if ds is not None and args.mode != "direct" else None

            names = _columns(dim)
            rows: dict[str, list[float]] = {"lambda": [], **{c: [] for c in names}, "flag": []}
            if args.mode == "compare":
                rows["gap"] = []
            flagged = 0
            max_gap = 0.0
            for lam in lams:
                near = poles.size > 0 and float(np.min(np.abs(poles - lam))) < POLE_MARGIN
                M: Optional[NDArray[np.complex128]] = None
                gap = float("nan")
                if not near:
                    try:
                        if args.mode == "series":
                            M = series.evaluate(lam).M  # type: ignore[union-attr]
                        else:
                            M = evaluate_M(V, lam, settings, ode).M  # type: ignore[arg-type]
                            if args.mode == "compare":
                                gap = float(np.max(np.abs(M - series.evaluate(lam).M)))  # type: ignore[union-attr]
                                max_gap = max(max_gap, gap)
                    except NearPole as e:
                        logger.warning("lambda=%g flagged: %s", lam, e)
                        M = None
                else:
                    logger.warning("lambda=%g within %g of an eigenvalue; row flagged", lam, POLE_MARGIN)
                values = _flatten(M) if M is not None else [float("nan")] * len(names)
                flagged += M is None
                rows["lambda"].append(float(lam))
                for c, v in zip(names, values):
                    rows[c].append(v)
                rows["flag"].append(float(M is None))
                if args.mode == "compare":
                    rows["gap"].append(gap)

            uow.tables.add(out, Table(rows))
            CommandHandler.emit_report(uow, MfunSummary(
                seed=settings.seed, passed=True, mode=args.mode, points=int(lams.size), flagged=flagged,
                max_gap=max_gap if args.mode == "compare" else None, output=out,
            ), None)

        return CommandHandler.run_in_transaction(uow, _call)
