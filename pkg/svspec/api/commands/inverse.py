# svspec/api/commands/inverse.py

from __future__ import annotations

import argparse
import logging
from typing import Optional, Union

import numpy as np

from ...config import SvspecSettings
from ...service.exceptions import ParseError
from ...service.inversekit import (
    ReferenceFrame,
    UnperturbedSpectrum,
    biortho_identity_check,
    condition_C_finite,
    forbidden_subspace,
    frechet_check,
    gradient_kernels,
    make_reference,
    modified_shell,
    phi1_coordinates,
    riesz_gram_diagnostic,
)
from ...service.matode import MatrixOde
from ...service.potential import MatrixPotential, load_potential
from ...service.spectraldata import SpectralDataset
from ...store.models import matrix_to_pairs, pairs_to_matrix
from ...store.repository import Table, condition_c_repository, dataset_repository, frame_repository
from ..deps import CommandHandler
from ..schemas import (
    BiorthoReport,
    BiorthoRow,
    ConditionCResponse,
    ForbiddenReport,
    FrechetReport,
    FrechetRow,
    RieszReport,
    ShellEntry,
    TildeEntry,
    TildesReport,
)

__all__ = ["register", "run", "parse_label", "load_frame"]

logger = logging.getLogger(__name__)

TASKS = ["tildes", "frechet-check", "biortho", "forbidden", "condC", "riesz", "kernels"]
BIORTHO_TOL = 1e-7
ANGLE_TOL = 1e-6


def register(sub: argparse._SubParsersAction) -> None:
    p = sub.add_parser("inverse", help="inverse-problem diagnostics around a diagonal reference potential")
    p.add_argument("--task", choices=TASKS, required=True)
    p.add_argument("--frame", help="reference frame JSON (scalar channel potentials)")
    p.add_argument("--potential", help="potential V near the reference (tildes; default the reference itself)")
    p.add_argument("--perturbation", help="mean-zero direction W (frechet-check; default seeded random directions)")
    p.add_argument("--dataset", help="spectral dataset JSON (forbidden)")
    p.add_argument("--condc", help="exceptional-set JSON (condC)")
    p.add_argument("--beta", type=int, default=1, help="record label for the forbidden subspace")
    p.add_argument("--alpha", default="1", help="label for kernels: 'alpha' or 'n,j'")
    p.add_argument("--j", type=int, default=0)
    p.add_argument("--k", type=int, default=0)
    p.add_argument("--shells", type=int, default=2, help="number of shells examined from n_diamond on")
    p.add_argument("--directions", type=int, default=20)
    p.add_argument("--eps", type=float, nargs="+", default=[1e-5])
    p.add_argument("--max-alpha", type=int, default=8)
    p.set_defaults(handler=run)


def parse_label(text: str) -> Union[int, tuple[int, int]]:
    parts = [p.strip() for p in text.split(",")]
    try:
        if len(parts) == 1:
            return int(parts[0])
        if len(parts) == 2:
            return int(parts[0]), int(parts[1])
    except ValueError:
        pass
    raise ValueError(f"label {text!r} must be 'alpha' or 'n,j'")


def load_frame(path: Optional[str], settings: SvspecSettings) -> ReferenceFrame:
    if not path:
        raise ValueError("this task needs --frame")
    model = frame_repository().get(path)
    channels = [MatrixPotential.from_file_model(c, settings.potential) for c in model.channels]
    return make_reference(channels, model.lambda_max, settings)


def _shell_list(frame: ReferenceFrame, count: int) -> list[int]:
    return frame.shells()[:count]


# -------- Tasks --------

def _tildes(args: argparse.Namespace, settings: SvspecSettings) -> TildesReport:
    frame = load_frame(args.frame, settings)
    V = load_potential(args.potential, settings.potential) if args.potential else frame.V_diamond
    if V.dim != frame.dim:
        raise ValueError(f"potential has N={V.dim}, frame has N={frame.dim}")
    ode = MatrixOde(V, settings.ode)
    shells = _shell_list(frame, args.shells)
    alphas = list(range(1, frame.alpha_diamond + 1))
    alphas += [frame.shell_alpha(n, j) for n in shells for j in range(frame.dim)]
    entries: list[TildeEntry] = []
    B_tilde: dict[int, np.ndarray] = {}
    for a in alphas:
        e = frame.eigen(a)
        data = phi1_coordinates(frame, V, a, ode)
        p, q = frame.projectors(a)
        rebuilt = (p.T + q.T @ data.E) @ data.C @ (p + data.E.conj().T @ q)
        B_tilde[a] = data.B_tilde
        entries.append(TildeEntry(
            alpha=a, lam=e.lam, channels=list(e.channels),
            A_tilde=matrix_to_pairs(data.A_tilde), B_tilde=matrix_to_pairs(data.B_tilde),
            C=matrix_to_pairs(data.C), E=matrix_to_pairs(data.E) if data.E.size else [],
            A_norm=float(np.max(np.abs(data.A_tilde))),
            factor_residual=float(np.max(np.abs(rebuilt - data.B_tilde))) / max(1.0, float(np.max(np.abs(data.B_tilde)))),
        ))
    shell_rows: list[ShellEntry] = []
    for n in shells:
        sd = modified_shell(frame, V, n, ode)
        eye = np.eye(frame.dim)
        Bsum = sum(B_tilde[frame.shell_alpha(n, j)] for j in range(frame.dim))
        shell_rows.append(ShellEntry(
            n=n, a=sd.a.tolist(), c=sd.c.tolist(),
            U_unitarity=float(np.max(np.abs(sd.U.conj().T @ sd.U - eye))),
            phi2_log_norm=float(np.linalg.norm(sd.phi2[0], 2)),
            phi2_s_norm=float(np.linalg.norm(sd.phi2[1], 2)),
            Z_vs_B=float(np.max(np.abs(sd.Y @ sd.Y.conj().T - Bsum / (2.0 * np.pi**2 * n**2)))),
        ))
    passed = all(e.factor_residual <= 1e-9 for e in entries) and all(s.U_unitarity <= 1e-10 for s in shell_rows)
    return TildesReport(
        seed=settings.seed, passed=passed, entries=entries, shells=shell_rows,
        max_A_norm=max((e.A_norm for e in entries), default=0.0),
    )


def _frechet(args: argparse.Namespace, settings: SvspecSettings) -> FrechetReport:
    frame = load_frame(args.frame, settings)
    rng = np.random.default_rng(settings.seed)
    if args.perturbation:
        directions = [load_potential(args.perturbation, settings.potential)]
    else:
        directions = [MatrixPotential.random_trig(rng, frame.dim, harmonics=3) for _ in range(args.directions)]
    alphas = list(range(1, frame.alpha_diamond + 1))
    shells = _shell_list(frame, args.shells)
    rows: list[FrechetRow] = []
    good = 0
    for d, W in enumerate(directions):
        ok = True
        for eps in args.eps:
            tol = max(1e-4, 50.0 * eps)
            for r in frechet_check(frame, W, eps, alphas, shells):
                rows.append(FrechetRow(quantity=r.quantity, label=r.label, eps=eps, direction=d,
                                       analytic=r.analytic, finite_difference=r.finite_difference,
                                       rel_error=r.rel_error))
                ok = ok and r.rel_error <= tol
        good += ok
    logger.info("frechet check: %d/%d directions within tolerance", good, len(directions))
    return FrechetReport(
        seed=settings.seed, passed=good == len(directions), directions=len(directions),
        within_tolerance=good, tolerance=max(1e-4, 50.0 * min(args.eps)), rows=rows,
    )


def _biortho(args: argparse.Namespace, settings: SvspecSettings) -> BiorthoReport:
    frame = load_frame(args.frame, settings)
    top = min(args.max_alpha, len(frame.eigs))
    rows: list[BiorthoRow] = []
    pairs = [(j, k) for j in range(frame.dim) for k in range(j, frame.dim)]
    for a in range(1, top + 1):
        for b in range(1, top + 1):
            for j, k in pairs:
                if a != b:
                    rows.append(BiorthoRow(alpha=a, beta=b, j=j, k=k,
                                           residual=biortho_identity_check(frame, a, b, j, k)))
                    continue
                limits = ["coincident"]
                inside = frame.index_set(a)
                if j in inside and k in inside:
                    limits += ["dot_chi", "dot_phi"]
                for lim in limits:
                    rows.append(BiorthoRow(alpha=a, beta=b, j=j, k=k, limit=lim,
                                           residual=biortho_identity_check(frame, a, b, j, k, limit=lim)))  # type: ignore[arg-type]
    worst = max((r.residual for r in rows), default=0.0)
    return BiorthoReport(seed=settings.seed, passed=worst < BIORTHO_TOL, tolerance=BIORTHO_TOL,
                         max_residual=worst, rows=rows)


def _forbidden(args: argparse.Namespace, settings: SvspecSettings) -> ForbiddenReport:
    if not args.dataset:
        raise ValueError("task forbidden needs --dataset")
    ds = SpectralDataset.from_file_model(dataset_repository().get(args.dataset))
    if ds.potential is None:
        raise ParseError("dataset has no embedded potential")
    fs = forbidden_subspace(ds.potential, ds, args.beta, settings)
    basis = matrix_to_pairs(fs.basis) if fs.basis.size else []
    return ForbiddenReport(seed=settings.seed, passed=fs.angle <= ANGLE_TOL, beta=args.beta, basis=basis, angle=fs.angle)


def _condc(args: argparse.Namespace, settings: SvspecSettings) -> ConditionCResponse:
    if not args.condc:
        raise ValueError("task condC needs --condc")
    model = condition_c_repository().get(args.condc)
    if args.frame:
        spectrum: Union[ReferenceFrame, UnperturbedSpectrum] = load_frame(args.frame, settings)
    else:
        spectrum = UnperturbedSpectrum.free(model.N, model.v0, model.n_known)
    exceptional = [(ex.alpha, pairs_to_matrix(ex.projector)) for ex in model.exceptional]
    rep = condition_C_finite(spectrum, exceptional, settings)
    return ConditionCResponse(
        seed=settings.seed, passed=rep.holds, m=rep.m, T=matrix_to_pairs(rep.T),
        verdict="holds" if rep.holds else "fails", min_eig=rep.min_eig, quadratic_form_gap=rep.quadratic_form_gap,
    )


def _riesz(args: argparse.Namespace, settings: SvspecSettings) -> RieszReport:
    frame = load_frame(args.frame, settings)
    shells = _shell_list(frame, args.shells)
    diag = riesz_gram_diagnostic(frame, args.j, args.k, n_max=shells[-1] if shells else None)
    return RieszReport(seed=settings.seed, passed=diag.min_eig > 0.0, j=diag.j, k=diag.k, size=diag.size,
                       min_eig=diag.min_eig, max_eig=diag.max_eig, shell_distance=diag.shell_distance)


def _kernels(args: argparse.Namespace, settings: SvspecSettings) -> Table:
    frame = load_frame(args.frame, settings)
    kern = gradient_kernels(frame, parse_label(args.alpha), args.j, args.k)
    cols = {"t": kern.t, "u": kern.u}
    if kern.u_tilde is not None:
        cols["u_tilde"] = kern.u_tilde
    return Table(cols)


def run(args: argparse.Namespace) -> int:
    with CommandHandler.get_uow() as uow:

        def _call() -> None:
            settings = CommandHandler.get_settings(args)
            CommandHandler.require_format(args, "csv" if args.task == "kernels" else "json")
            if args.task == "kernels":
                uow.tables.add(args.out or "kernels.csv", _kernels(args, settings))
                return
            task = {
                "tildes": _tildes, "frechet-check": _frechet, "biortho": _biortho,
                "forbidden": _forbidden, "condC": _condc, "riesz": _riesz,
            }[args.task]
            CommandHandler.emit_report(uow, task(args, settings), args.out)

        return CommandHandler.run_in_transaction(uow, _call)
