# svspec/service/spectraldata.py
"""
谱数据: eigen records (λ, P, g, B), the double-index map (n, j) and the
asymptotic checks on the tails of the data.
"""
from __future__ import annotations

import itertools
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Iterable, Optional, Sequence

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import linear_sum_assignment

from ..config import SvspecSettings
from ..store.models import DatasetFile, RecordModel, TailsModel, matrix_to_pairs, pairs_to_matrix
from .exceptions import GramNotPositive, IndexingAmbiguous, InsufficientShells, NearPole, ToleranceNotMet, ZeroOnContour
from .matode import MatrixOde
from .potential import HermitianMatrix, MatrixPotential, diagonalize_mean
from .spectrum import CountingContour, EigenLocation, SpectrumLocator, SpectrumScan, count_zeros

__all__: list[str] = [
    "EigenRecord",
    "SpectralDataset",
    "TailDiagnostics",
    "EquivalenceReport",
    "BnReport",
    "ShellPrediction",
    "ShellAsymptoticsReport",
    "ConditionAReport",
    "fit_power_law",
    "cauchy_tail_ratio",
    "build_record",
    "residue_via_contour",
    "assemble_dataset",
    "check_condition_A",
    "check_condition_B",
    "projector_equivalence",
    "check_Bn_asymptote",
    "predict_shell",
    "check_shell_asymptotics",
    "residue_limit",
]

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]

# 低于此值的尾部序列视为数值零
NULL_TOL = 1e-6
MIN_SHELLS = 20
PLAIN_SLOPE = -0.7


def fit_power_law(n: Sequence[float], values: Sequence[float], floor: float = 1e-14) -> Optional[float]:
    """Least-squares slope of log|values| against log n; None if fewer than 3 usable points."""
    x = np.asarray(n, float)
    y = np.abs(np.asarray(values, float))
    keep = y > floor
    if keep.sum() < 3:
        return None
    slope, _ = np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)
    return float(slope)


def cauchy_tail_ratio(values: Sequence[float]) -> float:
    """Share of Σ x² contributed by the last half of the terms."""
    sq = np.asarray(values, float) ** 2
    total = float(sq.sum())
    if total == 0.0:
        return 0.0
    return float(sq[len(sq) // 2:].sum()) / total


# -------- Types --------

@dataclass(frozen=True, slots=True, eq=False)
class EigenRecord:
    lam: float
    k: int
    h: Array
    P: Array
    g: Array
    B: Array
    index: Optional[tuple[int, int]] = None

    def to_model(self) -> RecordModel:
        return RecordModel(
            lam=self.lam, k=self.k, h=matrix_to_pairs(self.h), P=matrix_to_pairs(self.P),
            g=matrix_to_pairs(self.g), B=matrix_to_pairs(self.B), index=self.index,
        )

    @classmethod
    def from_model(cls, m: RecordModel) -> "EigenRecord":
        return cls(m.lam, m.k, pairs_to_matrix(m.h), pairs_to_matrix(m.P), pairs_to_matrix(m.g),
                   pairs_to_matrix(m.B), m.index)


@dataclass(frozen=True, slots=True, eq=False)
class TailDiagnostics:
    n: NDArray[np.int64]
    a: NDArray[np.float64]
    b: NDArray[np.float64]
    c: NDArray[np.float64]
    d: NDArray[np.float64]
    partial_norms: dict[str, float]
    slopes: dict[str, Optional[float]]
    cauchy: dict[str, float]
    verdicts: dict[str, bool]
    passed: bool

    def to_model(self) -> TailsModel:
        return TailsModel(
            n=[int(v) for v in self.n], a=self.a.tolist(), b=self.b.tolist(), c=self.c.tolist(),
            d=self.d.tolist(), partial_norms=self.partial_norms,
            slopes={k: v for k, v in self.slopes.items() if v is not None},
            cauchy=self.cauchy, verdicts=self.verdicts, passed=self.passed,
        )


@dataclass(eq=False)
class SpectralDataset:
    records: list[EigenRecord]
    v0: NDArray[np.float64]
    n_diamond: int
    alpha_diamond: int
    index_map: dict[tuple[int, int], EigenRecord]
    potential: Optional[MatrixPotential] = None
    unitary: Optional[Array] = None
    tails: Optional[TailDiagnostics] = None

    @property
    def dim(self) -> int:
        return int(self.v0.size)

    def shells(self) -> list[int]:
        """Shell numbers n for which every (n, j) is indexed."""
        ns = sorted({n for n, _ in self.index_map})
        return [n for n in ns if all((n, j) in self.index_map for j in range(self.dim))]

    def shell(self, n: int) -> list[EigenRecord]:
        return [self.index_map[(n, j)] for j in range(self.dim)]

    def low_records(self) -> list[EigenRecord]:
        return self.records[: self.alpha_diamond]

    # -------- Serialization --------

    def to_file_model(self) -> DatasetFile:
        return DatasetFile(
            N=self.dim, v0=[float(v) for v in self.v0], n_diamond=self.n_diamond,
            alpha_diamond=self.alpha_diamond, records=[r.to_model() for r in self.records],
            tails=None if self.tails is None else self.tails.to_model(),
            unitary=None if self.unitary is None else matrix_to_pairs(self.unitary),
            potential=None if self.potential is None else self.potential.to_file_model(),
        )

    @classmethod
    def from_file_model(cls, model: DatasetFile) -> "SpectralDataset":
        records = [EigenRecord.from_model(r) for r in model.records]
        index_map = {r.index: r for r in records if r.index is not None}
        pot = None if model.potential is None else MatrixPotential.from_file_model(model.potential)
        unitary = None if model.unitary is None else pairs_to_matrix(model.unitary)
        return cls(records, np.asarray(model.v0, float), model.n_diamond, model.alpha_diamond,
                   index_map, pot, unitary, None)


@dataclass(frozen=True, slots=True)
class EquivalenceReport:
    n: list[int]
    projector_sum_deviation: list[float]
    max_overlap: list[float]
    residue_deviation: list[float]
    gram_deviation: list[float]
    overlap_ratio_bounded: bool
    residue_ratio_bounded: bool
    passed: bool


@dataclass(frozen=True, slots=True)
class BnReport:
    n: list[int]
    remainder: list[float]
    exponent: Optional[float]
    passed: bool


@dataclass(frozen=True, slots=True, eq=False)
class ShellPrediction:
    n: int
    lam: NDArray[np.float64]
    h: Array


@dataclass(frozen=True, slots=True)
class ShellAsymptoticsReport:
    n: list[int]
    lambda_error: list[float]
    basis_error: list[float]
    slopes: dict[str, Optional[float]]
    passed: bool


@dataclass(frozen=True, slots=True)
class ConditionAReport:
    n_diamond: int
    alpha_diamond: int
    low_multiplicity: int
    simple_tail: bool
    counting_ok: bool
    shells: int
    passed: bool


# -------- Records --------

def build_record(
    V: MatrixPotential,
    loc: EigenLocation,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
) -> EigenRecord:
    settings = settings or SvspecSettings()
    ode = ode or MatrixOde(V, settings.ode)
    gram = ode.phi_endpoint([loc.lam], gram=True).gram
    assert gram is not None
    S = gram[0]
    h = loc.basis
    g = h.conj().T @ S @ h
    g = 0.5 * (g + g.conj().T)
    w = np.linalg.eigvalsh(g)
    if float(w.min()) <= 0.0:
        raise GramNotPositive(f"lambda={loc.lam:.12g}: restricted Gram has eigenvalue {w.min():.3e}")
    B = h @ np.linalg.solve(g, h.conj().T)
    P = h @ h.conj().T
    return EigenRecord(loc.lam, loc.multiplicity, h, P, g, 0.5 * (B + B.conj().T))


def residue_via_contour(
    V: MatrixPotential,
    center: complex,
    radius: float,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
    *,
    symmetrize: bool = True,
) -> HermitianMatrix:
    """-(1/2πi) ∮ M(λ) dλ over |λ - center| = radius by the trapezoid rule.

    The annulus radius·(1 ± annulus) must hold no zero of det χ(0, ·); the
    two counting disks are compared before any node is summed.
    """
    settings = settings or SvspecSettings()
    cfg = settings.residue
    ode = ode or MatrixOde(V, settings.ode)
    inner = count_zeros(V, CountingContour.disk(center, radius * (1.0 - cfg.annulus)), settings, ode)
    outer = count_zeros(V, CountingContour.disk(center, radius * (1.0 + cfg.annulus)), settings, ode)
    if inner != outer:
        raise ZeroOnContour(
            f"residue contour |lambda-{center}|={radius}: {outer - inner} eigenvalue(s) within the annulus"
        )

    def partial(theta: NDArray[np.float64]) -> Array:
        z = np.exp(1j * theta)
        data = ode.chi_endpoint(center + radius * z)
        chi, dchi = data.values[:, 0], data.derivs[:, 0]
        cond = np.linalg.cond(chi)
        if np.any(cond > 1e12):
            raise ZeroOnContour(f"residue contour |lambda-{center}|={radius} passes an eigenvalue (cond {cond.max():.2e})")
        M = np.matmul(dchi, np.linalg.inv(chi))
        return np.einsum("k,kij->ij", z, M)

    nodes = cfg.start_nodes
    acc = partial(2.0 * np.pi * np.arange(nodes) / nodes)
    current = -radius / nodes * acc
    change = np.inf
    while nodes < cfg.max_nodes:
        acc = acc + partial(2.0 * np.pi * (np.arange(nodes) + 0.5) / nodes)
        nodes *= 2
        refined = -radius / nodes * acc
        change = float(np.max(np.abs(refined - current)))
        current = refined
        if change <= cfg.tol * max(1.0, float(np.max(np.abs(refined)))):
            break
    else:
        raise ToleranceNotMet(f"residue at {center} did not settle within {nodes} nodes (last change {change:.3e})")
    if V.hermitian and symmetrize:
        current = 0.5 * (current + current.conj().T)
    return HermitianMatrix(current, hermitian=V.hermitian)


# -------- Assembly --------

def _detect_diamond(scan: SpectrumScan, dim: int) -> int:
    windows = scan.windows
    by_window: dict[int, list[EigenLocation]] = {}
    for loc in scan.locations:
        by_window.setdefault(loc.window, []).append(loc)
    good = [w.count == dim and all(l.multiplicity == 1 for l in by_window.get(w.index, [])) for w in windows]
    below = 0
    for i, w in enumerate(windows):
        if all(good[i:]) and below == dim * i:
            return i + 1
        below += w.count
    return len(windows) + 1


def _assign_shell(records: list[EigenRecord], n: int, v0: NDArray[np.float64], tie_tol: float) -> list[int]:
    lams = np.array([r.lam for r in records])
    targets = np.pi**2 * n**2 + v0
    cost = np.abs(lams[:, None] - targets[None, :])
    rows, cols = linear_sum_assignment(cost)
    best = float(cost[rows, cols].sum())
    if len(records) <= 7:
        totals = sorted(float(sum(cost[i, p[i]] for i in range(len(records))))
                        for p in itertools.permutations(range(len(records))))
        if len(totals) > 1 and totals[1] - best < tie_tol:
            raise IndexingAmbiguous(f"shell n={n}: two assignments within {tie_tol:g} (costs {best:.3e}, {totals[1]:.3e})")
    assignment = [0] * len(records)
    for r, c in zip(rows, cols):
        assignment[int(r)] = int(c)
    return assignment


def _normalize_phase(h: Array, j: int) -> Array:
    z = h[j, 0]
    if abs(z) < 1e-14:
        return h
    return h * (np.conj(z) / abs(z))


def assemble_dataset(
    V: MatrixPotential,
    lambda_max: float,
    settings: Optional[SvspecSettings] = None,
) -> SpectralDataset:
    """Locate, record and double-index the spectrum of V up to ``lambda_max``.

    The dataset lives in the frame where the mean of V is diagonal; the
    conjugating unitary is kept on the dataset.
    """
    settings = settings or SvspecSettings()
    diag = diagonalize_mean(V, settings.potential)
    W = diag.potential
    locator = SpectrumLocator(W, settings)
    scan = locator.scan(lambda_max)

    def make(loc: EigenLocation) -> EigenRecord:
        return build_record(W, loc, settings, locator.ode)

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            records = list(pool.map(make, scan.locations))
    else:
        records = [make(loc) for loc in scan.locations]

    n_diamond = _detect_diamond(scan, W.dim)
    alpha_diamond = sum(1 for loc in scan.locations if loc.window < n_diamond - 1)
    index_map: dict[tuple[int, int], EigenRecord] = {}
    positions = {id(r): i for i, r in enumerate(records)}
    for w in scan.windows[n_diamond - 1:]:
        n = w.index + 1
        shell = [r for r, loc in zip(records, scan.locations) if loc.window == w.index]
        for r, j in zip(shell, _assign_shell(shell, n, diag.v0, settings.residue.tie_tol)):
            indexed = replace(r, h=_normalize_phase(r.h, j), index=(n, j))
            records[positions[id(r)]] = indexed
            index_map[(n, j)] = indexed
    logger.info("dataset: %d records, n_diamond=%d, alpha_diamond=%d", len(records), n_diamond, alpha_diamond)

    ds = SpectralDataset(records, diag.v0, n_diamond, alpha_diamond, index_map, W, diag.unitary)
    if len(ds.shells()) >= MIN_SHELLS:
        ds.tails = check_condition_B(ds)
    else:
        logger.info("only %d double-indexed shells; tail diagnostics skipped", len(ds.shells()))
    return ds


# -------- Checks --------

def check_condition_A(ds: SpectralDataset) -> ConditionAReport:
    """Asymptotic simplicity and the count Σ_{α≤α⋄} k_α = N(n⋄ - 1)."""
    low = sum(r.k for r in ds.low_records())
    simple = all(r.k == 1 for r in ds.records[ds.alpha_diamond:])
    counting = low == ds.dim * (ds.n_diamond - 1)
    shells = len(ds.shells())
    return ConditionAReport(ds.n_diamond, ds.alpha_diamond, low, simple, counting, shells,
                            simple and counting and shells > 0)


def check_condition_B(ds: SpectralDataset) -> TailDiagnostics:
    shells = ds.shells()
    if len(shells) < MIN_SHELLS:
        raise InsufficientShells(f"{len(shells)} double-indexed shells, need {MIN_SHELLS}")
    N = ds.dim
    eye = np.eye(N)
    a = np.zeros((len(shells), N))
    b = np.zeros((len(shells), N))
    c = np.zeros((len(shells), N))
    d = np.zeros(len(shells))
    for i, n in enumerate(shells):
        recs = ds.shell(n)
        for j, r in enumerate(recs):
            a[i, j] = r.lam - np.pi**2 * n**2 - ds.v0[j]
            b[i, j] = np.pi * n * (2.0 * np.pi**2 * n**2 * float(np.real(r.g[0, 0])) - 1.0)
            c[i, j] = np.linalg.norm(r.P - np.outer(eye[j], eye[j]), 2)
        d[i] = np.pi * n * np.linalg.norm(sum(r.P for r in recs) - eye, 2)

    seqs = {"a": np.abs(a).max(axis=1), "b": np.abs(b).max(axis=1), "c": c.max(axis=1), "d": d}
    ns = np.asarray(shells, float)
    partial = {k: float(np.sqrt(np.sum(v**2))) for k, v in seqs.items()}
    slopes = {k: fit_power_law(ns, v, floor=1e-9) for k, v in seqs.items()}
    cauchy = {k: cauchy_tail_ratio(v) for k, v in seqs.items()}
    verdicts: dict[str, bool] = {}
    for k, v in seqs.items():
        null = float(v.max()) <= NULL_TOL
        decays = slopes[k] is not None and slopes[k] <= PLAIN_SLOPE  # type: ignore[operator]
        if k in ("a", "c"):
            verdicts[k] = null or decays
        else:
            verdicts[k] = null or decays or cauchy[k] <= 0.05
    passed = all(verdicts.values())
    logger.info("condition (B) over %d shells: %s (slopes %s)", len(shells), "PASS" if passed else "FAIL", slopes)
    return TailDiagnostics(np.asarray(shells), a, b, c, d, partial, slopes, cauchy, verdicts, passed)


def projector_equivalence(ds: SpectralDataset, bound: float = 10.0) -> EquivalenceReport:
    shells = ds.shells()
    N = ds.dim
    eye = np.eye(N)
    sums, overlaps, res_dev, gram_dev = [], [], [], []
    for n in shells:
        recs = ds.shell(n)
        h = np.hstack([r.h for r in recs])
        G = h.conj().T @ h
        off = G - np.diag(np.diag(G))
        sums.append(float(np.linalg.norm(h @ h.conj().T - eye, 2)))
        overlaps.append(float(np.max(np.abs(off))) if N > 1 else 0.0)
        H = h / np.sqrt(np.array([float(np.real(r.g[0, 0])) for r in recs]))[None, :]
        Bn = sum(r.B for r in recs)
        scale = 2.0 * np.pi**2 * n**2
        res_dev.append(float(np.linalg.norm(Bn - scale * eye, 2)))
        gram_dev.append(float(np.linalg.norm(H.conj().T @ H - scale * eye, 2)))

    def bounded(x: list[float], y: list[float], floor: Iterable[float]) -> bool:
        for u, v, f in zip(x, y, floor):
            if u <= f and v <= f:
                continue
            if min(u, v) <= 0.0 or not 1.0 / bound <= u / v <= bound:
                return False
        return True

    first = bounded(sums, overlaps, [1e-9] * len(shells))
    second = bounded(res_dev, gram_dev, [1e-8 * 2.0 * np.pi**2 * n**2 for n in shells])
    return EquivalenceReport(shells, sums, overlaps, res_dev, gram_dev, first, second, first and second)


def check_Bn_asymptote(V: MatrixPotential, ds: SpectralDataset, n_list: Sequence[int]) -> BnReport:
    """r_n = ‖B_n/(2π²n²) - I + (1/πn) ∫(1-t)V sin 2πnt dt‖ and its decay exponent."""
    available = set(ds.shells())
    missing = [n for n in n_list if n not in available]
    if missing:
        raise InsufficientShells(f"shells {missing} are not double-indexed in the dataset")
    eye = np.eye(ds.dim)
    rem = []
    for n in n_list:
        Bn = sum(r.B for r in ds.shell(n))
        ws = np.asarray(V.fourier_coefficient("weighted_sin", n))
        rem.append(float(np.linalg.norm(Bn / (2.0 * np.pi**2 * n**2) - eye + ws / (np.pi * n), 2)))
    exponent = fit_power_law(n_list, rem, floor=1e-13)
    passed = exponent is None or exponent <= -1.8
    return BnReport(list(n_list), rem, exponent, passed)


def predict_shell(V: MatrixPotential, n: int, v0: Optional[NDArray[np.float64]] = None) -> ShellPrediction:
    """First-order shell predictions for a potential with diagonal mean."""
    v = np.real(np.diag(V.mean_matrix())) if v0 is None else np.asarray(v0, float)
    C = np.asarray(V.fourier_coefficient("cos", n))
    N = V.dim
    lam = np.pi**2 * n**2 + v - np.real(np.diag(C))
    h = np.eye(N, dtype=complex)
    for j in range(N):
        for k in range(N):
            if k != j:
                h[k, j] = C[k, j] / (v[k] - v[j])
    return ShellPrediction(n, lam, h)


def check_shell_asymptotics(ds: SpectralDataset, V: Optional[MatrixPotential] = None) -> ShellAsymptoticsReport:
    V = V or ds.potential
    if V is None:
        raise ValueError("dataset carries no potential; pass V explicitly")
    shells = ds.shells()
    lam_err, h_err = [], []
    for n in shells:
        pred = predict_shell(V, n, ds.v0)
        recs = ds.shell(n)
        lam_err.append(max(abs(r.lam - pred.lam[j]) for j, r in enumerate(recs)))
        errs = []
        for j, r in enumerate(recs):
            p = pred.h[:, j] / np.linalg.norm(pred.h[:, j])
            errs.append(float(np.linalg.norm(r.h[:, 0] - p)))
        h_err.append(max(errs))
    ns = np.asarray(shells, float)
    slopes = {"lambda": fit_power_law(ns, lam_err, 1e-9), "h": fit_power_law(ns, h_err, 1e-9)}
    ok = all(s is None or s <= PLAIN_SLOPE for s in slopes.values())
    return ShellAsymptoticsReport(shells, lam_err, h_err, slopes, ok)


def residue_limit(V: MatrixPotential, lam: float, offsets: Sequence[float] = (1e-4, 5e-5), ode: Optional[MatrixOde] = None) -> Array:
    """-lim (λ - λ_α) M(λ) along the real axis, by Richardson extrapolation."""
    ode = ode or MatrixOde(V)
    vals = []
    for eps in offsets:
        data = ode.chi_endpoint([lam + eps])
        chi, dchi = data.values[0, 0], data.derivs[0, 0]
        if np.linalg.cond(chi) > 1e14:
            raise NearPole(f"offset {eps:g} too close to {lam:.12g}")
        vals.append(-eps * dchi @ np.linalg.inv(chi))
    e1, e2 = offsets[0], offsets[1]
    return (e1 * vals[1] - e2 * vals[0]) / (e1 - e2)

