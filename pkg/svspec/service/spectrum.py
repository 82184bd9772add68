# svspec/service/spectrum.py
"""
Dirichlet eigenvalues: argument-principle counting, root refinement and
multiplicities.

The real axis from -‖V‖-1 up to λ_max is tiled by disks whose diameters are
the windows between consecutive cut points π²(n+½)². Each disk is certified
by the winding number of det χ(0, ·); roots inside are then seeded by a real
scan of the smallest singular value and polished by Newton's method on
log det χ(0, λ).
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional

import numpy as np
from numpy.typing import NDArray
from scipy.linalg import eigvals, svd
from scipy.optimize import minimize_scalar

from ..config import SvspecSettings, SpectrumConfig
from .exceptions import CountMismatch, NonIntegerWinding, NotAnEigenvalue, ZeroOnContour
from .matode import MatrixOde
from .potential import MatrixPotential

__all__: list[str] = [
    "CountingContour",
    "EigenLocation",
    "SpectrumWindow",
    "SpectrumScan",
    "SpectrumLocator",
    "count_zeros",
    "locate_all",
    "multiplicity",
]

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]


@dataclass(frozen=True, slots=True)
class CountingContour:
    shape: Literal["disk", "rectangle"]
    center: complex = 0j
    radius: float = 1.0
    re_lo: float = 0.0
    re_hi: float = 0.0
    im_lo: float = 0.0
    im_hi: float = 0.0
    nodes: int = 64

    def __post_init__(self) -> None:
        if self.nodes < 64:
            raise ValueError("a counting contour needs at least 64 nodes")
        if self.shape == "disk" and self.radius <= 0.0:
            raise ValueError("disk radius must be positive")
        if self.shape == "rectangle" and (self.re_hi <= self.re_lo or self.im_hi <= self.im_lo):
            raise ValueError("degenerate rectangle")

    @classmethod
    def disk(cls, center: complex, radius: float, nodes: int = 64) -> "CountingContour":
        return cls("disk", center=complex(center), radius=float(radius), nodes=nodes)

    @classmethod
    def rectangle(cls, re_lo: float, re_hi: float, im_lo: float, im_hi: float, nodes: int = 64) -> "CountingContour":
        return cls("rectangle", re_lo=re_lo, re_hi=re_hi, im_lo=im_lo, im_hi=im_hi, nodes=nodes)

    def point(self, s: NDArray[np.float64]) -> NDArray[np.complex128]:
        """Positively oriented parametrisation, s ∈ [0, 1)."""
        if self.shape == "disk":
            return self.center + self.radius * np.exp(2j * np.pi * s)
        w, h = self.re_hi - self.re_lo, self.im_hi - self.im_lo
        d = (s % 1.0) * 2.0 * (w + h)
        corners = [complex(self.re_lo, self.im_lo), complex(self.re_hi, self.im_lo),
                   complex(self.re_hi, self.im_hi), complex(self.re_lo, self.im_hi)]
        out = np.empty(d.shape, complex)
        bottom, right, top = d < w, (d >= w) & (d < w + h), (d >= w + h) & (d < 2 * w + h)
        left = d >= 2 * w + h
        out[bottom] = corners[0] + d[bottom]
        out[right] = corners[1] + 1j * (d[right] - w)
        out[top] = corners[2] - (d[top] - w - h)
        out[left] = corners[3] - 1j * (d[left] - 2 * w - h)
        return out


@dataclass(frozen=True, slots=True, eq=False)
class EigenLocation:
    lam: float
    multiplicity: int
    certified_count: bool
    residual: float
    basis: Array
    window: int = -1


@dataclass(frozen=True, slots=True)
class SpectrumWindow:
    index: int
    lo: float
    hi: float
    count: int


@dataclass(frozen=True, slots=True, eq=False)
class SpectrumScan:
    locations: list[EigenLocation]
    windows: list[SpectrumWindow]
    norm: float = field(default=0.0)

    def eigenvalues(self) -> NDArray[np.float64]:
        return np.array([loc.lam for loc in self.locations])


def _det_chi0(ode: MatrixOde, lams: NDArray[np.complex128]) -> NDArray[np.complex128]:
    return np.linalg.det(ode.chi_endpoint(lams).values[:, 0])


def _winding(ode: MatrixOde, contour: CountingContour, cfg: SpectrumConfig) -> int:
    s = np.linspace(0.0, 1.0, contour.nodes, endpoint=False)
    d = _det_chi0(ode, contour.point(s))
    while True:
        scale = float(np.max(np.abs(d)))
        if scale == 0.0 or float(np.min(np.abs(d))) < cfg.det_floor * scale:
            raise ZeroOnContour(f"det chi(0) below floor on contour {contour}")
        ratio = np.roll(d, -1) / d
        inc = np.angle(ratio)
        bad = np.abs(inc) >= np.pi / 2
        if not bad.any():
            total = float(inc.sum()) / (2.0 * np.pi)
            w = int(round(total))
            if abs(total - w) > 1e-3:
                raise NonIntegerWinding(f"winding sum {total:.6f} on {contour}")
            return w
        if s.size >= cfg.max_contour_nodes:
            raise NonIntegerWinding(f"phase tracking did not resolve with {s.size} nodes on {contour}")
        nxt = np.roll(s, -1)
        nxt[-1] = 1.0
        mids = 0.5 * (s[bad] + nxt[bad])
        logger.debug("contour refinement: %d new nodes (total %d)", mids.size, s.size + mids.size)
        d_new = _det_chi0(ode, contour.point(mids))
        s = np.concatenate([s, mids])
        d = np.concatenate([d, d_new])
        order = np.argsort(s)
        s, d = s[order], d[order]


def count_zeros(
    V: MatrixPotential,
    contour: CountingContour,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
) -> int:
    """Number of zeros of det χ(0, ·) inside the contour, with multiplicity."""
    settings = settings or SvspecSettings()
    ode = ode or MatrixOde(V, settings.ode)
    return _winding(ode, contour, settings.spectrum)


def _kernel(phi1: Array, lam: float, cfg: SpectrumConfig) -> tuple[int, Array, float]:
    _, s, vh = svd(phi1)
    thr = cfg.sv_threshold * max(float(s[0]), 1.0 / max(1.0, np.sqrt(abs(lam))))
    k = int(np.sum(s < thr))
    basis = vh[phi1.shape[0] - k:].conj().T if k else np.zeros((phi1.shape[0], 0), complex)
    if k:
        basis, _ = np.linalg.qr(basis)
    return k, basis, float(s[-1])


def multiplicity(
    V: MatrixPotential,
    lam: float,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
) -> tuple[int, Array]:
    """Dimension and orthonormal basis of Ker φ(1, λ)."""
    settings = settings or SvspecSettings()
    ode = ode or MatrixOde(V, settings.ode)
    phi1 = ode.phi_endpoint([lam]).values[0, 0]
    k, basis, smallest = _kernel(phi1, lam, settings.spectrum)
    if k == 0:
        raise NotAnEigenvalue(f"lambda={lam:.12g}: smallest singular value {smallest:.3e} above threshold")
    return k, basis


class SpectrumLocator:
    """Certified eigenvalue search for one self-adjoint potential."""

    def __init__(self, V: MatrixPotential, settings: Optional[SvspecSettings] = None) -> None:
        self.V = V
        self.settings = settings or SvspecSettings()
        self.cfg = self.settings.spectrum
        self.ode = MatrixOde(V, self.settings.ode)
        self.norm = V.sup_norm()

    # -------- Windows --------

    def _sigma_scaled(self, lams: NDArray[np.float64]) -> NDArray[np.float64]:
        chi = self.ode.chi_endpoint(lams).values[:, 0]
        sv = np.linalg.svd(chi, compute_uv=False)
        return sv[:, -1] * np.maximum(1.0, np.sqrt(np.abs(lams)))

    def _cuts(self, lambda_max: float) -> list[float]:
        """Window boundaries: -|V|-1, then the half-integer points π²(n+½)².

        Each window is counted on the disk spanning it. This replaces the
        layout of disks of radius min(3|V|, gap/2) around π²n² merged into
        rectangles. Once π²n is well above |V| each window holds exactly N
        eigenvalues; lower windows may hold any number, certified either way.
        """
        lower = -self.norm - 1.0
        cuts = [lower]
        n = 1
        while cuts[-1] < lambda_max:
            cuts.append(np.pi**2 * (n + 0.5) ** 2)
            n += 1
        # 割点若贴近本征值则向右平移
        inner = np.array(cuts[1:])
        for attempt in range(8):
            sig = self._sigma_scaled(inner)
            near = sig < 1e-3
            if not near.any():
                break
            gaps = np.pi**2 * (2.0 * np.arange(1, inner.size + 1) + 1.0)
            inner = np.where(near, inner + 0.013 * (attempt + 1) * gaps, inner)
            logger.debug("nudged %d cut points", int(near.sum()))
        return [lower, *inner.tolist()]

    def _count_window(self, lo: float, hi: float) -> int:
        contour = CountingContour.disk(0.5 * (lo + hi), 0.5 * (hi - lo), self.cfg.contour_nodes)
        return _winding(self.ode, contour, self.cfg)

    # -------- Refinement --------

    def _newton(self, seeds: NDArray[np.float64], lo: float, hi: float, spacing: float) -> NDArray[np.float64]:
        lam = seeds.astype(float).copy()
        active = np.ones(lam.size, bool)
        stalled = np.zeros(lam.size, bool)
        previous = np.full(lam.size, np.inf)
        for it in range(self.cfg.newton_max_iter):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            data = self.ode.chi_endpoint(lam[idx], order=1)
            for pos, i in enumerate(idx):
                chi, chi_dot = data.values[pos, 0], data.values[pos, 1]
                try:
                    delta = eigvals(chi, -chi_dot)
                    delta = delta[np.isfinite(delta)]
                    nearest = delta[np.argmin(np.abs(delta))]
                    k = int(np.sum(np.abs(delta - nearest) <= 0.1 * abs(nearest) + 1e-300))
                    trace = np.trace(np.linalg.solve(chi, chi_dot))
                    step = float(np.real(-k / trace))
                except (np.linalg.LinAlgError, ValueError):
                    active[i] = False
                    continue
                if not np.isfinite(step) or abs(step) > spacing * 4:
                    stalled[i] = True
                    active[i] = False
                    continue
                lam[i] += step
                size = max(1.0, abs(lam[i]))
                # 步长不再下降即视为到达积分精度底限
                at_floor = abs(step) > 0.5 * previous[i] and abs(step) < 1e-8 * size
                previous[i] = abs(step)
                if abs(step) <= self.cfg.newton_tol * size or at_floor:
                    active[i] = False
                elif not lo < lam[i] < hi:
                    stalled[i] = True
                    active[i] = False
            logger.debug("newton iteration %d: %d active", it, int(active.sum()))
        stalled |= active
        for i in np.nonzero(stalled)[0]:
            logger.debug("newton stalled near %.10g; falling back to bounded minimisation", lam[i])
            a, b = max(lo, seeds[i] - spacing), min(hi, seeds[i] + spacing)
            res = minimize_scalar(lambda x: float(self._sigma_scaled(np.array([x]))[0]),
                                  bounds=(a, b), method="bounded", options={"xatol": 1e-12 * max(1.0, abs(b))})
            lam[i] = float(res.x)
        return lam

    def _roots_in_window(self, w: SpectrumWindow) -> list[EigenLocation]:
        if w.count == 0:
            return []
        density = self.cfg.scan_density
        for refinement in range(self.cfg.max_scan_refinements + 1):
            points = max(32, density * w.count + 8)
            grid = np.linspace(w.lo, w.hi, points + 2)[1:-1]
            spacing = float(grid[1] - grid[0])
            f = self._sigma_scaled(grid)
            left = np.concatenate([[np.inf], f[:-1]])
            right = np.concatenate([f[1:], [np.inf]])
            seeds = grid[(f <= left) & (f <= right)]
            roots = np.sort(self._newton(seeds, w.lo, w.hi, spacing))
            distinct: list[float] = []
            for r in roots:
                if w.lo < r < w.hi and (not distinct or abs(r - distinct[-1]) > 1e-8 * max(1.0, abs(r))):
                    distinct.append(float(r))
            found: list[EigenLocation] = []
            if distinct:
                phi = self.ode.phi_endpoint(np.array(distinct)).values[:, 0]
                for lam, p in zip(distinct, phi):
                    k, basis, resid = _kernel(p, lam, self.cfg)
                    if k:
                        found.append(EigenLocation(lam, k, True, resid, basis, w.index))
            total = sum(loc.multiplicity for loc in found)
            if total == w.count:
                return found
            logger.debug("window %d: found %d of %d, refining scan", w.index, total, w.count)
            density *= 2
        raise CountMismatch(
            f"window [{w.lo:.6g}, {w.hi:.6g}] certified {w.count} eigenvalues, refinement accounts for {total}"
        )

    # -------- Public --------

    def scan(self, lambda_max: float) -> SpectrumScan:
        cuts = self._cuts(lambda_max)
        spans = list(zip(cuts[:-1], cuts[1:]))
        threads = self.settings.threads

        def certify(item: tuple[int, tuple[float, float]]) -> SpectrumWindow:
            i, (lo, hi) = item
            return SpectrumWindow(i, lo, hi, self._count_window(lo, hi))

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                windows = list(pool.map(certify, enumerate(spans)))
                found = list(pool.map(self._roots_in_window, windows))
        else:
            windows = [certify(item) for item in enumerate(spans)]
            found = [self._roots_in_window(w) for w in windows]
        locations = sorted((loc for chunk in found for loc in chunk), key=lambda loc: loc.lam)
        logger.info("located %d eigenvalues in %d windows up to %.6g", len(locations), len(windows), cuts[-1])
        return SpectrumScan(locations, windows, self.norm)


def locate_all(
    V: MatrixPotential,
    lambda_max: float,
    settings: Optional[SvspecSettings] = None,
) -> list[EigenLocation]:
    """All eigenvalues in (-|V|-1, lambda_max].

    The scan itself runs to the first window cut at or above ``lambda_max`` so
    the last window is certified whole; locations beyond it are dropped here.
    """
    scan = SpectrumLocator(V, settings).scan(lambda_max)
    return [loc for loc in scan.locations if loc.lam <= lambda_max]
