# svspec/service/inversekit.py
"""
逆问题工具箱.

Everything here is measured against a diagonal reference potential
V⋄ = diag(v₁₁, …, v_NN) whose scalar spectra are merged into one labelled
spectrum λ_α⋄ with multiplicities k_α⋄ and coordinate index sets
I(α) = {s : λ_α⋄ ∈ σ(v_ss)}.

For a potential V near V⋄ the module computes

- the isospectrality detector Ã_α(V) = A¹¹ - A¹²(A²²)⁻¹A²¹, A = χ(χ′)⁻¹(0, λ_α⋄, V);
- the residue continuation B̃_α(V) = -(1/2πi)∮_{|λ-λ_α⋄|=d⋄} M(λ, V) dλ and its
  factorization B̃ = (p* + q*E) C (p + E*q);
- the shell coordinates a, c, e, the matrix Y_n, its polar factors U_n S_n and
  the pair (-i log U_n, 2πn(S_n - I));
- gradient kernels at V⋄ and the directional derivatives they produce;
- the biorthogonality identities behind the Riesz-basis argument;
- the forbidden subspaces and the finite-rank test of condition (C).
"""
from __future__ import annotations

import logging
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Literal, Optional, Sequence, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import null_space, polar, subspace_angles
from scipy.special import zeta

from ..config import InverseConfig, SvspecSettings
from .exceptions import (
    CoincidentEigenvalues,
    CountingHypothesisViolated,
    DegenerateMean,
    LogDivergent,
    MeanNotZero,
    NotHermitian,
    OutOfNeighborhood,
    ProductNotConverged,
    RankDeficientGram,
    SingularUpperBlock,
    SingularY,
    SpectraTooClose,
    WrongIndexCombination,
)
from .matode import MatrixOde
from .potential import MatrixPotential, composite_gauss_legendre
from .spectraldata import SpectralDataset, residue_via_contour
from .spectrum import SpectrumLocator

__all__: list[str] = [
    "FrameEigen",
    "ReferenceFrame",
    "UnperturbedSpectrum",
    "TildeData",
    "FactorCE",
    "ModifiedShellData",
    "GradientKernel",
    "AlphaDerivative",
    "ShellDerivative",
    "FrechetDerivatives",
    "FrechetComparison",
    "BiorthogonalSystem",
    "RieszDiagnostic",
    "ForbiddenSubspace",
    "ConditionCReport",
    "make_reference",
    "tilde_A",
    "tilde_B",
    "factor_CE",
    "phi1_coordinates",
    "modified_shell",
    "gradient_kernels",
    "frechet_apply",
    "frechet_check",
    "biortho_identity_check",
    "biorthogonal_system",
    "riesz_gram_diagnostic",
    "forbidden_subspace",
    "condition_C_finite",
]

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]
Label = Union[int, tuple[int, int]]
Grid = Literal["gauss", "uniform"]

ANGLE_TOL = 1e-6


# -------- Reference frame --------

@dataclass(frozen=True, slots=True)
class FrameEigen:
    """One merged eigenvalue of V⋄: its value, channels I(α) and the per-channel ordinal m."""

    lam: float
    channels: tuple[int, ...]
    ordinals: tuple[int, ...]

    @property
    def k(self) -> int:
        return len(self.channels)


@dataclass(frozen=True, slots=True, eq=False)
class _ReferencePaths:
    """Diagonal entries of the reference solutions at one λ_α⋄ on a quadrature grid."""

    t: NDArray[np.float64]
    w: NDArray[np.float64]
    chi: NDArray[np.float64]       # (3, T, N): χ, χ̇, χ̈
    dchi: NDArray[np.float64]      # (3, T, N)
    phi: NDArray[np.float64]       # (2, T, N): φ, φ̇
    dphi: NDArray[np.float64]      # (2, T, N)
    chi0: NDArray[np.float64]      # (3, N): χ(0), χ̇(0), χ̈(0)
    dchi0: NDArray[np.float64]     # (3, N): χ′(0), χ̇′(0), χ̈′(0)
    phi1: NDArray[np.float64]      # (2, N): φ(1), φ̇(1)
    gram: NDArray[np.float64]      # (N,): ∫φ²

    @property
    def xi(self) -> NDArray[np.float64]:
        """ξ⋄(t) = χ̇(t) - χ̈(0)/(2χ̇(0))·χ(t)."""
        with np.errstate(divide="ignore", invalid="ignore"):
            shift = np.where(self.chi0[1] != 0.0, self.chi0[2] / (2.0 * self.chi0[1]), 0.0)
        return self.chi[1] - shift[None, :] * self.chi[0]


class ReferenceFrame:
    """Diagonal reference V⋄ with its merged spectrum and cached scalar solutions."""

    def __init__(
        self,
        channels: Sequence[MatrixPotential],
        eigs: list[FrameEigen],
        channel_eigs: list[NDArray[np.float64]],
        settings: SvspecSettings,
    ) -> None:
        self.channels = list(channels)
        self.settings = settings
        self.cfg: InverseConfig = settings.inverse
        self.V_diamond = MatrixPotential.diagonal(self.channels)
        self.dim = self.V_diamond.dim
        self.v0 = np.array([float(np.real(c.mean_matrix()[0, 0])) for c in self.channels])
        self.eigs = eigs
        self.channel_eigs = channel_eigs
        lams = np.array([e.lam for e in eigs])
        self.d_diamond = 0.5 * float(np.min(np.diff(lams))) if lams.size > 1 else 0.5
        self.n_diamond, self.shell_count = self._detect_shells()
        self.alpha_diamond = sum(1 for e in eigs if min(e.ordinals) < self.n_diamond)
        self._shell_alpha: dict[tuple[int, int], int] = {}
        for a, e in enumerate(eigs, start=1):
            if e.k == 1 and e.ordinals[0] >= self.n_diamond and e.ordinals[0] < self.n_diamond + self.shell_count:
                self._shell_alpha[(e.ordinals[0], e.channels[0])] = a
        self.ode = MatrixOde(self.V_diamond, settings.ode)
        self._paths: dict[tuple[int, Grid], _ReferencePaths] = {}
        self._lock = threading.Lock()

    # -------- Shell structure --------

    def _detect_shells(self) -> tuple[int, int]:
        """n⋄: from here on every channel's m-th eigenvalue is simple and lies above all lower ordinals."""
        count = min(len(c) for c in self.channel_eigs)
        simple = {(e.channels[0], e.ordinals[0]) for e in self.eigs if e.k == 1}

        def shell_ok(m: int) -> bool:
            return all((j, m) in simple for j in range(len(self.channel_eigs)))

        def separated(m: int) -> bool:
            if m == 1:
                return True
            top = max(lams[m - 2] for lams in self.channel_eigs)
            return top < min(lams[m - 1] for lams in self.channel_eigs)

        n = count + 1
        while n > 1 and shell_ok(n - 1):
            n -= 1
        while n <= count and not separated(n):
            n += 1
        return n, max(0, count + 1 - n)

    def shells(self) -> list[int]:
        return list(range(self.n_diamond, self.n_diamond + self.shell_count))

    def resolve(self, label: Label) -> int:
        """1-based α for an α label or a shell label (n, j)."""
        if isinstance(label, tuple):
            if label not in self._shell_alpha:
                raise ValueError(f"shell label {label} is not a double-indexed eigenvalue of the frame")
            return self._shell_alpha[label]
        if not 1 <= label <= len(self.eigs):
            raise ValueError(f"alpha={label} outside 1..{len(self.eigs)}")
        return int(label)

    def eigen(self, label: Label) -> FrameEigen:
        return self.eigs[self.resolve(label) - 1]

    def index_set(self, label: Label) -> tuple[int, ...]:
        return self.eigen(label).channels

    def projectors(self, label: Label) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
        """Coordinate maps p: Cᴺ → E_α⋄ (k×N) and q onto the complement ((N-k)×N)."""
        inside = self.index_set(label)
        outside = [s for s in range(self.dim) if s not in inside]
        eye = np.eye(self.dim)
        return eye[list(inside)], eye[outside]

    def shell_alpha(self, n: int, j: int) -> int:
        return self.resolve((n, j))

    # -------- Reference solutions --------

    def paths(self, label: Label, grid: Grid = "gauss") -> _ReferencePaths:
        alpha = self.resolve(label)
        key = (alpha, grid)
        with self._lock:
            cached = self._paths.get(key)
        if cached is not None:
            return cached
        lam = self.eigs[alpha - 1].lam
        if grid == "gauss":
            t, w = composite_gauss_legendre(max(1, self.cfg.kernel_grid // 8), 8)
        else:
            t = np.linspace(0.0, 1.0, self.cfg.kernel_grid)
            w = np.full(t.size, 1.0 / (t.size - 1))
            w[[0, -1]] *= 0.5
        chi = self.ode.chi_path(lam, t, order=2)
        phi = self.ode.phi_path(lam, t, order=1)
        end_chi = self.ode.chi_endpoint([lam], order=2)
        end_phi = self.ode.phi_endpoint([lam], order=1, gram=True)
        assert end_phi.gram is not None

        def diag(a: Array) -> NDArray[np.float64]:
            return np.real(np.diagonal(a, axis1=-2, axis2=-1))

        paths = _ReferencePaths(
            t=t, w=w,
            chi=np.moveaxis(diag(chi.values), 1, 0), dchi=np.moveaxis(diag(chi.derivs), 1, 0),
            phi=np.moveaxis(diag(phi.values), 1, 0), dphi=np.moveaxis(diag(phi.derivs), 1, 0),
            chi0=diag(end_chi.values[0]), dchi0=diag(end_chi.derivs[0]),
            phi1=diag(end_phi.values[0]), gram=diag(end_phi.gram[0]),
        )
        with self._lock:
            self._paths[key] = paths
        return paths

    def unperturbed(self) -> "UnperturbedSpectrum":
        return UnperturbedSpectrum(self.dim, self.v0, list(self.eigs), [np.asarray(c) for c in self.channel_eigs])


def make_reference(
    channels: Sequence[MatrixPotential],
    lambda_max: float,
    settings: Optional[SvspecSettings] = None,
) -> ReferenceFrame:
    settings = settings or SvspecSettings()
    cfg = settings.inverse
    if any(c.dim != 1 for c in channels):
        raise ValueError("reference channels must be scalar potentials")
    means = np.array([float(np.real(c.mean_matrix()[0, 0])) for c in channels])
    order = np.sort(means)
    if np.any(np.diff(order) <= settings.potential.gap_min):
        raise DegenerateMean(f"reference channel means {means.tolist()} are not distinct")

    def scan(c: MatrixPotential) -> tuple[NDArray[np.float64], float]:
        locator = SpectrumLocator(c, settings)
        result = locator.scan(lambda_max)
        return result.eigenvalues(), result.windows[-1].hi

    if settings.threads > 1:
        with ThreadPoolExecutor(max_workers=settings.threads) as pool:
            scans = list(pool.map(scan, channels))
    else:
        scans = [scan(c) for c in channels]
    cover = min(top for _, top in scans)
    channel_eigs = [lams[lams < cover] for lams, _ in scans]

    entries = sorted((float(lam), j, m) for j, lams in enumerate(channel_eigs) for m, lam in enumerate(lams, start=1))
    eigs: list[FrameEigen] = []
    group = [entries[0]]
    for item in entries[1:]:
        gap = item[0] - group[-1][0]
        if gap <= cfg.coincide_tol:
            group.append(item)
            continue
        if gap < cfg.ambiguity_tol:
            raise SpectraTooClose(f"eigenvalues {group[-1][0]:.15g} and {item[0]:.15g} differ by {gap:.3e}")
        eigs.append(FrameEigen(float(np.mean([g[0] for g in group])), tuple(g[1] for g in group), tuple(g[2] for g in group)))
        group = [item]
    eigs.append(FrameEigen(float(np.mean([g[0] for g in group])), tuple(g[1] for g in group), tuple(g[2] for g in group)))

    frame = ReferenceFrame(channels, eigs, channel_eigs, settings)
    logger.info(
        "reference frame: N=%d, %d merged eigenvalues, n_diamond=%d, alpha_diamond=%d, d_diamond=%.4g",
        frame.dim, len(eigs), frame.n_diamond, frame.alpha_diamond, frame.d_diamond,
    )
    return frame


@dataclass(eq=False)
class UnperturbedSpectrum:
    """Labelled spectrum with coordinate projectors: a frame's, or the free π²n² + v_j one."""

    dim: int
    v0: NDArray[np.float64]
    eigs: list[FrameEigen]
    channel_eigs: list[NDArray[np.float64]]

    @classmethod
    def free(cls, dim: int, v0: ArrayLike, n_known: int = 64, coincide_tol: float = 1e-9) -> "UnperturbedSpectrum":
        v = np.asarray(v0, float)
        if v.size != dim:
            raise ValueError("v0 must have N entries")
        n = np.arange(1, n_known + 1)
        channel_eigs = [np.pi**2 * n**2 + v[j] for j in range(dim)]
        entries = sorted((float(lam), j, m) for j, lams in enumerate(channel_eigs) for m, lam in enumerate(lams, start=1))
        eigs: list[FrameEigen] = []
        group = [entries[0]]
        for item in entries[1:]:
            if item[0] - group[-1][0] <= coincide_tol:
                group.append(item)
                continue
            eigs.append(FrameEigen(group[0][0], tuple(g[1] for g in group), tuple(g[2] for g in group)))
            group = [item]
        eigs.append(FrameEigen(group[0][0], tuple(g[1] for g in group), tuple(g[2] for g in group)))
        return cls(dim, v, eigs, channel_eigs)


# -------- Φ⁽¹⁾ data --------

@dataclass(frozen=True, slots=True, eq=False)
class TildeData:
    A_tilde: Array
    B_tilde: Array
    C: Array
    E: Array


@dataclass(frozen=True, slots=True, eq=False)
class FactorCE:
    C: Array
    E: Array
    residual: float

    def __iter__(self):  # type: ignore[no-untyped-def]
        return iter((self.C, self.E))


def tilde_A(frame: ReferenceFrame, V: MatrixPotential, alpha: Label, ode: Optional[MatrixOde] = None) -> Array:
    lam = frame.eigen(alpha).lam
    p, q = frame.projectors(alpha)
    ode = ode or MatrixOde(V, frame.settings.ode)
    data = ode.chi_endpoint([lam])
    chi, dchi = data.values[0, 0], data.derivs[0, 0]
    limit = frame.cfg.cond_limit
    cond = np.linalg.cond(dchi)
    if not np.isfinite(cond) or cond > limit:
        raise OutOfNeighborhood(f"alpha={alpha}: cond(chi'(0)) = {cond:.3e}")
    A = chi @ np.linalg.inv(dchi)
    A11 = p @ A @ p.T
    if q.shape[0] == 0:
        return A11
    A22 = q @ A @ q.T
    cond22 = np.linalg.cond(A22)
    if not np.isfinite(cond22) or cond22 > limit:
        raise OutOfNeighborhood(f"alpha={alpha}: cond(A22) = {cond22:.3e}")
    return A11 - (p @ A @ q.T) @ np.linalg.solve(A22, q @ A @ p.T)


def tilde_B(frame: ReferenceFrame, V: MatrixPotential, alpha: Label, ode: Optional[MatrixOde] = None) -> Array:
    e = frame.eigen(alpha)
    ode = ode or MatrixOde(V, frame.settings.ode)
    B = np.asarray(residue_via_contour(V, e.lam, frame.d_diamond, frame.settings, ode, symmetrize=False))
    if not V.hermitian:
        return B
    scale = max(1.0, float(np.max(np.abs(B))))
    skew = float(np.max(np.abs(B - B.conj().T))) / scale
    if skew > frame.cfg.hermitian_tol:
        raise NotHermitian(f"alpha={alpha}: B_tilde deviates from Hermitian by {skew:.3e} (relative)")
    B = 0.5 * (B + B.conj().T)
    sv = np.linalg.svd(B, compute_uv=False)
    rank = int(np.sum(sv > 1e-8 * max(1.0, sv[0])))
    if rank != e.k:
        raise OutOfNeighborhood(f"alpha={alpha}: B_tilde has numerical rank {rank}, expected {e.k}")
    return B


def factor_CE(frame: ReferenceFrame, B_tilde: ArrayLike, alpha: Label) -> FactorCE:
    B = np.asarray(B_tilde, complex)
    p, q = frame.projectors(alpha)
    C = p @ B @ p.T
    cond = np.linalg.cond(C)
    if not np.isfinite(cond) or cond > frame.cfg.cond_limit:
        raise SingularUpperBlock(f"alpha={alpha}: cond(B11) = {cond:.3e}")
    E = (q @ B @ p.T) @ np.linalg.inv(C)
    left = p.T + q.T @ E
    rebuilt = left @ C @ (p + E.conj().T @ q)
    residual = float(np.max(np.abs(rebuilt - B))) / max(1.0, float(np.max(np.abs(B))))
    return FactorCE(C, E, residual)


def phi1_coordinates(frame: ReferenceFrame, V: MatrixPotential, alpha: Label, ode: Optional[MatrixOde] = None) -> TildeData:
    """The per-α triple (Ã, C, E), with B̃ kept alongside."""
    ode = ode or MatrixOde(V, frame.settings.ode)
    A = tilde_A(frame, V, alpha, ode)
    B = tilde_B(frame, V, alpha, ode)
    ce = factor_CE(frame, B, alpha)
    return TildeData(A, B, ce.C, ce.E)


# -------- Shell coordinates --------

@dataclass(frozen=True, slots=True, eq=False)
class ModifiedShellData:
    n: int
    a: NDArray[np.float64]
    c: NDArray[np.float64]
    e: Array
    Y: Array
    U: Array
    S: Array
    phi2: tuple[Array, Array]
    Z: Array


def _unitary_log(U: Array, tol: float = 1e-16, max_terms: int = 4000) -> Array:
    """log U = (U-I) - (U-I)²/2 + (U-I)³/3 - …"""
    D = U - np.eye(U.shape[0])
    gap = float(np.linalg.norm(D, 2))
    if gap >= 1.0:
        raise LogDivergent(f"||U - I|| = {gap:.4f} >= 1")
    out = np.zeros_like(D)
    power = np.eye(U.shape[0], dtype=complex)
    for k in range(1, max_terms + 1):
        power = power @ D
        term = power / k
        out += term if k % 2 else -term
        if float(np.max(np.abs(term))) < tol:
            break
    return out


def modified_shell(frame: ReferenceFrame, V: MatrixPotential, n: int, ode: Optional[MatrixOde] = None) -> ModifiedShellData:
    N = frame.dim
    ode = ode or MatrixOde(V, frame.settings.ode)
    scale = 2.0 * np.pi**2 * n**2
    a = np.zeros(N)
    c = np.zeros(N)
    e = np.zeros((N, N), complex)
    for j in range(N):
        label = (n, j)
        A = tilde_A(frame, V, label, ode)
        ce = factor_CE(frame, tilde_B(frame, V, label, ode), label)
        a[j] = scale * float(np.real(A[0, 0]))
        c[j] = float(np.sqrt(np.real(ce.C[0, 0]) / scale))
        _, q = frame.projectors(label)
        e[:, j] = np.eye(N)[j] + q.T @ ce.E[:, 0]
    Y = e * (np.exp(1j * a) * c)[None, :]
    cond = np.linalg.cond(Y)
    if not np.isfinite(cond) or cond > frame.cfg.cond_limit:
        raise SingularY(f"shell n={n}: cond(Y) = {cond:.3e}")
    U, S = polar(Y, side="right")
    log_u = _unitary_log(U)
    phi2 = (-1j * log_u, 2.0 * np.pi * n * (S - np.eye(N)))
    Z = 2.0 * np.pi * n * (Y @ Y.conj().T - np.eye(N))
    return ModifiedShellData(n, a, c, e, Y, U, S, phi2, Z)


# -------- Gradient kernels --------

@dataclass(frozen=True, slots=True, eq=False)
class GradientKernel:
    alpha: int
    j: int
    k: int
    t: NDArray[np.float64]
    w: NDArray[np.float64]
    u: NDArray[np.float64]
    u_tilde: Optional[NDArray[np.float64]]
    provenance: Literal["shared", "crossed"]


def gradient_kernels(frame: ReferenceFrame, alpha: Label, j: int, k: int, grid: Grid = "uniform") -> GradientKernel:
    """u^(jk) (and ũ^(jk) when both channels carry λ_α⋄) sampled on ``grid``."""
    idx = frame.resolve(alpha)
    inside = frame.index_set(idx)
    ref = frame.paths(idx, grid)
    chi = ref.chi[0]
    if j in inside and k in inside:
        u = chi[:, j] * chi[:, k] / (ref.dchi0[0, j] * ref.dchi0[0, k])
        xi = ref.xi
        u_t = (xi[:, j] * chi[:, k] + chi[:, j] * xi[:, k]) / (ref.chi0[1, j] * ref.chi0[1, k])
        return GradientKernel(idx, j, k, ref.t, ref.w, u, u_t, "shared")
    if j not in inside and k in inside:
        u = -chi[:, j] * chi[:, k] / (ref.chi0[0, j] * ref.dchi0[0, k])
        return GradientKernel(idx, j, k, ref.t, ref.w, u, None, "crossed")
    raise WrongIndexCombination(f"alpha={alpha}: channel k={k} must carry the eigenvalue (I={inside}), j={j}")


@dataclass(frozen=True, slots=True, eq=False)
class AlphaDerivative:
    dA: Array
    dC: Array
    dE: Array


@dataclass(frozen=True, slots=True, eq=False)
class ShellDerivative:
    da: NDArray[np.float64]
    dc: NDArray[np.float64]
    dY: Array
    dS: Array
    dU: Array

    @property
    def dphi2(self) -> tuple[Array, Array]:
        return -1j * self.dU, self.dS


@dataclass(eq=False)
class FrechetDerivatives:
    alphas: dict[int, AlphaDerivative] = field(default_factory=dict)
    shells: dict[int, ShellDerivative] = field(default_factory=dict)


def _check_mean_zero(W: MatrixPotential) -> None:
    mean = W.mean_matrix()
    scale = max(1.0, W.sup_norm())
    if float(np.max(np.abs(mean))) > 1e-10 * scale:
        raise MeanNotZero(f"perturbation mean has entry {np.max(np.abs(mean)):.3e}")


def _pair(W_t: Array, kern: GradientKernel, fn: NDArray[np.float64], j: int, k: int) -> complex:
    return complex(np.sum(kern.w * W_t[:, j, k] * fn))


def _alpha_derivative(frame: ReferenceFrame, W_t: Array, alpha: int) -> AlphaDerivative:
    inside = frame.index_set(alpha)
    outside = [s for s in range(frame.dim) if s not in inside]
    k = len(inside)
    dA = np.zeros((k, k), complex)
    dC = np.zeros((k, k), complex)
    dE = np.zeros((len(outside), k), complex)
    for a, ja in enumerate(inside):
        for b, kb in enumerate(inside):
            kern = gradient_kernels(frame, alpha, ja, kb, "gauss")
            dA[a, b] = _pair(W_t, kern, kern.u, ja, kb)
            assert kern.u_tilde is not None
            dC[a, b] = _pair(W_t, kern, kern.u_tilde, ja, kb)
        for r, jr in enumerate(outside):
            kern = gradient_kernels(frame, alpha, jr, ja, "gauss")
            dE[r, a] = _pair(W_t, kern, kern.u, jr, ja)
    return AlphaDerivative(dA, dC, dE)


def _shell_derivative(frame: ReferenceFrame, W_t: Array, n: int) -> ShellDerivative:
    N = frame.dim
    scale = 2.0 * np.pi**2 * n**2
    da = np.zeros(N)
    dc = np.zeros(N)
    s = np.zeros(N)
    dY = np.zeros((N, N), complex)
    for j in range(N):
        alpha = frame.shell_alpha(n, j)
        ref = frame.paths(alpha, "gauss")
        s[j] = np.sqrt(1.0 / (ref.gram[j] * scale))
        d = _alpha_derivative(frame, W_t, alpha)
        da[j] = scale * float(np.real(d.dA[0, 0]))
        dc[j] = float(np.real(d.dC[0, 0])) / (2.0 * scale * s[j])
        dY[j, j] = dc[j] + 1j * s[j] * da[j]
        rows = [r for r in range(N) if r != j]
        dY[rows, j] = s[j] * d.dE[:, 0]
    # 极分解的线性化: dY = Ω S⋄ + dS, Ω 反厄米, dS 厄米
    omega = (dY - dY.conj().T) / (s[:, None] + s[None, :])
    dS = dY - omega * s[None, :]
    return ShellDerivative(da, dc, dY, 0.5 * (dS + dS.conj().T), omega)


def frechet_apply(
    frame: ReferenceFrame,
    W: MatrixPotential,
    alphas: Optional[Sequence[int]] = None,
    shells: Optional[Sequence[int]] = None,
) -> FrechetDerivatives:
    """Directional derivatives of (Ã, C, E) and (Y, S, U) at V⋄ along a mean-zero W."""
    _check_mean_zero(W)
    alphas = list(range(1, frame.alpha_diamond + 1)) if alphas is None else list(alphas)
    shells = frame.shells()[:4] if shells is None else list(shells)
    t = frame.paths(1, "gauss").t if frame.eigs else np.zeros(0)
    W_t = W.values(t)
    out = FrechetDerivatives()
    for a in alphas:
        out.alphas[a] = _alpha_derivative(frame, W_t, frame.resolve(a))
    for n in shells:
        out.shells[n] = _shell_derivative(frame, W_t, n)
    return out


@dataclass(frozen=True, slots=True)
class FrechetComparison:
    quantity: str
    label: str
    analytic: float
    finite_difference: float
    rel_error: float


def frechet_check(
    frame: ReferenceFrame,
    W: MatrixPotential,
    eps: float = 1e-4,
    alphas: Optional[Sequence[int]] = None,
    shells: Optional[Sequence[int]] = None,
) -> list[FrechetComparison]:
    """Analytic directional derivatives against central differences at V⋄ ± εW."""
    deriv = frechet_apply(frame, W, alphas, shells)
    plus = frame.V_diamond + W * eps
    minus = frame.V_diamond - W * eps
    ode_p = MatrixOde(plus, frame.settings.ode)
    ode_m = MatrixOde(minus, frame.settings.ode)
    rows: list[FrechetComparison] = []

    def record(quantity: str, label: str, analytic: Array, fd: Array) -> None:
        a = np.asarray(analytic).ravel()
        f = np.asarray(fd).ravel()
        scale = max(float(np.max(np.abs(a))) if a.size else 0.0, 1e-300)
        err = float(np.max(np.abs(a - f))) / scale if a.size else 0.0
        rows.append(FrechetComparison(quantity, label, float(np.max(np.abs(a))) if a.size else 0.0,
                                      float(np.max(np.abs(f))) if f.size else 0.0, err))

    for a, d in deriv.alphas.items():
        tp = phi1_coordinates(frame, plus, a, ode_p)
        tm = phi1_coordinates(frame, minus, a, ode_m)
        record("A_tilde", str(a), d.dA, (tp.A_tilde - tm.A_tilde) / (2 * eps))
        record("C", str(a), d.dC, (tp.C - tm.C) / (2 * eps))
        if d.dE.size:
            record("E", str(a), d.dE, (tp.E - tm.E) / (2 * eps))
    for n, d in deriv.shells.items():
        sp = modified_shell(frame, plus, n, ode_p)
        sm = modified_shell(frame, minus, n, ode_m)
        record("Y", f"n={n}", d.dY, (sp.Y - sm.Y) / (2 * eps))
        record("S", f"n={n}", d.dS, (sp.S - sm.S) / (2 * eps))
        record("U", f"n={n}", d.dU, (sp.U - sm.U) / (2 * eps))
    worst = max((r.rel_error for r in rows), default=0.0)
    logger.info("frechet check eps=%g: %d quantities, worst relative error %.2e", eps, len(rows), worst)
    return rows


# -------- Biorthogonality --------

def _ip(ref: _ReferencePaths, f: NDArray[np.float64], g: NDArray[np.float64]) -> float:
    return float(np.sum(ref.w * f * g))


def biortho_identity_check(
    frame: ReferenceFrame,
    alpha: Label,
    beta: Label,
    j: int,
    k: int,
    limit: Optional[Literal["coincident", "dot_chi", "dot_phi"]] = None,
) -> float:
    """|⟨χ_α^j χ_α^k, [φ_β^j φ_β^k]′⟩ - ([φ_β^j φ_β^k](1) - [χ_α^j χ_α^k](0)) / (2(λ_α - λ_β))|.

    With ``limit`` set and λ_α = λ_β the coincident forms are checked instead:
    ``coincident`` ½[c_j∫χ^kφ^k + c_k∫χ^jφ^j] with c_s = χ^s(0, λ);
    ``dot_chi`` ⟨χ̇^jχ^k + χ^jχ̇^k, [φ^jφ^k]′⟩ = -[χ̇^jχ̇^k](0)/2;
    ``dot_phi`` ⟨χ^jχ^k, [φ̇^jφ^k + φ^jφ̇^k]′⟩ = -[φ̇^jφ̇^k](1)/2.
    """
    a, b = frame.resolve(alpha), frame.resolve(beta)
    la, lb = frame.eigs[a - 1].lam, frame.eigs[b - 1].lam
    ra, rb = frame.paths(a, "gauss"), frame.paths(b, "gauss")
    yz = ra.chi[0][:, j] * ra.chi[0][:, k]
    fg_prime = rb.dphi[0][:, j] * rb.phi[0][:, k] + rb.phi[0][:, j] * rb.dphi[0][:, k]
    coincide = abs(la - lb) <= frame.cfg.coincide_tol * max(1.0, abs(la))

    if limit is None:
        if coincide:
            raise CoincidentEigenvalues(f"lambda_alpha = lambda_beta = {la:.12g}; pass a limit form")
        lhs = _ip(ra, yz, fg_prime)
        rhs = (rb.phi1[0, j] * rb.phi1[0, k] - ra.chi0[0, j] * ra.chi0[0, k]) / (2.0 * (la - lb))
    else:
        if not coincide:
            raise ValueError(f"limit form {limit!r} needs lambda_alpha = lambda_beta")
        if limit == "coincident":
            lhs = _ip(ra, yz, fg_prime)
            cj, ck = ra.chi0[0, j], ra.chi0[0, k]
            rhs = 0.5 * (cj * _ip(ra, ra.chi[0][:, k], ra.phi[0][:, k]) + ck * _ip(ra, ra.chi[0][:, j], ra.phi[0][:, j]))
        else:
            inside = frame.index_set(a)
            if j not in inside or k not in inside:
                raise WrongIndexCombination(f"limit {limit!r} needs lambda in the spectra of both channels {j}, {k}")
            if limit == "dot_chi":
                dyz = ra.chi[1][:, j] * ra.chi[0][:, k] + ra.chi[0][:, j] * ra.chi[1][:, k]
                lhs = _ip(ra, dyz, fg_prime)
                rhs = -0.5 * ra.chi0[1, j] * ra.chi0[1, k]
            else:
                phi, dphi = ra.phi, ra.dphi
                dfg_prime = (
                    dphi[1][:, j] * phi[0][:, k] + phi[1][:, j] * dphi[0][:, k]
                    + dphi[0][:, j] * phi[1][:, k] + phi[0][:, j] * dphi[1][:, k]
                )
                lhs = _ip(ra, yz, dfg_prime)
                rhs = -0.5 * ra.phi1[1, j] * ra.phi1[1, k]
    logger.debug("biorthogonality alpha=%s beta=%s (%d,%d): lhs=%.6e rhs=%.6e", alpha, beta, j, k, lhs, rhs)
    return abs(lhs - rhs)


@dataclass(frozen=True, slots=True, eq=False)
class BiorthogonalSystem:
    labels: list[tuple[int, str]]
    gram: NDArray[np.float64]
    max_offdiag: float
    min_diag: float


def biorthogonal_system(
    frame: ReferenceFrame,
    j: int,
    k: int,
    alphas: Optional[Sequence[int]] = None,
    limit: int = 12,
) -> BiorthogonalSystem:
    """Cross Gram of {χ^jχ^k, (χ^jχ^k)˙} against {[φ^jφ^k]′, [(φ^jφ^k)˙]′ + c_α[φ^jφ^k]′}.

    Pairs at eigenvalues shared by both channels are listed with the dual
    functions swapped, so a biorthogonal system gives a diagonal Gram matrix.
    """
    if alphas is None:
        alphas = [a for a, e in enumerate(frame.eigs, start=1) if j in e.channels or k in e.channels][:limit]
    primal: list[NDArray[np.float64]] = []
    dual: list[NDArray[np.float64]] = []
    labels: list[tuple[int, str]] = []
    ref0 = frame.paths(alphas[0], "gauss")
    for a in alphas:
        r = frame.paths(a, "gauss")
        chi, phi, dphi = r.chi, r.phi, r.dphi
        yz = chi[0][:, j] * chi[0][:, k]
        fg_prime = dphi[0][:, j] * phi[0][:, k] + phi[0][:, j] * dphi[0][:, k]
        inside = frame.index_set(a)
        if j in inside and k in inside:
            dyz = chi[1][:, j] * chi[0][:, k] + chi[0][:, j] * chi[1][:, k]
            dfg_prime = (
                dphi[1][:, j] * phi[0][:, k] + phi[1][:, j] * dphi[0][:, k]
                + dphi[0][:, j] * phi[1][:, k] + phi[0][:, j] * dphi[1][:, k]
            )
            # c_α 使 (χχ)˙ 与修正后的对偶函数正交
            c_alpha = 2.0 * _ip(r, dyz, dfg_prime) / (r.chi0[1, j] * r.chi0[1, k])
            primal += [yz, dyz]
            dual += [dfg_prime + c_alpha * fg_prime, fg_prime]
            labels += [(a, "chi"), (a, "dot_chi")]
        else:
            primal.append(yz)
            dual.append(fg_prime)
            labels.append((a, "chi"))
    G = np.array([[_ip(ref0, x, y) for y in dual] for x in primal])
    off = G - np.diag(np.diag(G))
    scale = float(np.max(np.abs(np.diag(G)))) or 1.0
    return BiorthogonalSystem(labels, G, float(np.max(np.abs(off))) / scale, float(np.min(np.abs(np.diag(G)))))


@dataclass(frozen=True, slots=True, eq=False)
class RieszDiagnostic:
    j: int
    k: int
    size: int
    min_eig: float
    max_eig: float
    shell_distance: dict[int, float]


def riesz_gram_diagnostic(frame: ReferenceFrame, j: int, k: int, n_max: Optional[int] = None) -> RieszDiagnostic:
    """Extreme eigenvalues of the truncated Gram of the mean-free kernel collection U^(jk)."""
    shells = [n for n in frame.shells() if n_max is None or n <= n_max]
    funcs: list[NDArray[np.float64]] = []
    ref = frame.paths(frame.shell_alpha(shells[0], 0) if shells else 1, "gauss")
    t, w = ref.t, ref.w

    def centred(f: NDArray[np.float64]) -> NDArray[np.float64]:
        return f - float(np.sum(w * f))

    for a in range(1, frame.alpha_diamond + 1):
        inside = frame.index_set(a)
        if j in inside and k in inside:
            kern = gradient_kernels(frame, a, j, k, "gauss")
            assert kern.u_tilde is not None
            funcs += [kern.u, kern.u_tilde]
        elif k in inside and j not in inside:
            funcs.append(gradient_kernels(frame, a, j, k, "gauss").u)
        elif j in inside and k not in inside:
            funcs.append(gradient_kernels(frame, a, k, j, "gauss").u)

    distance: dict[int, float] = {}
    for n in shells:
        if j == k:
            kern = gradient_kernels(frame, (n, j), j, j, "gauss")
            assert kern.u_tilde is not None
            f1 = centred(2.0 * np.pi**2 * n**2 * kern.u)
            f2 = centred(kern.u_tilde / (2.0 * np.pi * n))
            r1 = np.cos(2.0 * np.pi * n * t)
            r2 = centred((1.0 - t) * np.sin(2.0 * np.pi * n * t))
            dist = [min(np.sqrt(np.sum(w * (f - s * r) ** 2)) for s in (1.0, -1.0)) for f, r in ((f1, r1), (f2, r2))]
            distance[n] = float(max(dist))
            funcs += [f1, f2]
        else:
            u_jk = gradient_kernels(frame, (n, k), j, k, "gauss").u
            u_kj = gradient_kernels(frame, (n, j), k, j, "gauss").u
            funcs += [0.5 * (u_jk - u_kj), np.pi * n * (u_jk + u_kj)]
    F = np.array([centred(f) for f in funcs])
    G = (F * w[None, :]) @ F.T
    eig = np.linalg.eigvalsh(0.5 * (G + G.T)) if F.size else np.zeros(1)
    return RieszDiagnostic(j, k, len(funcs), float(eig[0]), float(eig[-1]), distance)


# -------- Condition (C) --------

@dataclass(frozen=True, slots=True, eq=False)
class ForbiddenSubspace:
    basis: Array
    xi_basis: Array
    angle: float


def forbidden_subspace(
    V: MatrixPotential,
    ds: SpectralDataset,
    beta: int,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
) -> ForbiddenSubspace:
    """F_β = [S_β(E_β)]^⊥, cross-checked against [Ran χ̇(0, λ_β)P_β^♯]^⊥."""
    settings = settings or SvspecSettings()
    if not 1 <= beta <= len(ds.records):
        raise ValueError(f"beta={beta} outside 1..{len(ds.records)}")
    rec = ds.records[beta - 1]
    ode = ode or MatrixOde(V, settings.ode)
    phi = ode.phi_endpoint([rec.lam], gram=True)
    assert phi.gram is not None
    SE = phi.gram[0] @ rec.h
    sv = np.linalg.svd(SE, compute_uv=False)
    if sv.size == 0 or sv[-1] <= 1e-12 * max(1.0, sv[0]):
        raise RankDeficientGram(f"beta={beta}: S_beta(E_beta) has rank below {rec.k}")
    basis = null_space(SE.conj().T)

    chi = ode.chi_endpoint([rec.lam], order=1)
    _, _, vh = np.linalg.svd(chi.values[0, 0])
    kernel = vh[-rec.k:].conj().T
    ran_xi = chi.values[0, 1] @ kernel
    xi_basis = null_space(ran_xi.conj().T)
    angle = 0.0
    if basis.shape[1] and xi_basis.shape[1] == basis.shape[1]:
        angle = float(np.max(subspace_angles(basis, xi_basis)))
    elif basis.shape[1] != xi_basis.shape[1]:
        angle = float(np.pi / 2)
    if angle > ANGLE_TOL:
        logger.warning("beta=%d: Gram and xi routes to F_beta differ by %.2e rad", beta, angle)
    return ForbiddenSubspace(basis, xi_basis, angle)


@dataclass(frozen=True, slots=True, eq=False)
class ConditionCReport:
    T: Array
    holds: bool
    min_eig: float
    m: int
    F: dict[int, NDArray[np.float64]]
    quadratic_form_gap: float


def _free_log_tail(z: complex, v: float, start: float, terms: int = 200) -> complex:
    """Σ_{n≥start} log(1 - z/(π²n² + v)).

    Terms with π²n² below 4·max(|v - z|, |v|) are summed directly, the rest by Hurwitz zeta series in (v - z) and v.
    """
    w = max(abs(v - z), abs(v)) / np.pi**2
    value = 0j
    if w >= 0.25 * start**2:
        count = int(np.ceil(2.0 * np.sqrt(w) - start)) + 1
        n = start + np.arange(count, dtype=float)
        value += complex(np.sum(np.log(1.0 - z / (np.pi**2 * n**2 + v) + 0j)))
        start += count
    r = np.arange(1, terms + 1)
    zetas = zeta(2.0 * r, start)

    def series(shift: complex) -> complex:
        x = -shift / np.pi**2
        powers = x ** r
        keep = np.abs(powers * zetas) > 1e-18
        return complex(-np.sum((powers * zetas / r)[keep]))

    return value + series(v - z) - series(v)


def _channel_factor(lams: NDArray[np.float64], known: int, v: float, z: float, n_trunc: int, tol: float) -> float:
    """f_j(z) over the kept channel eigenvalues up to ordinal ``known``, then π²n² + v and a zeta tail."""

    def evaluate(limit: int) -> float:
        extra = np.arange(known + 1, max(known, limit) + 1, dtype=float)
        pts = np.concatenate([lams, np.pi**2 * extra**2 + v])
        head = float(np.prod(1.0 - z / pts))
        return head * float(np.real(np.exp(_free_log_tail(z, v, float(max(known, limit) + 1)))))

    limit = max(n_trunc, known)
    value = evaluate(limit)
    for _ in range(6):
        refined = evaluate(2 * limit)
        if abs(refined - value) <= tol * max(1.0, abs(refined)):
            return refined
        value, limit = refined, 2 * limit
    raise ProductNotConverged(f"f_j({z:.6g}) not stable to {tol:g} at n_trunc={limit}")


def condition_C_finite(
    spectrum: Union[ReferenceFrame, UnperturbedSpectrum],
    exceptional: Sequence[tuple[int, ArrayLike]],
    settings: Optional[SvspecSettings] = None,
    rng: Optional[np.random.Generator] = None,
) -> ConditionCReport:
    """Finite test of (C) when only the projectors at the exceptional labels differ from coordinate ones."""
    settings = settings or SvspecSettings()
    cfg = settings.inverse
    base = spectrum.unperturbed() if isinstance(spectrum, ReferenceFrame) else spectrum
    N = base.dim
    projs = {int(a): np.asarray(P, complex) for a, P in exceptional}
    for a in projs:
        if not 1 <= a <= len(base.eigs):
            raise ValueError(f"exceptional alpha={a} outside 1..{len(base.eigs)}")
    ranks = {a: int(round(float(np.real(np.trace(P))))) for a, P in projs.items()}
    total = sum(ranks.values())
    if total % N:
        raise CountingHypothesisViolated(f"sum of exceptional ranks {total} is not a multiple of N={N}")
    m = total // N
    lost = [0] * N
    for a in projs:
        for j in base.eigs[a - 1].channels:
            lost[j] += 1
    if any(x != m for x in lost):
        raise CountingHypothesisViolated(f"channels lose {lost} unperturbed eigenvalues, expected {m} each")

    removed = {j: {base.eigs[a - 1].ordinals[base.eigs[a - 1].channels.index(j)]
                   for a in projs if j in base.eigs[a - 1].channels} for j in range(N)}
    kept = [np.array([lam for m_, lam in enumerate(base.channel_eigs[j], start=1) if m_ not in removed[j]])
            for j in range(N)]

    F: dict[int, NDArray[np.float64]] = {}
    for a in projs:
        z = base.eigs[a - 1].lam
        # 已知本征值之外按 π²n² + v_j 补齐
        F[a] = np.array([
            _channel_factor(kept[j], base.channel_eigs[j].size, float(base.v0[j]), z, cfg.n_trunc, cfg.product_tol)
            for j in range(N)
        ])

    size = N * m
    T = np.zeros((size, size), complex)
    for p in range(m):
        for q in range(m):
            block = sum(base.eigs[a - 1].lam ** (p + q) * (F[a][:, None] * projs[a] * F[a][None, :]) for a in projs)
            T[p * N:(p + 1) * N, q * N:(q + 1) * N] = block
    T = 0.5 * (T + T.conj().T)
    w = np.linalg.eigvalsh(T)
    trace = float(np.real(np.trace(T)))
    holds = trace > 0.0 and float(w[0]) > cfg.pd_tol * trace / size

    rng = rng or np.random.default_rng(settings.seed)
    gap = 0.0
    for _ in range(100):
        y = rng.standard_normal(size) + 1j * rng.standard_normal(size)
        lhs = float(np.real(y.conj() @ T @ y))
        rhs = 0.0
        for a, P in projs.items():
            lam = base.eigs[a - 1].lam
            Q = sum(lam**p * y[p * N:(p + 1) * N] for p in range(m))
            v = P @ (F[a] * Q)
            rhs += float(np.real(np.vdot(v, v)))
        gap = max(gap, abs(lhs - rhs) / max(1.0, abs(lhs)))
    logger.info("condition (C): m=%d, min eig %.3e, %s", m, w[0], "holds" if holds else "fails")
    return ConditionCReport(T, holds, float(w[0]), m, F, gap)
