# svspec/service/potential.py
"""
矩阵势函数: N×N Hermitian potentials on [0, 1].

Two representations are supported. A *fourier* potential stores V̂⁰ and the
coefficients V̂ᶜⁿ, V̂ˢⁿ and evaluates

    V(x) = V̂⁰ + 2 Σₙ (V̂ᶜⁿ cos 2πnx + V̂ˢⁿ sin 2πnx),

so that V̂ᶜⁿ = ∫ V cos 2πnt dt. A *grid* potential stores M+1 uniform samples
and interpolates with 4-point Lagrange stencils.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Literal, Optional, Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import PotentialConfig
from ..store.models import HarmonicModel, GridModel, PotentialFile, matrix_to_pairs, pairs_to_matrix
from .exceptions import BadKind, DegenerateMean, NotHermitian, OutOfDomain, ParseError

__all__: list[str] = [
    "HermitianMatrix",
    "MatrixPotential",
    "DiagonalizedPotential",
    "CoefficientKind",
    "composite_gauss_legendre",
    "load_potential",
    "evaluate",
    "fourier_coefficient",
    "diagonalize_mean",
    "reflect",
]

logger = logging.getLogger(__name__)

CoefficientKind = Literal["mean", "cos", "sin", "weighted_sin"]
_KINDS: tuple[str, ...] = ("mean", "cos", "sin", "weighted_sin")

Array = NDArray[np.complex128]


def composite_gauss_legendre(panels: int, order: int = 8) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Nodes and weights of composite Gauss–Legendre quadrature on [0, 1]."""
    if panels < 1:
        raise ValueError("panels must be positive")
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(0.0, 1.0, panels + 1)
    half = 0.5 * np.diff(edges)
    mid = 0.5 * (edges[:-1] + edges[1:])
    nodes = (mid[:, None] + half[:, None] * x[None, :]).ravel()
    weights = (half[:, None] * w[None, :]).ravel()
    return nodes, weights


def _worst_hermitian_violation(a: Array) -> tuple[float, tuple[int, ...]]:
    gap = np.abs(a - np.swapaxes(a, -1, -2).conj())
    idx = np.unravel_index(int(np.argmax(gap)), gap.shape)
    return float(gap[idx]), tuple(int(i) for i in idx)


def _check_hermitian(a: Array, tol: float, what: str) -> None:
    if a.size == 0:
        return
    worst, idx = _worst_hermitian_violation(a)
    if worst > tol:
        raise NotHermitian(f"{what}: entry {idx} violates Hermitian symmetry by {worst:.3e}")


def _frozen(a: ArrayLike, dtype: type = complex) -> NDArray:
    arr = np.array(a, dtype=dtype)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, slots=True, eq=False)
class HermitianMatrix:
    """N×N complex matrix; ``hermitian`` is False for general matrices."""

    entries: Array
    hermitian: bool = True

    def __post_init__(self) -> None:
        arr = np.atleast_2d(np.asarray(self.entries, dtype=complex))
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {arr.shape}")
        object.__setattr__(self, "entries", _frozen(arr))

    @classmethod
    def checked(cls, entries: ArrayLike, tol: float = 1e-12) -> "HermitianMatrix":
        arr = np.atleast_2d(np.asarray(entries, dtype=complex))
        _check_hermitian(arr, tol, "matrix")
        return cls(arr, hermitian=True)

    @property
    def dim(self) -> int:
        return int(self.entries.shape[0])

    def __array__(self, dtype=None, copy=None) -> Array:
        return np.asarray(self.entries, dtype=dtype)

    def norm(self) -> float:
        return float(np.linalg.norm(self.entries, 2))


@dataclass(frozen=True, slots=True, eq=False)
class MatrixPotential:
    """Self-adjoint (or, internally, complex-perturbed) matrix potential on [0, 1]."""

    dim: int
    kind: Literal["fourier", "grid"]
    mean: Optional[Array] = None
    cos: Optional[Array] = None
    sin: Optional[Array] = None
    samples: Optional[Array] = None
    hermitian: bool = True
    _freqs: NDArray[np.float64] = field(init=False, repr=False)

    def __post_init__(self) -> None:
        n = self.dim
        if self.kind == "fourier":
            mean = np.zeros((n, n), complex) if self.mean is None else np.asarray(self.mean, complex)
            cos = np.zeros((0, n, n), complex) if self.cos is None else np.asarray(self.cos, complex)
            sin = np.zeros((0, n, n), complex) if self.sin is None else np.asarray(self.sin, complex)
            h = max(cos.shape[0], sin.shape[0])
            cos = np.concatenate([cos, np.zeros((h - cos.shape[0], n, n), complex)])
            sin = np.concatenate([sin, np.zeros((h - sin.shape[0], n, n), complex)])
            if mean.shape != (n, n):
                raise ValueError(f"mean must be {n}x{n}")
            object.__setattr__(self, "mean", _frozen(mean))
            object.__setattr__(self, "cos", _frozen(cos))
            object.__setattr__(self, "sin", _frozen(sin))
            object.__setattr__(self, "_freqs", _frozen(2.0 * np.pi * np.arange(1, h + 1), float))
        elif self.kind == "grid":
            if self.samples is None:
                raise ValueError("grid potential requires samples")
            samples = np.asarray(self.samples, complex)
            if samples.ndim != 3 or samples.shape[1:] != (n, n):
                raise ValueError(f"samples must have shape (M+1, {n}, {n})")
            if samples.shape[0] < 65:
                raise ValueError("grid representation needs M >= 64")
            object.__setattr__(self, "samples", _frozen(samples))
            object.__setattr__(self, "_freqs", _frozen(np.zeros(0), float))
        else:
            raise ValueError(f"unknown representation {self.kind!r}")

    # -------- Constructors --------

    @classmethod
    def zero(cls, dim: int) -> "MatrixPotential":
        return cls(dim=dim, kind="fourier")

    @classmethod
    def constant(cls, mean: ArrayLike, tol_herm: float = 1e-12) -> "MatrixPotential":
        m = np.atleast_2d(np.asarray(mean, complex))
        return cls.from_fourier(m, tol_herm=tol_herm)

    @classmethod
    def from_fourier(
        cls,
        mean: ArrayLike,
        cos: Optional[dict[int, ArrayLike]] = None,
        sin: Optional[dict[int, ArrayLike]] = None,
        *,
        hermitian: bool = True,
        tol_herm: float = 1e-12,
    ) -> "MatrixPotential":
        """Build from V̂⁰ and harmonic dictionaries ``{n: V̂ᶜⁿ}``, ``{n: V̂ˢⁿ}``."""
        m = np.atleast_2d(np.asarray(mean, complex))
        n = m.shape[0]
        cos, sin = cos or {}, sin or {}
        if any(k < 1 for k in (*cos, *sin)):
            raise BadKind("harmonic numbers must be >= 1")
        h = max([0, *cos, *sin])
        c = np.zeros((h, n, n), complex)
        s = np.zeros((h, n, n), complex)
        for k, v in cos.items():
            c[k - 1] = np.atleast_2d(np.asarray(v, complex))
        for k, v in sin.items():
            s[k - 1] = np.atleast_2d(np.asarray(v, complex))
        if hermitian:
            _check_hermitian(m, tol_herm, "mean")
            _check_hermitian(c, tol_herm, "cos coefficients")
            _check_hermitian(s, tol_herm, "sin coefficients")
        return cls(dim=n, kind="fourier", mean=m, cos=c, sin=s, hermitian=hermitian)

    @classmethod
    def from_grid(cls, samples: ArrayLike, *, hermitian: bool = True, tol_herm: float = 1e-12) -> "MatrixPotential":
        arr = np.asarray(samples, complex)
        if arr.ndim == 1:
            arr = arr[:, None, None]
        if hermitian:
            _check_hermitian(arr, tol_herm, "grid samples")
        return cls(dim=arr.shape[1], kind="grid", samples=arr, hermitian=hermitian)

    @classmethod
    def from_function(cls, fn: Callable[[NDArray[np.float64]], ArrayLike], grid_size: int = 256, dim: int = 1) -> "MatrixPotential":
        """Sample ``fn`` (vectorised over x, returning (..., N, N) or scalars) on a uniform grid."""
        x = np.linspace(0.0, 1.0, grid_size + 1)
        vals = np.asarray(fn(x), complex).reshape(grid_size + 1, dim, dim)
        return cls.from_grid(vals)

    @classmethod
    def diagonal(cls, channels: Sequence["MatrixPotential"]) -> "MatrixPotential":
        """Diagonal potential diag(v₁₁, …, v_NN) from scalar channels."""
        if any(c.dim != 1 for c in channels):
            raise ValueError("diagonal channels must be scalar potentials")
        n = len(channels)
        if all(c.kind == "fourier" for c in channels):
            h = max(c.cos.shape[0] for c in channels)  # type: ignore[union-attr]
            mean = np.diag([c.mean[0, 0] for c in channels])  # type: ignore[index]
            cos = np.zeros((h, n, n), complex)
            sin = np.zeros((h, n, n), complex)
            for j, c in enumerate(channels):
                k = c.cos.shape[0]  # type: ignore[union-attr]
                cos[:k, j, j] = c.cos[:, 0, 0]  # type: ignore[index]
                sin[:k, j, j] = c.sin[:, 0, 0]  # type: ignore[index]
            herm = all(c.hermitian for c in channels)
            return cls(dim=n, kind="fourier", mean=mean, cos=cos, sin=sin, hermitian=herm)
        size = max(c.grid_size for c in channels)
        x = np.linspace(0.0, 1.0, size + 1)
        samples = np.zeros((size + 1, n, n), complex)
        for j, c in enumerate(channels):
            samples[:, j, j] = c.values(x)[:, 0, 0]
        return cls(dim=n, kind="grid", samples=samples, hermitian=all(c.hermitian for c in channels))

    @classmethod
    def random_trig(
        cls,
        rng: np.random.Generator,
        dim: int,
        harmonics: int = 3,
        scale: float = 1.0,
        *,
        mean: Optional[ArrayLike] = None,
        real: bool = False,
    ) -> "MatrixPotential":
        """Random band-limited Hermitian potential with coefficients decaying like 1/n."""
        def herm() -> Array:
            a = rng.standard_normal((dim, dim))
            if not real:
                a = a + 1j * rng.standard_normal((dim, dim))
            return 0.5 * (a + a.conj().T)

        cos = {n: scale * herm() / (2.0 * n) for n in range(1, harmonics + 1)}
        sin = {n: scale * herm() / (2.0 * n) for n in range(1, harmonics + 1)}
        m = np.zeros((dim, dim)) if mean is None else mean
        return cls.from_fourier(m, cos, sin, tol_herm=1e-10)

    # -------- Evaluation --------

    @property
    def harmonics(self) -> int:
        return int(self._freqs.shape[0])

    @property
    def grid_size(self) -> int:
        return 0 if self.samples is None else int(self.samples.shape[0] - 1)

    def values(self, x: ArrayLike) -> Array:
        """V at one or many points; returns shape ``x.shape + (N, N)``."""
        xs = np.asarray(x, dtype=float)
        if np.any(xs < -1e-14) or np.any(xs > 1.0 + 1e-14):
            raise OutOfDomain(f"x outside [0, 1]: {xs.min() if xs.size else xs!r}..{xs.max() if xs.size else xs!r}")
        flat = np.clip(xs.ravel(), 0.0, 1.0)
        if self.kind == "fourier":
            out = self._fourier_values(flat)
        else:
            out = self._grid_values(flat)
        return out.reshape(xs.shape + (self.dim, self.dim))

    def _fourier_values(self, x: NDArray[np.float64]) -> Array:
        assert self.mean is not None and self.cos is not None and self.sin is not None
        out = np.broadcast_to(self.mean, (x.size, self.dim, self.dim)).copy()
        if self.harmonics:
            phase = np.outer(x, self._freqs)
            out += 2.0 * (np.einsum("th,hij->tij", np.cos(phase), self.cos)
                          + np.einsum("th,hij->tij", np.sin(phase), self.sin))
        return out

    def _grid_values(self, x: NDArray[np.float64]) -> Array:
        assert self.samples is not None
        m = self.grid_size
        s = x * m
        i = np.clip(np.floor(s).astype(int), 1, m - 2)
        u = (s - i)[:, None, None]
        w_m1 = -u * (u - 1.0) * (u - 2.0) / 6.0
        w_0 = (u + 1.0) * (u - 1.0) * (u - 2.0) / 2.0
        w_1 = -(u + 1.0) * u * (u - 2.0) / 2.0
        w_2 = (u + 1.0) * u * (u - 1.0) / 6.0
        sm = self.samples
        return w_m1 * sm[i - 1] + w_0 * sm[i] + w_1 * sm[i + 1] + w_2 * sm[i + 2]

    def evaluate(self, x: float) -> HermitianMatrix:
        return HermitianMatrix(self.values(x), hermitian=self.hermitian)

    def mean_matrix(self) -> Array:
        return np.asarray(self.fourier_coefficient("mean", 0))

    def _quadrature(self, weight: Callable[[NDArray[np.float64]], NDArray[np.float64]]) -> Array:
        panels = max(8, self.grid_size // 8)
        t, w = composite_gauss_legendre(panels, 8)
        return np.einsum("t,tij->ij", w * weight(t), self.values(t))

    def fourier_coefficient(self, kind: str, n: int) -> HermitianMatrix:
        if kind not in _KINDS:
            raise BadKind(f"unknown coefficient kind {kind!r}")
        if n < 0 or (kind != "mean" and n < 1):
            raise BadKind(f"harmonic n={n} not allowed for kind {kind!r}")
        if self.kind == "grid":
            weights: dict[str, Callable[[NDArray[np.float64]], NDArray[np.float64]]] = {
                "mean": lambda t: np.ones_like(t),
                "cos": lambda t: np.cos(2 * np.pi * n * t),
                "sin": lambda t: np.sin(2 * np.pi * n * t),
                "weighted_sin": lambda t: (1.0 - t) * np.sin(2 * np.pi * n * t),
            }
            return HermitianMatrix(self._quadrature(weights[kind]), hermitian=self.hermitian)
        assert self.mean is not None and self.cos is not None and self.sin is not None
        zero = np.zeros((self.dim, self.dim), complex)
        h = self.harmonics
        if kind == "mean":
            out = self.mean.copy()
        elif kind == "cos":
            out = self.cos[n - 1].copy() if n <= h else zero
        elif kind == "sin":
            out = self.sin[n - 1].copy() if n <= h else zero
        else:
            out = self._weighted_sin(n)
        return HermitianMatrix(out, hermitian=self.hermitian)

    def _weighted_sin(self, n: int) -> Array:
        # ∫(1-t) sin 2πkt dt = 1/(2πk) for k ≠ 0; ∫(1-t) sin 2πmt sin 2πnt dt = δ_mn / 4
        def s(k: int) -> float:
            return 0.0 if k == 0 else 1.0 / (2.0 * np.pi * k)

        assert self.mean is not None and self.cos is not None and self.sin is not None
        out = self.mean * s(n)
        for m in range(1, self.harmonics + 1):
            out = out + self.cos[m - 1] * (s(n + m) + s(n - m))
        if n <= self.harmonics:
            out = out + 0.5 * self.sin[n - 1]
        return out

    def sup_norm(self, points: int = 1025) -> float:
        """sup over a uniform grid of the operator norm of V(x)."""
        vals = self.values(np.linspace(0.0, 1.0, points))
        return float(np.max(np.linalg.norm(vals, ord=2, axis=(1, 2))))

    # -------- Transformations --------

    def reflect(self) -> "MatrixPotential":
        """V♯(x) = V(1 - x)."""
        if self.kind == "fourier":
            return MatrixPotential(self.dim, "fourier", self.mean, self.cos,
                                   None if self.sin is None else -self.sin, hermitian=self.hermitian)
        assert self.samples is not None
        return MatrixPotential(self.dim, "grid", samples=self.samples[::-1], hermitian=self.hermitian)

    def conjugate_by(self, unitary: ArrayLike) -> "MatrixPotential":
        """U* V(x) U."""
        u = np.asarray(unitary, complex)

        def conj(a: Optional[Array]) -> Optional[Array]:
            return None if a is None else np.einsum("ki,...kl,lj->...ij", u.conj(), a, u)

        if self.kind == "fourier":
            return MatrixPotential(self.dim, "fourier", conj(self.mean), conj(self.cos), conj(self.sin),
                                   hermitian=self.hermitian)
        return MatrixPotential(self.dim, "grid", samples=conj(self.samples), hermitian=self.hermitian)

    def shifted(self, c: float) -> "MatrixPotential":
        """V + cI."""
        return self + MatrixPotential.constant(c * np.eye(self.dim))

    def channel(self, j: int) -> "MatrixPotential":
        """Scalar potential of the diagonal entry v_jj."""
        if self.kind == "fourier":
            assert self.mean is not None and self.cos is not None and self.sin is not None
            return MatrixPotential(1, "fourier", self.mean[j:j + 1, j:j + 1], self.cos[:, j:j + 1, j:j + 1],
                                   self.sin[:, j:j + 1, j:j + 1], hermitian=self.hermitian)
        assert self.samples is not None
        return MatrixPotential(1, "grid", samples=self.samples[:, j:j + 1, j:j + 1], hermitian=self.hermitian)

    def is_diagonal(self, tol: float = 1e-14) -> bool:
        mask = ~np.eye(self.dim, dtype=bool)
        arrays = [self.samples] if self.kind == "grid" else [self.mean, self.cos, self.sin]
        return all(a is None or a.size == 0 or float(np.max(np.abs(a[..., mask]))) <= tol for a in arrays)

    def to_grid(self, grid_size: int) -> "MatrixPotential":
        x = np.linspace(0.0, 1.0, grid_size + 1)
        return MatrixPotential(self.dim, "grid", samples=self.values(x), hermitian=self.hermitian)

    def __add__(self, other: "MatrixPotential") -> "MatrixPotential":
        if not isinstance(other, MatrixPotential):
            return NotImplemented
        if other.dim != self.dim:
            raise ValueError("potential dimensions differ")
        herm = self.hermitian and other.hermitian
        if self.kind == "fourier" and other.kind == "fourier":
            assert self.cos is not None and other.cos is not None and self.sin is not None and other.sin is not None
            h = max(self.harmonics, other.harmonics)

            def pad(a: Array) -> Array:
                return np.concatenate([a, np.zeros((h - a.shape[0],) + a.shape[1:], complex)])

            return MatrixPotential(self.dim, "fourier", self.mean + other.mean,  # type: ignore[operator]
                                   pad(self.cos) + pad(other.cos), pad(self.sin) + pad(other.sin), hermitian=herm)
        size = max(self.grid_size, other.grid_size, 256)
        x = np.linspace(0.0, 1.0, size + 1)
        return MatrixPotential(self.dim, "grid", samples=self.values(x) + other.values(x), hermitian=herm)

    def __mul__(self, scale: complex) -> "MatrixPotential":
        herm = self.hermitian and float(np.imag(scale)) == 0.0
        if self.kind == "fourier":
            return MatrixPotential(self.dim, "fourier", scale * self.mean, scale * self.cos,  # type: ignore[operator]
                                   scale * self.sin, hermitian=herm)  # type: ignore[operator]
        return MatrixPotential(self.dim, "grid", samples=scale * self.samples, hermitian=herm)  # type: ignore[operator]

    __rmul__ = __mul__

    def __sub__(self, other: "MatrixPotential") -> "MatrixPotential":
        return self + (-1.0) * other

    # -------- File model --------

    @classmethod
    def from_file_model(cls, model: PotentialFile, cfg: Optional[PotentialConfig] = None) -> "MatrixPotential":
        cfg = cfg or PotentialConfig()
        if model.representation == "grid":
            assert model.grid is not None
            if model.grid.M < cfg.min_grid:
                raise ParseError(f"grid has M={model.grid.M} < {cfg.min_grid} intervals")
            samples = np.stack([pairs_to_matrix(s) for s in model.grid.samples])
            return cls.from_grid(samples, tol_herm=cfg.tol_herm)
        assert model.mean is not None
        cos = {h.n: pairs_to_matrix(h.M) for h in model.cos}
        sin = {h.n: pairs_to_matrix(h.M) for h in model.sin}
        return cls.from_fourier(pairs_to_matrix(model.mean), cos, sin, tol_herm=cfg.tol_herm)

    def to_file_model(self) -> PotentialFile:
        if self.kind == "grid":
            assert self.samples is not None
            grid = GridModel(M=self.grid_size, samples=[matrix_to_pairs(s) for s in self.samples])
            return PotentialFile(N=self.dim, representation="grid", grid=grid)
        assert self.mean is not None and self.cos is not None and self.sin is not None
        cos = [HarmonicModel(n=i + 1, M=matrix_to_pairs(c)) for i, c in enumerate(self.cos) if np.any(c)]
        sin = [HarmonicModel(n=i + 1, M=matrix_to_pairs(s)) for i, s in enumerate(self.sin) if np.any(s)]
        return PotentialFile(N=self.dim, representation="fourier", mean=matrix_to_pairs(self.mean), cos=cos, sin=sin)


@dataclass(frozen=True, slots=True, eq=False)
class DiagonalizedPotential:
    potential: MatrixPotential
    unitary: Array
    v0: NDArray[np.float64]


# -------- Module-level operations --------

def load_potential(path: str | Path, cfg: Optional[PotentialConfig] = None) -> MatrixPotential:
    """Parse and validate a potential JSON file."""
    # store.repository 依赖 service.exceptions, 模块级导入会成环
    from ..store.repository import potential_repository

    model = potential_repository().get(path)
    pot = MatrixPotential.from_file_model(model, cfg)
    logger.info("loaded %s potential N=%d from %s", pot.kind, pot.dim, path)
    return pot


def evaluate(V: MatrixPotential, x: float) -> HermitianMatrix:
    return V.evaluate(x)


def fourier_coefficient(V: MatrixPotential, kind: str, n: int) -> HermitianMatrix:
    return V.fourier_coefficient(kind, n)


def reflect(V: MatrixPotential) -> MatrixPotential:
    return V.reflect()


def diagonalize_mean(V: MatrixPotential, cfg: Optional[PotentialConfig] = None) -> DiagonalizedPotential:
    """Conjugate V by the unitary that diagonalises its mean, eigenvalues ascending."""
    cfg = cfg or PotentialConfig()
    mean = V.mean_matrix()
    w, u = np.linalg.eigh(0.5 * (mean + mean.conj().T))
    gaps = np.diff(w)
    if gaps.size and float(gaps.min()) <= cfg.gap_min:
        j = int(np.argmin(gaps))
        raise DegenerateMean(f"mean eigenvalues {w[j]:.12g} and {w[j + 1]:.12g} closer than gap_min={cfg.gap_min:g}")
    # 相位约定: 每列模最大的分量取正实数
    for j in range(u.shape[1]):
        i = int(np.argmax(np.abs(u[:, j])))
        u[:, j] *= np.conj(u[i, j]) / abs(u[i, j])
    conj = V.conjugate_by(u)
    logger.debug("diagonalized mean: v0=%s", w)
    return DiagonalizedPotential(potential=conj, unitary=u, v0=w.astype(float))
