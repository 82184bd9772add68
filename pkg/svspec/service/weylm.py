# svspec/service/weylm.py
"""
Weyl–Titchmarsh function M(λ) = χ′(0, λ)χ(0, λ)⁻¹, evaluated directly by
shooting or rebuilt from spectral data through the regularised pole series

    M(λ) = -Σ_j √(λ-v_j)cot√(λ-v_j) P_j⁰
           + Σ_{α≤α⋄} B_α/(λ_α-λ) - Σ_{n<n⋄} Σ_j 2π²n² P_j⁰/(π²n²+v_j-λ)
           + Σ_{n≥n⋄} Σ_j [B_{n,j}/(λ_{n,j}-λ) - 2π²n² P_j⁰/(π²n²+v_j-λ)].

Each shell keeps its counter-term inside the summand; the series only
converges in that pairing.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional, Protocol, Union

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ..config import SeriesConfig, SvspecSettings
from .exceptions import InsufficientShells, NearPole, TailTooLarge
from .matode import MatrixOde
from .potential import MatrixPotential
from .spectraldata import SpectralDataset

__all__: list[str] = [
    "WeylEvaluation",
    "SeriesEvaluation",
    "WeylSeries",
    "sqrt_cot",
    "evaluate_M",
    "reconstruct_M",
    "scalar_m",
]

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]

NEAR_POLE_COND = 1e12
# 级数至少覆盖 n⋄..n⋄+10
MIN_EXTRA_SHELLS = 10


def sqrt_cot(mu: ArrayLike) -> Array:
    """√μ cot √μ, even in √μ, so no branch choice enters."""
    m = np.asarray(mu, dtype=complex)
    small = np.abs(m) < 1e-4
    s = np.sqrt(np.where(small, 1.0, m))
    series = 1.0 - m / 3.0 - m**2 / 45.0 - 2.0 * m**3 / 945.0
    return np.where(small, series, s / np.tan(s))


@dataclass(frozen=True, slots=True, eq=False)
class WeylEvaluation:
    lam: complex
    M: Array
    cond: float


@dataclass(frozen=True, slots=True, eq=False)
class SeriesEvaluation:
    lam: complex
    M: Array
    n_max: int
    tail_estimate: float


def evaluate_M(
    V: MatrixPotential,
    lam: complex,
    settings: Optional[SvspecSettings] = None,
    ode: Optional[MatrixOde] = None,
) -> WeylEvaluation:
    settings = settings or SvspecSettings()
    ode = ode or MatrixOde(V, settings.ode)
    data = ode.chi_endpoint([lam])
    chi, dchi = data.values[0, 0], data.derivs[0, 0]
    cond = float(np.linalg.cond(chi))
    if not np.isfinite(cond) or cond > NEAR_POLE_COND:
        raise NearPole(f"lambda={lam}: cond(chi(0)) = {cond:.3e}")
    return WeylEvaluation(complex(lam), dchi @ np.linalg.inv(chi), cond)


class WeylSeries:
    """Pole series of M built once from a dataset and evaluated at many λ."""

    def __init__(self, ds: SpectralDataset, cfg: Optional[SeriesConfig] = None) -> None:
        self.cfg = cfg or SeriesConfig()
        self.dim = ds.dim
        self.v0 = np.asarray(ds.v0, float)
        self.n_diamond = ds.n_diamond

        low = ds.low_records()
        self._low_lams = np.array([r.lam for r in low], float)
        self._low_B = np.array([r.B for r in low], complex).reshape(len(low), self.dim, self.dim)

        computed = ds.shells()
        n_max = self.cfg.n_max if self.cfg.n_max is not None else (computed[-1] if computed else 0)
        if n_max < ds.n_diamond + MIN_EXTRA_SHELLS:
            raise InsufficientShells(
                f"n_max={n_max} below n_diamond+{MIN_EXTRA_SHELLS}={ds.n_diamond + MIN_EXTRA_SHELLS}"
            )
        shells = [n for n in computed if n <= n_max]
        if shells != list(range(ds.n_diamond, n_max + 1)):
            last = computed[-1] if computed else None
            raise InsufficientShells(f"dataset is not complete up to n_max={n_max} (last shell {last})")
        logger.debug("series over shells %d..%d", ds.n_diamond, n_max)
        self.shells = np.asarray(shells, int)
        self._shell_lams = np.array([[r.lam for r in ds.shell(n)] for n in shells], float).reshape(len(shells), self.dim)
        self._shell_B = np.array([[r.B for r in ds.shell(n)] for n in shells], complex).reshape(
            len(shells), self.dim, self.dim, self.dim
        )

    @property
    def n_max(self) -> int:
        return int(self.shells[-1]) if self.shells.size else self.n_diamond - 1

    def _poles(self) -> NDArray[np.float64]:
        return np.concatenate([self._low_lams, self._shell_lams.ravel()])

    def shell_terms(self, lam: complex) -> Array:
        """Paired summands for each computed shell, shape (L, N, N)."""
        n = self.shells.astype(float)
        free = np.pi**2 * n[:, None] ** 2 + self.v0[None, :] - lam
        terms = np.einsum("lj,ljab->lab", 1.0 / (self._shell_lams - lam), self._shell_B)
        counter = 2.0 * np.pi**2 * n[:, None] ** 2 / free
        idx = np.arange(self.dim)
        terms[:, idx, idx] -= counter
        return terms

    def _tail(self, lam: complex, terms: Array) -> float:
        if terms.shape[0] == 0:
            return 0.0
        L = int(self.shells[-1])
        z = lam / np.pi**2
        last = float(np.linalg.norm(terms[-1], 2)) * abs(L**2 - z)
        rest = np.arange(L + 1, 20 * L + 1, dtype=float)
        return last * (float(np.sum(1.0 / np.abs(rest**2 - z))) + 1.0 / (20.0 * L))

    def evaluate(self, lam: complex) -> SeriesEvaluation:
        lam = complex(lam)
        poles = self._poles()
        if poles.size and float(np.min(np.abs(poles - lam))) < 1e-10 * max(1.0, abs(lam)):
            raise NearPole(f"lambda={lam} coincides with an eigenvalue")
        N = self.dim
        M = np.zeros((N, N), complex)
        idx = np.arange(N)
        M[idx, idx] -= sqrt_cot(lam - self.v0)
        if self._low_lams.size:
            M += np.einsum("a,aij->ij", 1.0 / (self._low_lams - lam), self._low_B)
        for n in range(1, self.n_diamond):
            M[idx, idx] -= 2.0 * np.pi**2 * n**2 / (np.pi**2 * n**2 + self.v0 - lam)
        terms = self.shell_terms(lam)
        M += terms.sum(axis=0)
        tail = self._tail(lam, terms)
        if self.cfg.tail_mode == "estimate" and tail > self.cfg.tail_tol * max(1.0, float(np.linalg.norm(M, 2))):
            raise TailTooLarge(f"lambda={lam}: tail estimate {tail:.3e} above {self.cfg.tail_tol:g} at n_max={self.n_max}")
        return SeriesEvaluation(lam, M, self.n_max, tail)


def reconstruct_M(ds: SpectralDataset, lam: complex, cfg: Optional[SeriesConfig] = None) -> Array:
    return WeylSeries(ds, cfg).evaluate(lam).M


class _ScalarData(Protocol):
    dirichlet: NDArray[np.float64]
    alpha: Optional[NDArray[np.float64]]

    @property
    def q0(self) -> float: ...


def scalar_m(data: Union[SpectralDataset, _ScalarData], lam: complex, q0: Optional[float] = None) -> complex:
    """Scalar m(λ) with residues -1/α_n at the Dirichlet eigenvalues."""
    if isinstance(data, SpectralDataset):
        if data.dim != 1:
            raise ValueError("scalar_m needs a scalar (N=1) dataset")
        return complex(reconstruct_M(data, lam)[0, 0])
    lam = complex(lam)
    if data.alpha is None:
        raise ValueError("scalar_m needs normalizing constants alpha")
    lams = np.asarray(data.dirichlet, float)
    alpha = np.asarray(data.alpha, float)
    if np.any(np.abs(lams - lam) < 1e-10 * max(1.0, abs(lam))):
        raise NearPole(f"lambda={lam} coincides with an eigenvalue")
    shift = data.q0 if q0 is None else q0
    n = np.arange(1, lams.size + 1, dtype=float)
    free = 2.0 * np.pi**2 * n**2 / (np.pi**2 * n**2 + shift - lam)
    total = np.sum(1.0 / (alpha * (lams - lam)) - free)
    return complex(-sqrt_cot(lam - shift) + total)
