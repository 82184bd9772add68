# svspec/service/matode.py
"""
Shooting integrator for -ψ″ + V(x)ψ = λψ on [0, 1].

φ is normalised at the left end (φ(0) = 0, φ′(0) = I) and χ at the right end
(χ(1) = 0, χ′(1) = -I). χ is never integrated backwards: it is obtained from
the reflected potential through χ(x, λ, V) = φ(1 - x, λ, V♯).

λ-derivatives come from the variational hierarchy

    ψ_k″ = (V - λ)ψ_k - k ψ_{k-1},   ψ_k = ∂ᵏφ/∂λᵏ,

integrated in the same pass, and the Gram integral S(λ) = ∫ φ*(t, λ̄) φ(t, λ) dt
is carried as an extra quadrature state. Many λ are integrated together as a
block-diagonal batch, which is what makes contour sweeps affordable.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.integrate import solve_ivp

from ..config import OdeConfig
from .exceptions import StepLimitExceeded, ToleranceNotMet
from .potential import MatrixPotential, composite_gauss_legendre

__all__: list[str] = [
    "SolutionBundle",
    "EndpointData",
    "PathData",
    "MatrixOde",
    "solve_bundle",
    "free_solution_asymptote",
    "sinc_sqrt",
]

logger = logging.getLogger(__name__)

Array = NDArray[np.complex128]


def sinc_sqrt(mu: ArrayLike) -> Array:
    """sin√μ/√μ as an entire function of μ."""
    m = np.asarray(mu, dtype=complex)
    small = np.abs(m) < 1e-4
    s = np.sqrt(np.where(small, 1.0, m))
    out = np.where(small, 1.0 - m / 6.0 + m**2 / 120.0 - m**3 / 5040.0, np.sin(s) / s)
    return out


@dataclass(frozen=True, slots=True, eq=False)
class SolutionBundle:
    lam: complex
    phi1: Array
    dphi1: Array
    chi0: Array
    dchi0: Array
    est_error: float
    phi1_dot: Optional[Array] = None
    dphi1_dot: Optional[Array] = None
    chi0_dot: Optional[Array] = None
    dchi0_dot: Optional[Array] = None
    phi1_ddot: Optional[Array] = None
    chi0_ddot: Optional[Array] = None
    gram: Optional[Array] = None


@dataclass(frozen=True, slots=True, eq=False)
class EndpointData:
    """Batch endpoint values: ``values[l, k] = ∂ᵏψ``, ``derivs[l, k] = ∂ᵏψ′``."""

    lams: NDArray[np.complex128]
    values: Array
    derivs: Array
    gram: Optional[Array]
    est_error: float


@dataclass(frozen=True, slots=True, eq=False)
class PathData:
    """Solution samples along x: ``values[i, k]`` at ``t[i]``."""

    t: NDArray[np.float64]
    values: Array
    derivs: Array


class _Shooter:
    """Integrates φ and its λ-derivatives for one potential."""

    def __init__(self, V: MatrixPotential, cfg: OdeConfig) -> None:
        self._V = V
        self._cfg = cfg
        self._n = V.dim

    def _guard(self, lams: NDArray[np.complex128]) -> float:
        top = float(np.max(np.abs(lams))) if lams.size else 0.0
        if top > self._cfg.lambda_limit:
            raise StepLimitExceeded(f"|lambda|={top:.3e} exceeds limit {self._cfg.lambda_limit:.1e}")
        scale = max(1.0, np.sqrt(top))
        max_step = self._cfg.max_step_factor / scale
        if 1.0 / max_step > self._cfg.max_steps:
            raise StepLimitExceeded(f"|lambda|={top:.3e} needs more than {self._cfg.max_steps} steps")
        return max_step

    def run(
        self,
        lams: ArrayLike,
        order: int = 0,
        gram: bool = False,
        t_eval: Optional[NDArray[np.float64]] = None,
    ) -> tuple[Array, Array, Optional[Array], float]:
        """Returns (values, derivs, gram, est_error).

        Without ``t_eval`` values have shape (L, K, N, N) at x = 1; with it,
        (T, L, K, N, N) at the requested points.
        """
        lam = np.atleast_1d(np.asarray(lams, dtype=complex))
        n, k_count = self._n, order + 1
        max_step = self._guard(lam)

        base = lam.size
        partner = np.arange(base)
        if gram:
            nonreal = np.nonzero(lam.imag != 0.0)[0]
            if nonreal.size:
                lam = np.concatenate([lam, lam[nonreal].conj()])
                partner = np.arange(lam.size)
                partner[nonreal] = base + np.arange(nonreal.size)
                partner[base:] = nonreal
        size = lam.size
        core = size * k_count * 2 * n * n

        eye = np.eye(n)
        y0 = np.zeros((size, k_count, 2, n, n), complex)
        y0[:, 0, 1] = eye
        parts = [y0.ravel()]
        if gram:
            parts.append(np.zeros(size * n * n, complex))
        state0 = np.concatenate(parts)

        weights = np.arange(1, k_count)[None, :, None, None]
        lam_col = lam[:, None, None]
        values_at = self._V.values

        def rhs(x: float, y: Array) -> Array:
            Y = y[:core].reshape(size, k_count, 2, n, n)
            A = values_at(x)[None] - lam_col * eye
            dY = np.empty_like(Y)
            dY[:, :, 0] = Y[:, :, 1]
            dY[:, :, 1] = np.matmul(A[:, None], Y[:, :, 0])
            if k_count > 1:
                dY[:, 1:, 1] -= weights * Y[:, :-1, 0]
            if not gram:
                return dY.ravel()
            phi = Y[:, 0, 0]
            dG = np.matmul(np.swapaxes(phi[partner].conj(), 1, 2), phi)
            return np.concatenate([dY.ravel(), dG.ravel()])

        # 各分量的绝对容差按自由解的量级缩放
        scale = max(1.0, float(np.sqrt(np.max(np.abs(lam)))))
        tol = self._cfg.rel_tol
        atol_blocks = np.empty((k_count, 2))
        for k in range(k_count):
            atol_blocks[k, 0] = tol * scale ** (-(2 * k + 1))
            atol_blocks[k, 1] = tol * scale ** (-2 * k)
        atol = np.broadcast_to(atol_blocks[None, :, :, None, None], (size, k_count, 2, n, n)).ravel()
        if gram:
            atol = np.concatenate([atol, np.full(size * n * n, tol * scale**-2)])

        sol = solve_ivp(
            rhs,
            (0.0, 1.0),
            state0,
            method=self._cfg.method,
            rtol=tol,
            atol=atol,
            max_step=max_step,
            t_eval=t_eval,
        )
        if sol.status < 0:
            raise ToleranceNotMet(f"integration failed at lambda batch of size {base}: {sol.message}")
        steps = max(1.0, sol.nfev / 12.0)
        y_end = sol.y[:, -1]
        est = float(tol * steps * max(1.0, np.max(np.abs(y_end[:core]))))
        logger.debug("shooting batch L=%d order=%d: nfev=%d est_error=%.2e", base, order, sol.nfev, est)

        if t_eval is None:
            Y = y_end[:core].reshape(size, k_count, 2, n, n)[:base]
            G = y_end[core:].reshape(size, n, n)[:base] if gram else None
            return Y[:, :, 0], Y[:, :, 1], G, est
        Ys = sol.y[:core].T.reshape(len(sol.t), size, k_count, 2, n, n)[:, :base]
        return Ys[..., 0, :, :], Ys[..., 1, :, :], None, est


class MatrixOde:
    """Fundamental solutions φ, χ of one potential at arbitrary complex λ."""

    def __init__(self, V: MatrixPotential, cfg: Optional[OdeConfig] = None) -> None:
        self.V = V
        self.cfg = cfg or OdeConfig()
        self._phi = _Shooter(V, self.cfg)
        self._chi = _Shooter(V.reflect(), self.cfg)

    @property
    def dim(self) -> int:
        return self.V.dim

    # -------- Endpoints --------

    def phi_endpoint(self, lams: ArrayLike, order: int = 0, gram: bool = False) -> EndpointData:
        lam = np.atleast_1d(np.asarray(lams, dtype=complex))
        vals, ders, g, est = self._phi.run(lam, order, gram)
        return EndpointData(lam, vals, ders, g, est)

    def chi_endpoint(self, lams: ArrayLike, order: int = 0) -> EndpointData:
        """χ(0, λ) and χ′(0, λ) (and λ-derivatives)."""
        lam = np.atleast_1d(np.asarray(lams, dtype=complex))
        vals, ders, _, est = self._chi.run(lam, order, False)
        return EndpointData(lam, vals, -ders, None, est)

    def bundles(
        self,
        lams: ArrayLike,
        *,
        lambda_derivs: bool = False,
        gram: bool = False,
        second: bool = False,
    ) -> list[SolutionBundle]:
        order = 2 if second else (1 if lambda_derivs else 0)
        phi = self.phi_endpoint(lams, order, gram)
        chi = self.chi_endpoint(lams, order)
        out: list[SolutionBundle] = []
        for i, lam in enumerate(phi.lams):
            extra: dict[str, Array] = {}
            if order >= 1:
                extra.update(
                    phi1_dot=phi.values[i, 1], dphi1_dot=phi.derivs[i, 1],
                    chi0_dot=chi.values[i, 1], dchi0_dot=chi.derivs[i, 1],
                )
            if order >= 2:
                extra.update(phi1_ddot=phi.values[i, 2], chi0_ddot=chi.values[i, 2])
            if gram and phi.gram is not None:
                extra["gram"] = phi.gram[i]
            out.append(SolutionBundle(
                lam=complex(lam),
                phi1=phi.values[i, 0], dphi1=phi.derivs[i, 0],
                chi0=chi.values[i, 0], dchi0=chi.derivs[i, 0],
                est_error=max(phi.est_error, chi.est_error),
                **extra,
            ))
        return out

    def bundle(self, lam: complex, *, lambda_derivs: bool = False, gram: bool = False, second: bool = False) -> SolutionBundle:
        return self.bundles([lam], lambda_derivs=lambda_derivs, gram=gram, second=second)[0]

    # -------- Paths --------

    def phi_path(self, lam: complex, t: ArrayLike, order: int = 0) -> PathData:
        ts = np.asarray(t, dtype=float)
        idx = np.argsort(ts)
        vals, ders, _, _ = self._phi.run([lam], order, False, t_eval=ts[idx])
        inv = np.argsort(idx)
        return PathData(ts, vals[inv, 0], ders[inv, 0])

    def chi_path(self, lam: complex, t: ArrayLike, order: int = 0) -> PathData:
        """χ(t) = φ(1 - t; V♯), χ′(t) = -φ′(1 - t; V♯)."""
        ts = np.asarray(t, dtype=float)
        s = 1.0 - ts
        idx = np.argsort(s)
        vals, ders, _, _ = self._chi.run([lam], order, False, t_eval=np.clip(s[idx], 0.0, 1.0))
        inv = np.argsort(idx)
        return PathData(ts, vals[inv, 0], -ders[inv, 0])


def solve_bundle(
    V: MatrixPotential,
    lam: complex,
    cfg: Optional[OdeConfig] = None,
    *,
    lambda_derivs: bool = False,
    gram: bool = False,
    second: bool = False,
) -> SolutionBundle:
    return MatrixOde(V, cfg).bundle(lam, lambda_derivs=lambda_derivs, gram=gram, second=second)


def free_solution_asymptote(V: MatrixPotential, z: complex) -> Array:
    """sin z/z·I + z⁻² ∫ sin z(1-t) V(t) sin zt dt, the two leading terms of φ(1, z²)."""
    if abs(z) < 1.0:
        raise ValueError("free_solution_asymptote needs |z| >= 1")
    panels = max(64, int(2 * abs(z)))
    t, w = composite_gauss_legendre(panels, 8)
    kernel = w * np.sin(z * (1.0 - t)) * np.sin(z * t)
    integral = np.einsum("t,tij->ij", kernel, V.values(t))
    return np.sin(z) / z * np.eye(V.dim) + integral / z**2
