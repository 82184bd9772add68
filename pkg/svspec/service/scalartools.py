# svspec/service/scalartools.py
"""
标量 (N=1) 谱数据工具.

Converts between the classical parametrisations of scalar spectral data
(mixed spectrum μ, normalizing constants α, norming constants ν), evaluates
the Hadamard products

    f(λ) = Π (λ_m - λ)/(π²m²) = φ(1, λ),    g(λ) = Π (μ_m - λ)/(π²(m-½)²) = φ′(1, λ),

checks the scalar characterization and applies the discrete Hilbert
transforms in their split-kernel form.
"""
from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Literal, NamedTuple, Optional

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.optimize import brentq
from scipy.special import zeta

from ..config import SvspecSettings
from .exceptions import InsufficientShells, InterlacingViolated, NonPositiveAlpha, NotMonotone, ProductNotConverged
from .matode import MatrixOde
from .potential import MatrixPotential
from .spectraldata import NULL_TOL, PLAIN_SLOPE, cauchy_tail_ratio, fit_power_law
from .spectrum import SpectrumLocator
from .weylm import sqrt_cot

__all__: list[str] = [
    "ScalarSpectra",
    "HadamardValues",
    "ScalarCharacterization",
    "hadamard_products",
    "convert",
    "check_scalar_characterization",
    "discrete_hilbert",
    "mixed_spectrum",
    "dirichlet_spectrum",
    "doubled_potential",
]

logger = logging.getLogger(__name__)

Sequence_ = Literal["mu", "alpha", "nu"]

MIN_TERMS = 30
# 超出截断点太远时乘积尾部不可信
MAX_TAIL_RATIO = 4.0


def _tail_mean(lam: NDArray[np.float64], offset: float = 0.0) -> float:
    n = np.arange(1, lam.size + 1, dtype=float)
    shift = lam - np.pi**2 * (n - offset) ** 2
    start = (2 * lam.size) // 3
    return float(np.mean(shift[start:])) if lam.size else 0.0


@dataclass(frozen=True, slots=True, eq=False)
class ScalarSpectra:
    dirichlet: NDArray[np.float64]
    mixed: Optional[NDArray[np.float64]] = None
    alpha: Optional[NDArray[np.float64]] = None
    nu: Optional[NDArray[np.float64]] = None

    def __post_init__(self) -> None:
        for name in ("dirichlet", "mixed", "alpha", "nu"):
            value = getattr(self, name)
            if value is not None:
                object.__setattr__(self, name, np.asarray(value, float).copy())
        steps = np.diff(self.dirichlet)
        if np.any(steps <= 0.0):
            i = int(np.argmin(steps))
            raise NotMonotone(f"Dirichlet eigenvalue {i + 2} does not exceed eigenvalue {i + 1}")
        if self.alpha is not None and np.any(self.alpha <= 0.0):
            bad = int(np.argmin(self.alpha))
            raise NonPositiveAlpha(f"alpha_{bad + 1} = {self.alpha[bad]:.3e}")
        if self.mixed is not None:
            lam, mu = self.dirichlet, self.mixed
            k = min(lam.size, mu.size)
            ok = np.all(mu[:k] < lam[:k]) and np.all(lam[: k - 1] < mu[1:k]) if k else True
            if not ok:
                raise InterlacingViolated("mixed and Dirichlet spectra do not interlace")

    @property
    def size(self) -> int:
        return int(self.dirichlet.size)

    @property
    def q0(self) -> float:
        """Mean of q estimated from the last third of λ_n - π²n²."""
        return _tail_mean(self.dirichlet)

    @classmethod
    def from_potential(
        cls,
        q: MatrixPotential,
        count: int,
        settings: Optional[SvspecSettings] = None,
        *,
        with_mixed: bool = True,
    ) -> "ScalarSpectra":
        """λ, α = ∫φ², ν = log[(-1)ⁿφ′(1, λ_n)] and optionally μ, straight from the ODE."""
        settings = settings or SvspecSettings()
        lam = dirichlet_spectrum(q, count, settings)
        ode = MatrixOde(q, settings.ode)
        data = ode.phi_endpoint(lam, gram=True)
        assert data.gram is not None
        alpha = np.real(data.gram[:, 0, 0])
        n = np.arange(1, count + 1)
        nu = np.log((-1.0) ** n * np.real(data.derivs[:, 0, 0, 0]))
        mu = mixed_spectrum(q, count, settings, dirichlet=lam) if with_mixed else None
        return cls(lam, mu, alpha, nu)


class HadamardValues(NamedTuple):
    f: complex
    g: Optional[complex]
    f_dot: complex


@dataclass(frozen=True, slots=True)
class ScalarCharacterization:
    q0: float
    a: list[float]
    b: list[float]
    slopes: dict[str, Optional[float]]
    cauchy: dict[str, float]
    verdicts: dict[str, bool]
    passed: bool


# -------- Hadamard products --------

def _log_tail(z: complex, start: float, terms: int = 200) -> tuple[complex, complex]:
    """log Π_{m≥start}(1 - z/(π²m²)) and its z-derivative.

    Factors with π²m² < 4|z| are summed directly, the remainder by Hurwitz zeta.
    """
    w = z / np.pi**2
    if abs(w) > MAX_TAIL_RATIO * start**2:
        raise ProductNotConverged(f"|lambda - q0| = {abs(z):.4g} too far beyond a product truncated at {start - 1:g}")
    value, deriv = 0j, 0j
    if abs(w) >= 0.25 * start**2:
        count = int(np.ceil(2.0 * np.sqrt(abs(w)) - start)) + 1
        m = start + np.arange(count, dtype=float)
        value += complex(np.sum(np.log(1.0 - w / m**2 + 0j)))
        deriv += complex(np.sum(-1.0 / (np.pi**2 * (m**2 - w))))
        start += count
    r = np.arange(1, terms + 1)
    zetas = zeta(2.0 * r, start)
    powers = w ** r
    keep = np.abs(powers * zetas) > 1e-18
    value -= complex(np.sum((powers * zetas / r)[keep]))
    deriv -= complex(np.sum((w ** (r - 1) * zetas)[keep])) / np.pi**2
    return value, deriv


def _product(zeros: NDArray[np.float64], norms: NDArray[np.float64], lam: complex, tail_start: float, q0: float) -> tuple[complex, complex]:
    """Truncated product with tail correction and its λ-derivative."""
    factors = (zeros - lam) / norms
    tail, tail_d = _log_tail(lam - q0, tail_start)
    scale = np.exp(tail)
    value = np.prod(factors) * scale
    # 留一乘积, 避免在零点处除以零
    prefix = np.concatenate([[1.0], np.cumprod(factors)[:-1]])
    suffix = np.concatenate([np.cumprod(factors[::-1])[::-1][1:], [1.0]])
    loo = prefix * suffix
    deriv = -np.sum(loo / norms) * scale + value * tail_d
    return complex(value), complex(deriv)


def hadamard_products(spectra: ScalarSpectra, lam: complex) -> HadamardValues:
    lam = complex(lam)
    q0 = spectra.q0
    K = spectra.size
    m = np.arange(1, K + 1, dtype=float)
    f, f_dot = _product(spectra.dirichlet, np.pi**2 * m**2, lam, K + 1.0, q0)
    g: Optional[complex] = None
    if spectra.mixed is not None:
        Km = spectra.mixed.size
        mm = np.arange(1, Km + 1, dtype=float)
        g, _ = _product(spectra.mixed, np.pi**2 * (mm - 0.5) ** 2, lam, Km + 0.5, _tail_mean(spectra.mixed, 0.5))
    logger.debug("hadamard products at %s: f=%s g=%s", lam, f, g)
    return HadamardValues(f, g, f_dot)


# -------- Conversions --------

def _g_at_dirichlet(spectra: ScalarSpectra, source: Sequence_, f_dot: NDArray[np.float64]) -> NDArray[np.float64]:
    n = np.arange(1, spectra.size + 1)
    if source == "mu":
        return np.array([np.real(hadamard_products(spectra, lam).g) for lam in spectra.dirichlet])
    if source == "alpha":
        assert spectra.alpha is not None
        return spectra.alpha / f_dot
    assert spectra.nu is not None
    return (-1.0) ** n * np.exp(spectra.nu)


def _mu_from_residues(spectra: ScalarSpectra, residues: NDArray[np.float64]) -> NDArray[np.float64]:
    lam = spectra.dirichlet
    q0 = spectra.q0
    n = np.arange(1, lam.size + 1, dtype=float)
    free = np.pi**2 * n**2 + q0

    def h(x: float) -> float:
        return float(np.real(sqrt_cot(x - q0)) + np.sum(residues / (x - lam) - 2.0 * np.pi**2 * n**2 / (x - free)))

    mu = np.empty(lam.size)
    lo = lam[0] - 1.0
    while h(lo) <= 0.0:
        lo -= 2.0 * (lam[0] - lo)
        if lo < -1e8:
            raise InterlacingViolated("no sign change of g/f below the first Dirichlet eigenvalue")
    eps = 1e-10 * max(1.0, abs(lam[0]))
    mu[0] = brentq(h, lo, lam[0] - eps, xtol=1e-13)
    for i in range(1, lam.size):
        a, b = lam[i - 1], lam[i]
        pad = 1e-10 * (b - a)
        try:
            mu[i] = brentq(h, a + pad, b - pad, xtol=1e-13 * max(1.0, abs(b)))
        except ValueError as e:
            raise InterlacingViolated(f"g/f has no zero between lambda_{i} and lambda_{i + 1}") from e
    return mu


def convert(spectra: ScalarSpectra, source: Sequence_, target: Sequence_) -> ScalarSpectra:
    """Fill ``target`` from ``source`` using α_n = g(λ_n)ḟ(λ_n) and ν_n = log[(-1)ⁿg(λ_n)]."""
    present = {"mu": spectra.mixed, "alpha": spectra.alpha, "nu": spectra.nu}
    if present[source] is None:
        raise ValueError(f"source sequence {source!r} is missing")
    if source == target:
        return spectra
    n = np.arange(1, spectra.size + 1)
    f_dot = np.array([np.real(hadamard_products(spectra, lam).f_dot) for lam in spectra.dirichlet])
    g = _g_at_dirichlet(spectra, source, f_dot)
    if target == "alpha":
        alpha = g * f_dot
        if np.any(alpha <= 0.0):
            bad = int(np.argmin(alpha))
            raise NonPositiveAlpha(f"alpha_{bad + 1} = {alpha[bad]:.3e} from {source}")
        return replace(spectra, alpha=alpha)
    if target == "nu":
        signed = (-1.0) ** n * g
        if np.any(signed <= 0.0):
            bad = int(np.argmin(signed))
            raise InterlacingViolated(f"(-1)^n g(lambda_n) <= 0 at n={bad + 1}")
        return replace(spectra, nu=np.log(signed))
    return replace(spectra, mixed=_mu_from_residues(spectra, g / f_dot))


# -------- Characterization --------

def check_scalar_characterization(spectra: ScalarSpectra) -> ScalarCharacterization:
    """Tail tests of λ_n - π²n² - q₀ and πn(2π²n²α_n - 1).

    Strict monotonicity of λ_n is enforced when ScalarSpectra is built.
    """
    lam = spectra.dirichlet
    if spectra.alpha is None:
        raise ValueError("characterization needs normalizing constants alpha")
    if lam.size < MIN_TERMS:
        raise InsufficientShells(f"{lam.size} terms, need {MIN_TERMS}")
    q0 = spectra.q0
    n = np.arange(1, lam.size + 1, dtype=float)
    seqs = {
        "a": lam - np.pi**2 * n**2 - q0,
        "b": np.pi * n * (2.0 * np.pi**2 * n**2 * spectra.alpha - 1.0),
    }
    slopes = {k: fit_power_law(n, v, floor=1e-9) for k, v in seqs.items()}
    cauchy = {k: cauchy_tail_ratio(v) for k, v in seqs.items()}
    verdicts: dict[str, bool] = {}
    for k, v in seqs.items():
        null = float(np.max(np.abs(v))) <= NULL_TOL
        decays = slopes[k] is not None and slopes[k] <= PLAIN_SLOPE  # type: ignore[operator]
        verdicts[k] = null or decays or (k == "b" and cauchy[k] <= 0.05)
    passed = all(verdicts.values())
    logger.info("scalar characterization: q0=%.6g %s", q0, "PASS" if passed else "FAIL")
    return ScalarCharacterization(q0, seqs["a"].tolist(), seqs["b"].tolist(), slopes, cauchy, verdicts, passed)


# -------- Discrete Hilbert transforms --------

def discrete_hilbert(
    a: ArrayLike,
    kind: Literal["half_shifted", "full_integer"],
    L_out: Optional[int] = None,
    *,
    normalize: Optional[bool] = None,
    threads: int = 1,
    chunk: int = 4096,
) -> NDArray[np.float64]:
    """Split-kernel discrete Hilbert transforms, indices starting at 1.

    half_shifted: b_n = (1/π) Σ_m a_m [1/(n-m+½) + 1/(n+m-½)]
    full_integer: b_n = Σ_{m≠n} a_m/(n-m) + Σ_m a_m/(n+m), times 1/π when ``normalize``
    """
    seq = np.asarray(a, float)
    L = seq.size
    L_out = L if L_out is None else L_out
    if L_out < L:
        raise ValueError(f"L_out={L_out} shorter than the input length {L}")
    if kind not in ("half_shifted", "full_integer"):
        raise ValueError(f"unknown kind {kind!r}")
    scale = 1.0 / np.pi if (normalize if normalize is not None else kind == "half_shifted") else 1.0
    m = np.arange(1, L + 1, dtype=float)

    def block(start: int) -> NDArray[np.float64]:
        n = np.arange(start + 1, min(start + chunk, L_out) + 1, dtype=float)[:, None]
        if kind == "half_shifted":
            kernel = 1.0 / (n - m + 0.5) + 1.0 / (n + m - 0.5)
        else:
            diff = n - m
            with np.errstate(divide="ignore"):
                kernel = np.where(diff == 0.0, 0.0, 1.0 / np.where(diff == 0.0, 1.0, diff)) + 1.0 / (n + m)
        return scale * (kernel @ seq)

    starts = range(0, L_out, chunk)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return np.concatenate(parts) if parts else np.zeros(0)


# -------- Spectra straight from a potential --------

def dirichlet_spectrum(q: MatrixPotential, count: int, settings: Optional[SvspecSettings] = None) -> NDArray[np.float64]:
    if q.dim != 1:
        raise ValueError("scalar tools need an N=1 potential")
    settings = settings or SvspecSettings()
    locator = SpectrumLocator(q, settings)
    lam_max = np.pi**2 * (count + 0.5) ** 2 + locator.norm + 1.0
    lams = locator.scan(lam_max).eigenvalues()
    if lams.size < count:
        raise InsufficientShells(f"found {lams.size} eigenvalues below {lam_max:.6g}, need {count}")
    return lams[:count]


def mixed_spectrum(
    q: MatrixPotential,
    count: int,
    settings: Optional[SvspecSettings] = None,
    *,
    dirichlet: Optional[NDArray[np.float64]] = None,
) -> NDArray[np.float64]:
    """Zeros μ_n of φ′(1, λ), bracketed by μ₁ < λ₁ < μ₂ < λ₂ < …"""
    settings = settings or SvspecSettings()
    lam = dirichlet_spectrum(q, count, settings) if dirichlet is None else np.asarray(dirichlet, float)[:count]
    ode = MatrixOde(q, settings.ode)

    def dphi(x: float) -> float:
        return float(np.real(ode.phi_endpoint([x]).derivs[0, 0, 0, 0]))

    mu = np.empty(count)
    hi = lam[0] - 1e-10 * max(1.0, abs(lam[0]))
    lo = min(lam[0], -q.sup_norm()) - 1.0
    while np.sign(dphi(lo)) == np.sign(dphi(hi)):
        lo -= 2.0 * (hi - lo)
        if lo < -1e6:
            raise InterlacingViolated("phi'(1) has no zero below the first Dirichlet eigenvalue")
    mu[0] = brentq(dphi, lo, hi, xtol=1e-13)
    for i in range(1, count):
        a, b = lam[i - 1], lam[i]
        pad = 1e-10 * (b - a)
        mu[i] = brentq(dphi, a + pad, b - pad, xtol=1e-13 * max(1.0, abs(b)))
    return mu


def doubled_potential(q: MatrixPotential, grid_size: int = 1024) -> MatrixPotential:
    """Even extension of q to [0, 2], rescaled to [0, 1]; its eigenvalues are 4·(λ_n ∪ μ_n)."""
    if q.dim != 1:
        raise ValueError("doubled_potential needs an N=1 potential")

    def fn(x: NDArray[np.float64]) -> NDArray[np.complex128]:
        y = np.where(x <= 0.5, 2.0 * x, 2.0 - 2.0 * x)
        return 4.0 * q.values(np.clip(y, 0.0, 1.0))[:, 0, 0]

    return MatrixPotential.from_function(fn, grid_size=grid_size, dim=1)
