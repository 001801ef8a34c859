"""
Fourier analysis on flat sectors with twisted boundary conditions,
numerical Liouville checks, distortion-order fits and indicial roots
"""
import math
from fractions import Fraction
from typing import Callable, Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from loguru import logger
from pydantic import BaseModel, Field, model_validator

from geometry.diffgeo_numerics import RateFit, fit_power_law
from geometry.errors import BoundaryTwistViolation, IllConditioned, InsufficientRange, SectorMismatch
from geometry.model_spaces import ALG_TABLE
from geometry.semi_flat import PeriodModel

Number = Union[Fraction, float]

CONDITION_LIMIT = 1e12
TWIST_TOLERANCE = 1e-8
LIOUVILLE_FLOOR = 1e-8
FLAT_FLOOR = 1e-15


def as_exact(value: Union[int, float, Fraction], max_denominator: int = 1000) -> Number:
    """Rational form of a value when it is a small-denominator rational"""
    if isinstance(value, (int, Fraction)):
        return Fraction(value)
    guess = Fraction(value).limit_denominator(max_denominator)
    if abs(float(guess) - value) < 1e-12:
        return guess
    return float(value)


def _frac_part(sigma: Number) -> Number:
    return sigma - math.floor(sigma)


class IndicialData(BaseModel):

    """Indicial ladder of a twisted sector and its spectral gap"""
    model_config = {"arbitrary_types_allowed": True}

    beta: Number = Field(..., description="Cone angle fraction")
    sigma: Number = Field(..., description="Boundary twist")
    ladder: Dict[int, Number] = Field(..., description="lambda_j = (j - sigma)/beta")
    iota: Number = Field(..., description="Smallest |lambda_j| over nonzero modes")


def indicial_data(beta, sigma, j_max: int = 6) -> IndicialData:
    """
    Mode exponents lambda_j = (j - sigma)/beta and the gap iota_{beta, sigma}

    iota is 1/beta for integer sigma, frac(sigma)/beta when the fractional part
    lies in (0, 1/2], and (1 - frac(sigma))/beta otherwise.
    """
    b = as_exact(beta)
    s = as_exact(sigma)
    if not 0 < b <= 1:
        raise ValueError(f"beta must lie in (0, 1], got {beta}")
    ladder = {j: (j - s) / b for j in range(-j_max, j_max + 1)}
    frac = _frac_part(s)
    if frac == 0:
        iota = 1 / b
    elif frac <= Fraction(1, 2):
        iota = frac / b
    else:
        iota = (1 - frac) / b
    return IndicialData(beta=b, sigma=s, ladder=ladder, iota=iota)


def alg_sector_pairs() -> List[IndicialData]:
    """(beta, sigma = beta) data for the seven ALG sectors"""
    return [indicial_data(as_exact(row.beta, 12), as_exact(row.beta, 12)) for row in ALG_TABLE.values()]


class SectorSpec(BaseModel):

    """Annular region of the sector 0 <= theta <= 2 pi beta with twist e^(2 pi i sigma)"""
    beta: float = Field(..., gt=0, le=1, description="Cone angle fraction")
    sigma: float = Field(0.0, description="Boundary twist")
    r1: float = Field(..., gt=0, description="Inner circle radius")
    r2: float = Field(..., gt=0, description="Outer circle radius")
    n_samples: int = Field(128, ge=8, description="Angular intervals on [0, 2 pi beta]")
    max_mode: int = Field(8, ge=0, description="Largest |j| fitted")

    @model_validator(mode="after")
    def _check(self) -> "SectorSpec":
        if not self.r1 < self.r2:
            raise ValueError(f"need r1 < r2, got {self.r1}, {self.r2}")
        if self.n_samples < 8 * max(self.max_mode, 1):
            raise ValueError(f"n_samples {self.n_samples} below 8 * max_mode ({self.max_mode})")
        return self

    def modes(self) -> np.ndarray:
        return np.arange(-self.max_mode, self.max_mode + 1)

    def exponents(self) -> np.ndarray:
        return (self.modes() - self.sigma) / self.beta

    def angles(self, endpoint: bool = True) -> np.ndarray:
        count = self.n_samples + 1 if endpoint else self.n_samples
        return 2.0 * math.pi * self.beta * np.arange(count) / self.n_samples

    def has_log_mode(self) -> bool:
        return abs(self.sigma - round(self.sigma)) < 1e-12

    def log_mode_index(self) -> Optional[int]:
        return int(round(self.sigma)) if self.has_log_mode() else None


def mode(j: int, theta: np.ndarray, beta: float, sigma: float) -> np.ndarray:
    """phi_j(theta) = exp(-i lambda_j theta)"""
    return np.exp(-1j * (j - sigma) / beta * np.asarray(theta, dtype=float))


def mode_gram(spec: SectorSpec) -> np.ndarray:
    """Trapezoid Gram matrix (1 / 2 pi beta) int phi_j conj(phi_k) over the sector"""
    theta = spec.angles(endpoint=False)
    basis = np.array([mode(j, theta, spec.beta, spec.sigma) for j in spec.modes()])
    return basis @ basis.conj().T / spec.n_samples


def sample_circles(fn: Callable[[np.ndarray, np.ndarray], np.ndarray], spec: SectorSpec,
                   radii: Sequence[float]) -> np.ndarray:
    """Values of fn(r, theta) on circles, endpoint theta = 2 pi beta included"""
    theta = spec.angles(endpoint=True)
    return np.array([np.asarray(fn(np.full_like(theta, r), theta), dtype=complex) for r in radii])


def mode_coefficients(values: np.ndarray, spec: SectorSpec) -> np.ndarray:
    """
    U_j(r) = (1 / 2 pi beta) int U conj(phi_j) dtheta for j in spec.modes()

    Args:
        values: samples on one circle at spec.angles(endpoint=True)
    """
    samples = np.asarray(values, dtype=complex)[: spec.n_samples]
    k = np.arange(spec.n_samples)
    untwisted = samples * np.exp(-2j * math.pi * spec.sigma * k / spec.n_samples)
    spectrum = np.fft.ifft(untwisted)
    return spectrum[np.mod(spec.modes(), spec.n_samples)]


def check_twist(values: np.ndarray, spec: SectorSpec, tolerance: float = TWIST_TOLERANCE) -> float:
    """
    Raises:
        BoundaryTwistViolation: if U(2 pi beta) differs from e^(2 pi i sigma) U(0)
    """
    values = np.asarray(values, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(values))))
    mismatch = abs(values[-1] - np.exp(2j * math.pi * spec.sigma) * values[0]) / scale
    if mismatch > tolerance:
        raise BoundaryTwistViolation(f"twisted boundary condition fails by {mismatch:.3e}")
    return mismatch


class SectorExpansion(BaseModel):

    """Fitted expansion sum_j (C_j r^l_j + C*_j r^-l_j) phi_j plus the log pair"""
    model_config = {"arbitrary_types_allowed": True}

    spec: SectorSpec
    modes: np.ndarray = Field(..., description="Mode indices j")
    exponents: np.ndarray = Field(..., description="lambda_j")
    growing: np.ndarray = Field(..., description="C_j")
    decaying: np.ndarray = Field(..., description="C*_j")
    kappa0: complex = Field(0.0, description="Constant part of the log mode")
    c0: complex = Field(0.0, description="log r coefficient of the log mode")
    sup_norm: float = Field(..., description="sup |U| on the inner circle")
    condition: float = Field(..., description="Worst column-equilibrated condition number")

    def evaluate(self, r: np.ndarray, theta: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        theta = np.asarray(theta, dtype=float)
        total = np.zeros(np.broadcast(r, theta).shape, dtype=complex)
        log_index = self.spec.log_mode_index()
        for j, lam, c, c_star in zip(self.modes, self.exponents, self.growing, self.decaying):
            phase = mode(int(j), theta, self.spec.beta, self.spec.sigma)
            if log_index is not None and j == log_index:
                total += (self.kappa0 + self.c0 * np.log(r)) * phase
            else:
                total += (c * r ** lam + c_star * r ** (-lam)) * phase
        return total

    def reconstruction_error(self, fn: Callable[[np.ndarray, np.ndarray], np.ndarray], r: float) -> float:
        theta = self.spec.angles(endpoint=True)
        radius = np.full_like(theta, r)
        return float(np.max(np.abs(self.evaluate(radius, theta) - fn(radius, theta))))

    def coefficient(self, j: int, kind: Literal["growing", "decaying"] = "growing") -> complex:
        idx = int(np.nonzero(self.modes == j)[0][0])
        return complex(self.growing[idx] if kind == "growing" else self.decaying[idx])

    def normalized_coefficients(self) -> np.ndarray:
        """|C_j| r1^l_j and |C*_j| r1^-l_j relative to sup |U| on r1"""
        r1 = self.spec.r1
        scale = max(self.sup_norm, 1.0)
        values = np.concatenate([
            np.abs(self.growing) * r1 ** self.exponents,
            np.abs(self.decaying) * r1 ** (-self.exponents),
            [abs(self.kappa0), abs(self.c0)],
        ])
        return values / scale


def _solve_pair(basis: np.ndarray, data: np.ndarray, j: int) -> Tuple[np.ndarray, float]:
    norms = np.linalg.norm(basis, axis=0)
    condition = np.linalg.cond(basis / norms[None, :])
    if condition > CONDITION_LIMIT:
        raise IllConditioned(f"mode {j}: condition number {condition:.3e}")
    return np.linalg.solve(basis, data), condition


def fit_expansion(samples: np.ndarray, spec: SectorSpec) -> SectorExpansion:
    """
    Fit growing and decaying coefficients per mode from two circles

    Args:
        samples: array (2, n_samples + 1) of values on r1 and r2 at spec.angles()
        spec: sector data

    Returns:
        SectorExpansion

    Raises:
        BoundaryTwistViolation: if either circle breaks the twisted boundary condition
        IllConditioned: if a 2x2 mode system is numerically singular
    """
    samples = np.asarray(samples, dtype=complex)
    for row in samples:
        check_twist(row, spec)
    inner = mode_coefficients(samples[0], spec)
    outer = mode_coefficients(samples[1], spec)

    modes = spec.modes()
    exponents = spec.exponents()
    growing = np.zeros(len(modes), dtype=complex)
    decaying = np.zeros(len(modes), dtype=complex)
    kappa0 = 0.0 + 0.0j
    c0 = 0.0 + 0.0j
    worst = 1.0
    log_index = spec.log_mode_index()
    q = spec.r2 / spec.r1
    for idx, (j, lam) in enumerate(zip(modes, exponents)):
        data = np.array([inner[idx], outer[idx]])
        if log_index is not None and j == log_index:
            basis = np.array([[1.0, math.log(spec.r1)], [1.0, math.log(spec.r2)]])
            (kappa0, c0), condition = _solve_pair(basis, data, int(j))
        else:
            basis = np.array([[1.0, 1.0], [q ** lam, q ** (-lam)]])
            (scaled_c, scaled_star), condition = _solve_pair(basis, data, int(j))
            growing[idx] = scaled_c * spec.r1 ** (-lam)
            decaying[idx] = scaled_star * spec.r1 ** lam
        worst = max(worst, condition)

    logger.debug(f"fit_expansion: beta={spec.beta}, sigma={spec.sigma}, modes={len(modes)}, cond={worst:.2e}")
    return SectorExpansion(
        spec=spec,
        modes=modes,
        exponents=exponents,
        growing=growing,
        decaying=decaying,
        kappa0=complex(kappa0),
        c0=complex(c0),
        sup_norm=float(np.max(np.abs(samples[0]))),
        condition=float(worst),
    )


class LiouvilleVerdict(BaseModel):

    """Outcome of a numerical Liouville check"""
    passed: bool = Field(..., description="True when every fitted coefficient vanishes")
    mu: float = Field(..., description="Decay exponent of the growth bound")
    iota: float = Field(..., description="Spectral gap of the sector")
    largest: float = Field(..., description="Largest normalized coefficient")
    offending: List[int] = Field(default_factory=list, description="Modes carrying a nonzero coefficient")
    threshold: float = Field(LIOUVILLE_FLOOR, description="Zero threshold on normalized coefficients")


def liouville_check(expansion: SectorExpansion, mu: float, threshold: float = LIOUVILLE_FLOOR) -> LiouvilleVerdict:
    """
    Harmonic functions bounded by C r^(-mu), 0 < mu < iota, vanish on the sector

    No mode term r^(+-lambda_j) with |lambda_j| >= iota is compatible with the
    bound at both ends of the sector, so the check passes exactly when every
    fitted coefficient is below the threshold (relative to sup |U| on r1).
    """
    data = indicial_data(expansion.spec.beta, expansion.spec.sigma)
    iota = float(data.iota)
    if not 0.0 < mu < iota:
        raise ValueError(f"mu must lie in (0, {iota}), got {mu}")
    r1 = expansion.spec.r1
    scale = max(expansion.sup_norm, 1.0)
    offending = []
    for j, lam, c, c_star in zip(expansion.modes, expansion.exponents, expansion.growing, expansion.decaying):
        size = max(abs(c) * r1 ** lam, abs(c_star) * r1 ** (-lam)) / scale
        if size > threshold:
            offending.append(int(j))
    log_index = expansion.spec.log_mode_index()
    if log_index is not None and max(abs(expansion.kappa0), abs(expansion.c0)) / scale > threshold:
        offending.append(log_index)
    largest = float(np.max(expansion.normalized_coefficients()))
    verdict = LiouvilleVerdict(passed=not offending, mu=mu, iota=iota, largest=largest,
                               offending=sorted(set(offending)), threshold=threshold)
    logger.debug(f"liouville_check: passed={verdict.passed}, largest={largest:.3e}, offending={verdict.offending}")
    return verdict


class DistortionFit(BaseModel):

    """Fitted decay order of Im(conj(tau1) tau2) - 1"""
    fiber_type: str
    exponent: float = Field(..., description="Fitted lambda (inf for exactly flat periods)")
    expected: Optional[float] = Field(None, description="Tabulated distortion order")
    r2: float = Field(1.0, description="R^2 of the log-log fit")
    n_points: int = Field(0, description="Samples used")
    exact_flat: bool = Field(False, description="|Im(conj(tau1) tau2) - 1| vanished identically")

    def relative_error(self) -> float:
        if self.expected is None or self.exact_flat:
            return 0.0
        return abs(self.exponent - self.expected) / self.expected


def distortion_fit(periods: PeriodModel, fiber_type: str, u_samples: Sequence[complex]) -> DistortionFit:
    """
    Log-log slope of |Im(conj(tau1) tau2) - 1| against |u|

    Raises:
        InsufficientRange: if the samples span less than one decade in |u|
        SectorMismatch: if the period model belongs to another fiber type
    """
    u = np.asarray(u_samples, dtype=complex)
    radii = np.abs(u)
    if len(u) < 2 or radii.min() <= 0.0 or radii.max() / radii.min() < 10.0:
        raise InsufficientRange("distortion fit needs samples spanning at least one decade in |u|")
    if periods.fiber_type not in ("regular", fiber_type):
        raise SectorMismatch(f"period model is of type {periods.fiber_type}, not {fiber_type}")
    expected = ALG_TABLE[fiber_type].distortion_order if fiber_type in ALG_TABLE else None
    deviation = np.abs(periods.imaginary_product(u) - 1.0)
    if np.all(deviation <= FLAT_FLOOR):
        return DistortionFit(fiber_type=fiber_type, exponent=math.inf, expected=expected,
                             n_points=len(u), exact_flat=True)
    keep = deviation > FLAT_FLOOR
    fit: RateFit = fit_power_law(radii[keep], deviation[keep])
    logger.debug(f"distortion_fit {fiber_type}: lambda={fit.exponent:.4f} (table {expected})")
    return DistortionFit(fiber_type=fiber_type, exponent=fit.exponent, expected=expected,
                         r2=fit.r2, n_points=fit.n_points)


def alg_laplacian_indicial_roots(beta, kind: Literal["functions", "forms"] = "functions",
                                 j_max: int = 6) -> List[Fraction]:
    """
    Indicial roots of the Laplacian on the flat ALG model

    Functions: j / beta. Invariant (1,1)-forms: both families, j / beta and
    j / beta +- 2.
    """
    b = as_exact(beta, 12)
    base = [Fraction(j) / b for j in range(-j_max, j_max + 1)]
    if kind == "functions":
        return sorted(set(base))
    if kind == "forms":
        return sorted(set(base + [root + 2 for root in base] + [root - 2 for root in base]))
    raise ValueError(f"unknown root class {kind}")
