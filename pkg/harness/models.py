"""
Pydantic models for scenario files and harness results
"""
import math
from fractions import Fraction
from pathlib import Path
from typing import Dict, List, Literal, Optional, Tuple

import yaml
from pydantic import BaseModel, Field, ValidationError, field_validator, model_validator

from geometry.errors import ConfigParse
from geometry.scales_bubbles import DEFAULT_BAND, ProbePoint

ScenarioKind = Literal[
    "green", "ov-triple", "glue-inu", "glue-inustar", "glue-alg", "sector-liouville",
    "distortion", "indicial", "moduli", "bubble-map", "semiflat-ops",
]


def _strictly_decreasing(values: List[float], name: str) -> List[float]:
    for first, second in zip(values, values[1:]):
        if not second < first:
            raise ValueError(f"{name} must be strictly decreasing, got {values}")
    return values


class ToleranceProfile(BaseModel):

    """Sample counts and absolute tolerances of a run"""
    name: Literal["strict", "fast"] = Field("strict", description="Profile name")
    grid_factor: float = Field(1.0, gt=0, le=1, description="Multiplier on sample counts")
    tolerance_factor: float = Field(1.0, ge=1, description="Multiplier on absolute tolerances")

    @classmethod
    def named(cls, name: str) -> "ToleranceProfile":
        if name == "strict":
            return cls(name="strict")
        if name == "fast":
            return cls(name="fast", grid_factor=0.5, tolerance_factor=100.0)
        raise ConfigParse(f"unknown tolerance profile {name!r}")

    def count(self, base: int, minimum: int = 4) -> int:
        return max(minimum, int(round(base * self.grid_factor)))

    def tol(self, base: float) -> float:
        return base * self.tolerance_factor


class RadialRange(BaseModel):

    """Closed radial interval sampled at `count` points"""
    lower: float = Field(..., gt=0, description="Smallest radius")
    upper: float = Field(..., gt=0, description="Largest radius")
    count: int = Field(9, ge=2, description="Number of radii")

    @model_validator(mode="after")
    def _ordered(self) -> "RadialRange":
        if not self.lower < self.upper:
            raise ValueError(f"need lower < upper, got {self.lower}, {self.upper}")
        return self


class ModuliCase(BaseModel):

    """One fiber configuration with its expected counts"""
    counts: Dict[str, int] = Field(..., description="Kodaira symbol -> multiplicity")
    expected_valid: bool = Field(True, description="Whether validation should pass")
    expected_dim_base: Optional[int] = Field(None, description="Expected dim B")
    expected_total: Optional[int] = Field(None, description="Expected dimension of the parameter domain")


class ScenarioParameters(BaseModel):

    """Parameter block shared by all scenario kinds; each kind reads what it needs"""
    deltas: List[float] = Field(default_factory=list, description="Collapsing parameters, decreasing")
    log_inverse_deltas: List[float] = Field(default_factory=list, description="x with delta = e^-x")
    delta0: float = Field(0.1, gt=0, description="Base radius of the I_nu damage zone")
    nus: List[int] = Field(default_factory=lambda: [1], description="Monopole counts")
    pole_sets: List[List[float]] = Field(default_factory=list, description="Explicit monopole positions")
    scale_es: List[float] = Field(default_factory=list, description="Eguchi-Hanson parameters, decreasing")
    orbifold_deltas: List[float] = Field(default_factory=list, description="Cap-only sweep: delta values")
    orbifold_scale_es: List[float] = Field(default_factory=list, description="Cap-only sweep: e values")
    kappa: float = Field(1.0, description="Frozen quartic orbifold coefficient of the rate sweeps")
    mu: float = Field(1.0 / 20.0, gt=0, lt=0.2, description="Weight exponent")
    ell: float = Field(11.0 / 12.0, gt=0, lt=1, description="ALG core radius exponent")
    aleph: float = Field(2.0, gt=1, description="Synthetic ALG decay order")
    amplitude: float = Field(1.0, description="Synthetic ALG amplitude")
    fiber_types: List[str] = Field(default_factory=list, description="Kodaira symbols to sweep")
    radii: Optional[RadialRange] = Field(None, description="Radial sample range")
    samples: int = Field(128, ge=4, description="Sample points per sweep point")
    step: float = Field(0.02, gt=0, description="Finite-difference step")
    n_samples: int = Field(64, ge=8, description="Angular samples per circle")
    max_mode: int = Field(4, ge=0, description="Largest sector mode fitted")
    expected_iota: Dict[str, str] = Field(default_factory=dict, description="Fiber type -> exact spectral gap")
    expected_roots: Dict[str, List[str]] = Field(default_factory=dict, description="beta -> required form roots")
    moduli_cases: List[ModuliCase] = Field(default_factory=list, description="Configurations to count")
    max_fibers: int = Field(8, ge=1, le=24, description="Exhaustive enumeration bound")
    fibers: List[str] = Field(default_factory=list, description="Fiber configuration of a bubble tour")
    probes: List[ProbePoint] = Field(default_factory=list, description="Bubble tour probes")
    band: Tuple[float, float] = Field(DEFAULT_BAND, description="Curvature proxy band")
    rate_tolerance: float = Field(0.10, gt=0, description="Relative tolerance on fitted exponents")
    thresholds: Dict[str, float] = Field(default_factory=dict, description="Overrides of absolute thresholds")

    @field_validator("deltas")
    @classmethod
    def _deltas(cls, values: List[float]) -> List[float]:
        if any(not 0.0 < value < 1.0 for value in values):
            raise ValueError(f"deltas must lie in (0, 1), got {values}")
        return _strictly_decreasing(values, "deltas")

    @field_validator("log_inverse_deltas")
    @classmethod
    def _log_deltas(cls, values: List[float]) -> List[float]:
        if any(value <= 0.0 for value in values):
            raise ValueError(f"log_inverse_deltas must be positive, got {values}")
        for first, second in zip(values, values[1:]):
            if not second > first:
                raise ValueError(f"log_inverse_deltas must increase (deltas decrease), got {values}")
        return values

    @field_validator("scale_es", "orbifold_deltas", "orbifold_scale_es")
    @classmethod
    def _decreasing(cls, values: List[float], info) -> List[float]:
        if any(value <= 0.0 for value in values):
            raise ValueError(f"{info.field_name} must be positive, got {values}")
        return _strictly_decreasing(values, info.field_name)

    @field_validator("nus")
    @classmethod
    def _nus(cls, values: List[int]) -> List[int]:
        if any(value < 1 for value in values):
            raise ValueError(f"nu must be at least 1, got {values}")
        return values

    @model_validator(mode="after")
    def _merge_deltas(self) -> "ScenarioParameters":
        if self.log_inverse_deltas:
            if self.deltas:
                raise ValueError("give either deltas or log_inverse_deltas, not both")
            self.deltas = [math.exp(-value) for value in self.log_inverse_deltas]
        return self

    def threshold(self, name: str, default: float) -> float:
        return self.thresholds.get(name, default)

    def exact_iota(self) -> Dict[str, Fraction]:
        return {label: Fraction(value) for label, value in self.expected_iota.items()}


_REQUIRED: Dict[str, Tuple[str, ...]] = {
    "glue-inu": ("deltas",),
    "glue-inustar": ("deltas", "scale_es"),
    "glue-alg": ("deltas", "fiber_types"),
    "distortion": ("fiber_types",),
    "moduli": ("moduli_cases",),
    "bubble-map": ("deltas", "fibers", "probes"),
    "semiflat-ops": ("fiber_types",),
}


class Scenario(BaseModel):

    """A scenario file"""
    name: str = Field(..., min_length=1, description="Scenario name, used for output file names")
    kind: ScenarioKind = Field(..., description="Executor to run")
    seed: int = Field(0, ge=0, description="Seed of every random sample")
    parameters: ScenarioParameters = Field(default_factory=ScenarioParameters)
    output: Optional[str] = Field(None, description="Output directory (overridden by --out)")

    @model_validator(mode="after")
    def _required(self) -> "Scenario":
        for field in _REQUIRED.get(self.kind, ()):
            if not getattr(self.parameters, field):
                raise ValueError(f"{self.kind} scenarios need parameters.{field}")
        if self.kind in ("glue-inu", "glue-alg") and len(self.parameters.deltas) < 2:
            raise ValueError(f"{self.kind} needs at least two deltas for a rate fit")
        return self


def load_scenario(path: Path) -> Scenario:
    """
    Read and validate a YAML scenario file

    Raises:
        ConfigParse: if the file is unreadable, not YAML, or fails validation
    """
    try:
        raw = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigParse(f"cannot read scenario {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigParse(f"scenario {path} is not a mapping")
    try:
        return Scenario(**raw)
    except ValidationError as exc:
        raise ConfigParse(f"invalid scenario {path}: {exc}") from exc


# ---------------------------------------------------------------------------
# Results
# ---------------------------------------------------------------------------

class CheckResult(BaseModel):

    """Outcome of one acceptance check"""
    name: str = Field(..., description="Check name")
    passed: bool = Field(..., description="Pass/fail")
    value: Optional[float] = Field(None, description="Measured value")
    threshold: Optional[str] = Field(None, description="Acceptance condition")
    detail: str = Field("", description="Diagnostic message")


class RateRow(BaseModel):

    """A fitted rate with its sweep provenance"""
    check: str = Field(..., description="Check the fit belongs to")
    quantity: str = Field(..., description="What was fitted")
    exponent: float = Field(..., description="Fitted exponent or slope")
    expected: Optional[float] = Field(None, description="Expected exponent")
    r2: float = Field(..., description="Coefficient of determination")
    n_points: int = Field(..., description="Sweep points used")
    passed: bool = Field(..., description="Within tolerance of the expected value")


class ScenarioSummary(BaseModel):

    """JSON summary written next to the CSV tables"""
    scenario: str
    kind: str
    seed: int
    profile: str
    passed: bool
    checks: List[CheckResult] = Field(default_factory=list)
    rates: List[RateRow] = Field(default_factory=list)
    files: List[str] = Field(default_factory=list)
    extra: Dict[str, object] = Field(default_factory=dict, description="Kind-specific payload")
