"""
Kodaira fiber data, Euler-number accounting and moduli dimension counts
for elliptic K3 surfaces
"""
import re
from collections import Counter
from typing import Dict, Iterator, List, Tuple

from loguru import logger
from pydantic import BaseModel, Field, field_validator

from geometry.errors import InvalidConfig
from geometry.model_spaces import ALG_TABLE

EULER_TOTAL = 24
DOMAIN_DIMENSION = 20

_LABEL = re.compile(r"^I(\d+)(\*?)$")


class KodairaFiber(BaseModel):

    """One singular fiber"""
    label: str = Field(..., description="Kodaira symbol, e.g. I3, I2*, IV*")
    family: str = Field(..., description="finite, Inu or Inustar")
    nu: int = Field(0, ge=0, description="Index of I_nu / I_nu* fibers")

    @property
    def euler(self) -> int:
        if self.family == "finite":
            return ALG_TABLE[self.label].euler
        if self.family == "Inu":
            return self.nu
        return self.nu + 6

    @property
    def b2(self) -> int:
        """Second Betti number of the ALG bubble (finite monodromy only)"""
        if self.family != "finite":
            raise InvalidConfig(f"{self.label} has no ALG bubble")
        return ALG_TABLE[self.label].b2


def parse_fiber(label: str) -> KodairaFiber:
    """
    Parse a Kodaira symbol

    I0* is a finite-monodromy fiber; I_nu and I_nu* need nu >= 1.

    Raises:
        InvalidConfig: for unknown symbols
    """
    label = label.strip()
    if label in ALG_TABLE:
        return KodairaFiber(label=label, family="finite")
    match = _LABEL.match(label)
    if match is None:
        raise InvalidConfig(f"unknown Kodaira symbol {label!r}")
    nu = int(match.group(1))
    if nu < 1:
        raise InvalidConfig(f"{label} is not a singular fiber")
    family = "Inustar" if match.group(2) else "Inu"
    return KodairaFiber(label=label, family=family, nu=nu)


class FiberConfig(BaseModel):

    """Multiset of singular fibers of an elliptic K3"""
    fibers: List[str] = Field(..., description="Kodaira symbols, repeated by multiplicity")

    @field_validator("fibers")
    @classmethod
    def _known(cls, fibers: List[str]) -> List[str]:
        for label in fibers:
            parse_fiber(label)
        return [label.strip() for label in fibers]

    @classmethod
    def from_counts(cls, counts: Dict[str, int]) -> "FiberConfig":
        fibers: List[str] = []
        for label, count in counts.items():
            fibers.extend([label] * int(count))
        return cls(fibers=fibers)

    def parsed(self) -> List[KodairaFiber]:
        return [parse_fiber(label) for label in self.fibers]

    def counts(self) -> Tuple[int, int, int]:
        """(k1, k2, k3): finite-monodromy, I_nu and I_nu* fiber counts"""
        tally = Counter(fiber.family for fiber in self.parsed())
        return tally["finite"], tally["Inu"], tally["Inustar"]

    def euler_sum(self) -> int:
        return sum(fiber.euler for fiber in self.parsed())

    def summary(self) -> str:
        tally = Counter(self.fibers)
        return " + ".join(f"{count}x{label}" for label, count in sorted(tally.items()))


class ConfigReport(BaseModel):

    """Validation report"""
    passed: bool
    euler_sum: int
    k1: int
    k2: int
    k3: int
    reasons: List[str] = Field(default_factory=list)


def validate(config: FiberConfig) -> ConfigReport:
    """Euler numbers must sum to 24 and 2 k1 + k2 + 2 k3 must be at least 6"""
    k1, k2, k3 = config.counts()
    euler = config.euler_sum()
    reasons = []
    if euler != EULER_TOTAL:
        reasons.append(f"Euler numbers sum to {euler}, not {EULER_TOTAL}")
    if 2 * k1 + k2 + 2 * k3 < 6:
        reasons.append(f"2k1 + k2 + 2k3 = {2 * k1 + k2 + 2 * k3} < 6")
    return ConfigReport(passed=not reasons, euler_sum=euler, k1=k1, k2=k2, k3=k3, reasons=reasons)


class ModuliDims(BaseModel):

    """Dimensions of the gluing parameter spaces"""
    dim_base: int = Field(..., description="dim B = 2k1 + k2 + 2k3 - 5")
    alg: List[int] = Field(default_factory=list, description="b2 - 1 per finite-monodromy fiber")
    inu: List[int] = Field(default_factory=list, description="nu - 1 per I_nu fiber")
    inustar: List[int] = Field(default_factory=list, description="nu + 4 per I_nu* fiber")
    total: int = Field(..., description="1 + dim B + all fiber contributions")


def moduli_dims(config: FiberConfig) -> ModuliDims:
    """
    Raises:
        InvalidConfig: if the configuration fails validation
    """
    report = validate(config)
    if not report.passed:
        raise InvalidConfig(f"{config.summary()}: {'; '.join(report.reasons)}")
    alg, inu, inustar = [], [], []
    for fiber in config.parsed():
        if fiber.family == "finite":
            alg.append(fiber.b2 - 1)
        elif fiber.family == "Inu":
            inu.append(fiber.nu - 1)
        else:
            inustar.append(fiber.nu + 4)
    dim_base = 2 * report.k1 + report.k2 + 2 * report.k3 - 5
    total = 1 + dim_base + sum(alg) + sum(inu) + sum(inustar)
    return ModuliDims(dim_base=dim_base, alg=alg, inu=inu, inustar=inustar, total=total)


def fiber_catalogue() -> List[KodairaFiber]:
    """Every singular fiber type that fits in Euler number 24"""
    catalogue = [KodairaFiber(label=label, family="finite") for label in ALG_TABLE]
    catalogue += [KodairaFiber(label=f"I{nu}", family="Inu", nu=nu) for nu in range(1, EULER_TOTAL + 1)]
    catalogue += [KodairaFiber(label=f"I{nu}*", family="Inustar", nu=nu)
                  for nu in range(1, EULER_TOTAL - 6 + 1)]
    return catalogue


def enumerate_configs(max_fibers: int = 8) -> Iterator[FiberConfig]:
    """All valid configurations with at most max_fibers singular fibers"""
    catalogue = sorted(fiber_catalogue(), key=lambda fiber: -fiber.euler)

    def extend(start: int, remaining: int, chosen: List[str]) -> Iterator[List[str]]:
        if remaining == 0:
            yield list(chosen)
            return
        if len(chosen) == max_fibers:
            return
        for idx in range(start, len(catalogue)):
            fiber = catalogue[idx]
            if fiber.euler > remaining:
                continue
            # the remaining slots cannot reach the target with smaller fibers
            if fiber.euler * (max_fibers - len(chosen)) < remaining:
                break
            chosen.append(fiber.label)
            yield from extend(idx, remaining - fiber.euler, chosen)
            chosen.pop()

    count = 0
    for labels in extend(0, EULER_TOTAL, []):
        config = FiberConfig(fibers=labels)
        if validate(config).passed:
            count += 1
            yield config
    logger.debug(f"enumerate_configs: {count} valid configurations with <= {max_fibers} fibers")
