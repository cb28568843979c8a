"""Power-law FG material description and the thickness-integrated section quantities.

The gradient always spans the thickest (innermost) segment: thinner segments share the
mid-plane z = 0 and sample the central part of the same profile.
"""
import math
from dataclasses import dataclass
from typing import Callable, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, PositiveFloat, PrivateAttr, model_validator
from scipy import integrate

from stepplate.config import settings
from stepplate.errors import DomainError

EdgeCondition = Literal["free", "soft_ss", "hard_ss", "clamped"]
EDGE_CONDITIONS = ("free", "soft_ss", "hard_ss", "clamped")


class MaterialPair(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)

    E_m: PositiveFloat
    E_c: PositiveFloat
    rho_m: PositiveFloat
    rho_c: PositiveFloat
    nu: float = Field(0.3, gt=0.0, lt=0.5)
    g: float = Field(ge=0.0)
    kappa_sq: PositiveFloat = 5.0 / 6.0


class SegmentGeometry(BaseModel):
    """One constant-thickness ring. Index, inner radius and the plate reference
    dimensions are filled in by the owning PlateConfig."""

    model_config = ConfigDict(extra="forbid")

    outer_radius: PositiveFloat
    thickness: PositiveFloat

    _index: int = PrivateAttr(default=1)
    _inner_radius: float = PrivateAttr(default=0.0)
    _reference_radius: Optional[float] = PrivateAttr(default=None)
    _reference_thickness: Optional[float] = PrivateAttr(default=None)

    @property
    def index(self) -> int:
        return self._index

    @property
    def inner_radius(self) -> float:
        return self._inner_radius

    @property
    def is_core(self) -> bool:
        # innermost segment of a circular plate, contains r = 0
        return self._inner_radius == 0.0

    @property
    def reference_radius(self) -> float:
        return self._reference_radius if self._reference_radius is not None else self.outer_radius

    @property
    def reference_thickness(self) -> float:
        return self._reference_thickness if self._reference_thickness is not None else self.thickness

    @property
    def delta(self) -> float:
        return self.thickness / self.reference_radius

    @property
    def tau(self) -> float:
        return self.thickness / self.reference_thickness


class PlateConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    name: Optional[str] = None
    material: MaterialPair
    segments: list[SegmentGeometry] = Field(min_length=1)
    plate_kind: Literal["circular", "annular"] = "circular"
    outer_bc: EdgeCondition
    inner_bc: Optional[EdgeCondition] = None
    inner_radius: Optional[PositiveFloat] = None

    @model_validator(mode="after")
    def finalize(self):
        problems = []
        radii = [s.outer_radius for s in self.segments]
        if any(b <= a for a, b in zip(radii, radii[1:])):
            problems.append("segments: outer_radius must be strictly increasing")
        h1 = self.segments[0].thickness
        if any(s.thickness > h1 for s in self.segments[1:]):
            problems.append("segments: the innermost segment must be the thickest")

        if self.plate_kind == "circular":
            if self.inner_bc is not None:
                problems.append("inner_bc: only annular plates have an inner edge")
            if self.inner_radius is not None:
                problems.append("inner_radius: only annular plates have an inner radius")
        else:
            if self.inner_bc is None:
                problems.append("inner_bc: required for annular plates")
            if self.inner_radius is None:
                problems.append("inner_radius: required for annular plates")
            elif self.inner_radius >= radii[0]:
                problems.append("inner_radius: must be smaller than the first outer_radius")
        if problems:
            raise ValueError("; ".join(problems))

        # private attrs are per instance, copy so shared segment objects are not rebound
        self.segments = [s.model_copy() for s in self.segments]
        inner = self.inner_radius or 0.0
        for i, segment in enumerate(self.segments):
            segment._index = i + 1
            segment._inner_radius = inner
            segment._reference_radius = radii[-1]
            segment._reference_thickness = self.segments[-1].thickness
            inner = segment.outer_radius
        return self

    @property
    def outer_radius(self) -> float:
        return self.segments[-1].outer_radius

    @property
    def reference_thickness(self) -> float:
        return self.segments[-1].thickness

    @property
    def h1(self) -> float:
        return self.segments[0].thickness

    @property
    def is_annular(self) -> bool:
        return self.plate_kind == "annular"

    def with_changes(self, **updates) -> "PlateConfig":
        """Validated copy with top-level fields replaced (nested values as plain dicts)."""
        data = self.model_dump()
        data.update(updates)
        return PlateConfig.model_validate(data)


@dataclass(frozen=True)
class SectionIntegrals:
    I1_bar: float
    I2_bar: float
    I3_bar: float
    K1_bar: float
    K2_bar: float
    K3_bar: float

    @property
    def stiffness_det(self) -> float:
        return self.K1_bar * self.K3_bar - self.K2_bar**2

    @property
    def inertia_det(self) -> float:
        return self.I1_bar * self.I3_bar - self.I2_bar**2


@dataclass(frozen=True)
class ScaleFactors:
    S1: float
    S2: float
    lambda_i: float
    D_i: float
    beta: float
    omega: float
    delta: float
    tau: float


def volume_fraction(z: float, h1: float, g: float) -> float:
    half = 0.5 * h1
    slack = 1e-12 * h1
    if z < -half - slack or z > half + slack:
        raise DomainError(f"z={z:g} outside the graded thickness [-{half:g}, {half:g}]")
    if g < 0:
        raise DomainError(f"power-law index must be non-negative, got {g:g}")
    t = min(max(z / h1 + 0.5, 0.0), 1.0)
    return t**g


def youngs_modulus(z: float, material: MaterialPair, h1: float) -> float:
    return material.E_c + (material.E_m - material.E_c) * volume_fraction(z, h1, material.g)


def density(z: float, material: MaterialPair, h1: float) -> float:
    return material.rho_c + (material.rho_m - material.rho_c) * volume_fraction(z, h1, material.g)


def flexural_rigidity(material: MaterialPair, thickness: float) -> float:
    return material.E_c * thickness**3 / (12.0 * (1.0 - material.nu**2))


def _moment(profile: Callable[[float], float], thickness: float, k: int) -> float:
    # profiles are monotone between the phases, so the faces bound the integrand
    scale = max(abs(profile(-0.5 * thickness)), abs(profile(0.5 * thickness))) * 0.5**(k - 1)
    value, _ = integrate.quad(
        lambda Z: profile(Z * thickness) * Z**(k - 1),
        -0.5,
        0.5,
        epsabs=settings.QUAD_RTOL * scale,
        epsrel=settings.QUAD_RTOL,
        limit=200,
    )
    return value


def section_integrals(segment: SegmentGeometry, material: MaterialPair, h1: float) -> SectionIntegrals:
    h = segment.thickness
    if h > h1 * (1.0 + 1e-12):
        raise DomainError(f"segment {segment.index} thickness {h:g} exceeds the graded thickness {h1:g}")

    def stiffness(z: float) -> float:
        return youngs_modulus(z, material, h1) / (material.E_c * (1.0 - material.nu**2))

    def inertia(z: float) -> float:
        return density(z, material, h1) / material.rho_c

    return SectionIntegrals(
        I1_bar=_moment(inertia, h, 1),
        I2_bar=_moment(inertia, h, 2),
        I3_bar=_moment(inertia, h, 3),
        K1_bar=_moment(stiffness, h, 1),
        K2_bar=_moment(stiffness, h, 2),
        K3_bar=_moment(stiffness, h, 3),
    )


def plate_section_integrals(plate: PlateConfig) -> list[SectionIntegrals]:
    return [section_integrals(s, plate.material, plate.h1) for s in plate.segments]


def _beta_per_omega(plate: PlateConfig) -> float:
    h_n = plate.reference_thickness
    D_n = flexural_rigidity(plate.material, h_n)
    return plate.outer_radius**2 * math.sqrt(plate.material.rho_c * h_n / D_n)


def beta_from_omega(plate: PlateConfig, omega: float) -> float:
    return omega * _beta_per_omega(plate)


def omega_from_beta(plate: PlateConfig, beta: float) -> float:
    return beta / _beta_per_omega(plate)


def frequency_hz(plate: PlateConfig, beta: float) -> float:
    return omega_from_beta(plate, beta) / (2.0 * math.pi)


def scale_factors(
    segment: SegmentGeometry,
    material: MaterialPair,
    plate: PlateConfig,
    omega: float,
    integrals: Optional[SectionIntegrals] = None,
) -> ScaleFactors:
    if omega < 0:
        raise DomainError(f"angular frequency must be non-negative, got {omega:g}")
    if integrals is None:
        integrals = section_integrals(segment, material, plate.h1)

    nu = material.nu
    delta = segment.thickness / plate.outer_radius
    tau = segment.thickness / plate.reference_thickness
    beta = beta_from_omega(plate, omega)
    return ScaleFactors(
        S1=delta**2 / (12.0 * (1.0 - nu**2)),
        S2=material.kappa_sq * (1.0 - nu) * integrals.K1_bar / (2.0 * delta**2),
        lambda_i=beta / tau,
        D_i=flexural_rigidity(material, segment.thickness),
        beta=beta,
        omega=omega,
        delta=delta,
        tau=tau,
    )
