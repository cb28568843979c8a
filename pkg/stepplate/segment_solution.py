"""Closed-form solution inside one constant-thickness segment at a trial frequency.

The five coupled equations of motion split into three gradient potentials (roots of a
cubic in x, carrying w) and two rotational in-plane potentials (roots of a quadratic).
Each potential is a cylinder function of chi_k R; coefficient c_k multiplies the
first-kind and c_{k+3} (or c_8, c_10) the second-kind solution.

Angular dependence is stripped: w, u0, psi_r and their resultants carry cos(p theta),
v0, psi_theta, N_rtheta, M_rtheta and Q_theta carry sin(p theta).
"""
import logging
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from stepplate.bessel import bessel_values
from stepplate.config import settings
from stepplate.errors import BranchTransitionError, DegenerateFrequencyError, DomainError, UnsupportedRegimeError
from stepplate.material_model import (
    MaterialPair,
    PlateConfig,
    ScaleFactors,
    SectionIntegrals,
    SegmentGeometry,
    scale_factors,
)

logger = logging.getLogger(__name__)

# coefficient slot j -> (root index, first kind?)
COLUMN_ROOTS = np.array([0, 1, 2, 0, 1, 2, 3, 3, 4, 4])
FIRST_KIND = np.array([True, True, True, False, False, False, True, False, True, False])
GRADIENT = COLUMN_ROOTS < 3
CORE_COLUMNS = (0, 1, 2, 6, 8)

FIELD_NAMES = ("w", "dw", "u0", "du0", "v0", "dv0", "psi_r", "dpsi_r", "psi_theta", "dpsi_theta")
RESULTANT_NAMES = ("N_r", "N_theta", "N_rtheta", "M_r", "M_theta", "M_rtheta", "Q_r", "Q_theta")

DECOUPLING_RTOL = 1e-8
DEGENERATE_RTOL = 1e-13
COMPLEX_ROOT_RTOL = 1e-8
AXIS_OFFSET = 1e-9  # fraction of r_n substituted for r = 0


@dataclass(frozen=True)
class DispersionCoefficients:
    A1: float
    A2: float
    A3: float
    A4: float

    def as_array(self) -> np.ndarray:
        return np.array([self.A1, self.A2, self.A3, self.A4])

    def __call__(self, x: float) -> float:
        return ((self.A1 * x + self.A2) * x + self.A3) * x + self.A4

    def residual_scale(self, x: float) -> float:
        return max(abs(self.A1 * x**3), abs(self.A2 * x**2), abs(self.A3 * x), abs(self.A4))


@dataclass(frozen=True)
class SegmentSpectralBasis:
    """Roots, branches and modal vectors of one segment at one frequency.

    `a`, `b`, `w_weight` and `column_scale` stay None until modal_coefficients runs.
    `w_weight[k]` is the w amplitude of gradient potential k (1 unless the root is a
    decoupled membrane wave); `column_scale[k]` is the denominator of its modal vector,
    which the assembly multiplies in to keep the determinant free of poles.
    """

    roots: np.ndarray
    chi: np.ndarray
    oscillatory: np.ndarray
    G: np.ndarray
    xi1: float
    xi2: float
    nu: float
    coefficients: DispersionCoefficients
    beta: Optional[float] = None
    a: Optional[np.ndarray] = None
    b: Optional[np.ndarray] = None
    w_weight: Optional[np.ndarray] = None
    column_scale: Optional[np.ndarray] = None
    integrals: Optional[SectionIntegrals] = None
    material: Optional[MaterialPair] = None

    @property
    def complete(self) -> bool:
        return self.a is not None

    @property
    def branch_signature(self) -> tuple[bool, ...]:
        return tuple(bool(v) for v in self.oscillatory)


@dataclass(frozen=True)
class FieldState:
    r: float
    p: int
    w: float
    dw: float
    u0: float
    du0: float
    v0: float
    dv0: float
    psi_r: float
    dpsi_r: float
    psi_theta: float
    dpsi_theta: float


@dataclass(frozen=True)
class ResultantState:
    r: float
    p: int
    N_r: float
    N_theta: float
    N_rtheta: float
    M_r: float
    M_theta: float
    M_rtheta: float
    Q_r: float
    Q_theta: float


def dispersion_coefficients(integrals: SectionIntegrals, scales: ScaleFactors, delta: float) -> DispersionCoefficients:
    K1, K2, K3 = integrals.K1_bar, integrals.K2_bar, integrals.K3_bar
    I1, I2, I3 = integrals.I1_bar, integrals.I2_bar, integrals.I3_bar
    dk = integrals.stiffness_det
    di = integrals.inertia_det
    cross = K3 * I1 + K1 * I3 - 2.0 * K2 * I2
    s = scales.S1 * scales.lambda_i**2
    shear = scales.S2 * delta**2
    return DispersionCoefficients(
        A1=shear * dk,
        A2=s * (I1 * dk + shear * cross),
        A3=s * (s * (I1 * cross + shear * di) - scales.S2 * K1 * I1),
        A4=s**2 * I1 * (s * di - scales.S2 * I1),
    )


def coupling_terms(integrals: SectionIntegrals, scales: ScaleFactors, delta: float) -> np.ndarray:
    """G1..G8 linking the potential amplitudes (a, b, w) of one root."""
    K1, K2, K3 = integrals.K1_bar, integrals.K2_bar, integrals.K3_bar
    I1, I2, I3 = integrals.I1_bar, integrals.I2_bar, integrals.I3_bar
    dk = integrals.stiffness_det
    s = scales.S1 * scales.lambda_i**2
    S2 = scales.S2
    return np.array([
        -s * (K3 * I1 - K2 * I2) / dk,
        -s * (K1 * I2 - K2 * I1) / dk,
        -(s * (K3 * I2 - K2 * I3) + S2 * K2) / dk,
        -(s * (K1 * I3 - K2 * I2) - S2 * K1) / dk,
        S2,
        -S2 * delta**2 * K2 / dk,
        S2 * delta**2 * K1 / dk,
        -s * I1,
    ])


def _polish(coeffs: DispersionCoefficients, x: float) -> float:
    A1, A2, A3, _ = coeffs.as_array()
    for _ in range(3):
        f = coeffs(x)
        df = (3.0 * A1 * x + 2.0 * A2) * x + A3
        if df == 0.0 or f == 0.0:
            break
        candidate = x - f / df
        if abs(coeffs(candidate)) >= abs(f):
            break
        x = candidate
    return x


def _in_plane_roots(G: np.ndarray, nu: float, beta: Optional[float]) -> tuple[float, float, float, float]:
    G1, G2, G3, G4 = G[:4]
    half = 1.0 - nu
    xi1 = 2.0 * (G1 + G4) / half
    xi2 = 4.0 * (G1 * G4 - G2 * G3) / half**2
    # xi1^2 - 4 xi2 without the cancellation
    disc = 4.0 * ((G1 - G4)**2 + 4.0 * G2 * G3) / half**2
    if disc < 0.0:
        if disc < -1e-12 * xi1**2:
            raise UnsupportedRegimeError(f"in-plane roots are complex at beta={beta}", beta=beta)
        disc = 0.0
    t = 0.5 * (xi1 + np.copysign(np.sqrt(disc), xi1))
    pair = (t, xi2 / t) if t != 0.0 else (0.0, 0.0)
    return xi1, xi2, max(pair), min(pair)


def characteristic_roots(
    coeffs: DispersionCoefficients,
    G: np.ndarray,
    nu: float,
    beta: Optional[float] = None,
    segment: Optional[int] = None,
) -> SegmentSpectralBasis:
    """Real roots x1..x5 with chi_k = sqrt|x_k| and the branch of each (x < 0 oscillatory)."""
    A = coeffs.as_array()
    if A[0] == 0.0:
        raise DomainError("leading dispersion coefficient vanishes; omega must be positive")
    raw = np.roots(A)
    if np.any(np.abs(raw.imag) > COMPLEX_ROOT_RTOL * np.maximum(np.abs(raw), 1e-300)):
        raise UnsupportedRegimeError(f"characteristic cubic has complex roots at beta={beta}", beta=beta)
    cubic = np.sort([_polish(coeffs, float(x)) for x in raw.real], kind="stable")

    xi1, xi2, x4, x5 = _in_plane_roots(G, nu, beta)
    roots = np.array([*cubic, x4, x5])
    for k, x in enumerate(roots):
        if abs(x) < settings.BRANCH_GUARD:
            where = f" in segment {segment}" if segment is not None else ""
            raise BranchTransitionError(
                f"root x{k + 1}={x:.3e} inside the branch guard{where} at beta={beta}",
                beta=beta,
                root=k + 1,
                segment=segment,
            )

    return SegmentSpectralBasis(
        roots=roots,
        chi=np.sqrt(np.abs(roots)),
        oscillatory=roots < 0.0,
        G=np.asarray(G, dtype=float),
        xi1=xi1,
        xi2=xi2,
        nu=nu,
        coefficients=coeffs,
        beta=beta,
    )


def modal_coefficients(
    basis: SegmentSpectralBasis,
    integrals: SectionIntegrals,
    scales: ScaleFactors,
    material: Optional[MaterialPair] = None,
) -> SegmentSpectralBasis:
    G1, G2, G3, G4, G5, G6, G7, G8 = basis.G
    c = 0.5 * (1.0 - basis.nu)
    shear = scales.S2 * scales.delta**2
    a = np.zeros(10)
    w_weight = np.ones(3)
    column_scale = np.ones(5)

    for k in range(3):
        x = basis.roots[k]
        mag = max(abs(x), abs(G1), abs(G4))
        product = (x - G1) * (x - G4)
        den = product - G2 * G3
        if abs(x - G1) <= DECOUPLING_RTOL * mag and abs(G2) <= DECOUPLING_RTOL * mag:
            # membrane wave decoupled from w: take the null vector from the other two equations
            v = np.cross([-G3, x - G4, -G5], [G6 * x, G7 * x, shear * x - G8])
            if v[0] == 0.0:
                raise DegenerateFrequencyError(f"membrane root x{k + 1} has no modal vector", beta=basis.beta)
            a[k] = 1.0
            a[k + 5] = v[1] / v[0]
            w_weight[k] = v[2] / v[0]
            logger.debug("[BASIS] x%d=%.6e decoupled membrane root at beta=%s", k + 1, x, basis.beta)
        # relative to the two terms that cancel, not to the largest entry
        elif abs(den) <= DEGENERATE_RTOL * (abs(product) + abs(G2 * G3)):
            raise DegenerateFrequencyError(f"modal denominator of x{k + 1} vanishes", beta=basis.beta)
        else:
            a[k] = G2 * G5 / den
            a[k + 5] = (x - G1) * G5 / den
            column_scale[k] = den

    for k in (3, 4):
        x = basis.roots[k]
        mag = max(abs(c * x), abs(G1), abs(G4))
        den = c * x - G1
        if abs(den) <= DECOUPLING_RTOL * mag and abs(G2) <= DECOUPLING_RTOL * mag:
            other = c * x - G4
            if abs(other) <= DEGENERATE_RTOL * mag:
                raise DegenerateFrequencyError(f"rotational root x{k + 1} is doubly degenerate", beta=basis.beta)
            a[k] = 1.0
            a[k + 5] = G3 / other
        elif abs(den) <= DEGENERATE_RTOL * (abs(c * x) + abs(G1)):
            raise DegenerateFrequencyError(f"modal denominator of x{k + 1} vanishes", beta=basis.beta)
        else:
            a[k] = G2 / den
            a[k + 5] = 1.0
            column_scale[k] = den

    b = a.copy()
    b[[3, 4, 8, 9]] *= -1.0
    return replace(
        basis,
        a=a,
        b=b,
        w_weight=w_weight,
        column_scale=column_scale,
        integrals=integrals,
        material=material if material is not None else basis.material,
    )


def build_basis(segment: SegmentGeometry, plate: PlateConfig, integrals: SectionIntegrals,
                omega: float) -> SegmentSpectralBasis:
    scales = scale_factors(segment, plate.material, plate, omega, integrals)
    coeffs = dispersion_coefficients(integrals, scales, scales.delta)
    G = coupling_terms(integrals, scales, scales.delta)
    basis = characteristic_roots(coeffs, G, plate.material.nu, beta=scales.beta, segment=segment.index)
    return modal_coefficients(basis, integrals, scales, plate.material)


def _dimensionless_radius(segment: SegmentGeometry, r: float) -> float:
    r_n = segment.reference_radius
    slack = 1e-12 * r_n
    if r < segment.inner_radius - slack or r > segment.outer_radius + slack:
        raise DomainError(
            f"r={r:g} outside segment {segment.index} [{segment.inner_radius:g}, {segment.outer_radius:g}]"
        )
    return max(r / r_n, AXIS_OFFSET)


def _radial_basis(basis: SegmentSpectralBasis, segment: SegmentGeometry, p: int,
                  R: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Z, dZ/dR, d2Z/dR2 for the ten coefficient slots.

    Evanescent solutions are referenced to the segment edges, I(chi R) e^{-chi R_out} and
    K(chi R) e^{chi R_in}, so neither overflows inside the segment.
    """
    r_n = segment.reference_radius
    R_in = segment.inner_radius / r_n
    R_out = segment.outer_radius / r_n
    x = basis.roots[COLUMN_ROOTS]
    chi = basis.chi[COLUMN_ROOTS]
    osc = basis.oscillatory[COLUMN_ROOTS]
    active = FIRST_KIND if segment.is_core else np.ones(10, dtype=bool)

    Z = np.zeros(10)
    dZ = np.zeros(10)
    kinds = (
        ("J", osc & FIRST_KIND),
        ("Y", osc & ~FIRST_KIND),
        ("I", ~osc & FIRST_KIND),
        ("K", ~osc & ~FIRST_KIND),
    )
    for kind, mask in kinds:
        mask = mask & active
        if not mask.any():
            continue
        value, derivative = bessel_values(kind, p, chi[mask] * R, scaled=True)
        if kind == "I":
            ref = np.exp(chi[mask] * (R - R_out))
        elif kind == "K":
            ref = np.exp(-chi[mask] * (R - R_in))
        else:
            ref = 1.0
        Z[mask] = value * ref
        dZ[mask] = chi[mask] * derivative * ref
    d2Z = x * Z - dZ / R + p**2 * Z / R**2
    return Z, dZ, d2Z


def field_columns(segment: SegmentGeometry, basis: SegmentSpectralBasis, p: int, r: float) -> np.ndarray:
    """Dimensional field quantities (rows, FIELD_NAMES order) per unit coefficient (columns)."""
    if not basis.complete:
        raise DomainError("basis has no modal coefficients yet")
    R = _dimensionless_radius(segment, r)
    Z, dZ, d2Z = _radial_basis(basis, segment, p, R)

    ZR = Z / R
    dZR = dZ / R - Z / R**2
    g0 = np.where(GRADIENT, dZ, p * ZR)
    g1 = np.where(GRADIENT, -p * ZR, -dZ)
    dg0 = np.where(GRADIENT, d2Z, p * dZR)
    dg1 = np.where(GRADIENT, -p * dZR, -d2Z)

    ints = basis.integrals
    K1, K2, K3 = ints.K1_bar, ints.K2_bar, ints.K3_bar
    dk = ints.stiffness_det
    outer = basis.a[COLUMN_ROOTS]
    inner = basis.a[COLUMN_ROOTS + 5]
    membrane = (K3 * outer - K2 * inner) / dk
    rotation = (K1 * inner - K2 * outer) / dk
    e = np.where(GRADIENT, basis.w_weight[np.minimum(COLUMN_ROOTS, 2)], 0.0)

    h = segment.thickness
    r_n = segment.reference_radius
    return np.array([
        r_n * e * Z,
        e * dZ,
        h * membrane * g0,
        h * membrane * dg0 / r_n,
        h * membrane * g1,
        h * membrane * dg1 / r_n,
        rotation * g0,
        rotation * dg0 / r_n,
        rotation * g1,
        rotation * dg1 / r_n,
    ])


def resultant_columns(
    segment: SegmentGeometry,
    basis: SegmentSpectralBasis,
    p: int,
    r: float,
    fields: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Stress resultants (rows, RESULTANT_NAMES order) per unit coefficient (columns)."""
    if basis.material is None:
        raise DomainError("basis carries no material; build it with build_basis")
    if fields is None:
        fields = field_columns(segment, basis, p, r)
    w, dw, u, du, v, dv, pr, dpr, pt, dpt = fields
    r = max(r, AXIS_OFFSET * segment.reference_radius)

    mat = basis.material
    nu = mat.nu
    c = 0.5 * (1.0 - nu)
    h = segment.thickness
    ints = basis.integrals
    A = mat.E_c * h * ints.K1_bar
    B = mat.E_c * h**2 * ints.K2_bar
    D = mat.E_c * h**3 * ints.K3_bar

    e_r = du
    e_t = (u + p * v) / r
    g_rt = dv - v / r - p * u / r
    k_r = dpr
    k_t = (pr + p * pt) / r
    k_rt = dpt - pt / r - p * pr / r
    return np.array([
        A * (e_r + nu * e_t) + B * (k_r + nu * k_t),
        A * (e_t + nu * e_r) + B * (k_t + nu * k_r),
        c * (A * g_rt + B * k_rt),
        B * (e_r + nu * e_t) + D * (k_r + nu * k_t),
        B * (e_t + nu * e_r) + D * (k_t + nu * k_r),
        c * (B * g_rt + D * k_rt),
        mat.kappa_sq * c * A * (pr + dw),
        mat.kappa_sq * c * A * (pt - p * w / r),
    ])


def _coefficients(segment: SegmentGeometry, c) -> np.ndarray:
    c = np.asarray(c, dtype=float)
    if c.shape != (10,):
        raise DomainError(f"segment coefficient vector must have 10 entries, got shape {c.shape}")
    if segment.is_core and np.any(c[~FIRST_KIND] != 0.0):
        raise DomainError("second-kind coefficients must vanish in a segment containing r = 0")
    return c


def evaluate_fields(segment: SegmentGeometry, basis: SegmentSpectralBasis, c, p: int, r: float) -> FieldState:
    values = field_columns(segment, basis, p, r) @ _coefficients(segment, c)
    return FieldState(r, p, *(float(v) for v in values))


def evaluate_resultants(segment: SegmentGeometry, basis: SegmentSpectralBasis, c, p: int,
                        r: float) -> ResultantState:
    values = resultant_columns(segment, basis, p, r) @ _coefficients(segment, c)
    return ResultantState(r, p, *(float(v) for v in values))
