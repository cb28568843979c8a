"""Global boundary/continuity system, its scaled determinant and the frequency search.

Rows are made dimensionless with fixed positive factors (w/r_n, u0/h_n, N/(E_c h_n),
M/(E_c h_n^2), ...). Columns are multiplied by the modal denominators of their roots
and then normalized by their max-abs entry, so the determinant is finite, pole-free and
keeps its sign between branch transitions.
"""
import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Iterable, Iterator, Optional, Sequence

import numpy as np

from stepplate.config import settings
from stepplate.errors import (
    BranchTransitionError,
    DegenerateConfigurationError,
    DegenerateFrequencyError,
    DomainError,
)
from stepplate.material_model import (
    MaterialPair,
    PlateConfig,
    SectionIntegrals,
    SegmentGeometry,
    frequency_hz,
    omega_from_beta,
    plate_section_integrals,
)
from stepplate.segment_solution import (
    COLUMN_ROOTS,
    CORE_COLUMNS,
    FIELD_NAMES,
    FIRST_KIND,
    RESULTANT_NAMES,
    FieldState,
    ResultantState,
    SegmentSpectralBasis,
    build_basis,
    evaluate_fields,
    evaluate_resultants,
    field_columns,
    resultant_columns,
)

logger = logging.getLogger(__name__)

BOUNDARY_SETS = {
    "clamped": ("u0", "v0", "w", "psi_r", "psi_theta"),
    "hard_ss": ("u0", "v0", "w", "psi_theta", "M_r"),
    "soft_ss": ("w", "N_r", "N_rtheta", "M_r", "M_rtheta"),
    "free": ("N_r", "N_rtheta", "Q_r", "M_r", "M_rtheta"),
}
CONTINUITY_SETS = {
    "twisting": ("w", "u0", "v0", "psi_r", "psi_theta", "Q_r", "N_r", "N_rtheta", "M_r", "M_rtheta"),
    "hoop": ("w", "u0", "v0", "psi_r", "psi_theta", "Q_r", "N_r", "N_theta", "M_r", "M_theta"),
}
AXISYMMETRIC_CONTINUITY = ("w", "u0", "psi_r", "Q_r", "N_r", "M_r")
# identically zero at p = 0 (sin 0 = 0)
TANGENTIAL = frozenset({"v0", "psi_theta", "N_rtheta", "M_rtheta", "Q_theta"})
NULL_ENTRY_RTOL = 1e-8


@dataclass(frozen=True)
class RowLabel:
    kind: str
    location: str
    quantity: str


@dataclass(frozen=True)
class ColumnLabel:
    segment: int
    coefficient: int


@dataclass(frozen=True)
class SystemMatrix:
    matrix: np.ndarray
    raw: np.ndarray
    rows: tuple[RowLabel, ...]
    columns: tuple[ColumnLabel, ...]
    column_norms: np.ndarray
    column_scales: np.ndarray
    log_scales: np.ndarray
    bases: tuple[SegmentSpectralBasis, ...]
    beta: float
    p: int

    @property
    def branch_signature(self) -> tuple:
        return tuple(b.branch_signature for b in self.bases)


@dataclass(frozen=True)
class Determinant:
    beta: float
    value: float
    sign: float
    log_abs: float
    branch_signature: tuple


@dataclass(frozen=True)
class ModeResult:
    p: int
    n: int
    beta: float
    omega: float
    frequency: float
    coefficients: tuple[np.ndarray, ...]
    residual: float
    singular_ratio: float

    @property
    def label(self) -> str:
        return f"({self.p},{self.n})"


@dataclass
class FrequencySearch:
    p: int
    modes: list[ModeResult]
    shortfall: bool
    diagnostics: list[str] = field(default_factory=list)


def _check_wavenumber(p: int) -> int:
    if isinstance(p, bool) or int(p) != p or p < 0:
        raise DomainError(f"circumferential wavenumber must be a non-negative integer, got {p!r}")
    return int(p)


def active_columns(segment: SegmentGeometry, p: int) -> list[int]:
    """Coefficient slots (0-based) that enter the system for this segment."""
    slots = CORE_COLUMNS if segment.is_core else range(10)
    if p == 0:
        # rotational potentials carry only the excluded torsional family
        return [j for j in slots if COLUMN_ROOTS[j] < 3]
    return list(slots)


def _quantity_scales(segment: SegmentGeometry, material: MaterialPair) -> dict[str, float]:
    r_n = segment.reference_radius
    h_n = segment.reference_thickness
    force = 1.0 / (material.E_c * h_n)
    moment = force / h_n
    scales = {"w": 1.0 / r_n, "dw": 1.0, "u0": 1.0 / h_n, "v0": 1.0 / h_n, "psi_r": 1.0, "psi_theta": 1.0}
    scales.update({name: force for name in ("N_r", "N_theta", "N_rtheta", "Q_r", "Q_theta")})
    scales.update({name: moment for name in ("M_r", "M_theta", "M_rtheta")})
    return scales


def _quantity_rows(segment: SegmentGeometry, basis: SegmentSpectralBasis, p: int, r: float,
                   names: Sequence[str]) -> np.ndarray:
    fields = field_columns(segment, basis, p, r)
    lookup = dict(zip(FIELD_NAMES, fields))
    if any(name in RESULTANT_NAMES for name in names):
        lookup.update(zip(RESULTANT_NAMES, resultant_columns(segment, basis, p, r, fields=fields)))
    scales = _quantity_scales(segment, basis.material)
    return np.array([lookup[name] * scales[name] for name in names])


def boundary_rows(
    edge: str,
    bc: str,
    p: int,
    segment: SegmentGeometry,
    basis: SegmentSpectralBasis,
    radius: Optional[float] = None,
) -> tuple[np.ndarray, list[RowLabel]]:
    """Edge conditions as rows over the segment's ten coefficient slots."""
    if edge not in ("inner", "outer"):
        raise DomainError(f"edge must be 'inner' or 'outer', got {edge!r}")
    if bc not in BOUNDARY_SETS:
        raise DomainError(f"unknown boundary condition {bc!r}")
    if edge == "inner" and segment.is_core:
        raise DomainError("a circular plate has no inner edge")
    if radius is None:
        radius = segment.inner_radius if edge == "inner" else segment.outer_radius
    names = [q for q in BOUNDARY_SETS[bc] if p > 0 or q not in TANGENTIAL]
    labels = [RowLabel("boundary", f"{edge} edge", q) for q in names]
    return _quantity_rows(segment, basis, p, radius, names), labels


def continuity_rows(
    left: SegmentGeometry,
    right: SegmentGeometry,
    p: int,
    bases: tuple[SegmentSpectralBasis, SegmentSpectralBasis],
    radius: Optional[float] = None,
    variant: Optional[str] = None,
) -> tuple[np.ndarray, np.ndarray, list[RowLabel]]:
    """Interface rows as (left block, right block); the right block is already negated."""
    variant = variant or settings.CONTINUITY_VARIANT
    if variant not in CONTINUITY_SETS:
        raise DomainError(f"unknown continuity variant {variant!r}")
    if right.index != left.index + 1:
        raise DomainError(f"segments {left.index} and {right.index} are not adjacent")
    if radius is None:
        radius = left.outer_radius
    names = CONTINUITY_SETS[variant] if p > 0 else AXISYMMETRIC_CONTINUITY
    labels = [RowLabel("continuity", f"interface {left.index}", q) for q in names]
    left_block = _quantity_rows(left, bases[0], p, radius, names)
    right_block = -_quantity_rows(right, bases[1], p, radius, names)
    return left_block, right_block, labels


def _log_scale(segment: SegmentGeometry, basis: SegmentSpectralBasis, slot: int) -> float:
    k = COLUMN_ROOTS[slot]
    if basis.oscillatory[k]:
        return 0.0
    r_n = segment.reference_radius
    if FIRST_KIND[slot]:
        return float(basis.chi[k] * segment.outer_radius / r_n)
    return float(-basis.chi[k] * segment.inner_radius / r_n)


def assemble_system(
    config: PlateConfig,
    p: int,
    beta: float,
    integrals: Optional[Sequence[SectionIntegrals]] = None,
    variant: Optional[str] = None,
) -> SystemMatrix:
    p = _check_wavenumber(p)
    if not beta > 0:
        raise DomainError(f"beta must be positive, got {beta}")
    if integrals is None:
        integrals = plate_section_integrals(config)
    omega = omega_from_beta(config, beta)
    segments = config.segments
    bases = tuple(build_basis(s, config, ints, omega) for s, ints in zip(segments, integrals))

    slots = [active_columns(s, p) for s in segments]
    offsets = np.cumsum([0] + [len(cols) for cols in slots])
    columns = tuple(ColumnLabel(s.index, j + 1) for s, cols in zip(segments, slots) for j in cols)
    size = len(columns)
    raw = np.zeros((size, size))
    rows: list[RowLabel] = []

    def place(block: np.ndarray, i: int, start: int) -> None:
        raw[start:start + len(block), offsets[i]:offsets[i + 1]] += block[:, slots[i]]

    if config.is_annular:
        block, labels = boundary_rows("inner", config.inner_bc, p, segments[0], bases[0])
        place(block, 0, len(rows))
        rows.extend(labels)
    for i in range(len(segments) - 1):
        left, right, labels = continuity_rows(segments[i], segments[i + 1], p, (bases[i], bases[i + 1]),
                                              variant=variant)
        place(left, i, len(rows))
        place(right, i + 1, len(rows))
        rows.extend(labels)
    block, labels = boundary_rows("outer", config.outer_bc, p, segments[-1], bases[-1])
    place(block, len(segments) - 1, len(rows))
    rows.extend(labels)
    if len(rows) != size:
        raise DegenerateConfigurationError(f"{len(rows)} conditions for {size} unknowns at p={p}")

    column_scales = np.concatenate([b.column_scale[COLUMN_ROOTS[cols]] for b, cols in zip(bases, slots)])
    scaled = raw * column_scales
    norms = np.max(np.abs(scaled), axis=0)
    bad = ~np.isfinite(norms) | (norms == 0.0)
    if np.any(bad):
        label = columns[int(np.argmax(bad))]
        raise DegenerateConfigurationError(
            f"column c{label.coefficient} of segment {label.segment} vanishes at beta={beta:.6g}, p={p}"
        )
    log_scales = np.array([_log_scale(s, b, j) for s, b, cols in zip(segments, bases, slots) for j in cols])
    return SystemMatrix(
        matrix=scaled / norms,
        raw=raw,
        rows=tuple(rows),
        columns=columns,
        column_norms=norms,
        column_scales=column_scales,
        log_scales=log_scales,
        bases=bases,
        beta=float(beta),
        p=p,
    )


def characteristic_determinant(
    config: PlateConfig,
    p: int,
    beta: float,
    integrals: Optional[Sequence[SectionIntegrals]] = None,
    variant: Optional[str] = None,
) -> Determinant:
    system = assemble_system(config, p, beta, integrals, variant)
    sign, log_abs = np.linalg.slogdet(system.matrix)
    return Determinant(
        beta=float(beta),
        value=float(sign * math.exp(log_abs)) if np.isfinite(log_abs) else 0.0,
        sign=float(sign),
        log_abs=float(log_abs),
        branch_signature=system.branch_signature,
    )


def _sweep_grid(lo: float, hi: float, step: float) -> np.ndarray:
    count = int(math.floor((hi - lo) / step + 1e-9))
    grid = lo + step * np.arange(count + 1)
    if grid[-1] < hi * (1.0 - 1e-12):
        grid = np.append(grid, hi)
    return grid


def _grid_ceiling(lo: float, beta: float, step: float) -> float:
    # keep cells on the full-range grid, plus one look-ahead cell
    return lo + step * (math.ceil((beta - lo) / step - 1e-9) + 2)


class _RootScanner:
    """Sign-change search of one wavenumber over a beta interval."""

    def __init__(self, config, p, integrals, variant):
        self.config = config
        self.p = p
        self.integrals = integrals
        self.variant = variant
        self.diagnostics: list[str] = []

    def sample(self, beta: float, nudge: bool = True) -> Optional[Determinant]:
        """Determinant at beta; grid samples retry at beta(1 +- BRANCH_NUDGE) and record a skip."""
        trials = [beta]
        if nudge:
            trials += [beta * (1.0 + settings.BRANCH_NUDGE), beta * (1.0 - settings.BRANCH_NUDGE)]
        for trial in trials:
            try:
                return characteristic_determinant(self.config, self.p, trial, self.integrals, self.variant)
            except (BranchTransitionError, DegenerateFrequencyError) as exc:
                reason = exc
        if nudge:
            self.diagnostics.append(f"beta={beta:.6f} skipped: {reason}")
        logger.debug("[SKIP] p=%d beta=%.8f: %s", self.p, beta, reason)
        return None

    def samples(self, grid: Iterable[float]) -> Iterator[Determinant]:
        for beta in grid:
            d = self.sample(float(beta))
            if d is not None:
                yield d

    def consistent_cells(self, a: Determinant, b: Determinant, depth: int = 0) -> list:
        """Split [a, b] where the branch pattern changes so no cell straddles a transition."""
        if a.branch_signature == b.branch_signature:
            return [(a, b)]
        if depth >= 60 or b.beta - a.beta <= settings.BISECTION_RTOL * b.beta:
            logger.debug("[SKIP] p=%d branch transition near beta=%.8f", self.p, 0.5 * (a.beta + b.beta))
            return []
        mid = self.sample(0.5 * (a.beta + b.beta), nudge=False)
        if mid is None:
            # a sliver around the transition itself is dropped quietly
            if b.beta - a.beta > settings.BRANCH_NUDGE * b.beta:
                self.abandon(a, b, "branch split")
            return []
        return self.consistent_cells(a, mid, depth + 1) + self.consistent_cells(mid, b, depth + 1)

    def abandon(self, a: Determinant, b: Determinant, stage: str) -> None:
        message = f"cell [{a.beta:.8f}, {b.beta:.8f}] abandoned during {stage}"
        self.diagnostics.append(message)
        logger.warning("[WARN] p=%d %s", self.p, message)

    def refine(self, a: Determinant, b: Determinant, levels: int) -> list:
        """Halve a same-sign cell looking for a hidden pair of roots."""
        if levels <= 0:
            return []
        mid = self.sample(0.5 * (a.beta + b.beta), nudge=False)
        if mid is None:
            self.abandon(a, b, "refinement")
            return []
        if mid.branch_signature != a.branch_signature:
            return []
        if mid.sign != a.sign:
            return [(a, mid), (mid, b)]
        return self.refine(a, mid, levels - 1) + self.refine(mid, b, levels - 1)

    def brackets(self, before, a, b, after) -> list:
        found = []
        for lo, hi in self.consistent_cells(a, b):
            if lo.sign != hi.sign:
                found.append((lo, hi))
            elif (before is None or before.log_abs > lo.log_abs) and (after is None or after.log_abs > hi.log_abs):
                found.extend(self.refine(lo, hi, settings.REFINE_LEVELS))
        return found

    def bisect(self, a: Determinant, b: Determinant) -> Optional[float]:
        if a.sign == 0.0:
            return a.beta
        if b.sign == 0.0:
            return b.beta
        while b.beta - a.beta > settings.BISECTION_RTOL * b.beta:
            mid = self.sample(0.5 * (a.beta + b.beta), nudge=False)
            if mid is None:
                self.abandon(a, b, "bisection")
                return None
            if mid.sign == 0.0:
                return mid.beta
            if mid.sign == a.sign:
                a = mid
            else:
                b = mid
        # secant step inside the final bracket
        if a.value != b.value and a.value * b.value < 0:
            return a.beta - a.value * (b.beta - a.beta) / (b.value - a.value)
        return 0.5 * (a.beta + b.beta)


def _normalized_coefficients(system: SystemMatrix, vector: np.ndarray,
                             n_segments: int) -> tuple[np.ndarray, ...]:
    values = vector * system.column_scales / system.column_norms
    values = values / np.max(np.abs(values))
    significant = np.flatnonzero(np.abs(values) > NULL_ENTRY_RTOL)
    if values[significant[0]] < 0:
        values = -values
    per_segment = [np.zeros(10) for _ in range(n_segments)]
    for label, value in zip(system.columns, values):
        per_segment[label.segment - 1][label.coefficient - 1] = value
    return tuple(per_segment)


def _converged_mode(config, p, beta, integrals, variant) -> tuple[Optional[ModeResult], Optional[str]]:
    try:
        system = assemble_system(config, p, beta, integrals, variant)
    except (BranchTransitionError, DegenerateFrequencyError) as exc:
        return None, f"root at beta={beta:.8f} could not be re-assembled: {exc}"
    _, singular, vh = np.linalg.svd(system.matrix)
    ratio = float(singular[-1] / singular[0])
    if ratio > settings.ROOT_SINGULAR_RTOL:
        return None, f"spurious sign change at beta={beta:.8f} (sigma ratio {ratio:.2e})"
    _, log_abs = np.linalg.slogdet(system.matrix)
    mode = ModeResult(
        p=p,
        n=0,
        beta=beta,
        omega=omega_from_beta(config, beta),
        frequency=frequency_hz(config, beta),
        coefficients=_normalized_coefficients(system, vh[-1], len(config.segments)),
        residual=float(math.exp(log_abs)) if np.isfinite(log_abs) else 0.0,
        singular_ratio=ratio,
    )
    return mode, None


def find_frequencies(
    config: PlateConfig,
    p: int,
    beta_range: Optional[tuple[float, float]] = None,
    max_modes: int = 10,
    *,
    integrals: Optional[Sequence[SectionIntegrals]] = None,
    variant: Optional[str] = None,
    expected_count: Optional[int] = None,
) -> FrequencySearch:
    p = _check_wavenumber(p)
    lo, hi = beta_range or (settings.BETA_MIN, settings.BETA_MAX)
    if not 0 < lo < hi:
        raise DomainError(f"beta range must satisfy 0 < lo < hi, got ({lo}, {hi})")
    if max_modes < 1:
        raise DomainError(f"max_modes must be at least 1, got {max_modes}")
    if integrals is None:
        integrals = plate_section_integrals(config)

    scanner = _RootScanner(config, p, integrals, variant)
    samples = scanner.samples(_sweep_grid(lo, hi, settings.BETA_STEP))
    window = list(itertools.islice(samples, 2))
    before = None
    modes: list[ModeResult] = []
    while len(window) == 2 and len(modes) < max_modes:
        a, b = window
        if b.beta - a.beta > 1.5 * settings.BETA_STEP:
            message = f"no usable samples between beta={a.beta:.6f} and {b.beta:.6f}; roots there may be missed"
            scanner.diagnostics.append(message)
            logger.warning("[WARN] p=%d %s", p, message)
        after = next(samples, None)
        for bracket in scanner.brackets(before, a, b, after):
            beta = scanner.bisect(*bracket)
            if beta is None or (modes and beta <= modes[-1].beta * (1.0 + 10 * settings.BISECTION_RTOL)):
                continue
            mode, problem = _converged_mode(config, p, beta, integrals, variant)
            if problem:
                scanner.diagnostics.append(problem)
                logger.warning("[WARN] p=%d %s", p, problem)
                continue
            modes.append(mode)
            logger.debug("[ROOT] p=%d beta=%.6f f=%.3f Hz", p, mode.beta, mode.frequency)
        before, window = a, [b] + ([after] if after is not None else [])

    modes = [
        replace(m, n=n) for n, m in enumerate(sorted(modes, key=lambda m: m.beta)[:max_modes], 1)
    ]
    diagnostics = scanner.diagnostics
    if expected_count is not None and expected_count != len(modes):
        message = f"root count {len(modes)} differs from reference count {expected_count} on [{lo}, {hi}]"
        diagnostics.append(message)
        logger.warning("[WARN] p=%d %s", p, message)
    shortfall = len(modes) < max_modes
    logger.info("[SWEEP] p=%d found %d mode(s) in beta [%.3f, %.3f]", p, len(modes), lo, hi)
    return FrequencySearch(p=p, modes=modes, shortfall=shortfall, diagnostics=diagnostics)


def mode_table(
    config: PlateConfig,
    p_max: int,
    n_per_p: int,
    *,
    modes: Optional[int] = None,
    beta_range: Optional[tuple[float, float]] = None,
    integrals: Optional[Sequence[SectionIntegrals]] = None,
    variant: Optional[str] = None,
    workers: Optional[int] = None,
    diagnostics: Optional[list[str]] = None,
) -> list[ModeResult]:
    """Modes of p = 0..p_max sorted by frequency; truncated to `modes` when given.

    Search diagnostics of every wavenumber are appended to `diagnostics` when a list is passed.
    """
    p_max = _check_wavenumber(p_max)
    lo, hi = beta_range or (settings.BETA_MIN, settings.BETA_MAX)
    if integrals is None:
        integrals = plate_section_integrals(config)
    workers = workers or settings.WORKERS

    def search(p: int, ceiling: float) -> FrequencySearch:
        return find_frequencies(config, p, (lo, ceiling), n_per_p, integrals=integrals, variant=variant)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            searches = list(pool.map(lambda p: search(p, hi), range(p_max + 1)))
    else:
        searches = []
        ceiling = hi
        for p in range(p_max + 1):
            searches.append(search(p, ceiling))
            found = sorted(m.beta for s in searches for m in s.modes)
            if modes and len(found) >= modes:
                ceiling = min(hi, _grid_ceiling(lo, found[modes - 1], settings.BETA_STEP))

    if diagnostics is not None:
        diagnostics.extend(f"p={s.p}: {d}" for s in searches for d in s.diagnostics)
    table = sorted((m for s in searches for m in s.modes), key=lambda m: (m.beta, m.p, m.n))
    return table[:modes] if modes else table


def _segment_at(config: PlateConfig, r: float) -> int:
    for i, segment in enumerate(config.segments):
        if r <= segment.outer_radius * (1.0 + 1e-12):
            return i
    raise DomainError(f"r={r:g} lies outside the plate (r_n={config.outer_radius:g})")


def mode_fields(
    config: PlateConfig,
    mode: ModeResult,
    radii: Iterable[float],
    integrals: Optional[Sequence[SectionIntegrals]] = None,
) -> list[tuple[FieldState, ResultantState]]:
    """Dimensional fields and resultants of a converged mode along the radius."""
    if integrals is None:
        integrals = plate_section_integrals(config)
    bases = [build_basis(s, config, ints, mode.omega) for s, ints in zip(config.segments, integrals)]
    profile = []
    for r in radii:
        i = _segment_at(config, r)
        segment, basis, c = config.segments[i], bases[i], mode.coefficients[i]
        profile.append((evaluate_fields(segment, basis, c, mode.p, r), evaluate_resultants(segment, basis, c,
                                                                                           mode.p, r)))
    return profile


def mode_residual(
    config: PlateConfig,
    mode: ModeResult,
    integrals: Optional[Sequence[SectionIntegrals]] = None,
    variant: Optional[str] = None,
) -> float:
    """Largest boundary/continuity row residual of a mode, in normalized-column units.

    Each row residual is divided by the row's largest normalized entry.
    """
    system = assemble_system(config, mode.p, mode.beta, integrals, variant)
    c = np.array([mode.coefficients[col.segment - 1][col.coefficient - 1] for col in system.columns])
    v = c * system.column_norms / system.column_scales
    v = v / np.max(np.abs(v))
    row_scale = np.max(np.abs(system.matrix), axis=1)
    return float(np.max(np.abs(system.matrix @ v) / np.where(row_scale > 0, row_scale, 1.0)))
