#!/usr/bin/env python3
"""stepplate command line: frequency tables, parametric sweeps, oracle validation.

Result tables go to stdout (or --csv); progress and warnings go to stderr via logging.
"""
import argparse
import json
import logging
import math
import sys
from pathlib import Path
from typing import Literal, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, PositiveInt, ValidationError, field_validator, model_validator

from stepplate.assembly_eigensolver import find_frequencies, mode_fields, mode_table
from stepplate.config import CONFIG_DIR, settings
from stepplate.errors import (
    BranchTransitionError,
    ConfigFileError,
    DegenerateFrequencyError,
    DomainError,
    OracleError,
    PlateSolverError,
    UnsupportedRegimeError,
)
from stepplate.fem_oracle import count_below, oracle_frequencies
from stepplate.material_model import (
    EDGE_CONDITIONS,
    PlateConfig,
    beta_from_omega,
    frequency_hz,
    plate_section_integrals,
)

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_TOLERANCE = 1
EXIT_CONFIG = 2
EXIT_REGIME = 3
EXIT_ORACLE = 4

BETA_FORMAT = "%.4f"

# published frequencies (Hz) of the two-step FG plate, ordered by frequency
TABLE1_REFERENCE = {
    "free": (
        "table1_free.json",
        [
            ("(2,1)", 83.543),
            ("(0,1)", 128.289),
            ("(3,1)", 146.398),
            ("(4,1)", 227.583),
            ("(1,1)", 230.416),
            ("(5,1)", 331.664),
            ("(2,2)", 395.639),
            ("(6,1)", 457.797),
            ("(0,2)", 477.222),
            ("(7,1)", 604.337),
        ],
    ),
    "soft_ss": (
        "table1_sss.json",
        [
            ("(0,1)", 58.084),
            ("(1,1)", 144.063),
            ("(2,1)", 297.991),
            ("(0,2)", 382.925),
            ("(3,1)", 468.489),
            ("(1,2)", 606.805),
            ("(4,1)", 628.476),
            ("(5,1)", 790.895),
            ("(2,2)", 796.988),
            ("(0,3)", 867.957),
        ],
    ),
    "clamped": (
        "table1_clamped.json",
        [
            ("(0,1)", 110.629),
            ("(1,1)", 223.279),
            ("(2,1)", 392.735),
            ("(0,2)", 493.537),
            ("(3,1)", 594.290),
            ("(1,2)", 767.116),
            ("(4,1)", 782.061),
            ("(5,1)", 958.938),
            ("(2,2)", 978.960),
            ("(0,3)", 1044.083),
        ],
    ),
}

SweepParameter = Literal["step_location", "thickness_ratio", "power_index"]


class RunSpec(BaseModel):
    model_config = ConfigDict(extra="ignore")

    command: Literal["freqs", "sweep", "validate", "table1", "shape"]
    config: Optional[str] = None
    p_max: int = Field(7, ge=0)
    modes: PositiveInt = 10
    param: Optional[SweepParameter] = None
    sweep_range: Optional[tuple[float, float, float]] = None
    csv: Optional[Path] = None
    elements: Optional[PositiveInt] = None
    tolerance: Optional[float] = Field(None, gt=0.0)
    bc: Optional[Literal["free", "soft_ss", "hard_ss", "clamped", "both_ss"]] = None
    expect_peaks: Optional[tuple[float, ...]] = None
    variant: Optional[Literal["twisting", "hoop"]] = None
    p: int = Field(0, ge=0)
    n: PositiveInt = 1
    points: int = Field(41, ge=2)

    @field_validator("sweep_range", mode="before")
    @classmethod
    def parse_range(cls, v):
        if v is None or not isinstance(v, str):
            return v
        parts = v.split(":")
        if len(parts) != 3:
            raise ValueError("expected start:stop:step")
        try:
            return tuple(float(x) for x in parts)
        except ValueError as e:
            raise ValueError(f"non-numeric range bound in {v!r}") from e

    @field_validator("expect_peaks", mode="before")
    @classmethod
    def parse_peaks(cls, v):
        if v is None or not isinstance(v, str):
            return v
        try:
            return tuple(float(x) for x in v.split(",") if x.strip())
        except ValueError as e:
            raise ValueError(f"expected comma-separated numbers, got {v!r}") from e

    @model_validator(mode="after")
    def finalize(self):
        if self.command in ("freqs", "sweep", "validate", "shape") and not self.config:
            raise ValueError(f"--config is required for {self.command}")
        if self.command == "sweep":
            if self.param is None or self.sweep_range is None:
                raise ValueError("sweep needs --param and --range")
            start, stop, step = self.sweep_range
            if step <= 0:
                raise ValueError("sweep step must be positive")
            if stop <= start:
                raise ValueError("sweep range must be strictly increasing")
        elif self.bc == "both_ss":
            raise ValueError("--bc both_ss is only meaningful for sweep")
        if self.expect_peaks is not None:
            if self.command != "sweep":
                raise ValueError("--expect-peaks is only meaningful for sweep")
            if not self.expect_peaks:
                raise ValueError("--expect-peaks needs at least one location")
        return self

    def sweep_values(self) -> np.ndarray:
        start, stop, step = self.sweep_range
        count = int(math.floor((stop - start) / step + 1e-9))
        return np.round(start + step * np.arange(count + 1), 12)


def _format_validation(exc: ValidationError) -> str:
    return "; ".join(f"{'.'.join(str(x) for x in e['loc']) or '<root>'}: {e['msg']}" for e in exc.errors())


def resolve_config_path(name: str) -> Path:
    """A path as given, else a bundled config by name (with or without .json)."""
    candidates = [Path(name), CONFIG_DIR / name, CONFIG_DIR / f"{name}.json"]
    for path in candidates:
        if path.is_file():
            return path
    raise ConfigFileError(f"config {name!r} not found (also looked in {CONFIG_DIR})")


def load_plate_config(name: str) -> PlateConfig:
    path = resolve_config_path(name)
    try:
        with path.open("r", encoding="utf-8") as f:
            data = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigFileError(f"{path.name}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}") from e
    except OSError as e:
        raise ConfigFileError(f"{path.name}: cannot read: {e}") from e
    try:
        return PlateConfig.model_validate(data)
    except ValidationError as e:
        raise ConfigFileError(f"{path.name}: {_format_validation(e)}") from e


def _emit(df: pd.DataFrame, csv: Optional[Path], float_format: Optional[str]) -> None:
    if csv is not None:
        df.to_csv(csv, index=False, float_format=float_format)
        logger.info("[CSV] wrote %d row(s) to %s", len(df), csv)
    else:
        print(df.to_string(index=False))


def _report_diagnostics(diagnostics: Sequence[str]) -> None:
    if not diagnostics:
        return
    logger.warning("[DIAG] %d search diagnostic(s), modes may be missing:", len(diagnostics))
    for d in diagnostics:
        logger.warning("[DIAG] %s", d)


def _mode_frame(modes) -> pd.DataFrame:
    return pd.DataFrame(
        {
            "mode": [m.label for m in modes],
            "p": [m.p for m in modes],
            "n": [m.n for m in modes],
            "frequency_hz": [round(m.frequency, 3) for m in modes],
            "beta": [round(m.beta, 4) for m in modes],
        }
    )


def run_freqs(run: RunSpec) -> int:
    config = load_plate_config(run.config)
    if run.bc:
        config = config.with_changes(outer_bc=run.bc)
    diagnostics: list[str] = []
    modes = mode_table(config, run.p_max, run.modes, modes=run.modes, variant=run.variant, diagnostics=diagnostics)
    _report_diagnostics(diagnostics)
    if len(modes) < run.modes:
        logger.warning("[WARN] only %d of %d modes below beta=%g", len(modes), run.modes, settings.BETA_MAX)
    _emit(_mode_frame(modes), run.csv, None)
    return EXIT_OK


def _swept_config(config: PlateConfig, param: str, value: float) -> PlateConfig:
    segments = [s.model_dump() for s in config.segments]
    if param == "step_location":
        if len(segments) != 2:
            raise DomainError("step_location sweeps need a two-segment plate")
        segments[0]["outer_radius"] = value * segments[1]["outer_radius"]
        return config.with_changes(segments=segments)
    if param == "thickness_ratio":
        if len(segments) != 2:
            raise DomainError("thickness_ratio sweeps need a two-segment plate")
        segments[0]["thickness"] = value * segments[1]["thickness"]
        return config.with_changes(segments=segments)
    material = config.material.model_dump()
    material["g"] = value
    return config.with_changes(material=material)


def _sweep_frame(base: PlateConfig, run: RunSpec, columns: list[str], diagnostics: list[str]) -> pd.DataFrame:
    rows = []
    for value in run.sweep_values():
        try:
            config = _swept_config(base, run.param, float(value))
        except (ValidationError, DomainError) as e:
            detail = _format_validation(e) if isinstance(e, ValidationError) else str(e)
            logger.warning("[WARN] %s=%g skipped: %s", run.param, value, detail)
            continue
        found: list[str] = []
        modes = mode_table(config, run.p_max, run.modes, modes=run.modes, variant=run.variant, diagnostics=found)
        diagnostics.extend(f"{base.outer_bc} {run.param}={value:g} {d}" for d in found)
        betas = [m.beta for m in modes] + [math.nan] * (run.modes - len(modes))
        rows.append([float(value)] + betas)
        logger.info("[SWEEP] %s %s=%g %s", base.outer_bc, run.param, value, " ".join(f"{b:.4f}" for b in betas))
    return pd.DataFrame(rows, columns=[run.param] + columns)


def peak_locations(df: pd.DataFrame, param: str, columns: Sequence[str]) -> list[float]:
    """Parameter value at the maximum of each column (nan for an all-missing column)."""
    peaks = []
    for column in columns:
        series = df[column].dropna()
        peaks.append(float(df.loc[series.idxmax(), param]) if not series.empty else math.nan)
    return peaks


def nearest_variant(peaks: dict[str, list[float]], expected: Sequence[float],
                    tolerance: float) -> tuple[str, float, bool]:
    """Edge condition whose leading peaks lie closest to `expected`, its worst deviation, and a match flag."""
    deviations = {}
    for name, located in peaks.items():
        leading = located[:len(expected)]
        if len(leading) < len(expected) or any(math.isnan(v) for v in leading):
            deviations[name] = math.inf
        else:
            deviations[name] = max(abs(a - b) for a, b in zip(leading, expected))
    best = min(deviations, key=deviations.get)
    return best, deviations[best], deviations[best] <= tolerance + 1e-9


def run_sweep(run: RunSpec) -> int:
    base = load_plate_config(run.config)
    if run.bc == "both_ss":
        variants = [base.with_changes(outer_bc=bc) for bc in ("soft_ss", "hard_ss")]
    else:
        variants = [base.with_changes(outer_bc=run.bc) if run.bc else base]
    columns = [f"beta_{k}" for k in range(1, run.modes + 1)]

    frames, peaks = {}, {}
    diagnostics: list[str] = []
    for config in variants:
        df = _sweep_frame(config, run, columns, diagnostics)
        frames[config.outer_bc] = df
        peaks[config.outer_bc] = peak_locations(df, run.param, columns)
        for column, at in zip(columns, peaks[config.outer_bc]):
            if not math.isnan(at):
                logger.info("[SWEEP] %s %s peaks at %s=%g", config.outer_bc, column, run.param, at)
    _report_diagnostics(diagnostics)

    if len(frames) == 1:
        df = next(iter(frames.values()))
    else:
        df = pd.concat([f.set_index(run.param).add_prefix(f"{bc}_") for bc, f in frames.items()], axis=1)
        df = df.reset_index()
    _emit(df, run.csv, BETA_FORMAT)

    if run.expect_peaks:
        expected = ", ".join(f"{v:g}" for v in run.expect_peaks)
        name, deviation, matched = nearest_variant(peaks, run.expect_peaks, settings.PEAK_TOLERANCE)
        if not matched:
            logger.warning("[FLAG] no edge condition puts the peaks at %s=%s; nearest is %s (off by %.3g)",
                           run.param, expected, name, deviation)
            return EXIT_TOLERANCE
        logger.info("[OK] %s puts the peaks at %s=%s (off by %.3g)", name, run.param, expected, deviation)
    return EXIT_OK


def run_validate(run: RunSpec) -> int:
    config = load_plate_config(run.config)
    tolerance = run.tolerance or settings.VALIDATE_TOLERANCE
    integrals = plate_section_integrals(config)
    diagnostics: list[str] = []
    modes = mode_table(
        config,
        run.p_max,
        run.modes,
        modes=run.modes,
        integrals=integrals,
        variant=run.variant,
        diagnostics=diagnostics,
    )
    _report_diagnostics(diagnostics)
    floor = frequency_hz(config, settings.BETA_MIN)

    oracle = {}
    for p in sorted({m.p for m in modes}):
        needed = max(m.n for m in modes if m.p == p)
        solution = oracle_frequencies(config, p, needed + 3, run.elements)
        # rigid-body modes sit below the sweep floor
        oracle[p] = solution.frequencies[solution.frequencies >= floor]
        top = max(m.frequency for m in modes if m.p == p)
        found = sum(1 for m in modes if m.p == p)
        expected = count_below(solution, top * (1.0 + 1e-6), floor)
        if expected != found:
            logger.warning("[WARN] p=%d analytical %d root(s), oracle %d below %.3f Hz", p, found, expected, top)

    rows = []
    for m in modes:
        ref = oracle[m.p]
        if m.n > len(ref):
            raise OracleError(f"oracle returned no ordinal {m.n} for p={m.p}")
        f_ref = float(ref[m.n - 1])
        rows.append(
            {
                "mode": m.label,
                "analytical_hz": round(m.frequency, 3),
                "oracle_hz": round(f_ref, 3),
                "beta": round(m.beta, 4),
                "oracle_beta": round(beta_from_omega(config, 2.0 * math.pi * f_ref), 4),
                "rel_diff": abs(m.frequency - f_ref) / f_ref,
            }
        )
    df = pd.DataFrame(rows)
    _emit(df, run.csv, "%.6g")
    worst = float(df["rel_diff"].max()) if not df.empty else 0.0
    if worst > tolerance:
        logger.error("[FAIL] max relative difference %.4f%% exceeds %.4f%%", 100 * worst, 100 * tolerance)
        return EXIT_TOLERANCE
    logger.info("[OK] max relative difference %.4f%%", 100 * worst)
    return EXIT_OK


def run_table1(run: RunSpec) -> int:
    tolerance = run.tolerance or settings.TABLE1_TOLERANCE
    rows = []
    for bc, (config_name, reference) in TABLE1_REFERENCE.items():
        config = load_plate_config(config_name)
        diagnostics: list[str] = []
        modes = mode_table(config, 7, 3, modes=len(reference), variant=run.variant, diagnostics=diagnostics)
        _report_diagnostics(diagnostics)
        for k, (label, f_ref) in enumerate(reference):
            m = modes[k] if k < len(modes) else None
            rows.append(
                {
                    "bc": bc,
                    "reference": label,
                    "reference_hz": f_ref,
                    "mode": m.label if m else "-",
                    "present_hz": round(m.frequency, 3) if m else math.nan,
                    "rel_err": abs(m.frequency - f_ref) / f_ref if m else math.nan,
                }
            )
    df = pd.DataFrame(rows)
    _emit(df, run.csv, "%.6g")
    failed = df[(df["mode"] != df["reference"]) | ~(df["rel_err"] <= tolerance)]
    if not failed.empty:
        logger.error("[FAIL] %d of %d entries off the reference", len(failed), len(df))
        return EXIT_TOLERANCE
    logger.info("[OK] all %d entries within %.3g relative", len(df), tolerance)
    return EXIT_OK


def run_shape(run: RunSpec) -> int:
    config = load_plate_config(run.config)
    integrals = plate_section_integrals(config)
    search = find_frequencies(config, run.p, max_modes=run.n, integrals=integrals, variant=run.variant)
    _report_diagnostics([f"p={run.p}: {d}" for d in search.diagnostics])
    if len(search.modes) < run.n:
        raise PlateSolverError(f"mode ({run.p},{run.n}) not found below beta={settings.BETA_MAX:g}")
    mode = search.modes[run.n - 1]
    inner = config.inner_radius or 0.0
    radii = np.linspace(inner, config.outer_radius, run.points)
    profile = mode_fields(config, mode, radii, integrals)
    df = pd.DataFrame(
        [
            {
                "r": f.r,
                "w": f.w,
                "u0": f.u0,
                "v0": f.v0,
                "psi_r": f.psi_r,
                "psi_theta": f.psi_theta,
                "M_r": s.M_r,
                "Q_r": s.Q_r,
            } for f, s in profile
        ]
    )
    logger.info("[SHAPE] %s beta=%.4f f=%.3f Hz", mode.label, mode.beta, mode.frequency)
    _emit(df, run.csv, "%.6e")
    return EXIT_OK


COMMANDS = {
    "freqs": run_freqs,
    "sweep": run_sweep,
    "validate": run_validate,
    "table1": run_table1,
    "shape": run_shape,
}


def parse_args(argv=None) -> argparse.Namespace:
    ap = argparse.ArgumentParser(prog="stepplate", description="Free vibration of stepped FG Mindlin plates.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, config_required=True):
        if config_required:
            p.add_argument("--config", required=True, help="Config path or bundled name, e.g. table1_free")
        p.add_argument("--csv", type=Path, help="Write CSV here instead of printing a table")
        p.add_argument("--variant", choices=["twisting", "hoop"], help="Continuity row set at the steps")

    p = sub.add_parser("freqs", help="Sorted natural frequency table")
    common(p)
    p.add_argument("--p-max", type=int, default=7, help="Highest circumferential wavenumber (default: 7)")
    p.add_argument("--modes", type=int, default=10, help="Number of modes (default: 10)")
    p.add_argument("--bc", choices=EDGE_CONDITIONS, help="Override the outer edge condition")

    p = sub.add_parser("sweep", help="First frequency parameters versus a geometric or material parameter")
    common(p)
    p.add_argument("--param", required=True, choices=["step_location", "thickness_ratio", "power_index"])
    p.add_argument("--range", dest="sweep_range", required=True, help="start:stop:step")
    p.add_argument("--modes", type=int, default=3, help="Frequency parameters per point (default: 3)")
    p.add_argument("--p-max", type=int, default=7)
    p.add_argument(
        "--bc",
        choices=[*EDGE_CONDITIONS, "both_ss"],
        help="Override the outer edge condition; both_ss sweeps soft and hard simple support side by side",
    )
    p.add_argument("--expect-peaks", help="Comma-separated parameter values where beta_1, beta_2, ... should peak")

    p = sub.add_parser("validate", help="Analytical solution against the finite-element oracle")
    common(p)
    p.add_argument("--modes", type=int, default=10)
    p.add_argument("--p-max", type=int, default=7)
    p.add_argument("--elements", type=int, help=f"Radial elements (default: {settings.ORACLE_ELEMENTS})")
    p.add_argument("--tolerance", type=float, help="Relative tolerance (default: VALIDATE_TOLERANCE)")

    p = sub.add_parser("table1", help="Bundled two-step plate against published frequencies")
    common(p, config_required=False)
    p.add_argument("--tolerance", type=float, help="Relative tolerance (default: TABLE1_TOLERANCE)")

    p = sub.add_parser("shape", help="Radial profile of one mode")
    common(p)
    p.add_argument("--p", type=int, default=0)
    p.add_argument("--n", type=int, default=1)
    p.add_argument("--points", type=int, default=41)

    return ap.parse_args(argv)


def _configure_logging() -> None:
    if settings.APP_ENV == "dev":
        fmt = "%(asctime)s %(name)s %(levelname)s %(message)s"
    else:
        fmt = "%(message)s"
    logging.basicConfig(level=settings.LOG_LEVEL.upper(), format=fmt, stream=sys.stderr, force=True)


def main(argv=None) -> int:
    args = parse_args(argv)
    _configure_logging()
    try:
        run = RunSpec.model_validate(vars(args))
    except ValidationError as e:
        logger.error("[ERROR] invalid arguments: %s", _format_validation(e))
        return EXIT_CONFIG

    try:
        return COMMANDS[run.command](run)
    except ConfigFileError as e:
        logger.error("[ERROR] %s", e)
        return EXIT_CONFIG
    except (UnsupportedRegimeError, BranchTransitionError, DegenerateFrequencyError) as e:
        beta = getattr(e, "beta", None)
        where = f" at beta={beta:.6g}" if beta is not None else ""
        logger.error("[ERROR] unsupported regime%s: %s", where, e)
        return EXIT_REGIME
    except OracleError as e:
        logger.error("[ERROR] oracle failed: %s", e)
        return EXIT_ORACLE
    except DomainError as e:
        logger.error("[ERROR] %s", e)
        return EXIT_CONFIG
    except PlateSolverError as e:
        logger.error("[ERROR] %s", e)
        return EXIT_TOLERANCE


if __name__ == "__main__":
    sys.exit(main())
