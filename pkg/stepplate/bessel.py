"""Cylinder functions J, Y, I, K of integer order with first derivatives.

Values come from scipy.special. I and K switch to their exponentially scaled forms
(ive = I e^{-x}, kve = K e^{x}) for large arguments; the removed factor is reported
as a log-scale so callers can reconstruct or absorb it.
"""
import math
from dataclasses import dataclass
from typing import Literal, Optional

import numpy as np
from scipy import special

from stepplate.errors import DomainError, RangeError

Kind = Literal["J", "Y", "I", "K"]
SCALE_THRESHOLD = 50.0

_UNSCALED = {"J": special.jv, "Y": special.yv, "I": special.iv, "K": special.kv}
_SCALED = {"J": special.jv, "Y": special.yv, "I": special.ive, "K": special.kve}


@dataclass(frozen=True)
class BesselEval:
    value: float
    derivative: float
    scaled: bool
    log_scale: float


def _check_order(p: int) -> int:
    if isinstance(p, bool) or int(p) != p or p < 0:
        raise DomainError(f"Bessel order must be a non-negative integer, got {p!r}")
    return int(p)


def bessel_values(kind: Kind, p: int, x, scaled: bool = False) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized value and d/dx of C_p(x).

    With scaled=True, I and K carry the factors e^{-x} and e^{x}; J and Y ignore the flag.
    """
    if kind not in _UNSCALED:
        raise DomainError(f"unknown Bessel kind {kind!r}")
    p = _check_order(p)
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError(f"{kind}_{p} is not defined for negative arguments")
    if kind in ("Y", "K") and np.any(x == 0):
        raise DomainError(f"{kind}_{p} is singular at x = 0")

    f = _SCALED[kind] if scaled else _UNSCALED[kind]
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        value = f(p, x)
        lower = f(p - 1, x) if p > 0 else f(1, x)
        if p == 0:
            derivative = lower if kind == "I" else -lower
        elif kind == "K":
            derivative = -lower - (p / x) * value
        else:
            derivative = lower - (p / x) * value
        # J, I at the origin: half-difference form has no 1/x
        at_origin = x == 0
        if np.any(at_origin) and p > 0:
            upper = f(p + 1, 0.0)
            below = f(p - 1, 0.0)
            edge = 0.5 * (below + upper) if kind == "I" else 0.5 * (below - upper)
            derivative = np.where(at_origin, edge, derivative)

    if not (np.all(np.isfinite(value)) and np.all(np.isfinite(derivative))):
        hint = "" if scaled or kind in ("J", "Y") else "; request the scaled form"
        raise RangeError(f"{kind}_{p} overflows for the requested arguments{hint}")
    return value, derivative


def bessel(kind: Kind, p: int, x: float, scaled: Optional[bool] = None) -> BesselEval:
    """C_p(x) and C_p'(x). I and K are scaled automatically above SCALE_THRESHOLD."""
    if scaled is None:
        scaled = kind in ("I", "K") and x > SCALE_THRESHOLD
    scaled = bool(scaled) and kind in ("I", "K")
    value, derivative = bessel_values(kind, p, x, scaled=scaled)
    log_scale = 0.0
    if scaled:
        log_scale = float(x) if kind == "I" else -float(x)
    return BesselEval(value=float(value), derivative=float(derivative), scaled=scaled, log_scale=log_scale)


def wronskian_check(p: int, x: float) -> tuple[float, float]:
    """Residuals of J Y' - J' Y = 2/(pi x) and I K' - I' K = -1/x.

    The I/K pair is evaluated scaled; the e^{-x} e^{x} factors cancel in the products.
    """
    if x <= 0:
        raise DomainError(f"Wronskian check needs x > 0, got {x:g}")
    J, dJ = bessel_values("J", p, x)
    Y, dY = bessel_values("Y", p, x)
    I, dI = bessel_values("I", p, x, scaled=True)
    K, dK = bessel_values("K", p, x, scaled=True)
    first = abs(float(J * dY - dJ * Y) - 2.0 / (math.pi * x))
    second = abs(float(I * dK - dI * K) + 1.0 / x)
    return first, second
