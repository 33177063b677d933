"""Triggering kernels g(x) with closed-form antiderivatives G(x).

Three families are supported:

* ``exp``: g(x) = a exp(-b x)
* ``pwl``: g(x) = a b / (a + b x)^(p + 1)
* ``ray``: g(x) = a x exp(-b x^2)

where ``a`` is the magnitude and ``b`` the decay. All functions broadcast
over numpy arrays; ``alpha``/``beta`` may be arrays matching ``x``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np


class KernelFamily(str, enum.Enum):
    EXP = "exp"
    PWL = "pwl"
    RAY = "ray"


@dataclass(frozen=True)
class KernelSpec:
    family: KernelFamily = KernelFamily.PWL
    power_exponent: float = 2.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.family is KernelFamily.PWL and not self.power_exponent > 1:
            raise ValueError(f"power-law exponent must be > 1, got {self.power_exponent}")

    @classmethod
    def parse(cls, name: str, power_exponent: float = 2.0) -> "KernelSpec":
        return cls(KernelFamily(name.lower()), power_exponent)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "power_exponent": self.power_exponent}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(KernelFamily(d["family"]), float(d.get("power_exponent", 2.0)))


@dataclass(frozen=True)
class KernelParams:
    alpha: float
    beta: float

    def __post_init__(self):
        if not self.alpha >= 0:
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")
        if not self.beta > 0:
            raise ValueError(f"beta must be > 0, got {self.beta}")


def _check_spec(spec):
    if isinstance(spec, KernelSpec):
        return spec
    return KernelSpec.parse(str(spec))


# -- vectorised primitives (no argument checking) ---------------------------------


def value(spec: KernelSpec, alpha, beta, x):
    """g(x)."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        return alpha * np.exp(-beta * x)
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        return alpha * beta * (alpha + beta * x) ** (-(p + 1.0))
    return alpha * x * np.exp(-beta * x * x)


def antiderivative(spec: KernelSpec, alpha, beta, x):
    """G(x), with G(inf) = 0."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        return -(alpha / beta) * np.exp(-beta * x)
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        return -alpha / (p * (alpha + beta * x) ** p)
    return -(alpha / (2.0 * beta)) * np.exp(-beta * x * x)


def value_grad(spec: KernelSpec, alpha, beta, x):
    """(g, dg/dx, dg/dalpha, dg/dbeta)."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        e = np.exp(-beta * x)
        g = alpha * e
        return g, -beta * g, e, -x * g
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        s = alpha + beta * x
        s1 = s ** (-(p + 1.0))
        s2 = s1 / s
        g = alpha * beta * s1
        dx = -(p + 1.0) * alpha * beta * beta * s2
        da = beta * s1 - (p + 1.0) * alpha * beta * s2
        db = alpha * s1 - (p + 1.0) * alpha * beta * x * s2
        return g, dx, da, db
    e = np.exp(-beta * x * x)
    g = alpha * x * e
    return g, alpha * e * (1.0 - 2.0 * beta * x * x), x * e, -x * x * g


def antiderivative_grad(spec: KernelSpec, alpha, beta, x):
    """(dG/dalpha, dG/dbeta) at x."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        e = np.exp(-beta * x)
        return -e / beta, alpha * e / (beta * beta) + (alpha / beta) * x * e
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        s = alpha + beta * x
        sp = s ** (-p)
        return -sp / p + alpha * sp / s, alpha * x * sp / s
    e = np.exp(-beta * x * x)
    return -e / (2.0 * beta), alpha * e / (2.0 * beta * beta) + (alpha / (2.0 * beta)) * x * x * e


def interval_integral(spec: KernelSpec, alpha, beta, lo, hi):
    """G(hi) - G(lo) for lo <= hi, written to avoid cancellation."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        return (alpha / beta) * np.exp(-beta * lo) * -np.expm1(-beta * (hi - lo))
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        s_lo = alpha + beta * lo
        log_ratio = -np.log1p(beta * (hi - lo) / s_lo)
        return alpha / p * s_lo ** (-p) * -np.expm1(p * log_ratio)
    return (alpha / (2.0 * beta)) * np.exp(-beta * lo * lo) * -np.expm1(-beta * (hi - lo) * (hi + lo))


def interval_integral_grad(spec: KernelSpec, alpha, beta, lo, hi):
    """d/dalpha and d/dbeta of G(hi) - G(lo)."""
    ah, bh = antiderivative_grad(spec, alpha, beta, hi)
    al, bl = antiderivative_grad(spec, alpha, beta, lo)
    return ah - al, bh - bl


def total_mass(spec: KernelSpec, alpha, beta):
    """Integral of g over [0, inf)."""
    fam = spec.family
    if fam is KernelFamily.EXP:
        return alpha / beta
    if fam is KernelFamily.PWL:
        p = spec.power_exponent
        return alpha ** (1.0 - p) / p
    return alpha / (2.0 * beta)


TAIL_TOLERANCE = 1e-16


def negligible_lag(spec: KernelSpec, alpha, beta, tol: float = TAIL_TOLERANCE) -> float:
    """Smallest lag x whose remaining tail mass is at most ``tol`` times the total mass, for every (alpha, beta).

    Pairs further apart than this contribute below double-precision resolution
    and may be skipped. Returns ``inf`` when ``tol`` is 0.
    """
    if tol <= 0:
        return np.inf
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    fam = spec.family
    if fam is KernelFamily.EXP:
        x = -np.log(tol) / beta
    elif fam is KernelFamily.RAY:
        x = np.sqrt(-np.log(tol) / beta)
    else:
        # tail mass ratio is (a / (a + b x))^p
        x = alpha * (tol ** (-1.0 / spec.power_exponent) - 1.0) / beta
    return float(np.max(x))


def peak(spec: KernelSpec, alpha, beta):
    """(argmax, max) of g on [0, inf)."""
    if spec.family is KernelFamily.RAY:
        x = np.sqrt(1.0 / (2.0 * beta))
        return x, value(spec, alpha, beta, x)
    return 0.0, value(spec, alpha, beta, 0.0)


# -- checked scalar API -------------------------------------------------------------


def kernel_value(spec, params: KernelParams, delta: float) -> float:
    spec = _check_spec(spec)
    if delta < 0:
        raise ValueError(f"kernel argument must be >= 0, got {delta}")
    return float(value(spec, params.alpha, params.beta, delta))


def kernel_integral(spec, params: KernelParams, a: float, b: float) -> float:
    """Integral of g over [a, b]; ``b`` may be ``inf``."""
    spec = _check_spec(spec)
    if a < 0:
        raise ValueError(f"lower limit must be >= 0, got {a}")
    if a > b:
        raise ValueError(f"lower limit {a} exceeds upper limit {b}")
    if np.isinf(b):
        return float(-antiderivative(spec, params.alpha, params.beta, a))
    return float(interval_integral(spec, params.alpha, params.beta, a, b))
