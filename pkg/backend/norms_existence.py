# backend/norms_existence.py
"""
Norms and covariances of the mild solution, and the existence threshold.

With u = t - s, v = t - r the squared norm of g_{t,x} is

    alpha_H int_0^t int_0^t |u - v|^{2H-2} I_f(u + v) du dv
        = H int_0^{2t} I_f(a) min(a, 2t - a)^{2H-1} da,

since I_f depends on (u, v) only through a = u + v. The same collapse
turns the covariance of two points into one integral in a. Both the
one-dimensional ("reduced") and the two-dimensional ("double") routes
are available; the first is the default.
"""
import logging
from dataclasses import dataclass

import numpy as np
import pandas as pd

from backend.errors import DomainError, ThresholdViolation
from backend.fractional_time import derive_hurst_params
from backend.quadrature import NormResult, QuadratureSpec, singular_double_integral, singular_quad_1d
from backend.spatial_kernels import (
    KernelFamily,
    KernelSpec,
    I_f_values,
    J_f_values,
    corner_exponent,
    small_lag_exponent,
    window_constants,
)

logger = logging.getLogger(__name__)


# ----------------------
# EXISTENCE
# ----------------------
@dataclass(frozen=True)
class ExistenceResult:
    admissible: bool
    threshold: float
    critical: float
    condition: str

    def to_dict(self):
        return {"admissible": self.admissible, "threshold": self.threshold,
                "critical": self.critical, "condition": self.condition}


def _condition(spec):
    return "H > d/4" if spec.is_white else "H > (d - alpha_f)/4"


def existence_check(spec, H):
    """
    threshold = max{(d - alpha_f)/4, 1/2}; admissible iff H > (d - alpha_f)/4,
    strictly.
    """
    hp = derive_hurst_params(H)
    critical = (spec.d - spec.alpha_f) / 4.0
    return ExistenceResult(bool(hp.H > critical), max(critical, 0.5), critical, _condition(spec))


def require_admissible(spec, H):
    res = existence_check(spec, H)
    if not res.admissible:
        raise ThresholdViolation(H, res.critical, res.condition)
    return res


def default_table_kernels(dims=(1, 2, 3)):
    kernels = [KernelSpec(KernelFamily.WHITE, 0.0, d) for d in dims]
    kernels += [KernelSpec(KernelFamily.RIESZ, 1.0, 4), KernelSpec(KernelFamily.RIESZ, 9.0, 10)]
    for family, alpha in ((KernelFamily.BESSEL, 1.0), (KernelFamily.HEAT, 0.5),
                          (KernelFamily.POISSON, 1.0)):
        kernels += [KernelSpec(family, alpha, d) for d in dims]
    return kernels


def existence_table(H, dims=(1, 2, 3), kernels=None):
    """Threshold and admissibility per kernel as a DataFrame."""
    rows = []
    for spec in kernels or default_table_kernels(dims):
        res = existence_check(spec, H)
        rows.append({
            "family": spec.family.value,
            "alpha": spec.alpha,
            "d": spec.d,
            "alpha_f": spec.alpha_f,
            "critical": res.critical,
            "threshold": res.threshold,
            "condition": res.condition,
            "H": float(H),
            "admissible": res.admissible,
        })
    return pd.DataFrame(rows)


# ----------------------
# INTEGRATION ENGINES
# ----------------------
def weighted_double_integral(F, hp, t, quad=None, corner_exp=0.0):
    """alpha_H int_0^t int_0^t |u - v|^{2H-2} F(u, v) du dv."""
    t = float(t)
    if not t > 0.0:
        raise DomainError(f"time must be positive, got {t}")
    res = singular_double_integral(F, t, 2.0 * hp.H - 2.0, quad or QuadratureSpec(), corner_exp)
    return res.scaled(hp.alpha_H)


def _reduced_norm(values, hp, t, lag_exp, quad, floor=0.0):
    """H int_floor^{2t} I(a) min(a, 2t - a)^{2H-1} da."""
    t = float(t)
    kappa2 = 2.0 * hp.H - 1.0

    def integrand(a):
        return values(a) * np.minimum(a, 2.0 * t - a) ** kappa2

    left = kappa2 - lag_exp if floor == 0.0 else 0.0
    res = singular_quad_1d(integrand, floor, 2.0 * t, quad, left_exp=left,
                           right_exp=kappa2, breakpoints=(t,))
    return res.scaled(hp.H)


def power_law_norm(hp, t, q, quad=None):
    """H int_0^{2t} a^{-q} min(a, 2t - a)^{2H-1} da, the norm of a pure power law."""
    return _reduced_norm(lambda a: np.asarray(a) ** (-q), hp, t, q, quad or QuadratureSpec())


# ----------------------
# NORMS
# ----------------------
def norm_g_white(hp, d, t, quad=None, strict=False):
    """||g_{t,x}||^2 with white spatial noise; I(a) = (4 pi a)^{-d/2}."""
    spec = KernelSpec(KernelFamily.WHITE, 0.0, d)
    require_admissible(spec, hp.H)
    res = _reduced_norm(lambda a: I_f_values(spec, a), hp, t, d / 2.0, quad or QuadratureSpec())
    return res.require_converged("white-noise norm") if strict else res


@dataclass(frozen=True)
class NormBracket:
    exact: NormResult
    lower: NormResult
    upper: NormResult

    @property
    def converged(self):
        return self.exact.converged and self.lower.converged and self.upper.converged

    def to_dict(self):
        return {"exact": self.exact.to_dict(), "lower": self.lower.to_dict(),
                "upper": self.upper.to_dict()}


def norm_g_colored(spec, hp, t, quad=None, method="reduced", strict=False):
    """
    ||g_{t,x}||^2 in the colored setting. ``exact`` integrates the exact I_f;
    ``lower``/``upper`` integrate the bracket A_f a^{-q}, B_f a^{-q} of I_f
    (identical to ``exact`` for Riesz and white noise).
    """
    require_admissible(spec, hp.H)
    quad = quad or QuadratureSpec()
    t = float(t)
    lag = small_lag_exponent(spec)
    if method == "reduced":
        exact = _reduced_norm(lambda a: I_f_values(spec, a), hp, t, lag, quad)
    elif method == "double":
        exact = weighted_double_integral(lambda u, v: I_f_values(spec, u + v), hp, t, quad, lag)
    else:
        raise DomainError(f"unknown norm method {method!r}")
    if strict:
        exact.require_converged(f"{spec.family.value} norm")

    if spec.family in (KernelFamily.RIESZ, KernelFamily.WHITE):
        return NormBracket(exact, exact, exact)
    shape = power_law_norm(hp, t, corner_exponent(spec), quad)
    A_f, B_f = window_constants(spec, t)
    return NormBracket(exact, shape.scaled(A_f), shape.scaled(B_f))


# ----------------------
# COVARIANCE
# ----------------------
def _signed_power(x, p):
    return np.sign(x) * np.abs(x) ** p


def covariance_solution(spec, hp, p1, p2, quad=None, strict=False):
    """
    <g_{t1,x1}, g_{t2,x2}> = alpha_H int_0^{t1} int_0^{t2} |r - r'|^{2H-2}
    J_f(t1 - r + t2 - r'; x1 - x2) dr' dr, collapsed to one integral in
    a = (t1 - r) + (t2 - r').
    """
    require_admissible(spec, hp.H)
    if p1.d != p2.d or p1.d != spec.d:
        raise DomainError(f"points must lie in R^{spec.d}")
    quad = quad or QuadratureSpec()
    t1, t2 = p1.t, p2.t
    if t1 == 0.0 or t2 == 0.0:
        return NormResult(0.0, 0.0, True, 0)
    delta = p1.site - p2.site
    same_site = not np.any(delta)
    c = t1 - t2
    kappa2 = 2.0 * hp.H - 1.0

    def integrand(a):
        a = np.asarray(a, dtype=float)
        hi = np.minimum(a, 2.0 * t1 - a) - c
        lo = np.maximum(-a, a - 2.0 * t2) - c
        return J_f_values(spec, a, delta) * (_signed_power(hi, kappa2) - _signed_power(lo, kappa2))

    left = (kappa2 if t1 == t2 else 1.0) - (small_lag_exponent(spec) if same_site else 0.0)
    breaks = sorted({abs(c), t1, t2} - {0.0})
    res = singular_quad_1d(integrand, 0.0, t1 + t2, quad, left_exp=left, right_exp=kappa2,
                           breakpoints=breaks)
    res = res.scaled(hp.H / 2.0)
    if strict:
        res.require_converged("covariance")
    return res


# ----------------------
# DIVERGENCE SCAN
# ----------------------
@dataclass(frozen=True)
class ScanResult:
    truncations: tuple
    values: tuple
    exponent: float
    observed_ratios: tuple
    predicted_ratios: tuple

    @property
    def convergent(self):
        """Cauchy tail: final increment below 1% of the value."""
        v = [r.value for r in self.values]
        return len(v) >= 2 and abs(v[-1] - v[-2]) < 0.01 * abs(v[-1])

    def to_frame(self):
        ratios = (np.nan, np.nan) + tuple(self.observed_ratios)
        predicted = (np.nan, np.nan) + tuple(self.predicted_ratios)
        return pd.DataFrame({
            "epsilon": self.truncations,
            "value": [r.value for r in self.values],
            "error_estimate": [r.error_estimate for r in self.values],
            "converged": [r.converged for r in self.values],
            "increment_ratio": ratios[:len(self.values)],
            "predicted_ratio": predicted[:len(self.values)],
        })


def divergence_scan(spec, hp, t, truncations, quad=None):
    """
    The norm integral restricted to a = 2t - s - r >= eps for each eps. Near
    the corner the integrand is a power law, so consecutive increments follow
    eps^{2H - (d - alpha_f)/2}; that exponent is returned with the observed
    and predicted increment ratios.
    """
    eps = [float(e) for e in truncations]
    t = float(t)
    if not eps or any(e <= 0.0 for e in eps) or any(b >= a for a, b in zip(eps, eps[1:])):
        raise DomainError("truncations must be positive and strictly decreasing")
    if eps[0] >= t:
        raise DomainError("truncations must stay below t")
    quad = quad or QuadratureSpec()
    values = []
    for e in eps:
        res = _reduced_norm(lambda a: I_f_values(spec, a), hp, t, 0.0, quad, floor=e)
        logger.debug("scan eps=%g value=%.6g", e, res.value)
        values.append(res)

    exponent = 2.0 * hp.H - corner_exponent(spec)
    v = [r.value for r in values]
    inc = np.diff(v)
    observed = tuple(float(inc[k + 1] / inc[k]) if inc[k] != 0 else np.inf
                     for k in range(len(inc) - 1))
    if exponent == 0.0:
        law = [np.log(e) for e in eps]
    else:
        law = [e ** exponent for e in eps]
    pinc = np.diff(law)
    predicted = tuple(float(pinc[k + 1] / pinc[k]) for k in range(len(pinc) - 1))
    return ScanResult(tuple(eps), tuple(values), exponent, observed, predicted)
