# backend/quadrature.py
"""
Quadrature plumbing shared by the temporal and space-time modules.

Two engines live here:

- ``singular_quad_1d``: composite Gauss rule on [a, b] with geometric grading
  toward the endpoints and interior breakpoints, and Gauss-Jacobi panels that
  absorb known endpoint powers (u - a)^p, (b - u)^q.
- ``singular_double_integral``: the |u - v|^beta weighted double integral over
  a square, split along the diagonal and mapped so that both the diagonal and
  the corner at the origin become endpoint powers of one-dimensional rules.

Both refine until two successive levels agree to ``rel_tolerance``.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi, roots_legendre

from backend.errors import ConvergenceError, DomainError

logger = logging.getLogger(__name__)

BASE_RULES = ("gauss_legendre", "adaptive")


# ----------------------
# TYPES
# ----------------------
@dataclass(frozen=True)
class QuadratureSpec:
    """Rule selection and stopping criteria for the singular quadratures."""

    base_rule: str = "gauss_legendre"
    panels_per_axis: int = 8
    singularity_split: bool = True
    rel_tolerance: float = 1e-8
    max_refinements: int = 6
    order: int = 12

    def __post_init__(self):
        if self.base_rule not in BASE_RULES:
            raise DomainError(f"unknown base rule {self.base_rule!r}; expected one of {BASE_RULES}")
        if self.panels_per_axis < 2:
            raise DomainError("panels_per_axis must be >= 2")
        if not self.rel_tolerance > 0:
            raise DomainError("rel_tolerance must be positive")
        if self.max_refinements < 1:
            raise DomainError("max_refinements must be >= 1")
        if self.order < 2:
            raise DomainError("order must be >= 2")


@dataclass(frozen=True)
class NormResult:
    value: float
    error_estimate: float
    converged: bool
    refinements_used: int

    def scaled(self, factor):
        factor = abs(float(factor))
        return NormResult(self.value * factor, self.error_estimate * factor,
                          self.converged, self.refinements_used)

    def require_converged(self, what="quadrature"):
        if not self.converged:
            raise ConvergenceError(
                f"{what} did not converge: value={self.value:.17g}, "
                f"error estimate={self.error_estimate:.3g}"
            )
        return self

    def to_dict(self):
        return {
            "value": self.value,
            "error_estimate": self.error_estimate,
            "converged": self.converged,
            "refinements_used": self.refinements_used,
        }


# ----------------------
# BASIC RULES
# ----------------------
@lru_cache(maxsize=256)
def _legendre_ref(n):
    x, w = roots_legendre(n)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


@lru_cache(maxsize=256)
def _jacobi_ref(n, alpha, beta):
    x, w = roots_jacobi(n, alpha, beta)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_legendre(n, a, b):
    """Nodes and weights of the n-point Gauss-Legendre rule on [a, b]."""
    x, w = _legendre_ref(int(n))
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def gauss_jacobi(n, a, b, left_exp=0.0, right_exp=0.0):
    """
    Nodes and weights for integrals of (u - a)^left_exp (b - u)^right_exp g(u)
    over [a, b]; the weights already carry the power factor.
    """
    if left_exp <= -1.0 or right_exp <= -1.0:
        raise DomainError("Jacobi exponents must exceed -1")
    x, w = _jacobi_ref(int(n), float(right_exp), float(left_exp))
    half = 0.5 * (b - a)
    scale = half ** (1.0 + left_exp + right_exp)
    return a + half * (x + 1.0), scale * w


def graded_edges(a, b, depth, left=True, right=True):
    """Panel edges on [a, b], halving toward each graded endpoint."""
    if left and right:
        mid = 0.5 * (a + b)
        lhs = a + (mid - a) * 2.0 ** -np.arange(depth, -1, -1)
        rhs = b - (b - mid) * 2.0 ** -np.arange(0, depth + 1)
        edges = np.concatenate([[a], lhs, rhs[1:], [b]])
    elif left:
        edges = np.concatenate([[a], a + (b - a) * 2.0 ** -np.arange(depth, -1, -1)])
    elif right:
        edges = np.concatenate([b - (b - a) * 2.0 ** -np.arange(0, depth + 1), [b]])
    else:
        edges = np.array([a, b], dtype=float)
    return np.unique(edges)


def _composite_rule(a, b, order, depth, left_exp, right_exp, left_graded, right_graded):
    """
    Returns (nodes, weights, divisor) where the integral of f is
    sum(weights * f(nodes) / divisor).
    """
    edges = graded_edges(a, b, depth, left_graded, right_graded)
    nodes, weights, divisors = [], [], []
    last = len(edges) - 2
    for k, (p, q) in enumerate(zip(edges[:-1], edges[1:])):
        le = left_exp if k == 0 else 0.0
        re = right_exp if k == last else 0.0
        if le != 0.0 or re != 0.0:
            u, w = gauss_jacobi(order, p, q, le, re)
            div = (u - p) ** le * (q - u) ** re
        else:
            u, w = gauss_legendre(order, p, q)
            div = np.ones_like(u)
        nodes.append(u)
        weights.append(w)
        divisors.append(div)
    return np.concatenate(nodes), np.concatenate(weights), np.concatenate(divisors)


# ----------------------
# ONE-DIMENSIONAL ENGINE
# ----------------------
def _pieces(a, b, breakpoints):
    pts = [a] + sorted(float(p) for p in breakpoints if a < p < b) + [b]
    return [(p, q) for p, q in zip(pts[:-1], pts[1:]) if q - p > 1e-15 * max(1.0, abs(b - a))]


def _gl_level(func, pieces, a, b, left_exp, right_exp, order, depth, split):
    total = 0.0
    for p, q in pieces:
        if split:
            le = left_exp if p == a else 0.0
            re = right_exp if q == b else 0.0
            u, w, div = _composite_rule(p, q, order, depth, le, re, True, True)
        else:
            edges = np.linspace(p, q, depth + 1)
            parts = [gauss_legendre(order, e0, e1) for e0, e1 in zip(edges[:-1], edges[1:])]
            u = np.concatenate([x for x, _ in parts])
            w = np.concatenate([y for _, y in parts])
            div = np.ones_like(u)
        total += float(np.sum(w * np.asarray(func(u), dtype=float) / div))
    return total


def _adaptive_1d(func, pieces, a, b, left_exp, right_exp, rel_tol):
    total, err = 0.0, 0.0
    for p, q in pieces:
        le = left_exp if p == a else 0.0
        re = right_exp if q == b else 0.0

        def scalar(u, p=p, q=q, le=le, re=re):
            val = float(np.asarray(func(np.array([u])), dtype=float)[0])
            if le or re:
                val /= (u - p) ** le * (q - u) ** re
            return val

        if le or re:
            val, e = integrate.quad(scalar, p, q, weight="alg", wvar=(le, re),
                                    epsrel=rel_tol, epsabs=0.0, limit=400)
        else:
            val, e = integrate.quad(scalar, p, q, epsrel=rel_tol, epsabs=0.0, limit=400)
        total += val
        err += e
    return total, err


def singular_quad_1d(func, a, b, quad=None, left_exp=0.0, right_exp=0.0, breakpoints=()):
    """
    Integrate a vectorised ``func`` over [a, b].

    ``left_exp``/``right_exp`` announce that the integrand behaves like
    (u - a)^left_exp, (b - u)^right_exp at the endpoints; interior
    ``breakpoints`` mark kinks. Returns a NormResult.
    """
    quad = quad or QuadratureSpec()
    if not b > a:
        raise DomainError(f"empty interval [{a}, {b}]")
    pieces = _pieces(a, b, breakpoints)

    if quad.base_rule == "adaptive":
        value, err = _adaptive_1d(func, pieces, a, b, left_exp, right_exp, quad.rel_tolerance)
        converged = err <= max(quad.rel_tolerance * abs(value), 1e-300)
        return NormResult(value, err, bool(converged), 0)

    previous = None
    value, err = 0.0, np.inf
    for level in range(quad.max_refinements + 1):
        order = quad.order + 4 * level
        depth = quad.panels_per_axis * (level + 1)
        value = _gl_level(func, pieces, a, b, left_exp, right_exp, order, depth,
                          quad.singularity_split)
        if previous is not None:
            err = abs(value - previous)
            if err <= quad.rel_tolerance * abs(value) or (value == 0.0 and err == 0.0):
                return NormResult(value, err, True, level)
        previous = value
    logger.warning("1-D quadrature on [%g, %g] stopped at %.3e after %d refinements (error %.3e)",
                   a, b, value, quad.max_refinements, err)
    return NormResult(value, err, False, quad.max_refinements)


# ----------------------
# TWO-DIMENSIONAL ENGINE
# ----------------------
def _duffy_level(F, L, beta, corner_exp, order, depth):
    # x carries the corner at the origin, s the diagonal
    s, ws = gauss_jacobi(order, 0.0, 1.0, beta, 0.0)
    edges = graded_edges(0.0, 1.0, depth, left=True, right=False)
    xs, wx = [], []
    for k, (p, q) in enumerate(zip(edges[:-1], edges[1:])):
        if k == 0:
            u, w = gauss_jacobi(order, p, q, 1.0 + beta - corner_exp, 0.0)
            w = w * u ** corner_exp
        else:
            u, w = gauss_legendre(order, p, q)
            w = w * u ** (1.0 + beta)
        xs.append(u)
        wx.append(w)
    x = np.concatenate(xs)
    wx = np.concatenate(wx)
    X, S = np.meshgrid(x, s, indexing="ij")
    lower = np.asarray(F(L * X, L * X * (1.0 - S)), dtype=float)
    upper = np.asarray(F(L * X * (1.0 - S), L * X), dtype=float)
    inner = (lower + upper) @ ws
    return L ** (2.0 + beta) * float(wx @ inner)


def _naive_level(F, L, beta, order, depth):
    eu = np.linspace(0.0, L, depth + 1)
    parts_u = [gauss_legendre(order, p, q) for p, q in zip(eu[:-1], eu[1:])]
    parts_v = [gauss_legendre(order + 1, p, q) for p, q in zip(eu[:-1], eu[1:])]
    u = np.concatenate([x for x, _ in parts_u])
    wu = np.concatenate([w for _, w in parts_u])
    v = np.concatenate([x for x, _ in parts_v])
    wv = np.concatenate([w for _, w in parts_v])
    U, V = np.meshgrid(u, v, indexing="ij")
    vals = np.abs(U - V) ** beta * np.asarray(F(U, V), dtype=float)
    return float(wu @ vals @ wv)


def _adaptive_2d(F, L, beta, corner_exp, rel_tol):
    def inner(x):
        def g(s):
            lo = F(np.array([L * x]), np.array([L * x * (1.0 - s)]))
            hi = F(np.array([L * x * (1.0 - s)]), np.array([L * x]))
            return float(np.asarray(lo)[0] + np.asarray(hi)[0])

        val, _ = integrate.quad(g, 0.0, 1.0, weight="alg", wvar=(beta, 0.0),
                                epsrel=rel_tol, epsabs=0.0, limit=200)
        return val * x ** corner_exp

    val, err = integrate.quad(inner, 0.0, 1.0, weight="alg", wvar=(1.0 + beta - corner_exp, 0.0),
                              epsrel=rel_tol, epsabs=0.0, limit=200)
    scale = L ** (2.0 + beta)
    return val * scale, err * scale


def singular_double_integral(F, L, beta, quad=None, corner_exp=0.0):
    """
    Integral of |u - v|^beta F(u, v) over [0, L]^2.

    ``F`` is vectorised over arrays of equal shape. ``corner_exp`` q announces
    F ~ (u + v)^(-q) at the origin; it must satisfy 2 + beta - q > 0.
    """
    quad = quad or QuadratureSpec()
    if not -1.0 < beta:
        raise DomainError(f"weight exponent {beta} is not integrable")
    if not L > 0:
        raise DomainError("square side must be positive")
    if not 2.0 + beta - corner_exp > 0.0:
        raise DomainError("corner singularity is not integrable against the weight")

    if quad.base_rule == "adaptive":
        value, err = _adaptive_2d(F, L, beta, corner_exp, quad.rel_tolerance)
        converged = err <= max(quad.rel_tolerance * abs(value), 1e-300)
        return NormResult(value, err, bool(converged), 0)

    previous = None
    value, err = 0.0, np.inf
    for level in range(quad.max_refinements + 1):
        order = quad.order + 4 * level
        depth = quad.panels_per_axis * (level + 1)
        if quad.singularity_split:
            value = _duffy_level(F, L, beta, corner_exp, order, depth)
        else:
            value = _naive_level(F, L, beta, order, depth)
        if previous is not None:
            err = abs(value - previous)
            if err <= quad.rel_tolerance * abs(value) or (value == 0.0 and err == 0.0):
                return NormResult(value, err, True, level)
        previous = value
    logger.warning("double integral on [0, %g]^2 stopped at %.3e (error %.3e)", L, value, err)
    return NormResult(value, err, False, quad.max_refinements)


# ----------------------
# LOG-SCALE HALF-LINE INTEGRALS
# ----------------------
def log_scale_quad(func, pivot, rel_tol=1e-10):
    """
    Integral over (0, inf) of func(w) dw written as an integral over u = log w,
    split at log(pivot). ``func`` is scalar.
    """
    u0 = float(np.log(pivot))

    def g(u):
        w = np.exp(u)
        return func(w) * w

    left, _ = integrate.quad(g, -np.inf, u0, epsrel=rel_tol, epsabs=0.0, limit=400)
    right, _ = integrate.quad(g, u0, np.inf, epsrel=rel_tol, epsabs=0.0, limit=400)
    return left + right
