# backend/fractional_time.py
"""
Temporal (fractional Brownian) machinery for H in (1/2, 1).

Covariance R_H, the Volterra kernel K_H and its transfer operator K*_H, the
right-sided fractional integral, the restricted Fourier transform F_{a,b},
and the Fourier pairing identity

    int int phi(u) |u - v|^{-(1-alpha)} psi(v) dv du
        = q_alpha int |tau|^{-alpha} F_{a,b}phi(tau) conj(F_{a,b}psi(tau)) dtau.
"""
import logging
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from backend.errors import DomainError
from backend.quadrature import (
    NormResult,
    QuadratureSpec,
    gauss_jacobi,
    gauss_legendre,
    singular_double_integral,
)

logger = logging.getLogger(__name__)

# Gauss-Legendre points for the regularised Volterra integrals
VOLTERRA_ORDER = 64
MAX_TAU = 2.0 ** 17


# ----------------------
# CONSTANTS
# ----------------------
@dataclass(frozen=True)
class HurstParams:
    H: float
    alpha_H: float
    c_H: float
    c_star_H: float

    @property
    def kappa(self):
        """H - 1/2, the order of the fractional integral behind K*_H."""
        return self.H - 0.5

    def to_dict(self):
        return {"H": self.H, "alpha_H": self.alpha_H, "c_H": self.c_H, "c_star_H": self.c_star_H}


def _check_hurst(H):
    H = float(H)
    if not 0.5 < H < 1.0:
        raise DomainError(f"Hurst index must lie in (1/2, 1), got {H}")
    return H


def derive_hurst_params(H):
    """All temporal constants for Hurst index H, through log-Gamma."""
    H = _check_hurst(H)
    alpha_H = H * (2.0 * H - 1.0)
    log_c = (gammaln(H - 0.5) - gammaln(1.0 - H)
             - 2.0 * (1.0 - H) * np.log(2.0) - 0.5 * np.log(np.pi))
    log_cs = 0.5 * (np.log(alpha_H) + gammaln(1.5 - H) - gammaln(2.0 - 2.0 * H) - gammaln(H - 0.5))
    return HurstParams(H=H, alpha_H=alpha_H, c_H=float(np.exp(log_c)), c_star_H=float(np.exp(log_cs)))


def q_alpha(alpha):
    """Constant of the Fourier pairing identity; equals 1/gamma_{alpha,1}."""
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"alpha must lie in (0, 1), got {alpha}")
    log_q = (gammaln(alpha / 2.0) - gammaln((1.0 - alpha) / 2.0)
             - (1.0 - alpha) * np.log(2.0) - 0.5 * np.log(np.pi))
    return float(np.exp(log_q))


# ----------------------
# COVARIANCE
# ----------------------
def fbm_covariance(hp, t, s):
    """R_H(t, s) = (t^{2H} + s^{2H} - |t - s|^{2H}) / 2; broadcasts."""
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if np.any(t < 0) or np.any(s < 0):
        raise DomainError("fBm covariance is defined for nonnegative times only")
    h2 = 2.0 * hp.H
    out = 0.5 * (t ** h2 + s ** h2 - np.abs(t - s) ** h2)
    return float(out) if out.ndim == 0 else out


def fbm_covariance_matrix(hp, times):
    times = np.asarray(times, dtype=float)
    return fbm_covariance(hp, times[:, None], times[None, :])


# ----------------------
# VOLTERRA KERNEL
# ----------------------
def _volterra_moment(s, x, kappa, g, order=VOLTERRA_ORDER):
    """
    int_s^x (u - s)^{kappa - 1} g(u) du with u = s + v^{1/kappa}, which turns
    the endpoint singularity into a bounded integrand.
    """
    if x <= s:
        return 0.0
    v, w = gauss_legendre(order, 0.0, (x - s) ** kappa)
    return float(w @ g(s + v ** (1.0 / kappa))) / kappa


@dataclass(frozen=True)
class KernelValue:
    value: float
    error: float


def kernel_K_H(hp, t, s, method="substitution"):
    """
    K_H(t, s) = c*_H s^{1/2-H} int_s^t (u - s)^{H-3/2} u^{H-1/2} du, 0 < s < t.

    ``method`` is "substitution" (regularised Gauss-Legendre) or "adaptive"
    (QUADPACK with the algebraic weight).
    """
    t, s = float(t), float(s)
    if not 0.0 < s < t:
        raise DomainError(f"K_H(t, s) needs 0 < s < t, got t={t}, s={s}")
    kappa = hp.kappa
    pref = hp.c_star_H * s ** (-kappa)

    def g(u):
        return u ** kappa

    if method == "substitution":
        coarse = _volterra_moment(s, t, kappa, g, VOLTERRA_ORDER // 2)
        fine = _volterra_moment(s, t, kappa, g, VOLTERRA_ORDER)
        return KernelValue(pref * fine, pref * abs(fine - coarse))
    if method == "adaptive":
        val, err = integrate.quad(g, s, t, weight="alg", wvar=(kappa - 1.0, 0.0),
                                  epsrel=1e-13, epsabs=0.0, limit=200)
        return KernelValue(pref * val, pref * err)
    raise DomainError(f"unknown K_H method {method!r}")


def _k_h(hp, t, u):
    if u >= t:
        return 0.0
    kappa = hp.kappa
    return hp.c_star_H * u ** (-kappa) * _volterra_moment(u, t, kappa, lambda w: w ** kappa)


def kernel_reproduction(hp, t, s, rel_tol=1e-11):
    """int_0^{t^s} K_H(t, u) K_H(s, u) du, which must reproduce R_H(t, s)."""
    t, s = float(t), float(s)
    if t <= 0 or s <= 0:
        raise DomainError("kernel reproduction needs positive times")
    m = min(t, s)
    kappa = hp.kappa
    right = 2.0 * kappa if t == s else kappa
    left = 1.0 - 2.0 * hp.H

    def remainder(u):
        return _k_h(hp, t, u) * _k_h(hp, s, u) / (u ** left * (m - u) ** right)

    val, err = integrate.quad(remainder, 0.0, m, weight="alg", wvar=(left, right),
                              epsrel=rel_tol, epsabs=0.0, limit=400)
    return KernelValue(val, err)


# ----------------------
# SAMPLED FUNCTIONS
# ----------------------
@dataclass(frozen=True)
class SampledFunction:
    """
    Piecewise-linear function on a strictly increasing grid inside [0, horizon],
    zero on [0, horizon] outside the grid span.
    """

    grid: tuple
    values: tuple
    horizon: float = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if grid.ndim != 1 or grid.size < 2:
            raise DomainError("a sampled function needs at least two grid points")
        if values.shape != grid.shape:
            raise DomainError("grid and values must have the same length")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("grid must be strictly increasing")
        horizon = float(grid[-1]) if self.horizon is None else float(self.horizon)
        if grid[0] < 0 or grid[-1] > horizon:
            raise DomainError("grid must lie inside [0, horizon]")
        object.__setattr__(self, "grid", tuple(grid.tolist()))
        object.__setattr__(self, "values", tuple(values.tolist()))
        object.__setattr__(self, "horizon", horizon)

    @classmethod
    def indicator(cls, start, end, horizon=None):
        return cls((start, end), (1.0, 1.0), horizon)

    @classmethod
    def from_callable(cls, f, grid, horizon=None):
        grid = np.asarray(grid, dtype=float)
        return cls(tuple(grid), tuple(np.asarray(f(grid), dtype=float)), horizon)

    @property
    def x(self):
        return np.asarray(self.grid)

    @property
    def y(self):
        return np.asarray(self.values)

    def __call__(self, u):
        u = np.asarray(u, dtype=float)
        x, y = self.x, self.y
        out = np.interp(u, x, y)
        return np.where((u >= x[0]) & (u <= x[-1]), out, 0.0)

    def pieces(self, lo=-np.inf, hi=np.inf):
        """Linear pieces (p, q, c0, c1) with f(u) = c0 + c1 u on [p, q] inside [lo, hi]."""
        x, y = self.x, self.y
        out = []
        for k in range(len(x) - 1):
            p, q = max(x[k], lo), min(x[k + 1], hi)
            if q <= p:
                continue
            c1 = (y[k + 1] - y[k]) / (x[k + 1] - x[k])
            out.append((p, q, y[k] - c1 * x[k], c1))
        return out

    def jumps(self, a, b):
        """Jump locations and sizes of f * 1_[a, b]."""
        lo, hi = max(a, self.x[0]), min(b, self.x[-1])
        if hi <= lo:
            return []
        return [(lo, float(self(lo))), (hi, -float(self(hi)))]

    def slope_jumps(self, a, b):
        """Total size of the derivative jumps of f * 1_[a, b]."""
        pieces = self.pieces(a, b)
        if not pieces:
            return 0.0
        slopes = [0.0] + [c1 for _, _, _, c1 in pieces] + [0.0]
        return float(np.sum(np.abs(np.diff(slopes))))


def _check_order(alpha):
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise DomainError(f"fractional order must lie in (0, 1), got {alpha}")
    return alpha


# ----------------------
# FRACTIONAL INTEGRAL / TRANSFER OPERATOR
# ----------------------
def fractional_integral_right(f, alpha, t):
    """
    (I_{T-}^alpha f)(t) for the piecewise-linear interpolant of ``f``; each
    linear piece is integrated exactly against (u - t)^{alpha - 1}.
    """
    alpha = _check_order(alpha)
    t = float(t)
    if not 0.0 <= t < f.horizon:
        raise DomainError(f"t must lie in [0, T) = [0, {f.horizon}), got {t}")
    total = 0.0
    for p, q, c0, c1 in f.pieces(lo=t):
        # f(u) = (c0 + c1 t) + c1 (u - t)
        a0 = c0 + c1 * t
        wp, wq = p - t, q - t
        total += a0 * (wq ** alpha - wp ** alpha) / alpha
        total += c1 * (wq ** (alpha + 1.0) - wp ** (alpha + 1.0)) / (alpha + 1.0)
    return float(total * np.exp(-gammaln(alpha)))


def transfer_operator(phi, hp, s):
    """
    (K*_H phi)(s) = c*_H Gamma(H - 1/2) s^{-(H-1/2)} I_{T-}^{H-1/2}(u^{H-1/2} phi(u))(s).
    """
    s = float(s)
    if not 0.0 < s < phi.horizon:
        raise DomainError(f"transfer operator needs 0 < s < T = {phi.horizon}, got {s}")
    kappa = hp.kappa
    total = 0.0
    for p, q, c0, c1 in phi.pieces(lo=s):

        def g(u, c0=c0, c1=c1):
            return u ** kappa * (c0 + c1 * u)

        total += _volterra_moment(s, q, kappa, g) - _volterra_moment(s, p, kappa, g)
    # Gamma(kappa) of the prefactor cancels the 1/Gamma(kappa) of I^kappa
    return hp.c_star_H * s ** (-kappa) * total


def transfer_inner_product(phi, psi, hp, rel_tol=1e-10):
    """<K*_H phi, K*_H psi> in L_2(0, T); equals the H(0,T) inner product."""
    horizon = min(phi.horizon, psi.horizon)
    end = min(phi.x[-1], psi.x[-1], horizon)
    left = 1.0 - 2.0 * hp.H
    eps = 1e-15 * horizon

    def remainder(s):
        if s >= end - eps:
            return 0.0
        return transfer_operator(phi, hp, s) * transfer_operator(psi, hp, s) / s ** left

    val, err = integrate.quad(remainder, 0.0, end, weight="alg", wvar=(left, 0.0),
                              epsrel=rel_tol, epsabs=0.0, limit=400)
    return KernelValue(val, err)


# ----------------------
# RESTRICTED FOURIER TRANSFORM
# ----------------------
def _sinc(z):
    return np.sinc(z / np.pi)


def _sinc1(z):
    """(sin z - z cos z) / z^3 with its series near 0."""
    z = np.asarray(z, dtype=float)
    small = np.abs(z) < 1e-2
    zs = np.where(small, 1.0, z)
    exact = (np.sin(zs) - zs * np.cos(zs)) / zs ** 3
    z2 = z * z
    series = 1.0 / 3.0 - z2 / 30.0 + z2 * z2 / 840.0
    return np.where(small, series, exact)


def restricted_fourier(phi, a, b, tau, chunk=4096):
    """
    F_{a,b}phi(tau) = int_a^b e^{-i tau t} phi(t) dt, exact for the
    piecewise-linear interpolant. ``tau`` may be an array.
    """
    a, b = float(a), float(b)
    if not b > a:
        raise DomainError(f"restricted Fourier transform needs b > a, got [{a}, {b}]")
    tau_arr = np.atleast_1d(np.asarray(tau, dtype=float))
    pieces = phi.pieces(a, b)
    out = np.zeros(tau_arr.shape, dtype=complex)
    if pieces:
        p = np.array([x[0] for x in pieces])
        q = np.array([x[1] for x in pieces])
        c0 = np.array([x[2] for x in pieces])
        c1 = np.array([x[3] for x in pieces])
        mid, half = 0.5 * (p + q), 0.5 * (q - p)
        fmid = c0 + c1 * mid
        for k in range(0, tau_arr.size, chunk):
            tk = tau_arr[k:k + chunk, None]
            z = tk * half
            term = fmid * 2.0 * half * _sinc(z) - 2j * c1 * tk * half ** 3 * _sinc1(z)
            out[k:k + chunk] = (np.exp(-1j * tk * mid) * term).sum(axis=1)
    if np.ndim(tau) == 0:
        return complex(out[0])
    return out


# ----------------------
# FOURIER PAIRING IDENTITY
# ----------------------
@dataclass(frozen=True)
class PairingResult:
    lhs: float
    rhs: float
    lhs_error: float
    tail_bound: float
    tau_max: float
    converged: bool

    @property
    def relative_gap(self):
        return abs(self.lhs - self.rhs) / max(abs(self.lhs), 1e-300)

    def to_dict(self):
        return {
            "lhs": self.lhs, "rhs": self.rhs, "lhs_error": self.lhs_error,
            "tail_bound": self.tail_bound, "tau_max": self.tau_max, "converged": self.converged,
        }


def _tail_terms(phi, psi, a, b, alpha):
    """Mean tail correction constant and a bound constant for what is left."""
    jp, jq = phi.jumps(a, b), psi.jumps(a, b)
    mean = sum(j1 * j2 for z1, j1 in jp for z2, j2 in jq if abs(z1 - z2) < 1e-14)
    osc, min_gap = 0.0, np.inf
    for z1, j1 in jp:
        for z2, j2 in jq:
            if abs(z1 - z2) >= 1e-14:
                osc += abs(j1 * j2)
                min_gap = min(min_gap, abs(z1 - z2))
    jump_mass = sum(abs(j) for _, j in jp) + sum(abs(j) for _, j in jq)
    slope_mass = phi.slope_jumps(a, b) + psi.slope_jumps(a, b)
    rest = (2.0 * osc / min_gap if osc else 0.0) + jump_mass * slope_mass + slope_mass ** 2
    return mean, rest


def spectral_pairing(phi, psi, a, b, alpha, target_abs, n_panel=16):
    """
    q_alpha int_R |tau|^{-alpha} F phi conj(F psi) dtau, integrated on
    |tau| <= tau_max with the non-oscillatory 1/tau^2 tail added analytically.
    Returns (value, tail_bound, tau_max, converged).
    """
    q = q_alpha(alpha)
    width = min(1.0, 1.0 / (b - a))
    mean, rest = _tail_terms(phi, psi, a, b, alpha)

    tau_max, converged = 64.0, True
    while q * 2.0 * rest * tau_max ** (-2.0 - alpha) / (1.0 + alpha) > 0.1 * target_abs:
        if tau_max >= MAX_TAU:
            converged = False
            break
        tau_max *= 2.0
    bound = q * 2.0 * rest * tau_max ** (-2.0 - alpha) / (1.0 + alpha)

    def real_product(tau):
        fp = restricted_fourier(phi, a, b, tau)
        fq = restricted_fourier(psi, a, b, tau)
        return (fp * np.conj(fq)).real

    # |tau|^{-alpha} at the origin goes into a Jacobi weight
    t0, w0 = gauss_jacobi(40, 0.0, width, -alpha, 0.0)
    head = float(w0 @ real_product(t0))
    edges = np.arange(width, tau_max + 0.5 * width, width)
    if edges[-1] < tau_max:
        edges = np.append(edges, tau_max)
    body = 0.0
    batch = 2048
    for k in range(0, len(edges) - 1, batch):
        e0, e1 = edges[k:k + batch + 1][:-1], edges[k:k + batch + 1][1:]
        x, w = gauss_legendre(n_panel, 0.0, 1.0)
        nodes = (e0[:, None] + (e1 - e0)[:, None] * x[None, :]).ravel()
        weights = ((e1 - e0)[:, None] * w[None, :]).ravel()
        body += float(weights @ (nodes ** (-alpha) * real_product(nodes)))
    tail = mean * tau_max ** (-1.0 - alpha) / (1.0 + alpha)
    value = q * 2.0 * (head + body + tail)
    return value, bound, tau_max, converged


def lemma_A1_pairing(phi, psi, a, b, alpha, quad=None, rel_tol=1e-6):
    """
    Both sides of the pairing identity on [a, b]: the time-domain singular
    double integral and the frequency-domain weighted product of transforms.
    """
    alpha = _check_order(alpha)
    a, b = float(a), float(b)
    if not b > a:
        raise DomainError(f"pairing needs b > a, got [{a}, {b}]")
    quad = quad or QuadratureSpec(rel_tolerance=1e-10)

    def F(u, v):
        return phi(a + u) * psi(a + v)

    lhs = singular_double_integral(F, b - a, alpha - 1.0, quad)
    rhs, bound, tau_max, tail_ok = spectral_pairing(
        phi, psi, a, b, alpha, target_abs=rel_tol * max(abs(lhs.value), 1e-300))
    if not tail_ok:
        logger.warning("frequency tail bound %.3e not reached below tau_max=%g", bound, tau_max)
    return PairingResult(lhs.value, rhs, lhs.error_estimate, bound, tau_max,
                         bool(tail_ok and lhs.converged))


def single_pairing_identity(phi, a, b, alpha):
    """
    Single-function form: int_a^b |t|^{-(1-alpha)} phi(t) dt against
    q_alpha int |tau|^{-alpha} F_{a,b}phi(tau) dtau (real part).
    """
    alpha = _check_order(alpha)
    a, b = float(a), float(b)
    if not b > a:
        raise DomainError(f"needs b > a, got [{a}, {b}]")
    # left side: split at 0 where |t|^{alpha-1} is singular
    lhs = 0.0
    for p, q0, c0, c1 in phi.pieces(a, b):
        for lo, hi in ((p, min(q0, 0.0)), (max(p, 0.0), q0)):
            if hi <= lo:
                continue
            if lo >= 0.0:
                x, w = gauss_jacobi(40, lo, hi, alpha - 1.0 if lo == 0.0 else 0.0, 0.0)
                div = x ** (alpha - 1.0) if lo == 0.0 else 1.0
            else:
                x, w = gauss_jacobi(40, lo, hi, 0.0, alpha - 1.0 if hi == 0.0 else 0.0)
                div = np.abs(x) ** (alpha - 1.0) if hi == 0.0 else 1.0
            lhs += float(w @ (np.abs(x) ** (alpha - 1.0) * (c0 + c1 * x) / div))
    # right side: the pairing against a point mass at 0, where F psi == 1
    q = q_alpha(alpha)
    jumps = phi.jumps(a, b)
    jump_mass = sum(abs(j) for _, j in jumps)
    slope_mass = phi.slope_jumps(a, b)
    width = min(1.0, 1.0 / (b - a))
    t0, w0 = gauss_jacobi(40, 0.0, width, -alpha, 0.0)
    head = float(w0 @ restricted_fourier(phi, a, b, t0).real)
    # oscillatory tail decays like |tau|^{-1-alpha}; integrate far enough
    tau_max = 4096.0 / (b - a)
    edges = np.arange(width, tau_max + 0.5 * width, width)
    x, w = gauss_legendre(16, 0.0, 1.0)
    nodes = (edges[:-1, None] + width * x[None, :]).ravel()
    weights = np.repeat(width * w[None, :], len(edges) - 1, axis=0).ravel()
    body = float(weights @ (nodes ** (-alpha) * restricted_fourier(phi, a, b, nodes).real))
    bound = q * 2.0 * (jump_mass + slope_mass) * tau_max ** (-1.0 - alpha) / (1.0 + alpha)
    rhs = q * 2.0 * (head + body)
    return PairingResult(lhs, rhs, 0.0, bound, tau_max, True)


# ----------------------
# H(0,T) INNER PRODUCT
# ----------------------
def hurst_inner_product(phi, psi, hp, T=None, method="time", quad=None):
    """
    alpha_H int int phi(u)|u - v|^{2H-2} psi(v) over [0, T]^2, directly
    ("time") or through the spectral form with c_H = q_{2H-1} ("spectral").
    """
    T = float(T if T is not None else min(phi.horizon, psi.horizon))
    if method == "time":

        def F(u, v):
            return phi(u) * psi(v)

        res = singular_double_integral(F, T, 2.0 * hp.H - 2.0, quad or QuadratureSpec())
        return res.scaled(hp.alpha_H)
    if method == "spectral":
        res = lemma_A1_pairing(phi, psi, 0.0, T, 2.0 * hp.H - 1.0, quad)
        return NormResult(hp.alpha_H * res.rhs, hp.alpha_H * res.tail_bound, res.converged, 0)
    raise DomainError(f"unknown inner product method {method!r}")
