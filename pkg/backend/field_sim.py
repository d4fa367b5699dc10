# backend/field_sim.py
"""
Exact Gaussian simulation of the mild solution on small space-time grids.

The covariance of u(t_i, x_i) and u(t_j, x_j) is assembled pairwise from
covariance_solution, factored with a relative jitter schedule, and sampled
as L z with one random stream per draw.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import pandas as pd
from scipy import linalg

from backend.errors import DomainError, NotPositiveDefinite
from backend.fractional_time import fbm_covariance
from backend.heat_green import SpaceTimePoint
from backend.norms_existence import covariance_solution, require_admissible
from backend.quadrature import NormResult, QuadratureSpec, gauss_legendre, graded_edges, singular_quad_1d
from backend.rng import RngSpec, partition
from backend.settings import MAX_GRID_POINTS, default_threads
from backend.spatial_kernels import KernelFamily, kernel_radial

logger = logging.getLogger(__name__)

# relative to the mean diagonal
JITTER_SCHEDULE = (0.0, 1e-12, 1e-10, 1e-8)
# a pivot below this fraction of the root of its own diagonal entry counts as a failed factorization
PIVOT_FLOOR = 1e-7


# ----------------------
# GRID
# ----------------------
@dataclass(frozen=True)
class SpaceTimeGrid:
    times: tuple
    sites: tuple
    d: int = 1

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        sites = np.asarray(self.sites, dtype=float).reshape(len(self.sites), -1)
        if times.ndim != 1 or times.size == 0:
            raise DomainError("grid needs at least one time")
        if np.any(times <= 0) or np.any(np.diff(times) <= 0):
            raise DomainError("grid times must be positive and strictly increasing")
        if sites.shape[1] != int(self.d):
            raise DomainError(f"grid sites must be points in R^{self.d}")
        if len({tuple(s) for s in sites.tolist()}) != len(sites):
            raise DomainError("grid sites must be distinct")
        if times.size * len(sites) > MAX_GRID_POINTS:
            raise DomainError(f"grid has {times.size * len(sites)} points; the cap is "
                              f"{MAX_GRID_POINTS} (FRACHEAT_MAX_GRID_POINTS)")
        object.__setattr__(self, "times", tuple(times.tolist()))
        object.__setattr__(self, "sites", tuple(tuple(s) for s in sites.tolist()))
        object.__setattr__(self, "d", int(self.d))

    @classmethod
    def regular(cls, n_times, n_sites, T=1.0, d=1, extent=1.0):
        """Times T k/n_times, sites evenly spaced on [0, extent] along the first axis."""
        if n_times < 1 or n_sites < 1:
            raise DomainError("grid needs at least one time and one site")
        times = T * np.arange(1, n_times + 1) / n_times
        sites = np.zeros((n_sites, d))
        sites[:, 0] = np.linspace(0.0, extent, n_sites) if n_sites > 1 else 0.0
        return cls(tuple(times), tuple(map(tuple, sites)), d)

    @property
    def size(self):
        return len(self.times) * len(self.sites)

    def points(self):
        """Time-major order: every site at the first time, then the next time."""
        return [SpaceTimePoint(t, x) for t in self.times for x in self.sites]

    def labels(self):
        return [f"t{i}_x{j}" for i in range(len(self.times)) for j in range(len(self.sites))]

    def to_dict(self):
        return {"times": list(self.times), "sites": [list(s) for s in self.sites], "d": self.d}


# ----------------------
# COVARIANCE ASSEMBLY
# ----------------------
@dataclass
class CovarianceMatrix:
    entries: np.ndarray
    errors: np.ndarray = None
    converged: bool = True
    jitter_applied: float = 0.0
    labels: list = field(default_factory=list)

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=float)
        n = self.entries.shape[0]
        if self.entries.shape != (n, n):
            raise DomainError("covariance must be a square matrix")
        if self.errors is None:
            self.errors = np.zeros_like(self.entries)

    @property
    def size(self):
        return self.entries.shape[0]

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.entries).min())

    def to_frame(self):
        labels = self.labels or [str(k) for k in range(self.size)]
        return pd.DataFrame(self.entries, index=labels, columns=labels)

    def to_dict(self):
        return {
            "entries": self.entries.tolist(),
            "errors": self.errors.tolist(),
            "converged": self.converged,
            "jitter_applied": self.jitter_applied,
            "labels": list(self.labels),
        }


def _pair_key(p, q):
    # every kernel is radial, so only the separation length matters
    lag = round(float(np.linalg.norm(np.asarray(p.x) - np.asarray(q.x))), 14)
    t_lo, t_hi = sorted((p.t, q.t))
    return t_lo, t_hi, lag


def assemble_covariance(grid, spec, hp, quad=None, threads=None):
    """
    Symmetric matrix of covariance_solution over grid points. Pairs with the
    same times and the same site separation are computed once.
    """
    require_admissible(spec, hp.H)
    if spec.d != grid.d:
        raise DomainError(f"kernel dimension {spec.d} does not match grid dimension {grid.d}")
    quad = quad or QuadratureSpec()
    pts = grid.points()
    n = len(pts)
    jobs = {}
    index = {}
    for i in range(n):
        for j in range(i, n):
            key = _pair_key(pts[i], pts[j])
            index[(i, j)] = key
            jobs.setdefault(key, (pts[i], pts[j]))

    keys = list(jobs)
    logger.debug("assembling %d x %d covariance from %d distinct pairs", n, n, len(keys))

    def work(key):
        p, q = jobs[key]
        return covariance_solution(spec, hp, p, q, quad)

    workers = max(1, min(threads or default_threads(), len(keys)))
    if workers == 1:
        results = [work(k) for k in keys]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(work, keys))
    by_key = dict(zip(keys, results))

    entries = np.zeros((n, n))
    errors = np.zeros((n, n))
    converged = True
    for (i, j), key in index.items():
        res = by_key[key]
        entries[i, j] = entries[j, i] = res.value
        errors[i, j] = errors[j, i] = res.error_estimate
        converged = converged and res.converged
    if not converged:
        logger.warning("some covariance entries did not converge")
    return CovarianceMatrix(entries, errors, converged, 0.0, grid.labels())


# ----------------------
# FACTORIZATION
# ----------------------
@dataclass
class CholeskyFactor:
    lower: np.ndarray
    jitter: float
    relative_jitter: float


def factor_with_jitter(cov, jitter_schedule=JITTER_SCHEDULE):
    """
    Lower Cholesky factor of cov + jitter I for the first jitter in the
    schedule (relative to the mean diagonal) that factors cleanly. Each pivot
    must stay above PIVOT_FLOOR times the root of its own diagonal entry.
    """
    a = cov.entries
    if not np.allclose(a, a.T, rtol=1e-12, atol=0.0):
        raise DomainError("covariance matrix is not symmetric")
    schedule = sorted(float(j) for j in jitter_schedule)
    scale = float(np.mean(np.diag(a)))
    if not scale > 0.0:
        raise NotPositiveDefinite("covariance has a non-positive mean diagonal")
    eye = np.eye(a.shape[0])
    for rel in schedule:
        jitter = rel * scale
        try:
            lower = linalg.cholesky(a + jitter * eye, lower=True)
        except linalg.LinAlgError:
            logger.info("Cholesky failed at relative jitter %g", rel)
            continue
        if np.any(np.diag(lower) < PIVOT_FLOOR * np.sqrt(np.diag(a) + jitter)):
            logger.info("Cholesky pivot collapsed at relative jitter %g", rel)
            continue
        if rel > 0.0:
            logger.warning("covariance needed relative jitter %g to factor", rel)
        cov.jitter_applied = jitter
        return CholeskyFactor(lower, jitter, rel)
    raise NotPositiveDefinite(
        f"covariance is not positive definite up to relative jitter {schedule[-1]:g}; "
        "tighten the quadrature tolerance")


# ----------------------
# SAMPLING
# ----------------------
@dataclass(frozen=True)
class FieldSample:
    values: np.ndarray
    rng: RngSpec

    def __post_init__(self):
        if np.ndim(self.values) != 1:
            raise DomainError("a field sample is a vector")


def sample_matrix(factor, n, rng=None, threads=None):
    """(n, m) array of draws L z, draw k from stream rng.stream_id + k."""
    if int(n) <= 0:
        raise DomainError("number of draws must be positive")
    rng = rng or RngSpec()
    lower = factor.lower
    m = lower.shape[0]
    out = np.empty((int(n), m))

    def fill(bounds):
        lo, hi = bounds
        for k in range(lo, hi):
            z = rng.substream(k).generator().standard_normal(m)
            out[k] = lower @ z

    sizes = partition(n, threads or default_threads())
    edges = np.concatenate([[0], np.cumsum(sizes)])
    chunks = list(zip(edges[:-1], edges[1:]))
    if len(chunks) == 1:
        fill(chunks[0])
    else:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            list(pool.map(fill, chunks))
    return out


def sample_field(factor, n, rng=None, threads=None):
    """n independent realizations of the field, each with its stream provenance."""
    rng = rng or RngSpec()
    draws = sample_matrix(factor, n, rng, threads)
    return [FieldSample(draws[k], rng.substream(k)) for k in range(draws.shape[0])]


def samples_frame(samples, labels):
    """One row per draw, one column per grid point."""
    values = np.vstack([s.values for s in samples])
    frame = pd.DataFrame(values, columns=list(labels))
    frame.insert(0, "stream_id", [s.rng.stream_id for s in samples])
    frame.index.name = "draw"
    return frame


# ----------------------
# VALIDATION
# ----------------------
@dataclass(frozen=True)
class CovarianceAgreement:
    max_z: float
    fraction_over_3: float
    z_scores: np.ndarray


def covariance_agreement(draws, target, method="gaussian", n_batches=20):
    """
    Entrywise z-scores of the empirical (mean-zero) covariance against
    ``target``. "gaussian" uses Var S_ij = (C_ij^2 + C_ii C_jj)/n, "batch"
    estimates the standard error from batch means.
    """
    draws = np.asarray(draws, dtype=float)
    target = np.asarray(target, dtype=float)
    n = draws.shape[0]
    emp = draws.T @ draws / n
    if method == "gaussian":
        diag = np.diag(target)
        se = np.sqrt((target ** 2 + np.outer(diag, diag)) / n)
    elif method == "batch":
        parts = np.array_split(draws, n_batches)
        covs = np.array([p.T @ p / p.shape[0] for p in parts])
        se = covs.std(axis=0, ddof=1) / np.sqrt(n_batches)
    else:
        raise DomainError(f"unknown standard error method {method!r}")
    z = np.abs(emp - target) / np.where(se > 0, se, np.inf)
    upper = z[np.triu_indices_from(z)]
    return CovarianceAgreement(float(upper.max()), float(np.mean(upper > 3.0)), z)


# ----------------------
# NOISE ON RECTANGLES
# ----------------------
def _check_rectangle(rect, d):
    rect = np.asarray(rect, dtype=float).reshape(-1, 2)
    if rect.shape[0] != d:
        raise DomainError(f"rectangle must have {d} sides")
    if not np.all(np.isfinite(rect)):
        raise DomainError("rectangle must be bounded")
    if np.any(rect[:, 1] <= rect[:, 0]):
        raise DomainError("rectangle sides need lo < hi")
    return rect


def _overlap_length(z, a, b):
    """|[a0, a1] intersect ([b0, b1] + z)|, vectorised in z."""
    return np.clip(np.minimum(a[1], b[1] + z) - np.maximum(a[0], b[0] + z), 0.0, None)


def _kernel_power_at_zero(spec):
    if spec.family in (KernelFamily.RIESZ, KernelFamily.BESSEL):
        return min(spec.alpha - spec.d, 0.0)
    return 0.0


def _axis_rule(lo, hi, breaks, order, depth):
    """Composite Gauss-Legendre on [lo, hi] graded toward each interior break."""
    pts = sorted({lo, hi, *[b for b in breaks if lo < b < hi]})
    nodes, weights = [], []
    for p, q in zip(pts[:-1], pts[1:]):
        edges = graded_edges(p, q, depth, left=p in breaks, right=q in breaks)
        for e0, e1 in zip(edges[:-1], edges[1:]):
            x, w = gauss_legendre(order, e0, e1)
            nodes.append(x)
            weights.append(w)
    return np.concatenate(nodes), np.concatenate(weights)


def _tensor_pairing(spec, A, B, order, depth):
    d = spec.d
    rules = []
    for k in range(d):
        lo, hi = A[k, 0] - B[k, 1], A[k, 1] - B[k, 0]
        breaks = (0.0, A[k, 0] - B[k, 0], A[k, 1] - B[k, 1])
        z, w = _axis_rule(lo, hi, breaks, order, depth)
        rules.append((z, w * _overlap_length(z, A[k], B[k])))
    grids = np.meshgrid(*[z for z, _ in rules], indexing="ij")
    weight = rules[0][1]
    for _, w in rules[1:]:
        weight = np.multiply.outer(weight, w)
    r = np.sqrt(sum(g * g for g in grids))
    return float(np.sum(weight * kernel_radial(spec, r)))


def spatial_pairing(spec, A, B, quad=None):
    """<1_A, 1_B> = int_A int_B f(x - y) dy dx; |A intersect B| for white noise."""
    quad = quad or QuadratureSpec()
    A, B = _check_rectangle(A, spec.d), _check_rectangle(B, spec.d)
    if spec.is_white:
        sides = np.clip(np.minimum(A[:, 1], B[:, 1]) - np.maximum(A[:, 0], B[:, 0]), 0.0, None)
        return NormResult(float(np.prod(sides)), 0.0, True, 0)

    if spec.d == 1:
        a, b = A[0], B[0]
        lo, hi = a[0] - b[1], a[1] - b[0]
        breaks = (a[0] - b[0], a[1] - b[1])
        power = _kernel_power_at_zero(spec)

        def integrand(z):
            return kernel_radial(spec, np.abs(z)) * _overlap_length(z, a, b)

        if lo < 0.0 < hi:
            left = singular_quad_1d(integrand, lo, 0.0, quad, right_exp=power, breakpoints=breaks)
            right = singular_quad_1d(integrand, 0.0, hi, quad, left_exp=power, breakpoints=breaks)
            return NormResult(left.value + right.value, left.error_estimate + right.error_estimate,
                              left.converged and right.converged,
                              max(left.refinements_used, right.refinements_used))
        left_exp = power if lo == 0.0 else 0.0
        right_exp = power if hi == 0.0 else 0.0
        return singular_quad_1d(integrand, lo, hi, quad, left_exp=left_exp, right_exp=right_exp,
                                breakpoints=breaks)

    previous, value, err = None, 0.0, np.inf
    base_order = max(4, quad.order // 2)
    for level in range(quad.max_refinements + 1):
        value = _tensor_pairing(spec, A, B, base_order + 2 * level, quad.panels_per_axis + 2 * level)
        if previous is not None:
            err = abs(value - previous)
            if err <= quad.rel_tolerance * abs(value):
                return NormResult(value, err, True, level)
        previous = value
    logger.warning("rectangle pairing stopped at %.6g (error %.3e)", value, err)
    return NormResult(value, err, False, quad.max_refinements)


def noise_covariance_rectangles(hp, spec, t1, A1, t2, A2, quad=None):
    """E[B(1_[0,t1] x A1) B(1_[0,t2] x A2)] = R_H(t1, t2) <1_A1, 1_A2>."""
    r = fbm_covariance(hp, t1, t2)
    pairing = spatial_pairing(spec, A1, A2, quad)
    # R_H >= 0 for H > 1/2
    return pairing.scaled(r)
