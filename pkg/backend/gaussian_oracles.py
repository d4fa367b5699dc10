# backend/gaussian_oracles.py
"""
Closed forms and Monte Carlo oracles for the Gaussian expectations behind
I_f and J_f: chi-square moments and mgf, the noncentral decomposition
sum (mu_i + V_i)^2 = W_{d-1} + S^2, and E[f(U)], E[f(delta + U)].

Every sampler splits its n draws over a fixed number of independent
streams, so the merged estimate depends on (seed, n) only, never on the
number of worker threads.
"""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import repeat

import numpy as np
from scipy import stats
from scipy.special import gammainc

from backend.errors import DomainError, UnsupportedKernel
from backend.rng import MCEstimate, RngSpec, RunningMoments, blocks, partition
from backend.settings import default_threads
from backend.spatial_kernels import (
    KernelFamily,
    exact_I_f,
    exact_J_f,
    kernel_radial,
    noncentral_neg_moment,
)

logger = logging.getLogger(__name__)

STREAMS = 8
# probability mass of W_d handled exactly by the tail-split estimator
TAIL_MASS = 1e-3
# c(alpha) of the two-sample KS test
KS_COEFFICIENTS = {0.10: 1.224, 0.05: 1.358, 0.01: 1.628, 0.001: 1.949}


# ----------------------
# CLOSED FORMS
# ----------------------
def _check_dof(d):
    if int(d) != d or d < 1:
        raise DomainError(f"degrees of freedom must be an integer >= 1, got {d}")
    return int(d)


def chi2_neg_moment(d, p):
    """E[W_d^{-p}] = 2^{-p} Gamma(d/2 - p) / Gamma(d/2), finite for p < d/2."""
    d = _check_dof(d)
    p = float(p)
    if p < 0.0:
        raise DomainError("order of a negative moment must be >= 0")
    if p == 0.0:
        return 1.0
    return noncentral_neg_moment(d, p)


def chi2_mgf(d, c):
    """E[exp(-c W_d)] = (1 + 2c)^{-d/2} for c > -1/2."""
    d = _check_dof(d)
    c = float(c)
    if c <= -0.5:
        raise DomainError(f"mgf argument must exceed -1/2, got {c}")
    return float((1.0 + 2.0 * c) ** (-d / 2.0))


# ----------------------
# PARALLEL MONTE CARLO ENGINE
# ----------------------
def _stream_moments(draw, rng, n):
    gen = rng.generator()
    acc = RunningMoments()
    for size in blocks(n):
        acc.update(draw(gen, size))
    return acc


def monte_carlo(draw, rng, n, threads=None):
    """
    Mean of draw(generator, size) over n draws, partitioned over STREAMS
    substreams of ``rng`` and merged in stream order.
    """
    sizes = partition(n, STREAMS)
    specs = [rng.substream(k) for k in range(len(sizes))]
    workers = min(len(sizes), threads or default_threads())
    if workers <= 1:
        parts = [_stream_moments(draw, spec, size) for spec, size in zip(specs, sizes)]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_stream_moments, repeat(draw), specs, sizes))
    total = RunningMoments()
    for part in parts:
        total.merge(part)
    return total


def mc_chi2_mgf(d, c, rng=None, n=10 ** 6, threads=None):
    d = _check_dof(d)
    chi2_mgf(d, c)
    rng = rng or RngSpec()
    return monte_carlo(lambda g, k: np.exp(-c * g.chisquare(d, k)), rng, n, threads).estimate()


def mc_chi2_neg_moment(d, p, rng=None, n=10 ** 6, threads=None):
    """
    Monte Carlo E[W_d^{-p}]. When W^{-p} has infinite variance (2p >= d/2)
    the lowest TAIL_MASS of W is integrated exactly and only the bulk is
    sampled; the plain sample mean is kept as ``raw_mean``.
    """
    d = _check_dof(d)
    exact = chi2_neg_moment(d, p)
    rng = rng or RngSpec()
    if 2.0 * p < d / 2.0:
        return monte_carlo(lambda g, k: g.chisquare(d, k) ** (-p), rng, n, threads).estimate()

    cut = float(stats.chi2.ppf(TAIL_MASS, d))
    # E[W^{-p}; W <= cut] = E[W^{-p}] P(W_{d-2p} <= cut)
    remainder = exact * float(gammainc(d / 2.0 - p, cut / 2.0))

    def bulk_draw(g, k):
        w = g.chisquare(d, k)
        return np.where(w > cut, w ** (-p), 0.0)

    bulk = monte_carlo(bulk_draw, rng, n, threads)
    raw = monte_carlo(lambda g, k: g.chisquare(d, k) ** (-p), rng, n, threads)
    logger.info("chi-square moment d=%d p=%g uses the tail split at %.4g", d, p, cut)
    est = bulk.estimate()
    return MCEstimate(est.mean + remainder, est.std_error, est.n_samples, True, raw.mean)


# ----------------------
# NONCENTRAL CHI-SQUARE
# ----------------------
def _check_mean_vector(d, mu):
    d = _check_dof(d)
    mu = np.atleast_1d(np.asarray(mu, dtype=float))
    if mu.shape != (d,):
        raise DomainError(f"mean vector must have {d} components")
    return d, mu


def sample_noncentral(d, mu, rng, n, method="direct"):
    """
    n draws of sum (mu_i + V_i)^2. ``method="decomposed"`` draws W_{d-1} + S^2
    with S ~ N(|mu|, 1) instead.
    """
    d, mu = _check_mean_vector(d, mu)
    if int(n) <= 0:
        raise DomainError("number of samples must be positive")
    gen = rng.generator()
    out = np.empty(int(n))
    pos = 0
    norm_mu = float(np.linalg.norm(mu))
    for size in blocks(n):
        if method == "direct":
            v = gen.standard_normal((size, d))
            out[pos:pos + size] = ((mu + v) ** 2).sum(axis=1)
        elif method == "decomposed":
            w = gen.chisquare(d - 1, size) if d > 1 else np.zeros(size)
            s = norm_mu + gen.standard_normal(size)
            out[pos:pos + size] = w + s * s
        else:
            raise DomainError(f"unknown noncentral sampler {method!r}")
        pos += size
    return out


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    critical: float
    passed: bool

    def to_dict(self):
        return {"statistic": self.statistic, "pvalue": self.pvalue,
                "critical": self.critical, "passed": self.passed}


def ks_two_sampler(d, mu, rng=None, n=10 ** 5, level=0.01):
    """Two-sample KS distance between the direct and decomposed samplers."""
    if level not in KS_COEFFICIENTS:
        raise DomainError(f"level must be one of {sorted(KS_COEFFICIENTS)}")
    rng = rng or RngSpec()
    direct = sample_noncentral(d, mu, rng, n, "direct")
    decomposed = sample_noncentral(d, mu, rng.substream(1), n, "decomposed")
    res = stats.ks_2samp(direct, decomposed)
    critical = KS_COEFFICIENTS[level] * np.sqrt(2.0 / n)
    return KSResult(float(res.statistic), float(res.pvalue), float(critical),
                    bool(res.statistic < critical))


# ----------------------
# I_f AND J_f ORACLES
# ----------------------
def heavy_tailed(spec):
    """f(U) has infinite variance: f ~ |x|^{-(d-alpha)} with d - alpha >= d/2."""
    if spec.family in (KernelFamily.RIESZ, KernelFamily.BESSEL):
        return spec.alpha <= spec.d / 2.0
    return False


def _require_pointwise(spec):
    if spec.is_white:
        raise UnsupportedKernel("Monte Carlo oracles need a pointwise kernel, not white noise")


def mc_I_f(spec, t, r, s, rng=None, n=10 ** 6, threads=None):
    """
    E[f(U)], U ~ N(0, 2(2t - s - r) Id), sampled through |U|^2 = 2(2t - s - r) W_d.
    Heavy-tailed kernels report the radial reduction as ``mean`` and keep the
    sample mean as ``raw_mean``.
    """
    _require_pointwise(spec)
    t, r, s = float(t), float(r), float(s)
    if not (r < t and s < t):
        raise DomainError(f"need r < t and s < t, got t={t}, r={r}, s={s}")
    rng = rng or RngSpec()
    a = 2.0 * t - s - r
    d = spec.d

    def draw(g, k):
        return kernel_radial(spec, np.sqrt(2.0 * a * g.chisquare(d, k)))

    acc = monte_carlo(draw, rng, n, threads)
    if heavy_tailed(spec):
        logger.warning("%s kernel with alpha=%g in d=%d has infinite variance; "
                       "reporting the radial reduction", spec.family.value, spec.alpha, d)
        est = acc.estimate()
        return MCEstimate(exact_I_f(spec, a), est.std_error, est.n_samples, False, est.mean)
    return acc.estimate()


def mc_J_f(spec, u, v, y, z, rng=None, n=10 ** 6, threads=None):
    """E[f(y - z + U)] with U = sqrt(2u) Y - sqrt(2v) Z, Y, Z standard normal in R^d."""
    _require_pointwise(spec)
    u, v = float(u), float(v)
    if not (u > 0.0 and v > 0.0):
        raise DomainError(f"time lags must be positive, got u={u}, v={v}")
    d = spec.d
    delta = np.atleast_1d(np.asarray(y, dtype=float)) - np.atleast_1d(np.asarray(z, dtype=float))
    if delta.shape != (d,):
        raise DomainError(f"sites must be points in R^{d}")
    rng = rng or RngSpec()
    su, sv = np.sqrt(2.0 * u), np.sqrt(2.0 * v)

    def draw(g, k):
        yy = g.standard_normal((k, d))
        zz = g.standard_normal((k, d))
        return kernel_radial(spec, np.linalg.norm(delta + su * yy - sv * zz, axis=1))

    acc = monte_carlo(draw, rng, n, threads)
    if heavy_tailed(spec):
        logger.warning("%s kernel with alpha=%g in d=%d has infinite variance; "
                       "reporting the radial reduction", spec.family.value, spec.alpha, d)
        est = acc.estimate()
        return MCEstimate(exact_J_f(spec, u + v, delta), est.std_error, est.n_samples, False,
                          est.mean)
    return acc.estimate()
