# backend/rng.py
"""
Reproducible random streams and single-pass moment accumulation.

A stream is identified by (seed, stream_id). Each stream is a Philox
counter-based generator keyed through a SeedSequence spawn key, so streams
with different ids are independent and any stream can be rebuilt on its own.
"""
from dataclasses import dataclass, field

import numpy as np

from backend.errors import DomainError
from backend.settings import DEFAULT_SEED

# Samples are drawn in blocks of this size so memory stays flat at n = 10^6+
BLOCK_SIZE = 1 << 16


@dataclass(frozen=True)
class RngSpec:
    seed: int = DEFAULT_SEED
    stream_id: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2 ** 64:
            raise DomainError("seed must be a 64-bit unsigned integer")
        if int(self.stream_id) < 0:
            raise DomainError("stream_id must be >= 0")

    def generator(self):
        seq = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream_id),))
        return np.random.Generator(np.random.Philox(seq))

    def substream(self, offset):
        """The stream ``offset`` places after this one (same seed)."""
        return RngSpec(self.seed, self.stream_id + int(offset))

    def to_dict(self):
        return {"seed": int(self.seed), "stream_id": int(self.stream_id)}


@dataclass(frozen=True)
class MCEstimate:
    mean: float
    std_error: float
    n_samples: int
    variance_reliable: bool = True
    raw_mean: float = None

    def __post_init__(self):
        if self.n_samples < 1:
            raise DomainError("an estimate needs at least one sample")

    def within(self, target, n_se=3.0):
        return abs(self.mean - target) <= n_se * self.std_error

    def to_dict(self):
        return {
            "mean": self.mean,
            "std_error": self.std_error,
            "n_samples": self.n_samples,
            "variance_reliable": self.variance_reliable,
            "raw_mean": self.mean if self.raw_mean is None else self.raw_mean,
        }


@dataclass
class RunningMoments:
    """Welford accumulator that absorbs whole blocks (Chan's pairwise update)."""

    count: int = 0
    mean: float = 0.0
    m2: float = field(default=0.0)

    def update(self, block):
        block = np.asarray(block, dtype=float).ravel()
        n_b = block.size
        if n_b == 0:
            return self
        mean_b = float(block.mean())
        m2_b = float(((block - mean_b) ** 2).sum())
        self._combine(n_b, mean_b, m2_b)
        return self

    def merge(self, other):
        if other.count:
            self._combine(other.count, other.mean, other.m2)
        return self

    def _combine(self, n_b, mean_b, m2_b):
        n_a = self.count
        total = n_a + n_b
        delta = mean_b - self.mean
        self.mean += delta * n_b / total
        self.m2 += m2_b + delta * delta * n_a * n_b / total
        self.count = total

    @property
    def variance(self):
        if self.count < 2:
            return 0.0
        return self.m2 / (self.count - 1)

    def estimate(self, **extra):
        se = float(np.sqrt(self.variance / self.count)) if self.count else 0.0
        return MCEstimate(float(self.mean), se, int(self.count), **extra)


def partition(n, n_streams):
    """Split n draws into n_streams nearly equal, deterministic chunk sizes."""
    if n <= 0:
        raise DomainError("number of samples must be positive")
    n_streams = max(1, min(int(n_streams), int(n)))
    base, extra = divmod(int(n), n_streams)
    return [base + (1 if k < extra else 0) for k in range(n_streams)]


def blocks(n):
    """Yield block sizes that add up to n."""
    full, rest = divmod(int(n), BLOCK_SIZE)
    for _ in range(full):
        yield BLOCK_SIZE
    if rest:
        yield rest
