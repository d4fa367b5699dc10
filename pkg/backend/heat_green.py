# backend/heat_green.py
"""Heat kernel G(t, x) = (4 pi t)^{-d/2} exp(-|x|^2 / 4t), zero for t <= 0."""
from dataclasses import dataclass

import numpy as np

from backend.errors import DomainError


@dataclass(frozen=True)
class SpaceTimePoint:
    t: float
    x: tuple

    def __post_init__(self):
        t = float(self.t)
        x = np.atleast_1d(np.asarray(self.x, dtype=float))
        if not np.isfinite(t) or t < 0.0:
            raise DomainError(f"time must be finite and >= 0, got {self.t}")
        if x.ndim != 1 or not np.all(np.isfinite(x)):
            raise DomainError("site must be a finite point")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "x", tuple(x.tolist()))

    @property
    def d(self):
        return len(self.x)

    @property
    def site(self):
        return np.asarray(self.x)

    def to_dict(self):
        return {"t": self.t, "x": list(self.x)}


def green_eval(t, x):
    """G(t, x); ``x`` has the space dimension on its last axis."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    t = float(t)
    d = x.shape[-1]
    r2 = np.sum(x * x, axis=-1)
    if t <= 0.0:
        out = np.zeros_like(r2)
    else:
        out = (4.0 * np.pi * t) ** (-d / 2.0) * np.exp(-r2 / (4.0 * t))
    return float(out) if np.ndim(out) == 0 else out


def g_tx_eval(p, s, y):
    """g_{t,x}(s, y) = G(t - s, x - y)."""
    y = np.atleast_1d(np.asarray(y, dtype=float))
    return green_eval(p.t - float(s), p.site - y)


def pair_integral_white(t, r, s, d):
    """int g_{tx}(s, y) g_{tx}(r, y) dy = (4 pi (2t - s - r))^{-d/2}; zero once r or s reaches t."""
    t, r, s = float(t), float(r), float(s)
    if r >= t or s >= t:
        return 0.0
    return float((4.0 * np.pi * (2.0 * t - s - r)) ** (-d / 2.0))


def pair_integral_white_offset(u, v, y, z, d=None):
    """int G(u, y - w) G(v, z - w) dw = G(u + v, y - z)."""
    u, v = float(u), float(v)
    if not (u > 0.0 and v > 0.0):
        raise DomainError(f"time lags must be positive, got u={u}, v={v}")
    delta = np.atleast_1d(np.asarray(y, dtype=float)) - np.atleast_1d(np.asarray(z, dtype=float))
    if d is not None and delta.shape != (int(d),):
        raise DomainError(f"sites must be points in R^{d}")
    return green_eval(u + v, delta)
