"""Axis-aligned boxes used for domains and safe regions."""
from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError


class Box:
    """Axis-aligned box ``[lower_1, upper_1] x ... x [lower_d, upper_d]``."""

    def __init__(self, lower, upper):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DimensionMismatchError("box bounds must be 1-d and equal length")
        if np.any(self.lower >= self.upper):
            raise ValueError("box requires lower < upper in every dimension")
        self.lower.setflags(write=False)
        self.upper.setflags(write=False)

    @property
    def dim(self):
        return self.lower.size

    @property
    def center(self):
        return 0.5 * (self.lower + self.upper)

    @property
    def widths(self):
        return self.upper - self.lower

    def volume(self):
        return float(np.prod(self.widths))

    def contains(self, x, slack=0.0):
        x = np.asarray(x, dtype=float)
        return bool(np.all(x >= self.lower - slack) and np.all(x <= self.upper + slack))

    def contains_box(self, other):
        return bool(
            np.all(other.lower >= self.lower) and np.all(other.upper <= self.upper)
        )

    def clip(self, x):
        return np.clip(np.asarray(x, dtype=float), self.lower, self.upper)

    def sample(self, rng, n=None):
        size = (self.dim,) if n is None else (n, self.dim)
        return self.lower + self.widths * rng.random(size)

    def scaled(self, factors):
        """Return this box with every coordinate divided by ``factors``."""
        factors = np.asarray(factors, dtype=float)
        return Box(self.lower / factors, self.upper / factors)

    def __repr__(self):
        return f"Box({self.lower.tolist()}, {self.upper.tolist()})"
