"""Finite measures weighting the posterior-variance integrals.

A measure is one of: a scaled uniform distribution on a box, a scaled
diagonal Gaussian, a point mass, a weighted sum of measures (negative
coefficients allowed), or a product of independent blocks.  Every measure
compiles to a flat sum-of-products form (a list of terms, each a
coefficient times one primitive 1-d component per dimension), which is
what the closed-form marginal kernels consume.
"""
from __future__ import annotations

import itertools

import numpy as np

from .errors import DimensionMismatchError, UnsupportedMarginalError

# Primitive component tags shared with the numeric backends.
UNIFORM = 0
GAUSSIAN = 1
DIRAC = 2


class CompiledMeasure:
    """Flat sum-of-products representation of a finite measure.

    Attributes
    ----------
    dim : int
    coeff : (T,) float64, term coefficients (scales and sum weights folded in)
    kind : (T, d) int8, per-dimension primitive tag
    par1, par2 : (T, d) float64, primitive parameters
        uniform: (lower, upper); gaussian: (mean, std); dirac: (atom, 0).
    mass : float
    """

    __slots__ = ("dim", "coeff", "kind", "par1", "par2", "mass")

    def __init__(self, dim, coeff, kind, par1, par2, mass):
        self.dim = dim
        self.coeff = np.ascontiguousarray(coeff, dtype=np.float64)
        self.kind = np.ascontiguousarray(kind, dtype=np.int8)
        self.par1 = np.ascontiguousarray(par1, dtype=np.float64)
        self.par2 = np.ascontiguousarray(par2, dtype=np.float64)
        self.mass = float(mass)


class FiniteMeasure:
    """Base class for finite measures on R^d."""

    dim = None  # overridden

    def mass(self):
        raise NotImplementedError

    def _terms(self):
        """Yield (coefficient, [component, ...]) with one component per dim."""
        raise NotImplementedError

    def compiled(self):
        terms = list(self._terms())
        ncomp = len(terms)
        coeff = np.empty(ncomp)
        kind = np.empty((ncomp, self.dim), dtype=np.int8)
        par1 = np.empty((ncomp, self.dim))
        par2 = np.empty((ncomp, self.dim))
        for t, (c, comps) in enumerate(terms):
            coeff[t] = c
            for h, (kd, p1, p2) in enumerate(comps):
                kind[t, h] = kd
                par1[t, h] = p1
                par2[t, h] = p2
        return CompiledMeasure(self.dim, coeff, kind, par1, par2, self.mass())


class UniformBox(FiniteMeasure):
    """``scale`` times the uniform probability distribution on a box."""

    def __init__(self, lower, upper, scale=1.0):
        self.lower = np.atleast_1d(np.asarray(lower, dtype=float)).copy()
        self.upper = np.atleast_1d(np.asarray(upper, dtype=float)).copy()
        if self.lower.shape != self.upper.shape or self.lower.ndim != 1:
            raise DimensionMismatchError("bounds must be 1-d and equal length")
        if np.any(self.lower >= self.upper):
            raise ValueError("UniformBox requires lower < upper componentwise")
        self.scale = float(scale)
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self.dim = self.lower.size
        self.lower.setflags(write=False)
        self.upper.setflags(write=False)

    def mass(self):
        return self.scale

    def _terms(self):
        comps = [
            (UNIFORM, self.lower[h], self.upper[h]) for h in range(self.dim)
        ]
        yield self.scale, comps


class DiagGaussian(FiniteMeasure):
    """``scale`` times a Gaussian with diagonal covariance diag(stds^2)."""

    def __init__(self, mean, stds, scale=1.0):
        self.mean = np.atleast_1d(np.asarray(mean, dtype=float)).copy()
        self.stds = np.atleast_1d(np.asarray(stds, dtype=float)).copy()
        if self.mean.shape != self.stds.shape or self.mean.ndim != 1:
            raise DimensionMismatchError("mean and stds must be 1-d and equal length")
        if np.any(self.stds <= 0):
            raise ValueError("stds must be positive")
        self.scale = float(scale)
        if self.scale <= 0:
            raise ValueError("scale must be positive")
        self.dim = self.mean.size
        self.mean.setflags(write=False)
        self.stds.setflags(write=False)

    def mass(self):
        return self.scale

    def _terms(self):
        comps = [(GAUSSIAN, self.mean[h], self.stds[h]) for h in range(self.dim)]
        yield self.scale, comps


class DiracPoint(FiniteMeasure):
    """Point mass of weight ``scale`` at ``point``.

    Discrete time windows compile to sums of these; the closed forms need
    plain kernel products at atoms, not erf differences.
    """

    def __init__(self, point, scale=1.0):
        self.point = np.atleast_1d(np.asarray(point, dtype=float)).copy()
        if self.point.ndim != 1:
            raise DimensionMismatchError("point must be 1-d")
        self.scale = float(scale)
        self.dim = self.point.size
        self.point.setflags(write=False)

    def mass(self):
        return self.scale

    def _terms(self):
        comps = [(DIRAC, self.point[h], 0.0) for h in range(self.dim)]
        yield self.scale, comps


class WeightedSum(FiniteMeasure):
    """Linear combination of measures; coefficients may be negative."""

    def __init__(self, parts):
        parts = [(float(c), m) for c, m in parts]
        if not parts:
            raise ValueError("WeightedSum needs at least one part")
        dims = {m.dim for _, m in parts}
        if len(dims) != 1:
            raise DimensionMismatchError("WeightedSum parts must share dimension")
        self.parts = parts
        self.dim = dims.pop()

    def mass(self):
        return sum(c * m.mass() for c, m in self.parts)

    def _terms(self):
        for c, m in self.parts:
            for sub_c, comps in m._terms():
                yield c * sub_c, comps


class ProductMeasure(FiniteMeasure):
    """Product of independent measure blocks on consecutive coordinates."""

    def __init__(self, parts):
        parts = list(parts)
        if not parts:
            raise ValueError("ProductMeasure needs at least one part")
        for p in parts:
            if not isinstance(p, FiniteMeasure):
                raise UnsupportedMarginalError(f"not a measure: {p!r}")
        self.parts = parts
        self.dim = sum(p.dim for p in parts)

    @property
    def time_part(self):
        return self.parts[0]

    @property
    def space_part(self):
        if len(self.parts) != 2:
            raise ValueError("space_part is defined for two-block products")
        return self.parts[1]

    def mass(self):
        out = 1.0
        for p in self.parts:
            out *= p.mass()
        return out

    def _terms(self):
        for combo in itertools.product(*(list(p._terms()) for p in self.parts)):
            c = 1.0
            comps = []
            for sub_c, sub_comps in combo:
                c *= sub_c
                comps.extend(sub_comps)
            yield c, comps


def mass(mu):
    """Total mass of a finite measure (linear in WeightedSum coefficients)."""
    return mu.mass()


def product_time_space(time, space):
    """Product measure of a 1-d time measure with a spatial measure."""
    if time.dim != 1:
        raise DimensionMismatchError("time part must be one-dimensional")
    return ProductMeasure([time, space])


def indicator_box(lower, upper):
    """Lebesgue measure restricted to a box (density one, mass = volume)."""
    lower = np.atleast_1d(np.asarray(lower, dtype=float))
    upper = np.atleast_1d(np.asarray(upper, dtype=float))
    return UniformBox(lower, upper, scale=float(np.prod(upper - lower)))


def discrete_time_window(start, steps):
    """Unit atoms at ``start, start+1, ..., start+steps``.

    ``steps == 0`` is the point mass at ``start``.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    atoms = [DiracPoint([start + i]) for i in range(steps + 1)]
    if len(atoms) == 1:
        return atoms[0]
    return WeightedSum([(1.0, a) for a in atoms])


def power(measure, exponent):
    """``exponent``-fold product of a measure with itself."""
    if exponent < 1:
        raise ValueError("exponent must be >= 1")
    if exponent == 1:
        return measure
    return ProductMeasure([measure] * exponent)
