"""Closed-form marginals of squared-exponential kernel products.

For a kernel ``k`` and finite measure ``mu`` this evaluates

    cross_marginal(x1, x2) = integral of k(x1, r) k(r, x2) d mu(r)

exactly, per dimension, for uniform-box, diagonal-Gaussian, and point-mass
components, with weighted sums handled by linearity.  The pairing is
dispatched on the kernel type so other kernel families can be added; any
unsupported pairing raises instead of falling back to numerics.
"""
from __future__ import annotations

import numpy as np

from .backend import kernels
from .errors import DimensionMismatchError, UnsupportedMarginalError
from .gp import SeArdKernel
from .measures import FiniteMeasure


class MarginalKernel:
    """A marginalizable (kernel, measure) pair."""

    def __init__(self, kernel, measure):
        if not isinstance(kernel, SeArdKernel):
            raise UnsupportedMarginalError(
                f"no closed-form marginal for kernel type {type(kernel).__name__}"
            )
        if not isinstance(measure, FiniteMeasure):
            raise UnsupportedMarginalError(
                f"not a finite measure: {type(measure).__name__}"
            )
        if kernel.dim != measure.dim:
            raise DimensionMismatchError(
                f"kernel dimension {kernel.dim} != measure dimension {measure.dim}"
            )
        self.kernel = kernel
        self.measure = measure
        self.compiled = measure.compiled()

    @property
    def dim(self):
        return self.kernel.dim

    def _args(self):
        c = self.compiled
        k = self.kernel
        return k.lengthscales, k.signal_variance, c.coeff, c.kind, c.par1, c.par2

    def _check(self, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if x.shape != (self.dim,):
            raise DimensionMismatchError(
                f"expected a {self.dim}-vector, got shape {x.shape}"
            )
        return x

    def cross_marginal(self, x1, x2):
        x1 = self._check(x1)
        x2 = self._check(x2)
        return float(
            kernels.marginal_matrix(x1[None, :], x2[None, :], *self._args())[0, 0]
        )

    def single_marginal(self, x1):
        return self.cross_marginal(x1, x1)

    def cross_marginal_vector(self, inputs, x):
        """Marginals between ``x`` and every row of ``inputs``, shape (n,)."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        x = self._check(x)
        if inputs.shape[0] == 0:
            return np.zeros(0)
        return kernels.marginal_vector(inputs, x, *self._args())

    def data_marginal_matrix(self, inputs):
        """Symmetric matrix of pairwise marginals over training rows."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if inputs.shape[0] == 0:
            return np.zeros((0, 0))
        if inputs.shape[1] != self.dim:
            raise DimensionMismatchError(
                f"inputs have {inputs.shape[1]} columns, expected {self.dim}"
            )
        # Entrywise identical to cross_marginal calls; the per-dimension
        # factors are symmetric expressions, so the matrix is exactly
        # symmetric without post-hoc symmetrization.
        return kernels.marginal_matrix(inputs, inputs, *self._args())
