"""Acquisition functions: entropy, integrated posterior variance (IMSPE),
and its time-aware variants.

The integrated criteria evaluate

    value(x*) = integral of k(r | x*, X) d mu(r)

via the six-integral decomposition of the bordered posterior: with
``kappa = K^-1 k(X, x*)``, Schur complement ``S`` of the candidate, data
marginal matrix ``M``, cross-marginal vector ``v`` and squared-kernel
marginal ``w``, the value assembles to

    i1 - i2 - (kappa' M kappa - 2 kappa' v + w) / S

where ``i1 = sf^2 * mass(mu)`` and ``i2 = trace(K^-1 M)`` are candidate
independent.  One Cholesky factorization is reused for every candidate, so
each evaluation costs O(n^2).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import solve_triangular

from .backend import kernels
from .errors import (
    DegenerateCandidateError,
    DimensionMismatchError,
    NotFittedError,
)
from .marginals import MarginalKernel
from .measures import FiniteMeasure, power

# Candidates whose Schur complement falls below this times sf^2 duplicate a
# noise-free training point; they are rejected, not regularized.
S_FLOOR_REL = 1e-12


@dataclass
class Entropy:
    """Maximize posterior variance.

    ``current_time`` / ``history`` give entropy the same model-input
    embedding as the integrated criteria, so both acquisitions see
    identical inputs on time-varying and lagged-input systems.
    """

    current_time: Optional[float] = None
    history: Optional[np.ndarray] = None


@dataclass
class Imspe:
    """Minimize posterior variance integrated against ``measure``."""

    measure: FiniteMeasure


@dataclass
class TimspeTimeInput:
    """Time-aware variant for models with time as the leading input.

    The candidate is the spatial part only; the model input is
    ``(current_time, candidate)`` and the integration runs against the
    product measure over time and space.
    """

    time_space_measure: FiniteMeasure
    current_time: float


@dataclass
class TimspeNx:
    """Time-aware variant for lagged-input (exogenous-dynamics) models.

    The candidate is the newest input block; ``history`` holds the
    ``lag - 1`` previous blocks appended internally.  Integration runs
    against the ``lag``-fold product of ``space_measure``.
    """

    space_measure: FiniteMeasure
    lag: int
    history: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.lag < 1:
            raise ValueError("lag must be >= 1")
        hist = np.zeros((0, self.space_measure.dim)) if self.history is None else (
            np.atleast_2d(np.asarray(self.history, dtype=float))
        )
        if hist.shape != (self.lag - 1, self.space_measure.dim):
            raise DimensionMismatchError(
                f"history must be ({self.lag - 1}, {self.space_measure.dim}), "
                f"got {hist.shape}"
            )
        self.history = hist


class AcquisitionWorkspace:
    """Per-step precomputation shared by all candidate evaluations."""

    def __init__(self, model, spec):
        if not model.is_fitted:
            raise NotFittedError("build_workspace requires a fitted model")
        self.model = model
        self.spec = spec
        d = model.dim

        if isinstance(spec, Entropy):
            self._prefix, self._suffix = _embedding_parts(
                spec.current_time, spec.history
            )
            self.marginal = None
            self.i1_term = None
            self.i2_term = None
            self.data_marginal = None
        else:
            if isinstance(spec, Imspe):
                measure = spec.measure
                self._prefix, self._suffix = _embedding_parts(None, None)
            elif isinstance(spec, TimspeTimeInput):
                measure = spec.time_space_measure
                self._prefix, self._suffix = _embedding_parts(
                    spec.current_time, None
                )
            elif isinstance(spec, TimspeNx):
                measure = power(spec.space_measure, spec.lag)
                self._prefix, self._suffix = _embedding_parts(None, spec.history)
            else:
                raise TypeError(f"unknown acquisition spec {type(spec).__name__}")
            self.marginal = MarginalKernel(model.kernel, measure)
            self.data_marginal = self.marginal.data_marginal_matrix(model.inputs)
            sf2 = model.kernel.signal_variance
            self.i1_term = sf2 * measure.mass()
            self.i2_term = self._trace_solve(self.data_marginal)

        self.candidate_dim = d - self._prefix.size - self._suffix.size
        if self.candidate_dim < 1:
            raise DimensionMismatchError("embedding leaves no free candidate input")
        self._s_floor = S_FLOOR_REL * model.kernel.signal_variance

    def _trace_solve(self, M):
        """trace(K^-1 M) through the cached Cholesky factor."""
        if self.model.n == 0:
            return 0.0
        L = self.model.chol_factor
        A = solve_triangular(L, M, lower=True, check_finite=False)
        B = solve_triangular(L, A, trans="T", lower=True, check_finite=False)
        return float(np.trace(B))

    @property
    def is_entropy(self):
        return isinstance(self.spec, Entropy)

    def embed(self, candidate):
        """Full model input for a candidate (time prefix / history suffix)."""
        candidate = np.atleast_1d(np.asarray(candidate, dtype=float))
        if candidate.shape != (self.candidate_dim,):
            raise DimensionMismatchError(
                f"candidate must be a {self.candidate_dim}-vector, "
                f"got shape {candidate.shape}"
            )
        return np.concatenate([self._prefix, candidate, self._suffix])

    def _grad_slice(self, full_grad):
        lo = self._prefix.size
        return full_grad[lo : lo + self.candidate_dim]

    def _eval_args(self):
        model = self.model
        k = model.kernel
        c = self.marginal.compiled
        return (
            model.chol_factor,
            self.data_marginal,
            model.inputs,
            k.lengthscales,
            k.signal_variance,
            k.noise_variance,
            self.i1_term,
            self.i2_term,
            c.coeff,
            c.kind,
            c.par1,
            c.par2,
        )

    def _require_marginal(self):
        if self.marginal is None:
            raise TypeError("entropy workspaces have no integrated criterion")

    def evaluate(self, candidate):
        """Integrated posterior variance after conditioning on ``candidate``.

        Lower is better.  Raises ``DegenerateCandidateError`` when the
        candidate's Schur complement falls below the floor.
        """
        self._require_marginal()
        full = self.embed(candidate)
        value = kernels.eval_candidates(
            *self._eval_args(), full[None, :], self._s_floor
        )[0]
        if np.isnan(value):
            raise DegenerateCandidateError(
                "candidate duplicates a noise-free training input"
            )
        return float(value)

    def evaluate_many(self, candidates):
        """Vectorized ``evaluate``; degenerate candidates come back NaN."""
        self._require_marginal()
        candidates = np.atleast_2d(np.asarray(candidates, dtype=float))
        full = np.hstack(
            [
                np.broadcast_to(self._prefix, (candidates.shape[0], self._prefix.size)),
                candidates,
                np.broadcast_to(self._suffix, (candidates.shape[0], self._suffix.size)),
            ]
        )
        return kernels.eval_candidates(
            *self._eval_args(), np.ascontiguousarray(full), self._s_floor
        )

    def evaluate_gradient(self, candidate):
        """Analytic gradient of ``evaluate`` with respect to the candidate."""
        self._require_marginal()
        full = self.embed(candidate)
        value, grad = kernels.eval_candidate_grad(
            *self._eval_args(), full, self._s_floor
        )
        if np.isnan(value):
            raise DegenerateCandidateError(
                "candidate duplicates a noise-free training input"
            )
        return self._grad_slice(grad)

    def evaluate_entropy(self, candidate):
        """Posterior variance at the embedded candidate (higher is better)."""
        full = self.embed(candidate)
        return self.model.posterior(full)[1]

    def entropy_gradient(self, candidate):
        full = self.embed(candidate)
        _, _, _, dvar = self.model.posterior_with_gradient(full)
        return self._grad_slice(dvar)

    def integrated_prior_variance(self):
        """``i1 - i2``: the integrated variance before any candidate."""
        self._require_marginal()
        return self.i1_term - self.i2_term

    # Uniform minimization interface for the constrained optimizer: the
    # entropy criterion is maximized, so it enters negated.

    def objective(self, candidate):
        if self.is_entropy:
            return -self.evaluate_entropy(candidate)
        try:
            return self.evaluate(candidate)
        except DegenerateCandidateError:
            return np.inf

    def objective_gradient(self, candidate):
        if self.is_entropy:
            return -self.entropy_gradient(candidate)
        try:
            return self.evaluate_gradient(candidate)
        except DegenerateCandidateError:
            return np.zeros(self.candidate_dim)


def _embedding_parts(current_time, history):
    prefix = (
        np.zeros(0) if current_time is None else np.array([float(current_time)])
    )
    if history is None:
        suffix = np.zeros(0)
    else:
        suffix = np.asarray(history, dtype=float).ravel()
    return prefix, suffix


def build_workspace(model, spec):
    """Precompute the candidate-independent pieces for a model and spec."""
    return AcquisitionWorkspace(model, spec)
