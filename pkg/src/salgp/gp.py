"""Gaussian-process regression with an anisotropic squared-exponential
kernel, constant mean, and MAP hyperparameter training.

The kernel is

    k(x, y) = sf^2 * exp(-0.5 * sum_h (x_h - y_h)^2 / ls_h^2)

with one lengthscale per input dimension, plus observation noise sn^2 on
the diagonal of the training covariance.  Hyperparameters are trained in
softplus-inverse coordinates under Gaussian priors; the mean constant is
trained jointly under its own Gaussian prior.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import DimensionMismatchError, NotFittedError, NumericalError

_LOG_2PI = np.log(2.0 * np.pi)

# Jitter escalation for near-singular training covariances (duplicated
# inputs occur naturally in lagged-input trajectories): relative to the
# signal variance, decade steps.
_JITTER_START = 1e-10
_JITTER_MAX = 1e-4


def softplus(x):
    """log(1 + exp(x)), numerically stable for large |x|."""
    return np.logaddexp(0.0, x)


def softplus_inv(y):
    """Inverse of softplus on positive reals."""
    y = np.asarray(y, dtype=float)
    out = np.where(y > 30.0, y, np.log(np.expm1(np.minimum(y, 30.0))))
    return out if out.ndim else float(out)


class SeArdKernel:
    """Squared-exponential kernel with per-dimension lengthscales.

    Parameters
    ----------
    lengthscales : array_like, positive, one entry per input dimension
    signal_std : float, positive; the kernel's value at zero lag is
        ``signal_std**2``
    noise_std : float, non-negative observation noise standard deviation
    """

    def __init__(self, lengthscales, signal_std=1.0, noise_std=0.0):
        self.lengthscales = np.atleast_1d(np.asarray(lengthscales, dtype=float)).copy()
        if self.lengthscales.ndim != 1 or np.any(self.lengthscales <= 0):
            raise ValueError("lengthscales must be positive")
        self.signal_std = float(signal_std)
        if self.signal_std <= 0:
            raise ValueError("signal_std must be positive")
        self.noise_std = float(noise_std)
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        self.lengthscales.setflags(write=False)

    @property
    def dim(self):
        return self.lengthscales.size

    @property
    def signal_variance(self):
        return self.signal_std**2

    @property
    def noise_variance(self):
        return self.noise_std**2

    def __call__(self, x1, x2):
        x1 = np.atleast_1d(np.asarray(x1, dtype=float))
        x2 = np.atleast_1d(np.asarray(x2, dtype=float))
        if x1.shape != (self.dim,) or x2.shape != (self.dim,):
            raise DimensionMismatchError(
                f"kernel expects {self.dim}-vectors, got {x1.shape} and {x2.shape}"
            )
        z = (x1 - x2) / self.lengthscales
        return float(self.signal_variance * np.exp(-0.5 * np.dot(z, z)))

    def matrix(self, X1, X2=None):
        """Gram matrix of the noise-free kernel."""
        X1 = np.atleast_2d(X1)
        X2 = X1 if X2 is None else np.atleast_2d(X2)
        diff = (X1[:, None, :] - X2[None, :, :]) / self.lengthscales
        return self.signal_variance * np.exp(-0.5 * np.sum(diff * diff, axis=-1))

    def cross_vector(self, X, x):
        """k(x, X_i) for all training rows, shape (n,)."""
        diff = (x - X) / self.lengthscales
        return self.signal_variance * np.exp(-0.5 * np.sum(diff * diff, axis=-1))

    def cross_jacobian(self, X, x, kvec):
        """Derivative of ``cross_vector`` with respect to ``x``, shape (n, d)."""
        return kvec[:, None] * (X - x) / (self.lengthscales**2)

    def replace(self, lengthscales=None, signal_std=None, noise_std=None):
        return SeArdKernel(
            self.lengthscales if lengthscales is None else lengthscales,
            self.signal_std if signal_std is None else signal_std,
            self.noise_std if noise_std is None else noise_std,
        )


@dataclass
class HyperPriors:
    """Gaussian priors on softplus-inverse hyperparameters.

    ``ls_mean``/``ls_std`` are per-dimension; ``mean_*`` is the prior on the
    raw mean constant (not softplus-transformed).
    """

    ls_mean: np.ndarray
    ls_std: np.ndarray
    sf_mean: float
    sf_std: float
    sn_mean: float
    sn_std: float
    mean_mean: float
    mean_std: float

    def __post_init__(self):
        self.ls_mean = np.atleast_1d(np.asarray(self.ls_mean, dtype=float))
        self.ls_std = np.atleast_1d(np.asarray(self.ls_std, dtype=float))
        if self.ls_mean.shape != self.ls_std.shape:
            raise DimensionMismatchError("lengthscale prior arrays must match")
        for s in (*self.ls_std, self.sf_std, self.sn_std, self.mean_std):
            if s <= 0:
                raise ValueError("prior stds must be positive")

    @property
    def dim(self):
        return self.ls_mean.size

    @classmethod
    def time_space(cls, d_space, mean_level=10.0):
        """Priors for models with a leading time input: wide temporal
        lengthscale, tight mean pinned at a conservative level."""
        return cls(
            ls_mean=np.array([5.0] + [0.0] * d_space),
            ls_std=np.ones(1 + d_space),
            sf_mean=1.0,
            sf_std=1.0,
            sn_mean=-3.0,
            sn_std=1.0,
            mean_mean=mean_level,
            mean_std=0.01,
        )

    @classmethod
    def lagged_inputs(cls, dim, mean_level):
        """Priors for lagged-input models on unit-scaled coordinates."""
        return cls(
            ls_mean=np.full(dim, 0.5),
            ls_std=np.full(dim, 0.1),
            sf_mean=0.5,
            sf_std=0.1,
            sn_mean=-3.0,
            sn_std=0.1,
            mean_mean=mean_level,
            mean_std=0.01,
        )

    def initial_kernel(self):
        """Kernel whose hyperparameters sit at the prior means."""
        return SeArdKernel(
            lengthscales=softplus(self.ls_mean),
            signal_std=softplus(self.sf_mean),
            noise_std=softplus(self.sn_mean),
        )


class GpModel:
    """GP regression model with cached Cholesky factor.

    After ``fit_cholesky`` the model is read-only thread-safe; mutation
    (``add_observation``, ``train_map``) requires exclusive access.
    """

    def __init__(self, kernel, mean_constant=0.0, inputs=None, targets=None):
        self.kernel = kernel
        self.mean_constant = float(mean_constant)
        d = kernel.dim
        self.inputs = (
            np.zeros((0, d)) if inputs is None else np.atleast_2d(np.asarray(inputs, dtype=float)).copy()
        )
        self.targets = (
            np.zeros(0) if targets is None else np.atleast_1d(np.asarray(targets, dtype=float)).copy()
        )
        if self.inputs.shape[1] != d:
            raise DimensionMismatchError(
                f"inputs have {self.inputs.shape[1]} columns, kernel expects {d}"
            )
        if self.targets.shape[0] != self.inputs.shape[0]:
            raise DimensionMismatchError("inputs and targets disagree on n")
        self.chol_factor = None
        self.jitter = 0.0
        self._alpha = None

    @property
    def n(self):
        return self.inputs.shape[0]

    @property
    def dim(self):
        return self.kernel.dim

    @property
    def is_fitted(self):
        return self.chol_factor is not None

    def copy(self):
        out = GpModel(self.kernel, self.mean_constant, self.inputs, self.targets)
        if self.is_fitted:
            out.chol_factor = self.chol_factor
            out.jitter = self.jitter
            out._alpha = self._alpha
        return out

    def fit_cholesky(self):
        """Factor the noisy training covariance; deterministic.

        Tries without jitter first, then escalates decade by decade up to
        ``1e-4 * sf^2``; raises ``NumericalError`` naming the final jitter
        if even that fails.
        """
        n = self.n
        if n == 0:
            self.chol_factor = np.zeros((0, 0))
            self._alpha = np.zeros(0)
            self.jitter = 0.0
            return self
        K = self.kernel.matrix(self.inputs)
        K[np.diag_indices_from(K)] += self.kernel.noise_variance
        if not np.all(np.isfinite(K)):
            raise NumericalError("training covariance contains non-finite entries")
        sf2 = self.kernel.signal_variance
        jitter = 0.0
        while True:
            try:
                self.chol_factor = np.linalg.cholesky(
                    K + jitter * np.eye(n) if jitter else K
                )
                break
            except np.linalg.LinAlgError:
                if jitter == 0.0:
                    jitter = _JITTER_START * sf2
                elif jitter >= _JITTER_MAX * sf2:
                    raise NumericalError(
                        f"Cholesky failed at final jitter {jitter:.3e}"
                    ) from None
                else:
                    jitter *= 10.0
        self.jitter = jitter
        resid = self.targets - self.mean_constant
        z = solve_triangular(self.chol_factor, resid, lower=True, check_finite=False)
        self._alpha = solve_triangular(
            self.chol_factor, z, trans="T", lower=True, check_finite=False
        )
        return self

    def _require_fit(self):
        if not self.is_fitted:
            raise NotFittedError("call fit_cholesky() first")

    def _check_query(self, query):
        query = np.atleast_1d(np.asarray(query, dtype=float))
        if query.shape != (self.dim,):
            raise DimensionMismatchError(
                f"query must be a {self.dim}-vector, got shape {query.shape}"
            )
        return query

    def posterior(self, query):
        """Posterior mean and latent (noise-free) variance at one point."""
        self._require_fit()
        query = self._check_query(query)
        sf2 = self.kernel.signal_variance
        if self.n == 0:
            return self.mean_constant, sf2
        kvec = self.kernel.cross_vector(self.inputs, query)
        cv = solve_triangular(self.chol_factor, kvec, lower=True, check_finite=False)
        return (
            float(self.mean_constant + kvec @ self._alpha),
            float(sf2 - cv @ cv),
        )

    def posterior_batch(self, queries):
        """Vectorized ``posterior`` over rows of ``queries``."""
        self._require_fit()
        queries = np.atleast_2d(np.asarray(queries, dtype=float))
        sf2 = self.kernel.signal_variance
        m = queries.shape[0]
        if self.n == 0:
            return np.full(m, self.mean_constant), np.full(m, sf2)
        ks = self.kernel.matrix(queries, self.inputs)
        cv = solve_triangular(self.chol_factor, ks.T, lower=True, check_finite=False)
        means = self.mean_constant + ks @ self._alpha
        variances = sf2 - np.sum(cv * cv, axis=0)
        return means, variances

    def posterior_with_gradient(self, query):
        """Mean, variance, and their gradients with respect to the query."""
        self._require_fit()
        query = self._check_query(query)
        sf2 = self.kernel.signal_variance
        d = self.dim
        if self.n == 0:
            return self.mean_constant, sf2, np.zeros(d), np.zeros(d)
        kvec = self.kernel.cross_vector(self.inputs, query)
        L = self.chol_factor
        cv = solve_triangular(L, kvec, lower=True, check_finite=False)
        kappa = solve_triangular(L, cv, trans="T", lower=True, check_finite=False)
        jac = self.kernel.cross_jacobian(self.inputs, query, kvec)
        mean = float(self.mean_constant + kvec @ self._alpha)
        var = float(sf2 - cv @ cv)
        dmean = jac.T @ self._alpha
        dvar = -2.0 * (jac.T @ kappa)
        return mean, var, dmean, dvar

    def add_observation(self, x, y):
        """Append a data point; invalidates the factorization."""
        x = self._check_query(x)
        self.inputs = np.vstack([self.inputs, x[None, :]])
        self.targets = np.append(self.targets, float(y))
        self.chol_factor = None
        self._alpha = None
        return self

    def with_observation(self, x, y):
        """Fitted copy with one extra observation (original untouched)."""
        out = GpModel(self.kernel, self.mean_constant, self.inputs, self.targets)
        out.add_observation(x, y)
        return out.fit_cholesky()

    # -- MAP hyperparameter training ------------------------------------

    def _get_theta(self):
        k = self.kernel
        noise = max(k.noise_std, 1e-8)  # softplus coordinates need > 0
        return np.concatenate(
            [
                softplus_inv(k.lengthscales),
                [softplus_inv(k.signal_std)],
                [softplus_inv(noise)],
                [self.mean_constant],
            ]
        )

    def _set_theta(self, theta):
        d = self.dim
        self.kernel = SeArdKernel(
            lengthscales=softplus(theta[:d]),
            signal_std=float(softplus(theta[d])),
            noise_std=float(softplus(theta[d + 1])),
        )
        self.mean_constant = float(theta[d + 2])

    def neg_log_posterior(self, priors, theta=None):
        """Negative log posterior and gradient in softplus-inverse coords.

        Returns ``(value, grad)``; on factorization failure the value is
        ``inf`` with a zero gradient so that line searches back off.
        """
        if self.n == 0:
            raise NotFittedError("training requires at least one data point")
        if theta is None:
            theta = self._get_theta()
        d = self.dim
        ls = softplus(theta[:d])
        sf = float(softplus(theta[d]))
        sn = float(softplus(theta[d + 1]))
        m = float(theta[d + 2])
        n = self.n
        X, y = self.inputs, self.targets

        diff = (X[:, None, :] - X[None, :, :]) / ls
        sq = np.sum(diff * diff, axis=-1)
        E = np.exp(-0.5 * sq)
        K = sf * sf * E
        K[np.diag_indices_from(K)] += sn * sn + _JITTER_START * sf * sf
        if not np.all(np.isfinite(K)):
            return np.inf, np.zeros_like(theta)
        try:
            L = np.linalg.cholesky(K)
        except np.linalg.LinAlgError:
            return np.inf, np.zeros_like(theta)
        resid = y - m
        z = solve_triangular(L, resid, lower=True, check_finite=False)
        alpha = solve_triangular(L, z, trans="T", lower=True, check_finite=False)
        nll = 0.5 * resid @ alpha + np.sum(np.log(np.diag(L))) + 0.5 * n * _LOG_2PI

        Linv = solve_triangular(L, np.eye(n), lower=True, check_finite=False)
        Kinv = Linv.T @ Linv
        W = Kinv - np.outer(alpha, alpha)  # d nll / d K = W / 2

        grad = np.empty_like(theta)
        Kse = sf * sf * E
        WK = W * Kse
        with np.errstate(all="ignore"):
            for h in range(d):
                Dh = (X[:, None, h] - X[None, :, h]) ** 2
                grad[h] = 0.5 * np.sum(WK * Dh) / ls[h] ** 3
            grad[d] = np.sum(WK) / sf
            grad[d + 1] = sn * np.trace(W)
            grad[d + 2] = -np.sum(alpha)
        if not (np.isfinite(nll) and np.all(np.isfinite(grad))):
            return np.inf, np.zeros_like(theta)

        # chain rule into softplus-inverse coordinates
        sig = 1.0 / (1.0 + np.exp(-theta[: d + 2]))
        grad[: d + 2] *= sig

        # Gaussian priors (negative log, constants dropped)
        pm = np.concatenate(
            [priors.ls_mean, [priors.sf_mean], [priors.sn_mean], [priors.mean_mean]]
        )
        ps = np.concatenate(
            [priors.ls_std, [priors.sf_std], [priors.sn_std], [priors.mean_std]]
        )
        nll += float(np.sum((theta - pm) ** 2 / (2.0 * ps**2)))
        grad += (theta - pm) / ps**2
        return float(nll), grad

    def train_map(self, priors, steps=30, initial=False):
        """MAP-train hyperparameters and mean constant.

        ``initial=True`` runs a monotone gradient descent with backtracking
        line search for up to ``steps`` iterations.  ``initial=False`` runs
        exactly ``steps`` fixed-rate first-order updates with per-parameter
        adaptive scaling, returning the best iterate seen so the objective
        never increases over the run.
        """
        if self.n == 0:
            raise NotFittedError("training requires at least one data point")
        if priors.dim != self.dim:
            raise DimensionMismatchError("priors dimensionality mismatch")
        if steps == 0:
            return self if self.is_fitted else self.fit_cholesky()
        theta = self._get_theta()
        value, grad = self.neg_log_posterior(priors, theta)
        if not np.isfinite(value):
            raise NumericalError("non-finite training objective at start")
        if initial:
            theta, value = self._descend(priors, theta, value, grad, steps)
        else:
            theta, value = self._adaptive_steps(priors, theta, value, grad, steps)
        self._set_theta(theta)
        return self.fit_cholesky()

    def _descend(self, priors, theta, value, grad, max_iter):
        step = 1.0
        for _ in range(max_iter):
            gnorm = np.max(np.abs(grad))
            if gnorm < 1e-8:
                break
            improved = False
            for _ in range(40):
                cand = theta - step * grad
                cv, cg = self.neg_log_posterior(priors, cand)
                if cv <= value - 1e-4 * step * np.dot(grad, grad):
                    theta, value, grad = cand, cv, cg
                    improved = True
                    step *= 2.0
                    break
                step *= 0.5
            if not improved or step * gnorm < 1e-12:
                break
        return theta, value

    def _adaptive_steps(self, priors, theta, value, grad, steps, lr=0.05):
        best_theta, best_value = theta.copy(), value
        m1 = np.zeros_like(theta)
        m2 = np.zeros_like(theta)
        b1, b2, eps = 0.9, 0.999, 1e-8
        for t in range(1, steps + 1):
            m1 = b1 * m1 + (1 - b1) * grad
            m2 = b2 * m2 + (1 - b2) * grad * grad
            mhat = m1 / (1 - b1**t)
            vhat = m2 / (1 - b2**t)
            theta = theta - lr * mhat / (np.sqrt(vhat) + eps)
            value, grad = self.neg_log_posterior(priors, theta)
            if value < best_value:
                best_theta, best_value = theta.copy(), value
        return best_theta, best_value
