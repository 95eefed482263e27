"""Pure-NumPy backend for the closed-form marginal and acquisition kernels.

Mirrors the compiled extension ``salgp._kernels`` function for function.
The compiled module is preferred at import time (see ``salgp.backend``);
this module is the fallback and the reference the extension is tested
against.

All routines work on the compiled measure arrays produced by
``measures.CompiledMeasure``: per term ``t`` and dimension ``h`` the
primitive is ``kind[t, h]`` with parameters ``par1[t, h]``, ``par2[t, h]``.
The quantity computed throughout is

    integral of k(p, r) * k(r, q) d mu(r)
        = sf2^2 * sum_t coeff[t] * prod_h factor(kind, pars; p_h, q_h)

for the anisotropic squared-exponential kernel with lengthscales ``ls``
and signal variance ``sf2``.
"""
from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular
from scipy.special import erf

from .measures import DIRAC, GAUSSIAN, UNIFORM

BACKEND_NAME = "python"

# Below this (upper-lower)/lengthscale ratio the erf difference of a
# uniform component cancels catastrophically; switch to the midpoint
# expansion of the integral of exp(-t^2).
_NARROW_WIDTH = 1e-6

_SQRT_PI = np.sqrt(np.pi)


def _factor_1d(kd, p1, p2, l, p, q):
    """One-dimensional marginal factor for a single primitive component."""
    if kd == UNIFORM:
        a, b = p1, p2
        mid = 0.5 * (p + q)
        expfac = np.exp(-((q - p) ** 2) / (4.0 * l * l))
        width = (b - a) / l
        if width < _NARROW_WIDTH:
            mbar = (0.5 * (a + b) - mid) / l
            corr = 1.0 + (2.0 * mbar * mbar - 1.0) * width * width / 12.0
            return expfac * np.exp(-mbar * mbar) * corr
        ediff = erf((b - mid) / l) - erf((a - mid) / l)
        return expfac * (_SQRT_PI / 2.0) * l * ediff / (b - a)
    if kd == GAUSSIAN:
        m, s = p1, p2
        den = l * l + 2.0 * s * s
        e = (
            -l * l * (q - m) ** 2 - l * l * (p - m) ** 2 - s * s * (q - p) ** 2
        ) / (2.0 * l * l * den)
        return l * np.exp(e) / np.sqrt(den)
    if kd == DIRAC:
        z = p1
        return np.exp(-((p - z) ** 2 + (q - z) ** 2) / (2.0 * l * l))
    raise ValueError(f"unknown component kind {kd}")


def _factor_1d_grad(kd, p1, p2, l, p, q):
    """Factor and its derivative with respect to the first argument ``p``."""
    if kd == UNIFORM:
        a, b = p1, p2
        mid = 0.5 * (p + q)
        expfac = np.exp(-((q - p) ** 2) / (4.0 * l * l))
        width = (b - a) / l
        if width < _NARROW_WIDTH:
            mbar = (0.5 * (a + b) - mid) / l
            corr = 1.0 + (2.0 * mbar * mbar - 1.0) * width * width / 12.0
            f = expfac * np.exp(-mbar * mbar) * corr
            df = f * (q - p) / (2.0 * l * l) + expfac * np.exp(-mbar * mbar) * mbar / l
            return f, df
        ua = (a - mid) / l
        ub = (b - mid) / l
        ediff = erf(ub) - erf(ua)
        f = expfac * (_SQRT_PI / 2.0) * l * ediff / (b - a)
        df = f * (q - p) / (2.0 * l * l) + expfac * (
            np.exp(-ua * ua) - np.exp(-ub * ub)
        ) / (2.0 * (b - a))
        return f, df
    if kd == GAUSSIAN:
        m, s = p1, p2
        den = l * l + 2.0 * s * s
        e = (
            -l * l * (q - m) ** 2 - l * l * (p - m) ** 2 - s * s * (q - p) ** 2
        ) / (2.0 * l * l * den)
        f = l * np.exp(e) / np.sqrt(den)
        df = f * (s * s * (q - p) - l * l * (p - m)) / (l * l * den)
        return f, df
    if kd == DIRAC:
        z = p1
        f = np.exp(-((p - z) ** 2 + (q - z) ** 2) / (2.0 * l * l))
        return f, f * (z - p) / (l * l)
    raise ValueError(f"unknown component kind {kd}")


def _marginal_raw(P, Q, ls, coeff, kind, par1, par2):
    """Sum over terms of per-dimension factor products (no sf2^2 yet).

    ``P`` and ``Q`` broadcast against each other on all axes but the last,
    which indexes the dimension.
    """
    d = ls.size
    shape = np.broadcast_shapes(P.shape[:-1], Q.shape[:-1])
    out = np.zeros(shape)
    for t in range(coeff.size):
        f = np.ones(shape)
        for h in range(d):
            f = f * _factor_1d(
                kind[t, h], par1[t, h], par2[t, h], ls[h], P[..., h], Q[..., h]
            )
        out += coeff[t] * f
    return out


def _marginal_raw_grad(P, Q, ls, coeff, kind, par1, par2):
    """Like ``_marginal_raw`` plus the gradient with respect to ``P``."""
    d = ls.size
    shape = np.broadcast_shapes(P.shape[:-1], Q.shape[:-1])
    out = np.zeros(shape)
    dout = np.zeros(shape + (d,))
    for t in range(coeff.size):
        fs = []
        dfs = []
        for h in range(d):
            f, df = _factor_1d_grad(
                kind[t, h], par1[t, h], par2[t, h], ls[h], P[..., h], Q[..., h]
            )
            fs.append(np.broadcast_to(f, shape))
            dfs.append(np.broadcast_to(df, shape))
        # Leave-one-out products via prefix/suffix scans; factors may
        # underflow to zero, so never divide by them.
        prefix = np.ones(shape)
        prefixes = []
        for h in range(d):
            prefixes.append(prefix)
            prefix = prefix * fs[h]
        out += coeff[t] * prefix
        suffix = np.ones(shape)
        for h in range(d - 1, -1, -1):
            dout[..., h] += coeff[t] * prefixes[h] * dfs[h] * suffix
            suffix = suffix * fs[h]
    return out, dout


def marginal_matrix(X1, X2, ls, sf2, coeff, kind, par1, par2):
    """Matrix of pairwise kernel-product marginals, shape (n1, n2)."""
    P = X1[:, None, :]
    Q = X2[None, :, :]
    return sf2 * sf2 * _marginal_raw(P, Q, ls, coeff, kind, par1, par2)


def marginal_vector(X, xs, ls, sf2, coeff, kind, par1, par2):
    """Vector of marginals between one point ``xs`` and rows of ``X``."""
    return sf2 * sf2 * _marginal_raw(
        xs[None, :], X, ls, coeff, kind, par1, par2
    )


def marginal_vector_grad(X, xs, ls, sf2, coeff, kind, par1, par2):
    """Marginal vector and its (n, d) Jacobian with respect to ``xs``."""
    v, dv = _marginal_raw_grad(xs[None, :], X, ls, coeff, kind, par1, par2)
    return sf2 * sf2 * v, sf2 * sf2 * dv


def single_marginal(xs, ls, sf2, coeff, kind, par1, par2):
    """Marginal of the squared kernel at ``xs``."""
    return float(
        sf2 * sf2 * _marginal_raw(xs, xs, ls, coeff, kind, par1, par2)
    )


def single_marginal_grad(xs, ls, sf2, coeff, kind, par1, par2):
    """Squared-kernel marginal and gradient; both arguments move with xs."""
    w, dw = _marginal_raw_grad(xs, xs, ls, coeff, kind, par1, par2)
    # Every factor is symmetric in (p, q), so the total derivative is twice
    # the partial with respect to the first argument.
    return float(sf2 * sf2 * w), 2.0 * sf2 * sf2 * dw


def _se_vectors(cands, X, ls, sf2):
    """Kernel cross-vectors k(cands_c, X_i), shape (m, n)."""
    diff = (cands[:, None, :] - X[None, :, :]) / ls
    return sf2 * np.exp(-0.5 * np.sum(diff * diff, axis=-1))


def eval_candidates(
    L, M, X, ls, sf2, sn2, i1, i2, coeff, kind, par1, par2, cands, s_floor, chunk=256
):
    """Integrated posterior variance after conditioning on each candidate.

    Assembles, per candidate, the six-integral decomposition

        i1 - i2 - (kappa' M kappa - 2 kappa' v + w) / S

    where ``S`` is the Schur complement of the candidate in the bordered
    noisy covariance.  Candidates with ``S < s_floor`` yield NaN.
    """
    cands = np.atleast_2d(cands)
    m = cands.shape[0]
    n = X.shape[0]
    out = np.empty(m)
    for lo in range(0, m, chunk):
        sub = cands[lo : lo + chunk]
        mc = sub.shape[0]
        w = sf2 * sf2 * _marginal_raw(sub, sub, ls, coeff, kind, par1, par2)
        if n == 0:
            s = np.full(mc, sf2 + sn2)
            q = w
        else:
            ks = _se_vectors(sub, X, ls, sf2)
            cv = solve_triangular(L, ks.T, lower=True, check_finite=False)
            s = sf2 + sn2 - np.sum(cv * cv, axis=0)
            kap = solve_triangular(
                L, cv, trans="T", lower=True, check_finite=False
            )
            v = sf2 * sf2 * _marginal_raw(
                sub[:, None, :], X[None, :, :], ls, coeff, kind, par1, par2
            )
            mk = M @ kap
            q = (
                np.sum(kap * mk, axis=0)
                - 2.0 * np.einsum("cn,nc->c", v, kap)
                + w
            )
        vals = i1 - i2 - q / np.where(s > 0, s, 1.0)
        vals[s < s_floor] = np.nan
        out[lo : lo + mc] = vals
    return out


def eval_candidate_grad(
    L, M, X, ls, sf2, sn2, i1, i2, coeff, kind, par1, par2, xs, s_floor
):
    """Value and gradient of the candidate evaluation at a single point."""
    n, d = X.shape[0], ls.size
    w, dw = single_marginal_grad(xs, ls, sf2, coeff, kind, par1, par2)
    if n == 0:
        s = sf2 + sn2
        if s < s_floor:
            return np.nan, np.full(d, np.nan)
        return i1 - i2 - w / s, -dw / s
    ks = _se_vectors(xs[None, :], X, ls, sf2)[0]
    cv = solve_triangular(L, ks, lower=True, check_finite=False)
    s = sf2 + sn2 - cv @ cv
    if s < s_floor:
        return np.nan, np.full(d, np.nan)
    kap = solve_triangular(L, cv, trans="T", lower=True, check_finite=False)
    v, dv = marginal_vector_grad(X, xs, ls, sf2, coeff, kind, par1, par2)
    mk = M @ kap
    q = kap @ mk - 2.0 * (kap @ v) + w
    value = i1 - i2 - q / s
    jac = ks[:, None] * (X - xs) / (ls * ls)  # d k(xs, X_i) / d xs
    u_rhs = solve_triangular(L, mk - v, lower=True, check_finite=False)
    u = solve_triangular(L, u_rhs, trans="T", lower=True, check_finite=False)
    dq = 2.0 * (jac.T @ u) - 2.0 * (dv.T @ kap) + dw
    ds = -2.0 * (jac.T @ kap)
    grad = -(dq * s - q * ds) / (s * s)
    return float(value), grad
