# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled backend for the closed-form marginal and acquisition kernels.

Function-for-function mirror of ``salgp._kernels_py``; see that module
for the formulas.  Loops are fused per candidate so one acquisition
evaluation is a single pass: kernel cross-vector, two triangular solves
against the cached Cholesky factor, the marginal vector, and the
six-term assembly, all in O(n^2).
"""

import numpy as np

from libc.math cimport NAN, erf, exp, sqrt

BACKEND_NAME = "cython"

cdef double _SQRT_PI = 1.7724538509055160273
cdef double _NARROW_WIDTH = 1e-6

cdef int _UNIFORM = 0
cdef int _GAUSSIAN = 1
cdef int _DIRAC = 2


cdef inline double _factor(const signed char kd, double p1, double p2, double l,
                           double p, double q) noexcept nogil:
    cdef double a, b, mid, expfac, width, mbar, corr, den, e, z
    if kd == _UNIFORM:
        a = p1
        b = p2
        mid = 0.5 * (p + q)
        expfac = exp(-((q - p) * (q - p)) / (4.0 * l * l))
        width = (b - a) / l
        if width < _NARROW_WIDTH:
            mbar = (0.5 * (a + b) - mid) / l
            corr = 1.0 + (2.0 * mbar * mbar - 1.0) * width * width / 12.0
            return expfac * exp(-mbar * mbar) * corr
        return expfac * (_SQRT_PI / 2.0) * l * (
            erf((b - mid) / l) - erf((a - mid) / l)
        ) / (b - a)
    if kd == _GAUSSIAN:
        den = l * l + 2.0 * p2 * p2
        e = (-l * l * (q - p1) * (q - p1)
             - l * l * (p - p1) * (p - p1)
             - p2 * p2 * (q - p) * (q - p)) / (2.0 * l * l * den)
        return l * exp(e) / sqrt(den)
    z = p1  # point mass
    return exp(-((p - z) * (p - z) + (q - z) * (q - z)) / (2.0 * l * l))


cdef inline double _factor_grad(const signed char kd, double p1, double p2, double l,
                                double p, double q, double* df) noexcept nogil:
    cdef double a, b, mid, expfac, width, mbar, corr, ua, ub, ediff, f
    cdef double den, e, z
    if kd == _UNIFORM:
        a = p1
        b = p2
        mid = 0.5 * (p + q)
        expfac = exp(-((q - p) * (q - p)) / (4.0 * l * l))
        width = (b - a) / l
        if width < _NARROW_WIDTH:
            mbar = (0.5 * (a + b) - mid) / l
            corr = 1.0 + (2.0 * mbar * mbar - 1.0) * width * width / 12.0
            f = expfac * exp(-mbar * mbar) * corr
            df[0] = f * (q - p) / (2.0 * l * l) + expfac * exp(-mbar * mbar) * mbar / l
            return f
        ua = (a - mid) / l
        ub = (b - mid) / l
        ediff = erf(ub) - erf(ua)
        f = expfac * (_SQRT_PI / 2.0) * l * ediff / (b - a)
        df[0] = f * (q - p) / (2.0 * l * l) + expfac * (
            exp(-ua * ua) - exp(-ub * ub)
        ) / (2.0 * (b - a))
        return f
    if kd == _GAUSSIAN:
        den = l * l + 2.0 * p2 * p2
        e = (-l * l * (q - p1) * (q - p1)
             - l * l * (p - p1) * (p - p1)
             - p2 * p2 * (q - p) * (q - p)) / (2.0 * l * l * den)
        f = l * exp(e) / sqrt(den)
        df[0] = f * (p2 * p2 * (q - p) - l * l * (p - p1)) / (l * l * den)
        return f
    z = p1
    f = exp(-((p - z) * (p - z) + (q - z) * (q - z)) / (2.0 * l * l))
    df[0] = f * (z - p) / (l * l)
    return f


cdef inline double _marginal_point(const double[::1] ls, double sf2,
                                   const double[::1] coeff, const signed char[:, ::1] kind,
                                   const double[:, ::1] par1, const double[:, ::1] par2,
                                   const double* p, const double* q) noexcept nogil:
    cdef Py_ssize_t t, h
    cdef Py_ssize_t T = coeff.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    cdef double acc = 0.0
    cdef double prod
    for t in range(T):
        prod = 1.0
        for h in range(d):
            prod *= _factor(kind[t, h], par1[t, h], par2[t, h], ls[h], p[h], q[h])
        acc += coeff[t] * prod
    return sf2 * sf2 * acc


def marginal_matrix(const double[:, ::1] X1, const double[:, ::1] X2, const double[::1] ls,
                    double sf2, const double[::1] coeff, const signed char[:, ::1] kind,
                    const double[:, ::1] par1, const double[:, ::1] par2):
    cdef Py_ssize_t n1 = X1.shape[0]
    cdef Py_ssize_t n2 = X2.shape[0]
    out_arr = np.empty((n1, n2))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n1):
            for j in range(n2):
                out[i, j] = _marginal_point(
                    ls, sf2, coeff, kind, par1, par2, &X1[i, 0], &X2[j, 0]
                )
    return out_arr


def marginal_vector(const double[:, ::1] X, const double[::1] xs, const double[::1] ls,
                    double sf2, const double[::1] coeff, const signed char[:, ::1] kind,
                    const double[:, ::1] par1, const double[:, ::1] par2):
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    with nogil:
        for i in range(n):
            out[i] = _marginal_point(ls, sf2, coeff, kind, par1, par2, &xs[0], &X[i, 0])
    return out_arr


cdef void _marginal_vector_grad_core(const double[:, ::1] X, const double[::1] xs,
                                     const double[::1] ls, double sf2,
                                     const double[::1] coeff, const signed char[:, ::1] kind,
                                     const double[:, ::1] par1, const double[:, ::1] par2,
                                     double[::1] v, double[:, ::1] dv,
                                     double[::1] fbuf, double[::1] dbuf) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t T = coeff.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    cdef Py_ssize_t i, t, h
    cdef double prod, suffix, df, pref
    for i in range(n):
        v[i] = 0.0
        for h in range(d):
            dv[i, h] = 0.0
        for t in range(T):
            prod = 1.0
            for h in range(d):
                fbuf[h] = _factor_grad(
                    kind[t, h], par1[t, h], par2[t, h], ls[h], xs[h], X[i, h], &df
                )
                dbuf[h] = df
            # fold the prefix product into each derivative slot, keep the
            # factors for the backward suffix pass
            for h in range(d):
                pref = prod
                prod *= fbuf[h]
                dbuf[h] = dbuf[h] * pref
            v[i] += coeff[t] * prod
            suffix = 1.0
            for h in range(d - 1, -1, -1):
                dv[i, h] += coeff[t] * dbuf[h] * suffix
                suffix *= fbuf[h]
        v[i] *= sf2 * sf2
        for h in range(d):
            dv[i, h] *= sf2 * sf2


def marginal_vector_grad(const double[:, ::1] X, const double[::1] xs, const double[::1] ls,
                         double sf2, const double[::1] coeff, const signed char[:, ::1] kind,
                         const double[:, ::1] par1, const double[:, ::1] par2):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    v_arr = np.empty(n)
    dv_arr = np.empty((n, d))
    fbuf = np.empty(d)
    dbuf = np.empty(d)
    cdef double[::1] v = v_arr
    cdef double[:, ::1] dv = dv_arr
    cdef double[::1] fb = fbuf
    cdef double[::1] db = dbuf
    with nogil:
        _marginal_vector_grad_core(X, xs, ls, sf2, coeff, kind, par1, par2, v, dv, fb, db)
    return v_arr, dv_arr


def single_marginal(const double[::1] xs, const double[::1] ls, double sf2,
                    const double[::1] coeff, const signed char[:, ::1] kind,
                    const double[:, ::1] par1, const double[:, ::1] par2):
    cdef double out
    with nogil:
        out = _marginal_point(ls, sf2, coeff, kind, par1, par2, &xs[0], &xs[0])
    return out


cdef double _single_marginal_grad_core(const double[::1] xs, const double[::1] ls, double sf2,
                                       const double[::1] coeff, const signed char[:, ::1] kind,
                                       const double[:, ::1] par1, const double[:, ::1] par2,
                                       double[::1] dw, double[::1] fbuf,
                                       double[::1] dbuf) noexcept nogil:
    cdef Py_ssize_t T = coeff.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    cdef Py_ssize_t t, h
    cdef double w = 0.0
    cdef double prod, suffix, df, pref
    for h in range(d):
        dw[h] = 0.0
    for t in range(T):
        prod = 1.0
        for h in range(d):
            fbuf[h] = _factor_grad(
                kind[t, h], par1[t, h], par2[t, h], ls[h], xs[h], xs[h], &df
            )
            dbuf[h] = df
        for h in range(d):
            pref = prod
            prod *= fbuf[h]
            dbuf[h] = dbuf[h] * pref  # fold prefix into derivative slot
        w += coeff[t] * prod
        suffix = 1.0
        for h in range(d - 1, -1, -1):
            dw[h] += coeff[t] * dbuf[h] * suffix
            suffix *= fbuf[h]
    for h in range(d):
        dw[h] *= 2.0 * sf2 * sf2  # both marginal arguments move with xs
    return sf2 * sf2 * w


def single_marginal_grad(const double[::1] xs, const double[::1] ls, double sf2,
                         const double[::1] coeff, const signed char[:, ::1] kind,
                         const double[:, ::1] par1, const double[:, ::1] par2):
    cdef Py_ssize_t d = ls.shape[0]
    dw_arr = np.empty(d)
    fbuf = np.empty(d)
    dbuf = np.empty(d)
    cdef double[::1] dw = dw_arr
    cdef double[::1] fb = fbuf
    cdef double[::1] db = dbuf
    cdef double w
    with nogil:
        w = _single_marginal_grad_core(xs, ls, sf2, coeff, kind, par1, par2, dw, fb, db)
    return w, dw_arr


cdef inline void _kernel_vector(const double[:, ::1] X, const double* xs, const double[::1] ls,
                                double sf2, double[::1] out) noexcept nogil:
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    cdef Py_ssize_t i, h
    cdef double acc, z
    for i in range(n):
        acc = 0.0
        for h in range(d):
            z = (xs[h] - X[i, h]) / ls[h]
            acc += z * z
        out[i] = sf2 * exp(-0.5 * acc)


cdef inline void _forward_solve(const double[:, ::1] L, const double[::1] b,
                                double[::1] x) noexcept nogil:
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n):
        acc = b[i]
        for j in range(i):
            acc -= L[i, j] * x[j]
        x[i] = acc / L[i, i]


cdef inline void _backward_solve_t(const double[:, ::1] L, const double[::1] b,
                                   double[::1] x) noexcept nogil:
    # solves L^T x = b for lower-triangular L
    cdef Py_ssize_t n = L.shape[0]
    cdef Py_ssize_t i, j
    cdef double acc
    for i in range(n - 1, -1, -1):
        acc = b[i]
        for j in range(i + 1, n):
            acc -= L[j, i] * x[j]
        x[i] = acc / L[i, i]


def eval_candidates(const double[:, ::1] L, const double[:, ::1] M, const double[:, ::1] X,
                    const double[::1] ls, double sf2, double sn2, double i1, double i2,
                    const double[::1] coeff, const signed char[:, ::1] kind,
                    const double[:, ::1] par1, const double[:, ::1] par2,
                    const double[:, ::1] cands, double s_floor):
    cdef Py_ssize_t m = cands.shape[0]
    cdef Py_ssize_t n = X.shape[0]
    out_arr = np.empty(m)
    cdef double[::1] out = out_arr
    kstar = np.empty(n)
    cvb = np.empty(n)
    kapb = np.empty(n)
    vb = np.empty(n)
    cdef double[::1] kv = kstar
    cdef double[::1] cv = cvb
    cdef double[::1] kap = kapb
    cdef double[::1] v = vb
    cdef Py_ssize_t c, i, j
    cdef double s, w, q, mk
    with nogil:
        for c in range(m):
            w = _marginal_point(ls, sf2, coeff, kind, par1, par2,
                                &cands[c, 0], &cands[c, 0])
            if n == 0:
                s = sf2 + sn2
                q = w
            else:
                _kernel_vector(X, &cands[c, 0], ls, sf2, kv)
                _forward_solve(L, kv, cv)
                s = sf2 + sn2
                for i in range(n):
                    s -= cv[i] * cv[i]
                if s < s_floor:
                    out[c] = NAN
                    continue
                _backward_solve_t(L, cv, kap)
                for i in range(n):
                    v[i] = _marginal_point(ls, sf2, coeff, kind, par1, par2,
                                           &cands[c, 0], &X[i, 0])
                q = w
                for i in range(n):
                    mk = 0.0
                    for j in range(n):
                        mk += M[i, j] * kap[j]
                    q += kap[i] * mk - 2.0 * kap[i] * v[i]
            if s < s_floor:
                out[c] = NAN
            else:
                out[c] = i1 - i2 - q / s
    return out_arr


def eval_candidate_grad(const double[:, ::1] L, const double[:, ::1] M, const double[:, ::1] X,
                        const double[::1] ls, double sf2, double sn2, double i1,
                        double i2, const double[::1] coeff, const signed char[:, ::1] kind,
                        const double[:, ::1] par1, const double[:, ::1] par2,
                        const double[::1] xs, double s_floor):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = ls.shape[0]
    grad_arr = np.empty(d)
    cdef double[::1] grad = grad_arr
    dw_arr = np.empty(d)
    fbuf = np.empty(d)
    dbuf = np.empty(d)
    cdef double[::1] dw = dw_arr
    cdef double[::1] fb = fbuf
    cdef double[::1] db = dbuf
    cdef double w, s, q, value
    cdef Py_ssize_t i, h, j
    cdef double acc, z

    if n == 0:
        with nogil:
            w = _single_marginal_grad_core(xs, ls, sf2, coeff, kind, par1, par2, dw, fb, db)
            s = sf2 + sn2
        if s < s_floor:
            return np.nan, np.full(d, np.nan)
        for h in range(d):
            grad[h] = -dw[h] / s
        return float(i1 - i2 - w / s), grad_arr

    kstar = np.empty(n)
    cvb = np.empty(n)
    kapb = np.empty(n)
    vb = np.empty(n)
    mkb = np.empty(n)
    ub = np.empty(n)
    tmpb = np.empty(n)
    jac = np.empty((n, d))
    dv = np.empty((n, d))
    cdef double[::1] kv = kstar
    cdef double[::1] cv = cvb
    cdef double[::1] kap = kapb
    cdef double[::1] v = vb
    cdef double[::1] mk = mkb
    cdef double[::1] u = ub
    cdef double[::1] tmp = tmpb
    cdef double[:, ::1] J = jac
    cdef double[:, ::1] dV = dv
    cdef double degenerate = 0.0
    value = 0.0
    with nogil:
        w = _single_marginal_grad_core(xs, ls, sf2, coeff, kind, par1, par2, dw, fb, db)
        _kernel_vector(X, &xs[0], ls, sf2, kv)
        _forward_solve(L, kv, cv)
        s = sf2 + sn2
        for i in range(n):
            s -= cv[i] * cv[i]
        if s < s_floor:
            degenerate = 1.0
        else:
            _backward_solve_t(L, cv, kap)
            _marginal_vector_grad_core(X, xs, ls, sf2, coeff, kind, par1, par2, v, dV, fb, db)
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += M[i, j] * kap[j]
                mk[i] = acc
            q = w
            for i in range(n):
                q += kap[i] * mk[i] - 2.0 * kap[i] * v[i]
            value = i1 - i2 - q / s
            for i in range(n):
                for h in range(d):
                    J[i, h] = kv[i] * (X[i, h] - xs[h]) / (ls[h] * ls[h])
            for i in range(n):
                tmp[i] = mk[i] - v[i]
            _forward_solve(L, tmp, u)
            for i in range(n):
                tmp[i] = u[i]
            _backward_solve_t(L, tmp, u)
            for h in range(d):
                acc = 0.0
                for i in range(n):
                    acc += J[i, h] * u[i]  # dq part 1
                z = 0.0
                for i in range(n):
                    z += dV[i, h] * kap[i]
                acc = 2.0 * acc - 2.0 * z + dw[h]  # dq
                z = 0.0
                for i in range(n):
                    z += J[i, h] * kap[i]
                z = -2.0 * z  # ds
                grad[h] = -(acc * s - q * z) / (s * s)
    if degenerate:
        return np.nan, np.full(d, np.nan)
    return float(value), grad_arr
