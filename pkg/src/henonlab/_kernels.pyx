# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot loops in _kernels_py."""
import numpy as np
from libc.math cimport log, exp, fabs

cdef int CONVERGED = 0
cdef int CLASSIFIED_ZERO = 1
cdef int BUDGET_EXHAUSTED = 2
cdef double BIG = 1e30


cdef inline double _abs2(double complex z) noexcept nogil:
    return z.real * z.real + z.imag * z.imag


cdef inline double complex _poly(const double complex* c, Py_ssize_t lo, Py_ssize_t hi,
                                 double complex x) noexcept nogil:
    cdef double complex acc = c[hi - 1]
    cdef Py_ssize_t k
    for k in range(hi - 2, lo - 1, -1):
        acc = acc * x + c[k]
    return acc


cdef inline double complex _dpoly(const double complex* c, Py_ssize_t lo, Py_ssize_t hi,
                                  double complex x) noexcept nogil:
    cdef Py_ssize_t deg = hi - lo - 1
    cdef double complex acc = deg * c[hi - 1]
    cdef Py_ssize_t k
    for k in range(deg - 1, 0, -1):
        acc = acc * x + k * c[lo + k]
    return acc


def escape(coeffs, offsets, degs, avals, order, tails, xs, ys, double R, int max_iter,
           double tol, bint backward, double closure=0.0):
    cdef const double complex[:] c = np.ascontiguousarray(coeffs, dtype=complex)
    cdef const long long[:] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double complex[:] av = np.ascontiguousarray(avals, dtype=complex)
    cdef const long long[:] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef const double[:] tl = np.ascontiguousarray(tails, dtype=float)
    cdef const double complex[:] x0 = np.ascontiguousarray(xs, dtype=complex)
    cdef const double complex[:] y0 = np.ascontiguousarray(ys, dtype=complex)
    cdef Py_ssize_t npts = x0.shape[0], m = od.shape[0]
    cdef const double[:] logd = np.log(np.asarray(degs, dtype=float))
    out_v = np.zeros(npts)
    out_i = np.zeros(npts, dtype=np.int64)
    out_s = np.zeros(npts, dtype=np.int64)
    cdef double[:] value = out_v
    cdef long long[:] iters = out_i
    cdef long long[:] status = out_s
    cdef Py_ssize_t k, j, i, lo, hi
    cdef int it, st
    cdef double complex x, y, xn, a
    cdef double ld, dom, sub, est, prev, val, scale, R2 = R * R, BIG2 = BIG * BIG, cl2
    cdef bint esc, done, have_prev
    with nogil:
        for k in range(npts):
            x = x0[k]
            y = y0[k]
            ld = 0.0
            esc = False
            done = False
            have_prev = False
            prev = 0.0
            st = CLASSIFIED_ZERO
            val = 0.0
            iters[k] = max_iter
            scale = max(1.0, max(_abs2(x), _abs2(y)))
            cl2 = closure * closure * scale
            for it in range(max_iter):
                for j in range(m):
                    i = od[j]
                    lo = off[i]
                    hi = off[i + 1]
                    a = av[i]
                    ld += logd[i]
                    if backward:
                        xn = y / a
                        y = (x - _poly(&c[0], lo, hi, xn)) / a
                        x = xn
                        dom = _abs2(y)
                        sub = _abs2(x)
                    else:
                        xn = _poly(&c[0], lo, hi, x) + a * y
                        y = a * x
                        x = xn
                        dom = _abs2(x)
                        sub = _abs2(y)
                    if not esc and dom >= sub and dom > R2:
                        esc = True
                    if esc and dom > BIG2:
                        val = exp(-ld) * (0.5 * log(dom) + tl[(j + 1) % m])
                        st = CONVERGED
                        iters[k] = it + 1
                        done = True
                        break
                if done:
                    break
                if not esc and closure > 0 and max(_abs2(x - x0[k]), _abs2(y - y0[k])) <= cl2:
                    # the orbit closed up: a periodic point, hence bounded
                    iters[k] = it + 1
                    break
                if esc:
                    dom = _abs2(y) if backward else _abs2(x)
                    est = exp(-ld) * (0.5 * log(dom) + tl[0])
                    if have_prev and fabs(est - prev) < tol:
                        val = est
                        st = CONVERGED
                        iters[k] = it + 1
                        done = True
                        break
                    prev = est
                    have_prev = True
            if not done and esc:
                st = BUDGET_EXHAUSTED
                val = prev if have_prev else 0.0
            if st == CLASSIFIED_ZERO:
                val = 0.0
            elif val <= 0.0:
                val = 2.2250738585072014e-308
            value[k] = val
            status[k] = st
    return out_v, out_i, out_s


def orbit_jacobian(coeffs, offsets, degs, avals, xs, ys, int n):
    cdef const double complex[:] c = np.ascontiguousarray(coeffs, dtype=complex)
    cdef const long long[:] off = np.ascontiguousarray(offsets, dtype=np.int64)
    cdef const double complex[:] av = np.ascontiguousarray(avals, dtype=complex)
    cdef const double complex[:] x0 = np.ascontiguousarray(xs, dtype=complex)
    cdef const double complex[:] y0 = np.ascontiguousarray(ys, dtype=complex)
    cdef Py_ssize_t npts = x0.shape[0], m = av.shape[0]
    X = np.empty(npts, dtype=complex)
    Y = np.empty(npts, dtype=complex)
    Jout = np.empty((npts, 2, 2), dtype=complex)
    cdef double complex[:] Xv = X
    cdef double complex[:] Yv = Y
    cdef double complex[:, :, :] Jv = Jout
    cdef Py_ssize_t k, i
    cdef int it
    cdef double complex x, y, a, dp, j00, j01, j10, j11, t00, t01
    with nogil:
        for k in range(npts):
            x = x0[k]
            y = y0[k]
            j00 = 1
            j01 = 0
            j10 = 0
            j11 = 1
            for it in range(n):
                for i in range(m):
                    a = av[i]
                    dp = _dpoly(&c[0], off[i], off[i + 1], x)
                    t00 = dp * j00 + a * j10
                    t01 = dp * j01 + a * j11
                    j10 = a * j00
                    j11 = a * j01
                    j00 = t00
                    j01 = t01
                    dp = _poly(&c[0], off[i], off[i + 1], x) + a * y
                    y = a * x
                    x = dp
            Xv[k] = x
            Yv[k] = y
            Jv[k, 0, 0] = j00
            Jv[k, 0, 1] = j01
            Jv[k, 1, 0] = j10
            Jv[k, 1, 1] = j11
    return X, Y, Jout


def series_eval(c0, c1, zeta):
    cdef const double complex[:] a = np.ascontiguousarray(c0, dtype=complex)
    cdef const double complex[:] b = np.ascontiguousarray(c1, dtype=complex)
    cdef const double complex[:] z = np.ascontiguousarray(zeta, dtype=complex)
    cdef Py_ssize_t n = z.shape[0], M = a.shape[0] - 1, i, k
    Z0 = np.empty(n, dtype=complex)
    Z1 = np.empty(n, dtype=complex)
    D0 = np.empty(n, dtype=complex)
    D1 = np.empty(n, dtype=complex)
    cdef double complex[:] z0v = Z0
    cdef double complex[:] z1v = Z1
    cdef double complex[:] d0v = D0
    cdef double complex[:] d1v = D1
    cdef double complex w, s0, s1, t0, t1
    with nogil:
        for i in range(n):
            w = z[i]
            s0 = a[M]
            s1 = b[M]
            t0 = 0
            t1 = 0
            for k in range(M - 1, -1, -1):
                t0 = t0 * w + s0
                t1 = t1 * w + s1
                s0 = s0 * w + a[k]
                s1 = s1 * w + b[k]
            z0v[i] = s0
            z1v[i] = s1
            d0v[i] = t0
            d1v[i] = t1
    return Z0, Z1, D0, D1
