"""Pure numpy versions of the hot loops; same signatures as the compiled ones."""
import numpy as np

CONVERGED, CLASSIFIED_ZERO, BUDGET_EXHAUSTED = 0, 1, 2
BIG = 1e30


def _poly(coeffs, lo, hi, x):
    acc = np.full_like(x, coeffs[hi - 1])
    for k in range(hi - 2, lo - 1, -1):
        acc = acc * x + coeffs[k]
    return acc


def _dpoly(coeffs, lo, hi, x):
    deg = hi - lo - 1
    acc = np.full_like(x, deg * coeffs[hi - 1])
    for k in range(deg - 1, 0, -1):
        acc = acc * x + k * coeffs[lo + k]
    return acc


def escape(coeffs, offsets, degs, avals, order, tails, xs, ys, R, max_iter, tol, backward,
           closure=0.0):
    """Escape-rate iteration for a batch of points.

    ``order`` lists factor indices in application order and ``tails[j]`` is
    the asymptotic constant added to log|dominant coordinate| before the
    next application of ``order[j]``.  A point whose orbit returns within
    ``closure`` (relative) of its start before escaping is periodic and is
    classified zero.  Returns (value, iterations, status).
    """
    x = np.array(xs, dtype=complex)
    y = np.array(ys, dtype=complex)
    npts = x.shape[0]
    m = len(order)
    value = np.zeros(npts)
    iters = np.full(npts, max_iter, dtype=np.int64)
    status = np.full(npts, CLASSIFIED_ZERO, dtype=np.int64)
    escaped = np.zeros(npts, dtype=bool)
    active = np.ones(npts, dtype=bool)
    prev = np.full(npts, np.nan)
    logdcum = np.zeros(npts)
    x0, y0 = x.copy(), y.copy()
    scale = np.maximum(1.0, np.maximum(np.abs(x), np.abs(y)))
    with np.errstate(over="ignore", invalid="ignore", divide="ignore"):
        for it in range(max_iter):
            if not active.any():
                break
            idx = np.nonzero(active)[0]
            xa, ya = x[idx], y[idx]
            esc = escaped[idx]
            ld = logdcum[idx]
            done = np.zeros(idx.size, dtype=bool)
            for j in range(m):
                i = order[j]
                lo, hi, a = offsets[i], offsets[i + 1], avals[i]
                ld = ld + np.log(float(degs[i]))
                if backward:
                    xn = ya / a
                    ya = (xa - _poly(coeffs, lo, hi, xn)) / a
                    xa = xn
                    dom, sub = np.abs(ya), np.abs(xa)
                else:
                    xa, ya = _poly(coeffs, lo, hi, xa) + a * ya, a * xa
                    dom, sub = np.abs(xa), np.abs(ya)
                newly = (~esc) & (dom >= sub) & (dom > R)
                esc = esc | newly
                big = esc & (dom > BIG) & ~done
                if big.any():
                    jn = (j + 1) % m
                    est = np.exp(-ld[big]) * (np.log(dom[big]) + tails[jn])
                    gi = idx[big]
                    value[gi] = est
                    status[gi] = CONVERGED
                    iters[gi] = it + 1
                    done |= big
            dom = np.abs(ya) if backward else np.abs(xa)
            est = np.exp(-ld) * (np.log(dom) + tails[0])
            p = prev[idx]
            if closure > 0:
                back = np.maximum(np.abs(xa - x0[idx]), np.abs(ya - y0[idx]))
                closed = ~esc & ~done & (back <= closure * scale[idx])
                iters[idx[closed]] = it + 1
                done |= closed
            conv = esc & ~done & (np.abs(est - p) < tol)
            gi = idx[conv]
            value[gi] = est[conv]
            status[gi] = CONVERGED
            iters[gi] = it + 1
            done |= conv
            x[idx], y[idx] = xa, ya
            escaped[idx] = esc
            logdcum[idx] = ld
            prev[idx] = np.where(esc, est, np.nan)
            active[idx[done]] = False
        left = active & escaped
        status[left] = BUDGET_EXHAUSTED
        value[left] = np.where(np.isfinite(prev[left]), prev[left], 0.0)
    value[status == CLASSIFIED_ZERO] = 0.0
    pos = (status != CLASSIFIED_ZERO) & (value <= 0)
    value[pos] = np.finfo(float).tiny
    return value, iters, status


def orbit_jacobian(coeffs, offsets, degs, avals, xs, ys, n):
    """f^n and Df^n for a batch; returns (X, Y, J) with J of shape (N, 2, 2)."""
    x = np.array(xs, dtype=complex)
    y = np.array(ys, dtype=complex)
    npts = x.shape[0]
    J = np.zeros((npts, 2, 2), dtype=complex)
    J[:, 0, 0] = 1
    J[:, 1, 1] = 1
    m = len(degs)
    with np.errstate(over="ignore", invalid="ignore"):
        for _ in range(n):
            for i in range(m):
                lo, hi, a = offsets[i], offsets[i + 1], avals[i]
                dp = _dpoly(coeffs, lo, hi, x)
                j00, j01 = J[:, 0, 0].copy(), J[:, 0, 1].copy()
                J[:, 0, 0] = dp * j00 + a * J[:, 1, 0]
                J[:, 0, 1] = dp * j01 + a * J[:, 1, 1]
                J[:, 1, 0] = a * j00
                J[:, 1, 1] = a * j01
                x, y = _poly(coeffs, lo, hi, x) + a * y, a * x
    return x, y, J


def series_eval(c0, c1, zeta):
    """Two power series (low order first) and their derivatives at zeta."""
    M = c0.shape[0] - 1
    z0 = np.full(zeta.shape, c0[M], dtype=complex)
    z1 = np.full(zeta.shape, c1[M], dtype=complex)
    d0 = np.zeros(zeta.shape, dtype=complex)
    d1 = np.zeros(zeta.shape, dtype=complex)
    for k in range(M - 1, -1, -1):
        d0 = d0 * zeta + z0
        d1 = d1 * zeta + z1
        z0 = z0 * zeta + c0[k]
        z1 = z1 * zeta + c1[k]
    return z0, z1, d0, d1
