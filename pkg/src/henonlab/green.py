"""Green functions G± (escape rates in the max norm) and K± membership."""
from dataclasses import dataclass

import numpy as np

from . import kernels
from .core import HenonComposition, dynamical_degree

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 400
# an orbit returning this close (relative) to its start is treated as periodic
CLOSURE_TOL = 1e-10
CLOSURE_PERIOD = 64

STATUS_NAMES = {kernels.CONVERGED: "converged", kernels.CLASSIFIED_ZERO: "classified_zero",
                kernels.BUDGET_EXHAUSTED: "budget_exhausted"}

K, K_PLUS_ONLY, K_MINUS_ONLY, ESCAPING = "K", "K+-only", "K--only", "escaping both"


@dataclass(frozen=True)
class GreenValue:
    value: float
    iterations_used: int
    status: str


def _factor_radius(h):
    """Positive root of |c_D|t^D - sum_{j<D}|c_j|t^j - (|a| + max(2,|a|)) t."""
    c = np.abs(np.asarray(h.p))
    A = abs(h.a)
    coeffs = -c.copy()
    coeffs[-1] = c[-1]
    coeffs[1] -= A + max(2.0, A)

    def q(t):
        return np.polyval(coeffs[::-1], t)

    hi = 1.0
    while q(hi) <= 0:
        hi *= 2
    lo = 0.0
    # the polynomial has one sign change, so it is negative on (0, root)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if q(mid) > 0:
            hi = mid
        else:
            lo = mid
    return hi


def escape_radius(f):
    """R with the filtration property for every factor of f.

    If max(|x|,|y|) > R and |x| >= |y| then one factor multiplies |x| by at
    least max(2, |a|), which keeps the new point in the same region.
    """
    return max(_factor_radius(h) for h in f.factors)


def _tails(f, backward):
    """Asymptotic constants of log|dominant| per position in the cycle."""
    fs = f.factors
    m = len(fs)
    order = list(range(m - 1, -1, -1)) if backward else list(range(m))
    degs = [fs[i].degree for i in order]
    if backward:
        consts = [np.log(abs(fs[i].p[-1])) - (fs[i].degree + 1) * np.log(abs(fs[i].a)) for i in order]
    else:
        consts = [np.log(abs(fs[i].p[-1])) for i in order]
    d = float(dynamical_degree(f))
    tails = np.zeros(m)
    for j in range(m):
        s, prod = 0.0, 1.0
        for k in range(m):
            pos = (j + k) % m
            prod *= degs[pos]
            s += consts[pos] / prod
        tails[j] = s / (1 - 1 / d)
    return np.array(order, dtype=np.int64), tails


def _escape_batch(f, pts, tol, max_iter, backward):
    pts = np.asarray(pts, dtype=complex)
    single = pts.ndim == 1
    pts = pts.reshape(2, -1)
    coeffs, offsets, degs, avals = f.packed
    order, tails = _tails(f, backward)
    R = escape_radius(f.conjugate_inverse) if backward else escape_radius(f)
    val, its, st = kernels.escape(coeffs, offsets, degs, avals, order, tails,
                                  pts[0], pts[1], R, int(max_iter), float(tol), bool(backward),
                                  CLOSURE_TOL)
    # Periodic points drift off under the expanding direction; check closure
    # along the opposite direction, which is the well-conditioned one there.
    hit = np.nonzero(st == kernels.CONVERGED)[0]
    if hit.size:
        o2, t2 = _tails(f, not backward)
        R2 = escape_radius(f) if backward else escape_radius(f.conjugate_inverse)
        _, its2, st2 = kernels.escape(coeffs, offsets, degs, avals, o2, t2, pts[0, hit], pts[1, hit],
                                      R2, CLOSURE_PERIOD + 1, 1.0, not backward, CLOSURE_TOL)
        closed = hit[(st2 == kernels.CLASSIFIED_ZERO) & (its2 <= CLOSURE_PERIOD)]
        val, its, st = val.copy(), its.copy(), st.copy()
        val[closed], st[closed] = 0.0, kernels.CLASSIFIED_ZERO
    if single:
        return GreenValue(float(val[0]), int(its[0]), STATUS_NAMES[int(st[0])])
    return val, its, st


def green_plus(f, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER, extended=False):
    """G⁺ at one point (GreenValue) or a (2, N) batch (arrays value, iters, status)."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    if extended:
        return _green_extended(f, z, max_iter)
    return _escape_batch(f, z, tol, max_iter, backward=False)


def green_minus(f, z, tol=DEFAULT_TOL, max_iter=DEFAULT_MAX_ITER):
    """G⁻, iterating the inverse factors directly."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _escape_batch(f, z, tol, max_iter, backward=True)


def _green_extended(f, z, n, dps=60):
    """d^-n log max(|x_n|,|y_n|) in mpmath at fixed n (oracle use)."""
    import mpmath

    from .core import apply_extended

    with mpmath.workdps(dps):
        x, y = apply_extended(f, z, n=n, dps=dps)
        nrm = max(abs(x), abs(y))
        val = mpmath.log(nrm) / mpmath.mpf(dynamical_degree(f)) ** n if nrm > 1 else mpmath.mpf(0)
        return GreenValue(float(val), n, "converged" if val > 0 else "classified_zero")


def zero_threshold(f, max_iter=DEFAULT_MAX_ITER, R=None):
    """ε_G = d^-max_iter log(R): the resolution of a classified_zero verdict."""
    R = escape_radius(f) if R is None else R
    return float(dynamical_degree(f)) ** (-max_iter) * np.log(max(R, np.e))


def classify_point(f, z, max_iter=DEFAULT_MAX_ITER, tol=DEFAULT_TOL):
    """Return (class, flags) with class one of K, K+-only, K--only, escaping both."""
    gp = green_plus(f, z, tol, max_iter)
    gm = green_minus(f, z, tol, max_iter)
    flags = []
    zp = gp.status != "converged"
    zm = gm.status != "converged"
    if gp.status == "budget_exhausted":
        flags.append("plus_budget_exhausted")
    if gm.status == "budget_exhausted":
        flags.append("minus_budget_exhausted")
    return class_from_zero_flags(zp, zm), flags


def class_from_zero_flags(zero_plus, zero_minus):
    if zero_plus and zero_minus:
        return K
    if zero_plus:
        return K_PLUS_ONLY
    if zero_minus:
        return K_MINUS_ONLY
    return ESCAPING


def holder_exponent(f, z, radii=None, n_dirs=32, seed=0, minus=False):
    """Empirical Hölder exponent of G± at a point of K±.

    Fits log(max sampled G over the sphere of radius r) against log r.
    The result is a measurement only; no exponent is asserted anywhere.
    """
    rng = np.random.default_rng(seed)
    radii = np.geomspace(1e-2, 1e-6, 9) if radii is None else np.asarray(radii)
    z = np.asarray(z, dtype=complex)
    sup = []
    for r in radii:
        v = rng.normal(size=(4, n_dirs))
        v /= np.linalg.norm(v, axis=0)
        dz = r * (v[0:2] + 1j * v[2:4])
        g = (green_minus if minus else green_plus)(f, z[:, None] + dz)[0]
        sup.append(max(g.max(), 1e-300))
    slope = np.polyfit(np.log(radii), np.log(sup), 1)[0]
    return float(slope), np.array(sup)
