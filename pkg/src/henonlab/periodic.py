"""Periodic orbits by Newton's method, multipliers, types and the saddle database."""
from __future__ import annotations

import hashlib
import itertools
import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import apply, derivative, jacobian_constant
from .green import escape_radius

EPS_UNIT = 1e-6
DEDUP_TOL = 1e-6

SADDLE, ATTRACTING, REPELLING, SEMI_NEUTRAL = "saddle", "attracting", "repelling", "semi-neutral"


@dataclass
class NewtonOptions:
    tol: float = 1e-9
    max_iter: int = 60
    grid: int = 8           # points per real axis in each complex coordinate
    polish: bool = True
    symbolic: bool = True   # add inverse-branch seeds (one per branch code)
    max_symbolic: int = 1 << 14


@dataclass
class PeriodicOrbit:
    period: int
    points: np.ndarray                 # shape (period, 2)
    u: complex
    s: complex
    type: str
    residual: float
    id: str
    flags: tuple = ()
    eigvecs: tuple = None              # (v_u, v_s) unit vectors for diagonalizable orbits

    @property
    def base(self):
        return self.points[0]

    def to_record(self):
        return {
            "id": self.id,
            "period": int(self.period),
            "points": [[float(p[0].real), float(p[0].imag), float(p[1].real), float(p[1].imag)]
                       for p in self.points],
            "u": [float(self.u.real), float(self.u.imag)],
            "s": [float(self.s.real), float(self.s.imag)],
            "type": self.type,
            "residual": float(self.residual),
        }


def classify(mults, eps_unit=EPS_UNIT):
    u, s = mults
    mu, ms = sorted((abs(u), abs(s)), reverse=True)
    lo, hi = 1 - eps_unit, 1 + eps_unit
    if ms < lo and mu > hi:
        return SADDLE
    if mu < lo:
        return ATTRACTING
    if ms > hi:
        return REPELLING
    return SEMI_NEUTRAL


def orbit_derivative(f, points):
    """Df^n at points[0] as the ordered product of Df along the cycle."""
    D = np.eye(2, dtype=complex)
    for p in points:
        D = derivative(f, p) @ D
    return D


def _eigvec(M, lam):
    v1 = np.array([M[0, 1], lam - M[0, 0]])
    v2 = np.array([lam - M[1, 1], M[1, 0]])
    v = v1 if np.linalg.norm(v1) >= np.linalg.norm(v2) else v2
    nv = np.linalg.norm(v)
    if nv == 0:
        v = np.array([1.0 + 0j, 0j]) if abs(M[1, 0]) <= abs(M[0, 1]) else np.array([0j, 1.0 + 0j])
        return v
    return v / nv


def eigen_from_matrix(M, det):
    """Eigenvalues (u, s), |u| >= |s|, using the known determinant for s."""
    tr = M[0, 0] + M[1, 1]
    disc = np.sqrt(complex(tr * tr - 4 * det))
    r1, r2 = (tr + disc) / 2, (tr - disc) / 2
    u = r1 if abs(r1) >= abs(r2) else r2
    s = det / u if u != 0 else 0j
    return complex(u), complex(s)


def multipliers(f, orbit_points, with_vectors=True):
    """Return (u, s, (v_u, v_s) or None, flags) along a cycle."""
    pts = np.asarray(orbit_points, dtype=complex).reshape(-1, 2)
    n = len(pts)
    M = orbit_derivative(f, pts)
    det = jacobian_constant(f)[0] ** n
    u, s = eigen_from_matrix(M, det)
    flags = []
    vecs = None
    if abs(u - s) <= 1e-10 * max(1.0, abs(u)):
        flags.append("defective")
    elif with_vectors:
        vecs = (_eigvec(M, u), _eigvec(M, s))
    return u, s, vecs, tuple(flags)


def _orbit_id(points):
    pts = np.asarray(points)
    keys = [tuple(np.round([p[0].real, p[0].imag, p[1].real, p[1].imag], 6)) for p in pts]
    k = min(range(len(keys)), key=lambda i: keys[i])
    canon = np.roll(pts, -k, axis=0)
    text = json.dumps([len(pts)] + [list(np.round([q[0].real, q[0].imag, q[1].real, q[1].imag], 6))
                                     for q in canon])
    return hashlib.sha1(text.encode()).hexdigest()[:16], canon


def _polish_cycle(f, pts, iters=4):
    """Multiple-shooting Newton on f(z_i) = z_{i+1} around the cycle."""
    m = len(pts)
    Z = np.array(pts, dtype=complex)
    for _ in range(iters):
        F = np.zeros(2 * m, dtype=complex)
        A = np.zeros((2 * m, 2 * m), dtype=complex)
        for i in range(m):
            j = (i + 1) % m
            F[2 * i:2 * i + 2] = apply(f, Z[i]) - Z[j]
            A[2 * i:2 * i + 2, 2 * i:2 * i + 2] += derivative(f, Z[i])
            A[2 * i:2 * i + 2, 2 * j:2 * j + 2] -= np.eye(2)
        try:
            dz = np.linalg.solve(A, -F)
        except np.linalg.LinAlgError:
            break
        Z = Z + dz.reshape(m, 2)
        if np.max(np.abs(dz)) < 1e-15 * max(1.0, np.max(np.abs(Z))):
            break
    return Z


def cycle_residual(f, pts):
    pts = np.asarray(pts, dtype=complex)
    img = apply(f, pts.T).T
    return float(np.max(np.abs(img - np.roll(pts, -1, axis=0))))


def newton_roots(f, seeds, n, tol=1e-9, max_iter=60, box=None):
    """Vectorized Newton on f^n(z) - z from the (2, S) seeds.

    Returns (roots (2, K), near_degenerate flags (K,)).
    """
    coeffs, offsets, degs, avals = f.packed
    Z = np.array(seeds, dtype=complex)
    box = 4 * escape_radius(f) if box is None else box
    alive = np.ones(Z.shape[1], dtype=bool)
    frozen = np.zeros(Z.shape[1], dtype=bool)
    with np.errstate(all="ignore"):
        for _ in range(max_iter):
            idx = np.nonzero(alive & ~frozen)[0]
            if idx.size == 0:
                break
            X, Y, J = kernels.orbit_jacobian(coeffs, offsets, degs, avals, Z[0, idx], Z[1, idx], n)
            F0, F1 = X - Z[0, idx], Y - Z[1, idx]
            a00, a01, a10, a11 = J[:, 0, 0] - 1, J[:, 0, 1], J[:, 1, 0], J[:, 1, 1] - 1
            det = a00 * a11 - a01 * a10
            d0 = -(a11 * F0 - a01 * F1) / det
            d1 = -(-a10 * F0 + a00 * F1) / det
            step = np.maximum(np.abs(d0), np.abs(d1))
            scale = np.where(step > box / 4, (box / 4) / step, 1.0)
            Z[0, idx] += scale * d0
            Z[1, idx] += scale * d1
            bad = ~np.isfinite(Z[0, idx]) | ~np.isfinite(Z[1, idx]) | \
                (np.maximum(np.abs(Z[0, idx]), np.abs(Z[1, idx])) > box)
            alive[idx[bad]] = False
            tiny = step <= 1e-14 * (1 + np.maximum(np.abs(Z[0, idx]), np.abs(Z[1, idx])))
            frozen[idx[tiny & ~bad]] = True
    idx = np.nonzero(alive)[0]
    if idx.size == 0:
        return np.zeros((2, 0), dtype=complex), np.zeros(0, dtype=bool)
    X, Y, J = kernels.orbit_jacobian(coeffs, offsets, degs, avals, Z[0, idx], Z[1, idx], n)
    res = np.maximum(np.abs(X - Z[0, idx]), np.abs(Y - Z[1, idx]))
    ok = np.isfinite(res) & (res < tol * 1e2)
    idx, J = idx[ok], J[ok]
    sv = np.linalg.svd(J - np.eye(2)[None], compute_uv=False)
    neardeg = sv[:, -1] < 1e-10 * np.maximum(1.0, sv[:, 0])
    return Z[:, idx], neardeg


def seed_grid(f, grid=8, box=None):
    """Product grid: grid×grid points in each complex coordinate over [-R, R]²."""
    if box is None:
        R = escape_radius(f)
        cx, cy, hw = 0j, 0j, R
    else:
        cx, cy, hw = box
    t = np.linspace(-hw, hw, grid)
    plane = (t[:, None] + 1j * t[None, :]).ravel()
    X, Y = np.meshgrid(cx + plane, cy + plane, indexing="ij")
    return np.array([X.ravel(), Y.ravel()])


def _branch_root(h, w, k):
    """Root of p(ξ) = w labelled k: nearest to ((w - c0)/ℓ)^(1/D) e^(2πik/D)."""
    D, lead = h.degree, h.p[-1]
    guess = ((w - h.p[0]) / lead) ** (1.0 / D) * np.exp(2j * np.pi * k / D)
    if D == 2:
        b, c0 = h.p[1], h.p[0]
        sq = np.sqrt(b * b - 4 * lead * (c0 - w))
        r1, r2 = (-b + sq) / (2 * lead), (-b - sq) / (2 * lead)
        return np.where(np.abs(r1 - guess) <= np.abs(r2 - guess), r1, r2)
    comp = np.zeros((w.size, D, D), dtype=complex)
    comp[:, 1:, :-1] = np.eye(D - 1)
    comp[:, :, -1] = -(np.asarray(h.p[:-1]) / lead)[None, :]
    comp[:, 0, -1] = -(h.p[0] - w) / lead
    r = np.linalg.eigvals(comp)
    j = np.argmin(np.abs(r - guess[:, None]), axis=1)
    return r[np.arange(w.size), j]


def symbolic_seeds(f, n, sweeps=60, max_seeds=1 << 14):
    """Seeds for period n from branch codes of the x-recurrence.

    Along an orbit the x-coordinates before each factor step obey
    x_{t+1} = p_t(x_t) + a_t a_{t-1} x_{t-1}.  For every code choosing a
    branch of p_t⁻¹ at each step, sweep x_t <- p_t⁻¹(x_{t+1} - a_t a_{t-1} x_{t-1});
    in horseshoe regimes the sweep contracts onto the orbit with that code.
    """
    fs = f.factors
    m = len(fs)
    L = n * m
    idx = [t % m for t in range(L)]
    total = 1
    for i in idx:
        total *= fs[i].degree
    if total > max_seeds:
        return np.zeros((2, 0), dtype=complex)
    codes = np.array(list(itertools.product(*[range(fs[i].degree) for i in idx])))
    x = np.zeros(codes.shape, dtype=complex)
    with np.errstate(all="ignore"):
        for _ in range(sweeps):
            for t in range(L):
                i, ip = idx[t], idx[(t - 1) % L]
                w = x[:, (t + 1) % L] - fs[i].a * fs[ip].a * x[:, (t - 1) % L]
                x[:, t] = _branch_root(fs[i], w, codes[:, t])
    y0 = fs[idx[L - 1]].a * x[:, L - 1]
    seeds = np.array([x[:, 0], y0])
    ok = np.isfinite(seeds).all(axis=0)
    return seeds[:, ok]


def _same_orbit(A, B, tol=DEDUP_TOL):
    if len(A) != len(B):
        return False
    for k in range(len(B)):
        if np.max(np.abs(A - np.roll(B, -k, axis=0))) < tol:
            return True
    return False


def make_orbit(f, z0, n, tol=1e-9, eps_unit=EPS_UNIT, polish=True, extra_flags=()):
    """Build a PeriodicOrbit from a root of f^n(z) = z; None if it fails tol."""
    z0 = np.asarray(z0, dtype=complex)
    m = n
    for cand in range(1, n + 1):
        if n % cand:
            continue
        w = z0
        for _ in range(cand):
            w = apply(f, w)
        if np.max(np.abs(w - z0)) < DEDUP_TOL:
            m = cand
            break
    pts = [z0]
    for _ in range(m - 1):
        pts.append(apply(f, pts[-1]))
    pts = np.array(pts)
    if polish:
        pts = _polish_cycle(f, pts)
    res = cycle_residual(f, pts)
    if not res < tol:
        return None
    oid, canon = _orbit_id(pts)
    u, s, vecs, flags = multipliers(f, canon)
    return PeriodicOrbit(m, canon, u, s, classify((u, s), eps_unit), res, oid,
                         tuple(flags) + tuple(extra_flags), vecs)


def find_periodic(f, n, seed_box=None, newton_opts=None, eps_unit=EPS_UNIT):
    """Orbits whose minimal period divides n, deduplicated up to cyclic rotation."""
    if n < 1:
        raise ValueError("period must be at least 1")
    opts = newton_opts or NewtonOptions()
    seeds = seed_grid(f, opts.grid, seed_box)
    if opts.symbolic:
        seeds = np.concatenate([symbolic_seeds(f, n, max_seeds=opts.max_symbolic), seeds], axis=1)
    roots, neardeg = newton_roots(f, seeds, n, opts.tol, opts.max_iter)
    orbits = []
    for k in range(roots.shape[1]):
        z = roots[:, k]
        if any(np.min(np.max(np.abs(o.points - z[None]), axis=1)) < DEDUP_TOL for o in orbits):
            continue
        o = make_orbit(f, z, n, opts.tol, eps_unit, opts.polish,
                       ("near-degenerate",) if neardeg[k] else ())
        if o is None or any(_same_orbit(o.points, q.points) for q in orbits):
            continue
        orbits.append(o)
    orbits.sort(key=_sort_key)
    return orbits


def _sort_key(o):
    p = o.points[0]
    return (o.period, round(p[0].real, 9), round(p[0].imag, 9), round(p[1].real, 9),
            round(p[1].imag, 9))


@dataclass
class SaddleDB:
    family_id: str
    lam: complex
    max_period: int
    orbits: list = field(default_factory=list)

    def add(self, orbit):
        if any(o.id == orbit.id or (o.period == orbit.period and _same_orbit(o.points, orbit.points))
               for o in self.orbits):
            return False
        self.orbits.append(orbit)
        return True

    def saddles(self, max_period=None):
        return [o for o in self.orbits if o.type == SADDLE
                and (max_period is None or o.period <= max_period)]

    def to_jsonl(self):
        return "".join(json.dumps(o.to_record(), sort_keys=True) + "\n" for o in self.orbits)

    @classmethod
    def from_jsonl(cls, text, f=None, family_id="", lam=0j):
        orbits = []
        maxp = 0
        for line in text.splitlines():
            if not line.strip():
                continue
            r = json.loads(line)
            pts = np.array([[complex(a, b), complex(c, d)] for a, b, c, d in r["points"]])
            u, s = complex(*r["u"]), complex(*r["s"])
            vecs = multipliers(f, pts)[2] if f is not None else None
            orbits.append(PeriodicOrbit(r["period"], pts, u, s, r["type"], r["residual"], r["id"],
                                        (), vecs))
            maxp = max(maxp, r["period"])
        return cls(family_id, lam, maxp, orbits)


def census(f, max_period, newton_opts=None, eps_unit=EPS_UNIT, family_id="", lam=0j, seed_box=None):
    """All orbits found with minimal period <= max_period."""
    db = SaddleDB(family_id, complex(lam), max_period)
    for n in range(1, max_period + 1):
        for o in find_periodic(f, n, seed_box, newton_opts, eps_unit):
            db.add(o)
    db.orbits.sort(key=_sort_key)
    return db
