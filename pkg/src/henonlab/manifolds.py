"""Stable and unstable manifolds of saddles by the parameterization method.

A manifold is the map ψ with f^n(ψ(ζ)) = ψ(μζ), ψ(0) = p and ψ'(0) = c₁ a
unit eigenvector.  Stable manifolds are computed as unstable manifolds of
the conjugated inverse composition F (f⁻¹ = s∘F∘s, s the swap), so both
branches are solved with an expanding multiplier.

Geometry is measured in the orthonormal frame (e₁, e₂) at the base point,
with e₁ = c₁: π(z) = <z - p, e₁> and π⊥(z) = <z - p, e₂>.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .continuation import continue_point
from .core import apply, dynamical_degree, instantiate, swap
from .green import escape_radius, green_minus, green_plus
from .periodic import _eigvec, eigen_from_matrix, make_orbit, orbit_derivative

DEFAULT_ORDER = 24
DEFAULT_TOL = 1e-9
MAX_DEPTH = 64
EPS_RES = 1e-10
N_ANG, N_RAD = 128, 256


class ResonanceError(ArithmeticError):
    pass


class ZetaTooLarge(ValueError):
    pass


def _frame(c1):
    c1 = np.asarray(c1, dtype=complex)
    e2 = np.array([-np.conj(c1[1]), np.conj(c1[0])])
    return c1, e2


def _series_apply(f, X, Y, K):
    """One application of f to a truncated power series (X, Y) of order K."""
    for h in f.factors:
        P = np.zeros(K + 1, dtype=complex)
        P[0] = h.p[-1]
        for c in h.p[-2::-1]:
            P = np.convolve(P, X)[:K + 1]
            P[0] += c
        X, Y = P + h.a * Y, h.a * X
    return X, Y


def _horner(C, zeta):
    """Series and derivative at zeta for coefficient array C of shape (M+1, 2)."""
    zeta = np.asarray(zeta, dtype=complex)
    z0, z1, d0, d1 = kernels.series_eval(C[:, 0], C[:, 1], zeta.ravel())
    return (np.stack([z0, z1]).reshape((2,) + zeta.shape),
            np.stack([d0, d1]).reshape((2,) + zeta.shape))


class _ManifoldBase:
    """Shared geometry for computed and synthetic manifolds."""

    base: np.ndarray
    c1: np.ndarray

    @property
    def frame(self):
        return _frame(self.c1)

    def project(self, Z):
        e1, e2 = self.frame
        d = Z - self.base.reshape((2,) + (1,) * (Z.ndim - 1))
        return np.conj(e1[0]) * d[0] + np.conj(e1[1]) * d[1], np.conj(e2[0]) * d[0] + np.conj(e2[1]) * d[1]

    def chart(self, zeta, strict=False):
        """(g, h, g', h'): frame coordinates of ψ(ζ) and their ζ-derivatives."""
        Z, dZ = self.evaluate(zeta, strict=strict)
        e1, e2 = self.frame
        g, h = self.project(Z)
        dg = np.conj(e1[0]) * dZ[0] + np.conj(e1[1]) * dZ[1]
        dh = np.conj(e2[0]) * dZ[0] + np.conj(e2[1]) * dZ[1]
        return g, h, dg, dh


@dataclass
class LocalManifold(_ManifoldBase):
    branch: str
    orbit_id: str
    period: int
    base: np.ndarray
    mu: complex
    coeffs: np.ndarray          # (M+1, 2) in f coordinates; coeffs[0] = p, coeffs[1] = c1
    rho_cert: float
    r_cert: float = 0.0
    f: object = None
    point_index: int = 0
    certificate: object = None
    _gen: object = field(default=None, repr=False)
    _gen_coeffs: np.ndarray = field(default=None, repr=False)
    _gen_mu: complex = 0j

    @property
    def c1(self):
        return self.coeffs[1]

    @property
    def order(self):
        return self.coeffs.shape[0] - 1

    @property
    def swapped(self):
        return self.branch == "stable"

    def series(self, zeta):
        """ψ and ψ' by the truncated series alone (f coordinates)."""
        return _horner(self.coeffs, zeta)

    def _depths(self, zeta):
        a = np.abs(zeta)
        with np.errstate(divide="ignore"):
            k = np.ceil(np.log(np.maximum(a, 1e-300) / self.rho_cert) / np.log(abs(self._gen_mu)))
        return np.where(a <= self.rho_cert, 0, np.maximum(k, 0)).astype(np.int64)

    def evaluate(self, zeta, strict=True, return_depth=False):
        """ψ(ζ), ψ'(ζ); past ρ_cert uses ψ(ζ) = F^n(ψ(ζ/μ)) in generator coordinates."""
        zeta = np.asarray(zeta, dtype=complex)
        shape = zeta.shape
        zf = zeta.ravel()
        depth = self._depths(zf)
        too = depth > MAX_DEPTH
        if strict and too.any():
            raise ZetaTooLarge("ζ too large for the dynamical extension")
        depth = np.where(too, 0, depth)
        w = np.where(too, 0, zf) / self._gen_mu ** depth
        Z, dZ = _horner(self._gen_coeffs, w)
        dZ = dZ / self._gen_mu ** depth
        coeffs, offsets, degs, avals = self._gen.packed
        for level in range(1, int(depth.max(initial=0)) + 1):
            idx = np.nonzero(depth >= level)[0]
            X, Y, J = kernels.orbit_jacobian(coeffs, offsets, degs, avals, Z[0, idx], Z[1, idx], self.period)
            d0 = J[:, 0, 0] * dZ[0, idx] + J[:, 0, 1] * dZ[1, idx]
            d1 = J[:, 1, 0] * dZ[0, idx] + J[:, 1, 1] * dZ[1, idx]
            Z[0, idx], Z[1, idx] = X, Y
            dZ[0, idx], dZ[1, idx] = d0, d1
        if too.any():
            Z[:, too] = np.nan
            dZ[:, too] = np.nan
        if self.swapped:
            Z, dZ = Z[::-1], dZ[::-1]
        Z = Z.reshape((2,) + shape)
        dZ = dZ.reshape((2,) + shape)
        if return_depth:
            return Z, dZ, depth.reshape(shape)
        return Z, dZ

    def conjugacy_residual(self, zeta):
        """max-norm of f^n(ψ(ζ)) - ψ(μζ), both sides by the series."""
        zeta = np.asarray(zeta, dtype=complex).ravel()
        Z, _ = self.series(zeta)
        W, _ = self.series(self.mu * zeta)
        coeffs, offsets, degs, avals = self.f.packed
        X, Y, _ = kernels.orbit_jacobian(coeffs, offsets, degs, avals, Z[0], Z[1], self.period)
        return np.maximum(np.abs(X - W[0]), np.abs(Y - W[1]))

    def rotated(self, phase):
        """Same manifold reparameterized by ζ -> e^{i phase} ζ."""
        k = np.arange(self.coeffs.shape[0])
        rot = np.exp(1j * phase * k)[:, None]
        out = LocalManifold(self.branch, self.orbit_id, self.period, self.base.copy(), self.mu,
                            self.coeffs * rot, self.rho_cert, self.r_cert, self.f, self.point_index,
                            None, self._gen, self._gen_coeffs * rot, self._gen_mu)
        return out

    def to_dict(self):
        pr = lambda c: [float(c.real), float(c.imag)]
        return {
            "branch": self.branch,
            "orbit_id": self.orbit_id,
            "period": int(self.period),
            "point_index": int(self.point_index),
            "base": pr(self.base[0]) + pr(self.base[1]),
            "mu": pr(self.mu),
            "coefficients": [pr(c[0]) + pr(c[1]) for c in self.coeffs[1:]],
            "rho_cert": float(self.rho_cert),
            "r_cert": float(self.r_cert),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def _cycle_for(f, orbit, branch, index):
    """Base point and generator-orbit points starting at orbit.points[index]."""
    pts = np.roll(np.asarray(orbit.points, dtype=complex), -index, axis=0)
    if branch == "unstable":
        return f, pts
    F = f.conjugate_inverse
    back = [pts[0]] + [pts[-k] for k in range(1, len(pts))]
    return F, np.array([swap(q) for q in back])


def _phase_fix(v):
    """Unit vector with its larger component made real positive."""
    v = v / np.linalg.norm(v)
    k = 0 if abs(v[0]) >= abs(v[1]) else 1
    return v * (abs(v[k]) / v[k])


def parameterize(f, orbit, branch, order=DEFAULT_ORDER, tol=DEFAULT_TOL, point_index=0,
                 eps_res=EPS_RES, c1_hint=None):
    """Solve (Df^n(p) - μ^k I) c_k = -R_k order by order and certify ρ_cert."""
    if branch not in ("stable", "unstable"):
        raise ValueError("branch must be 'stable' or 'unstable'")
    if orbit.type != "saddle":
        raise ValueError("parameterization needs a saddle orbit")
    if "defective" in orbit.flags:
        raise ValueError("orbit differential is not diagonalizable")
    n = orbit.period
    gen, gpts = _cycle_for(f, orbit, branch, point_index)
    MD = orbit_derivative(gen, gpts)
    jac = np.prod([-(h.a ** 2) for h in gen.factors]) ** n
    mu_g, _ = eigen_from_matrix(MD, jac)
    v = _eigvec(MD, mu_g)
    v_f = swap(v) if branch == "stable" else v
    v_f = _phase_fix(v_f)
    if c1_hint is not None:
        al = np.vdot(c1_hint, v_f)
        if abs(al) > 0:
            v_f = v_f * (abs(al) / al)
    v = swap(v_f) if branch == "stable" else v_f
    M = int(order)
    C = np.zeros((M + 1, 2), dtype=complex)
    C[0] = gpts[0]
    C[1] = v
    eye = np.eye(2)
    for k in range(2, M + 1):
        X = C[:k + 1, 0].copy()
        Y = C[:k + 1, 1].copy()
        X[k] = Y[k] = 0
        for _ in range(n):
            X, Y = _series_apply(gen, X, Y, k)
        T = np.array([X[k], Y[k]])
        A = MD - mu_g ** k * eye
        smin = np.linalg.svd(A, compute_uv=False)[-1]
        if smin < eps_res:
            raise ResonanceError(f"resonance at order {k}")
        C[k] = np.linalg.solve(A, -T)
    coeffs_f = C[:, ::-1].copy() if branch == "stable" else C.copy()
    mu_f = orbit.u if branch == "unstable" else orbit.s
    man = LocalManifold(branch, orbit.id, n, coeffs_f[0].copy(), complex(mu_f), coeffs_f, 0.0, 0.0, f,
                        point_index, None, gen, C, complex(mu_g))
    man.rho_cert = _dyadic_rho(man, tol)
    return man


def _dyadic_rho(man, tol, n_samples=128, margin=0.5):
    # accept a radius only with a factor-2 margin below tol, to cover unsampled angles
    t = np.exp(2j * np.pi * np.arange(n_samples) / n_samples)
    for j in range(6, -60, -1):
        rho = 2.0 ** j
        with np.errstate(all="ignore"):
            res = man.conjugacy_residual(rho * t)
        if np.all(np.isfinite(res)) and res.max() < margin * tol:
            return rho
    return 0.0


def opposite_green(man, zeta, depth=40, tol=1e-10, max_iter=400):
    """G⁻ along an unstable manifold (G⁺ along a stable one) via the conjugacy.

    G(ψ(ζ)) = d^(-n k) G(ψ(w)) with w = ζ/u^k (or s^k ζ).  Evaluating G
    directly at a rounded point of the curve measures that point's distance
    to the curve, which the Hölder exponent turns into values near 1e-3;
    pulling ζ towards 0 first removes that.  Returns (value, direct).
    """
    zeta = np.asarray(zeta, dtype=complex)
    shrink = man.mu if abs(man.mu) < 1 else 1 / man.mu
    w = zeta * shrink ** depth
    G = green_plus if man.branch == "stable" else green_minus
    direct = G(man.f, man.evaluate(zeta.ravel())[0], tol, max_iter)[0]
    near = G(man.f, man.evaluate(w.ravel())[0], tol, max_iter)[0]
    scale = float(dynamical_degree(man.f)) ** (-man.period * depth)
    return (scale * near).reshape(zeta.shape), direct.reshape(zeta.shape)


def resonance_margins(f, orbit, branch, order=DEFAULT_ORDER):
    """Smallest singular value of (Dg^n - μ^k I) for 2 <= k <= order."""
    gen, gpts = _cycle_for(f, orbit, branch, 0)
    MD = orbit_derivative(gen, gpts)
    jac = np.prod([-(h.a ** 2) for h in gen.factors]) ** orbit.period
    mu_g, _ = eigen_from_matrix(MD, jac)
    return np.array([np.linalg.svd(MD - mu_g ** k * np.eye(2), compute_uv=False)[-1]
                     for k in range(2, order + 1)])


# ----------------------------------------------------------------------------
# synthetic manifolds (test hooks)

class SyntheticManifold(_ManifoldBase):
    """ψ given in closed form; used for controls and extremal cases."""

    def __init__(self, func, dfunc, base, c1, branch="unstable", mu=2.0):
        self.func, self.dfunc = func, dfunc
        self.base = np.asarray(base, dtype=complex)
        self._c1 = np.asarray(c1, dtype=complex) / np.linalg.norm(c1)
        self.branch, self.mu = branch, mu
        self.r_cert = 0.0
        self.rho_cert = np.inf
        self.orbit_id = "synthetic"
        self.certificate = None

    @property
    def c1(self):
        return self._c1

    def evaluate(self, zeta, strict=True, return_depth=False):
        zeta = np.asarray(zeta, dtype=complex)
        Z = np.asarray(self.func(zeta), dtype=complex)
        dZ = np.asarray(self.dfunc(zeta), dtype=complex)
        if return_depth:
            return Z, dZ, np.zeros(zeta.shape, dtype=np.int64)
        return Z, dZ


def graph_manifold(base, e1, phi, dphi, g=None, dg=None):
    """ψ(ζ) = p + g(ζ) e₁ + φ(g(ζ)) e₂ with (e₁, e₂) the orthonormal frame of e₁."""
    base = np.asarray(base, dtype=complex)
    e1, e2 = _frame(np.asarray(e1, dtype=complex) / np.linalg.norm(e1))
    g = g or (lambda z: z)
    dg = dg or (lambda z: np.ones_like(z))
    sh = lambda v, z: v.reshape((2,) + (1,) * np.ndim(z))

    def func(z):
        x = g(z)
        return sh(base, z) + sh(e1, z) * x + sh(e2, z) * phi(x)

    def dfunc(z):
        x = g(z)
        return (sh(e1, z) + sh(e2, z) * dphi(x)) * dg(z)

    return SyntheticManifold(func, dfunc, base, e1)


def affine_manifold(base, e):
    return graph_manifold(base, e, lambda x: 0 * x, lambda x: 0 * x)


def recentered(man, zeta0):
    """The piece of man through ψ(ζ0), as a manifold based there (ζ -> ψ(ζ0 + ζ))."""
    zeta0 = complex(zeta0)
    Z0, dZ0 = man.evaluate(np.array([zeta0]))
    out = SyntheticManifold(lambda z: man.evaluate(zeta0 + np.asarray(z, dtype=complex))[0],
                            lambda z: man.evaluate(zeta0 + np.asarray(z, dtype=complex))[1],
                            Z0[:, 0], dZ0[:, 0], man.branch, man.mu)
    out.orbit_id = f"{man.orbit_id}@{zeta0}"
    return out


def koebe(z):
    return z / (1 - z) ** 2


def koebe_prime(z):
    return (1 + z) / (1 - z) ** 3


def koebe_inverse(w):
    w = np.asarray(w, dtype=complex)
    return 2 * w / ((2 * w + 1) + np.sqrt(4 * w + 1))


def koebe_extremal_manifold(base, e1, r):
    """Flat manifold whose chart inverse is x -> r k(x/r): Koebe-extremal at scale r."""
    g = lambda z: r * koebe_inverse(z / r)
    dg = lambda z: 1 / koebe_prime(koebe_inverse(z / r))
    return graph_manifold(base, e1, lambda x: 0 * x, lambda x: 0 * x, g, dg)


# ----------------------------------------------------------------------------
# continuation of the chart inverse x -> ζ with π(ψ(ζ)) = x

@dataclass
class TraceResult:
    zeta: np.ndarray      # (S, K)
    g: np.ndarray
    h: np.ndarray
    dg: np.ndarray
    dh: np.ndarray
    ok: np.ndarray        # (S,)


def trace(man, zeta0, xnodes, substeps=1, frame=None, max_newton=8, max_halvings=10):
    """Continue ζ along straight x-segments through the nodes of each row.

    ``xnodes[:, 0]`` must be the frame coordinate of ψ(zeta0).  Steps that
    fail to converge, or whose corrector jumps, are halved.
    """
    xnodes = np.asarray(xnodes, dtype=complex)
    S, K = xnodes.shape
    if frame is None:
        base, (e1, e2) = man.base, man.frame
    else:
        base, e1, e2 = frame
    c1, c2 = np.conj(e1), np.conj(e2)

    def ev(z):
        Z, dZ = man.evaluate(z, strict=False)
        d0, d1 = Z[0] - base[0], Z[1] - base[1]
        return (c1[0] * d0 + c1[1] * d1, c2[0] * d0 + c2[1] * d1,
                c1[0] * dZ[0] + c1[1] * dZ[1], c2[0] * dZ[0] + c2[1] * dZ[1])

    out = {k: np.full((S, K), np.nan + 0j) for k in ("zeta", "g", "h", "dg", "dh")}
    zeta = np.asarray(zeta0, dtype=complex).copy() * np.ones(S)
    g, h, dg, dh = ev(zeta)
    ok = np.isfinite(g) & np.isfinite(dg)
    for key, val in zip(("zeta", "g", "h", "dg", "dh"), (zeta, g, h, dg, dh)):
        out[key][:, 0] = val
    with np.errstate(all="ignore"):
        for k in range(1, K):
            xa, xb = xnodes[:, k - 1], xnodes[:, k]
            t = np.zeros(S)
            base_dt = 1.0 / substeps
            dt = np.full(S, base_dt)
            active = ok.copy()
            while active.any():
                idx = np.nonzero(active)[0]
                tn = np.minimum(t[idx] + dt[idx], 1.0)
                xt = xa[idx] + tn * (xb[idx] - xa[idx])
                xc = xa[idx] + t[idx] * (xb[idx] - xa[idx])
                z = zeta[idx] + (xt - xc) / dg[idx]
                zp = z.copy()
                conv = np.zeros(idx.size, dtype=bool)
                for _ in range(max_newton):
                    gg, hh, dgg, dhh = ev(z)
                    err = gg - xt
                    conv = np.abs(err) <= 1e-12 * (1 + np.abs(xt))
                    z = np.where(conv, z, z - err / dgg)
                    if conv.all():
                        break
                gg, hh, dgg, dhh = ev(z)
                conv = (np.abs(gg - xt) <= 1e-11 * (1 + np.abs(xt))) & np.isfinite(dgg)
                jump = np.abs(z - zp) > 0.3 * np.abs(zp - zeta[idx]) + 1e-13 * (1 + np.abs(z))
                good = conv & ~jump
                gi = idx[good]
                t[gi] = tn[good]
                zeta[gi] = z[good]
                g[gi], h[gi], dg[gi], dh[gi] = gg[good], hh[good], dgg[good], dhh[good]
                dt[gi] = np.minimum(dt[gi] * 2, base_dt)
                bi = idx[~good]
                dt[bi] /= 2
                dead = dt[bi] < base_dt / 2 ** max_halvings
                ok[bi[dead]] = False
                active = ok & (t < 1.0)
            for key, val in zip(("zeta", "g", "h", "dg", "dh"), (zeta, g, h, dg, dh)):
                out[key][:, k] = np.where(ok, val, np.nan)
    return TraceResult(out["zeta"], out["g"], out["h"], out["dg"], out["dh"], ok)


# ----------------------------------------------------------------------------
# size certificates

@dataclass
class SizeCertificate:
    status: str                 # certified | violation | undecided
    r: float
    slope_max: float
    schwarz_excess: float
    x: np.ndarray = None
    phi: np.ndarray = None
    dphi: np.ndarray = None
    tangent: np.ndarray = None
    zeta: np.ndarray = None
    detail: str = ""

    @property
    def certified(self):
        return self.status == "certified"


def _polar_nodes(r, n_ang, n_rad, offset=0.0):
    th = 2 * np.pi * (np.arange(n_ang) + offset) / n_ang
    rad = r * np.arange(n_rad + 1) / n_rad
    return rad[None, :] * np.exp(1j * th)[:, None]


def _closure_ok(man, tr_boundary_zeta, r, n_ang, offset=0.0, steps=4, frame=None):
    """Arc-by-arc continuation along |x| = r must reproduce the radial values."""
    th = 2 * np.pi * (np.arange(n_ang) + offset) / n_ang
    dth = 2 * np.pi / n_ang
    nodes = r * np.exp(1j * (th[:, None] + dth * np.arange(steps + 1)[None, :] / steps))
    tr = trace(man, tr_boundary_zeta, nodes, frame=frame)
    target = np.roll(tr_boundary_zeta, -1)
    end = tr.zeta[:, -1]
    good = tr.ok & (np.abs(end - target) <= 1e-7 * (1 + np.abs(target)))
    return bool(good.all())


def certify_size(man, r, n_ang=N_ANG, n_rad=N_RAD, keep_samples=True):
    """Certify that the component through p is a slope-≤1 graph over D(0, r)."""
    nodes = _polar_nodes(r, n_ang, n_rad)
    tr = trace(man, np.zeros(n_ang), nodes)
    if not tr.ok.all():
        return SizeCertificate("undecided", r, np.nan, np.nan, tangent=man.c1,
                               detail="graph continuation left the evaluable region")
    dphi = tr.dh / tr.dg
    slope = np.abs(dphi)
    smax = float(slope.max())
    excess = float(np.max(slope - np.abs(nodes) / r))
    kw = dict(x=nodes, phi=tr.h, dphi=dphi, zeta=tr.zeta) if keep_samples else {}
    if smax > 1 + 1e-12:
        ray, k = np.unravel_index(np.argmax(slope > 1 + 1e-12), slope.shape)
        where = nodes[ray, k]
        return SizeCertificate("violation", r, smax, excess, tangent=man.c1,
                               detail=f"slope {slope[ray, k]:.6g} > 1 at x={where:.6g}", **kw)
    if np.max(np.abs(tr.h)) >= r:
        return SizeCertificate("violation", r, smax, excess, tangent=man.c1,
                               detail="graph leaves the bidisk", **kw)
    if not _closure_ok(man, tr.zeta[:, -1], r, n_ang):
        return SizeCertificate("violation", r, smax, excess, tangent=man.c1,
                               detail="graph is not single-valued on |x| = r", **kw)
    return SizeCertificate("certified", r, smax, excess, tangent=man.c1, **kw)


def find_size(man, r_max=None, r_min=1e-6, iters=12, coarse=(32, 64), fine=(N_ANG, N_RAD)):
    """Largest certified scale by log-bisection at coarse sampling, then a fine certificate.

    Sets ``man.r_cert`` and ``man.certificate``; returns r_cert (0 if none).
    """
    if r_max is None:
        f = getattr(man, "f", None)
        r_max = 2 * escape_radius(f) if f is not None else 1.0
    ok = lambda r: certify_size(man, r, coarse[0], coarse[1], keep_samples=False).certified
    if ok(r_max):
        lo = r_max
    else:
        lo, hi = r_min, r_max
        if not ok(lo):
            man.r_cert, man.certificate = 0.0, None
            return 0.0
        for _ in range(iters):
            mid = np.sqrt(lo * hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
    for _ in range(20):
        cert = certify_size(man, lo, fine[0], fine[1])
        if cert.certified:
            man.r_cert, man.certificate = lo, cert
            return lo
        lo *= 0.95
    man.r_cert, man.certificate = 0.0, None
    return 0.0


# ----------------------------------------------------------------------------
# Koebe audits

def inverse_chart(man, x, frame=None, substeps=16):
    """ζ with π(ψ(ζ)) = x and d ζ/dx, by continuation from 0 along rays."""
    x = np.asarray(x, dtype=complex)
    flat = x.ravel()
    nodes = np.stack([np.zeros_like(flat), flat], axis=1)
    tr = trace(man, np.zeros(flat.size), nodes, substeps=substeps, frame=frame)
    zeta = tr.zeta[:, -1].reshape(x.shape)
    d = (1 / tr.dg[:, -1]).reshape(x.shape)
    return zeta, d, tr.ok.reshape(x.shape)


@dataclass
class KoebeReport:
    passed: bool
    violations: int
    containment_margin: float      # min over samples of r - max(|X|, |Y|)  (≥ 0 passes)
    inner_margin: float            # min |g(ζ)|/(|ζ|/4) - 1 on |ζ| ≤ r/8
    outer_margin: float            # min 4|ζ|/|g(ζ)| - 1
    growth_lower_slack: float      # min |G(t)| - t/(1+t)^2 for the normalized inverse chart
    growth_upper_slack: float      # min t/(1-t)^2 - |G(t)|
    details: list = field(default_factory=list)

    def to_dict(self):
        return {k: (v if not isinstance(v, float) else float(v)) for k, v in self.__dict__.items()}


def koebe_audit(man, r=None, n_ang=64, n_rad=16, n_circ=8, growth_radii=(0.1, 0.25, 0.5, 0.75, 0.9)):
    """Check ψ(D(0,r/4)) ⊂ D(0,r)² and D(0,|z|/4) ⊂ π∘ψ(D(0,|z|)) ⊂ D(0,4|z|) for |z| ≤ r/8.

    Also records the sharp growth bounds t/(1+t)² ≤ |G(x)| ≤ t/(1-t)², t = |x|,
    for G(x) = r⁻¹(π∘ψ)⁻¹(r x).
    """
    r = man.r_cert if r is None else r
    if not r > 0:
        raise ValueError("koebe_audit needs a certified size")
    details = []
    th = 2 * np.pi * np.arange(n_ang) / n_ang
    rad = (r / 4) * np.arange(1, n_rad + 1) / n_rad
    zeta = np.concatenate([[0j], (rad[:, None] * np.exp(1j * th)[None, :]).ravel()])
    g, h, _, _ = man.chart(zeta)
    m = np.maximum(np.abs(g), np.abs(h))
    cont_margin = float(np.min(r * (1 + 1e-9) - m))
    nv = int(np.sum(m > r * (1 + 1e-9)))
    if nv:
        details.append(f"{nv} samples of psi(D(0,r/4)) outside the bidisk")
    inner, outer = np.inf, np.inf
    for k in range(1, n_circ + 1):
        s = (r / 8) * k / n_circ
        gz = man.chart(s * np.exp(1j * th))[0]
        a = np.abs(gz)
        inner = min(inner, float(np.min(a / (s / 4))) - 1)
        outer = min(outer, float(np.min(4 * s / a)) - 1)
        bad = int(np.sum(a < s / 4 * (1 - 1e-9)) + np.sum(a > 4 * s * (1 + 1e-9)))
        if bad:
            nv += bad
            details.append(f"{bad} distortion violations on |z|={s:.6g}")
    lo_slack, hi_slack = np.inf, np.inf
    for t in growth_radii:
        x = r * t * np.exp(1j * th)
        z, _, ok = inverse_chart(man, x)
        if not ok.all():
            nv += 1
            details.append(f"inverse chart undecided at |x|={t * r:.6g}")
            continue
        G = np.abs(z) / r
        lo_slack = min(lo_slack, float(np.min(G - t / (1 + t) ** 2)))
        hi_slack = min(hi_slack, float(np.min(t / (1 - t) ** 2 - G)))
        bad = int(np.sum(G < t / (1 + t) ** 2 * (1 - 1e-9)) + np.sum(G > t / (1 - t) ** 2 * (1 + 1e-9)))
        if bad:
            nv += bad
            details.append(f"{bad} growth-bound violations at |x|={t * r:.6g}")
    return KoebeReport(nv == 0, nv, cont_margin, inner, outer, lo_slack, hi_slack, details)


@dataclass
class D12Report:
    passed: bool
    violations: int
    deriv_min: float
    deriv_max: float
    lower_bound: float
    upper_bound: float
    distance: float
    distance_bound: float


def d12_bounds(r1, r2):
    q = r1 / r2
    return (1 - q) / 16, 16 / (1 - q) ** 3, r2 * (1 - q) ** 2 / 32


def koebe_derivative_bounds(F, dF, r1, r2, n_ang=128, n_rad=16):
    """Check (1-r1/r2)/16 ≤ |F'| ≤ 16/(1-r1/r2)³ on |z| ≤ (r1+r2)/2 and dist(F(D1), ∂F(D2)).

    F is univalent on D(0, r2) with F(0) = 0, F'(0) = 1; F and dF act on arrays.
    """
    if not 0 < r1 < r2:
        raise ValueError("need 0 < r1 < r2")
    lo, hi, dist_bound = d12_bounds(r1, r2)
    r12 = (r1 + r2) / 2
    th = 2 * np.pi * (np.arange(n_ang) + 0.5) / n_ang
    rad = r12 * np.arange(0, n_rad + 1) / n_rad
    z = (rad[:, None] * np.exp(1j * th)[None, :]).ravel()
    d = np.abs(dF(z))
    nv = int(np.sum(d < lo) + np.sum(d > hi) + np.sum(~np.isfinite(d)))
    b1 = F(r1 * np.exp(1j * th))
    b2 = F(r2 * np.exp(1j * th))
    b2 = b2[np.isfinite(b2)]
    dist = float(np.min(np.abs(b1[:, None] - b2[None, :])))
    if not dist > dist_bound:
        nv += 1
    return D12Report(nv == 0, nv, float(np.min(d)), float(np.max(d)), lo, hi, dist, dist_bound)


def manifold_inverse_chart_maps(man, frame=None):
    """(F, dF) for F = (π∘ψ)⁻¹ of a manifold, for koebe_derivative_bounds."""
    def F(x):
        return inverse_chart(man, x, frame)[0]

    def dF(x):
        return inverse_chart(man, x, frame)[1]

    return F, dF


def mobius_univalent(a, b, scale=1.0):
    """Normalized composition of two disk automorphisms, scaled to D(0, scale).

    Returns (F, dF) with F(0) = 0, F'(0) = 1, univalent on D(0, scale).
    """
    def aut(c):
        return np.array([[1, c], [np.conj(c), 1]], dtype=complex)

    Mx = aut(a) @ aut(b)
    (A, B), (C, D) = Mx
    w0 = B / D
    d0 = (A * D - B * C) / D ** 2

    def F(z):
        u = z / scale
        return scale * ((A * u + B) / (C * u + D) - w0) / d0

    def dF(z):
        u = z / scale
        return (A * D - B * C) / (C * u + D) ** 2 / d0

    return F, dF


# ----------------------------------------------------------------------------
# area

def _polar_quad(integrand, radius, n_r=16, n_t=32, rtol=1e-10, max_level=8):
    """∫∫_{D(0,radius)} integrand, Gauss-Legendre in r and trapezoid in θ, doubling."""
    prev = None
    for level in range(max_level):
        xg, wg = np.polynomial.legendre.leggauss(n_r)
        rr = radius * (xg + 1) / 2
        wr = radius * wg / 2
        th = 2 * np.pi * np.arange(n_t) / n_t
        pts = rr[:, None] * np.exp(1j * th)[None, :]
        vals = integrand(pts)
        est = float(np.sum(wr[:, None] * rr[:, None] * vals) * (2 * np.pi / n_t))
        if prev is not None and abs(est - prev) <= rtol * max(abs(est), 1e-300):
            return est, abs(est - prev)
        prev = est
        n_r, n_t = 2 * n_r, 2 * n_t
    raise ArithmeticError(f"area quadrature did not converge (last estimate {prev})")


def area(man, region, rtol=None):
    """Area of ψ(region) counted with multiplicity, ∫∫ ‖ψ'‖².

    ``region`` is ("disk", ρ) for the parameter disk D(0, ρ), or ("graph", r)
    for the piece of the manifold that is a graph over D(0, r) in its tangent
    line (integrand 1 + |φ'(x)|² in the tangent coordinate).  Past ρ_cert the
    extension is continuous only up to the conjugacy residual, so rtol should
    not go far below the manifold tolerance.  Graph regions close to the
    certified size converge slowly (singularities of φ sit just outside).
    """
    kind, rad = region
    if kind == "disk":
        def integrand(z):
            _, dZ = man.evaluate(z)
            return np.abs(dZ[0]) ** 2 + np.abs(dZ[1]) ** 2
        return _polar_quad(integrand, rad, rtol=rtol or 1e-9)[0]
    if kind == "graph":
        def integrand(x):
            shp = x.shape
            nodes = np.concatenate([np.zeros((shp[1], 1)), x.T], axis=1)
            tr = trace(man, np.zeros(shp[1]), nodes, substeps=4)
            if not tr.ok.all():
                raise ArithmeticError("graph region leaves the evaluable domain")
            dphi = (tr.dh / tr.dg)[:, 1:].T
            return 1 + np.abs(dphi) ** 2
        return _polar_quad(integrand, rad, n_r=8, n_t=16, rtol=rtol or 1e-8, max_level=6)[0]
    raise ValueError("region must be ('disk', rho) or ('graph', r)")


# ----------------------------------------------------------------------------
# exports

def sample_curve_rows(man, zetas):
    Z, _ = man.evaluate(np.asarray(zetas, dtype=complex))
    return [(z.real, z.imag, a.real, a.imag, b.real, b.imag) for z, a, b in zip(zetas, Z[0], Z[1])]


# ----------------------------------------------------------------------------
# families: natural continuation and size persistence

@dataclass
class NaturalSample:
    lam: complex
    manifold: LocalManifold
    scale: complex               # t_λ with ψ_nat(w) = ψ̃(t_λ w)
    marked: np.ndarray           # intrinsic coordinates of extra marked points (h^u_λ samples)

    def evaluate(self, w):
        Z, dZ = self.manifold.evaluate(self.scale * np.asarray(w, dtype=complex))
        return Z, dZ * self.scale


def _newton_intersection(mu_man, ms_man, zeta, xi, iters=30, tol=1e-13):
    zeta = np.atleast_1d(np.asarray(zeta, dtype=complex)).copy()
    xi = np.atleast_1d(np.asarray(xi, dtype=complex)).copy()
    with np.errstate(all="ignore"):
        for _ in range(iters):
            U, dU = mu_man.evaluate(zeta, strict=False)
            S, dS = ms_man.evaluate(xi, strict=False)
            F0, F1 = U[0] - S[0], U[1] - S[1]
            det = dU[0] * (-dS[1]) - (-dS[0]) * dU[1]
            dz = -((-dS[1]) * F0 - (-dS[0]) * F1) / det
            dx = -(-dU[1] * F0 + dU[0] * F1) / det
            zeta += dz
            xi += dx
            if np.all(np.maximum(np.abs(dz), np.abs(dx)) < tol * (1 + np.abs(zeta) + np.abs(xi))):
                break
        U, dU = mu_man.evaluate(zeta, strict=False)
        S, dS = ms_man.evaluate(xi, strict=False)
    res = np.maximum(np.abs(U[0] - S[0]), np.abs(U[1] - S[1]))
    return zeta, xi, res, U, dU, dS


def natural_continuation(fam, man_u, man_s, marked, path, lam0=None, extra=(), order=DEFAULT_ORDER,
                         tol=DEFAULT_TOL, substeps=4):
    """Continue a saddle, its two manifolds and a homoclinic marked point along a path.

    ``marked`` is (ζ0, ξ0) with ψᵘ(ζ0) = ψˢ(ξ0) = q0.  At each path sample the
    unstable parameterization is rescaled so that q_λ has parameter 1.
    ``extra`` lists further (ζ, ξ) intersection pairs whose normalized
    parameters give samples of the intrinsic motion h^u_λ.
    Returns (samples, events).
    """
    path = [complex(l) for l in path]
    lam0 = path[0] if lam0 is None else complex(lam0)
    pairs = [tuple(marked)] + [tuple(e) for e in extra]
    zs = np.array([p[0] for p in pairs], dtype=complex)
    xs = np.array([p[1] for p in pairs], dtype=complex)
    n = man_u.period
    z = man_u.base.copy()
    cu, cs = man_u.c1, man_s.c1
    mu, ms = man_u, man_s
    samples, events = [], []
    prev_lam = lam0
    chain = [lam0] + path if path[0] != lam0 else path
    for k, lam in enumerate(chain):
        if k > 0:
            lams = [prev_lam + (lam - prev_lam) * (j + 1) / substeps for j in range(substeps)]
        else:
            lams = [lam]
        failed = False
        for lm in lams:
            f = instantiate(fam, lm)
            z, okp = continue_point(f, z, n, 1e-12)
            if not okp:
                events.append({"lambda": lm, "kind": "Newton failure"})
                failed = True
                break
            orb = make_orbit(f, z, n)
            if orb is None or orb.type != "saddle":
                events.append({"lambda": lm, "kind": "unit-circle crossing"})
                failed = True
                break
            idx = int(np.argmin(np.max(np.abs(orb.points - z[None]), axis=1)))
            mu = parameterize(f, orb, "unstable", order, tol, idx, c1_hint=cu)
            ms = parameterize(f, orb, "stable", order, tol, idx, c1_hint=cs)
            # keep ζ-coordinates continuous: align eigen-directions with the previous step
            cu, cs = mu.c1, ms.c1
            zs, xs, res, _, _, _ = _newton_intersection(mu, ms, zs, xs)
            if not np.all(res < 1e-9):
                events.append({"lambda": lm, "kind": "Newton failure", "detail": "marked point"})
                failed = True
                break
        if failed:
            break
        prev_lam = lam
        if k == 0 and chain is not path:
            continue
        t = zs[0]
        samples.append(NaturalSample(lam, mu, t, zs / t))
    return samples, events


def uniform_bound(samples, c, r0, n=64):
    """max over samples of ‖ψ_nat(w)‖ on |w| = c r0 (the sup over the disk by the maximum principle)."""
    w = c * r0 * np.exp(2j * np.pi * np.arange(n) / n)
    best = 0.0
    for smp in samples:
        Z, _ = smp.evaluate(w)
        best = max(best, float(np.max(np.maximum(np.abs(Z[0]), np.abs(Z[1])))))
    return best


@dataclass
class PersistenceResult:
    delta: float
    r1: float
    r2: float
    samples: list                 # (λ, certified, tangent drift angle)


def line_angle(v, w):
    """Angle in [0, π/2] between the complex lines spanned by v and w."""
    c = abs(np.vdot(v, w)) / (np.linalg.norm(v) * np.linalg.norm(w))
    return float(np.arccos(min(1.0, c)))


def size_persistence_scan(fam, orbit, lam0, r1, r2=None, branch="unstable", n_circle=8, iters=8,
                          order=DEFAULT_ORDER, point_index=0, n_ang=64, n_rad=128):
    """Largest δ (by bisection) such that size r1 is certified on sampled circles |λ-λ0| = δ."""
    lam0 = complex(lam0)
    f0 = instantiate(fam, lam0)
    m0 = parameterize(f0, orbit, branch, order, point_index=point_index)
    if r2 is not None and not certify_size(m0, r2, n_ang, n_rad).certified:
        raise ValueError("size r2 is not certified at λ0")
    if r2 is not None and not r1 < r2:
        raise ValueError("need r1 < r2")
    p0 = np.roll(orbit.points, -point_index, axis=0)[0]
    dmax = fam.radius - abs(lam0 - fam.center)
    log = []

    def passes(delta):
        ok = True
        for j in range(n_circle):
            lam = lam0 + delta * np.exp(2j * np.pi * j / n_circle)
            z = p0.copy()
            good = True
            for s in np.linspace(0, 1, 9)[1:]:
                z, good = continue_point(instantiate(fam, lam0 + s * (lam - lam0)), z, orbit.period, 1e-12)
                if not good:
                    break
            cert, drift = False, np.nan
            if good:
                f = instantiate(fam, lam)
                orb = make_orbit(f, z, orbit.period)
                if orb is not None and orb.type == "saddle":
                    idx = int(np.argmin(np.max(np.abs(orb.points - z[None]), axis=1)))
                    m = parameterize(f, orb, branch, order, point_index=idx)
                    cert = certify_size(m, r1, n_ang, n_rad, keep_samples=False).certified
                    drift = line_angle(m.c1, m0.c1)
            log.append((lam, cert, drift))
            ok &= cert
            if not ok:
                break
        return ok

    if dmax <= 0:
        return PersistenceResult(0.0, r1, r2, log)
    if passes(dmax):
        return PersistenceResult(dmax, r1, r2, log)
    lo, hi = 0.0, dmax
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if passes(mid):
            lo = mid
        else:
            hi = mid
    return PersistenceResult(lo, r1, r2, log)
