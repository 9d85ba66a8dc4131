"""Continuation of periodic orbits over a parameter, unit-circle crossings and scans."""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .core import instantiate
from .green import green_plus
from .periodic import EPS_UNIT, census, classify, multipliers

BISECT_TOL = 1e-8
DELTA_COLLIDE = 1e-7


@dataclass
class ContinuationOptions:
    tol: float = 1e-10
    max_newton: int = 12
    easy_iters: int = 3
    easy_steps: int = 3
    h_min: float = 1e-10
    bisect_tol: float = BISECT_TOL
    eps_unit: float = EPS_UNIT
    jump: float = 0.1


@dataclass
class ParamPath:
    """Polyline of parameter values; the track samples are its vertices."""
    points: list

    def __post_init__(self):
        self.points = [complex(p) for p in self.points]
        if len(self.points) < 1:
            raise ValueError("empty path")

    @classmethod
    def segment(cls, a, b, n):
        return cls(list(np.linspace(complex(a), complex(b), int(n) + 1)))

    def at(self, sigma):
        """Point at polyline parameter sigma in [0, len-1]."""
        k = min(int(np.floor(sigma)), len(self.points) - 2)
        t = sigma - k
        return self.points[k] + t * (self.points[k + 1] - self.points[k])


@dataclass
class MotionTrack:
    kind: str                                # "orbit" or "point"
    period: int
    lams: list = field(default_factory=list)
    points: list = field(default_factory=list)   # (n, 2) arrays, one per sample
    mults: list = field(default_factory=list)    # (u, s) per sample
    types: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    events: list = field(default_factory=list)
    truncated: bool = False

    def snapshots(self):
        pr = lambda c: [float(np.real(c)), float(np.imag(c))]
        out = []
        for k, lam in enumerate(self.lams):
            u, s = self.mults[k] if self.mults else (np.nan, np.nan)
            out.append({
                "lambda": pr(lam),
                "points": [pr(p[0]) + pr(p[1]) for p in self.points[k]],
                "u": pr(u), "s": pr(s),
                "type": self.types[k] if self.types else None,
                "residual": float(self.residuals[k]) if self.residuals else None,
            })
        return out

    def to_jsonl(self):
        lines = [json.dumps(s, sort_keys=True) for s in self.snapshots()]
        lines += [json.dumps({"event": _event_json(e)}, sort_keys=True) for e in self.events]
        return "\n".join(lines) + "\n"


def _jsonable(v):
    if isinstance(v, complex):
        return [float(v.real), float(v.imag)]
    if isinstance(v, (np.floating, np.integer)):
        return v.item()
    if isinstance(v, (list, tuple)):
        return [_jsonable(w) for w in v]
    return v


def _event_json(e):
    return {k: _jsonable(v) for k, v in e.items()}


def newton_point(f, z, n, tol=1e-12, max_iter=12):
    """Newton on f^n(z) - z from z. Returns (z, converged, iterations)."""
    coeffs, offsets, degs, avals = f.packed
    z = np.array(z, dtype=complex)
    with np.errstate(all="ignore"):
        for it in range(1, max_iter + 1):
            X, Y, J = kernels.orbit_jacobian(coeffs, offsets, degs, avals, z[0:1], z[1:2], n)
            F = np.array([X[0] - z[0], Y[0] - z[1]])
            A = J[0] - np.eye(2)
            try:
                d = np.linalg.solve(A, -F)
            except np.linalg.LinAlgError:
                return z, False, it
            if not np.all(np.isfinite(d)):
                return z, False, it
            z = z + d
            if np.max(np.abs(d)) <= tol * (1 + np.max(np.abs(z))):
                X, Y, _ = kernels.orbit_jacobian(coeffs, offsets, degs, avals, z[0:1], z[1:2], n)
                res = max(abs(X[0] - z[0]), abs(Y[0] - z[1]))
                return z, bool(res < 1e-8 * (1 + np.max(np.abs(z)))), it
    return z, False, max_iter


def continue_point(f, z, n, tol=1e-12):
    z, ok, _ = newton_point(f, z, n, tol)
    return z, ok


def _orbit_points(f, z, n):
    pts = [np.asarray(z, dtype=complex)]
    coeffs, offsets, degs, avals = f.packed
    for _ in range(n - 1):
        X, Y, _ = kernels.orbit_jacobian(coeffs, offsets, degs, avals, pts[-1][0:1], pts[-1][1:2], 1)
        pts.append(np.array([X[0], Y[0]]))
    return np.array(pts)


def _moduli(f, z, n):
    u, s, _, _ = multipliers(f, _orbit_points(f, z, n), with_vectors=False)
    return u, s


def _tangent(fam, lam, z, n, eps=1e-6):
    """dz/dλ of the periodic point z at λ, from (Df^n - I) dz = -∂_λ f^n."""
    f = instantiate(fam, lam, check_domain=False)
    _, _, J = kernels.orbit_jacobian(*f.packed, z[0:1], z[1:2], n)
    Xp, Yp, _ = kernels.orbit_jacobian(*instantiate(fam, lam + eps, check_domain=False).packed, z[0:1], z[1:2], n)
    Xm, Ym, _ = kernels.orbit_jacobian(*instantiate(fam, lam - eps, check_domain=False).packed, z[0:1], z[1:2], n)
    dl = np.array([Xp[0] - Xm[0], Yp[0] - Ym[0]]) / (2 * eps)
    with np.errstate(all="ignore"):
        try:
            t = np.linalg.solve(J[0] - np.eye(2), -dl)
        except np.linalg.LinAlgError:
            return np.zeros(2, dtype=complex)
    return t if np.all(np.isfinite(t)) else np.zeros(2, dtype=complex)


def _side(m, eps):
    return 0 if abs(abs(m) - 1) <= eps else (1 if abs(m) > 1 else -1)


def continue_orbit(fam, orbit, path, opts=None, point_index=0):
    """Predictor-corrector continuation of a periodic orbit along a ParamPath.

    The predictor follows the tangent dz/dλ.  The step starts at one path
    segment and is halved on Newton failure or when the corrector moves the
    point by more than a quarter of the predicted displacement; after
    ``easy_steps`` consecutive steps converging in at most ``easy_iters``
    iterations it is doubled again.  A change of side
    of |u| or |s| with respect to the unit circle is located by bisection.
    """
    opts = opts or ContinuationOptions()
    if not isinstance(path, ParamPath):
        path = ParamPath(list(path))
    n = orbit.period
    z = np.roll(np.asarray(orbit.points, dtype=complex), -point_index, axis=0)[0].copy()
    track = MotionTrack("orbit", n)
    pts = path.points

    def record(lam, f, z):
        P = _orbit_points(f, z, n)
        u, s, _, _ = multipliers(f, P, with_vectors=False)
        track.lams.append(lam)
        track.points.append(P)
        track.mults.append((u, s))
        track.types.append(classify((u, s), opts.eps_unit))
        X, Y, _ = kernels.orbit_jacobian(*f.packed, z[0:1], z[1:2], n)
        track.residuals.append(float(max(abs(X[0] - z[0]), abs(Y[0] - z[1]))))

    if not fam.in_domain(pts[0]):
        raise ValueError("path starts outside the family domain")
    f0 = instantiate(fam, pts[0])
    z, ok, _ = newton_point(f0, z, n, opts.tol)
    if not ok:
        raise ValueError("orbit does not converge at the path start")
    record(pts[0], f0, z)
    u0, s0 = track.mults[0]
    sides = [_side(u0, opts.eps_unit), _side(s0, opts.eps_unit)]
    definite = [(0.0, z.copy(), sides[0]) if sides[0] else None,
                (0.0, z.copy(), sides[1]) if sides[1] else None]
    visited_band = [sides[0] == 0, sides[1] == 0]
    sigma = 0.0
    h, easy = 1.0, 0
    nseg = len(pts) - 1
    while sigma < nseg - 1e-15:
        target = min(sigma + h, np.floor(sigma + 1e-12) + 1.0)
        lam = path.at(target)
        if not fam.in_domain(lam):
            track.events.append({"lambda": lam, "kind": "leaves domain"})
            track.truncated = True
            break
        f = instantiate(fam, lam)
        zp = z + _tangent(fam, path.at(sigma), z, n) * (lam - path.at(sigma))
        znew, ok, its = newton_point(f, zp, n, opts.tol, opts.max_newton)
        if ok:
            # the corrector must stay small next to the predicted move, or Newton
            # may have been captured by a neighbouring orbit
            corr = np.max(np.abs(znew - zp))
            scale = 1 + np.max(np.abs(zp))
            ok = corr <= opts.jump * scale and corr <= 0.25 * np.max(np.abs(zp - z)) + 1e-9 * scale
        if not ok:
            h /= 2
            easy = 0
            if h < opts.h_min:
                track.events.append({"lambda": lam, "kind": "Newton failure",
                                     "detail": "step underflow"})
                track.truncated = True
                break
            continue
        sigma, z = target, znew
        easy = easy + 1 if its <= opts.easy_iters else 0
        if easy >= opts.easy_steps:
            h, easy = min(2 * h, 1.0), 0
        u, s = _moduli(f, z, n)
        for slot, m in enumerate((u, s)):
            sd = _side(m, opts.eps_unit)
            if sd == 0:
                visited_band[slot] = True
                continue
            last = definite[slot]
            if last is not None and sd != last[2]:
                ev = _bisect_crossing(fam, path, n, last[0], last[1], sigma, z, slot, opts)
                track.events.append(ev)
            elif last is not None and visited_band[slot]:
                track.events.append({"lambda": lam, "kind": "indeterminate crossing",
                                     "slot": "u" if slot == 0 else "s"})
            definite[slot] = (sigma, z.copy(), sd)
            visited_band[slot] = False
        if abs(sigma - round(sigma)) < 1e-12:
            record(pts[int(round(sigma))], f, z)
    return track


def _bisect_crossing(fam, path, n, sa, za, sb, zb, slot, opts):
    """Bisect |m(σ)| - 1 between definite sides; endpoints refined by Newton."""
    def mod(sig, zg):
        f = instantiate(fam, path.at(sig))
        z, ok, _ = newton_point(f, zg, n, opts.tol)
        if not ok:
            return None, zg
        return abs(_moduli(f, z, n)[slot]) - 1, z

    fa = mod(sa, za)[0]
    lam_a, lam_b = path.at(sa), path.at(sb)
    while abs(path.at(sb) - path.at(sa)) > opts.bisect_tol:
        sm = 0.5 * (sa + sb)
        zg = za + (zb - za) * 0.5
        fm, zm = mod(sm, zg)
        if fm is None:
            return {"lambda": path.at(sm), "kind": "indeterminate crossing",
                    "slot": "u" if slot == 0 else "s", "detail": "Newton failure in bisection"}
        if (fm > 0) == (fa > 0):
            sa, za, fa = sm, zm, fm
        else:
            sb, zb = sm, zm
    lam = 0.5 * (path.at(sa) + path.at(sb))
    return {"lambda": lam, "kind": "unit-circle crossing", "slot": "u" if slot == 0 else "s",
            "bracket": [lam_a, lam_b], "width": abs(path.at(sb) - path.at(sa))}


# ----------------------------------------------------------------------------

@dataclass
class ScanCell:
    lam: complex
    verdict: str                  # crossing | continuation failure | no crossing observed
    n_orbits: int
    min_multiplier_gap: float

    def to_row(self):
        return [self.lam.real, self.lam.imag, self.verdict, self.n_orbits, self.min_multiplier_gap]


VERDICT_CODE = {"no crossing observed": 0, "crossing": 1, "continuation failure": 2}
PALETTE = {0: (40, 120, 200), 1: (220, 60, 40), 2: (130, 130, 130)}


def stability_scan(fam, grid, period_max, eps_unit=EPS_UNIT, newton_opts=None):
    """Per-cell verdict from continuing every orbit of period ≤ period_max to the neighbours.

    ``grid`` is a 2D array of parameter values; a crossing verdict means some
    orbit changed side of the unit circle on the way to an adjacent centre.
    """
    if period_max < 1:
        raise ValueError("nothing to track: period_max must be at least 1")
    grid = np.asarray(grid, dtype=complex)
    if grid.ndim != 2:
        raise ValueError("grid must be two dimensional")
    ny, nx = grid.shape
    opts = ContinuationOptions(eps_unit=eps_unit)
    cells = np.empty((ny, nx), dtype=object)
    for i in range(ny):
        for j in range(nx):
            lam = grid[i, j]
            f = instantiate(fam, lam)
            db = census(f, period_max, newton_opts, eps_unit)
            orbits = db.orbits
            gap = min([min(abs(abs(o.u) - 1), abs(abs(o.s) - 1)) for o in orbits], default=np.inf)
            verdict = "no crossing observed"
            for di, dj in ((0, 1), (1, 0), (0, -1), (-1, 0)):
                a, b = i + di, j + dj
                if not (0 <= a < ny and 0 <= b < nx):
                    continue
                for o in orbits:
                    try:
                        tr = continue_orbit(fam, o, ParamPath([lam, grid[a, b]]), opts)
                    except ValueError:
                        verdict = "continuation failure"
                        continue
                    kinds = {e["kind"] for e in tr.events}
                    if "unit-circle crossing" in kinds or "indeterminate crossing" in kinds \
                            or (len(tr.types) == 2 and tr.types[0] != tr.types[1]):
                        verdict = "crossing"
                    elif tr.truncated and verdict != "crossing":
                        verdict = "continuation failure"
            cells[i, j] = ScanCell(complex(lam), verdict, len(orbits), float(gap))
    return cells


def scan_csv_rows(cells):
    rows = [["lambda_re", "lambda_im", "verdict", "n_orbits", "min_multiplier_gap"]]
    for c in cells.ravel():
        rows.append(c.to_row())
    return rows


def scan_ppm(cells, scale=8):
    """Binary P6 image, one colour per verdict, rows top to bottom."""
    ny, nx = cells.shape
    img = np.zeros((ny * scale, nx * scale, 3), dtype=np.uint8)
    for i in range(ny):
        for j in range(nx):
            img[(ny - 1 - i) * scale:(ny - i) * scale, j * scale:(j + 1) * scale] = \
                PALETTE[VERDICT_CODE[cells[i, j].verdict]]
    return b"P6\n%d %d\n255\n" % (nx * scale, ny * scale) + img.tobytes()


# ----------------------------------------------------------------------------

@dataclass
class CollisionReport:
    collided: bool
    min_distance: float
    lam: complex
    pair: tuple
    delta: float


def collision_check(tracks, delta=DELTA_COLLIDE):
    """Minimum pairwise distance (max norm) between points of distinct tracks at each sample."""
    if len(tracks) < 2:
        raise ValueError("need at least two tracks")
    ns = min(len(t.lams) for t in tracks)
    best = (np.inf, None, None)
    for k in range(ns):
        for a in range(len(tracks)):
            for b in range(a + 1, len(tracks)):
                A = np.asarray(tracks[a].points[k]).reshape(-1, 2)
                B = np.asarray(tracks[b].points[k]).reshape(-1, 2)
                d = np.max(np.abs(A[:, None, :] - B[None, :, :]), axis=2).min()
                if d < best[0]:
                    best = (float(d), tracks[a].lams[k], (a, b))
    return CollisionReport(best[0] < delta, best[0], best[1], best[2], delta)


def harnack_constant(rho):
    """C(ρ) = (1+ρ)/(1-ρ) for positive harmonic functions on the unit disk, |λ| ≤ ρ."""
    if not 0 <= rho < 1:
        raise ValueError("rho must lie in [0, 1)")
    return (1 + rho) / (1 - rho)


@dataclass
class DistortionReport:
    status: str          # ok | vacuous
    ratio: float         # max over samples of max(G/G0, G0/G)
    values: list


def motion_green_distortion(fam, track, base_index=0, tol=1e-12, max_iter=400):
    """G⁺_λ along a tracked point, compared with its value at the base sample."""
    vals = []
    for lam, P in zip(track.lams, track.points):
        f = instantiate(fam, lam)
        gv = green_plus(f, np.asarray(P).reshape(-1, 2)[0], tol, max_iter)
        vals.append((gv.value, gv.status))
    g0, st0 = vals[base_index]
    if st0 != "converged" or g0 <= 0:
        return DistortionReport("vacuous", np.nan, vals)
    ratios = []
    for g, st in vals:
        if st != "converged" or g <= 0:
            return DistortionReport("vacuous", np.nan, vals)
        ratios.append(max(g / g0, g0 / g))
    return DistortionReport("ok", float(max(ratios)), vals)


def point_track(lams, points, kind="point"):
    """Wrap a sampled motion (one point per λ) as a MotionTrack."""
    tr = MotionTrack(kind, 1)
    tr.lams = [complex(l) for l in lams]
    tr.points = [np.asarray(p, dtype=complex).reshape(1, 2) for p in points]
    return tr
