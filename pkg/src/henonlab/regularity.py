"""Homoclinic intersections, exposure, regular-point certificates and hyperbolicity audits."""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import directed_hausdorff

from . import manifolds as mf
from .green import escape_radius, green_minus, green_plus
from .periodic import census

SCHEMA_VERSION = 1
THETA_TANGENT = 1e-3
DELTA_DISTINCT = 1e-6
EPS_EXPOSED = 1e-8


def _pr(c):
    return [float(np.real(c)), float(np.imag(c))]


def _pt(z):
    return _pr(z[0]) + _pr(z[1])


@dataclass
class IntersectionPoint:
    p_id: str
    q_id: str
    zeta: complex
    xi: complex
    point: np.ndarray
    angle: float
    residual: float
    tangency: bool

    def to_dict(self):
        return {"p": self.p_id, "q": self.q_id, "zeta": _pr(self.zeta), "xi": _pr(self.xi),
                "point": _pt(self.point), "angle": self.angle, "residual": self.residual,
                "tangency": self.tangency}


def _extent(man):
    """ζ-radius covering the certified local graph (ρ_cert if none)."""
    if man.certificate is None and man.r_cert == 0:
        mf.find_size(man)
    c = man.certificate
    if c is not None and c.zeta is not None:
        return float(np.nanmax(np.abs(c.zeta[:, -1])))
    return float(man.rho_cert)


def _disk_grid(radius, n):
    g = np.linspace(-radius, radius, n)
    Z = (g[:, None] + 1j * g[None, :]).ravel()
    return Z[np.abs(Z) <= radius]


def _as4(P):
    return np.stack([P[0].real, P[0].imag, P[1].real, P[1].imag], axis=1)


def find_intersections(f, man_u, man_s, zeta_radius=None, xi_radius=None, n_grid=120,
                       max_candidates=400, tol=1e-10, theta_tangent=THETA_TANGENT):
    """Grid-seeded Newton for ψᵘ(ζ) = ψˢ(ξ).

    The default search regions are one fundamental domain past the certified
    unstable graph (|μᵤ| times its ζ-extent) and the certified stable graph.
    """
    if man_u.branch != "unstable" or man_s.branch != "stable":
        raise ValueError("need an unstable and a stable manifold")
    Zu = abs(man_u.mu) * _extent(man_u) if zeta_radius is None else zeta_radius
    Zs = _extent(man_s) if xi_radius is None else xi_radius
    zg, xg = _disk_grid(Zu, n_grid), _disk_grid(Zs, n_grid)
    with np.errstate(all="ignore"):
        U, _ = man_u.evaluate(zg, strict=False)
        S, _ = man_s.evaluate(xg, strict=False)
    U4, S4 = _as4(U), _as4(S)
    # intersections lie in K, inside the filtration box
    box = 2 * escape_radius(f)
    okU = np.all(np.isfinite(U4), axis=1) & (np.max(np.abs(U4), axis=1) <= box)
    okS = np.all(np.isfinite(S4), axis=1) & (np.max(np.abs(S4), axis=1) <= box)
    if not okU.any() or not okS.any():
        return []
    zg, U4 = zg[okU], U4[okU]
    xg, S4 = xg[okS], S4[okS]
    d, j = cKDTree(S4).query(U4, distance_upper_bound=box)
    j = np.minimum(j, len(xg) - 1)
    cand = np.argsort(d, kind="stable")[:max_candidates]
    cand = cand[np.isfinite(d[cand])]
    zz, xx, res, Pu, dU, dS = mf._newton_intersection(man_u, man_s, zg[cand], xg[j[cand]])
    same = man_u.orbit_id == man_s.orbit_id and np.allclose(man_u.base, man_s.base)
    good = np.isfinite(res) & (res < tol)
    if same:
        good &= ~((np.abs(zz) < 1e-8) & (np.abs(xx) < 1e-8))
    out = []
    for k in np.nonzero(good)[0]:
        dup = False
        for ip in out:
            if abs(ip.zeta - zz[k]) <= 1e-7 * (1 + abs(zz[k])) and abs(ip.xi - xx[k]) <= 1e-7 * (1 + abs(xx[k])):
                dup = True
                break
        if dup:
            continue
        a = mf.line_angle(dU[:, k], dS[:, k])
        out.append(IntersectionPoint(man_u.orbit_id, man_s.orbit_id, complex(zz[k]), complex(xx[k]),
                                     Pu[:, k].copy(), a, float(res[k]), a < theta_tangent))
    out.sort(key=lambda ip: (abs(ip.zeta), ip.zeta.real, ip.zeta.imag))
    return out


def equivariant_image(ip, man_u, man_s, tol=1e-10):
    """Re-converge (μᵤζ, μₛξ) to an intersection; None if Newton fails."""
    zz, xx, res, Pu, dU, dS = mf._newton_intersection(man_u, man_s, man_u.mu * ip.zeta, man_s.mu * ip.xi)
    if not res[0] < tol:
        return None
    a = mf.line_angle(dU[:, 0], dS[:, 0])
    return IntersectionPoint(ip.p_id, ip.q_id, complex(zz[0]), complex(xx[0]), Pu[:, 0].copy(), a,
                             float(res[0]), a < THETA_TANGENT)


# ----------------------------------------------------------------------------

@dataclass
class ExposureResult:
    value: float
    exposed: bool
    status: str           # decided | undecided
    n_samples: int


def _graph_points(man, radius, n_ang=32, n_rad=16):
    nodes = mf._polar_nodes(radius, n_ang, n_rad)
    tr = mf.trace(man, np.zeros(n_ang), nodes)
    Z, _ = man.evaluate(tr.zeta[tr.ok].ravel(), strict=False)
    return Z[:, np.all(np.isfinite(Z), axis=0)]


def exposure(f, man, region=None, eps=EPS_EXPOSED, n_ang=32, n_rad=8, max_level=3):
    """max of the opposite Green function on ψ(region), refined until it stabilizes.

    ``region`` is ("disk", ρ) in the parameter or ("graph", r) over the
    tangent disk; the default is the certified graph when there is one.
    """
    if region is None:
        region = ("graph", man.r_cert) if man.r_cert > 0 else ("disk", man.rho_cert)
    kind, rad = region
    green = green_plus if man.branch == "unstable" else green_minus
    best, total, decided = 0.0, 0, False
    for level in range(max_level):
        if kind == "disk":
            th = 2 * np.pi * np.arange(n_ang) / n_ang
            z = (rad * np.arange(1, n_rad + 1)[:, None] / n_rad * np.exp(1j * th)[None, :]).ravel()
            Z, _ = man.evaluate(np.concatenate([[0j], z]))
        else:
            Z = _graph_points(man, rad, n_ang, n_rad)
        val, _, st = green(f, Z)
        total += val.size
        decided |= bool(np.any(st != 2))
        new = float(np.max(val, initial=0.0))
        if level and abs(new - best) <= 1e-3 * max(best, 1e-300):
            best = max(best, new)
            break
        best = max(best, new)
        n_ang, n_rad = 2 * n_ang, 2 * n_rad
    if not decided:
        return ExposureResult(best, False, "undecided", total)
    return ExposureResult(best, best > eps, "decided", total)


# ----------------------------------------------------------------------------

class ManifoldCache:
    """Parameterizations and size checks per (orbit id, point index, branch)."""

    def __init__(self, f, order=mf.DEFAULT_ORDER):
        self.f, self.order = f, order
        self._m, self._sizes = {}, {}

    def get(self, orbit, index, branch):
        key = (orbit.id, index, branch)
        if key not in self._m:
            self._m[key] = mf.parameterize(self.f, orbit, branch, self.order, point_index=index)
        return self._m[key]

    def has_size(self, orbit, index, branch, r):
        key = (orbit.id, index, branch, float(r))
        if key not in self._sizes:
            m = self.get(orbit, index, branch)
            self._sizes[key] = mf.certify_size(m, r).certified
        return self._sizes[key]


@dataclass
class RegularityCertificate:
    point: np.ndarray
    direction: str
    r: float
    witnesses: list             # (orbit id, point index, distance, r)
    exposure: float
    transverse: bool = None
    angle: float = None
    hausdorff: float = None

    def to_dict(self):
        return {"schema_version": SCHEMA_VERSION, "point": _pt(self.point), "direction": self.direction,
                "r": self.r, "witnesses": [list(w) for w in self.witnesses], "exposure": self.exposure,
                "transverse": self.transverse, "angle": self.angle, "hausdorff": self.hausdorff}


class RegularityFailure(ValueError):
    pass


def _branches(direction):
    return {"u": ("unstable",), "s": ("stable",), "both": ("unstable", "stable")}[direction]


def certify_regular(f, p, db, r, k=3, direction="u", cache=None, tries=8,
                    delta_distinct=DELTA_DISTINCT):
    """Witness saddles in shells |q - p| ≤ r 2^-j, j = 1..k, halving each time, with sizes ≥ r."""
    if direction not in ("u", "s", "both"):
        raise ValueError("direction must be u, s or both")
    cache = cache or ManifoldCache(f)
    p = np.asarray(p, dtype=complex)
    cands = []
    for o in db.saddles():
        for i, q in enumerate(o.points):
            cands.append((float(np.linalg.norm(q - p)), o, i))
    cands.sort(key=lambda t: (t[0], t[1].id, t[2]))
    sized = lambda o, i: all(cache.has_size(o, i, br, r) for br in _branches(direction))
    witnesses = []
    if cands and cands[0][0] < 1e-12:
        d, o, i = cands[0]
        if not sized(o, i):
            raise RegularityFailure("saddle at p lacks size r")
        witnesses = [(o.id, i, 0.0, r)]
    else:
        prev = np.inf
        for j in range(1, k + 1):
            bound = min(r * 2.0 ** -j, prev / 2)
            pool = [c for c in cands if c[0] <= bound][::-1][:tries]
            pick = next(((d, o, i) for d, o, i in pool if sized(o, i)), None)
            if pick is None:
                raise RegularityFailure(f"no witness in shell {j} (radius {bound:.6g})")
            d, o, i = pick
            witnesses.append((o.id, i, d, r))
            prev = d
    last_o = next(o for o in db.orbits if o.id == witnesses[-1][0])
    last_i = witnesses[-1][1]
    g = []
    for br in _branches(direction):
        m = cache.get(last_o, last_i, br)
        m.r_cert = max(m.r_cert, r)
        g.append(exposure(f, m, ("graph", r)).value)
    cert = RegularityCertificate(p, direction, r, witnesses, float(min(g)))
    if direction == "both":
        mu = cache.get(last_o, last_i, "unstable")
        ms = cache.get(last_o, last_i, "stable")
        A, B = _graph_points(mu, r / 2), _graph_points(ms, r / 2)
        h = max(directed_hausdorff(_as4(A), _as4(B))[0], directed_hausdorff(_as4(B), _as4(A))[0])
        cert.hausdorff = float(h)
        cert.angle = mf.line_angle(mu.c1, ms.c1)
        if not h > delta_distinct:
            raise RegularityFailure("limit local manifolds coincide")
        cert.transverse = cert.angle > THETA_TANGENT
    return cert


# ----------------------------------------------------------------------------

@dataclass
class ConvergenceReport:
    distances: list
    monotone: bool
    single_valued: list

    @property
    def multiplicity_one(self):
        return all(self.single_valued)


def _graph_over(man, frame, radius, n_ang, n_rad):
    """Graph values of man over the disk D(0, radius) of a foreign frame; None entries if it fails."""
    base, e1, e2 = frame
    Z0, _ = man.evaluate(np.zeros(1))
    x0 = np.conj(e1) @ (Z0[:, 0] - base)
    if not abs(x0) < radius:
        raise ValueError("scale too large: witness base projects outside the common disk")
    nodes = mf._polar_nodes(radius, n_ang, n_rad)
    nodes = np.concatenate([np.full((n_ang, 1), x0), nodes], axis=1)
    tr = mf.trace(man, np.zeros(n_ang), nodes, frame=frame)
    ok = bool(tr.ok.all())
    if ok:
        ok = mf._closure_ok(man, tr.zeta[:, -1], radius, n_ang, frame=frame)
    return tr.h[:, 1:], ok


def convergence_check(witnesses, limit, radius, n_ang=32, n_rad=32):
    """Sup distance between each witness graph and the limit graph over D(0, radius)."""
    frame = (limit.base, *limit.frame)
    hL, okL = _graph_over(limit, frame, radius, n_ang, n_rad)
    if not okL:
        raise ValueError("scale too large: limit is not a graph over the common disk")
    dists, single = [], []
    for w in witnesses:
        h, ok = _graph_over(w, frame, radius, n_ang, n_rad)
        single.append(ok)
        dists.append(float(np.max(np.abs(h - hL))) if ok else float("nan"))
    mono = all(np.isfinite(dists)) and all(b <= a + 1e-15 for a, b in zip(dists, dists[1:]))
    return ConvergenceReport(dists, bool(mono), single)


# ----------------------------------------------------------------------------

@dataclass
class SaddleAudit:
    orbit_id: str
    period: int
    size_u: float
    size_s: float
    angle: float
    homoclinic_angles: list
    passed: bool
    reasons: list = field(default_factory=list)


@dataclass
class UniformReport:
    passed: bool
    N: int
    r: float
    theta_min: float
    min_size: float
    min_angle: float
    saddles: list

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def uniform_regularity_audit(f, N, r, theta_min, db=None, homoclinic=True, cache=None):
    """Sizes ≥ r for both manifolds, E^u/E^s angle ≥ θ_min and homoclinic angles ≥ θ_min."""
    if N < 1:
        raise ValueError("nothing to audit: period bound must be at least 1")
    db = census(f, N) if db is None else db
    orbits = list(db.orbits)
    if not orbits:
        raise ValueError("nothing to audit: empty census")
    cache = cache or ManifoldCache(f)
    out = []
    for o in orbits:
        if o.type != "saddle":
            out.append(SaddleAudit(o.id, o.period, 0.0, 0.0, 0.0, [], False, [f"orbit is {o.type}"]))
            continue
        mu, ms = cache.get(o, 0, "unstable"), cache.get(o, 0, "stable")
        su, ss = mf.find_size(mu), mf.find_size(ms)
        ang = mf.line_angle(mu.c1, ms.c1)
        reasons = []
        if su < r:
            reasons.append(f"unstable size {su:.6g} < r")
        if ss < r:
            reasons.append(f"stable size {ss:.6g} < r")
        if ang < theta_min:
            reasons.append(f"E^u/E^s angle {ang:.6g} < theta_min")
        hang = []
        if homoclinic:
            hang = [ip.angle for ip in find_intersections(f, mu, ms)]
            if hang and min(hang) < theta_min:
                reasons.append(f"homoclinic angle {min(hang):.6g} < theta_min")
        out.append(SaddleAudit(o.id, o.period, su, ss, ang, hang, not reasons, reasons))
    sizes = [min(a.size_u, a.size_s) for a in out]
    angles = [min([a.angle] + list(a.homoclinic_angles)) for a in out]
    return UniformReport(all(a.passed for a in out), int(N), float(r), float(theta_min),
                         float(min(sizes)), float(min(angles)), out)


# ----------------------------------------------------------------------------

@dataclass
class QEEntry:
    orbit_id: str
    branch: str
    embedded: bool
    area: float
    sup_green: float
    passed: bool


@dataclass
class QEReport:
    passed: bool
    r: float
    delta: float
    eta: float
    A: float
    entries: list
    suggested: dict
    failures: list

    def to_dict(self):
        d = asdict(self)
        d["schema_version"] = SCHEMA_VERSION
        return d

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def qe_audit(f, saddles, r, delta, eta, A, cache=None, n_ang=32, n_rad=16):
    """Quasi-expansion (unstable branches, G⁺) and quasi-contraction (stable branches, G⁻).

    Per saddle: W_r is a single-valued graph in the bidisk, area(W_r) ≤ A and
    the sampled sup of the opposite Green function on W_δ is ≥ η.  The
    suggested constants are (r, δ, η/2-of-minimum, 2×maximum area) from this run.
    """
    cache = cache or ManifoldCache(f)
    orbits = list(saddles.saddles() if hasattr(saddles, "saddles") else saddles)
    entries, failures = [], []
    for o in orbits:
        for br in ("unstable", "stable"):
            m = cache.get(o, 0, br)
            cert = mf.certify_size(m, r, keep_samples=False)
            embedded = cert.certified
            ar, sg = float("nan"), 0.0
            if embedded:
                ar = mf.area(m, ("graph", r))
                Z = _graph_points(m, delta, n_ang, n_rad)
                green = green_plus if br == "unstable" else green_minus
                sg = float(np.max(green(f, Z)[0], initial=0.0))
            ok = embedded and ar <= A and sg >= eta
            entries.append(QEEntry(o.id, br, embedded, ar, sg, ok))
            if not ok:
                failures.append({"orbit": o.id, "branch": br,
                                 "reason": "embedding" if not embedded else ("area" if ar > A else "eta")})
    good = [e for e in entries if e.embedded]
    suggested = {"r": r, "delta": delta,
                 "eta": 0.5 * min((e.sup_green for e in good), default=0.0),
                 "A": 2.0 * max((e.area for e in good), default=0.0)}
    return QEReport(not failures, r, delta, eta, A, entries, suggested, failures)
