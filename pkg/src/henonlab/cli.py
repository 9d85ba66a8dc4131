"""Command-line front end.

Every subcommand reads a JSON config (family, seed, tolerances, optional
lambda), writes its outputs into ``--out`` and records them in
``manifest.json``.  Exit codes: 0 success or pass, 1 audit failure,
2 usage or configuration error, 3 numerical failure.

Config example::

    {"family": {"factors": [{"p": [[[0, 0]], [[0, 0]], [[1, 0]]], "a": [[0.5, 0]]}],
                "domain": {"center": [0, 0], "radius": 1}},
     "seed": 0, "tolerances": {"green_tol": 1e-10}}
"""
from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import os
import sys
import tempfile
import time
from concurrent.futures import ProcessPoolExecutor

import jsonschema
import numpy as np

from . import __version__
from .core import FamilySpec, instantiate

EXIT_OK, EXIT_FAIL, EXIT_USAGE, EXIT_NUMERIC = 0, 1, 2, 3

TOLERANCES = {
    "green_tol": 1e-10, "max_iter": 400, "newton_tol": 1e-9, "eps_unit": 1e-6,
    "manifold_tol": 1e-9, "order": 24, "theta_tangent": 1e-3, "eps_exposed": 1e-8,
    "delta_collision": 1e-7, "delta_distinct": 1e-6,
}

_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}
_LAMPOLY = {"type": "array", "items": _PAIR, "minItems": 1}
FAMILY_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["factors"],
    "properties": {
        "factors": {
            "type": "array", "minItems": 1,
            "items": {"type": "object", "additionalProperties": False, "required": ["p", "a"],
                      "properties": {"p": {"type": "array", "items": _LAMPOLY, "minItems": 3},
                                     "a": _LAMPOLY}},
        },
        "domain": {"type": "object", "additionalProperties": False, "required": ["center", "radius"],
                   "properties": {"center": _PAIR, "radius": {"type": "number", "exclusiveMinimum": 0}}},
    },
}
CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["family"],
    "properties": {
        "family": FAMILY_SCHEMA,
        "seed": {"type": "integer"},
        "lambda": _PAIR,
        "output": {"type": "string"},
        "tolerances": {"type": "object", "additionalProperties": False,
                       "properties": {k: {"type": "number"} for k in TOLERANCES}},
    },
}
MANIFEST_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["schema_version", "tool", "version", "argv", "config", "config_hash", "seed",
                 "tolerances", "wall_time", "outputs", "exit_code"],
    "properties": {
        "schema_version": {"const": 1},
        "tool": {"const": "henonlab"},
        "version": {"type": "string"},
        "argv": {"type": "array", "items": {"type": "string"}},
        "config": CONFIG_SCHEMA,
        "config_hash": {"type": "string", "pattern": "^[0-9a-f]{64}$"},
        "seed": {"type": "integer"},
        "tolerances": {"type": "object"},
        "wall_time": {"type": "number", "minimum": 0},
        "exit_code": {"type": "integer"},
        "outputs": {"type": "array", "items": {
            "type": "object", "additionalProperties": False, "required": ["path", "sha256", "bytes"],
            "properties": {"path": {"type": "string"}, "sha256": {"type": "string"},
                           "bytes": {"type": "integer"}}}},
    },
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def fmt(v):
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(v, (float, np.floating)):
        return "%.17g" % v
    return str(v)


def csv_bytes(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    for r in rows:
        w.writerow([fmt(v) for v in r])
    return buf.getvalue().encode()


def _cpair(text):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 2:
        raise UsageError(f"expected re,im but got {text!r}")
    return complex(parts[0], parts[1])


def _cpoint(text):
    parts = [float(t) for t in text.split(",")]
    if len(parts) != 4:
        raise UsageError(f"expected x_re,x_im,y_re,y_im but got {text!r}")
    return np.array([complex(parts[0], parts[1]), complex(parts[2], parts[3])])


class Run:
    """Context of one invocation: config, tolerances, output directory and manifest."""

    def __init__(self, args, argv):
        self.args, self.argv = args, list(argv)
        self.t0 = time.perf_counter()
        if not args.config:
            raise UsageError("--config is required")
        try:
            with open(args.config) as fh:
                cfg = json.load(fh)
        except FileNotFoundError:
            raise UsageError(f"config file not found: {args.config}")
        except json.JSONDecodeError as e:
            raise UsageError(f"config is not valid JSON: {e}")
        try:
            jsonschema.validate(cfg, CONFIG_SCHEMA)
        except jsonschema.ValidationError as e:
            raise UsageError(f"config rejected: {e.message}")
        self.config = cfg
        self.family = FamilySpec.from_dict(cfg["family"])
        tol = dict(TOLERANCES)
        tol.update(cfg.get("tolerances", {}))
        for item in args.tol or []:
            name, _, val = item.partition("=")
            if name not in TOLERANCES or not val:
                raise UsageError(f"unknown tolerance override {item!r}")
            tol[name] = float(val)
        self.tol = tol
        self.seed = args.seed if args.seed is not None else int(cfg.get("seed", 0))
        lam = cfg.get("lambda")
        self.lam = complex(*lam) if lam else self.family.center
        jobs = args.jobs or os.environ.get("HENONLAB_JOBS") or 1
        self.jobs = max(1, int(jobs))
        self.out = args.out or cfg.get("output") or "henonlab_out"
        self.outputs = []
        self._lock = None

    def family_id(self):
        return hashlib.sha256(json.dumps(self.config["family"], sort_keys=True).encode()).hexdigest()[:12]

    @property
    def f(self):
        return instantiate(self.family, self.lam)

    def open(self):
        try:
            os.makedirs(self.out, exist_ok=True)
            lock = os.path.join(self.out, ".henonlab.lock")
            fd = os.open(lock, os.O_CREAT | os.O_EXCL | os.O_WRONLY)
            os.close(fd)
            self._lock = lock
        except FileExistsError:
            raise UsageError(f"output directory is locked: {self.out}")
        except OSError as e:
            raise UsageError(f"output directory not writable: {e}")

    def close(self, code):
        if self._lock is None:
            return
        try:
            man = self.manifest(code)
            self._write_raw("manifest.json", (json.dumps(man, sort_keys=True, indent=1) + "\n").encode())
        finally:
            os.remove(self._lock)
            self._lock = None

    def _write_raw(self, name, data):
        path = os.path.join(self.out, name)
        with open(path, "wb") as fh:
            fh.write(data)
        return path

    def write(self, name, data):
        if isinstance(data, str):
            data = data.encode()
        self._write_raw(name, data)
        self.outputs.append({"path": name, "sha256": hashlib.sha256(data).hexdigest(), "bytes": len(data)})

    def write_json(self, name, obj):
        self.write(name, json.dumps(obj, sort_keys=True, indent=1, default=_json_default) + "\n")

    def manifest(self, code):
        canon = json.dumps(self.config, sort_keys=True, separators=(",", ":"))
        return {
            "schema_version": 1, "tool": "henonlab", "version": __version__, "argv": self.argv,
            "config": self.config, "config_hash": hashlib.sha256(canon.encode()).hexdigest(),
            "seed": int(self.seed), "tolerances": self.tol,
            "wall_time": time.perf_counter() - self.t0, "outputs": self.outputs, "exit_code": int(code),
        }

    def pmap(self, fn, items):
        """Ordered map over items, in a process pool when --jobs > 1."""
        if self.jobs <= 1 or len(items) <= 1:
            return [fn(x) for x in items]
        with ProcessPoolExecutor(self.jobs) as ex:
            return list(ex.map(fn, items))


def _json_default(o):
    if isinstance(o, complex):
        return [o.real, o.imag]
    if isinstance(o, np.ndarray):
        return o.tolist() if o.dtype != complex else [[v.real, v.imag] for v in o.ravel()]
    if isinstance(o, (np.floating, np.integer, np.bool_)):
        return o.item()
    raise TypeError(f"not serializable: {type(o)}")


def _points(run, args):
    """Evaluation points from --points FILE (CSV re_x,im_x,re_y,im_y, header optional) or --random N."""
    if args.points:
        try:
            with open(args.points, newline="") as fh:
                rows = [r for r in csv.reader(fh) if r]
        except OSError:
            raise UsageError(f"points file not found: {args.points}")
        try:
            float(rows[0][0])
        except (ValueError, IndexError):
            rows = rows[1:]
        try:
            data = np.array([[float(v) for v in r[:4]] for r in rows], dtype=float).reshape(-1, 4)
        except ValueError as e:
            raise UsageError(f"points file: {e}")
        return np.stack([data[:, 0] + 1j * data[:, 1], data[:, 2] + 1j * data[:, 3]])
    from .green import escape_radius

    rng = np.random.default_rng(run.seed)
    R = escape_radius(run.f)
    v = rng.uniform(-R, R, size=(4, args.random))
    return np.stack([v[0] + 1j * v[1], v[2] + 1j * v[3]])


def _census(run, period):
    from .periodic import NewtonOptions, census

    opts = NewtonOptions(tol=run.tol["newton_tol"])
    return census(run.f, period, opts, run.tol["eps_unit"], family_id=run.family_id(), lam=run.lam)


# ----------------------------------------------------------------------------
# subcommands

def _green_rows(run, P):
    from .green import class_from_zero_flags, green_minus, green_plus

    f = run.f
    gp = green_plus(f, P, run.tol["green_tol"], int(run.tol["max_iter"]))
    gm = green_minus(f, P, run.tol["green_tol"], int(run.tol["max_iter"]))
    names = {0: "converged", 1: "classified_zero", 2: "budget_exhausted"}
    rows = [["re_x", "im_x", "re_y", "im_y", "g_plus", "g_minus", "status_plus", "status_minus", "class"]]
    for k in range(P.shape[1]):
        cl = class_from_zero_flags(int(gp[2][k]) != 0, int(gm[2][k]) != 0)
        rows.append([P[0, k].real, P[0, k].imag, P[1, k].real, P[1, k].imag, float(gp[0][k]),
                     float(gm[0][k]), names[int(gp[2][k])], names[int(gm[2][k])], cl])
    return rows


def cmd_green(run, args):
    P = _points(run, args)
    run.write("green.csv", csv_bytes(_green_rows(run, P)))
    print(f"green: {P.shape[1]} points")
    return EXIT_OK


def cmd_classify(run, args):
    P = _points(run, args)
    rows = _green_rows(run, P)
    run.write("classify.csv", csv_bytes([[r[0], r[1], r[2], r[3], r[8]] for r in rows]))
    print(f"classify: {P.shape[1]} points")
    return EXIT_OK


def cmd_periodic(run, args):
    if args.period < 1:
        raise ValueError("period must be at least 1")
    db = _census(run, args.period)
    run.write("saddles.jsonl", db.to_jsonl())
    print(f"periodic: {len(db.orbits)} orbits, {len(db.saddles())} saddles up to period {args.period}")
    return EXIT_OK


def _pick_orbit(run, args):
    db = _census(run, args.period)
    orbits = [o for o in db.orbits if o.period == args.period] if args.exact else db.orbits
    if not orbits:
        raise ValueError("no orbit of the requested period")
    if not 0 <= args.orbit_index < len(orbits):
        raise ValueError(f"orbit index out of range (0..{len(orbits) - 1})")
    return db, orbits[args.orbit_index]


def cmd_track(run, args):
    from .continuation import ContinuationOptions, ParamPath, continue_orbit

    _, orb = _pick_orbit(run, args)
    path = ParamPath.segment(run.lam, _cpair(args.to), args.steps)
    tr = continue_orbit(run.family, orb, path, ContinuationOptions(eps_unit=run.tol["eps_unit"]))
    run.write("track.jsonl", tr.to_jsonl())
    print(f"track: {len(tr.lams)} samples, {len(tr.events)} events")
    return EXIT_OK


def cmd_sweep(run, args):
    from .continuation import scan_csv_rows, scan_ppm, stability_scan

    nx, ny = (int(t) for t in args.grid.split(","))
    hw = args.half_width
    xs = np.linspace(-hw, hw, nx) if nx > 1 else np.zeros(1)
    ys = np.linspace(-hw, hw, ny) if ny > 1 else np.zeros(1)
    grid = run.lam + xs[None, :] + 1j * ys[:, None]
    cells = stability_scan(run.family, grid, args.period_max, run.tol["eps_unit"])
    run.write("scan.csv", csv_bytes(scan_csv_rows(cells)))
    if args.ppm:
        run.write("scan.ppm", scan_ppm(cells))
    n = sum(c.verdict != "no crossing observed" for c in cells.ravel())
    print(f"sweep: {cells.size} cells, {n} with crossings or failures")
    return EXIT_OK


def cmd_manifold(run, args):
    from . import manifolds as mf

    _, orb = _pick_orbit(run, args)
    m = mf.parameterize(run.f, orb, args.branch, int(run.tol["order"]), run.tol["manifold_tol"])
    mf.find_size(m)
    run.write("manifold.json", json.dumps(m.to_dict(), sort_keys=True, indent=1) + "\n")
    rad = m.r_cert if m.certificate is None else float(np.nanmax(np.abs(m.certificate.zeta[:, -1])))
    z = np.linspace(-rad, rad, args.samples)
    rows = [["zeta_re", "zeta_im", "x_re", "x_im", "y_re", "y_im"]] + mf.sample_curve_rows(m, z)
    run.write("curve.csv", csv_bytes(rows))
    print(f"manifold: {args.branch} of {orb.id}, rho_cert={m.rho_cert:.6g}, r_cert={m.r_cert:.6g}")
    return EXIT_OK


def cmd_homoclinic(run, args):
    from . import regularity as rg

    db = _census(run, args.period)
    cache = rg.ManifoldCache(run.f, int(run.tol["order"]))
    out = []
    for o in db.saddles():
        mu, ms = cache.get(o, 0, "unstable"), cache.get(o, 0, "stable")
        ips = rg.find_intersections(run.f, mu, ms, theta_tangent=run.tol["theta_tangent"])
        out.append({"orbit": o.id, "period": o.period, "points": [ip.to_dict() for ip in ips]})
    run.write_json("homoclinic.json", {"schema_version": rg.SCHEMA_VERSION, "saddles": out})
    print(f"homoclinic: {sum(len(s['points']) for s in out)} points over {len(out)} saddles")
    return EXIT_OK


def cmd_persist(run, args):
    from . import manifolds as mf

    _, orb = _pick_orbit(run, args)
    m = mf.parameterize(run.f, orb, args.branch, int(run.tol["order"]))
    r2 = mf.find_size(m)
    if r2 <= 0:
        raise ArithmeticError("no certified size at the base parameter")
    res = mf.size_persistence_scan(run.family, orb, run.lam, args.r1_frac * r2, r2, args.branch)
    run.write_json("persist.json", {"schema_version": 1, "orbit": orb.id, "r1": res.r1, "r2": res.r2,
                                    "delta": res.delta,
                                    "samples": [[l, bool(c), d] for l, c, d in res.samples]})
    print(f"persist-scan: delta={res.delta:.6g}")
    return EXIT_OK


# audits ---------------------------------------------------------------------

def _size_job(payload):
    from . import manifolds as mf
    from .periodic import SaddleDB

    fam_json, lam, line, order, tol = payload
    f = instantiate(FamilySpec.from_json(fam_json), complex(*lam))
    o = SaddleDB.from_jsonl(line, f).orbits[0]
    out = {"orbit": o.id, "period": o.period}
    for br in ("unstable", "stable"):
        m = mf.parameterize(f, o, br, order, tol)
        r = mf.find_size(m)
        k = mf.koebe_audit(m) if r > 0 else None
        out[br] = {"rho_cert": m.rho_cert, "r_cert": r,
                   "schwarz_excess": m.certificate.schwarz_excess if m.certificate else None,
                   "koebe_passed": k.passed if k else False,
                   "koebe_violations": k.violations if k else None}
    return out


def _audit_payloads(run, db):
    lam = [run.lam.real, run.lam.imag]
    fam = run.family.to_json()
    return [(fam, lam, json.dumps(o.to_record(), sort_keys=True), int(run.tol["order"]),
             run.tol["manifold_tol"]) for o in db.saddles()]


def cmd_audit(run, args):
    from . import manifolds as mf
    from . import regularity as rg

    kind = args.audit
    if kind in ("uniform", "size", "koebe", "exposure", "qe") and args.period < 1:
        raise ValueError("nothing to audit: period must be at least 1")
    if kind == "uniform":
        rep = rg.uniform_regularity_audit(run.f, args.period, args.r, args.theta_min)
        run.write_json("audit_uniform.json", rep.to_dict())
        print(f"audit uniform: {'pass' if rep.passed else 'fail'} min_size={rep.min_size:.6g} "
              f"min_angle={rep.min_angle:.6g}")
        return EXIT_OK if rep.passed else EXIT_FAIL
    db = _census(run, args.period)
    if kind in ("size", "koebe"):
        res = run.pmap(_size_job, _audit_payloads(run, db))
        if kind == "size":
            ok = all(r[b]["r_cert"] > 0 and (r[b]["schwarz_excess"] or 0) <= 1e-6
                     for r in res for b in ("unstable", "stable"))
        else:
            ok = all(r[b]["koebe_passed"] for r in res for b in ("unstable", "stable"))
        run.write_json(f"audit_{kind}.json", {"schema_version": rg.SCHEMA_VERSION, "passed": ok,
                                               "saddles": res})
        print(f"audit {kind}: {'pass' if ok else 'fail'} over {len(res)} saddles")
        return EXIT_OK if ok else EXIT_FAIL
    cache = rg.ManifoldCache(run.f, int(run.tol["order"]))
    if kind == "exposure":
        out, ok = [], True
        for o in db.saddles():
            row = {"orbit": o.id}
            for br in ("unstable", "stable"):
                m = cache.get(o, 0, br)
                mf.find_size(m)
                e = rg.exposure(run.f, m, eps=run.tol["eps_exposed"])
                row[br] = {"value": e.value, "exposed": e.exposed, "status": e.status}
                ok &= e.exposed
            out.append(row)
        run.write_json("audit_exposure.json", {"schema_version": rg.SCHEMA_VERSION, "passed": ok,
                                               "saddles": out})
        print(f"audit exposure: {'pass' if ok else 'fail'}")
        return EXIT_OK if ok else EXIT_FAIL
    if kind == "qe":
        rep = rg.qe_audit(run.f, db, args.r, args.delta, args.eta, args.area, cache)
        run.write_json("audit_qe.json", rep.to_dict())
        print(f"audit qe: {'pass' if rep.passed else 'fail'} suggested={rep.suggested}")
        return EXIT_OK if rep.passed else EXIT_FAIL
    if kind == "regular":
        if not args.point:
            raise UsageError("audit regular needs --point")
        try:
            cert = rg.certify_regular(run.f, _cpoint(args.point), db, args.r, args.k, args.direction,
                                      cache, delta_distinct=run.tol["delta_distinct"])
        except rg.RegularityFailure as e:
            run.write_json("audit_regular.json", {"schema_version": rg.SCHEMA_VERSION, "passed": False,
                                                  "reason": str(e)})
            print(f"audit regular: fail ({e})")
            return EXIT_FAIL
        d = cert.to_dict()
        d["passed"] = True
        run.write_json("audit_regular.json", d)
        print(f"audit regular: pass with {len(cert.witnesses)} witnesses")
        return EXIT_OK
    raise UsageError(f"unknown audit {kind}")


def cmd_replay(args):
    """Re-run the command recorded in a manifest into a new output directory."""
    try:
        with open(args.manifest) as fh:
            man = json.load(fh)
        jsonschema.validate(man, MANIFEST_SCHEMA)
    except (OSError, json.JSONDecodeError, jsonschema.ValidationError) as e:
        raise UsageError(f"bad manifest: {e}")
    with tempfile.TemporaryDirectory() as tmp:
        cfg_path = os.path.join(tmp, "config.json")
        with open(cfg_path, "w") as fh:
            json.dump(man["config"], fh, sort_keys=True)
        argv = _replace_flag(_replace_flag(man["argv"], "--config", cfg_path), "--out", args.out)
        if "--seed" not in argv:
            argv = argv + ["--seed", str(man["seed"])]
        return main(argv)


def _replace_flag(argv, flag, value):
    out, skip = [], False
    for i, a in enumerate(argv):
        if skip:
            skip = False
            continue
        if a == flag:
            skip = True
            continue
        if a.startswith(flag + "="):
            continue
        out.append(a)
    return out + [flag, value]


# ----------------------------------------------------------------------------

def build_parser():
    common = _Parser(add_help=False)
    common.add_argument("--config", help="experiment config (JSON)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--jobs", type=int, help="worker processes (default HENONLAB_JOBS or 1)")
    common.add_argument("--tol", action="append", metavar="NAME=VALUE", help="tolerance override")
    common.add_argument("--seed", type=int, help="seed for random sampling")

    p = _Parser(prog="henonlab", description="Complex Hénon maps: Green functions, saddles, manifolds, audits.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="cmd", parser_class=_Parser)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_)

    for name in ("green", "classify"):
        s = add(name, f"{name} points")
        g = s.add_mutually_exclusive_group()
        g.add_argument("--points", help="CSV of x_re,x_im,y_re,y_im")
        g.add_argument("--random", type=int, default=100, help="number of seeded random points")
    s = add("periodic", "census of periodic orbits (SaddleDB JSONL)")
    s.add_argument("--period", type=int, required=True)

    def orbit_args(s):
        s.add_argument("--period", type=int, required=True)
        s.add_argument("--orbit-index", type=int, default=0)
        s.add_argument("--exact", action="store_true", help="index among orbits of exactly this period")

    s = add("track", "continue an orbit along a segment")
    orbit_args(s)
    s.add_argument("--to", required=True, help="end parameter re,im")
    s.add_argument("--steps", type=int, default=10)
    s = add("sweep", "stability scan over a parameter grid")
    s.add_argument("--period-max", type=int, required=True)
    s.add_argument("--grid", default="5,5", help="nx,ny")
    s.add_argument("--half-width", type=float, default=0.1)
    s.add_argument("--ppm", action="store_true")
    s = add("manifold", "parameterize and export a local manifold")
    orbit_args(s)
    s.add_argument("--branch", choices=("stable", "unstable"), default="unstable")
    s.add_argument("--samples", type=int, default=33)
    s = add("homoclinic", "homoclinic intersections of every saddle")
    s.add_argument("--period", type=int, required=True)
    s = add("persist-scan", "size persistence over the parameter")
    orbit_args(s)
    s.add_argument("--branch", choices=("stable", "unstable"), default="unstable")
    s.add_argument("--r1-frac", type=float, default=0.5)
    s = add("audit", "audits")
    asub = s.add_subparsers(dest="audit", parser_class=_Parser)
    for name in ("size", "koebe", "exposure", "regular", "uniform", "qe"):
        a = asub.add_parser(name, parents=[common])
        a.add_argument("--period", type=int, required=True)
        if name in ("regular", "uniform", "qe"):
            a.add_argument("--r", type=float, default=0.5)
        if name == "uniform":
            a.add_argument("--theta-min", type=float, default=0.1)
        if name == "regular":
            a.add_argument("--point", help="x_re,x_im,y_re,y_im")
            a.add_argument("--k", type=int, default=3)
            a.add_argument("--direction", choices=("u", "s", "both"), default="u")
        if name == "qe":
            a.add_argument("--delta", type=float, default=0.25)
            a.add_argument("--eta", type=float, default=0.0)
            a.add_argument("--area", type=float, default=float("inf"))
    s = sub.add_parser("replay", help="re-run from a manifest")
    s.add_argument("--manifest", required=True)
    s.add_argument("--out", required=True)
    return p


COMMANDS = {"green": cmd_green, "classify": cmd_classify, "periodic": cmd_periodic, "track": cmd_track,
            "sweep": cmd_sweep, "manifold": cmd_manifold, "homoclinic": cmd_homoclinic,
            "persist-scan": cmd_persist, "audit": cmd_audit}


def _err(kind, message, code):
    sys.stderr.write(json.dumps({"error": kind, "message": str(message), "exit_code": code}) + "\n")
    return code


def main(argv=None):
    argv = list(sys.argv[1:] if argv is None else argv)
    from .core import FamilyDegenerate

    run = None
    code = EXIT_NUMERIC
    try:
        args = build_parser().parse_args(argv)
        if args.cmd is None:
            raise UsageError("no subcommand given")
        if args.cmd == "replay":
            return cmd_replay(args)
        if args.cmd == "audit" and args.audit is None:
            raise UsageError("audit needs a kind")
        run = Run(args, argv)
        run.open()
        code = COMMANDS[args.cmd](run, args)
        return code
    except UsageError as e:
        code = _err("usage", e, EXIT_USAGE)
        return code
    except FamilyDegenerate as e:
        code = _err("numerical", e, EXIT_NUMERIC)
        return code
    except (ValueError, KeyError) as e:
        code = _err("usage", e, EXIT_USAGE)
        return code
    except (ArithmeticError, np.linalg.LinAlgError) as e:
        code = _err("numerical", e, EXIT_NUMERIC)
        return code
    except SystemExit as e:  # --help and --version
        return int(e.code or 0)
    finally:
        if run is not None:
            run.close(code)


if __name__ == "__main__":
    sys.exit(main())
