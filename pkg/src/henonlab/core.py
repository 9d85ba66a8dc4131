"""Hénon compositions, polynomial families and their exact evaluation.

A factor is the map (x, y) -> (p(x) + a*y, a*x).  A composition applies its
factors left to right, so ``factors[0]`` acts first.  Points are complex
arrays of shape ``(2,)`` or ``(2, N)`` for batches.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np


class EscapedToInfinity(ArithmeticError):
    """An orbit left the range of double precision."""


class FamilyDegenerate(ValueError):
    """A family parameter where some a_i or leading coefficient vanishes."""


def _as_point(z):
    z = np.asarray(z, dtype=complex)
    if z.shape[0] != 2:
        raise ValueError("points must have leading dimension 2")
    return z


def _check_finite(z):
    if not np.all(np.isfinite(z)):
        raise EscapedToInfinity("escaped to numerical infinity")
    return z


def horner(coeffs, x):
    """Evaluate a polynomial given low-degree-first coefficients."""
    acc = np.zeros_like(np.asarray(x, dtype=complex)) + coeffs[-1]
    for c in coeffs[-2::-1]:
        acc = acc * x + c
    return acc


def horner_derivative(coeffs, x):
    n = len(coeffs) - 1
    acc = np.zeros_like(np.asarray(x, dtype=complex)) + n * coeffs[-1]
    for k in range(n - 1, 0, -1):
        acc = acc * x + k * coeffs[k]
    return acc


@dataclass(frozen=True)
class HenonFactor:
    p: tuple
    a: complex

    def __post_init__(self):
        coeffs = tuple(complex(c) for c in self.p)
        object.__setattr__(self, "p", coeffs)
        object.__setattr__(self, "a", complex(self.a))
        if len(coeffs) < 3:
            raise ValueError("p must have degree at least 2")
        if coeffs[-1] == 0:
            raise ValueError("leading coefficient of p must be nonzero")
        if self.a == 0:
            raise ValueError("a must be nonzero")
        if not all(np.isfinite(c) for c in coeffs + (self.a,)):
            raise ValueError("coefficients must be finite")

    @property
    def degree(self):
        return len(self.p) - 1

    def conjugate_inverse(self):
        """The factor s∘h⁻¹∘s where s swaps coordinates.

        It equals (x, y) -> (q(x) + y/a, x/a) with q(x) = -p(x/a)/a.
        """
        a = self.a
        q = tuple(-c / a ** (k + 1) for k, c in enumerate(self.p))
        return HenonFactor(q, 1 / a)


@dataclass(frozen=True)
class HenonComposition:
    factors: tuple

    def __post_init__(self):
        fs = tuple(self.factors)
        if not fs:
            raise ValueError("a composition needs at least one factor")
        object.__setattr__(self, "factors", fs)

    @classmethod
    def single(cls, p, a):
        return cls((HenonFactor(p, a),))

    @property
    def degree(self):
        return dynamical_degree(self)

    @cached_property
    def packed(self):
        """Flat arrays (coeffs, offsets, degrees, a) used by the kernels."""
        coeffs = np.concatenate([np.asarray(h.p, dtype=complex) for h in self.factors])
        degs = np.array([h.degree for h in self.factors], dtype=np.int64)
        offsets = np.zeros(len(degs) + 1, dtype=np.int64)
        offsets[1:] = np.cumsum(degs + 1)
        avals = np.array([h.a for h in self.factors], dtype=complex)
        return coeffs, offsets, degs, avals

    @cached_property
    def conjugate_inverse(self):
        """Composition F with f⁻¹ = s∘F∘s, s the coordinate swap."""
        return HenonComposition(tuple(h.conjugate_inverse() for h in reversed(self.factors)))

    def to_dict(self):
        return {"factors": [{"p": [[c.real, c.imag] for c in h.p], "a": [h.a.real, h.a.imag]}
                            for h in self.factors]}


def apply(f, z):
    """f(z) for a point or a (2, N) batch."""
    z = _as_point(z)
    x, y = z[0], z[1]
    with np.errstate(over="ignore", invalid="ignore"):
        for h in f.factors:
            x, y = horner(h.p, x) + h.a * y, h.a * x
    return _check_finite(np.array([x, y]))


def apply_inverse(f, z):
    z = _as_point(z)
    X, Y = z[0], z[1]
    with np.errstate(over="ignore", invalid="ignore"):
        for h in reversed(f.factors):
            x = Y / h.a
            X, Y = x, (X - horner(h.p, x)) / h.a
    return _check_finite(np.array([X, Y]))


def iterate(f, z, n):
    """f^n(z) for n >= 0, or the inverse iterate for n < 0."""
    step = apply if n >= 0 else apply_inverse
    for _ in range(abs(n)):
        z = step(f, z)
    return np.asarray(z, dtype=complex)


def factor_derivative(h, x):
    return np.array([[horner_derivative(h.p, x), h.a], [h.a, 0.0]], dtype=complex)


def derivative(f, z):
    """Df(z), the ordered product of factor differentials along the orbit."""
    z = _as_point(z)
    if z.ndim != 1:
        raise ValueError("derivative expects a single point")
    x, y = z
    D = np.eye(2, dtype=complex)
    with np.errstate(over="ignore", invalid="ignore"):
        for h in f.factors:
            D = factor_derivative(h, x) @ D
            x, y = horner(h.p, x) + h.a * y, h.a * x
    return _check_finite(D)


def derivative_inverse(f, z):
    """D(f⁻¹)(z) = Df(f⁻¹(z))⁻¹."""
    return np.linalg.inv(derivative(f, apply_inverse(f, z)))


def dynamical_degree(f):
    d = 1
    for h in f.factors:
        d *= h.degree
    return d


def jacobian_constant(f):
    """Return (Jac, is_dissipative, is_moderately_dissipative)."""
    jac = complex(np.prod([-(h.a ** 2) for h in f.factors]))
    d = dynamical_degree(f)
    return jac, abs(jac) < 1, abs(jac) < d ** -2.0


def swap(z):
    z = np.asarray(z, dtype=complex)
    return z[::-1].copy()


# ----------------------------------------------------------------------------
# extended precision (oracle recomputation only)

def apply_extended(f, z, n=1, dps=32):
    """f^n(z) in mpmath arithmetic, returned as a pair of mpc values."""
    import mpmath

    with mpmath.workdps(dps):
        x, y = mpmath.mpc(complex(z[0])), mpmath.mpc(complex(z[1]))
        fac = [([mpmath.mpc(c) for c in h.p], mpmath.mpc(h.a)) for h in f.factors]
        for _ in range(n):
            for p, a in fac:
                acc = p[-1]
                for c in p[-2::-1]:
                    acc = acc * x + c
                x, y = acc + a * y, a * x
        return x, y


# ----------------------------------------------------------------------------
# families

def _poly_lambda(coeffs, lam):
    acc = 0j
    for c in reversed(coeffs):
        acc = acc * lam + c
    return acc


def _parse_complex(v):
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex numbers are [re, im] pairs")
        return complex(float(v[0]), float(v[1]))
    raise ValueError("complex numbers are [re, im] pairs")


@dataclass(frozen=True)
class FamilySpec:
    """Factors whose coefficients are polynomials in λ, over a closed disk.

    ``factors`` holds pairs ``(p, a)`` where ``p`` is a tuple over x-degree of
    λ-coefficient tuples and ``a`` is a λ-coefficient tuple.
    """
    factors: tuple
    center: complex = 0j
    radius: float = 1.0

    def __post_init__(self):
        fs = []
        for p, a in self.factors:
            p = tuple(tuple(complex(c) for c in cs) for cs in p)
            a = tuple(complex(c) for c in a)
            if len(p) < 3:
                raise ValueError("p must have degree at least 2")
            if not a or any(not cs for cs in p):
                raise ValueError("empty λ-polynomial")
            fs.append((p, a))
        if not fs:
            raise ValueError("a family needs at least one factor")
        object.__setattr__(self, "factors", tuple(fs))
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("domain radius must be positive")

    @classmethod
    def constant(cls, f, center=0j, radius=1.0):
        return cls(tuple((tuple((c,) for c in h.p), (h.a,)) for h in f.factors), center, radius)

    def in_domain(self, lam, slack=1e-12):
        return abs(complex(lam) - self.center) <= self.radius * (1 + slack)

    def validate(self, n_boundary=64, n_interior=9):
        """Check nondegeneracy on a boundary circle plus an interior grid."""
        t = np.exp(2j * np.pi * np.arange(n_boundary) / n_boundary)
        pts = list(self.center + self.radius * t)
        g = np.linspace(-1, 1, n_interior)
        for u in g:
            for v in g:
                if u * u + v * v <= 1:
                    pts.append(self.center + self.radius * complex(u, v))
        for lam in pts:
            instantiate(self, lam, check_domain=False)
        return True

    def to_dict(self):
        pair = lambda c: [c.real, c.imag]
        return {
            "factors": [{"p": [[pair(c) for c in cs] for cs in p], "a": [pair(c) for c in a]}
                        for p, a in self.factors],
            "domain": {"center": pair(self.center), "radius": self.radius},
        }

    @classmethod
    def from_dict(cls, d):
        if set(d) - {"factors", "domain"} or "factors" not in d:
            raise ValueError("family must have keys 'factors' and optional 'domain'")
        fs = []
        for fd in d["factors"]:
            if set(fd) != {"p", "a"}:
                raise ValueError("factor entries need exactly 'p' and 'a'")
            p = tuple(tuple(_parse_complex(c) for c in cs) for cs in fd["p"])
            a = tuple(_parse_complex(c) for c in fd["a"])
            fs.append((p, a))
        dom = d.get("domain", {"center": [0, 0], "radius": 1.0})
        return cls(tuple(fs), _parse_complex(dom["center"]), float(dom["radius"]))

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)


def instantiate(fam, lam, check_domain=True):
    """The composition f_λ; raises FamilyDegenerate on vanishing a_i or leading terms."""
    lam = complex(lam)
    if check_domain and not fam.in_domain(lam):
        raise ValueError(f"λ={lam} lies outside the parameter disk")
    factors = []
    for p, a in fam.factors:
        pc = tuple(_poly_lambda(cs, lam) for cs in p)
        av = _poly_lambda(a, lam)
        scale = max(1.0, max(abs(c) for cs in p for c in cs), max(abs(c) for c in a))
        if abs(av) <= 1e-14 * scale or abs(pc[-1]) <= 1e-14 * scale:
            raise FamilyDegenerate(f"family degenerates at λ={lam}")
        factors.append(HenonFactor(pc, av))
    return HenonComposition(tuple(factors))


def quadratic_family(c_poly, a_poly, center=0j, radius=1.0):
    """p(x) = x² + c(λ), a = a(λ), given λ-coefficient lists."""
    p = (tuple(c_poly), (0j,), (1 + 0j,))
    return FamilySpec(((p, tuple(a_poly)),), center, radius)
