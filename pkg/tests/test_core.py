import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from henonlab.core import (FamilyDegenerate, FamilySpec, HenonComposition, HenonFactor, apply,
                           apply_extended, apply_inverse, derivative, derivative_inverse,
                           dynamical_degree, instantiate, iterate, jacobian_constant,
                           quadratic_family)

from conftest import random_points, single

TWO = HenonComposition((HenonFactor([0.3 - 0.1j, 0.2, 1.0], 0.7 + 0.2j),
                        HenonFactor([-1.1, 0.5j, 0.4, 1.0], -0.6)))

small = st.floats(-1.5, 1.5, allow_nan=False)


def _symbolic(f, x, y):
    for h in f.factors:
        px = sum(sp.nsimplify(0) + complex(c) * x ** k for k, c in enumerate(h.p))
        x, y = sp.expand(px + complex(h.a) * y), sp.expand(complex(h.a) * x)
    return x, y


def _symbolic_inverse(f, X, Y):
    # undo the factors last-to-first: x = Y/a, y = (X - p(Y/a))/a
    for h in reversed(f.factors):
        a = complex(h.a)
        x = Y / a
        y = (X - sum(complex(c) * x ** k for k, c in enumerate(h.p))) / a
        X, Y = sp.expand(x), sp.expand(y)
    return X, Y


def test_apply_trivial_values():
    f = single(-0.75 + 0.2j, 0.4)
    assert np.allclose(apply(f, [0, 0]), [-0.75 + 0.2j, 0])
    g = HenonComposition.single([0, 0, 1], 1)
    assert np.array_equal(apply(g, [0, 0]), [0, 0])


def test_two_factor_matches_symbolic_expansion(rng):
    x, y = sp.symbols("x y")
    X, Y = _symbolic(TWO, x, y)
    fn = sp.lambdify((x, y), [X, Y], "numpy")
    z = random_points(rng, 20)
    want = np.array(fn(z[0], z[1]))
    assert np.allclose(apply(TWO, z), want, rtol=1e-12, atol=1e-12)


def test_inverse_identities(rng):
    for f in (TWO, single(-1.2, 0.35j)):
        z = random_points(rng, 200, 0.7)
        assert np.max(np.abs(apply_inverse(f, apply(f, z)) - z)) < 1e-12
        # f⁻¹ blows small points up by |1/a|^deg, so measure relative to the intermediate size
        w = apply_inverse(f, z)
        scale = np.maximum(1.0, np.abs(w).max(axis=0)) ** dynamical_degree(f)
        assert np.max(np.abs(apply(f, w) - z) / scale) < 1e-12
    f = single(-1.2, 0.35j)
    z = random_points(rng, 200, 0.3)
    assert np.max(np.abs(apply(f, apply_inverse(f, z)) - z)) < 1e-12


@settings(max_examples=60, deadline=None)
@given(small, small, small, small)
def test_inverse_roundtrip_property(a, b, c, d):
    f = single(-0.4 + 0.3j, 0.8 - 0.1j)
    z = np.array([complex(a, b), complex(c, d)])
    assert np.max(np.abs(apply_inverse(f, apply(f, z)) - z)) < 1e-12


def test_inverse_orbit_matches_symbolic_inverse():
    # (0,0) repels for this map, so backward orbits near it stay well conditioned
    f = HenonComposition((HenonFactor([0, 0.1, 1], 2.0), HenonFactor([0, 0, 0.5, 1], 1.5)))
    X, Y = sp.symbols("X Y")
    inv = sp.lambdify((X, Y), list(_symbolic_inverse(f, X, Y)), "numpy")
    z0 = np.array([0.05 + 0.02j, -0.03j])
    z, w = z0.copy(), z0.copy()
    for _ in range(20):
        z = apply_inverse(f, z)
        w = np.array(inv(w[0], w[1]), dtype=complex)
        assert np.max(np.abs(z - w)) < 1e-12
    assert np.max(np.abs(iterate(f, z0, -20) - w)) < 1e-12


def test_derivative_at_origin():
    a = 0.45 - 0.2j
    D = derivative(single(-0.3, a), [0, 0])
    assert np.allclose(D, [[0, a], [a, 0]], atol=0)


def test_derivative_determinant_and_finite_differences(rng):
    jac = jacobian_constant(TWO)[0]
    assert np.isclose(jac, (-(0.7 + 0.2j) ** 2) * (-(0.6 ** 2)))
    h = 1e-5
    for z in random_points(rng, 100, 0.8).T:
        D = derivative(TWO, z)
        assert abs(np.linalg.det(D) - jac) < 1e-12 * max(1.0, np.abs(D).max() ** 2)
        fd = np.empty((2, 2), dtype=complex)
        for j in range(2):
            e = np.zeros(2, dtype=complex)
            e[j] = h
            fd[:, j] = (apply(TWO, z + e) - apply(TWO, z - e)) / (2 * h)
        assert np.max(np.abs(fd - D)) < 1e-6 * max(1.0, np.abs(D).max())
        Di = derivative_inverse(TWO, apply(TWO, z))
        assert np.allclose(Di @ D, np.eye(2), atol=1e-9)


def test_dynamical_degree():
    assert dynamical_degree(single(0.1, 0.5)) == 2
    assert dynamical_degree(TWO) == 6
    # same degrees with integer coefficients keep the symbolic expansion cheap
    x, y = sp.symbols("x y")
    X, Y = sp.Poly(x, x, y), sp.Poly(y, x, y)
    for n in (1, 2):
        for p, a in (([1, 0, 1], 2), ([1, 1, 0, 1], 3)):
            px = sum((c * X ** k for k, c in enumerate(p)), sp.Poly(0, x, y))
            X, Y = px + a * Y, a * X
        assert X.total_degree() == 6 ** n


def test_degree_lower_bound():
    with pytest.raises(ValueError):
        HenonFactor([1, 2], 0.5)
    for f in (single(0, 1), TWO, single(0, 1, deg=5)):
        assert dynamical_degree(f) >= 2


def test_jacobian_flags():
    jac, diss, mod = jacobian_constant(single(0.2, 0.4))
    assert jac == pytest.approx(-0.16)
    assert diss and mod
    jac, diss, mod = jacobian_constant(single(0.2, 1.0))
    assert abs(jac) == 1 and not diss and not mod


def test_degenerate_factor_rejected():
    with pytest.raises(ValueError):
        HenonFactor([0, 0, 1], 0)
    with pytest.raises(ValueError):
        HenonFactor([0, 0, 0], 1)


def test_instantiate_constant_and_linear():
    f = single(0.3j, 0.5)
    fam = FamilySpec.constant(f, 0, 2)
    for lam in (0, 1, -1.5j):
        assert instantiate(fam, lam) == f
    lin = quadratic_family([0, 1], [0.3], 0, 2)
    assert np.allclose(instantiate(lin, -1).factors[0].p, [-1, 0, 1])


def test_instantiate_matches_horner_oracle(rng):
    fam = FamilySpec(((((0.2, -1.0, 0.5j), (0.1, 0.3), (1.0, 0.0, 0.25)), (0.3, 0.1j)),), 0j, 1.0)
    for lam in (rng.uniform(-0.7, 0.7, 50) + 1j * rng.uniform(-0.7, 0.7, 50)):
        h = instantiate(fam, lam).factors[0]
        for k, cs in enumerate(fam.factors[0][0]):
            assert abs(h.p[k] - np.polyval(cs[::-1], lam)) < 1e-14
        assert abs(h.a - np.polyval([0.1j, 0.3], lam)) < 1e-14


def test_instantiate_errors():
    fam = quadratic_family([-1], [0, 1], 0, 1)
    with pytest.raises(FamilyDegenerate, match="degenerates"):
        instantiate(fam, 0)
    with pytest.raises(ValueError):
        instantiate(fam, 3)


def test_family_json_roundtrip():
    fam = FamilySpec(((((0.2, -1.0j), (0.1,), (1.0, 0.25)), (0.3, 0.1j)),), -1 + 0.5j, 0.75)
    assert FamilySpec.from_json(fam.to_json()) == fam
    with pytest.raises(ValueError):
        FamilySpec.from_dict({"factors": [{"p": [], "a": [[1, 0]], "extra": 1}]})


def test_extended_precision_agrees():
    z = np.array([0.3 + 0.1j, -0.2j])
    x, y = apply_extended(TWO, z, n=2)
    assert np.allclose([complex(x), complex(y)], iterate(TWO, z, 2), rtol=1e-13)
