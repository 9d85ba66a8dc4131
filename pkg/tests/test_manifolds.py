import numpy as np
import pytest

from henonlab.core import FamilySpec, instantiate, iterate
from henonlab.green import green_minus, green_plus
from henonlab.manifolds import (ResonanceError, ZetaTooLarge, affine_manifold, area, certify_size,
                                d12_bounds, find_size, graph_manifold, koebe, koebe_audit,
                                koebe_derivative_bounds, koebe_extremal_manifold, koebe_inverse,
                                koebe_prime, manifold_inverse_chart_maps, mobius_univalent,
                                natural_continuation, opposite_green, parameterize,
                                resonance_margins, size_persistence_scan, uniform_bound)
from henonlab.periodic import census, orbit_derivative
from henonlab.regularity import find_intersections

from conftest import HORSESHOE_LAM, horseshoe_family

ZERO2 = np.zeros(2, dtype=complex)
E1 = np.array([0.6, 0.8j])


@pytest.fixture(scope="module")
def fixed_saddle(hs_db6):
    return hs_db6.saddles(1)[0]


@pytest.fixture(scope="module")
def wu(hs_map, fixed_saddle):
    m = parameterize(hs_map, fixed_saddle, "unstable")
    find_size(m)
    return m


@pytest.fixture(scope="module")
def ws(hs_map, fixed_saddle):
    m = parameterize(hs_map, fixed_saddle, "stable")
    find_size(m)
    return m


@pytest.mark.parametrize("branch", ["unstable", "stable"])
def test_linear_term_is_unit_eigenvector(hs_map, hs_db6, branch):
    for o in hs_db6.saddles(3):
        m = parameterize(hs_map, o, branch)
        c1 = m.c1
        assert np.linalg.norm(c1) == pytest.approx(1, abs=1e-14)
        M = orbit_derivative(hs_map, o.points)
        assert np.max(np.abs(M @ c1 - m.mu * c1)) < 1e-9 * abs(m.mu) + 1e-12
        assert np.array_equal(m.evaluate(0j)[0], o.points[0])


@pytest.mark.parametrize("branch", ["unstable", "stable"])
def test_conjugacy_residual_on_certified_circle(hs_map, hs_db6, branch):
    for o in hs_db6.saddles(6):
        m = parameterize(hs_map, o, branch)
        assert m.rho_cert > 0
        zeta = m.rho_cert * np.exp(2j * np.pi * np.arange(64) / 64)
        assert m.conjugacy_residual(zeta).max() < 1e-9


def test_resonance_margins_positive(hs_map, hs_db6):
    for o in hs_db6.saddles(4):
        for br in ("unstable", "stable"):
            assert min(resonance_margins(hs_map, o, br)) > 0


def test_extension_is_dynamical_and_matches_higher_order(hs_map, wu, fixed_saddle):
    zeta = 2 * wu.rho_cert * np.exp(2j * np.pi * np.arange(16) / 16)
    Z, _ = wu.evaluate(zeta)
    W, _ = wu.evaluate(zeta / wu.mu)
    assert np.max(np.abs(iterate(hs_map, W, 1) - Z)) < 1e-12 * max(1.0, np.abs(Z).max())
    # oracle: a solve of twice the order, where its own series converges
    big = parameterize(hs_map, fixed_saddle, "unstable", order=2 * wu.order)
    if big.rho_cert >= 2 * wu.rho_cert:
        S, _ = big.series(zeta)
        assert np.max(np.abs(S - Z)) < 1e-8


def test_zeta_too_large(wu):
    with pytest.raises(ZetaTooLarge):
        wu.evaluate(wu.rho_cert * abs(wu.mu) ** 80 + 0j)
    Z, _ = wu.evaluate(np.array([wu.rho_cert * abs(wu.mu) ** 80 + 0j]), strict=False)
    assert np.isnan(Z).all()


def test_unstable_manifold_in_k_minus(wu):
    zeta = np.linspace(0.1, 6, 25) * np.exp(0.3j)
    gm, _ = opposite_green(wu, zeta)
    assert np.all(gm < 1e-12)


def test_stable_manifold_in_k_plus(ws):
    zeta = np.linspace(0.1, 6, 25) * np.exp(0.3j)
    gp, _ = opposite_green(ws, zeta)
    assert np.all(gp < 1e-12)


def test_resonance_raises_for_nonsaddle():
    from henonlab.periodic import find_periodic
    from conftest import single

    f = single(0, 0.5)
    att = [o for o in find_periodic(f, 1) if o.type == "attracting"][0]
    with pytest.raises(ValueError):
        parameterize(f, att, "unstable")
    assert issubclass(ResonanceError, ArithmeticError)


def test_affine_certified_with_zero_slope():
    m = affine_manifold(ZERO2, E1)
    for r in (0.01, 1.0, 50.0):
        c = certify_size(m, r, 32, 32)
        assert c.certified and c.slope_max == 0


def test_schwarz_extremal_graph():
    r = 1.7
    m = graph_manifold(ZERO2, E1, lambda x: x * x / (2 * r), lambda x: x / r)
    c = certify_size(m, r)
    assert c.certified
    assert abs(c.slope_max - 1) < 1e-9
    assert np.max(np.abs(np.abs(c.dphi) - np.abs(c.x) / r)) < 1e-9
    assert not certify_size(m, 1.05 * r).certified


def test_certificate_obeys_schwarz(wu, ws):
    for m in (wu, ws):
        c = m.certificate
        assert c.certified
        assert np.all(np.abs(c.dphi) <= np.abs(c.x) / c.r + 1e-6)


@pytest.mark.parametrize("branch", ["unstable", "stable"])
def test_koebe_audit_horseshoe(hs_map, hs_db6, branch):
    for o in hs_db6.saddles(2):
        m = parameterize(hs_map, o, branch)
        assert find_size(m) > 0
        rep = koebe_audit(m)
        assert rep.passed, rep.details


def test_koebe_extremal_near_equality():
    r = 0.8
    m = koebe_extremal_manifold(ZERO2, E1, r)
    rep = koebe_audit(m, r)
    assert rep.passed
    assert rep.growth_upper_slack < 1e-9 and rep.growth_upper_slack > -1e-9


def test_koebe_closed_forms():
    z = np.array([0.1, -0.3j, 0.5 + 0.2j])
    assert np.allclose(koebe_inverse(koebe(z)), z)
    h = 1e-6
    assert np.allclose((koebe(z + h) - koebe(z - h)) / (2 * h), koebe_prime(z), rtol=1e-8)


def test_d12_identity_and_koebe():
    lo, hi, dist = d12_bounds(1, 2)
    assert (lo, hi, dist) == (1 / 32, 128, 2 / 128)
    assert lo <= 1 <= hi
    ident = koebe_derivative_bounds(lambda z: z, lambda z: np.ones_like(z), 1, 2)
    assert ident.passed and ident.deriv_min == ident.deriv_max == 1
    r2 = 3.0
    rep = koebe_derivative_bounds(lambda z: r2 * koebe(z / r2), lambda z: koebe_prime(z / r2), 1.5, r2)
    assert rep.passed
    # closed form: |k'| on |z| <= 3/4 ranges over [(1-t)/(1+t)^3, (1+t)/(1-t)^3]
    t = 0.75
    assert rep.deriv_max <= (1 + t) / (1 - t) ** 3 + 1e-9
    assert rep.deriv_min >= (1 - t) / (1 + t) ** 3 - 1e-9


def test_d12_mobius_and_manifold(wu):
    rng = np.random.default_rng(7)
    for _ in range(3):
        a, b = 0.8 * rng.uniform(size=2) * np.exp(2j * np.pi * rng.uniform(size=2))
        F, dF = mobius_univalent(a, b, 2.0)
        assert abs(F(np.array([0j]))[0]) < 1e-14 and abs(dF(np.array([0j]))[0] - 1) < 1e-12
        assert koebe_derivative_bounds(F, dF, 1.0, 2.0).passed
    F, dF = manifold_inverse_chart_maps(wu)
    assert koebe_derivative_bounds(F, dF, wu.r_cert / 2, wu.r_cert, n_ang=64, n_rad=8).passed


def test_area_closed_forms():
    r = 1.3
    assert area(affine_manifold(ZERO2, E1), ("disk", r)) == pytest.approx(np.pi * r * r, rel=1e-10)
    from henonlab.manifolds import SyntheticManifold

    m = SyntheticManifold(lambda z: np.array([z, z * z]), lambda z: np.array([np.ones_like(z), 2 * z]),
                          ZERO2, [1, 0])
    assert area(m, ("disk", 1.0)) == pytest.approx(3 * np.pi, rel=1e-10)
    assert area(affine_manifold(ZERO2, E1), ("graph", r)) == pytest.approx(np.pi * r * r, rel=1e-8)


def test_area_monotone(wu):
    vals = [area(wu, ("disk", s * wu.rho_cert)) for s in (0.5, 1, 2, 4)]
    assert all(a < b for a, b in zip(vals, vals[1:]))
    g = [area(wu, ("graph", s * wu.r_cert)) for s in (0.25, 0.5, 0.75)]
    assert all(a < b for a, b in zip(g, g[1:]))
    assert g[-1] >= np.pi * (0.75 * wu.r_cert) ** 2


def test_natural_continuation_constant_family(hs_map, wu, ws):
    fam = FamilySpec.constant(hs_map, HORSESHOE_LAM, 0.5)
    ip = find_intersections(hs_map, wu, ws)[0]
    path = [HORSESHOE_LAM + 0.1 * k for k in range(3)]
    samples, events = natural_continuation(fam, wu, ws, (ip.zeta, ip.xi), path)
    assert not events and len(samples) == 3
    w = np.array([0.3, 0.5j, 1.0])
    ref = samples[0].evaluate(w)[0]
    for s in samples:
        assert np.max(np.abs(s.evaluate(w)[0] - ref)) < 1e-9
        assert s.marked[0] == 1


def test_natural_continuation_normalization(hs_family, hs_map, wu, ws):
    ips = find_intersections(hs_map, wu, ws)
    ip = ips[0]
    path = [HORSESHOE_LAM + 0.12 * np.exp(0.7j) * k / 3 for k in range(4)]
    extra = [(q.zeta, q.xi) for q in ips[1:3]]
    samples, events = natural_continuation(hs_family, wu, ws, (ip.zeta, ip.xi), path, extra=extra)
    assert not events and len(samples) == 4
    for s in samples:
        f = instantiate(hs_family, s.lam)
        Z0 = s.evaluate(np.array([0j]))[0][:, 0]
        assert np.max(np.abs(iterate(f, Z0, 1) - Z0)) < 1e-10          # h(0) is the saddle
        assert s.marked[0] == 1                                       # h(marked) = 1
        Zm = s.evaluate(np.array([1 + 0j]))[0][:, 0]
        assert green_plus(f, Zm).value == 0 or opposite_green(s.manifold, np.array([s.scale]))[0][0] < 1e-12
    M = uniform_bound(samples, 0.5, 1.0)
    assert np.isfinite(M) and M > 0


def test_size_persistence_constant_family(hs_map, fixed_saddle):
    fam = FamilySpec.constant(hs_map, HORSESHOE_LAM, 0.75)
    res = size_persistence_scan(fam, fixed_saddle, HORSESHOE_LAM, 0.5, n_circle=4)
    assert res.delta == pytest.approx(0.75)


def test_size_persistence_monotone_and_positive(hs_family, hs_map, hs_db6):
    o = hs_db6.saddles(3)[2]
    m = parameterize(hs_map, o, "unstable")
    r2 = find_size(m)
    deltas = [size_persistence_scan(hs_family, o, HORSESHOE_LAM, q * r2, r2, n_circle=8, iters=6).delta
              for q in (0.25, 0.5, 0.9)]
    assert deltas[1] > 0
    assert deltas[0] >= deltas[1] >= deltas[2]


def test_manifold_export(wu):
    d = wu.to_dict()
    assert d["rho_cert"] == wu.rho_cert and len(d["coefficients"]) == wu.order
    rot = wu.rotated(0.4)
    z = np.array([0.2 + 0.1j])
    assert np.allclose(rot.evaluate(z)[0], wu.evaluate(z * np.exp(0.4j))[0])
