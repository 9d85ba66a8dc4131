import json

import numpy as np
import pytest

from henonlab import manifolds as mf
from henonlab.core import apply, instantiate
from henonlab.periodic import census, find_periodic
from henonlab.regularity import (ManifoldCache, RegularityFailure, convergence_check,
                                 certify_regular, equivariant_image, exposure, find_intersections,
                                 qe_audit, uniform_regularity_audit)

from conftest import crossing_family, single


@pytest.fixture(scope="module")
def cache(hs_map):
    return ManifoldCache(hs_map)


@pytest.fixture(scope="module")
def hs_db10(hs_map):
    return census(hs_map, 10)


@pytest.fixture(scope="module")
def homoclinic(hs_map, hs_db6, cache):
    o = hs_db6.saddles(1)[0]
    mu, ms = cache.get(o, 0, "unstable"), cache.get(o, 0, "stable")
    return mu, ms, find_intersections(hs_map, mu, ms)


def test_trivial_root_filtered(homoclinic):
    mu, ms, ips = homoclinic
    assert ips
    for ip in ips:
        assert abs(ip.zeta) > 1e-6 or abs(ip.xi) > 1e-6
        assert ip.residual < 1e-10
        U = mu.evaluate(np.array([ip.zeta]))[0][:, 0]
        S = ms.evaluate(np.array([ip.xi]))[0][:, 0]
        assert np.max(np.abs(U - S)) < 1e-10


def test_equivariance(hs_map, homoclinic):
    mu, ms, ips = homoclinic
    for ip in ips:
        img = equivariant_image(ip, mu, ms)
        assert img is not None
        assert abs(img.zeta - mu.mu * ip.zeta) < 1e-7 * (1 + abs(mu.mu * ip.zeta))
        assert abs(img.xi - ms.mu * ip.xi) < 1e-7 * (1 + abs(ip.xi))
        assert np.max(np.abs(apply(hs_map, ip.point) - img.point)) < 1e-7


def test_transverse_homoclinic_per_low_period_saddle(hs_map, hs_db6, cache):
    for o in hs_db6.saddles(3):
        ips = find_intersections(hs_map, cache.get(o, 0, "unstable"), cache.get(o, 0, "stable"))
        assert any(ip.angle > 0.1 and not ip.tangency for ip in ips), o.id


def test_exposure_stable_branch(hs_map, hs_db6, cache):
    m = cache.get(hs_db6.saddles(1)[0], 0, "stable")
    mf.find_size(m)
    res = exposure(hs_map, m)
    assert res.exposed and res.value > 0 and res.status == "decided"


def test_exposure_negative_control():
    f = single(0, 0.5)
    # a small disk around the attracting fixed point stays in its basin: G⁺ ≡ 0 there
    m = mf.affine_manifold(np.zeros(2, dtype=complex), [1, 1j])
    res = exposure(f, m, ("disk", 0.05))
    assert not res.exposed and res.value == 0


def test_exposed_implies_heteroclinic(hs_map, hs_db6, cache):
    ref = hs_db6.saddles(1)[0]
    ref_u, ref_s = cache.get(ref, 0, "unstable"), cache.get(ref, 0, "stable")
    for o in hs_db6.saddles(2):
        for br in ("unstable", "stable"):
            m = cache.get(o, 0, br)
            mf.find_size(m)
            assert exposure(hs_map, m).exposed
            pair = (m, ref_s) if br == "unstable" else (ref_u, m)
            ips = find_intersections(hs_map, *pair)
            assert any(not ip.tangency for ip in ips), (o.id, br)


def test_certify_regular_at_saddle(hs_map, hs_db6, cache):
    o = hs_db6.saddles(2)[2]
    cert = certify_regular(hs_map, o.points[1], hs_db6, 0.5, direction="both", cache=cache)
    assert cert.witnesses == [(o.id, 1, 0.0, 0.5)]
    assert cert.transverse and cert.angle > 0.1 and cert.hausdorff > 1e-6
    assert cert.exposure > 0
    json.dumps(cert.to_dict())


def test_certify_regular_at_homoclinic_point_and_convergence(hs_map, hs_db10, homoclinic):
    mu, _, ips = homoclinic
    ip = ips[0]
    cache = ManifoldCache(hs_map)
    cert = certify_regular(hs_map, ip.point, hs_db10, 0.25, k=3, direction="u", cache=cache)
    d = [w[2] for w in cert.witnesses]
    assert len(d) == 3 and all(b <= a / 2 for a, b in zip(d, d[1:]))
    assert cert.exposure > 0
    byid = {o.id: o for o in hs_db10.orbits}
    W = [cache.get(byid[w[0]], w[1], "unstable") for w in cert.witnesses]
    rep = convergence_check(W, mf.recentered(mu, ip.zeta), 1.2 * d[0])
    assert rep.monotone and rep.multiplicity_one


def test_certify_regular_failure(hs_map, hs_db6):
    with pytest.raises(RegularityFailure, match="shell 1"):
        certify_regular(hs_map, np.array([30.0, 30.0]), hs_db6, 0.5)


def test_convergence_constant_and_multivalued(homoclinic):
    mu = homoclinic[0]
    rep = convergence_check([mu, mu, mu], mu, 0.5)
    assert rep.distances == [0.0, 0.0, 0.0] and rep.multiplicity_one
    base = mu.base
    e1, e2 = mu.frame
    # x(ζ) = ζ - ζ²/2 folds at x = 1/2, so over |x| < 0.8 the curve has two sheets
    sh = lambda v, z: v.reshape((2,) + (1,) * np.ndim(z))
    fold = mf.SyntheticManifold(lambda z: sh(base, z) + sh(e1, z) * (z - z * z / 2) + sh(e2, z) * 0.01 * z * z,
                                lambda z: sh(e1, z) * (1 - z) + sh(e2, z) * 0.02 * z, base, e1)
    rep = convergence_check([mu, fold, mu], mu, 0.8)
    assert not rep.multiplicity_one and rep.single_valued == [True, False, True]


def test_uniform_audit_small_period(hs_map, cache):
    rep = uniform_regularity_audit(hs_map, 3, 0.5, 0.1, cache=cache)
    assert rep.passed and rep.min_size >= 0.5 and rep.min_angle >= 0.1
    assert json.loads(rep.to_json())["schema_version"] == 1


def test_uniform_audit_past_crossing():
    # λ = -0.7 lies just past the period-doubling λ* ≈ -0.621: the fixed point flipped
    f = instantiate(crossing_family(), -0.7)
    rep = uniform_regularity_audit(f, 2, 0.1, 0.1)
    assert not rep.passed
    assert any("attracting" in r for a in rep.saddles for r in a.reasons)


def test_uniform_audit_needs_period():
    with pytest.raises(ValueError, match="nothing to audit"):
        uniform_regularity_audit(single(-4, 0.3), 0, 0.5, 0.1)


def test_qe_audit_thresholds(hs_map, hs_db6, cache):
    sad = hs_db6.saddles(2)
    rep = qe_audit(hs_map, sad, 0.5, 0.25, 0.0, np.inf, cache=cache)
    assert rep.passed
    s = rep.suggested
    again = qe_audit(hs_map, sad, s["r"], s["delta"], s["eta"], s["A"], cache=cache)
    assert again.passed
    too_high = max(e.sup_green for e in rep.entries) * 1.5
    bad = qe_audit(hs_map, sad, 0.5, 0.25, too_high, np.inf, cache=cache)
    assert not bad.passed
    assert {f["orbit"] for f in bad.failures} <= {o.id for o in sad} and bad.failures[0]["reason"] == "eta"
    for e in rep.entries:
        m = cache.get(next(o for o in sad if o.id == e.orbit_id), 0, e.branch)
        assert abs(e.area - mf.area(m, ("graph", 0.5))) < 1e-6
