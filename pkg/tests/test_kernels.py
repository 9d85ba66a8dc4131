import os
import subprocess
import sys

import numpy as np
import pytest

from henonlab import kernels
from henonlab.green import _tails, escape_radius

from conftest import random_points, single
from test_core import TWO

IMPLS = kernels.implementations()
needs_both = pytest.mark.skipif("cython" not in IMPLS, reason="compiled kernels not built")


@needs_both
@pytest.mark.parametrize("backward", [False, True])
def test_escape_backends_agree(rng, backward):
    f = TWO
    order, tails = _tails(f, backward)
    g = f.conjugate_inverse if backward else f
    z = random_points(rng, 300, 1.5)
    args = (*f.packed, order, tails, z[0], z[1], escape_radius(g), 400, 1e-12, backward)
    out = [IMPLS[k].escape(*args) for k in ("python", "cython")]
    assert np.array_equal(out[0][2], out[1][2])
    assert np.array_equal(out[0][1], out[1][1])
    assert np.allclose(out[0][0], out[1][0], rtol=1e-12, atol=1e-14)


@needs_both
def test_orbit_jacobian_backends_agree(rng):
    z = random_points(rng, 100, 0.5)
    a = IMPLS["python"].orbit_jacobian(*TWO.packed, z[0], z[1], 3)
    b = IMPLS["cython"].orbit_jacobian(*TWO.packed, z[0], z[1], 3)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-12, atol=1e-12)


@needs_both
def test_series_eval_backends_agree(rng):
    c0 = rng.normal(size=20) + 1j * rng.normal(size=20)
    c1 = rng.normal(size=20) + 1j * rng.normal(size=20)
    zeta = 0.5 * (rng.normal(size=64) + 1j * rng.normal(size=64))
    a = IMPLS["python"].series_eval(c0, c1, zeta)
    b = IMPLS["cython"].series_eval(c0, c1, zeta)
    for u, v in zip(a, b):
        assert np.allclose(u, v, rtol=1e-13, atol=1e-13)
    # and against numpy's polynomial evaluation
    assert np.allclose(a[0], np.polynomial.polynomial.polyval(zeta, c0), rtol=1e-12)
    assert np.allclose(a[2], np.polynomial.polynomial.polyval(zeta, np.polynomial.polynomial.polyder(c0)),
                       rtol=1e-12)


def test_orbit_jacobian_matches_product(rng):
    from henonlab.core import derivative, iterate

    z = random_points(rng, 5, 0.4)
    X, Y, J = kernels.orbit_jacobian(*TWO.packed, z[0], z[1], 2)
    for k in range(5):
        p = z[:, k]
        D = derivative(TWO, iterate(TWO, p, 1)) @ derivative(TWO, p)
        assert np.allclose(J[k], D, rtol=1e-11, atol=1e-11)
        assert np.allclose([X[k], Y[k]], iterate(TWO, p, 2), rtol=1e-12)


def test_pure_fallback_selected_by_env():
    env = dict(os.environ, HENONLAB_PURE="1")
    out = subprocess.run([sys.executable, "-c", "from henonlab import kernels; print(kernels.BACKEND)"],
                         env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"


def test_pure_backend_green_values():
    env = dict(os.environ, HENONLAB_PURE="1")
    code = ("from henonlab.green import green_plus; from henonlab.core import HenonComposition as H;"
            "print(repr(green_plus(H.single([-1,0,1],0.5), [3,0]).value))")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True,
                         check=True)
    from henonlab.green import green_plus

    assert float(out.stdout) == pytest.approx(green_plus(single(-1, 0.5), [3, 0]).value, rel=1e-12)
