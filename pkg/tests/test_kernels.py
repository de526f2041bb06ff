import os
import subprocess
import sys

import numpy as np
import pytest

from topophase import kernels
from topophase.clifford import ID4, build_representation


@pytest.mark.parametrize("k", range(24))
def test_kronrod_exact_to_degree_23(k):
    exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
    assert np.dot(kernels.WK15, kernels.NODES15 ** k) == pytest.approx(exact, abs=1e-14)


@pytest.mark.parametrize("k", range(14))
def test_gauss_exact_to_degree_13(k):
    exact = 2.0 / (k + 1) if k % 2 == 0 else 0.0
    assert np.dot(kernels.WG15, kernels.NODES15 ** k) == pytest.approx(exact, abs=1e-14)


def test_gauss_weights_sit_on_gauss_nodes():
    assert np.count_nonzero(kernels.WG15) == 7
    assert np.allclose(kernels.NODES15[kernels.WG15 > 0], np.polynomial.legendre.leggauss(7)[0])


def test_coulomb_parity():
    rng = np.random.default_rng(1)
    pts = rng.uniform(-5, 5, (500, 2))
    src = rng.uniform(-1, 1, (4, 2))
    q = rng.uniform(-3, 3, 4)
    assert np.allclose(kernels.coulomb_field_nb(pts, src, q), kernels.coulomb_field_np(pts, src, q),
                       rtol=1e-13, atol=1e-15)


def test_segment_integral_parity():
    rng = np.random.default_rng(2)
    a = rng.uniform(-4, 4, (20, 2))
    b = rng.uniform(-4, 4, (20, 2))
    src = rng.uniform(-1, 1, (3, 2))
    q = rng.uniform(-3, 3, 3)
    vn, en, okn = kernels.segment_integrals_nb(a, b, src, q, 1e-12, 100000)
    vp, ep, okp = kernels.segment_integrals_np(a, b, src, q, 1e-12, 100000)
    assert okn and okp
    assert np.allclose(vn, vp, atol=1e-11)


def test_spinor_mix_parity_and_meaning():
    rng = np.random.default_rng(3)
    rep = build_representation()
    mats = np.stack([ID4, rep.gamma1, rep.s_op])
    terms = kernels.sparse_terms(mats)
    psi = rng.normal(size=(2, 4, 5, 6)) + 1j * rng.normal(size=(2, 4, 5, 6))
    coefs = rng.normal(size=(3, 5, 6)) + 1j * rng.normal(size=(3, 5, 6))
    nb = kernels.spinor_mix_nb(psi, coefs, *terms)
    np_ = kernels.spinor_mix_np(psi, coefs, *terms)
    direct = np.einsum("kyx,kij,bjyx->biyx", coefs, mats, psi)
    assert np.allclose(nb, direct, atol=1e-13)
    assert np.allclose(np_, direct, atol=1e-13)


def test_env_flag_selects_numpy_backend():
    code = "from topophase import kernels, _accel; print(_accel.backend_name(), kernels.spinor_mix is kernels.spinor_mix_np)"
    env = dict(os.environ, TOPOPHASE_DISABLE_NUMBA="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.split() == ["numpy", "True"]
