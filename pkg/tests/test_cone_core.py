import math

import numpy as np
import pytest
from numpy.testing import assert_allclose
from scipy.special import gamma as sp_gamma

from conebessel.cone_core import (
    ConePoint,
    HermitianMatrix,
    HypergroupParams,
    SquareMatrix,
    as_matrix,
    eig_herm,
    frob_norm,
    gamma_cone,
    inner,
    loewner_leq,
    pochhammer_general,
    power_function,
    psd_sqrt,
    psd_sqrt_batch,
    random_hermitian,
    random_psd,
    read_matrix_text,
    write_matrix_text,
)


def test_params_derived_constants():
    p = HypergroupParams(2, 1, 3.0)
    assert p.rho == 2.5
    assert p.n == 3.0
    assert p.gamma == 3.0 - 1.5
    assert p.alpha == 2.0
    pc = HypergroupParams(3, 2, 7.0)
    assert pc.rho == 6.0
    assert pc.n == 9.0
    assert pc.alpha == 1.0
    assert pc.dtype == np.complex128


def test_params_mu_bound():
    with pytest.raises(ValueError):
        HypergroupParams(2, 1, 1.5)  # needs mu > rho - 1 = 1.5
    # the same index is fine for sampling-only use
    p = HypergroupParams(2, 1, 0.8, sampling_only=True)
    assert not p.convolution_valid
    with pytest.raises(ValueError):
        p.require_convolution()
    with pytest.raises(ValueError):
        HypergroupParams(2, 4, 5.0)  # quaternions rejected
    with pytest.raises(ValueError):
        HypergroupParams(0, 1, 5.0)


def test_wrappers():
    m = SquareMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    assert m.q == 2 and m.d == 1
    with pytest.raises(ValueError):
        HermitianMatrix(np.array([[1.0, 2.0], [0.0, 1.0]]))
    h = HermitianMatrix(np.array([[2.0, 1j], [-1j, 3.0]]), d=2)
    assert h.d == 2
    with pytest.raises(ValueError):
        SquareMatrix(np.array([[1j, 0], [0, 1j]]), d=1)
    with pytest.raises(ValueError):
        SquareMatrix(np.zeros((2, 3)))


def test_cone_point_clamps_roundoff_but_rejects_indefinite():
    eps = 1e-12
    x = ConePoint(np.array([[1.0, 0.0], [0.0, -eps]]))
    assert x.eigenvalues.min() == 0.0
    with pytest.raises(ValueError):
        ConePoint(np.array([[1.0, 0.0], [0.0, -1e-3]]))


def test_eig_reconstruction_roundtrip():
    rng = np.random.default_rng(4)
    for q in (1, 2, 3, 5, 8):
        for d in (1, 2):
            p = HypergroupParams(q, d, d * q + 2.0)
            for _ in range(40):
                h = random_hermitian(p, rng)
                eigs, vecs = eig_herm(h)
                back = (vecs * eigs) @ vecs.conj().T
                assert np.abs(back - h).max() <= 1e-12 * max(1.0, np.abs(h).max()) * q


def test_psd_sqrt_squares_back():
    rng = np.random.default_rng(5)
    p = HypergroupParams(3, 2, 8.0)
    for _ in range(25):
        x = random_psd(p, rng)
        r = psd_sqrt(x)
        assert_allclose(r @ r, x, atol=1e-11 * max(1.0, np.abs(x).max()))
    # eigenvalues of the root are the square roots
    u = np.linalg.qr(rng.standard_normal((4, 4)))[0]
    lam = np.array([4.0, 1.0, 0.25, 0.0])
    x = (u * lam) @ u.T
    r = psd_sqrt(x)
    assert_allclose(np.linalg.eigvalsh(r), np.sort(np.sqrt(lam)), atol=1e-12)


def test_psd_sqrt_keeps_rank_deficiency_sharp():
    rng = np.random.default_rng(6)
    p = HypergroupParams(3, 1, 4.0)
    x = random_psd(p, rng, rank=1)
    # a naive eigh + sqrt smears the zero eigenvalues of x to sqrt(eps)-sized
    # eigenvalues of the root; flooring keeps them at plain round-off size
    naive_floor = np.sqrt(np.finfo(float).eps * np.linalg.norm(x, 2))
    for root in (psd_sqrt(x), *psd_sqrt_batch(np.stack([x, 4.0 * x]))):
        small = np.abs(np.linalg.eigvalsh(root))[:2]
        assert small.max() < 1e-4 * naive_floor


def test_psd_sqrt_rejects_indefinite():
    with pytest.raises(ValueError):
        psd_sqrt(np.diag([1.0, -0.5]))
    with pytest.raises(ValueError):
        psd_sqrt_batch(np.diag([1.0, -0.5])[None])


def test_loewner_partial_order():
    rng = np.random.default_rng(7)
    p = HypergroupParams(3, 1, 4.0)
    tol = 1e-12
    mats = [random_psd(p, rng) for _ in range(6)]
    for a in mats:
        assert loewner_leq(a, a, tol)
    for a in mats:
        for b in mats:
            small = loewner_leq(a, b, tol) and loewner_leq(b, a, tol)
            if small:
                assert np.abs(a - b).max() <= 1e-9
    # transitivity on a constructed chain
    a = mats[0]
    b = a + random_psd(p, rng)
    c = b + random_psd(p, rng)
    assert loewner_leq(a, b, tol) and loewner_leq(b, c, tol) and loewner_leq(a, c, tol)


def test_inner_and_norm():
    x = np.array([[1.0, 2.0], [2.0, 5.0]])
    assert inner(x, np.eye(2)) == pytest.approx(np.trace(x))
    assert frob_norm(x) == pytest.approx(np.linalg.norm(x))
    z = np.array([[1.0, 1j], [-1j, 2.0]])
    assert inner(z, z) == pytest.approx(np.linalg.norm(z) ** 2)


def test_power_function_diagonal():
    x = np.diag([2.0, 3.0, 5.0])
    # minors 2, 6, 30; lam = (2,1,1) -> 2^(1) * 6^(0) * 30^(1)
    assert power_function(x, (2, 1, 1)) == pytest.approx(2.0 * 30.0)
    assert power_function(x, (1,)) == pytest.approx(2.0)
    assert power_function(np.eye(3), (4, 2)) == pytest.approx(1.0)


def test_pochhammer_trailing_zeros_and_values():
    p = HypergroupParams(3, 1, 4.0)
    assert pochhammer_general(p, 2.5, (2, 1)) == pochhammer_general(p, 2.5, (2, 1, 0))
    # (mu)_2 * (mu - 1/2)_1 by hand
    mu = 2.5
    assert pochhammer_general(p, mu, (2, 1)) == pytest.approx(mu * (mu + 1) * (mu - 0.5))
    pc = HypergroupParams(2, 2, 4.0)
    assert pochhammer_general(pc, 3.0, (1, 1)) == pytest.approx(3.0 * 2.0)
    with pytest.raises(ValueError):
        pochhammer_general(p, 0.5, (1, 2))  # second part crosses the pole


def test_gamma_cone_against_scalar_gammas():
    p1 = HypergroupParams(1, 1, 2.0)
    assert gamma_cone(p1, 2.5) == pytest.approx(sp_gamma(2.5), rel=1e-12)
    p2 = HypergroupParams(2, 1, 3.0)
    want = math.sqrt(2.0 * math.pi) * sp_gamma(3.0) * sp_gamma(2.5)
    assert gamma_cone(p2, 3.0) == pytest.approx(want, rel=1e-12)
    p3 = HypergroupParams(2, 2, 4.0)
    want = (2.0 * math.pi) * sp_gamma(4.0) * sp_gamma(3.0)
    assert gamma_cone(p3, 4.0) == pytest.approx(want, rel=1e-12)
    with pytest.raises(ValueError):
        gamma_cone(p2, 0.25)


def test_random_psd_rank_and_norm():
    rng = np.random.default_rng(8)
    p = HypergroupParams(4, 2, 10.0)
    x = random_psd(p, rng, norm=2.5, rank=2)
    assert np.linalg.norm(x) == pytest.approx(2.5)
    eigs = np.linalg.eigvalsh(x)
    assert (eigs[:-2] < 1e-12).all() and (eigs[-2:] > 1e-12).all()


def test_matrix_text_roundtrip(tmp_path):
    rng = np.random.default_rng(9)
    for d in (1, 2):
        p = HypergroupParams(3, d, 8.0)
        x = random_psd(p, rng)
        path = tmp_path / f"m{d}.txt"
        write_matrix_text(path, x)
        back, dd = read_matrix_text(path)
        assert dd == d
        assert_allclose(back, x, rtol=0, atol=0)


def test_matrix_text_diagnostics(tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("2 1\n1.0 2.0\n")
    with pytest.raises(ValueError):
        read_matrix_text(path)
    path.write_text("2 4\n" + "0\n" * 8)
    with pytest.raises(ValueError):
        read_matrix_text(path)


def test_as_matrix_unwraps():
    x = ConePoint(np.eye(2))
    assert as_matrix(x) is x.array
    arr = np.eye(2)
    assert as_matrix(arr) is arr
