import math

import numpy as np
import pytest
from scipy.special import gamma as sp_gamma
from scipy.stats import gamma as gamma_dist, kstest

from conebessel.cone_core import HypergroupParams, random_psd
from conebessel.jack_series import CharacterFunctional, character_phi
from conebessel.ball_measure import (
    BallPoint,
    EmpiricalMeasure,
    conv_expect,
    conv_pairwise_batch,
    conv_sample,
    conv_sample_batch,
    kappa,
    norm_excess_watermark,
    phi_bochner,
    reset_norm_excess_watermark,
    sample_ball,
    sample_ball_batch,
    support_window_check,
    support_window_fraction,
    tri_gamma_batch,
)
from conebessel.ball_measure import _haar_unitary_batch


def test_ball_point_rejects_contractions_of_norm_one():
    BallPoint(0.5 * np.eye(2))
    with pytest.raises(ValueError):
        BallPoint(np.eye(2))
    with pytest.raises(ValueError):
        BallPoint(np.zeros((2, 3)))


def test_kappa_closed_forms_scalar_case():
    rng = np.random.default_rng(20)
    # d=1: integral of (1-v^2)^(mu-3/2) over (-1,1)
    mu = 2.2
    est, se = kappa(HypergroupParams(1, 1, mu), 200_000, rng)
    want = math.sqrt(math.pi) * sp_gamma(mu - 0.5) / sp_gamma(mu)
    assert abs(est - want) <= 4.0 * se
    # d=2: integral of (1-|v|^2)^(mu-2) over the unit disc
    mu = 3.0
    est, se = kappa(HypergroupParams(1, 2, mu), 200_000, rng)
    assert abs(est - math.pi / (mu - 1.0)) <= 4.0 * se
    assert se > 0.0


def test_ball_sampler_matches_beta_moments():
    rng = np.random.default_rng(21)
    n = 40_000
    # q=1, d=1: v^2 ~ Beta(1/2, mu - 1/2)
    mu = 1.8
    v = sample_ball_batch(HypergroupParams(1, 1, mu), n, rng)[:, 0, 0]
    want = 1.0 / (2.0 * mu)
    se = np.std(v * v) / math.sqrt(n)
    assert abs(np.mean(v * v) - want) <= 4.0 * se
    assert abs(np.mean(v)) <= 4.0 * np.std(v) / math.sqrt(n)
    # q=1, d=2: |v|^2 ~ Beta(1, mu - 1)
    mu = 2.6
    v = sample_ball_batch(HypergroupParams(1, 2, mu), n, rng)[:, 0, 0]
    u = np.abs(v) ** 2
    se = np.std(u) / math.sqrt(n)
    assert abs(np.mean(u) - 1.0 / mu) <= 4.0 * se


def test_ball_samples_are_contractions():
    rng = np.random.default_rng(22)
    for q, d, mu in ((2, 1, 1.7), (3, 2, 5.6)):
        p = HypergroupParams(q, d, mu)
        vs = sample_ball_batch(p, 500, rng)
        tops = np.linalg.norm(vs, ord=2, axis=(1, 2))
        assert tops.max() <= 1.0 + 1e-12
        bp = sample_ball(p, rng)
        assert isinstance(bp, BallPoint)


def test_haar_factor_is_unitary():
    rng = np.random.default_rng(23)
    for d in (1, 2):
        us = _haar_unitary_batch(200, 3, d, rng)
        defect = us @ np.swapaxes(us, -1, -2).conj() - np.eye(3)
        assert np.abs(defect).max() < 1e-12
        # phase fix makes the distribution exactly invariant; first moment is 0
        assert np.abs(us.mean(axis=0)).max() < 0.2


def test_tri_gamma_scalar_is_gamma_law():
    rng = np.random.default_rng(24)
    mu = 2.3
    g = tri_gamma_batch(20_000, 1, 1, mu, rng)[:, 0, 0]
    stat = kstest(g, gamma_dist(a=mu, scale=2.0).cdf)
    assert stat.pvalue > 1e-3
    with pytest.raises(ValueError):
        tri_gamma_batch(10, 3, 2, 1.9, rng)  # shape at the third diagonal <= 0


def test_convolution_support_bound_and_watermark():
    rng = np.random.default_rng(25)
    p = HypergroupParams(2, 1, 2.0)
    r = random_psd(p, rng, norm=1.3)
    s = random_psd(p, rng, norm=0.6)
    reset_norm_excess_watermark()
    zs = conv_sample_batch(p, r, s, 5000, rng)
    budget = np.linalg.norm(r) + np.linalg.norm(s)
    assert np.linalg.norm(zs, axis=(1, 2)).max() <= budget + 1e-9
    assert 0.0 <= norm_excess_watermark() <= 1e-9
    reset_norm_excess_watermark()
    assert norm_excess_watermark() == 0.0


def test_conv_point_and_pairwise_agree_with_batch_shapes():
    rng = np.random.default_rng(26)
    p = HypergroupParams(2, 2, 4.5)
    r = random_psd(p, rng)
    s = random_psd(p, rng)
    z = conv_sample(p, r, s, rng)
    assert z.array.shape == (2, 2)
    rs = np.stack([r] * 7)
    ss = np.stack([s] * 7)
    zs = conv_pairwise_batch(p, rs, ss, rng)
    assert zs.shape == (7, 2, 2)
    assert np.abs(zs - np.swapaxes(zs, -1, -2).conj()).max() < 1e-12


def test_convolution_commutes_in_law():
    rng = np.random.default_rng(27)
    p = HypergroupParams(2, 1, 2.5)
    r = random_psd(p, rng, norm=1.0)
    s = random_psd(p, rng, norm=0.8)
    n = 20_000
    za = conv_sample_batch(p, r, s, n, rng)
    zb = conv_sample_batch(p, s, r, n, rng)
    for stat in (
        lambda z: np.trace(z, axis1=-2, axis2=-1),
        lambda z: np.einsum("nij,nji->n", z, z),
        lambda z: np.linalg.det(z),
    ):
        va, vb = stat(za).real, stat(zb).real
        se = math.sqrt(va.var() / n + vb.var() / n)
        assert abs(va.mean() - vb.mean()) <= 4.0 * se


def test_product_formula_single_triple():
    rng = np.random.default_rng(28)
    p = HypergroupParams(2, 1, 2.0)
    r = random_psd(p, rng, norm=1.0)
    s = random_psd(p, rng, norm=1.2)
    t = random_psd(p, rng, norm=0.9)
    est, se = conv_expect(p, CharacterFunctional(p, t), r, s, 20_000, rng)
    want = character_phi(p, t, r) * character_phi(p, t, s)
    assert abs(est - want) <= 4.0 * se + 1e-8


def test_bochner_integral_matches_series():
    rng = np.random.default_rng(29)
    p = HypergroupParams(2, 1, 2.4)
    s = random_psd(p, rng, norm=0.9)
    r = random_psd(p, rng, norm=1.1)
    est, se = phi_bochner(p, s, r, 40_000, rng)
    want = character_phi(p, s, r)
    assert abs(est - want) <= 4.0 * se + 1e-9


def test_support_window_predicates():
    p = HypergroupParams(2, 1, 2.0)
    r = np.diag([1.0, 2.0])
    assert support_window_check(p, r, 0.5, 1.2 * r, 1e-12)
    assert not support_window_check(p, r, 0.1, 1.2 * r, 1e-12)
    with pytest.raises(ValueError):
        support_window_check(p, r, 0.0, r, 1e-12)
    zs = np.stack([0.95 * r, 1.05 * r, 2.5 * r])
    assert support_window_fraction(p, r, 0.2, zs, 1e-12) == pytest.approx(2.0 / 3.0)


def test_empirical_measure_validation():
    p = HypergroupParams(2, 1, 2.0)
    pts = np.stack([np.eye(2), 2.0 * np.eye(2)])
    m = EmpiricalMeasure(p, pts)
    assert np.allclose(m.weights, [0.5, 0.5])
    m2 = EmpiricalMeasure(p, pts, weights=np.array([3.0, 1.0]))
    assert np.allclose(m2.weights, [0.75, 0.25])
    with pytest.raises(ValueError):
        EmpiricalMeasure(p, pts, weights=np.array([1.0, -0.1]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(p, pts, weights=np.array([1.0]))
    with pytest.raises(ValueError):
        EmpiricalMeasure(p, np.eye(2))


@pytest.mark.parametrize("d", [1, 2])
def test_empirical_measure_csv_roundtrip(tmp_path, d):
    rng = np.random.default_rng(30)
    p = HypergroupParams(2, d, 3.5)
    pts = np.stack([random_psd(p, rng) for _ in range(5)])
    w = rng.uniform(0.5, 2.0, size=5)
    m = EmpiricalMeasure(p, pts, weights=w, seed=77, n_raw=9)
    path = tmp_path / "m.csv"
    m.to_csv(path, version="x")
    back = EmpiricalMeasure.from_csv(path)
    assert back.params.q == 2 and back.params.d == d and back.params.mu == 3.5
    assert back.seed == 77 and back.n_raw == 9
    np.testing.assert_array_equal(back.points, pts)
    # weights renormalize on load; only that division can wiggle the last ulp
    np.testing.assert_allclose(back.weights, m.weights, rtol=0, atol=1e-15)


def test_csv_rejects_missing_metadata(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("e_0_0,weight\n1.0,1.0\n")
    with pytest.raises(ValueError):
        EmpiricalMeasure.from_csv(path)
