"""Walk engine, moment functions, and the three limit experiments."""

import math

import numpy as np
import pytest
import scipy.stats

from conebessel.ball_measure import EmpiricalMeasure
from conebessel.cone_core import HypergroupParams
from conebessel.jack_series import character_phi
from conebessel.randwalk_limits import (
    EmpiricalStep,
    MomentSpec,
    PointMassStep,
    WalkConfig,
    WishartStep,
    clt_experiment,
    martingale_check,
    moment_m2,
    moment_numeric,
    slln_experiment,
    walk_simulate,
)
from conebessel.wishart import WishartSpec


def _rng(k: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([2026, 6, k]))


class TestMomentSpec:
    def test_odd_order_rejected(self):
        with pytest.raises(ValueError, match="odd"):
            MomentSpec((np.eye(1),), 1)

    def test_unimplemented_order_rejected(self):
        with pytest.raises(ValueError, match="orders 2 and 4"):
            MomentSpec(tuple(np.eye(1) for _ in range(6)), 6)

    def test_direction_count_must_match_order(self):
        with pytest.raises(ValueError, match="one direction per derivative"):
            MomentSpec((np.eye(1),), 2)


class TestMomentFunctions:
    @pytest.mark.parametrize("d", [1, 2])
    def test_second_moment_closed_form_vs_differentiation(self, d):
        p = HypergroupParams(2, d, 3.5)
        if d == 1:
            s1 = np.diag([1.0, 0.5])
            s2 = np.array([[0.3, 0.2], [0.2, 1.0]])
            r = np.array([[1.2, 0.4], [0.4, 0.7]])
        else:
            s1 = np.array([[1.0, 0.2j], [-0.2j, 0.5]])
            s2 = np.array([[0.3, 0.2 - 0.1j], [0.2 + 0.1j, 1.0]])
            r = np.array([[1.2, 0.4 + 0.3j], [0.4 - 0.3j, 0.9]])
        closed = moment_m2(p, s1, s2, r)
        got, err = moment_numeric(p, MomentSpec((s1, s2), 2), r)
        assert got == pytest.approx(closed, rel=1e-6)
        assert abs(got - closed) <= max(10.0 * err, 1e-9)

    @pytest.mark.parametrize("c", [0.7, 1.3])
    def test_scalar_fourth_moment_closed_form(self, c):
        # for q = 1 the character is a normalized scalar Bessel function whose
        # Taylor coefficient gives m4 = 3 c^4 / (4 mu (mu + 1)) in direction 1
        mu = 2.0
        p = HypergroupParams(1, 1, mu)
        spec = MomentSpec(tuple(np.eye(1) for _ in range(4)), 4)
        got, err = moment_numeric(p, spec, np.array([[c]]))
        closed = 3.0 * c**4 / (4.0 * mu * (mu + 1.0))
        # the stencil divides series noise by h^4, so a few 1e-6 absolute
        assert got == pytest.approx(closed, rel=5e-4, abs=5e-6)
        assert abs(got - closed) <= max(10.0 * err, 1e-8)

    def test_moment_bound_in_operator_norms(self):
        p = HypergroupParams(2, 1, 3.0)
        s1 = np.diag([1.0, 0.5])
        s2 = np.array([[0.3, 0.2], [0.2, 1.0]])
        r = np.array([[1.2, 0.4], [0.4, 0.7]])
        val, _ = moment_numeric(p, MomentSpec((s1, s2), 2), r)
        cap = np.linalg.norm(r, 2) ** 2 * np.linalg.norm(s1, 2) * np.linalg.norm(s2, 2)
        assert abs(val) <= 1.05 * cap
        val4, _ = moment_numeric(p, MomentSpec((s1, s1, s2, s2), 4), r)
        cap4 = np.linalg.norm(r, 2) ** 4 * (
            np.linalg.norm(s1, 2) ** 2 * np.linalg.norm(s2, 2) ** 2
        )
        assert abs(val4) <= 1.05 * cap4


class TestStepLaws:
    def test_point_mass_step(self):
        p = HypergroupParams(2, 1, 2.5)
        atom = np.diag([0.8, 0.4])
        step = PointMassStep(atom)
        y = step.sample_batch(p, 7, _rng(0))
        assert y.shape == (7, 2, 2)
        assert np.all(y == atom)
        assert np.allclose(step.mean_square(p), atom @ atom)
        s = 0.3 * np.eye(2)
        assert step.fourier(p, s) == pytest.approx(character_phi(p, s, atom), abs=1e-15)

    def test_empirical_step_mixture_transform(self):
        p = HypergroupParams(2, 1, 2.5)
        atoms = np.stack([np.zeros((2, 2)), 2.0 * np.eye(2)])
        meas = EmpiricalMeasure(p, atoms, weights=np.array([0.75, 0.25]))
        step = EmpiricalStep(meas)
        s = 0.4 * np.eye(2)
        want = 0.75 + 0.25 * character_phi(p, s, 2.0 * np.eye(2))
        assert step.fourier(p, s) == pytest.approx(want, abs=1e-13)
        assert np.allclose(step.mean_square(p), 0.25 * 4.0 * np.eye(2))
        y = step.sample_batch(p, 400, _rng(1))
        traces = np.einsum("nii->n", y).real
        assert set(np.round(traces, 12)) <= {0.0, 4.0}

    def test_wishart_step_mean_square(self):
        p = HypergroupParams(2, 1, 2.5)
        cov = np.array([[1.0, 0.3], [0.3, 0.7]])
        step = WishartStep(WishartSpec(p, cov))
        assert np.allclose(step.mean_square(p), 2.0 * p.mu * cov)
        y = step.sample_batch(p, 20_000, _rng(2))
        tr_sq = np.einsum("nij,nji->n", y, y).real
        se = float(np.sqrt(tr_sq.var(ddof=1) / len(tr_sq)))
        assert abs(tr_sq.mean() - 2.0 * p.mu * np.trace(cov)) <= 4.0 * se


class TestWalkEngine:
    def test_config_validation(self):
        p = HypergroupParams(1, 1, 1.0)
        step = PointMassStep(np.eye(1))
        with pytest.raises(ValueError, match="n_steps"):
            WalkConfig(p, step, 0, 10)
        with pytest.raises(ValueError, match="n_steps"):
            WalkConfig(p, step, 10, 0)

    def test_paths_start_at_zero_with_full_shape(self):
        p = HypergroupParams(2, 1, 2.5)
        cfg = WalkConfig(p, PointMassStep(np.diag([0.8, 0.4])), 6, 50, seed=3)
        paths = walk_simulate(cfg)
        assert paths.shape == (50, 7, 2, 2)
        assert np.all(paths[:, 0] == 0)

    def test_first_step_is_the_atom(self):
        # convolving the origin with a point mass must return the point
        p = HypergroupParams(2, 1, 2.5)
        atom = np.diag([0.8, 0.4])
        cfg = WalkConfig(p, PointMassStep(atom), 1, 32, seed=4)
        paths = walk_simulate(cfg)
        assert np.allclose(paths[:, 1], atom, atol=1e-12)

    def test_support_bound_along_paths(self):
        # spectral norms add under the convolution, so ||S_n|| <= n ||atom||
        p = HypergroupParams(2, 2, 4.0)
        atom = np.eye(2)
        cfg = WalkConfig(p, PointMassStep(atom), 8, 64, seed=5)
        paths = walk_simulate(cfg)
        for k in range(9):
            top = np.linalg.eigvalsh(paths[:, k])[:, -1].max()
            assert top <= k + 1e-9


class TestMartingale:
    def test_character_and_matrix_identities_hold(self):
        p = HypergroupParams(2, 1, 2.5)
        step = PointMassStep(np.diag([0.8, 0.4]))
        rep = martingale_check(p, step, 0.3 * np.eye(2), 16, 4000, _rng(6))
        assert rep["passed"]
        assert rep["max_dev_sigma"] <= 3.0
        assert [row["n"] for row in rep["checkpoints"]] == [1, 2, 4, 8, 16]
        assert rep["mu_hat"] == pytest.approx(
            character_phi(p, 0.3 * np.eye(2), np.diag([0.8, 0.4])), abs=1e-14
        )

    def test_decayed_transform_rejected(self):
        # around its zeros the transform gives no signal-to-noise at large n
        p = HypergroupParams(1, 1, 1.0)
        step = PointMassStep(np.eye(1))
        with pytest.raises(ValueError, match="< 0.1"):
            martingale_check(p, step, 5.0 * np.eye(1), 8, 100, _rng(7))


class TestCentralLimit:
    def test_needs_room_between_checkpoints(self):
        p = HypergroupParams(1, 1, 1.5)
        with pytest.raises(ValueError, match="n_small"):
            clt_experiment(p, PointMassStep(np.eye(1)), 4, 100, [np.eye(1)], _rng(8))

    def test_scalar_walk_converges_to_rayleigh(self):
        # mu = 1 makes the limit law an exact Rayleigh, testable pathwise
        p = HypergroupParams(1, 1, 1.0)
        cfg = WalkConfig(p, PointMassStep(np.eye(1)), 64, 4000, seed=9)
        final = walk_simulate(cfg)[:, -1, 0, 0] / 8.0
        stat = scipy.stats.kstest(final, scipy.stats.rayleigh(scale=1.0 / math.sqrt(2.0)).cdf)
        assert stat.pvalue > 1e-3

    def test_fourier_deviations_shrink_with_time(self):
        p = HypergroupParams(1, 1, 1.5)
        step = PointMassStep(np.eye(1))
        grid = [0.8 * np.eye(1), 1.6 * np.eye(1)]
        rep = clt_experiment(p, step, 32, 3000, grid, _rng(10))
        assert rep["n_small"] == 4 and rep["n_final"] == 32
        # point-mass steps make the plug-in second moment exact
        assert np.allclose(rep["sigma2_plugin"], rep["sigma2_closed"], atol=1e-12)
        assert np.allclose(rep["sigma2_closed"], np.eye(1) / (2.0 * p.mu))
        assert rep["n_eligible"] >= 1
        assert rep["sup_dev_final"] < 0.05
        for row in rep["grid"]:
            assert set(row) >= {"target", "est_small", "est_final", "eligible", "improved"}


class TestStrongLaw:
    def test_normalizer_rule_validation(self):
        p = HypergroupParams(1, 1, 1.0)
        step = PointMassStep(np.eye(1))
        with pytest.raises(ValueError, match="unknown normalizer"):
            slln_experiment(p, step, "cubic", 1.0, 8, 10, _rng(11))
        with pytest.raises(ValueError, match="lam in"):
            slln_experiment(p, step, "power", 2.5, 8, 10, _rng(11))

    def test_linear_normalizer_drives_ratio_down(self):
        p = HypergroupParams(1, 1, 1.0)
        step = WishartStep(WishartSpec(p))
        rep = slln_experiment(p, step, "linear", 0.0, 256, 200, _rng(12))
        assert rep["checkpoints"] == [1, 2, 4, 8, 16, 32, 64, 128, 256]
        assert rep["condition_summable"]
        assert rep["medians_decreasing"]
        assert rep["frac_final_below_first"] >= 0.9

    def test_power_normalizer_summability_flag(self):
        p = HypergroupParams(1, 1, 1.0)
        step = PointMassStep(np.eye(1))
        rep = slln_experiment(p, step, "power", 1.5, 8, 20, _rng(13))
        assert rep["condition_summable"]  # exponent 2/lam = 4/3 > 1
        assert rep["checkpoints"][-1] == 8
