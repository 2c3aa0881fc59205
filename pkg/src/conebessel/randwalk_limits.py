"""Random walks driven by the cone convolution and their limit experiments.

A walk starts at 0 and moves by S_n = S_{n-1} * Y_n in the hypergroup sense:
the next position is a draw from the convolution of the current point mass
with the step law.  Characters turn these walks into products, which gives a
martingale diagnostic, a central limit theorem with squared Wishart limit,
and strong laws of large numbers; all three are exposed as seeded Monte
Carlo experiments with closed-form targets where available.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cone_core import HypergroupParams, as_matrix, frob_norm
from .jack_series import bessel_from_eigs, character_phi, character_phi_batch
from .ball_measure import EmpiricalMeasure, conv_pairwise_batch
from .wishart import WishartSpec, fourier_closed, sample_scaled_batch


# ---------------------------------------------------------------------------
# step laws


class PointMassStep:
    """Deterministic step: every increment equals the fixed cone point."""

    tag = "point_mass"

    def __init__(self, point):
        self.point = np.asarray(as_matrix(point))

    def sample_batch(self, p: HypergroupParams, n: int, rng: np.random.Generator):
        return np.broadcast_to(self.point, (n,) + self.point.shape).copy()

    def mean_square(self, p: HypergroupParams) -> np.ndarray:
        return self.point @ self.point

    def fourier(self, p: HypergroupParams, s) -> float:
        return character_phi(p, as_matrix(s), self.point)


class WishartStep:
    """Steps drawn from a scaled square-root Wishart law."""

    tag = "wishart"

    def __init__(self, spec: WishartSpec):
        self.spec = spec

    def sample_batch(self, p: HypergroupParams, n: int, rng: np.random.Generator):
        return sample_scaled_batch(self.spec, n, rng)

    def mean_square(self, p: HypergroupParams) -> np.ndarray:
        return 2.0 * p.mu * self.spec.covariance

    def fourier(self, p: HypergroupParams, s) -> float:
        return fourier_closed(p, self.spec.covariance, s)


class EmpiricalStep:
    """Steps resampled from a stored weighted sample cloud."""

    tag = "empirical"

    def __init__(self, measure: EmpiricalMeasure):
        self.measure = measure

    def sample_batch(self, p: HypergroupParams, n: int, rng: np.random.Generator):
        idx = rng.choice(self.measure.points.shape[0], size=n, p=self.measure.weights)
        return self.measure.points[idx]

    def mean_square(self, p: HypergroupParams) -> np.ndarray:
        pts = self.measure.points
        sq = pts @ pts
        return np.einsum("n,nij->ij", self.measure.weights, sq)

    def fourier(self, p: HypergroupParams, s) -> float:
        vals = character_phi_batch(p, as_matrix(s), self.measure.points)
        return float(np.sum(self.measure.weights * vals))


@dataclass(frozen=True)
class WalkConfig:
    params: HypergroupParams
    step_law: object
    n_steps: int
    n_replicas: int
    seed: int = 0

    def __post_init__(self):
        if self.n_steps < 1 or self.n_replicas < 1:
            raise ValueError("need n_steps >= 1 and n_replicas >= 1")


@dataclass(frozen=True)
class MomentSpec:
    """Directions (s_1, ..., s_k) and the even order k of a moment function."""

    directions: tuple
    order: int

    def __post_init__(self):
        dirs = tuple(np.asarray(as_matrix(s)) for s in self.directions)
        if self.order % 2 != 0:
            raise ValueError("odd moment functions vanish; order must be even")
        if self.order not in (2, 4):
            raise ValueError(f"only orders 2 and 4 are implemented, got {self.order}")
        if len(dirs) != self.order:
            raise ValueError("need exactly one direction per derivative")
        object.__setattr__(self, "directions", dirs)


# ---------------------------------------------------------------------------
# walk engine


def _walk_snapshots(
    p: HypergroupParams,
    step_law,
    checkpoints,
    n_replicas: int,
    rng: np.random.Generator,
    accumulate_step_square: bool = False,
):
    """Run the walk once, returning {n: S_n copy} at the requested times.

    Optionally accumulates the entrywise mean of Y^2 over every step actually
    taken (the plug-in second moment on the same sample budget)."""
    wanted = set(int(c) for c in checkpoints)
    n_max = max(wanted)
    q = p.q
    s = np.zeros((n_replicas, q, q), dtype=p.dtype)
    out = {}
    if 0 in wanted:
        out[0] = s.copy()
    acc = np.zeros((q, q), dtype=p.dtype) if accumulate_step_square else None
    for k in range(1, n_max + 1):
        y = step_law.sample_batch(p, n_replicas, rng)
        if accumulate_step_square:
            acc += np.einsum("nij,njk->ik", y, y) / n_replicas
        s = conv_pairwise_batch(p, s, y, rng)
        if k in wanted:
            out[k] = s.copy()
    if accumulate_step_square:
        return out, acc / n_max
    return out


def walk_simulate(cfg: WalkConfig, rng: np.random.Generator | None = None) -> np.ndarray:
    """Full paths of the hypergroup random walk, shape
    (n_replicas, n_steps + 1, q, q), with S_0 = 0."""
    if rng is None:
        rng = np.random.default_rng(cfg.seed)
    p = cfg.params
    q = p.q
    paths = np.zeros((cfg.n_replicas, cfg.n_steps + 1, q, q), dtype=p.dtype)
    s = np.zeros((cfg.n_replicas, q, q), dtype=p.dtype)
    for k in range(1, cfg.n_steps + 1):
        y = cfg.step_law.sample_batch(p, cfg.n_replicas, rng)
        s = conv_pairwise_batch(p, s, y, rng)
        paths[:, k] = s
    return paths


# ---------------------------------------------------------------------------
# moment functions


def moment_m2(p: HypergroupParams, s1, s2, r) -> float:
    """Second moment function: Re tr(s1 r^2 s2) / (2 mu)."""
    s1m = as_matrix(s1)
    s2m = as_matrix(s2)
    rm = as_matrix(r)
    return float(np.trace(s1m @ rm @ rm @ s2m).real / (2.0 * p.mu))


def _character_at(p: HypergroupParams, smat: np.ndarray, r2: np.ndarray, tol: float) -> float:
    arg = smat @ r2 @ smat
    eigs = 0.25 * np.linalg.eigvalsh(0.5 * (arg + arg.conj().T))
    return bessel_from_eigs(eigs, p.mu, p.d, target_tol=tol).value


def moment_numeric(
    p: HypergroupParams,
    spec: MomentSpec,
    r,
    h: float | None = None,
) -> tuple[float, float]:
    """Moment function by central differences of the character at s = 0,
    with one Richardson level; returns (value, error_estimate).

    The character is even in its spectral parameter, which collapses the
    central stencils to half their evaluations.
    """
    rm = as_matrix(r)
    r2 = rm @ rm
    series_tol = 1e-12
    rnorm = frob_norm(rm)
    if spec.order == 2:
        if h is None:
            h = 1e-3 / (1.0 + rnorm)
        s1, s2 = spec.directions
        plus = s1 + s2
        minus = s1 - s2

        def a_of(step):
            return (
                _character_at(p, step * plus, r2, series_tol)
                - _character_at(p, step * minus, r2, series_tol)
            ) / (2.0 * step * step)

        coarse = a_of(h)
        fine = a_of(0.5 * h)
        rich = (4.0 * fine - coarse) / 3.0
        err = abs(fine - coarse) / 3.0 + 1e-14 / (h * h)
        return -rich, err

    if h is None:
        h = 0.05 / (1.0 + rnorm)
    dirs = spec.directions

    def b_of(step):
        total = 0.0
        # evenness: fix the first sign, double the half-sum
        for signs in np.ndindex(*(2,) * (len(dirs) - 1)):
            eps = (1,) + tuple(1 - 2 * int(b) for b in signs)
            combo = sum(e * s for e, s in zip(eps, dirs))
            prod_sign = 1
            for e in eps:
                prod_sign *= e
            total += prod_sign * _character_at(p, step * combo, r2, series_tol)
        return 2.0 * total / (2.0 * step) ** 4

    coarse = b_of(h)
    fine = b_of(0.5 * h)
    rich = (4.0 * fine - coarse) / 3.0
    err = abs(fine - coarse) / 3.0 + 1e-13 / h ** 4
    return rich, err


# ---------------------------------------------------------------------------
# limit experiments


def clt_experiment(
    p: HypergroupParams,
    step_law,
    n: int,
    replicas: int,
    s_grid,
    rng: np.random.Generator,
    n_small: int = 4,
) -> dict:
    """Fourier-side central limit check against the squared Wishart target.

    Simulates the walk once, snapshots it at n_small and n, rescales each
    snapshot by 1/sqrt(time), and compares the empirical character average at
    every grid point with exp(-tr(s sigma^2 s)/2).  The paired deviations on
    one common set of paths show the n_small -> n improvement without
    replica noise swamping it.
    """
    if n <= n_small:
        raise ValueError(f"need n > n_small = {n_small}")
    snaps, plugin_ms = _walk_snapshots(
        p, step_law, {n_small, n}, replicas, rng, accumulate_step_square=True
    )
    # the theorem's sigma^2 is a population quantity; the experiment targets
    # its plug-in estimate from the very steps taken (closed form reported too)
    sigma2_plugin = plugin_ms / (2.0 * p.mu)
    sigma2_plugin = 0.5 * (sigma2_plugin + sigma2_plugin.conj().T)
    closed_ms = step_law.mean_square(p)

    rows = []
    sup_final = 0.0
    for smat_in in s_grid:
        smat = as_matrix(smat_in)
        target = fourier_closed(p, sigma2_plugin, smat)
        entry = {"s_norm": float(np.linalg.norm(smat, 2)), "target": target}
        for label, m in (("small", n_small), ("final", n)):
            pts = snaps[m] / np.sqrt(float(m))
            vals = character_phi_batch(p, smat, pts)
            est = float(vals.mean())
            se = float(np.sqrt(vals.var(ddof=1) / replicas))
            entry[f"est_{label}"] = est
            entry[f"stderr_{label}"] = se
            entry[f"dev_{label}"] = abs(est - target)
        sup_final = max(sup_final, entry["dev_final"])
        entry["eligible"] = bool(abs(1.0 - target) > 0.05)
        entry["improved"] = bool(entry["dev_final"] < entry["dev_small"])
        rows.append(entry)

    eligible = [row for row in rows if row["eligible"]]
    return {
        "experiment": "clt",
        "n_small": n_small,
        "n_final": n,
        "replicas": replicas,
        "sigma2_plugin": sigma2_plugin,
        "sigma2_closed": closed_ms / (2.0 * p.mu),
        "grid": rows,
        "sup_dev_final": sup_final,
        "n_eligible": len(eligible),
        "n_improved": sum(1 for row in eligible if row["improved"]),
        "all_eligible_improved": all(row["improved"] for row in eligible),
    }


def slln_experiment(
    p: HypergroupParams,
    step_law,
    a_rule: str,
    lam: float,
    n_max: int,
    replicas: int,
    rng: np.random.Generator,
) -> dict:
    """Strong-law trend experiment: tracks ||S_n|| / a_n along a geometric
    time schedule, for a_n = n or a_n = n^(1/lam) with lam in (0, 2)."""
    if a_rule not in ("linear", "power"):
        raise ValueError(f"unknown normalizer rule {a_rule!r}")
    if a_rule == "power" and not 0.0 < lam < 2.0:
        raise ValueError(f"power normalizer needs lam in (0, 2), got {lam}")

    checkpoints = []
    k = 1
    while k <= n_max:
        checkpoints.append(k)
        k *= 2
    if checkpoints[-1] != n_max:
        checkpoints.append(n_max)

    snaps = _walk_snapshots(p, step_law, set(checkpoints), replicas, rng)

    def norm_of(nval):
        a = float(nval) if a_rule == "linear" else float(nval) ** (1.0 / lam)
        mats = snaps[nval]
        return np.sqrt(np.einsum("nij,nij->n", mats, mats.conj()).real) / a

    ratios = {nval: norm_of(nval) for nval in checkpoints}
    medians = [float(np.median(ratios[nval])) for nval in checkpoints]
    maxima = [float(ratios[nval].max()) for nval in checkpoints]
    frac_below = float(np.mean(ratios[checkpoints[-1]] < ratios[checkpoints[0]]))

    # summability of a_n^{-2} tr E[Y^2]: the condition behind the strong law
    tr_ms = float(np.trace(step_law.mean_square(p)).real)
    exps = 2.0 if a_rule == "linear" else 2.0 / lam
    partial = tr_ms * sum(1.0 / float(nval) ** exps for nval in range(1, n_max + 1))

    return {
        "experiment": "slln",
        "a_rule": a_rule,
        "lam": lam,
        "checkpoints": checkpoints,
        "replicas": replicas,
        "medians": medians,
        "maxima": maxima,
        "frac_final_below_first": frac_below,
        "condition_partial_sum": partial,
        "condition_summable": bool(exps > 1.0),
        "medians_decreasing": bool(
            all(medians[i + 1] < medians[i] for i in range(len(medians) - 1))
        ),
    }


def martingale_check(
    p: HypergroupParams,
    step_law,
    s,
    n: int,
    replicas: int,
    rng: np.random.Generator,
) -> dict:
    """Character and second-moment martingale identities along the walk.

    Checks E[phi_s(S_k)] = (step transform at s)^k at geometric times, and
    the entrywise identity E[S_n^2] = n E[Y^2] at the final time.
    """
    smat = as_matrix(s)
    mu_hat = step_law.fourier(p, smat)
    if mu_hat < 0.1:
        raise ValueError(
            f"step transform at s is {mu_hat:.4f} < 0.1; choose a smaller spectral parameter"
        )

    checkpoints = []
    k = 1
    while k <= n:
        checkpoints.append(k)
        k *= 2
    if checkpoints[-1] != n:
        checkpoints.append(n)

    snaps = _walk_snapshots(p, step_law, set(checkpoints), replicas, rng)

    rows = []
    worst = 0.0
    for nval in checkpoints:
        vals = character_phi_batch(p, smat, snaps[nval])
        est = float(vals.mean())
        se = float(np.sqrt(vals.var(ddof=1) / replicas))
        target = mu_hat ** nval
        # deterministic steps give se ~ 0; deviations at float noise are a pass
        floor = 1e-12 * max(1.0, abs(target))
        dev = abs(est - target) / max(se, floor)
        worst = max(worst, dev)
        rows.append(
            {"n": nval, "estimate": est, "stderr": se, "target": target, "dev_sigma": dev}
        )

    final = snaps[checkpoints[-1]]
    sq = final @ final
    target_sq = checkpoints[-1] * step_law.mean_square(p)
    diff = sq.mean(axis=0) - target_sq
    floor_mat = 1e-12 * np.maximum(1.0, np.abs(target_sq))
    se_mat = np.sqrt(sq.real.var(axis=0, ddof=1) / replicas)
    if p.d == 2:
        se_im = np.sqrt(sq.imag.var(axis=0, ddof=1) / replicas)
        dev_mat = max(
            float(np.max(np.abs(diff.real) / np.maximum(se_mat, floor_mat))),
            float(np.max(np.abs(diff.imag) / np.maximum(se_im, floor_mat))),
        )
    else:
        dev_mat = float(np.max(np.abs(diff.real) / np.maximum(se_mat, floor_mat)))
    worst = max(worst, dev_mat)

    return {
        "experiment": "martingale",
        "mu_hat": mu_hat,
        "checkpoints": rows,
        "matrix_dev_sigma": dev_mat,
        "max_dev_sigma": worst,
        "replicas": replicas,
        "passed": bool(worst <= 3.0),
    }
