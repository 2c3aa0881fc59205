"""Command-line harness: subcommands, config files, seeding, and the
acceptance-check registry.

Every run is reproducible from (config, seed): randomness flows only through
numpy SeedSequence children derived from the root seed, workers receive
disjoint shards reduced in shard order, and every output artifact embeds the
parameter triple, seed, worker count, and package version.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .cone_core import (
    HypergroupParams,
    psd_sqrt_batch,
    random_psd,
    read_matrix_text,
)
from .jack_series import (
    CharacterFunctional,
    bessel_from_eigs,
    bessel_J,
    bessel_series_eigs,
    character_phi,
    character_phi_batch,
    j_alpha_scalar,
    jack_C,
    partitions,
    zonal_Z,
    _monic_tables,
    _monomial_sym,
)
from .ball_measure import (
    EmpiricalMeasure,
    conv_expect,
    conv_pairwise_batch,
    conv_sample_batch,
    kappa,
    norm_excess_watermark,
    phi_bochner,
    sample_ball_batch,
    support_window_fraction,
)
from .hypergroup_algebra import (
    Automorphism,
    automorphism_apply,
    automorphism_apply_batch,
)
from .wishart import (
    WishartSpec,
    fourier_closed,
    sample_scaled_batch,
    sample_standard_batch,
    semigroup_check,
    translated_density,
)
from .randwalk_limits import (
    EmpiricalStep,
    MomentSpec,
    PointMassStep,
    WishartStep,
    clt_experiment,
    martingale_check,
    moment_m2,
    moment_numeric,
    slln_experiment,
)

_INT_KEYS = {"q", "d", "n", "n_samples", "steps", "n_steps", "replicas", "n_max", "seed", "workers", "criterion"}
_FLOAT_KEYS = {"mu", "t", "tol", "lam", "c"}


@dataclass
class RunConfig:
    command: str
    params: HypergroupParams | None
    options: dict = field(default_factory=dict)
    seed: int = 0
    workers: int = 1
    output_path: str | None = None


def load_config(path) -> dict:
    """Flat key=value config file; '#' starts a comment.  Returns the raw
    option mapping (typed by key) for merging under explicit flags."""
    out = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            key, eq, val = line.partition("=")
            if not eq:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {raw.strip()!r}")
            key = key.strip().replace("-", "_")
            val = val.strip()
            if not key or not val:
                raise ValueError(f"{path}:{lineno}: empty key or value")
            try:
                if key in _INT_KEYS:
                    out[key] = int(val)
                elif key in _FLOAT_KEYS:
                    out[key] = float(val)
                else:
                    out[key] = val
            except ValueError as exc:
                raise ValueError(f"{path}:{lineno}: field {key!r}: {exc}") from None
    return out


def _resolve_seed(flag_seed, cfg: dict) -> int:
    if flag_seed is not None:
        return int(flag_seed)
    if "seed" in cfg:
        return int(cfg["seed"])
    env = os.environ.get("CONEBESSEL_SEED")
    if env is not None:
        return int(env)
    return 0


def _rng(seed: int, *stream) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed)] + [int(s) for s in stream]))


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            return {"re": obj.real.tolist(), "im": obj.imag.tolist()}
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    raise TypeError(f"not serializable: {type(obj)}")


def _emit(report: dict, output_path: str | None) -> None:
    text = json.dumps(report, indent=2, default=_json_default)
    if output_path:
        with open(output_path, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


def _meta(p: HypergroupParams | None, seed: int, workers: int) -> dict:
    meta = {"seed": seed, "workers": workers, "version": __version__}
    if p is not None:
        meta["params"] = {"q": p.q, "d": p.d, "mu": p.mu}
    return meta


def _shards(n: int, workers: int) -> list[int]:
    workers = max(1, min(workers, n))
    base, extra = divmod(n, workers)
    return [base + (1 if i < extra else 0) for i in range(workers)]


def _parallel_stack(total: int, workers: int, seed: int, stream: int, draw) -> np.ndarray:
    """Seeded, sharded sampling: draw(m, rng) per shard, concatenated in
    shard order so the result is deterministic for a fixed worker count."""
    counts = _shards(total, workers)
    rngs = [_rng(seed, stream, i) for i in range(len(counts))]
    if len(counts) == 1:
        return draw(counts[0], rngs[0])
    with ThreadPoolExecutor(max_workers=len(counts)) as pool:
        futs = [pool.submit(draw, m, r) for m, r in zip(counts, rngs)]
        return np.concatenate([f.result() for f in futs], axis=0)


# ---------------------------------------------------------------------------
# quadrature helper (normalization pinning)


def _adaptive_simpson(f, a: float, b: float, tol: float) -> float:
    """Classic recursive adaptive Simpson with error sharing."""

    def simpson(x0, x2, f0, f1, f2):
        return (x2 - x0) / 6.0 * (f0 + 4.0 * f1 + f2)

    def recurse(x0, x2, f0, f1, f2, whole, eps, depth):
        x1 = 0.5 * (x0 + x2)
        lm = 0.5 * (x0 + x1)
        rm = 0.5 * (x1 + x2)
        flm = f(lm)
        frm = f(rm)
        left = simpson(x0, x1, f0, flm, f1)
        right = simpson(x1, x2, f1, frm, f2)
        if depth <= 0:
            return left + right
        if abs(left + right - whole) <= 15.0 * eps:
            return left + right + (left + right - whole) / 15.0
        return recurse(x0, x1, f0, flm, f1, left, eps / 2.0, depth - 1) + recurse(
            x1, x2, f1, frm, f2, right, eps / 2.0, depth - 1
        )

    fa, fb = f(a), f(b)
    mid = 0.5 * (a + b)
    fm = f(mid)
    whole = simpson(a, b, fa, fm, fb)
    return recurse(a, b, fa, fm, fb, whole, tol, 48)


# ---------------------------------------------------------------------------
# acceptance criteria registry


def _crit_result(index, name, passed, t0, **details):
    details = {k: v for k, v in details.items()}
    return {
        "index": index,
        "name": name,
        "passed": bool(passed),
        "runtime_s": round(time.perf_counter() - t0, 3),
        "details": details,
    }


def _criterion_1(seed: int) -> dict:
    """Trace identity: the weight-k Jack layer sums to (tr x)^k."""
    t0 = time.perf_counter()
    rng = _rng(seed, 101)
    worst = 0.0
    for q in (1, 2, 3):
        for d in (1, 2):
            alpha = 2.0 / d
            eigs = np.empty((200, q))
            filled = 0
            while filled < 200:
                h = rng.standard_normal((200, q, q))
                if d == 2:
                    h = h + 1j * rng.standard_normal((200, q, q))
                h = 0.5 * (h + np.swapaxes(h, -1, -2).conj())
                e = np.linalg.eigvalsh(h)
                keep = np.abs(e.sum(axis=1)) >= 0.3
                take = min(int(keep.sum()), 200 - filled)
                eigs[filled : filled + take] = e[keep][:take]
                filled += take
            traces = eigs.sum(axis=1)
            for k in range(1, 7):
                powers = [eigs ** e for e in range(k + 1)]
                total = np.zeros(200)
                parts, coeffs, norms = _monic_tables(k, q, alpha)
                for lam in parts:
                    acc = np.zeros(200)
                    for sig, c in coeffs[lam].items():
                        acc += c * _monomial_sym(sig, powers)
                    total += norms[lam] * acc
                rel = np.max(np.abs(total - traces ** k) / np.abs(traces) ** k)
                worst = max(worst, float(rel))
            # spot-check the public evaluators on a few matrices
            p = HypergroupParams(q, d, float(d * q), sampling_only=True)
            for row in eigs[:3]:
                x = np.diag(row).astype(p.dtype)
                tot = sum(zonal_Z(p, lam, x) for lam in partitions(3, q))
                rel = abs(tot - row.sum() ** 3) / abs(row.sum()) ** 3
                worst = max(worst, float(rel))
    return _crit_result(1, "trace-identity", worst <= 1e-8, t0, max_rel_err=worst)


def _criterion_2(seed: int) -> dict:
    """Rank-one characters reduce to the scalar 0F1 Bessel series."""
    t0 = time.perf_counter()
    rng = _rng(seed, 102)
    worst = 0.0
    for mu in (0.8, 1.5, 3.0, 7.5):
        p = HypergroupParams(1, 1, mu, sampling_only=True)
        for _ in range(125):
            s = float(rng.uniform(0.0, math.sqrt(10.0)))
            r = float(rng.uniform(0.0, math.sqrt(10.0)))
            via_matrix = character_phi(p, np.array([[s]]), np.array([[r]]), target_tol=1e-12)
            via_scalar = j_alpha_scalar(mu - 1.0, s * r)
            worst = max(worst, abs(via_matrix - via_scalar))
    return _crit_result(2, "rank-one-reduction", worst <= 1e-10, t0, max_abs_err=worst)


def _criterion_3(seed: int) -> dict:
    """Characters: series evaluation vs the oscillatory ball integral."""
    t0 = time.perf_counter()
    n_samples = 100_000
    combos = []
    for q in (1, 2, 3):
        for d in (1, 2):
            rho = d * (q - 0.5) + 1.0
            combos.append(HypergroupParams(q, d, rho + 0.5))
            combos.append(HypergroupParams(q, d, 2.0 * rho))
    n_pass = 0
    total = 0
    worst = 0.0
    for ci, p in enumerate(combos):
        rng = _rng(seed, 103, ci)
        for _ in range(25):
            r = random_psd(p, rng, norm=float(rng.uniform(0.3, 1.6)))
            s = random_psd(p, rng, norm=float(rng.uniform(0.3, 1.6)))
            arg = s @ r @ r @ s
            eigs = 0.25 * np.linalg.eigvalsh(0.5 * (arg + arg.conj().T))
            exact = bessel_from_eigs(eigs, p.mu, p.d, target_tol=1e-9)
            est, se = phi_bochner(p, s, r, n_samples, rng)
            tol = 3.0 * se + exact.truncation_bound
            dev = abs(est - exact.value)
            total += 1
            if dev <= tol:
                n_pass += 1
            worst = max(worst, dev / max(tol, 1e-300))
    frac = n_pass / total
    return _crit_result(
        3, "bochner-vs-series", frac >= 0.99, t0, n_pass=n_pass, n_total=total, worst_ratio=worst
    )


def _criterion_4(seed: int) -> dict:
    """Product formula: conv_expect of a character splits into a product."""
    t0 = time.perf_counter()
    n_samples = 20_000
    n_pass = 0
    total = 0
    worst = 0.0
    ci = 0
    for q in (1, 2):
        for d in (1, 2):
            rho = d * (q - 0.5) + 1.0
            for mu in (rho + 0.5, 2.0 * rho):
                p = HypergroupParams(q, d, mu)
                rng = _rng(seed, 104, ci)
                ci += 1
                rs = [random_psd(p, rng, norm=float(rng.uniform(0.4, 1.3))) for _ in range(3)]
                ss = [random_psd(p, rng, norm=float(rng.uniform(0.4, 1.3))) for _ in range(3)]
                ts = [random_psd(p, rng, norm=float(rng.uniform(0.4, 1.3))) for _ in range(3)]
                for r in rs:
                    for s in ss:
                        for tt in ts:
                            functional = CharacterFunctional(p, tt, target_tol=1e-9)
                            est, se = conv_expect(p, functional, r, s, n_samples, rng)
                            target = character_phi(p, tt, r) * character_phi(p, tt, s)
                            dev = abs(est - target)
                            tol = 3.0 * se + 1e-8
                            total += 1
                            if dev <= tol:
                                n_pass += 1
                            worst = max(worst, dev / max(tol, 1e-300))
    return _crit_result(
        4, "product-formula", n_pass == total, t0, n_pass=n_pass, n_total=total, worst_ratio=worst
    )


def _criterion_5(seed: int) -> dict:
    """Convolution of r with c*r stays in the window [(1-c)r, (1+c)r]."""
    t0 = time.perf_counter()
    n_samples = 100_000
    runs = []
    ci = 0
    for q, d in ((2, 1), (2, 2)):
        rho = d * (q - 0.5) + 1.0
        p = HypergroupParams(q, d, rho + 0.5)
        for c in (0.3, 1.0):
            for rank in (q, 1):
                rng = _rng(seed, 105, ci)
                ci += 1
                r = random_psd(p, rng, norm=1.0, rank=rank)
                zs = conv_sample_batch(p, r, c * r, n_samples, rng)
                frac = support_window_fraction(p, r, c, zs, tol=1e-8)
                runs.append(
                    {"q": q, "d": d, "c": c, "rank": rank, "fraction_inside": frac}
                )
    ok = all(run["fraction_inside"] == 1.0 for run in runs)
    return _crit_result(5, "support-window", ok, t0, runs=runs)


def _criterion_6(seed: int) -> dict:
    """Norm bound ||z|| <= ||r|| + ||s|| for every convolution sample; reads
    the process-wide watermark maintained by the samplers, then adds a
    dedicated sweep including rank-deficient pairs."""
    t0 = time.perf_counter()
    inherited = norm_excess_watermark()
    ci = 0
    for q in (1, 2, 3):
        for d in (1, 2):
            rho = d * (q - 0.5) + 1.0
            p = HypergroupParams(q, d, rho + 0.5)
            rng = _rng(seed, 106, ci)
            ci += 1
            r = random_psd(p, rng, norm=float(rng.uniform(0.5, 1.5)))
            s = random_psd(p, rng, norm=float(rng.uniform(0.5, 1.5)), rank=max(1, q - 1))
            conv_sample_batch(p, r, s, 100_000, rng)
    watermark = norm_excess_watermark()
    ok = watermark <= 1e-9
    return _crit_result(
        6,
        "norm-support-bound",
        ok,
        t0,
        watermark=watermark,
        watermark_before_sweep=inherited,
    )


def _criterion_7(seed: int) -> dict:
    """Invertible maps commute with convolution (Fourier panel comparison)."""
    t0 = time.perf_counter()
    n_samples = 20_000
    p = HypergroupParams(2, 1, 3.0)
    n_pass = 0
    total = 0
    worst = 0.0
    for ai in range(5):
        rng = _rng(seed, 107, ai)
        a = rng.standard_normal((2, 2))
        t_a = Automorphism(a)
        x = random_psd(p, rng, norm=1.0)
        y = random_psd(p, rng, norm=0.8)
        za = automorphism_apply_batch(t_a, conv_sample_batch(p, x, y, n_samples, rng))
        zb = conv_sample_batch(
            p, automorphism_apply(t_a, x), automorphism_apply(t_a, y), n_samples, rng
        )
        scale = 0.8 / max(float(np.abs(za).max()), 1e-12)
        dirs = [np.eye(2), np.diag([1.0, 0.4])]
        h = rng.standard_normal((2, 2))
        dirs.append((h @ h.T) / np.linalg.norm(h @ h.T, 2))
        for c in (0.5, 1.0):
            for direction in dirs:
                smat = c * scale * direction
                va = character_phi_batch(p, smat, za)
                vb = character_phi_batch(p, smat, zb)
                diff = abs(float(va.mean() - vb.mean()))
                se = math.sqrt(va.var(ddof=1) / n_samples + vb.var(ddof=1) / n_samples)
                total += 1
                if diff <= 3.0 * se:
                    n_pass += 1
                worst = max(worst, diff / max(3.0 * se, 1e-300))
    return _crit_result(
        7, "automorphism-covariance", n_pass == total, t0, n_pass=n_pass, n_total=total, worst_ratio=worst
    )


def _criterion_8(seed: int) -> dict:
    """Bessel value only sees the nonzero block: J^q(blockdiag(r,0)) = J^k(r)."""
    t0 = time.perf_counter()
    rng = _rng(seed, 108)
    worst = 0.0
    q = 3
    for d in (1, 2):
        rho = d * (q - 0.5) + 1.0
        mu = rho + 0.5
        for k in (1, 2):
            pk = HypergroupParams(k, d, mu, sampling_only=True)
            for _ in range(100):
                small = random_psd(pk, rng, norm=float(rng.uniform(0.2, 2.5)))
                eigs_small = np.linalg.eigvalsh(small)
                eigs_big = np.concatenate([eigs_small, np.zeros(q - k)])
                v_small = bessel_from_eigs(eigs_small, mu, d, target_tol=1e-12).value
                v_big = bessel_from_eigs(eigs_big, mu, d, target_tol=1e-12).value
                worst = max(worst, abs(v_big - v_small))
    return _crit_result(8, "character-restriction", worst <= 1e-9, t0, max_abs_err=worst)


def _criterion_9(seed: int) -> dict:
    """Scaled Wishart sampler matches the closed Fourier transform."""
    t0 = time.perf_counter()
    n_samples = 100_000
    q = 2
    n_pass = 0
    total = 0
    worst = 0.0
    ci = 0
    for d in (1, 2):
        rho = d * (q - 0.5) + 1.0
        p = HypergroupParams(q, d, rho + 0.5)
        rng = _rng(seed, 109, ci)
        ci += 1
        g = random_psd(p, rng, norm=1.0)
        u = random_psd(p, rng, norm=1.0, rank=1)
        covs = [np.eye(q, dtype=p.dtype), g + 0.3 * np.eye(q, dtype=p.dtype), u]
        for cov in covs:
            spec = WishartSpec(p, cov)
            rs = sample_scaled_batch(spec, n_samples, rng)
            v_scale = 1.0 / math.sqrt(max(np.linalg.norm(cov, 2), 1e-12))
            grid = [c * v_scale * np.eye(q) for c in np.linspace(0.3, 1.2, 6)]
            for _ in range(4):
                h = rng.standard_normal((q, q))
                if d == 2:
                    h = h + 1j * rng.standard_normal((q, q))
                h = h @ h.conj().T
                grid.append(v_scale * h / np.linalg.norm(h, 2))
            for smat in grid:
                vals = character_phi_batch(p, smat, rs)
                est = float(vals.mean())
                se = float(math.sqrt(vals.var(ddof=1) / n_samples))
                target = fourier_closed(p, cov, smat)
                dev = abs(est - target)
                total += 1
                if dev <= 3.0 * se:
                    n_pass += 1
                worst = max(worst, dev / max(3.0 * se, 1e-300))
    return _crit_result(
        9, "wishart-fourier", n_pass == total, t0, n_pass=n_pass, n_total=total, worst_ratio=worst
    )


def _criterion_10(seed: int) -> dict:
    """Semigroup: W(a^2) * W(b^2) has the transform of W(a^2 + b^2)."""
    t0 = time.perf_counter()
    reports = []
    ci = 0
    for q, d in ((2, 1), (2, 2)):
        rho = d * (q - 0.5) + 1.0
        p = HypergroupParams(q, d, rho + 0.5)
        rng = _rng(seed, 110, ci)
        ci += 1
        b2 = random_psd(p, rng, norm=1.2)
        rep = semigroup_check(p, np.eye(q, dtype=p.dtype), b2, 100_000, rng)
        reports.append({"q": q, "d": d, "max_dev_sigma": rep["max_dev_sigma"], "passed": rep["passed"]})
    ok = all(r["passed"] for r in reports)
    return _crit_result(10, "wishart-semigroup", ok, t0, runs=reports)


def _criterion_11(seed: int) -> dict:
    """Triangular-gamma sampler vs raw Gaussian matrix construction."""
    t0 = time.perf_counter()
    n_samples = 100_000
    q = 2
    rows = []
    ci = 0
    ok = True
    for d in (1, 2):
        for p_int in (3, 5):
            mu = 0.5 * d * p_int
            p = HypergroupParams(q, d, mu, sampling_only=True)
            rng = _rng(seed, 111, ci)
            ci += 1
            r_tri = sample_standard_batch(p, n_samples, rng)
            x = rng.standard_normal((n_samples, q, p_int))
            if d == 2:
                x = x + 1j * rng.standard_normal((n_samples, q, p_int))
            a = x @ np.swapaxes(x, -1, -2).conj()
            a = 0.5 * (a + np.swapaxes(a, -1, -2).conj())
            r_gau = psd_sqrt_batch(a)
            for name, fn in (
                ("trace", lambda m: np.trace(m, axis1=-2, axis2=-1).real),
                ("trace_sq", lambda m: np.einsum("nij,nji->n", m, m).real),
                ("det", lambda m: np.linalg.det(m).real),
            ):
                va, vb = fn(r_tri), fn(r_gau)
                diff = float(va.mean() - vb.mean())
                se = math.sqrt(va.var(ddof=1) / n_samples + vb.var(ddof=1) / n_samples)
                dev = abs(diff) / max(se, 1e-300)
                ok = ok and dev <= 3.0
                rows.append({"d": d, "p": p_int, "stat": name, "dev_sigma": dev})
    return _crit_result(11, "bartlett-vs-gaussian", ok, t0, rows=rows)


def _criterion_12(seed: int) -> dict:
    """Ball normalization at rank one against closed forms pi/2 and pi."""
    t0 = time.perf_counter()
    details = {}
    ok = True
    for d, closed in ((1, math.pi / 2.0), (2, math.pi)):
        p = HypergroupParams(1, d, 2.0)
        rng = _rng(seed, 112, d)
        mc, se = kappa(p, 2_000_000, rng)
        if d == 1:
            # v = sin(theta) turns the endpoint-singular weight smooth
            expo = 2.0 * (p.mu - p.rho) + 1.0
            quad = _adaptive_simpson(lambda th: math.cos(th) ** expo, -math.pi / 2, math.pi / 2, 1e-10)
        else:
            expo = p.mu - p.rho
            quad = math.pi * _adaptive_simpson(lambda u: (1.0 - u) ** expo, 0.0, 1.0, 1e-10)
        mc_ok = abs(closed - mc) <= 3.0 * se
        quad_ok = abs(closed - quad) <= 1e-6
        ok = ok and mc_ok and quad_ok
        details[f"d{d}"] = {
            "closed": closed,
            "mc": mc,
            "mc_stderr": se,
            "quad": quad,
            "mc_ok": mc_ok,
            "quad_ok": quad_ok,
        }
    return _crit_result(12, "kappa-pinning", ok, t0, **details)


def _criterion_13(seed: int) -> dict:
    """Point mass convolved with the standard law: samples vs exact density."""
    t0 = time.perf_counter()
    n_samples = 100_000
    p = HypergroupParams(1, 1, 2.0)
    mu = p.mu
    leb_const = 2.0 * math.pi ** mu / math.gamma(mu)
    rows = []
    ok = True
    for xi, x in enumerate((0.5, 1.0, 2.0)):
        rng = _rng(seed, 113, xi)
        steps = sample_standard_batch(p, n_samples, rng)
        xs = np.broadcast_to(np.array([[x]]), (n_samples, 1, 1)).copy()
        zs = conv_pairwise_batch(p, xs, steps, rng)[:, 0, 0]
        y_max = x + 7.5
        grid = np.linspace(0.0, y_max, 20_001)
        # vectorized translated density at scale 1 (whitening is trivial)
        eigs = (-0.25 * (x * grid) ** 2)[:, None]
        bes_vals, _, _ = bessel_series_eigs(eigs, mu, p.d, target_tol=1e-12)
        dens = (
            (2.0 * math.pi) ** (-mu)
            * np.exp(-0.5 * (x * x + grid * grid))
            * bes_vals
            * leb_const
            * grid ** (2.0 * mu - 1.0)
        )
        cdf = np.concatenate(
            [[0.0], np.cumsum(0.5 * (dens[1:] + dens[:-1]) * np.diff(grid))]
        )
        norm_ok = abs(cdf[-1] - 1.0) <= 1e-6
        zs_sorted = np.sort(zs)
        f_quad = np.interp(zs_sorted, grid, cdf)
        idx = np.arange(1, n_samples + 1)
        sup = float(
            np.max(np.maximum(np.abs(idx / n_samples - f_quad), np.abs((idx - 1) / n_samples - f_quad)))
        )
        # tie the vectorized density to the public evaluator on a subsample
        spot = np.linspace(0.3, y_max - 1.0, 7)
        spot_eigs = (-0.25 * (x * spot) ** 2)[:, None]
        spot_bes, _, _ = bessel_series_eigs(spot_eigs, mu, p.d, target_tol=1e-12)
        spot_dens = (
            (2.0 * math.pi) ** (-mu)
            * np.exp(-0.5 * (x * x + spot * spot))
            * spot_bes
            * leb_const
            * spot ** (2.0 * mu - 1.0)
        )
        spot_dev = 0.0
        for y, via_grid in zip(spot, spot_dens):
            direct = translated_density(
                p, np.array([[x]]), np.array([[1.0]]), np.array([[y]])
            ) * leb_const * y ** (2.0 * mu - 1.0)
            spot_dev = max(spot_dev, abs(direct - via_grid) / max(abs(direct), 1e-12))
        row_ok = norm_ok and sup <= 0.01 and spot_dev <= 1e-6
        ok = ok and row_ok
        rows.append(
            {
                "x": x,
                "sup_cdf_dist": sup,
                "norm_defect": abs(cdf[-1] - 1.0),
                "spot_rel_dev": spot_dev,
                "passed": row_ok,
            }
        )
    return _crit_result(13, "translated-wishart", ok, t0, rows=rows)


def _criterion_14(seed: int) -> dict:
    """Mean of Z^2 under the convolution equals x^2 + y^2 entrywise."""
    t0 = time.perf_counter()
    n_samples = 20_000
    combos = [(1, 1), (1, 2), (2, 1), (2, 2), (3, 1)]
    n_pass = 0
    total = 0
    worst = 0.0
    ci = 0
    for q, d in combos:
        rho = d * (q - 0.5) + 1.0
        p = HypergroupParams(q, d, rho + 0.7)
        for _ in range(4):
            rng = _rng(seed, 114, ci)
            ci += 1
            x = random_psd(p, rng, norm=float(rng.uniform(0.4, 1.4)))
            y = random_psd(p, rng, norm=float(rng.uniform(0.4, 1.4)))
            zs = conv_sample_batch(p, x, y, n_samples, rng)
            sq = zs @ zs
            target = x @ x + y @ y
            diff = sq.mean(axis=0) - target
            iu = np.triu_indices(q)
            comps = [(diff.real, sq.real, False)]
            if d == 2 and q > 1:
                comps.append((diff.imag, sq.imag, True))
            for dmat, smat_comp, drop_diag in comps:
                se = np.sqrt(smat_comp.var(axis=0, ddof=1) / n_samples)
                dev = np.abs(dmat[iu]) / np.maximum(se[iu], 1e-300)
                if drop_diag:
                    # imaginary diagonal is identically zero
                    dev = dev[iu[0] != iu[1]]
                for v in np.atleast_1d(dev):
                    total += 1
                    if v <= 3.0:
                        n_pass += 1
                    worst = max(worst, float(v) / 3.0)
    return _crit_result(
        14, "second-moment-additivity", n_pass == total, t0, n_pass=n_pass, n_total=total, worst_ratio=worst
    )


def _criterion_15(seed: int) -> dict:
    """Central limit: rescaled walk transform approaches the Wishart target,
    and the n=64 deviation beats the n=4 deviation on paired paths.

    The step law is the lazy two-atom mixture (3/4)delta_0 + (1/4)delta_{2I}.
    It has unit mean square, so the limit target is unchanged, but its fourth
    cumulant is four times the point mass one, which makes the n=4 transform
    bias orders of magnitude larger than replica noise while the n=64 bias
    stays well under the 0.02 budget.  Both biases are exactly computable
    (the step transform is 3/4 + phi(2I)/4), so the spectral grid is chosen
    where the paired comparison is decided by bias, not by noise."""
    t0 = time.perf_counter()
    replicas = 20_000
    n_final, n_small = 64, 4
    w_lazy = 0.25
    runs = []
    ok = True
    ci = 0
    for q, d in ((1, 1), (1, 2), (2, 1), (2, 2)):
        rho = d * (q - 0.5) + 1.0
        mu = rho - 0.5
        p = HypergroupParams(q, d, mu)
        eye = np.eye(q, dtype=p.dtype)
        atom = 2.0 * eye

        def exact_dev(c, n):
            f1 = 1.0 - w_lazy + w_lazy * character_phi(p, (c / math.sqrt(n)) * eye, atom)
            return abs(f1**n - math.exp(-c * c * q / (4.0 * mu)))

        cand = []
        for c in np.arange(1.0, 4.01, 0.2):
            tgt = math.exp(-c * c * q / (4.0 * mu))
            b4, b64 = exact_dev(c, n_small), exact_dev(c, n_final)
            if b64 <= 0.008 and abs(1.0 - tgt) > 0.05:
                cand.append((float(c), b4, b64))
        cand.sort(key=lambda t: t[1] - t[2], reverse=True)
        spread = []
        for c, b4, b64 in cand:
            if all(abs(c - c0) >= 0.35 for c0, _, _ in spread):
                spread.append((c, b4, b64))
            if len(spread) == 4:
                break
        if len(spread) < 2:
            return _crit_result(
                15, "clt-wishart-limit", False, t0,
                error=f"no usable spectral points found at q={q}, d={d}",
            )
        step_cloud = EmpiricalMeasure(
            p,
            np.stack([np.zeros((q, q), dtype=p.dtype), atom]),
            weights=np.array([1.0 - w_lazy, w_lazy]),
            seed=seed,
        )
        rng = _rng(seed, 115, ci)
        ci += 1
        grid = [c * eye for c, _, _ in spread]
        rep = clt_experiment(p, EmpiricalStep(step_cloud), n_final, replicas, grid, rng, n_small=n_small)
        combo_ok = rep["sup_dev_final"] <= 0.02 and rep["all_eligible_improved"] and rep["n_eligible"] > 0
        ok = ok and combo_ok
        runs.append(
            {
                "q": q,
                "d": d,
                "mu": mu,
                "c_values": [c for c, _, _ in spread],
                "bias_exact_small": [b4 for _, b4, _ in spread],
                "bias_exact_final": [b64 for _, _, b64 in spread],
                "sup_dev_final": rep["sup_dev_final"],
                "n_eligible": rep["n_eligible"],
                "n_improved": rep["n_improved"],
                "passed": combo_ok,
            }
        )
    return _crit_result(15, "clt-wishart-limit", ok, t0, runs=runs)


def _criterion_16(seed: int) -> dict:
    """Strong law: ||S_n||/n shrinks along the walk."""
    t0 = time.perf_counter()
    p = HypergroupParams(2, 1, 3.0)
    rng = _rng(seed, 116)
    step = WishartStep(WishartSpec(p))
    rep = slln_experiment(p, step, "linear", 1.0, 4096, 200, rng)
    ok = rep["frac_final_below_first"] >= 0.95 and rep["medians_decreasing"]
    return _crit_result(
        16,
        "slln-linear",
        ok,
        t0,
        frac_final_below_first=rep["frac_final_below_first"],
        medians=rep["medians"],
    )


def _criterion_17(seed: int) -> dict:
    """Character martingale: E[phi_s(S_n)] = mu_hat(s)^n along the walk."""
    t0 = time.perf_counter()
    p = HypergroupParams(2, 1, 3.0)
    rng = _rng(seed, 117)
    step = WishartStep(WishartSpec(p))
    rep = martingale_check(p, step, 0.25 * np.eye(2), 64, 10_000, rng)
    return _crit_result(
        17,
        "character-martingale",
        rep["passed"],
        t0,
        mu_hat=rep["mu_hat"],
        max_dev_sigma=rep["max_dev_sigma"],
        checkpoints=[(row["n"], row["dev_sigma"]) for row in rep["checkpoints"]],
    )


CRITERIA = [
    (1, "trace-identity", _criterion_1),
    (2, "rank-one-reduction", _criterion_2),
    (3, "bochner-vs-series", _criterion_3),
    (4, "product-formula", _criterion_4),
    (5, "support-window", _criterion_5),
    (6, "norm-support-bound", _criterion_6),
    (7, "automorphism-covariance", _criterion_7),
    (8, "character-restriction", _criterion_8),
    (9, "wishart-fourier", _criterion_9),
    (10, "wishart-semigroup", _criterion_10),
    (11, "bartlett-vs-gaussian", _criterion_11),
    (12, "kappa-pinning", _criterion_12),
    (13, "translated-wishart", _criterion_13),
    (14, "second-moment-additivity", _criterion_14),
    (15, "clt-wishart-limit", _criterion_15),
    (16, "slln-linear", _criterion_16),
    (17, "character-martingale", _criterion_17),
]


def run_criterion(index: int, seed: int = 0) -> dict:
    for idx, name, fn in CRITERIA:
        if idx == index:
            try:
                return fn(seed)
            except Exception as exc:  # a crash is a failure, not an abort
                return {
                    "index": idx,
                    "name": name,
                    "passed": False,
                    "runtime_s": 0.0,
                    "details": {"error": f"{type(exc).__name__}: {exc}"},
                }
    raise ValueError(f"no acceptance criterion {index}")


# ---------------------------------------------------------------------------
# quick invariant suite (default `check`)


def _quick_suite(p: HypergroupParams, seed: int) -> list[dict]:
    checks = []
    rng = _rng(seed, 900)

    t0 = time.perf_counter()
    worst = 0.0
    eigs = rng.uniform(-1.0, 1.0, size=(50, p.q))
    eigs = eigs[np.abs(eigs.sum(axis=1)) >= 0.2][:30]
    traces = eigs.sum(axis=1)
    for k in range(1, 5):
        vals = np.zeros(len(eigs))
        for lam in partitions(k, p.q):
            vals += np.array([jack_C(lam, p.alpha, row) for row in eigs])
        worst = max(worst, float(np.max(np.abs(vals - traces ** k) / np.abs(traces) ** k)))
    checks.append(
        {
            "name": "trace-identity",
            "passed": worst <= 1e-8,
            "runtime_s": round(time.perf_counter() - t0, 3),
            "details": {"max_rel_err": worst},
        }
    )

    t0 = time.perf_counter()
    vs = sample_ball_batch(p, 2000, rng)
    top = float(np.linalg.norm(vs, 2, axis=(1, 2)).max())
    checks.append(
        {
            "name": "ball-contraction",
            "passed": top < 1.0,
            "runtime_s": round(time.perf_counter() - t0, 3),
            "details": {"max_spectral_norm": top},
        }
    )

    t0 = time.perf_counter()
    r = random_psd(p, rng, norm=1.0)
    s = random_psd(p, rng, norm=0.9)
    tt = random_psd(p, rng, norm=0.8)
    est, se = conv_expect(p, CharacterFunctional(p, tt, target_tol=1e-9), r, s, 5000, rng)
    target = character_phi(p, tt, r) * character_phi(p, tt, s)
    dev = abs(est - target)
    checks.append(
        {
            "name": "product-formula",
            "passed": dev <= 4.0 * se + 1e-8,
            "runtime_s": round(time.perf_counter() - t0, 3),
            "details": {"deviation": dev, "stderr": se},
        }
    )

    t0 = time.perf_counter()
    spec = WishartSpec(p)
    rs = sample_scaled_batch(spec, 20_000, rng)
    worst_dev = 0.0
    for c in (0.3, 0.6, 0.9):
        smat = c * np.eye(p.q)
        vals = character_phi_batch(p, smat, rs)
        est = float(vals.mean())
        se = float(math.sqrt(vals.var(ddof=1) / len(vals)))
        dev = abs(est - fourier_closed(p, np.eye(p.q), smat)) / max(4.0 * se, 1e-300)
        worst_dev = max(worst_dev, dev)
    checks.append(
        {
            "name": "wishart-fourier",
            "passed": worst_dev <= 1.0,
            "runtime_s": round(time.perf_counter() - t0, 3),
            "details": {"worst_ratio_of_4se": worst_dev},
        }
    )

    t0 = time.perf_counter()
    m2 = moment_m2(p, np.eye(p.q), np.eye(p.q), r)
    num, err = moment_numeric(p, MomentSpec((np.eye(p.q), np.eye(p.q)), 2), r)
    rel = abs(num - m2) / max(abs(m2), 1e-12)
    checks.append(
        {
            "name": "moment-closed-form",
            "passed": rel <= 1e-6,
            "runtime_s": round(time.perf_counter() - t0, 3),
            "details": {"relative_dev": rel, "fd_error_estimate": err},
        }
    )
    return checks


# ---------------------------------------------------------------------------
# subcommands


def _params_from(ns, cfg: dict, sampling_only: bool = False) -> HypergroupParams:
    q = ns.q if ns.q is not None else cfg.get("q")
    d = ns.d if ns.d is not None else cfg.get("d")
    mu = ns.mu if ns.mu is not None else cfg.get("mu")
    if q is None or d is None or mu is None:
        raise ValueError("q, d, and mu are required (flags or config file)")
    return HypergroupParams(int(q), int(d), float(mu), sampling_only=sampling_only)


def _cmd_eval_bessel(ns, cfg, seed, workers) -> int:
    p = _params_from(ns, cfg, sampling_only=True)
    tol = ns.tol if ns.tol is not None else cfg.get("tol", 1e-10)
    if ns.eigs is not None:
        eigs = np.array([float(v) for v in ns.eigs.split(",")])
        if eigs.shape != (p.q,):
            raise ValueError(f"expected {p.q} eigenvalues, got {eigs.shape[0]}")
        res = bessel_from_eigs(eigs, p.mu, p.d, target_tol=tol)
    else:
        if ns.x is None:
            raise ValueError("eval-bessel needs --x FILE or --eigs LIST")
        mat, d_file = read_matrix_text(ns.x)
        if d_file != p.d:
            raise ValueError(f"matrix file is d={d_file}, parameters say d={p.d}")
        res = bessel_J(p, p.mu, mat, target_tol=tol)
    report = {
        "experiment": "eval-bessel",
        "value": res.value,
        "truncation_bound": res.truncation_bound,
        "degree_used": res.degree_used,
        **_meta(p, seed, workers),
    }
    _emit(report, ns.output)
    return 0


def _cmd_conv(ns, cfg, seed, workers) -> int:
    p = _params_from(ns, cfg)
    n = int(ns.n if ns.n is not None else cfg.get("n_samples", 100_000))
    r, dr = read_matrix_text(ns.r)
    s, ds = read_matrix_text(ns.s)
    if dr != p.d or ds != p.d:
        raise ValueError("matrix files and parameters disagree on the field (d)")
    zs = _parallel_stack(n, workers, seed, 1, lambda m, rng: conv_sample_batch(p, r, s, m, rng))
    out = ns.output or "conv_samples.csv"
    measure = EmpiricalMeasure(params=p, points=zs, seed=seed)
    measure.to_csv(out, version=__version__)
    print(
        json.dumps(
            {"experiment": "conv", "written": out, "n_samples": n, **_meta(p, seed, workers)},
            default=_json_default,
        )
    )
    return 0


def _cmd_wishart(ns, cfg, seed, workers) -> int:
    p = _params_from(ns, cfg, sampling_only=True)
    n = int(ns.n if ns.n is not None else cfg.get("n_samples", 100_000))
    t = float(ns.t if ns.t is not None else cfg.get("t", 1.0))
    if ns.scale_sq is not None:
        scale_sq, dfile = read_matrix_text(ns.scale_sq)
        if dfile != p.d:
            raise ValueError("scale matrix file and parameters disagree on the field (d)")
    else:
        scale_sq = np.eye(p.q, dtype=p.dtype)
    spec = WishartSpec(p, scale_sq, t)
    rs = _parallel_stack(n, workers, seed, 2, lambda m, rng: sample_scaled_batch(spec, m, rng))
    out = ns.output or "wishart_samples.csv"
    EmpiricalMeasure(params=p, points=rs, seed=seed).to_csv(out, version=__version__)
    cov = spec.covariance
    panel = []
    v_scale = 1.0 / math.sqrt(max(np.linalg.norm(cov, 2), 1e-12))
    for c in (0.4, 0.8, 1.2):
        smat = c * v_scale * np.eye(p.q)
        vals = character_phi_batch(p, smat, rs)
        est = float(vals.mean())
        se = float(math.sqrt(vals.var(ddof=1) / n))
        panel.append(
            {
                "c": c,
                "estimate": est,
                "stderr": se,
                "target": fourier_closed(p, cov, smat),
            }
        )
    print(
        json.dumps(
            {
                "experiment": "wishart",
                "written": out,
                "n_samples": n,
                "fourier_panel": panel,
                **_meta(p, seed, workers),
            },
            default=_json_default,
        )
    )
    return 0


def _cmd_clt(ns, cfg, seed, workers) -> int:
    p = _params_from(ns, cfg)
    n = int(ns.steps if ns.steps is not None else cfg.get("n_steps", 64))
    replicas = int(ns.replicas if ns.replicas is not None else cfg.get("replicas", 20_000))
    grid_spec = ns.grid if ns.grid is not None else cfg.get("grid", "0.6,1.0,1.5")
    cs = [float(v) for v in str(grid_spec).split(",")]
    if ns.step == "point":
        if ns.step_file is not None:
            mat, _ = read_matrix_text(ns.step_file)
        else:
            mat = np.eye(p.q, dtype=p.dtype)
        step = PointMassStep(mat)
    else:
        step = WishartStep(WishartSpec(p))
    rng = _rng(seed, 3)
    grid = [c * np.eye(p.q) for c in cs]
    rep = clt_experiment(p, step, n, replicas, grid, rng)
    rep.update(_meta(p, seed, workers))
    rep["grid_c"] = cs
    _emit(rep, ns.output)
    return 0


def _cmd_slln(ns, cfg, seed, workers) -> int:
    p = _params_from(ns, cfg)
    rule = ns.rule if ns.rule is not None else cfg.get("rule", "linear")
    lam = float(ns.lam if ns.lam is not None else cfg.get("lam", 1.0))
    n_max = int(ns.n_max if ns.n_max is not None else cfg.get("n_max", 1024))
    replicas = int(ns.replicas if ns.replicas is not None else cfg.get("replicas", 200))
    rng = _rng(seed, 4)
    step = WishartStep(WishartSpec(p))
    rep = slln_experiment(p, step, rule, lam, n_max, replicas, rng)
    rep.update(_meta(p, seed, workers))
    _emit(rep, ns.output)
    return 0


def _cmd_check(ns, cfg, seed, workers) -> int:
    if ns.full or ns.criterion:
        indices = ns.criterion if ns.criterion else [idx for idx, _, _ in CRITERIA]
        results = []
        # criterion 6 reads the global watermark, so it runs after the others
        ordered = [i for i in indices if i != 6] + ([6] if 6 in indices else [])
        if workers > 1:
            with ThreadPoolExecutor(max_workers=workers) as pool:
                futs = {i: pool.submit(run_criterion, i, seed) for i in ordered if i != 6}
                results = [futs[i].result() for i in sorted(futs)]
            if 6 in ordered:
                results.append(run_criterion(6, seed))
                results.sort(key=lambda r: r["index"])
        else:
            results = [run_criterion(i, seed) for i in ordered]
            results.sort(key=lambda r: r["index"])
        passed = all(r["passed"] for r in results)
        report = {
            "experiment": "check-full" if ns.full else "check-criteria",
            "criteria": results,
            "passed": passed,
            **_meta(None, seed, workers),
        }
        _emit(report, ns.output)
        return 0 if passed else 2
    p = _params_from(ns, cfg)
    p.require_convolution()
    checks = _quick_suite(p, seed)
    passed = all(c["passed"] for c in checks)
    report = {
        "experiment": "check",
        "checks": checks,
        "passed": passed,
        **_meta(p, seed, workers),
    }
    _emit(report, ns.output)
    return 0 if passed else 2


# ---------------------------------------------------------------------------
# argument parsing


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="conebessel",
        description="Bessel convolution structures on matrix cones: evaluators, "
        "samplers, and limit-theorem experiments.",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", help="flat key=value config file; flags win")
        sp.add_argument("--q", type=int, default=None)
        sp.add_argument("--d", type=int, default=None, help="1 real, 2 complex")
        sp.add_argument("--mu", type=float, default=None)
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--workers", type=int, default=None)
        sp.add_argument("--output", default=None, help="write the report/CSV here")

    sp = sub.add_parser("eval-bessel", help="evaluate the matrix-argument Bessel function")
    common(sp)
    sp.add_argument("--x", help="matrix text file (argument)")
    sp.add_argument("--eigs", help="comma-separated eigenvalues instead of --x")
    sp.add_argument("--tol", type=float, default=None)

    sp = sub.add_parser("conv", help="sample the convolution of two point masses")
    common(sp)
    sp.add_argument("--r", required=True, help="matrix text file")
    sp.add_argument("--s", required=True, help="matrix text file")
    sp.add_argument("--n", type=int, default=None)

    sp = sub.add_parser("wishart", help="sample a squared Wishart law")
    common(sp)
    sp.add_argument("--scale-sq", dest="scale_sq", help="matrix text file (squared scale)")
    sp.add_argument("--t", type=float, default=None, help="semigroup time")
    sp.add_argument("--n", type=int, default=None)

    sp = sub.add_parser("clt", help="central-limit experiment")
    common(sp)
    sp.add_argument("--step", choices=("wishart", "point"), default="wishart")
    sp.add_argument("--step-file", dest="step_file", help="matrix file for point steps")
    sp.add_argument("--steps", type=int, default=None)
    sp.add_argument("--replicas", type=int, default=None)
    sp.add_argument("--grid", default=None, help="comma-separated multiples of I")

    sp = sub.add_parser("slln", help="strong-law experiment")
    common(sp)
    sp.add_argument("--rule", choices=("linear", "power"), default=None)
    sp.add_argument("--lam", type=float, default=None)
    sp.add_argument("--n-max", dest="n_max", type=int, default=None)
    sp.add_argument("--replicas", type=int, default=None)

    sp = sub.add_parser("check", help="invariant suite (quick) or acceptance criteria")
    common(sp)
    sp.add_argument("--full", action="store_true", help="run all acceptance criteria")
    sp.add_argument(
        "--criterion",
        type=int,
        action="append",
        help="run one criterion by index (repeatable)",
    )
    return ap


_DISPATCH = {
    "eval-bessel": _cmd_eval_bessel,
    "conv": _cmd_conv,
    "wishart": _cmd_wishart,
    "clt": _cmd_clt,
    "slln": _cmd_slln,
    "check": _cmd_check,
}


def run(config: RunConfig, ns) -> int:
    return _DISPATCH[config.command](ns, config.options, config.seed, config.workers)


def main(argv=None) -> int:
    ap = _build_parser()
    ns = ap.parse_args(argv)
    try:
        cfg = load_config(ns.config) if ns.config else {}
        seed = _resolve_seed(ns.seed, cfg)
        workers = int(ns.workers if ns.workers is not None else cfg.get("workers", 1))
        if workers < 1:
            raise ValueError(f"workers must be >= 1, got {workers}")
        config = RunConfig(
            command=ns.command,
            params=None,
            options=cfg,
            seed=seed,
            workers=workers,
            output_path=ns.output,
        )
        return run(config, ns)
    except (ValueError, OSError) as exc:
        print(json.dumps({"error": str(exc)}), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
