"""The mixing measure on the matrix ball and the cone convolution.

The convolution of two point masses on the cone is the image of the measure
with density det(I - v v*)^(mu - rho) / kappa_mu on the open matrix ball
D = {v : v v* < I} under v -> sqrt(r^2 + s^2 + s v r + r v* s).  This module
samples that measure exactly, estimates its normalization kappa_mu, evaluates
characters through their oscillatory-integral representation, and exposes the
convolution both as a sampler and as an expectation operator.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field

import numpy as np

from .cone_core import (
    ConePoint,
    HypergroupParams,
    as_matrix,
    psd_sqrt_batch,
)

_CHUNK = 50_000

# largest observed excess of ||z|| over ||r|| + ||s|| across every convolution
# sample drawn in this process; the support theorem says it stays at round-off
_norm_excess = 0.0
_norm_excess_lock = threading.Lock()


def norm_excess_watermark() -> float:
    return _norm_excess


def reset_norm_excess_watermark() -> None:
    global _norm_excess
    with _norm_excess_lock:
        _norm_excess = 0.0


def _record_norm_excess(zs: np.ndarray, budget) -> None:
    global _norm_excess
    znorm = np.sqrt(np.einsum("nij,nij->n", zs, zs.conj()).real)
    excess = float(np.max(znorm - budget))
    if excess > _norm_excess:
        with _norm_excess_lock:
            if excess > _norm_excess:
                _norm_excess = excess


class BallPoint:
    """Matrix v with v v* < I (strict spectral contraction)."""

    __slots__ = ("v", "q", "d")

    def __init__(self, v, d: int | None = None):
        a = np.asarray(getattr(v, "array", v))
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ValueError(f"ball point must be square, got {a.shape}")
        top = float(np.linalg.norm(a, 2))
        if top >= 1.0:
            raise ValueError(f"ball point has spectral norm {top} >= 1")
        self.v = a
        self.q = a.shape[0]
        self.d = d if d is not None else (2 if np.iscomplexobj(a) else 1)

    def __repr__(self):
        return f"BallPoint(q={self.q}, d={self.d})"


# ---------------------------------------------------------------------------
# triangular gamma construction (shared with the Wishart sampler)


def tri_gamma_batch(
    n: int, q: int, d: int, shape: float, rng: np.random.Generator
) -> np.ndarray:
    """n draws of T T* with T lower triangular, t_jj^2 ~ Gamma(shape - (d/2)j, scale 2)
    and each real component of the strictly-lower entries standard normal."""
    shapes = [shape - 0.5 * d * j for j in range(q)]
    if min(shapes) <= 0.0:
        raise ValueError(
            f"triangular gamma construction needs shape > {0.5 * d * (q - 1)}, got {shape}"
        )
    dtype = np.float64 if d == 1 else np.complex128
    t = np.zeros((n, q, q), dtype=dtype)
    for j in range(q):
        t[:, j, j] = np.sqrt(rng.gamma(shape=shapes[j], scale=2.0, size=n))
    if q > 1:
        idx = np.tril_indices(q, k=-1)
        m = len(idx[0])
        low = rng.standard_normal((n, m))
        if d == 2:
            low = low + 1j * rng.standard_normal((n, m))
        t[:, idx[0], idx[1]] = low
    return t @ np.swapaxes(t, -1, -2).conj()


def _haar_unitary_batch(n: int, q: int, d: int, rng: np.random.Generator) -> np.ndarray:
    z = rng.standard_normal((n, q, q))
    if d == 2:
        z = z + 1j * rng.standard_normal((n, q, q))
    qmat, rmat = np.linalg.qr(z)
    diag = np.diagonal(rmat, axis1=-2, axis2=-1).copy()
    mags = np.abs(diag)
    mags[mags == 0.0] = 1.0
    phase = diag / mags
    return qmat * phase[:, None, :].conj()


# ---------------------------------------------------------------------------
# ball sampling


def sample_ball_batch(p: HypergroupParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Exact draws from the density det(I - v v*)^(mu - rho) / kappa on the ball.

    Uses the polar factorization v = u w^(1/2): w follows a matrix Beta law
    with cone-Gamma pair parameters (dq/2, mu - dq/2), both of which admit the
    triangular gamma construction exactly when mu > rho - 1, and u is Haar.
    """
    p.require_convolution()
    q, d = p.q, p.d
    a_shape = 0.5 * d * q
    b_shape = p.mu - 0.5 * d * q
    g1 = tri_gamma_batch(n, q, d, a_shape, rng)
    g2 = tri_gamma_batch(n, q, d, b_shape, rng)
    s = g1 + g2
    eigs, vecs = np.linalg.eigh(s)
    inv_root = np.einsum("nij,nj,nkj->nik", vecs, 1.0 / np.sqrt(eigs), vecs.conj())
    b = inv_root @ g1 @ inv_root
    b = 0.5 * (b + np.swapaxes(b, -1, -2).conj())
    beigs, bvecs = np.linalg.eigh(b)
    beigs = np.clip(beigs, 0.0, 1.0)
    root = np.einsum("nij,nj,nkj->nik", bvecs, np.sqrt(beigs), bvecs.conj())
    u = _haar_unitary_batch(n, q, d, rng)
    return u @ root


def sample_ball(p: HypergroupParams, rng: np.random.Generator) -> BallPoint:
    v = sample_ball_batch(p, 1, rng)[0]
    # clamp exactly-boundary draws (measure zero, guards the wrapper invariant)
    top = np.linalg.norm(v, 2)
    if top >= 1.0:
        v = v * ((1.0 - 1e-12) / top)
    return BallPoint(v, p.d)


def kappa(
    p: HypergroupParams, n_samples: int, rng: np.random.Generator
) -> tuple[float, float]:
    """Box Monte Carlo estimate of the ball normalization constant.

    Uniform proposals on [-1,1]^(d q^2) filtered by v v* < I, weighted by
    det(I - v v*)^(mu - rho).  The reported standard error is meaningful for
    mu > rho - 1/2 (below that the weight has infinite variance).
    """
    p.require_convolution()
    q, d = p.q, p.d
    expo = p.mu - p.rho
    vol = 2.0 ** (d * q * q)
    total = 0.0
    total_sq = 0.0
    done = 0
    eye = np.eye(q)
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        v = rng.uniform(-1.0, 1.0, size=(m, q, q))
        if d == 2:
            v = v + 1j * rng.uniform(-1.0, 1.0, size=(m, q, q))
        w = eye - v @ np.swapaxes(v, -1, -2).conj()
        w = 0.5 * (w + np.swapaxes(w, -1, -2).conj())
        mineig = np.linalg.eigvalsh(w)[:, 0]
        inside = mineig > 0.0
        vals = np.zeros(m)
        if inside.any():
            dets = np.linalg.det(w[inside]).real
            vals[inside] = dets ** expo
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return vol * mean, vol * np.sqrt(var / n_samples)


# ---------------------------------------------------------------------------
# characters by oscillatory integral, convolution


def phi_bochner(
    p: HypergroupParams,
    s,
    r,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo value of the character as a ball integral of exp(-i (r v | s)).

    The exact value is real; the real part and its standard error are
    returned, and a grossly nonvanishing imaginary average (beyond six
    standard errors) raises, signaling a sampler defect.
    """
    smat = as_matrix(s)
    rmat = as_matrix(r)
    sr = smat @ rmat
    cos_sum = 0.0
    cos_sq = 0.0
    sin_sum = 0.0
    sin_sq = 0.0
    done = 0
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        v = sample_ball_batch(p, m, rng)
        x = np.einsum("nik,ki->n", v, sr)
        if p.d == 2:
            x = x.real
        c = np.cos(x)
        sgn = np.sin(x)
        cos_sum += float(c.sum())
        cos_sq += float((c * c).sum())
        sin_sum += float(sgn.sum())
        sin_sq += float((sgn * sgn).sum())
        done += m
    est = cos_sum / n_samples
    var = max(cos_sq / n_samples - est * est, 0.0)
    se = float(np.sqrt(var / n_samples))
    im = -sin_sum / n_samples
    im_var = max(sin_sq / n_samples - (sin_sum / n_samples) ** 2, 0.0)
    im_se = float(np.sqrt(im_var / n_samples))
    if abs(im) > 6.0 * max(im_se, 1e-300) and abs(im) > 1e-12:
        raise RuntimeError(
            f"imaginary part of the character integral did not vanish: {im:.3e} ± {im_se:.3e}"
        )
    return est, se


def conv_sample_batch(
    p: HypergroupParams, r, s, n: int, rng: np.random.Generator
) -> np.ndarray:
    """n draws from the convolution of the point masses at r and s."""
    rmat = as_matrix(r)
    smat = as_matrix(s)
    r2 = rmat @ rmat
    s2 = smat @ smat
    v = sample_ball_batch(p, n, rng)
    m = np.einsum("ij,njk,kl->nil", smat, v, rmat)
    z2 = r2 + s2 + m + np.swapaxes(m, -1, -2).conj()
    z2 = 0.5 * (z2 + np.swapaxes(z2, -1, -2).conj())
    # an indefinite z2 beyond round-off cannot occur for cone inputs; the
    # clamp inside psd_sqrt_batch raises if it does
    zs = psd_sqrt_batch(z2)
    budget = float(np.linalg.norm(rmat) + np.linalg.norm(smat))
    _record_norm_excess(zs, budget)
    return zs


def conv_pairwise_batch(
    p: HypergroupParams, rs: np.ndarray, ss: np.ndarray, rng: np.random.Generator
) -> np.ndarray:
    """One convolution draw per row of the paired stacks rs, ss."""
    n = rs.shape[0]
    v = sample_ball_batch(p, n, rng)
    m = ss @ v @ rs
    z2 = rs @ rs + ss @ ss + m + np.swapaxes(m, -1, -2).conj()
    z2 = 0.5 * (z2 + np.swapaxes(z2, -1, -2).conj())
    zs = psd_sqrt_batch(z2)
    budget = np.sqrt(np.einsum("nij,nij->n", rs, rs.conj()).real) + np.sqrt(
        np.einsum("nij,nij->n", ss, ss.conj()).real
    )
    _record_norm_excess(zs, budget)
    return zs


def conv_sample(p: HypergroupParams, r, s, rng: np.random.Generator):
    """Single convolution draw, returned as a cone point."""
    z = conv_sample_batch(p, r, s, 1, rng)[0]
    return ConePoint(z, p.d)


def conv_expect(
    p: HypergroupParams,
    f,
    r,
    s,
    n_samples: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Monte Carlo mean of f over convolution draws, with standard error.

    f is called on raw (q, q) matrices; objects with an ``on_batch`` method
    (stacks in, values out) are evaluated in vectorized chunks.
    """
    total = 0.0
    total_sq = 0.0
    done = 0
    batched = hasattr(f, "on_batch")
    while done < n_samples:
        m = min(_CHUNK, n_samples - done)
        zs = conv_sample_batch(p, r, s, m, rng)
        if batched:
            vals = np.asarray(f.on_batch(zs), dtype=np.float64)
        else:
            vals = np.array([f(z) for z in zs], dtype=np.float64)
        total += float(vals.sum())
        total_sq += float((vals * vals).sum())
        done += m
    mean = total / n_samples
    var = max(total_sq / n_samples - mean * mean, 0.0)
    return mean, float(np.sqrt(var / n_samples))


def support_window_check(p: HypergroupParams, r, c: float, z, tol: float) -> bool:
    """True iff (1-c) r <= z <= (1+c) r in the cone order, within tol."""
    if not 0.0 < c <= 1.0:
        raise ValueError(f"need c in (0, 1], got {c}")
    rmat = as_matrix(r)
    zmat = as_matrix(z)
    lo = np.linalg.eigvalsh(zmat - (1.0 - c) * rmat)[0]
    hi = np.linalg.eigvalsh((1.0 + c) * rmat - zmat)[0]
    return bool(lo >= -tol and hi >= -tol)


def support_window_fraction(
    p: HypergroupParams, r, c: float, zs: np.ndarray, tol: float
) -> float:
    """Fraction of a sample stack inside the convolution support window."""
    rmat = as_matrix(r)
    lo = np.linalg.eigvalsh(zs - (1.0 - c) * rmat)[..., 0]
    hi = np.linalg.eigvalsh((1.0 + c) * rmat - zs)[..., 0]
    ok = (lo >= -tol) & (hi >= -tol)
    return float(np.mean(ok))


# ---------------------------------------------------------------------------
# empirical measures


@dataclass
class EmpiricalMeasure:
    """Weighted sample cloud on the cone with sampling provenance."""

    params: HypergroupParams
    points: np.ndarray
    weights: np.ndarray = field(default=None)
    seed: int = 0
    n_raw: int | None = None

    def __post_init__(self):
        self.points = np.asarray(self.points)
        if self.points.ndim != 3 or self.points.shape[1] != self.points.shape[2]:
            raise ValueError(f"points must be a (N, q, q) stack, got {self.points.shape}")
        n = self.points.shape[0]
        if self.weights is None:
            self.weights = np.full(n, 1.0 / n)
        else:
            w = np.asarray(self.weights, dtype=np.float64)
            if w.shape != (n,):
                raise ValueError("weights must match the number of points")
            if (w < 0).any():
                raise ValueError("weights must be nonnegative")
            total = w.sum()
            if total <= 0:
                raise ValueError("weights must have positive mass")
            self.weights = w / total
        if self.n_raw is None:
            self.n_raw = n

    def to_csv(self, path, version: str = "") -> None:
        p = self.params
        q, d = p.q, p.d
        header_meta = (
            f"# version={version},q={q},d={d},mu={p.mu!r},seed={self.seed},n_raw={self.n_raw}"
        )
        cols = []
        for i in range(q):
            for j in range(q):
                if d == 1:
                    cols.append(f"e_{i}_{j}")
                else:
                    cols.append(f"e_{i}_{j}_re")
                    cols.append(f"e_{i}_{j}_im")
        cols.append("weight")
        lines = [header_meta, ",".join(cols)]
        for row, w in zip(self.points, self.weights):
            vals = []
            for i in range(q):
                for j in range(q):
                    z = complex(row[i, j])
                    vals.append(repr(z.real))
                    if d == 2:
                        vals.append(repr(z.imag))
            vals.append(repr(float(w)))
            lines.append(",".join(vals))
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path) -> "EmpiricalMeasure":
        with open(path, "r", encoding="utf-8") as fh:
            meta_line = fh.readline().strip()
            if not meta_line.startswith("#"):
                raise ValueError(f"{path}: missing metadata header line")
            fh.readline()  # column header
            data = np.loadtxt(fh, delimiter=",", ndmin=2)
        meta = {}
        for item in meta_line.lstrip("# ").split(","):
            key, _, val = item.partition("=")
            meta[key.strip()] = val.strip()
        q, d = int(meta["q"]), int(meta["d"])
        params = HypergroupParams(q, d, float(meta["mu"]), sampling_only=True)
        n = data.shape[0]
        if d == 1:
            pts = data[:, : q * q].reshape(n, q, q)
        else:
            flat = data[:, : 2 * q * q]
            pts = (flat[:, 0::2] + 1j * flat[:, 1::2]).reshape(n, q, q)
        weights = data[:, -1]
        return cls(
            params=params,
            points=pts,
            weights=weights,
            seed=int(meta.get("seed", 0)),
            n_raw=int(meta.get("n_raw", n)),
        )
