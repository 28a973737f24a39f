"""Statistical post-processing: error curves, order fits, Wasserstein distances.

The estimators here consume coupled trajectory bundles and produce
``(h, error, stderr)`` curves whose log-log slope estimates a convergence
order:

* strong error against the finest-level reference, max over the coarse grid,
* GEM-EM coupling discrepancy on shared increments (no reference needed),
* one-step mean bias and centered second moment of GEM minus EM at a point.

Standard errors come from path-level batching (16 batches), which is robust
for max-type functionals.  Empirical Wasserstein distances are computed by an
exact optimal assignment between equal-size point clouds (no entropic or
sliced approximations), with the cloud size capped so the O(N^3) solver stays
fast.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .geometry import Manifold, _as_batch
from .schemes import as_drift, simulate_coupled_paths

N_ERROR_BATCHES = 16
WASSERSTEIN_CAP = 1024


@dataclass
class EmpiricalMeasure:
    """Equal-weight point cloud, optionally tagged with its manifold."""

    points: np.ndarray
    label: Optional[str] = None

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        if self.points.shape[0] == 0:
            raise ValueError("empirical measure needs at least one point")

    def __len__(self):
        return self.points.shape[0]

    def validate_on(self, man: Manifold, factor: float = 10.0):
        man.require_on_manifold(self.points, factor=factor)


@dataclass
class ErrorCurve:
    """(h, error, stderr, n_paths) rows of one error kind at moment order p."""

    kind: str
    p: int
    h: np.ndarray
    error: np.ndarray
    stderr: np.ndarray
    n_paths: np.ndarray

    def __post_init__(self):
        self.h = np.asarray(self.h, dtype=float)
        self.error = np.asarray(self.error, dtype=float)
        self.stderr = np.asarray(self.stderr, dtype=float)
        self.n_paths = np.asarray(self.n_paths, dtype=int)
        if not (len(self.h) == len(self.error) == len(self.stderr) == len(self.n_paths)):
            raise ValueError("curve columns must have equal length")
        if np.any(np.diff(self.h) >= 0):
            raise ValueError("h must be strictly decreasing")
        if np.any(self.error < 0):
            raise ValueError("errors must be nonnegative")
        if np.any(self.n_paths < 32):
            raise ValueError("need at least 32 paths/samples per entry")


@dataclass
class OrderFit:
    """Least-squares fit of log(error) on log(h)."""

    slope: float
    intercept: float
    r_squared: float
    residuals: np.ndarray = field(repr=False)


def fit_order(curve: ErrorCurve) -> OrderFit:
    """Ordinary least squares of log error on log h.

    Rejects degenerate (zero or negative) error entries, naming the first
    offending index, and needs at least four usable points.
    """
    bad = np.flatnonzero(curve.error <= 0)
    if bad.size:
        raise ValueError(f"degenerate error entries at indices {bad.tolist()}")
    if len(curve.h) < 4:
        raise ValueError("need at least 4 entries to fit an order")
    x = np.log(curve.h)
    y = np.log(curve.error)
    A = np.stack([x, np.ones_like(x)], axis=1)
    coef, _, _, _ = np.linalg.lstsq(A, y, rcond=None)
    pred = A @ coef
    resid = y - pred
    ss_tot = float(((y - y.mean()) ** 2).sum())
    r2 = 1.0 - float((resid ** 2).sum()) / ss_tot if ss_tot > 0 else 1.0
    return OrderFit(slope=float(coef[0]), intercept=float(coef[1]),
                    r_squared=r2, residuals=resid)


def _batched_root_moment(values_p: np.ndarray, p: int) -> tuple[float, float]:
    """((mean of v^p)^(1/p), batch SE of that estimate) for per-path values v^p."""
    est = float(np.mean(values_p)) ** (1.0 / p)
    batches = np.array_split(values_p, N_ERROR_BATCHES)
    per = np.array([np.mean(b) ** (1.0 / p) for b in batches if len(b)])
    se = float(np.std(per, ddof=1) / np.sqrt(len(per)))
    return est, se


def strong_error_curve(man: Manifold, drift, x0, seed: int, levels, ref_steps: int,
                       n_paths: int, p: int = 2, T: float = 1.0,
                       workers: int = 1, geodesic=None) -> ErrorCurve:
    """Strong error of GEM at each level against the finest GEM reference.

    All levels and the reference ride the same Brownian lattice per path; the
    error is ``(E[max_k |X^h_k - X^ref_k|^p])^{1/p}`` with the max taken over
    the coarse grid and the reference subsampled onto it.
    """
    drift = as_drift(drift)
    levels = sorted(set(int(L) for L in levels))
    if ref_steps <= max(levels):
        raise ValueError("reference level must be finer than every level")
    bundle = simulate_coupled_paths(man, drift, x0, seed, T,
                                    levels + [ref_steps], n_paths,
                                    with_em=False, cfg=geodesic,
                                    store_steps=max(levels), workers=workers)
    ref = bundle.gem[ref_steps]
    store = max(levels)
    rows_h, rows_e, rows_se = [], [], []
    for L in levels:
        sub = ref[:, ::store // L]
        diff = np.linalg.norm(bundle.gem[L] - sub, axis=-1)
        maxerr = diff.max(axis=1)
        est, se = _batched_root_moment(maxerr ** p, p)
        rows_h.append(T / L)
        rows_e.append(est)
        rows_se.append(se)
    return ErrorCurve(kind="strong-vs-reference", p=p, h=rows_h, error=rows_e,
                      stderr=rows_se, n_paths=[n_paths] * len(rows_h))


def coupling_discrepancy_curve(man: Manifold, drift, x0, seed: int, levels,
                               n_paths: int, p: int = 2, T: float = 1.0,
                               r0: Optional[float] = None, workers: int = 1,
                               geodesic=None) -> ErrorCurve:
    """Pathwise GEM-EM discrepancy per level on shared increments.

    The cleanest rate probe: both schemes consume identical noise, so no
    reference solution enters the estimate.
    """
    drift = as_drift(drift)
    levels = sorted(set(int(L) for L in levels))
    bundle = simulate_coupled_paths(man, drift, x0, seed, T, levels, n_paths,
                                    with_em=True, cfg=geodesic, r0=r0,
                                    store_steps=max(levels), workers=workers)
    rows_h, rows_e, rows_se = [], [], []
    for L in levels:
        diff = np.linalg.norm(bundle.gem[L] - bundle.em[L], axis=-1)
        maxerr = diff.max(axis=1)
        est, se = _batched_root_moment(maxerr ** p, p)
        rows_h.append(T / L)
        rows_e.append(est)
        rows_se.append(se)
    return ErrorCurve(kind="coupling", p=p, h=rows_h, error=rows_e,
                      stderr=rows_se, n_paths=[n_paths] * len(rows_h))


def one_step_bias(man: Manifold, drift, x, h_list, n_samples: int, seed: int,
                  r0: Optional[float] = None,
                  geodesic=None) -> tuple[ErrorCurve, ErrorCurve]:
    """One-step GEM-vs-EM discrepancy statistics at a fixed point.

    For each ``h`` draws ``n_samples`` shared increments, forms
    ``D = Phi_GEM(x, dW) - Phi_EM(x, dW)``, and reports the mean-bias curve
    ``|mean D|`` and the centered-second-moment curve ``mean |D - mean D|^2``.
    """
    from .schemes import _em_kernel, _gem_kernel  # shared kernels

    drift = as_drift(drift)
    xb, _ = _as_batch(x)
    man.require_on_manifold(xb)
    r0 = man.tube_radius if r0 is None else float(r0)
    h_list = sorted({float(h) for h in h_list}, reverse=True)
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    bias, bias_se, cent, cent_se = [], [], [], []
    for h in h_list:
        dW = rng.standard_normal((n_samples, man.ambient_dim)) * np.sqrt(h)
        X = np.broadcast_to(xb[0], (n_samples, man.ambient_dim)).copy()
        diff = (_gem_kernel(man, drift, X, h, dW, 0.0, geodesic)
                - _em_kernel(man, drift, X, h, dW, 0.0, r0))
        mu = diff.mean(axis=0)
        bias.append(float(np.linalg.norm(mu)))
        cvals = ((diff - mu) ** 2).sum(axis=1)
        cent.append(float(cvals.mean()))
        bb = [np.linalg.norm(b.mean(axis=0)) for b in np.array_split(diff, N_ERROR_BATCHES)]
        bias_se.append(float(np.std(bb, ddof=1) / np.sqrt(len(bb))))
        cb = [b.mean() for b in np.array_split(cvals, N_ERROR_BATCHES)]
        cent_se.append(float(np.std(cb, ddof=1) / np.sqrt(len(cb))))
    mean_curve = ErrorCurve(kind="one-step-bias", p=1, h=h_list, error=bias,
                            stderr=bias_se, n_paths=[n_samples] * len(h_list))
    cent_curve = ErrorCurve(kind="one-step-centered", p=2, h=h_list, error=cent,
                            stderr=cent_se, n_paths=[n_samples] * len(h_list))
    return mean_curve, cent_curve


def pool_curves(curves: list[ErrorCurve]) -> ErrorCurve:
    """Average several curves of the same kind over a shared h grid."""
    head = curves[0]
    for c in curves[1:]:
        if c.kind != head.kind or not np.allclose(c.h, head.h):
            raise ValueError("can only pool curves of one kind on one grid")
    err = np.mean([c.error for c in curves], axis=0)
    se = np.linalg.norm([c.stderr for c in curves], axis=0) / len(curves)
    return ErrorCurve(kind=head.kind, p=head.p, h=head.h, error=err, stderr=se,
                      n_paths=np.sum([c.n_paths for c in curves], axis=0))


def wasserstein_p(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int = 2,
                  metric: str = "extrinsic") -> float:
    """Exact empirical p-Wasserstein distance between equal-size clouds.

    Solves the optimal assignment under cost ``d(x_i, y_j)^p`` exactly and
    returns ``(min cost / N)^{1/p}``.  ``metric`` is "extrinsic" (ambient
    Euclidean) or "spherical" (great-circle arccos<x, y>); cloud sizes are
    capped at 1024 to keep the cubic solver below half a minute.
    """
    X, Y = mu.points, nu.points
    if X.shape[0] != Y.shape[0]:
        raise ValueError(f"cloud sizes differ: {X.shape[0]} vs {Y.shape[0]}")
    if X.shape[0] > WASSERSTEIN_CAP:
        raise ValueError(f"cloud size {X.shape[0]} exceeds the cap {WASSERSTEIN_CAP}")
    if p not in (1, 2):
        raise ValueError("p must be 1 or 2")
    if metric == "extrinsic":
        d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    elif metric == "spherical":
        d = np.arccos(np.clip(X @ Y.T, -1.0, 1.0))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    rows, cols = linear_sum_assignment(d ** p)
    return float(np.mean(d[rows, cols] ** p) ** (1.0 / p))


def wasserstein_bruteforce(mu: EmpiricalMeasure, nu: EmpiricalMeasure, p: int = 2,
                           metric: str = "extrinsic") -> float:
    """Factorial brute-force Wasserstein oracle (N <= 9): tries every pairing."""
    from itertools import permutations

    X, Y = mu.points, nu.points
    N = X.shape[0]
    if N > 9:
        raise ValueError("brute force is for N <= 9")
    if metric == "extrinsic":
        d = np.linalg.norm(X[:, None, :] - Y[None, :, :], axis=-1)
    else:
        d = np.arccos(np.clip(X @ Y.T, -1.0, 1.0))
    cost = d ** p
    perms = np.array(list(permutations(range(N))))
    totals = cost[np.arange(N)[None, :], perms].sum(axis=1)
    return float((totals.min() / N) ** (1.0 / p))
