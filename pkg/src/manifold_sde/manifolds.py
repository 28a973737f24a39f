"""Concrete manifold families: spheres, graph manifolds, and level sets.

Each family implements the :class:`~manifold_sde.geometry.Manifold` contract
with whatever closed forms it has:

* ``Sphere``: everything in closed form (projection, II, Ito drift,
  exponential map, nearest point), tubular radius 1.
* ``Graph`` of ``f: R^m -> R^k``: membership and nearest point in closed form
  (damped Newton on the first-order condition of the squared-distance
  objective), curvature and exponential map through the generic fallbacks,
  tubular radius ``1 / (C2 (1 + 2 C1^2))``.
* ``LevelSet`` ``F^{-1}(0)``: projections and curvature through the
  Moore-Penrose right inverse of ``DF``, nearest point by alternating a
  Gauss-Newton root step with a tangential pull, tubular radius ``c0 / C2``.

Derivative callbacks supplied by the user are spot-checked against finite
differences at construction, which catches sign and transpose mistakes early.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import (
    FD_STEP,
    GeodesicConfig,
    Manifold,
    RankDeficiencyError,
    _as_batch,
    _unbatch,
)

_PROJECT_MAX_ITER = 100


class Sphere(Manifold):
    """Unit sphere S^{n-1} in R^n (n >= 2); the circle is n = 2."""

    def __init__(self, ambient_dim: int):
        if ambient_dim < 2:
            raise ValueError("sphere needs ambient dimension >= 2")
        super().__init__(ambient_dim - 1, ambient_dim,
                         name=f"sphere(S^{ambient_dim - 1})",
                         kappa1=1.0, kappa2=0.0, tube_radius=1.0)

    def membership_residual(self, x):
        xb, single = _as_batch(x)
        return _unbatch(np.abs(np.linalg.norm(xb, axis=-1) - 1.0), single)

    def projection(self, x):
        xb, single = _as_batch(x)
        u = xb / np.linalg.norm(xb, axis=-1, keepdims=True)
        P = np.eye(self.ambient_dim) - u[:, :, None] * u[:, None, :]
        return _unbatch(P, single)

    def apply_projection(self, x, w):
        xb, _ = _as_batch(x)
        wb, single = _as_batch(w)
        u = xb / np.linalg.norm(xb, axis=-1, keepdims=True)
        return _unbatch(wb - (wb * u).sum(-1, keepdims=True) * u, single)

    def tangent_basis(self, x):
        xb, single = _as_batch(x)
        u = (xb / np.linalg.norm(xb, axis=-1, keepdims=True))[:, None, :]
        _, _, vt = np.linalg.svd(u, full_matrices=True)
        return _unbatch(vt[:, 1:, :], single)

    def _ii(self, x, u, v):
        # II(u, v) = -<u, v> x on the unit sphere
        return -(u * v).sum(-1, keepdims=True) * x

    def _ito_drift(self, x):
        return -0.5 * self.dim * x

    def exp(self, x, v, cfg: Optional[GeodesicConfig] = None):
        xb, single = _as_batch(x)
        vb, _ = _as_batch(v)
        nv = np.linalg.norm(vb, axis=-1, keepdims=True)
        unit = np.divide(vb, nv, out=np.zeros_like(vb), where=nv > 0)
        out = np.where(nv > 0, np.cos(nv) * xb + np.sin(nv) * unit, xb)
        return _unbatch(out, single)

    def project_point_masked(self, y, tol=None):
        yb, _ = _as_batch(y)
        norms = np.linalg.norm(yb, axis=-1, keepdims=True)
        ok = np.isfinite(norms[:, 0]) & (norms[:, 0] > 1e-12)
        x = np.where(ok[:, None], yb / np.where(norms > 0, norms, 1.0), yb)
        return x, ok

    def ricci_lower_bound(self):
        # Ric = (m - 1) g on the unit sphere
        return float(self.dim - 1)

    def sample(self, rng, size):
        x = rng.standard_normal((size, self.ambient_dim))
        return x / np.linalg.norm(x, axis=-1, keepdims=True)


def _spot_check_derivatives(name, fn, dfn, points, rel_tol=1e-4):
    """Compare a Jacobian callback against central differences of fn."""
    for p in points:
        base = np.atleast_2d(p)
        jac = np.atleast_3d(dfn(base))[0]  # (k, d)
        d = base.shape[1]
        fd = np.empty_like(jac)
        for j in range(d):
            h = FD_STEP * max(1.0, abs(p[j]))
            e = np.zeros(d)
            e[j] = h
            fd[:, j] = (np.atleast_2d(fn(base + e))[0]
                        - np.atleast_2d(fn(base - e))[0]) / (2 * h)
        scale = max(1.0, np.abs(jac).max())
        if np.abs(jac - fd).max() > rel_tol * scale:
            raise ValueError(
                f"{name}: derivative callback disagrees with finite differences "
                f"(max error {np.abs(jac - fd).max():.3e} at point {p})")


@dataclass
class GraphSpec:
    """Graph manifold {(x, f(x))} of f: R^m -> R^k, with derivative callbacks.

    ``f``, ``df``, ``d2f`` take batches: f(x) -> (B, k), df(x) -> (B, k, m),
    d2f(x) -> (B, k, m, m).  ``c1`` and ``c2`` are the declared sup norms of
    Df and D^2f on the working region (the tubular-radius formula uses them;
    they are not verified globally).
    """

    m: int
    k: int
    f: Callable[[np.ndarray], np.ndarray]
    df: Callable[[np.ndarray], np.ndarray]
    d2f: Callable[[np.ndarray], np.ndarray]
    c1: float = 0.0
    c2: float = 0.0
    name: str = "graph"
    kappa1: Optional[float] = None
    kappa2: Optional[float] = None
    sample_base: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None

    def validate(self, rng: Optional[np.random.Generator] = None):
        rng = rng or np.random.default_rng(20240901)
        pts = rng.standard_normal((8, self.m))
        _spot_check_derivatives(self.name, self.f, self.df, pts)
        for j in range(self.m):
            def dfj(x, j=j):
                return np.atleast_3d(self.df(x))[:, :, j]

            def d2fj(x, j=j):
                return np.asarray(self.d2f(x))[:, :, j, :]

            _spot_check_derivatives(f"{self.name} (Hessian col {j})", dfj, d2fj, pts)


class Graph(Manifold):
    """Graph manifold of a smooth f: R^m -> R^k embedded in R^{m+k}."""

    def __init__(self, spec: GraphSpec):
        spec.validate()
        tube = np.inf if spec.c2 == 0 else 1.0 / (spec.c2 * (1.0 + 2.0 * spec.c1 ** 2))
        super().__init__(spec.m, spec.m + spec.k, name=spec.name,
                         kappa1=spec.kappa1, kappa2=spec.kappa2, tube_radius=tube)
        self.spec = spec

    def _split(self, z):
        return z[..., :self.spec.m], z[..., self.spec.m:]

    def membership_residual(self, x):
        zb, single = _as_batch(x)
        u, tail = self._split(zb)
        return _unbatch(np.linalg.norm(tail - self.spec.f(u), axis=-1), single)

    def lift(self, u) -> np.ndarray:
        """Embed base coordinates u into R^n as (u, f(u))."""
        ub = np.atleast_2d(np.asarray(u, dtype=float))
        out = np.concatenate([ub, self.spec.f(ub)], axis=-1)
        return out[0] if np.asarray(u).ndim == 1 else out

    def _jacobian_columns(self, u):
        # columns (e_i, d_i f) of the parametrization, shape (B, n, m)
        B = u.shape[0]
        J = np.zeros((B, self.ambient_dim, self.spec.m))
        J[:, :self.spec.m, :] = np.eye(self.spec.m)
        J[:, self.spec.m:, :] = self.spec.df(u)
        return J

    def tangent_basis(self, x):
        zb, single = _as_batch(x)
        u, _ = self._split(zb)
        q, r = np.linalg.qr(self._jacobian_columns(u))
        signs = np.sign(np.einsum("bii->bi", r))
        signs[signs == 0] = 1.0
        return _unbatch(np.swapaxes(q * signs[:, None, :], -1, -2), single)

    def projection(self, x):
        # P = J (J^T J)^{-1} J^T with J the parametrization Jacobian; the
        # normal equations are well conditioned since J^T J = I + Df^T Df
        zb, single = _as_batch(x)
        u, _ = self._split(zb)
        J = self._jacobian_columns(u)
        gram = np.einsum("bim,bil->bml", J, J)
        P = np.einsum("bim,bml,bjl->bij", J, np.linalg.inv(gram), J)
        return _unbatch(P, single)

    def apply_projection(self, x, w):
        zb, _ = _as_batch(x)
        wb, single = _as_batch(w)
        u, _ = self._split(zb)
        J = self._jacobian_columns(u)
        gram = np.einsum("bim,bil->bml", J, J)
        coef = np.linalg.solve(gram, np.einsum("bim,bi->bm", J, wb)[..., None])
        return _unbatch(np.einsum("bim,bm->bi", J, coef[..., 0]), single)

    def project_point_masked(self, y, tol=None):
        yb, _ = _as_batch(y)
        u, v = self._split(yb)
        spec = self.spec
        x = u.copy()
        ok = np.all(np.isfinite(yb), axis=-1)
        active = ok.copy()
        tol = (1e-13 if tol is None else tol) * (1.0 + np.linalg.norm(yb, axis=-1))
        for _ in range(_PROJECT_MAX_ITER):
            if not np.any(active):
                break
            idx = np.flatnonzero(active)
            xs = x[idx]
            uu, vv = u[idx], v[idx]
            fx = spec.f(xs)
            J = np.atleast_3d(spec.df(xs))
            resid = fx - vv
            grad = xs - uu + np.einsum("bkm,bk->bm", J, resid)
            H = (np.eye(spec.m)
                 + np.einsum("bkm,bkl->bml", J, J)
                 + np.einsum("bk,bkml->bml", resid, np.asarray(spec.d2f(xs))))
            # inside the declared tube H is uniformly positive definite; rows
            # where it degenerates are outside the reliable region
            good = np.linalg.eigvalsh(H)[:, 0] > 1e-12
            if not np.all(good):
                ok[idx[~good]] = False
                active[idx[~good]] = False
                if not np.any(good):
                    continue
                idx = idx[good]
                xs, uu, vv, resid = xs[good], uu[good], vv[good], resid[good]
                grad, H = grad[good], H[good]
            step = np.linalg.solve(H, grad[..., None])[..., 0]
            # damped update: halve the step while the objective does not decrease
            phi0 = 0.5 * ((xs - uu) ** 2).sum(-1) + 0.5 * (resid ** 2).sum(-1)
            lam = np.ones(xs.shape[0])
            xn = xs - step
            for _ in range(25):
                phin = (0.5 * ((xn - uu) ** 2).sum(-1)
                        + 0.5 * ((spec.f(xn) - vv) ** 2).sum(-1))
                # relative slack keeps float noise from stalling tiny steps
                worse = phin > phi0 * (1.0 + 1e-12) + 1e-300
                if not np.any(worse):
                    break
                lam[worse] *= 0.5
                xn = xs - lam[:, None] * step
            x[idx] = xn
            done = np.linalg.norm(grad, axis=-1) <= tol[idx]
            active[idx[done]] = False
        ok &= ~active
        return np.concatenate([x, spec.f(x)], axis=-1), ok

    def sample(self, rng, size):
        if self.spec.sample_base is None:
            base = rng.standard_normal((size, self.spec.m))
        else:
            base = self.spec.sample_base(rng, size)
        return self.lift(base)


@dataclass
class LevelSetSpec:
    """Level set F^{-1}(0) of F: R^n -> R^k with derivative callbacks.

    ``F(x) -> (B, k)``, ``dF(x) -> (B, k, n)``, ``d2F(x) -> (B, k, n, n)``.
    ``c0`` is a declared lower bound on the smallest singular value of DF on
    the manifold; ``c2``/``c3`` are declared sup norms of D^2F and D^3F near
    it.  The tubular radius bound is ``c0 / c2``.
    """

    n: int
    k: int
    F: Callable[[np.ndarray], np.ndarray]
    dF: Callable[[np.ndarray], np.ndarray]
    d2F: Callable[[np.ndarray], np.ndarray]
    c0: float
    c2: float
    c3: Optional[float] = None
    name: str = "level-set"
    kappa1: Optional[float] = None
    kappa2: Optional[float] = None
    sample_fn: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    anchor: Optional[np.ndarray] = None

    def validation_points(self, rng: np.random.Generator) -> np.ndarray:
        if self.sample_fn is not None:
            return self.sample_fn(rng, 8)
        if self.anchor is not None:
            return np.asarray(self.anchor, dtype=float)[None, :] \
                + 0.01 * rng.standard_normal((8, self.n))
        raise ValueError(f"{self.name}: need sample_fn or anchor for derivative validation")

    def validate(self, rng: Optional[np.random.Generator] = None):
        if not (0 < self.k < self.n):
            raise ValueError("level set needs 0 < k < n")
        if self.c0 <= 0 or self.c2 <= 0:
            raise ValueError("c0 and c2 must be positive")
        rng = rng or np.random.default_rng(20240902)
        pts = self.validation_points(rng)
        _spot_check_derivatives(self.name, self.F, self.dF, pts)
        for j in range(self.n):
            def dFj(x, j=j):
                return np.atleast_3d(self.dF(x))[:, :, j]

            def d2Fj(x, j=j):
                return np.asarray(self.d2F(x))[:, :, j, :]

            _spot_check_derivatives(f"{self.name} (Hessian col {j})", dFj, d2Fj, pts)
        if self.sample_fn is not None:
            smin = np.linalg.svd(np.atleast_3d(self.dF(pts)), compute_uv=False)[:, -1]
            if np.any(smin < self.c0 * (1.0 - 1e-9)):
                raise ValueError(
                    f"{self.name}: declared c0={self.c0} exceeds observed "
                    f"sigma_min={smin.min():.6g} at a sample point")


class LevelSet(Manifold):
    """Level-set manifold F^{-1}(0) with Moore-Penrose based geometry."""

    def __init__(self, spec: LevelSetSpec):
        spec.validate()
        kappa1 = spec.kappa1 if spec.kappa1 is not None else spec.c2 / spec.c0
        kappa2 = spec.kappa2
        if kappa2 is None and spec.c3 is not None:
            kappa2 = spec.c3 / spec.c0 + 3.0 * spec.c2 ** 2 / spec.c0 ** 2
        super().__init__(spec.n - spec.k, spec.n, name=spec.name,
                         kappa1=kappa1, kappa2=kappa2,
                         tube_radius=spec.c0 / spec.c2)
        self.spec = spec

    def membership_residual(self, x):
        xb, single = _as_batch(x)
        # |F| / c0 is a first-order bound on the distance to the manifold
        return _unbatch(np.linalg.norm(self.spec.F(xb), axis=-1) / self.spec.c0, single)

    def _gram_apply(self, G, w):
        """G^dagger w = G^T (G G^T)^{-1} w for w with shape (B, k)."""
        gram = np.einsum("bki,bli->bkl", G, G)
        smin2 = np.linalg.eigvalsh(gram)[:, 0]
        if np.any(smin2 < (0.5 * self.spec.c0) ** 2):
            raise RankDeficiencyError(
                f"{self.name}: DF lost rank (sigma_min < c0/2) at an evaluation point")
        return np.einsum("bki,bk->bi", G, np.linalg.solve(gram, w[..., None])[..., 0])

    def apply_projection(self, x, w):
        xb, _ = _as_batch(x)
        wb, single = _as_batch(w)
        G = np.atleast_3d(self.spec.dF(xb))
        Gw = np.einsum("bki,bi->bk", G, wb)
        return _unbatch(wb - self._gram_apply(G, Gw), single)

    def projection(self, x):
        xb, single = _as_batch(x)
        G = np.atleast_3d(self.spec.dF(xb))
        gram = np.einsum("bki,bli->bkl", G, G)
        smin2 = np.linalg.eigvalsh(gram)[:, 0]
        if np.any(smin2 < (0.5 * self.spec.c0) ** 2):
            raise RankDeficiencyError(
                f"{self.name}: DF lost rank (sigma_min < c0/2) at an evaluation point")
        normal = np.einsum("bki,bkl,blj->bij", G, np.linalg.inv(gram), G)
        return _unbatch(np.eye(self.spec.n) - normal, single)

    def tangent_basis(self, x):
        xb, single = _as_batch(x)
        G = np.atleast_3d(self.spec.dF(xb))
        _, _, vt = np.linalg.svd(G, full_matrices=True)
        return _unbatch(vt[:, self.spec.k:, :], single)

    def _ii(self, x, u, v):
        # II(u, v) = -G^dagger D^2F[u, v]
        G = np.atleast_3d(self.spec.dF(x))
        d2 = np.asarray(self.spec.d2F(x))
        quad = np.einsum("bkij,bi,bj->bk", d2, u, v)
        return -self._gram_apply(G, quad)

    def _ito_drift(self, x):
        # A = -1/2 G^dagger tr_T(D^2F); the tangent trace is tr(D^2F^a P)
        G = np.atleast_3d(self.spec.dF(x))
        d2 = np.asarray(self.spec.d2F(x))
        P = np.atleast_3d(self.projection(x))
        tr = np.einsum("bkij,bij->bk", d2, P)
        return -0.5 * self._gram_apply(G, tr)

    def _normal_solve(self, xs, w):
        """G^dagger w at xs with a numerical-singularity mask (no c0/2 guard).

        Iterates of the nearest-point search may pass close to the focal set
        where DF degenerates; such rows are reported instead of raised.
        """
        G = np.atleast_3d(self.spec.dF(xs))
        gram = np.einsum("bki,bli->bkl", G, G)
        good = np.linalg.eigvalsh(gram)[:, 0] >= (1e-6 * self.spec.c0) ** 2
        safe = np.where(good[:, None, None], gram, np.eye(self.spec.k))
        sol = np.linalg.solve(safe, w[..., None])[..., 0]
        return np.einsum("bki,bk->bi", G, sol), good

    def project_point_masked(self, y, tol=None):
        yb, _ = _as_batch(y)
        spec = self.spec
        x = yb.copy()
        ok = np.all(np.isfinite(yb), axis=-1)
        active = ok.copy()
        tol = (1e-13 if tol is None else tol) * (1.0 + np.linalg.norm(yb, axis=-1))
        for _ in range(_PROJECT_MAX_ITER):
            idx = np.flatnonzero(active)
            if idx.size == 0:
                break
            xs = x[idx]
            # Gauss-Newton root step onto the zero set
            step, good = self._normal_solve(xs, spec.F(xs))
            xs = xs - step
            # tangential pull toward the foot point
            d = yb[idx] - xs
            Gd = np.einsum("bki,bi->bk", np.atleast_3d(spec.dF(xs)), d)
            normal_part, good2 = self._normal_solve(xs, Gd)
            pull = d - normal_part
            xs = xs + pull
            good &= good2
            ok[idx[~good]] = False
            active[idx[~good]] = False
            idx = idx[good]
            if idx.size == 0:
                continue
            x[idx] = xs[good]
            res_f = np.linalg.norm(spec.F(xs[good]), axis=-1) / spec.c0
            res_t = np.linalg.norm(pull[good], axis=-1)
            done = (res_f <= tol[idx]) & (res_t <= tol[idx])
            active[idx[done]] = False
        ok &= ~active
        return x, ok

    def sample(self, rng, size):
        if self.spec.sample_fn is None:
            raise NotImplementedError(f"{self.name} has no point sampler")
        return self.spec.sample_fn(rng, size)


def make_sphere(n: int) -> Sphere:
    """Unit sphere S^{n-1} embedded in R^n."""
    return Sphere(n)


def make_graph(spec: GraphSpec) -> Graph:
    return Graph(spec)


def make_level_set(spec: LevelSetSpec) -> LevelSet:
    return LevelSet(spec)


# -- built-in named manifolds -------------------------------------------------

def _paraboloid_spec(a: float) -> GraphSpec:
    def f(x):
        return a * (x ** 2).sum(-1, keepdims=True)

    def df(x):
        return 2.0 * a * x[:, None, :]

    def d2f(x):
        return np.broadcast_to(2.0 * a * np.eye(2), (x.shape[0], 1, 2, 2)).copy()

    # declared bounds on the |x| <= 1 working patch
    return GraphSpec(m=2, k=1, f=f, df=df, d2f=d2f, c1=2.0 * a, c2=2.0 * a,
                     name=f"graph-paraboloid(a={a:g})", kappa1=2.0 * a,
                     sample_base=lambda rng, s: rng.uniform(-1.0, 1.0, (s, 2)))


def _sine_spec() -> GraphSpec:
    def f(x):
        return np.sin(x)

    def df(x):
        return np.cos(x)[:, :, None]

    def d2f(x):
        return -np.sin(x)[:, :, None, None]

    return GraphSpec(m=1, k=1, f=f, df=df, d2f=d2f, c1=1.0, c2=1.0,
                     name="graph-sine", kappa1=1.0,
                     sample_base=lambda rng, s: rng.uniform(-np.pi, np.pi, (s, 1)))


def flat_plane() -> Graph:
    """The plane z = 0 in R^3: zero curvature, infinite tubular radius."""
    def f(x):
        return np.zeros((x.shape[0], 1))

    def df(x):
        return np.zeros((x.shape[0], 1, 2))

    def d2f(x):
        return np.zeros((x.shape[0], 1, 2, 2))

    return Graph(GraphSpec(m=2, k=1, f=f, df=df, d2f=d2f, c1=0.0, c2=0.0,
                           name="graph-flat", kappa1=0.0, kappa2=0.0))


def torus_spec(R: float = 2.0, r: float = 0.5) -> LevelSetSpec:
    """Torus in R^3 as the zero set of (sqrt(x^2+y^2) - R)^2 + z^2 - r^2.

    With R=2, r=0.5 the reach is r, giving a generous tube at desk scale:
    sigma_min(DF) = 2r on the surface and |D^2F| <= 2 near it.
    """
    if not 0 < r < R:
        raise ValueError("torus needs 0 < r < R")

    def F(x):
        rho = np.hypot(x[:, 0], x[:, 1])
        return ((rho - R) ** 2 + x[:, 2] ** 2 - r ** 2)[:, None]

    def dF(x):
        rho = np.hypot(x[:, 0], x[:, 1])
        fac = 2.0 * (rho - R) / rho
        return np.stack([fac * x[:, 0], fac * x[:, 1], 2.0 * x[:, 2]], axis=-1)[:, None, :]

    def d2F(x):
        rho = np.hypot(x[:, 0], x[:, 1])
        c, s = x[:, 0] / rho, x[:, 1] / rho
        tang = 2.0 * (rho - R) / rho
        out = np.zeros((x.shape[0], 1, 3, 3))
        # radial direction contributes curvature 2, tangential 2(rho-R)/rho
        out[:, 0, 0, 0] = 2.0 * c ** 2 + tang * s ** 2
        out[:, 0, 1, 1] = 2.0 * s ** 2 + tang * c ** 2
        out[:, 0, 0, 1] = out[:, 0, 1, 0] = (2.0 - tang) * c * s
        out[:, 0, 2, 2] = 2.0
        return out

    def sample(rng, size):
        theta = rng.uniform(0.0, 2.0 * np.pi, size)
        phi = rng.uniform(0.0, 2.0 * np.pi, size)
        rho = R + r * np.cos(phi)
        return np.stack([rho * np.cos(theta), rho * np.sin(theta),
                         r * np.sin(phi)], axis=-1)

    anchor = np.array([R + r, 0.0, 0.0])
    return LevelSetSpec(n=3, k=1, F=F, dF=dF, d2F=d2F, c0=2.0 * r, c2=2.0,
                        name=f"torus(R={R:g},r={r:g})", sample_fn=sample,
                        anchor=anchor)


def sphere_level_set_spec(n: int = 3) -> LevelSetSpec:
    """The unit sphere expressed as the level set of |x|^2 - 1."""
    def F(x):
        return ((x ** 2).sum(-1) - 1.0)[:, None]

    def dF(x):
        return 2.0 * x[:, None, :]

    def d2F(x):
        return np.broadcast_to(2.0 * np.eye(n), (x.shape[0], 1, n, n)).copy()

    def sample(rng, size):
        x = rng.standard_normal((size, n))
        return x / np.linalg.norm(x, axis=-1, keepdims=True)

    return LevelSetSpec(n=n, k=1, F=F, dF=dF, d2F=d2F, c0=2.0, c2=2.0, c3=0.0,
                        name=f"levelset-sphere(n={n})", sample_fn=sample)


def named_manifold(name: str, **params) -> Manifold:
    """Build one of the built-in manifolds by name.

    Known names: sphere(n), circle, torus(R, r), graph-paraboloid(a),
    graph-sine, graph-flat, levelset-sphere(n).
    """
    builders = {
        "sphere": lambda: Sphere(int(params.pop("n", 3))),
        "circle": lambda: Sphere(2),
        "torus": lambda: LevelSet(torus_spec(float(params.pop("R", 2.0)),
                                             float(params.pop("r", 0.5)))),
        "graph-paraboloid": lambda: Graph(_paraboloid_spec(float(params.pop("a", 1.0)))),
        "graph-sine": lambda: Graph(_sine_spec()),
        "graph-flat": lambda: flat_plane(),
        "levelset-sphere": lambda: LevelSet(sphere_level_set_spec(int(params.pop("n", 3)))),
    }
    if name not in builders:
        raise KeyError(f"unknown manifold name {name!r}; known: {sorted(builders)}")
    man = builders[name]()
    if params:
        raise KeyError(f"unused manifold parameters for {name!r}: {sorted(params)}")
    return man
