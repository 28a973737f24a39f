"""Differential-geometry primitives for embedded submanifolds of R^n.

A manifold is described by a :class:`Manifold` object that knows its intrinsic
dimension ``m``, its ambient dimension ``n``, and a small set of geometric
operations: the tangent projection ``P(x)``, the second fundamental form
``II_x(u, v)``, the Ito drift correction ``A(x)``, the exponential map
``exp_x(v)``, and the nearest-point projection ``pi(y)`` onto the manifold.
Concrete families (sphere, graph, level set) override the operations they have
closed forms for; everything else falls back to the generic implementations in
this module, which only require ``P`` and ``pi``:

* ``II_x(u, v) = (I - P(x)) (D_u P)(x) v`` with ``D_u P`` by central finite
  difference of the projection field along the tangent direction ``u``,
* ``A(x) = (1/2) sum_i II_x(E_i, E_i)`` over an orthonormal tangent basis,
* ``exp_x(v)`` by integrating the ambient geodesic equation
  ``gamma'' = II(gamma', gamma')`` with RK4 and per-substep reprojection.

All operations are vectorized: points are arrays of shape ``(..., n)``, and a
leading batch axis is threaded through every routine.  Results for a given row
never depend on the other rows of the batch, which is what makes path-parallel
simulation deterministic under any partitioning of paths into workers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

# Residual tolerances.  Chosen an order of magnitude above double-precision
# accumulation noise for ambient dimensions up to ~16.
TOL_TANGENT = 1e-8
FD_STEP = 1e-5  # relative finite-difference step for derivative-free formulas


def on_manifold_tol(x: np.ndarray) -> np.ndarray:
    """Membership tolerance 1e-9 * (1 + |x|), elementwise over a batch."""
    return 1e-9 * (1.0 + np.linalg.norm(np.atleast_2d(x), axis=-1))


class GeometryError(Exception):
    """Base class for geometry failures."""


class OffManifoldError(GeometryError):
    """A point failed the manifold membership test."""


class NotTangentError(GeometryError):
    """A vector failed the tangency (or normality) test."""


class ProjectionError(GeometryError):
    """Nearest-point projection did not converge (point outside the tube)."""


class RankDeficiencyError(GeometryError):
    """A level-set Jacobian lost rank at an evaluation point."""


@dataclass
class GeodesicConfig:
    """Settings for the generic geodesic (exponential map) integrator.

    ``substeps_per_unit`` is the number of RK4 substeps per unit of arclength;
    the integrator uses ``ceil(substeps_per_unit * |v|)`` substeps (at least
    one).  With ``reproject`` on, the state is pulled back onto the manifold
    and the velocity onto the tangent space after every substep.
    """

    substeps_per_unit: int = 16
    reproject: bool = True
    tol: float = 1e-12

    def __post_init__(self):
        if self.substeps_per_unit < 4:
            raise ValueError("substeps_per_unit must be >= 4")


DEFAULT_GEODESIC = GeodesicConfig()


def _as_batch(x) -> tuple[np.ndarray, bool]:
    """View ``x`` as a (B, n) batch; report whether the input was a single point."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        return x[None, :], True
    return x, False


def _unbatch(x: np.ndarray, single: bool) -> np.ndarray:
    return x[0] if single else x


def radial_clamp(r, z) -> np.ndarray:
    """Metric projection of ``z`` onto the closed ball of radius ``r``.

    Returns ``z`` if ``|z| <= r`` and ``r z / |z|`` otherwise; 1-Lipschitz both
    in ``z`` and in ``r``.  ``r`` may be a scalar or one value per batch row.
    """
    z, single = _as_batch(z)
    r = np.asarray(r, dtype=float)
    if np.any(r <= 0):
        raise ValueError("clamp radius must be positive")
    norms = np.linalg.norm(z, axis=-1)
    scale = np.ones_like(norms)
    over = norms > r
    scale[over] = (r if r.ndim == 0 else r[over]) / norms[over]
    return _unbatch(z * scale[:, None], single)


def smooth_step(s) -> np.ndarray:
    """C-infinity step theta(s) = phi(s) / (phi(s) + phi(1-s)), phi(s) = e^{-1/s}.

    Identically 0 for s <= 0 and 1 for s >= 1, strictly increasing in between.
    """
    s = np.asarray(s, dtype=float)

    def phi(t):
        out = np.zeros_like(t)
        pos = t > 0
        with np.errstate(over="ignore"):
            out[pos] = np.exp(-1.0 / t[pos])
        return out

    p = phi(s)
    q = phi(1.0 - s)
    return p / (p + q)


def cutoff_profile(t, r) -> np.ndarray:
    """Smooth cutoff psi with psi = 1 on [0, r/2] and psi = 0 on [r, inf)."""
    t = np.asarray(t, dtype=float)
    if not np.isfinite(r):
        return np.ones_like(t)
    with np.errstate(invalid="ignore"):
        s = 2.0 * t / r - 1.0
    s = np.where(np.isfinite(t), s, 2.0)  # non-finite distance counts as "far"
    return 1.0 - smooth_step(s)


class Manifold:
    """An embedded Riemannian submanifold M of R^n with its operation set.

    Subclasses must provide ``membership_residual`` and ``project_point_masked``
    plus at least one of ``projection`` / ``tangent_basis``.  Everything else
    (second fundamental form, Ito correction, exponential map, shape operator,
    bump extension) has a generic fallback defined here.

    Parameters
    ----------
    dim : intrinsic dimension m, with 1 <= m < n.
    ambient_dim : ambient dimension n.
    kappa1, kappa2 : optional curvature bounds sup|II| and sup|grad II|; when
        absent, the tests that need them are skipped rather than estimated.
    tube_radius : lower bound on the uniform tubular radius (may be inf).

    Instances are immutable after construction and safe to share across
    workers; all methods are pure functions of their inputs.
    """

    def __init__(self, dim: int, ambient_dim: int, name: str = "manifold",
                 kappa1: Optional[float] = None, kappa2: Optional[float] = None,
                 tube_radius: float = np.inf):
        if not 1 <= dim < ambient_dim:
            raise ValueError(f"need 1 <= dim < ambient_dim, got {dim}, {ambient_dim}")
        self.dim = int(dim)
        self.ambient_dim = int(ambient_dim)
        self.name = name
        self.kappa1 = kappa1
        self.kappa2 = kappa2
        self.tube_radius = float(tube_radius)

    # -- membership ---------------------------------------------------------

    def membership_residual(self, x) -> np.ndarray:
        """Distance-like residual of x from M (0 on M), shape (B,)."""
        raise NotImplementedError

    def require_on_manifold(self, x, factor: float = 1.0):
        xb, _ = _as_batch(x)
        res = np.atleast_1d(self.membership_residual(xb))
        tol = factor * on_manifold_tol(xb)
        bad = res > tol
        if np.any(bad):
            i = int(np.argmax(res))
            raise OffManifoldError(
                f"{self.name}: point off manifold (residual {res[i]:.3e} > {tol[i]:.3e}"
                f" at batch index {i})")

    def require_tangent(self, x, v):
        xb, _ = _as_batch(x)
        vb, _ = _as_batch(v)
        res = np.linalg.norm(self.apply_projection(xb, vb) - vb, axis=-1)
        lim = TOL_TANGENT * np.maximum(1.0, np.linalg.norm(vb, axis=-1))
        if np.any(res > lim):
            i = int(np.argmax(res - lim))
            raise NotTangentError(
                f"{self.name}: vector not tangent (residual {res[i]:.3e} at index {i})")

    # -- projections --------------------------------------------------------

    def projection(self, x) -> np.ndarray:
        """Orthogonal projection matrix P(x) onto T_x M, shape (..., n, n).

        Subclasses evaluate their closed form also at points slightly off M
        (a smooth extension), which the finite-difference formulas rely on.
        """
        xb, single = _as_batch(x)
        basis = np.atleast_3d(self.tangent_basis(xb))
        P = np.einsum("bmi,bmj->bij", basis, basis)
        return _unbatch(P, single)

    def apply_projection(self, x, w) -> np.ndarray:
        """P(x) w without materializing the projection matrix when possible."""
        xb, _ = _as_batch(x)
        wb, single = _as_batch(w)
        out = np.einsum("bij,bj->bi", np.atleast_3d(self.projection(xb)), wb)
        return _unbatch(out, single)

    def tangent_basis(self, x) -> np.ndarray:
        """Orthonormal basis of T_x M as rows, shape (..., m, n)."""
        xb, single = _as_batch(x)
        P = np.atleast_3d(self.projection(xb))
        w, v = np.linalg.eigh(P)
        # eigenvalues of a projector cluster at 0 and 1; keep the top m
        basis = np.swapaxes(v[..., -self.dim:], -1, -2)
        return _unbatch(basis, single)

    def project_point_masked(self, y, tol: Optional[float] = None
                             ) -> tuple[np.ndarray, np.ndarray]:
        """Nearest-point projection with a convergence mask, no exceptions.

        Returns ``(x, ok)`` where rows with ``ok`` False did not converge
        (treated as lying outside the reliable tube).  ``tol`` is the joint
        residual tolerance, relative to 1 + |y| (default 1e-13).
        """
        raise NotImplementedError

    def project_point(self, y) -> np.ndarray:
        """Nearest-point projection pi(y); raises ProjectionError on failure."""
        yb, single = _as_batch(y)
        if not np.all(np.isfinite(yb)):
            raise ProjectionError(f"{self.name}: non-finite input to projection")
        x, ok = self.project_point_masked(yb)
        if not np.all(ok):
            idx = np.flatnonzero(~ok)
            raise ProjectionError(
                f"{self.name}: nearest-point projection failed to converge for "
                f"{idx.size} point(s), first at batch index {int(idx[0])}")
        return _unbatch(x, single)

    def distance_to(self, y) -> tuple[np.ndarray, np.ndarray]:
        """(d(y, M), converged-mask); d is +inf where projection failed."""
        yb, single = _as_batch(y)
        x, ok = self.project_point_masked(yb)
        d = np.full(yb.shape[0], np.inf)
        d[ok] = np.linalg.norm(yb[ok] - x[ok], axis=-1)
        return _unbatch(d, single), _unbatch(ok, single)

    # -- curvature ----------------------------------------------------------

    def second_fundamental_form(self, x, u, v) -> np.ndarray:
        """II_x(u, v), the normal-valued extrinsic curvature form.

        Generic implementation: central finite difference of the projection
        field along ``u`` applied to ``v``, normal-projected and symmetrized.
        """
        xb, single = _as_batch(x)
        ub, _ = _as_batch(u)
        vb, _ = _as_batch(v)
        self.require_on_manifold(xb)
        self.require_tangent(xb, ub)
        self.require_tangent(xb, vb)
        out = self._ii(xb, ub, vb)
        return _unbatch(out, single)

    def _ii(self, x, u, v):
        if u is v:  # quadratic-form evaluation needs no symmetrization
            return self._ii_one_sided(x, u, v)
        return 0.5 * (self._ii_one_sided(x, u, v) + self._ii_one_sided(x, v, u))

    def _ii_one_sided(self, x, u, v):
        nu = np.linalg.norm(u, axis=-1)
        out = np.zeros_like(v)
        live = nu > 0
        if not np.any(live):
            return out
        xs, us, vs = x[live], u[live], v[live]
        t = FD_STEP * np.maximum(1.0, np.linalg.norm(xs, axis=-1))
        step = (t / nu[live])[:, None] * us
        dPv = np.einsum("bij,bj->bi",
                        self.projection(xs + step) - self.projection(xs - step), vs)
        dPv *= (nu[live] / (2.0 * t))[:, None]
        out[live] = dPv - self.apply_projection(xs, dPv)
        return out

    def ito_drift(self, x) -> np.ndarray:
        """Ito correction A(x) = (1/2) sum_i II_x(E_i, E_i); basis independent."""
        xb, single = _as_batch(x)
        self.require_on_manifold(xb)
        return _unbatch(self._ito_drift(xb), single)

    def _ito_drift(self, x):
        basis = np.atleast_3d(self.tangent_basis(x))
        acc = np.zeros_like(x)
        for i in range(self.dim):
            e = basis[:, i, :]
            acc += self._ii(x, e, e)
        return 0.5 * acc

    def shape_operator(self, x, xi) -> np.ndarray:
        """Shape operator S_{x,xi} as an (n, n) matrix, zero on the normal space.

        Satisfies <S u, v> = <II(u, v), xi> for tangent u, v; symmetric on T_x M.
        """
        xb, single = _as_batch(x)
        xib, _ = _as_batch(xi)
        self.require_on_manifold(xb)
        res = np.linalg.norm(self.apply_projection(xb, xib), axis=-1)
        lim = TOL_TANGENT * np.maximum(1.0, np.linalg.norm(xib, axis=-1))
        if np.any(res > lim):
            raise NotTangentError(f"{self.name}: xi is not a normal vector")
        basis = np.atleast_3d(self.tangent_basis(xb))
        n = self.ambient_dim
        S = np.zeros((xb.shape[0], n, n))
        for i in range(self.dim):
            ei = basis[:, i, :]
            for j in range(i, self.dim):
                ej = basis[:, j, :]
                sij = (self._ii(xb, ei, ej) * xib).sum(-1)
                outer = ei[:, :, None] * ej[:, None, :]
                if j == i:
                    S += sij[:, None, None] * outer
                else:
                    S += sij[:, None, None] * (outer + np.swapaxes(outer, 1, 2))
        return _unbatch(S, single)

    # -- exponential map ----------------------------------------------------

    def exp(self, x, v, cfg: Optional[GeodesicConfig] = None) -> np.ndarray:
        """Exponential map exp_x(v) for tangent v.

        Generic implementation integrates the ambient geodesic equation
        gamma'' = II(gamma', gamma') with classical RK4, reprojecting the state
        onto M and the velocity onto the tangent space after each substep.
        exp_x(0) = x exactly.
        """
        cfg = cfg or DEFAULT_GEODESIC
        xb, single = _as_batch(x)
        vb, _ = _as_batch(v)
        X = xb.copy()
        W = vb.copy()
        speed = np.linalg.norm(W, axis=-1)
        nsub = np.maximum(1, np.ceil(cfg.substeps_per_unit * speed)).astype(int)
        nsub[speed == 0.0] = 0
        dt = np.zeros_like(speed)
        moving = nsub > 0
        dt[moving] = 1.0 / nsub[moving]
        for j in range(int(nsub.max(initial=0))):
            act = j < nsub
            h = np.where(act, dt, 0.0)[:, None]
            k1x, k1w = W, self._ii(X, W, W)
            x2, w2 = X + 0.5 * h * k1x, W + 0.5 * h * k1w
            k2x, k2w = w2, self._ii(x2, w2, w2)
            x3, w3 = X + 0.5 * h * k2x, W + 0.5 * h * k2w
            k3x, k3w = w3, self._ii(x3, w3, w3)
            x4, w4 = X + h * k3x, W + h * k3w
            k4x, k4w = w4, self._ii(x4, w4, w4)
            Xn = X + (h / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x)
            Wn = W + (h / 6.0) * (k1w + 2 * k2w + 2 * k3w + k4w)
            if cfg.reproject:
                proj, ok = self.project_point_masked(Xn, tol=cfg.tol)
                if not np.all(ok[act]):
                    raise ProjectionError(
                        f"{self.name}: geodesic left the tubular validity region")
                Xn = proj
                Wn = self.apply_projection(Xn, Wn)
            # frozen rows keep their exact previous values
            X = np.where(act[:, None], Xn, X)
            W = np.where(act[:, None], Wn, W)
        return _unbatch(X, single)

    # -- randomness ---------------------------------------------------------

    def tangent_gaussian(self, x, rng: np.random.Generator) -> np.ndarray:
        """Standard Gaussian on T_x M: P(x) xi with xi ~ N(0, I_n)."""
        xb, single = _as_batch(x)
        self.require_on_manifold(xb)
        xi = rng.standard_normal(xb.shape)
        return _unbatch(self.apply_projection(xb, xi), single)

    # -- bump function and extension ----------------------------------------

    def bump(self, y, r0: Optional[float] = None) -> np.ndarray:
        """Smooth cutoff chi(y) = psi(d(y, M)) with support in the r0/2-tube.

        chi = 1 for d <= r0/4 and chi = 0 for d >= r0/2; points whose
        projection fails to converge count as outside the support.
        """
        r0 = self.tube_radius if r0 is None else float(r0)
        if r0 <= 0:
            raise ValueError("bump radius must be positive")
        yb, single = _as_batch(y)
        d, _ = self.distance_to(yb)
        return _unbatch(cutoff_profile(np.atleast_1d(d), r0 / 2.0), single)

    def extend(self, fn: Callable[[np.ndarray], np.ndarray],
               r0: Optional[float] = None) -> Callable[[np.ndarray], np.ndarray]:
        """Extend a field defined on M to all of R^n as y -> chi(y) fn(pi(y)).

        The extension equals fn on M and vanishes identically outside the
        r0/2-tube, where fn is never evaluated.
        """
        r0 = self.tube_radius if r0 is None else float(r0)

        def extended(y):
            yb, single = _as_batch(y)
            x, ok = self.project_point_masked(yb)
            d = np.full(yb.shape[0], np.inf)
            d[ok] = np.linalg.norm(yb[ok] - x[ok], axis=-1)
            chi = cutoff_profile(d, r0 / 2.0)
            inside = chi > 0.0
            if not np.any(inside):
                probe = np.zeros((0, self.ambient_dim))
                out_shape = (yb.shape[0],) + np.asarray(fn(probe)).shape[1:]
                return _unbatch(np.zeros(out_shape), single)
            vals = np.asarray(fn(x[inside]))
            out = np.zeros((yb.shape[0],) + vals.shape[1:])
            out[inside] = chi[inside].reshape((-1,) + (1,) * (vals.ndim - 1)) * vals
            return _unbatch(out, single)

        return extended

    # -- curvature bounds ----------------------------------------------------

    def ricci_lower_bound(self) -> float:
        """A lower bound on Ric(u, u) for unit tangent u, constant over M.

        Generic bound -2 (m-1) kappa1^2 from the bounded second fundamental
        form; closed forms override (the unit sphere has Ric = (m-1) g).
        """
        if self.kappa1 is None:
            raise GeometryError(
                f"{self.name}: no Ricci bound available (kappa1 unknown)")
        return -2.0 * (self.dim - 1) * self.kappa1 ** 2

    # -- sampling -------------------------------------------------------------

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw `size` points on M (for diagnostics; built-ins implement it)."""
        raise NotImplementedError(f"{self.name} has no point sampler")

    def __repr__(self):
        return f"{type(self).__name__}({self.name}, m={self.dim}, n={self.ambient_dim})"


def tangent_projection(man: Manifold, x) -> np.ndarray:
    """P(x) for a point on the manifold; raises OffManifoldError otherwise.

    Unlike ``man.projection`` (which also evaluates the smooth extension of P
    at near-manifold points, as the finite-difference formulas require), this
    checks membership first.
    """
    man.require_on_manifold(x)
    return man.projection(x)


def orthonormal_tangent_frame(man: Manifold, x, rng: np.random.Generator) -> np.ndarray:
    """A random orthonormal basis of T_x M (rows), shape (..., m, n)."""
    xb, single = _as_batch(x)
    raw = rng.standard_normal((xb.shape[0], man.ambient_dim, man.dim))
    proj = np.einsum("bij,bjk->bik",
                     np.atleast_3d(man.projection(xb)), raw)
    q, r = np.linalg.qr(proj)
    # fix signs so the frame is a deterministic function of the raw draw
    signs = np.sign(np.einsum("bii->bi", r))
    signs[signs == 0] = 1.0
    basis = np.swapaxes(q * signs[:, None, :], -1, -2)
    return _unbatch(basis, single)
