"""Riemannian Langevin dynamics: sampling a target density e^{-phi} on M.

The sampler discretizes ``dX = -1/2 grad(phi) dt + dB^M`` with the GEM scheme,
``X <- exp_X(-1/2 h grad(phi)(X) + sqrt(h) xi)``, where ``grad(phi)(x) =
P(x) grad_ambient(phi)(x)`` is the gradient along the manifold.  Under the
Bakry-Emery condition ``Ric + Hess(phi) >= lambda g`` with ``lambda > 0`` the
law contracts to the target exponentially fast in Wasserstein distance;
:func:`bakry_emery_diagnostic` estimates the smallest eigenvalue margin over a
point cloud as supporting evidence (it samples, so it is not a certificate).

Reference clouds for stationarity checks are drawn by independent oracles,
not by the sampler itself: uniform points on the sphere come from normalized
Gaussians, and von Mises-Fisher points from inverse-CDF sampling of the
1-D marginal along the mean direction times a uniform azimuth.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .geometry import FD_STEP, GeodesicConfig, Manifold, _as_batch, _unbatch
from .schemes import DriftField, simulate_coupled_paths


@dataclass
class Potential:
    """Scalar potential phi on ambient points, with an optional gradient.

    When ``grad`` is None the ambient gradient falls back to central finite
    differences of ``phi``.  ``phi(x)`` takes (B, n) and returns (B,);
    ``grad(x)`` returns (B, n).  Potentials must be pure and reentrant.
    """

    phi: Callable[[np.ndarray], np.ndarray]
    grad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = "potential"

    def value(self, x) -> np.ndarray:
        xb, single = _as_batch(x)
        return _unbatch(np.asarray(self.phi(xb), dtype=float), single)

    def ambient_gradient(self, x) -> np.ndarray:
        xb, single = _as_batch(x)
        if self.grad is not None:
            return _unbatch(np.asarray(self.grad(xb), dtype=float), single)
        out = np.empty_like(xb)
        for j in range(xb.shape[1]):
            h = FD_STEP * np.maximum(1.0, np.abs(xb[:, j]))
            e = np.zeros_like(xb)
            e[:, j] = h
            out[:, j] = (self.phi(xb + e) - self.phi(xb - e)) / (2.0 * h)
        return _unbatch(out, single)


def zero_potential() -> Potential:
    return Potential(phi=lambda x: np.zeros(x.shape[0]),
                     grad=lambda x: np.zeros_like(x), name="zero")


def linear_potential(a, kappa: float) -> Potential:
    """phi(x) = -kappa <a, x>; on the sphere this is the vMF(a, kappa) target."""
    a = np.asarray(a, dtype=float)
    return Potential(phi=lambda x: -kappa * x @ a,
                     grad=lambda x: np.broadcast_to(-kappa * a, x.shape).copy(),
                     name=f"linear(kappa={kappa:g})")


def quadratic_potential(Q) -> Potential:
    """phi(x) = 1/2 x^T Q x restricted to the manifold."""
    Q = np.asarray(Q, dtype=float)
    Qs = 0.5 * (Q + Q.T)
    return Potential(phi=lambda x: 0.5 * np.einsum("bi,ij,bj->b", x, Qs, x),
                     grad=lambda x: x @ Qs, name="quadratic")


def potential_by_name(name: str, **params) -> Potential:
    """Built-in potentials: "zero", "linear(a, kappa)", "quadratic(Q)"."""
    if name == "zero":
        pot = zero_potential()
    elif name == "linear":
        a = np.asarray(params.pop("a", (0.0, 0.0, 1.0)), dtype=float)
        kappa = float(params.pop("kappa", 1.0))
        pot = linear_potential(a, kappa)
    elif name == "quadratic":
        pot = quadratic_potential(params.pop("Q"))
    else:
        raise KeyError(f"unknown potential {name!r}; known: zero, linear, quadratic")
    if params:
        raise KeyError(f"unused potential parameters: {sorted(params)}")
    return pot


def rld_drift(man: Manifold, pot: Potential, x) -> np.ndarray:
    """The Langevin drift -1/2 P(x) grad_ambient(phi)(x), tangent at x."""
    xb, single = _as_batch(x)
    man.require_on_manifold(xb)
    out = -0.5 * man.apply_projection(xb, pot.ambient_gradient(xb))
    return _unbatch(out, single)


def rld_drift_field(man: Manifold, pot: Potential) -> DriftField:
    return DriftField(lambda x: -0.5 * man.apply_projection(x, pot.ambient_gradient(x)))


@dataclass
class SamplerConfig:
    """Settings for the Langevin sampler."""

    T: float
    h: float
    n_paths: int
    seed: int = 0
    burn_in: float = 0.25

    def __post_init__(self):
        if not 0 < self.h <= self.T:
            raise ValueError("need 0 < h <= T")
        if self.n_paths < 1:
            raise ValueError("need n_paths >= 1")
        if not 0 <= self.burn_in < 1:
            raise ValueError("burn_in is a fraction of T in [0, 1)")
        steps = self.T / self.h
        if abs(steps - round(steps)) > 1e-9:
            raise ValueError("T must be an integer multiple of h")

    @property
    def steps(self) -> int:
        return int(round(self.T / self.h))


def sample_rld(man: Manifold, pot: Potential, x0, cfg: SamplerConfig,
               checkpoints=None, workers: int = 1,
               geodesic: Optional[GeodesicConfig] = None):
    """Run the GEM-discretized Langevin sampler from x0 on independent paths.

    Returns the terminal-state point cloud (equal weights) and, when
    ``checkpoints`` is given, also a dict of clouds at those times.  Each
    checkpoint must be an integer multiple of the recording step.
    """
    from .analysis import EmpiricalMeasure  # local import to avoid a cycle

    drift = rld_drift_field(man, pot)
    steps = cfg.steps
    if checkpoints:
        spacing = min(checkpoints)
        per = spacing / cfg.h
        if abs(per - round(per)) > 1e-9:
            raise ValueError("checkpoints must be multiples of the step size")
        store = int(round(cfg.T / spacing))
        for t in checkpoints:
            if abs(t / spacing - round(t / spacing)) > 1e-9 or t > cfg.T:
                raise ValueError(f"checkpoint {t} not on the recording grid")
    else:
        store = 1
    bundle = simulate_coupled_paths(man, drift, x0, cfg.seed, cfg.T, [steps],
                                    cfg.n_paths, with_em=False, cfg=geodesic,
                                    store_steps=store, workers=workers)
    states = bundle.gem[steps]
    times = bundle.times[steps]
    terminal = EmpiricalMeasure(points=states[:, -1], label=man.name)
    if not checkpoints:
        return terminal
    clouds = {}
    for t in checkpoints:
        idx = int(np.argmin(np.abs(times - t)))
        clouds[float(t)] = EmpiricalMeasure(points=states[:, idx], label=man.name)
    return terminal, clouds


def geodesic_hessian(man: Manifold, pot: Potential, points, directions,
                     fd_step: float = 1e-3) -> np.ndarray:
    """Hess(phi)(u, u) along unit geodesics, (phi . gamma)'' at 0.

    Valid because the ambient second derivative of phi along a geodesic equals
    the manifold Hessian in that direction.  Central difference with step
    ``fd_step``; the second-difference noise (~1e-7) is fine for a diagnostic.
    """
    x, single = _as_batch(points)
    u, _ = _as_batch(directions)
    man.require_on_manifold(x)
    u = man.apply_projection(x, u)
    norms = np.linalg.norm(u, axis=-1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("directions must have nonzero tangent components")
    u = u / norms
    t = fd_step
    plus = np.atleast_1d(pot.value(man.exp(x, t * u)))
    minus = np.atleast_1d(pot.value(man.exp(x, -t * u)))
    mid = np.atleast_1d(pot.value(x))
    hess = (plus - 2.0 * mid + minus) / t ** 2
    return hess[0] if single else hess


def bakry_emery_diagnostic(man: Manifold, pot: Potential, points, directions,
                           fd_step: float = 1e-3) -> float:
    """Estimated Bakry-Emery margin min_i [Ric_lb(x_i) + Hess(phi)(x_i, u_i)].

    The Ricci term is the manifold's closed-form value when it has one, else
    the curvature-based lower bound.  A positive value supports exponential
    Wasserstein mixing of the Langevin dynamics toward the target; the
    estimate samples points, so it is evidence rather than a certificate.
    """
    hess = np.atleast_1d(geodesic_hessian(man, pot, points, directions, fd_step))
    return float(np.min(man.ricci_lower_bound() + hess))


# -- independent target-cloud oracles -----------------------------------------


def uniform_sphere_cloud(rng: np.random.Generator, size: int, n: int = 3) -> np.ndarray:
    """Uniform points on S^{n-1} via normalized ambient Gaussians."""
    x = rng.standard_normal((size, n))
    return x / np.linalg.norm(x, axis=-1, keepdims=True)


def vmf_mean_cosine(kappa: float) -> float:
    """E[<a, X>] = coth(kappa) - 1/kappa under vMF(a, kappa) on S^2."""
    return 1.0 / np.tanh(kappa) - 1.0 / kappa


def vmf_sphere_cloud(rng: np.random.Generator, size: int, a, kappa: float) -> np.ndarray:
    """von Mises-Fisher sample on S^2 by inverse-CDF of the <a, x> marginal.

    The marginal density of t = <a, X> is proportional to e^{kappa t} on
    [-1, 1]; the azimuth around ``a`` is uniform.
    """
    a = np.asarray(a, dtype=float)
    a = a / np.linalg.norm(a)
    if a.shape != (3,):
        raise ValueError("the vMF oracle is implemented for S^2 in R^3")
    u = rng.uniform(size=size)
    t = 1.0 + np.log(u + (1.0 - u) * np.exp(-2.0 * kappa)) / kappa
    # orthonormal completion of a
    idx = int(np.argmin(np.abs(a)))
    e1 = np.zeros(3)
    e1[idx] = 1.0
    e1 = e1 - (e1 @ a) * a
    e1 /= np.linalg.norm(e1)
    e2 = np.cross(a, e1)
    phi = rng.uniform(0.0, 2.0 * np.pi, size)
    s = np.sqrt(np.clip(1.0 - t ** 2, 0.0, None))
    return (t[:, None] * a + (s * np.cos(phi))[:, None] * e1
            + (s * np.sin(phi))[:, None] * e2)
