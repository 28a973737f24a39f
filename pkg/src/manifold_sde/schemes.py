"""Time-stepping engines for manifold SDEs.

Two one-step maps act on the same Brownian increment ``dW ~ N(0, h I_n)``:

* the intrinsic geometric Euler-Maruyama (GEM) step
  ``x -> exp_x(h V(x) + P(x) dW)``, whose iterates stay on the manifold, and
* the extrinsic Euclidean EM step
  ``y -> y + h U~(y) + P~(y) dW`` on the bump-extended ambient SDE with drift
  ``U~ = (V + A)~`` and diffusion ``P~``, whose iterates may drift off the
  manifold (that drift is exactly what the coupling experiments measure).

Coupling across schemes and step sizes is organized around a
:class:`BrownianLattice`: a refinable grid of ambient Gaussian increments.
Coarse increments are exact pairwise-tree sums of their fine children, so a
level-L path driven by ``lattice.coarsen(L)`` and the same path produced by
the streaming multi-level driver agree bit for bit.

Path-level parallelism: path ``i`` draws its noise from an independent
substream seeded by ``(seed, i)``, so results are identical for any worker
count and any partition of paths into batches.  Gaussian generation uses
NumPy's PCG64/ziggurat; determinism is per build of NumPy, not cross-platform
bit-exact.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .geometry import (
    GeodesicConfig,
    GeometryError,
    Manifold,
    _as_batch,
    _unbatch,
    cutoff_profile,
)


@dataclass
class DriftField:
    """A tangent drift field, optionally time dependent and with a noise gain.

    ``fn`` maps points to tangent vectors, either ``x -> V(x)`` or, when
    ``time_dependent`` is set, ``(t, x) -> V(t, x)``.  ``gain`` is the scalar
    diffusion gain ``g(t)`` multiplying the projected increment (default 1).
    ``lipschitz`` and ``bound`` are informational metadata.
    """

    fn: Callable
    time_dependent: bool = False
    gain: Optional[Callable[[float], float]] = None
    lipschitz: Optional[float] = None
    bound: Optional[float] = None

    def __call__(self, t: float, x: np.ndarray) -> np.ndarray:
        return self.fn(t, x) if self.time_dependent else self.fn(x)

    def gain_at(self, t: float) -> float:
        return 1.0 if self.gain is None else float(self.gain(t))


def as_drift(v) -> DriftField:
    """Wrap a plain callable (or None for zero drift) into a DriftField."""
    if v is None:
        return zero_drift()
    if isinstance(v, DriftField):
        return v
    return DriftField(v)


def zero_drift() -> DriftField:
    return DriftField(lambda x: np.zeros_like(x), bound=0.0, lipschitz=0.0)


@dataclass
class BrownianLattice:
    """A refinable grid of ambient Gaussian increments over [0, T].

    ``increments`` has shape (n_fine, dim) with rows ~ N(0, (T/n_fine) I).
    ``coarsen(steps)`` returns the increments of the coarser grid with the
    given step count as exact pairwise-tree sums of their fine children, so
    repeated coarsening is associative bit for bit.
    """

    seed: object
    T: float
    n_fine: int
    dim: int
    increments: np.ndarray = field(repr=False)

    def coarsen(self, steps: int) -> np.ndarray:
        ratio = _pow2_ratio(self.n_fine, steps)
        out = self.increments
        for _ in range(ratio.bit_length() - 1):
            out = out[0::2] + out[1::2]
        return out

    def total(self) -> np.ndarray:
        """The full displacement W_T (tree sum of all increments)."""
        return self.coarsen(1)[0]


def _pow2_ratio(fine: int, coarse: int) -> int:
    if coarse < 1 or fine % coarse != 0:
        raise ValueError(f"{coarse} does not divide the fine step count {fine}")
    ratio = fine // coarse
    if ratio & (ratio - 1):
        raise ValueError(f"refinement ratio {ratio} is not a power of two")
    return ratio


def brownian_lattice(seed, T: float, n_fine: int, dim: int) -> BrownianLattice:
    """Deterministic lattice of Gaussian increments from a seeded stream.

    ``seed`` may be an int or a tuple (e.g. ``(master_seed, path_index)``);
    the same seed always regenerates the identical lattice.
    """
    if T <= 0 or n_fine < 1 or dim < 1:
        raise ValueError("need T > 0, n_fine >= 1, dim >= 1")
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    inc = rng.standard_normal((n_fine, dim)) * np.sqrt(T / n_fine)
    return BrownianLattice(seed=seed, T=float(T), n_fine=int(n_fine),
                           dim=int(dim), increments=inc)


def path_lattice(master_seed: int, path_index: int, T: float, n_fine: int,
                 dim: int) -> BrownianLattice:
    """The lattice of path ``path_index`` under master seed ``master_seed``."""
    return brownian_lattice((master_seed, path_index), T, n_fine, dim)


# -- one-step maps -------------------------------------------------------------


def _gem_kernel(man: Manifold, drift: DriftField, x, h, dW, t, cfg):
    v = h * drift(t, x) + drift.gain_at(t) * man.apply_projection(x, dW)
    return man.exp(x, v, cfg)


def _em_kernel(man: Manifold, drift: DriftField, y, h, dW, t, r0):
    xp, ok = man.project_point_masked(y)
    d = np.full(y.shape[0], np.inf)
    d[ok] = np.linalg.norm(y[ok] - xp[ok], axis=-1)
    chi = cutoff_profile(d, r0 / 2.0)
    inside = chi > 0.0
    out = y.copy()
    if np.any(inside):
        xs = xp[inside]
        g = drift.gain_at(t)
        w = chi[inside, None]
        u = w * (drift(t, xs) + g * g * man.ito_drift(xs))
        pdw = w * man.apply_projection(xs, dW[inside])
        out[inside] = y[inside] + h * u + g * pdw
    return out


def gem_step(man: Manifold, drift, x, h: float, dW, t: float = 0.0,
             cfg: Optional[GeodesicConfig] = None) -> np.ndarray:
    """One geometric Euler-Maruyama step exp_x(h V(x) + g(t) P(x) dW)."""
    drift = as_drift(drift)
    xb, single = _as_batch(x)
    dWb, _ = _as_batch(dW)
    man.require_on_manifold(xb)
    return _unbatch(_gem_kernel(man, drift, xb, h, dWb, t, cfg), single)


def em_step(man: Manifold, drift, y, h: float, dW, r0: Optional[float] = None,
            t: float = 0.0) -> np.ndarray:
    """One Euclidean EM step on the bump-extended ambient SDE.

    Total on all of R^n: outside the r0/2-tube all extended coefficients
    vanish and the state is returned unchanged.  Iterates are expected to
    drift off the manifold; nothing reprojects them.
    """
    drift = as_drift(drift)
    yb, single = _as_batch(y)
    dWb, _ = _as_batch(dW)
    r0 = man.tube_radius if r0 is None else float(r0)
    return _unbatch(_em_kernel(man, drift, yb, h, dWb, t, r0), single)


# -- whole-path simulation ------------------------------------------------------


@dataclass
class TrajectoryBundle:
    """Recorded states of one or more schemes on nested time grids.

    ``gem[L]`` has shape (n_paths, K+1, n) holding the level-L GEM path at the
    recorded grid ``times[L]`` (every ``record_stride[L]``-th step of the
    level); ``em[L]`` likewise when the extrinsic scheme was run.  The finest
    level doubles as the reference solution.
    """

    T: float
    level_steps: tuple
    ref_steps: int
    seed: object
    times: dict
    gem: dict
    em: dict
    record_stride: dict

    @property
    def n_paths(self) -> int:
        return next(iter(self.gem.values())).shape[0]

    def max_membership_residual(self, man: Manifold) -> float:
        worst = 0.0
        for states in self.gem.values():
            flat = states.reshape(-1, states.shape[-1])
            worst = max(worst, float(np.max(man.membership_residual(flat))))
        return worst


def simulate_gem(man: Manifold, drift, x0, lattice: BrownianLattice, steps: int,
                 cfg: Optional[GeodesicConfig] = None) -> tuple[np.ndarray, np.ndarray]:
    """Iterate the GEM scheme along one lattice at the given step count.

    Returns ``(times, path)`` with ``path`` of shape (steps+1, n); the state
    after step k is driven by the k-th coarsened increment.
    """
    drift = as_drift(drift)
    x0 = np.asarray(x0, dtype=float)
    man.require_on_manifold(x0)
    incs = lattice.coarsen(steps)
    h = lattice.T / steps
    path = np.empty((steps + 1, man.ambient_dim))
    path[0] = x0
    x = x0[None, :]
    for k in range(steps):
        try:
            x = _gem_kernel(man, drift, x, h, incs[k][None, :], k * h, cfg)
        except GeometryError as exc:
            raise type(exc)(f"step {k}: {exc}") from exc
        path[k + 1] = x[0]
    return np.arange(steps + 1) * h, path


def simulate_coupled(man: Manifold, drift, x0, lattice: BrownianLattice,
                     levels, with_em: bool = False,
                     cfg: Optional[GeodesicConfig] = None,
                     r0: Optional[float] = None,
                     store_steps: Optional[int] = None) -> TrajectoryBundle:
    """Run GEM (and optionally EM) at several levels off one shared lattice.

    ``levels`` are step counts, each dividing the lattice's fine count by a
    power of two; the finest entry serves as the reference solution.
    """
    drift = as_drift(drift)
    x0 = np.asarray(x0, dtype=float)
    man.require_on_manifold(x0)
    levels = sorted(set(int(L) for L in levels))
    for L in levels:
        _pow2_ratio(lattice.n_fine, L)
    r0 = man.tube_radius if r0 is None else float(r0)
    ref = levels[-1]
    store = ref if store_steps is None else int(store_steps)
    times, gem, em, strides = {}, {}, {}, {}
    for L in levels:
        h = lattice.T / L
        incs = lattice.coarsen(L)
        st = max(1, L // min(L, store))
        n_rec = L // st
        xs = np.empty((1, n_rec + 1, man.ambient_dim))
        xs[:, 0] = x0
        ys = np.empty_like(xs) if with_em else None
        if with_em:
            ys[:, 0] = x0
        x = x0[None, :].copy()
        y = x0[None, :].copy()
        for k in range(L):
            dW = incs[k][None, :]
            try:
                x = _gem_kernel(man, drift, x, h, dW, k * h, cfg)
                if with_em:
                    y = _em_kernel(man, drift, y, h, dW, k * h, r0)
            except GeometryError as exc:
                raise type(exc)(f"level {L}, step {k}: {exc}") from exc
            if (k + 1) % st == 0:
                xs[:, (k + 1) // st] = x
                if with_em:
                    ys[:, (k + 1) // st] = y
        times[L] = np.arange(n_rec + 1) * (st * h)
        gem[L] = xs
        strides[L] = st
        if with_em:
            em[L] = ys
    return TrajectoryBundle(T=lattice.T, level_steps=tuple(levels), ref_steps=ref,
                            seed=lattice.seed, times=times, gem=gem, em=em,
                            record_stride=strides)


def simulate_coupled_paths(man: Manifold, drift, x0, seed: int, T: float,
                           levels, n_paths: int, with_em: bool = False,
                           cfg: Optional[GeodesicConfig] = None,
                           r0: Optional[float] = None,
                           store_steps: Optional[int] = None,
                           workers: int = 1, noise_chunk: int = 2048,
                           path_offset: int = 0) -> TrajectoryBundle:
    """Batched multi-path version of :func:`simulate_coupled`.

    Path ``i`` is driven by the lattice of substream ``(seed, i)``; the result
    is a pure function of ``(seed, configuration)`` and is identical for every
    worker count.  Noise is generated in chunks and coarse increments are
    accumulated as pairwise-tree sums, so each path agrees bit for bit with
    ``simulate_coupled(man, drift, x0, path_lattice(seed, i, ...), ...)``.
    """
    drift = as_drift(drift)
    x0 = np.asarray(x0, dtype=float)
    man.require_on_manifold(x0)
    levels = sorted(set(int(L) for L in levels))
    ref = levels[-1]
    for L in levels:
        _pow2_ratio(ref, L)
    r0 = man.tube_radius if r0 is None else float(r0)
    if store_steps is None:
        below = [L for L in levels if L < ref]
        store_steps = max(below) if below else min(ref, 512)
    if workers > 1 and n_paths > 1:
        counts = [len(c) for c in np.array_split(np.arange(n_paths), workers) if len(c)]
        offsets = np.cumsum([0] + counts[:-1])
        with ThreadPoolExecutor(max_workers=len(counts)) as pool:
            parts = list(pool.map(
                lambda oc: _coupled_chunk(man, drift, x0, seed, T, levels, oc[1],
                                          path_offset + oc[0], with_em, cfg, r0,
                                          store_steps, noise_chunk),
                zip(offsets, counts)))
        return _merge_bundles(parts)
    return _coupled_chunk(man, drift, x0, seed, T, levels, n_paths, path_offset,
                          with_em, cfg, r0, store_steps, noise_chunk)


def _coupled_chunk(man, drift, x0, seed, T, levels, n_paths, path_offset,
                   with_em, cfg, r0, store_steps, noise_chunk):
    n = man.ambient_dim
    ref = levels[-1]
    hf = T / ref
    sqrt_hf = np.sqrt(hf)
    gens = [np.random.default_rng(np.random.SeedSequence((seed, path_offset + i)))
            for i in range(n_paths)]
    depth = {L: (ref // L).bit_length() - 1 for L in levels}
    h_level = {L: T / L for L in levels}
    state_g = {L: np.tile(x0, (n_paths, 1)) for L in levels}
    state_e = {L: np.tile(x0, (n_paths, 1)) for L in levels} if with_em else {}
    kcount = {L: 0 for L in levels}
    strides, times, rec_g, rec_e = {}, {}, {}, {}
    for L in levels:
        st = max(1, L // min(L, store_steps))
        strides[L] = st
        n_rec = L // st
        times[L] = np.arange(n_rec + 1) * (st * h_level[L])
        rec_g[L] = np.empty((n_paths, n_rec + 1, n))
        rec_g[L][:, 0] = x0
        if with_em:
            rec_e[L] = np.empty((n_paths, n_rec + 1, n))
            rec_e[L][:, 0] = x0
    stack = [None] * (ref.bit_length() + 1)
    block = None
    for j in range(ref):
        bi = j % noise_chunk
        if bi == 0:
            blk = min(noise_chunk, ref - j)
            block = np.stack([g.standard_normal((blk, n)) for g in gens], axis=1)
            block *= sqrt_hf
        # pairwise-tree accumulation (binary counter): sums[d] is the tree sum
        # of the last 2^d fine increments whenever (j+1) is divisible by 2^d
        c = block[bi]
        sums = [c]
        d = 0
        while (j >> d) & 1:
            c = stack[d] + c
            d += 1
            sums.append(c)
        stack[d] = c
        for L in levels:
            dl = depth[L]
            if dl < len(sums):
                dW = sums[dl]
                k = kcount[L]
                t_k = k * h_level[L]
                try:
                    state_g[L] = _gem_kernel(man, drift, state_g[L], h_level[L],
                                             dW, t_k, cfg)
                    if with_em:
                        state_e[L] = _em_kernel(man, drift, state_e[L],
                                                h_level[L], dW, t_k, r0)
                except GeometryError as exc:
                    raise type(exc)(f"level {L}, step {k}: {exc}") from exc
                kcount[L] = k + 1
                if (k + 1) % strides[L] == 0:
                    rec_g[L][:, (k + 1) // strides[L]] = state_g[L]
                    if with_em:
                        rec_e[L][:, (k + 1) // strides[L]] = state_e[L]
    return TrajectoryBundle(T=T, level_steps=tuple(levels), ref_steps=ref,
                            seed=seed, times=times, gem=rec_g, em=rec_e,
                            record_stride=strides)


def _merge_bundles(parts: list[TrajectoryBundle]) -> TrajectoryBundle:
    head = parts[0]
    gem = {L: np.concatenate([p.gem[L] for p in parts], axis=0)
           for L in head.gem}
    em = {L: np.concatenate([p.em[L] for p in parts], axis=0)
          for L in head.em} if head.em else {}
    return TrajectoryBundle(T=head.T, level_steps=head.level_steps,
                            ref_steps=head.ref_steps, seed=head.seed,
                            times=head.times, gem=gem, em=em,
                            record_stride=head.record_stride)


def simulate_gem_paths(man: Manifold, drift, x0, seed: int, T: float, steps: int,
                       n_paths: int, cfg: Optional[GeodesicConfig] = None,
                       store_steps: Optional[int] = None, workers: int = 1) -> TrajectoryBundle:
    """Batched single-level GEM simulation (convenience wrapper)."""
    return simulate_coupled_paths(man, drift, x0, seed, T, [steps], n_paths,
                                  with_em=False, cfg=cfg,
                                  store_steps=steps if store_steps is None else store_steps,
                                  workers=workers)
