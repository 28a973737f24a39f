"""Brownian motion on manifolds via the geometric Euler-Maruyama scheme.

One lattice of ambient Gaussian increments drives every path; the GEM step
projects each increment onto the tangent space and rides the exponential map,
so iterates never leave the surface.  The figure shows a path on the sphere
and one on the torus, plus the coupling between a coarse and a fine
discretization of the *same* Brownian path.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import manifold_sde as ms

out = __file__.replace(".py", ".png")

fig = plt.figure(figsize=(12, 4))

# -- Brownian path on the sphere ------------------------------------------------
sphere = ms.Sphere(3)
lat = ms.brownian_lattice(7, 4.0, 4096, 3)
_, path = ms.simulate_gem(sphere, None, np.array([0.0, 0.0, 1.0]), lat, 4096)
print("sphere path: max |1 - |x|| =", np.abs(np.linalg.norm(path, axis=1) - 1).max())

ax = fig.add_subplot(131, projection="3d")
ax.plot(*path.T, lw=0.4)
ax.set_title("Brownian motion on $S^2$")
ax.set_box_aspect((1, 1, 1))

# -- Brownian path on the torus --------------------------------------------------
torus = ms.named_manifold("torus")
lat = ms.brownian_lattice(8, 4.0, 4096, 3)
_, tpath = ms.simulate_gem(torus, None, np.array([2.5, 0.0, 0.0]), lat, 4096)
print("torus path: max membership residual =",
      np.max(torus.membership_residual(tpath)))

ax = fig.add_subplot(132, projection="3d")
ax.plot(*tpath.T, lw=0.4)
ax.set_title("Brownian motion on the torus")
ax.set_box_aspect((2, 2, 1))

# -- coarse and fine discretizations share one driving path ---------------------
bundle = ms.simulate_coupled(sphere, None, np.array([0.0, 0.0, 1.0]),
                             ms.brownian_lattice(9, 1.0, 512, 3), [16, 512])
coarse, fine = bundle.gem[16][0], bundle.gem[512][0]
ax = fig.add_subplot(133, projection="3d")
ax.plot(*fine.T, lw=0.6, label="h = 1/512")
ax.plot(*coarse.T, "o-", lw=1.0, ms=3, label="h = 1/16 (same noise)")
ax.legend()
ax.set_title("coupled resolutions")
ax.set_box_aspect((1, 1, 1))

fig.tight_layout()
fig.savefig(out, dpi=110)
print("wrote", out)
