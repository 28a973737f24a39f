"""Wasserstein mixing of Langevin dynamics toward its target law.

Paths start at the antipode of the vMF mode; snapshots of the cloud at
t = 1, 2, 4, 8 are compared against independently drawn target clouds with
the exact assignment-based empirical W2 under the great-circle metric.  The
distance decays toward the target-vs-target baseline, the finite-sample
floor of the empirical distance itself.
"""

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

import manifold_sde as ms

sphere = ms.Sphere(3)
a = np.array([0.0, 0.0, 1.0])
pot = ms.linear_potential(a, 4.0)
cfg = ms.SamplerConfig(T=8.0, h=2.0 ** -7, n_paths=512, seed=0)
checkpoints = [1, 2, 4, 8]
_, clouds = ms.sample_rld(sphere, pot, np.array([0.0, 0.0, -1.0]), cfg,
                          checkpoints=checkpoints)

rng = np.random.default_rng(5)
reps = 8
targets = [ms.EmpiricalMeasure(ms.vmf_sphere_cloud(rng, 512, a, 4.0))
           for _ in range(2 * reps)]

w2, se = [], []
for t in checkpoints:
    vals = [ms.wasserstein_p(clouds[float(t)], targets[i], p=2,
                             metric="spherical") for i in range(reps)]
    w2.append(np.mean(vals))
    se.append(np.std(vals, ddof=1) / np.sqrt(reps))
baseline = np.mean([ms.wasserstein_p(targets[i], targets[reps + i], p=2,
                                     metric="spherical") for i in range(reps)])

print("t    W2(cloud_t, target)")
for t, v, s in zip(checkpoints, w2, se):
    print(f"{t:<4} {v:.4f} +- {s:.4f}")
print(f"target-vs-target baseline: {baseline:.4f}")

fig, ax = plt.subplots(figsize=(5, 4))
ax.errorbar(checkpoints, w2, yerr=se, marker="o", label=r"$W_2$ to target")
ax.axhline(baseline, ls="--", c="k", label="finite-sample baseline")
ax.set_xlabel("time t")
ax.set_ylabel(r"$W_2$")
ax.set_title("mixing of Langevin dynamics (vMF target)")
ax.legend()
fig.tight_layout()
out = __file__.replace(".py", ".png")
fig.savefig(out, dpi=110)
print("wrote", out)
