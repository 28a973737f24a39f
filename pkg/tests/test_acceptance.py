"""Acceptance suite: every criterion at its stated tolerance, one line each.

All runs are deterministic under the frozen seeds below, so a pass here is
reproducible bit for bit (criterion 9 checks exactly that property through
the CLI).  Criterion 1b (torus strong-convergence band) is implemented
exactly as stated and is expected to fail; see notes on the band calibration
in the companion test and the summary printed on failure.
"""

import numpy as np
import pytest

import manifold_sde as ms
from manifold_sde.cli import run as cli_run

SEED = 42
A_AXIS = np.array([0.0, 0.0, 1.0])
LEVELS = [2 ** k for k in range(4, 10)]  # h = 2^-4 .. 2^-9 at T = 1
REF_STEPS = 2 ** 15


def report(name: str, passed: bool, detail: str) -> bool:
    print(f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}")
    return passed


def vmf_drift(man, kappa=4.0):
    return ms.rld_drift_field(man, ms.linear_potential(A_AXIS, kappa))


class TestCriterion1StrongConvergence:
    def test_sphere(self):
        man = ms.Sphere(3)
        curve = ms.strong_error_curve(man, vmf_drift(man), np.array([1.0, 0.0, 0.0]),
                                      seed=SEED, levels=LEVELS, ref_steps=REF_STEPS,
                                      n_paths=512, p=2, T=1.0)
        fit = ms.fit_order(curve)
        ok = 0.40 <= fit.slope <= 0.62 and fit.r_squared >= 0.98
        assert report("criterion-1a strong convergence (sphere)", ok,
                      f"slope {fit.slope:.3f} in [0.40, 0.62], "
                      f"R^2 {fit.r_squared:.4f} >= 0.98")

    def test_torus_as_stated(self):
        # Exactly the stated configuration: torus(2, 0.5), generic exp,
        # h = 2^-4..2^-9, reference 2^-15, 512 paths, p = 2.  The measured
        # slope is ~0.33: over this h window the curvature-step product
        # kappa1 * sqrt(h) reaches 0.7 and rare pathwise decoherence events
        # around the minor circle dominate the p=2 max functional, so the
        # window is preasymptotic and the stated band cannot be met by a
        # correct implementation (see notes/decisions.md and the companion
        # test below, which shows the rate recovering inside the band on the
        # asymptotic window).
        man = ms.named_manifold("torus")
        curve = ms.strong_error_curve(man, vmf_drift(man), np.array([2.0, 0.0, 0.5]),
                                      seed=SEED, levels=LEVELS, ref_steps=REF_STEPS,
                                      n_paths=512, p=2, T=1.0)
        fit = ms.fit_order(curve)
        ok = 0.38 <= fit.slope <= 0.65
        assert report("criterion-1b strong convergence (torus, stated window)", ok,
                      f"slope {fit.slope:.3f} in [0.38, 0.65] "
                      "(known band-calibration defect at this h window; "
                      "see notes/decisions.md)")

    def test_torus_asymptotic_window_companion(self):
        # Companion evidence (not a stated criterion): on the finer window
        # h = 2^-8..2^-12 the same torus configuration shows the theoretical
        # order-1/2 rate inside the stated band.
        man = ms.named_manifold("torus")
        levels = [2 ** k for k in range(8, 13)]
        curve = ms.strong_error_curve(man, vmf_drift(man), np.array([2.0, 0.0, 0.5]),
                                      seed=SEED, levels=levels, ref_steps=2 ** 16,
                                      n_paths=256, p=2, T=1.0)
        fit = ms.fit_order(curve)
        ok = 0.38 <= fit.slope <= 0.65
        assert report("criterion-1b' torus companion (asymptotic window)", ok,
                      f"slope {fit.slope:.3f} in [0.38, 0.65] on h = 2^-8..2^-12")


class TestCriterion2CouplingRate:
    def test_sphere_both_moments(self):
        man = ms.Sphere(3)
        x0 = np.array([1.0, 0.0, 0.0])
        slopes = {}
        for p in (1, 2):
            curve = ms.coupling_discrepancy_curve(man, vmf_drift(man), x0,
                                                  seed=SEED, levels=LEVELS,
                                                  n_paths=512, p=p, T=1.0)
            slopes[p] = ms.fit_order(curve).slope
        in_band = all(0.40 <= s <= 0.65 for s in slopes.values())
        agree = abs(slopes[1] - slopes[2]) <= 0.1
        assert report("criterion-2 GEM-EM coupling rate (sphere)",
                      in_band and agree,
                      f"slopes p1 {slopes[1]:.3f}, p2 {slopes[2]:.3f} in "
                      f"[0.40, 0.65], spread {abs(slopes[1] - slopes[2]):.3f} <= 0.1")


class TestCriterion3OneStepBias:
    def test_bias_and_centered_slopes(self):
        # 5 random sphere points, zero drift (the scheme comparison itself),
        # n = 1e5 shared draws per h; the per-point bias curves are averaged
        # before fitting since each sits close to its Monte Carlo floor.
        man = ms.Sphere(3)
        points = man.sample(np.random.default_rng((SEED, 1)), 5)
        h_list = [2.0 ** -k for k in range(4, 10)]
        mean_curves, cent_curves = [], []
        for i, x in enumerate(points):
            m, c = ms.one_step_bias(man, None, x, h_list, n_samples=100_000,
                                    seed=(SEED, 2, i))
            mean_curves.append(m)
            cent_curves.append(c)
        bias_slope = ms.fit_order(ms.pool_curves(mean_curves)).slope
        cent_slope = ms.fit_order(ms.pool_curves(cent_curves)).slope
        ok = 1.3 <= bias_slope <= 1.7 and 1.8 <= cent_slope <= 2.2
        assert report("criterion-3 one-step bias rates", ok,
                      f"mean-bias slope {bias_slope:.3f} in [1.3, 1.7], "
                      f"centered slope {cent_slope:.3f} in [1.8, 2.2]")


class TestCriterion4ItoIdentity:
    @pytest.mark.parametrize("name,sampler", [
        ("sphere", lambda rng: ms.Sphere(3).sample(rng, 10)),
        ("torus", lambda rng: ms.named_manifold("torus").sample(rng, 10)),
        ("graph-paraboloid", lambda rng: ms.named_manifold(
            "graph-paraboloid").sample(rng, 10)),
    ])
    def test_monte_carlo_matches_ito_drift(self, name, sampler):
        man = ms.named_manifold(name) if name != "sphere" else ms.Sphere(3)
        rng = np.random.default_rng((SEED, 3))
        points = sampler(np.random.default_rng((SEED, 4)))
        n = 100_000
        worst = 0.0
        for x in points:
            xi = rng.standard_normal((n, man.ambient_dim))
            xs = np.broadcast_to(x, (n, man.ambient_dim)).copy()
            pu = man.apply_projection(xs, xi)
            vals = 0.5 * man.second_fundamental_form(xs, pu, pu)
            err = np.linalg.norm(man.ito_drift(x) - vals.mean(axis=0))
            se = np.sqrt(vals.var(axis=0).sum() / n)
            worst = max(worst, err / (3.0 * se))
        assert report(f"criterion-4 Ito-correction identity ({name})", worst <= 1.0,
                      f"max |A - MC| / (3 SE) = {worst:.3f} <= 1 over 10 points")


class TestCriterion5GeometryOracles:
    def test_projector_properties(self):
        worst_sym = worst_idem = worst_tr = 0.0
        for name in ("sphere", "torus", "graph-paraboloid"):
            man = ms.named_manifold(name)
            x = man.sample(np.random.default_rng((SEED, 5)), 25)
            P = man.projection(x)
            worst_sym = max(worst_sym, np.abs(P - np.swapaxes(P, 1, 2)).max())
            worst_idem = max(worst_idem,
                             np.abs(np.einsum("bij,bjk->bik", P, P) - P).max())
            worst_tr = max(worst_tr, np.abs(np.einsum("bii->b", P) - man.dim).max())
        ok = worst_sym <= 1e-10 and worst_idem <= 1e-8 and worst_tr <= 1e-8
        assert report("criterion-5a projector symmetric/idempotent/trace", ok,
                      f"sym {worst_sym:.2e}, idem {worst_idem:.2e}, "
                      f"trace {worst_tr:.2e}")

    def test_second_fundamental_form_properties(self):
        worst_norm = worst_sym = worst_lin = 0.0
        for name in ("sphere", "torus", "graph-paraboloid"):
            man = ms.named_manifold(name)
            rng = np.random.default_rng((SEED, 6))
            x = man.sample(rng, 15)
            u = man.apply_projection(x, rng.standard_normal(x.shape))
            v = man.apply_projection(x, rng.standard_normal(x.shape))
            scale = np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1)
            ii = man.second_fundamental_form(x, u, v)
            worst_norm = max(worst_norm, (np.linalg.norm(
                man.apply_projection(x, ii), axis=-1) / scale).max())
            worst_sym = max(worst_sym, (np.linalg.norm(
                ii - man.second_fundamental_form(x, v, u), axis=-1) / scale).max())
            worst_lin = max(worst_lin, (np.linalg.norm(
                man.second_fundamental_form(x, 2.0 * u, v) - 2.0 * ii,
                axis=-1) / scale).max())
        ok = worst_norm <= 1e-6 and worst_sym <= 1e-8 and worst_lin <= 1e-6
        assert report("criterion-5b II normal/symmetric/bilinear", ok,
                      f"normality {worst_norm:.2e}, symmetry {worst_sym:.2e}, "
                      f"linearity {worst_lin:.2e}")

    def test_level_set_ii_formula_vs_finite_differences(self):
        man = ms.named_manifold("torus")
        rng = np.random.default_rng((SEED, 7))
        x = man.sample(rng, 20)
        u = man.apply_projection(x, rng.standard_normal(x.shape))
        v = man.apply_projection(x, rng.standard_normal(x.shape))
        closed = man.second_fundamental_form(x, u, v)
        fd = ms.Manifold._ii(man, x, u, v)  # generic fallback on the same object
        rel = (np.linalg.norm(closed - fd, axis=-1)
               / np.maximum(1.0, np.linalg.norm(closed, axis=-1))).max()
        assert report("criterion-5c level-set II vs finite differences",
                      rel <= 1e-5, f"max relative gap {rel:.2e} <= 1e-5")

    def test_sphere_taylor_remainder(self):
        man = ms.Sphere(3)
        rng = np.random.default_rng((SEED, 8))
        x = man.sample(rng, 1000)
        v = man.apply_projection(x, rng.standard_normal(x.shape))
        v *= (rng.uniform(0.02, 0.5, (len(x), 1))
              / np.linalg.norm(v, axis=-1, keepdims=True))
        ii = man.second_fundamental_form(x, v, v)
        remainder = np.linalg.norm(man.exp(x, v) - (x + v + 0.5 * ii), axis=-1)
        bound = (man.kappa1 ** 2 + man.kappa2) / 6.0 * np.linalg.norm(v, axis=-1) ** 3
        ratio = np.max(remainder / (bound * (1.0 + 1e-3)))
        assert report("criterion-5d exponential-map Taylor remainder",
                      ratio <= 1.0, f"max remainder/bound = {ratio:.4f} <= 1 "
                      "over 1000 draws, |v| <= 0.5")

    def test_shape_operator_projection_identity(self):
        worst = 0.0
        for name in ("sphere", "torus"):
            man = ms.named_manifold(name)
            rng = np.random.default_rng((SEED, 9))
            for x in man.sample(rng, 5):
                xi = rng.standard_normal(man.ambient_dim)
                xi -= man.apply_projection(x, xi)
                xi *= 0.1 * man.tube_radius / np.linalg.norm(xi)
                S = man.shape_operator(x, xi)
                h = 1e-6
                J = np.empty((man.ambient_dim, man.ambient_dim))
                for j in range(man.ambient_dim):
                    e = np.zeros(man.ambient_dim)
                    e[j] = h
                    J[:, j] = (man.project_point(x + xi + e)
                               - man.project_point(x + xi - e)) / (2 * h)
                worst = max(worst, np.linalg.norm(
                    (np.eye(man.ambient_dim) - S) @ J - man.projection(x)))
        assert report("criterion-5e shape-operator projection identity",
                      worst <= 1e-4, f"max |(I - S) Dpi - P| = {worst:.2e} <= 1e-4")


class TestCriterion6RldStationarity:
    def test_vmf_target_first_moment(self):
        man = ms.Sphere(3)
        pot = ms.linear_potential(A_AXIS, 4.0)
        cfg = ms.SamplerConfig(T=8.0, h=2.0 ** -7, n_paths=4096, seed=SEED)
        cloud = ms.sample_rld(man, pot, np.array([1.0, 0.0, 0.0]), cfg)
        moment = float((cloud.points @ A_AXIS).mean())
        oracle = ms.vmf_mean_cosine(4.0)
        err = abs(moment - oracle)
        assert report("criterion-6a vMF stationarity", err <= 0.02,
                      f"|mean<a,X> - {oracle:.6f}| = {err:.4f} <= 0.02")

    def test_uniform_target_mean_vector(self):
        man = ms.Sphere(3)
        cfg = ms.SamplerConfig(T=8.0, h=2.0 ** -7, n_paths=4096, seed=SEED + 1)
        cloud = ms.sample_rld(man, ms.zero_potential(),
                              np.array([1.0, 0.0, 0.0]), cfg)
        norm = float(np.linalg.norm(cloud.points.mean(axis=0)))
        assert report("criterion-6b uniform stationarity", norm <= 0.05,
                      f"|sample mean| = {norm:.4f} <= 0.05")


class TestCriterion7MixingShape:
    def test_wasserstein_decay_to_target(self):
        man = ms.Sphere(3)
        pot = ms.linear_potential(A_AXIS, 4.0)
        cfg = ms.SamplerConfig(T=8.0, h=2.0 ** -7, n_paths=512, seed=SEED)
        x0 = np.array([0.0, 0.0, -1.0])  # antipode of the vMF mode
        _, clouds = ms.sample_rld(man, pot, x0, cfg, checkpoints=[1, 2, 4, 8])
        rng = np.random.default_rng((SEED, 10))
        reps = 8
        targets = [ms.EmpiricalMeasure(ms.vmf_sphere_cloud(rng, 512, A_AXIS, 4.0))
                   for _ in range(2 * reps)]
        est, se = {}, {}
        for t in (1, 2, 4, 8):
            vals = [ms.wasserstein_p(clouds[float(t)], targets[i], p=2,
                                     metric="spherical") for i in range(reps)]
            est[t] = np.mean(vals)
            se[t] = np.std(vals, ddof=1) / np.sqrt(reps)
        base = np.mean([ms.wasserstein_p(targets[i], targets[reps + i], p=2,
                                         metric="spherical") for i in range(reps)])
        ts = [1, 2, 4, 8]
        mono = all(est[b] <= est[a] + 2.0 * np.hypot(se[a], se[b])
                   for a, b in zip(ts, ts[1:]))
        near = est[8] <= 2.0 * base
        assert report("criterion-7 Wasserstein mixing shape", mono and near,
                      "W2 " + " -> ".join(f"{est[t]:.3f}" for t in ts)
                      + f", nonincreasing within 2 SE, final <= 2 x baseline "
                        f"{base:.3f}")


class TestCriterion8AssignmentExactness:
    def test_matches_brute_force_on_50_instances(self):
        rng = np.random.default_rng((SEED, 11))
        exact = 0
        for _ in range(50):
            mu = ms.EmpiricalMeasure(rng.standard_normal((8, 3)))
            nu = ms.EmpiricalMeasure(rng.standard_normal((8, 3)))
            p = int(rng.integers(1, 3))
            a = ms.wasserstein_p(mu, nu, p=p)
            b = ms.wasserstein_bruteforce(mu, nu, p=p)
            exact += (abs(a - b) < 1e-12)
        assert report("criterion-8 Wasserstein solver exactness", exact == 50,
                      f"{exact}/50 instances match 8! brute force exactly")


class TestCriterion9Determinism:
    def test_cli_byte_identical_across_worker_counts(self, tmp_path):
        overrides = ["levels=16,32,64,128", "ref_steps=1024", "n_paths=96"]
        outs = []
        for tag, workers in (("w1", 1), ("w4", 4), ("w1-again", 1)):
            out = tmp_path / tag
            code = cli_run("convergence", overrides=overrides, seed=SEED,
                           workers=workers, out=out)
            assert code == 0
            outs.append((out / "results.csv").read_bytes())
        ok = outs[0] == outs[1] == outs[2]
        assert report("criterion-9 determinism across runs and workers", ok,
                      f"{len(outs)} runs produced byte-identical CSV "
                      f"({len(outs[0])} bytes)")
