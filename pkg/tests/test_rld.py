"""Langevin sampler, potentials, and the Bakry-Emery diagnostic."""

import numpy as np
import pytest

from manifold_sde import (
    Potential,
    SamplerConfig,
    Sphere,
    bakry_emery_diagnostic,
    flat_plane,
    gem_step,
    geodesic_hessian,
    linear_potential,
    path_lattice,
    potential_by_name,
    quadratic_potential,
    rld_drift,
    rld_drift_field,
    sample_rld,
    uniform_sphere_cloud,
    vmf_mean_cosine,
    vmf_sphere_cloud,
    zero_potential,
)

S2 = Sphere(3)
A_AXIS = np.array([0.0, 0.0, 1.0])


class TestDrift:
    def test_constant_potential_gives_zero(self):
        x = S2.sample(np.random.default_rng(0), 5)
        pot = Potential(phi=lambda y: np.full(y.shape[0], 3.7))
        assert np.allclose(rld_drift(S2, pot, x), 0.0, atol=1e-9)

    def test_linear_potential_hand_value(self):
        pot = linear_potential(A_AXIS, 4.0)
        out = rld_drift(S2, pot, np.array([1.0, 0.0, 0.0]))
        assert np.allclose(out, np.array([0.0, 0.0, 2.0]))

    def test_drift_is_tangent(self):
        rng = np.random.default_rng(1)
        x = S2.sample(rng, 20)
        pot = quadratic_potential(np.diag([1.0, 2.0, 3.0]))
        d = rld_drift(S2, pot, x)
        assert np.max(np.linalg.norm(S2.apply_projection(x, d) - d, axis=-1)) < 1e-10

    def test_fd_gradient_fallback_matches_analytic(self):
        analytic = quadratic_potential(np.diag([1.0, 2.0, 3.0]))
        fd = Potential(phi=analytic.phi)  # no gradient callback
        rng = np.random.default_rng(2)
        x = S2.sample(rng, 10)
        g1 = S2.apply_projection(x, analytic.ambient_gradient(x))
        g2 = S2.apply_projection(x, fd.ambient_gradient(x))
        scale = np.maximum(1.0, np.linalg.norm(g1, axis=-1, keepdims=True))
        assert np.max(np.linalg.norm(g1 - g2, axis=-1, keepdims=True) / scale) < 1e-5

    def test_projected_gradient_matches_directional_differences(self):
        pot = quadratic_potential(np.diag([1.0, 2.0, 3.0]))
        rng = np.random.default_rng(3)
        x = S2.sample(rng, 10)
        u = S2.apply_projection(x, rng.standard_normal(x.shape))
        u /= np.linalg.norm(u, axis=-1, keepdims=True)
        grad = S2.apply_projection(x, pot.ambient_gradient(x))
        t = 1e-5
        fd = (pot.value(S2.exp(x, t * u)) - pot.value(S2.exp(x, -t * u))) / (2 * t)
        assert np.max(np.abs((grad * u).sum(-1) - fd)
                      / np.maximum(1.0, np.abs(fd))) < 1e-5


class TestBuiltinPotentials:
    def test_by_name(self):
        assert potential_by_name("zero").name == "zero"
        vmf = potential_by_name("linear", a=(0, 0, 1), kappa=4.0)
        assert vmf.value(np.array([0.0, 0.0, 1.0])) == pytest.approx(-4.0)
        quad = potential_by_name("quadratic", Q=np.eye(3))
        assert quad.value(np.array([1.0, 1.0, 1.0])) == pytest.approx(1.5)

    def test_unknown_name_and_leftover_params(self):
        with pytest.raises(KeyError):
            potential_by_name("cubic")
        with pytest.raises(KeyError, match="unused"):
            potential_by_name("zero", kappa=1.0)


class TestSamplerConfig:
    def test_validation(self):
        with pytest.raises(ValueError):
            SamplerConfig(T=1.0, h=2.0, n_paths=8)
        with pytest.raises(ValueError):
            SamplerConfig(T=1.0, h=0.25, n_paths=0)
        with pytest.raises(ValueError):
            SamplerConfig(T=1.0, h=0.3, n_paths=8)  # not an integer step count
        assert SamplerConfig(T=1.0, h=0.25, n_paths=8).steps == 4


class TestSampler:
    def test_single_step_single_path_reproduces_gem_step(self):
        pot = linear_potential(A_AXIS, 4.0)
        cfg = SamplerConfig(T=0.125, h=0.125, n_paths=1, seed=77)
        x0 = np.array([1.0, 0.0, 0.0])
        cloud = sample_rld(S2, pot, x0, cfg)
        lat = path_lattice(77, 0, 0.125, 1, 3)
        drift = rld_drift_field(S2, pot)
        direct = gem_step(S2, drift, x0, 0.125, lat.increments[0])
        assert np.array_equal(cloud.points[0], direct)

    def test_uniform_target_mean_near_zero(self):
        cfg = SamplerConfig(T=4.0, h=2.0 ** -5, n_paths=1024, seed=3)
        cloud = sample_rld(S2, zero_potential(), np.array([1.0, 0.0, 0.0]), cfg)
        assert np.linalg.norm(cloud.points.mean(axis=0)) < 0.08
        assert np.max(S2.membership_residual(cloud.points)) < 1e-10

    def test_uniform_target_moments_at_4096_paths(self):
        # first moments -> 0 and second-moment matrix -> I/3 within 3 SE
        n = 4096
        cfg = SamplerConfig(T=6.0, h=2.0 ** -5, n_paths=n, seed=12)
        cloud = sample_rld(S2, zero_potential(), np.array([1.0, 0.0, 0.0]), cfg)
        pts = cloud.points
        se1 = np.sqrt(1.0 / 3.0 / n)
        assert np.max(np.abs(pts.mean(axis=0))) <= 3.0 * se1
        second = pts.T @ pts / n
        se2 = np.sqrt((1.0 / 5.0 - 1.0 / 9.0) / n)
        assert np.max(np.abs(second - np.eye(3) / 3.0)) <= 3.0 * se2
        cloud.validate_on(S2)

    def test_checkpoints_are_snapshots(self):
        pot = linear_potential(A_AXIS, 4.0)
        cfg = SamplerConfig(T=2.0, h=0.25, n_paths=16, seed=9)
        terminal, clouds = sample_rld(S2, pot, np.array([1.0, 0.0, 0.0]), cfg,
                                      checkpoints=[1.0, 2.0])
        assert set(clouds) == {1.0, 2.0}
        assert np.array_equal(clouds[2.0].points, terminal.points)
        assert len(clouds[1.0]) == 16

    def test_checkpoint_off_grid_rejected(self):
        pot = zero_potential()
        cfg = SamplerConfig(T=2.0, h=0.25, n_paths=4, seed=9)
        with pytest.raises(ValueError):
            sample_rld(S2, pot, np.array([1.0, 0.0, 0.0]), cfg, checkpoints=[0.3])


class TestTargetOracles:
    def test_vmf_mean_cosine_value(self):
        # oracle from 1-D quadrature of t e^{kt} / integral over [-1, 1]
        from scipy.integrate import quad
        k = 4.0
        num = quad(lambda t: t * np.exp(k * t), -1, 1)[0]
        den = quad(lambda t: np.exp(k * t), -1, 1)[0]
        assert vmf_mean_cosine(k) == pytest.approx(num / den, abs=1e-12)

    def test_vmf_cloud_matches_oracle_moment(self):
        rng = np.random.default_rng(4)
        cloud = vmf_sphere_cloud(rng, 200_000, A_AXIS, 4.0)
        vals = cloud @ A_AXIS
        se = vals.std(ddof=1) / np.sqrt(len(vals))
        assert abs(vals.mean() - vmf_mean_cosine(4.0)) <= 3.5 * se
        assert np.max(np.abs(np.linalg.norm(cloud, axis=-1) - 1.0)) < 1e-12

    def test_uniform_cloud_moments(self):
        rng = np.random.default_rng(5)
        cloud = uniform_sphere_cloud(rng, 100_000)
        assert np.linalg.norm(cloud.mean(axis=0)) < 0.01
        second = cloud.T @ cloud / len(cloud)
        assert np.max(np.abs(second - np.eye(3) / 3.0)) < 0.01


class TestBakryEmery:
    def test_sphere_flat_potential_gives_ricci(self):
        rng = np.random.default_rng(6)
        x = S2.sample(rng, 32)
        u = rng.standard_normal(x.shape)
        lam = bakry_emery_diagnostic(S2, zero_potential(), x, u)
        assert lam == pytest.approx(1.0, abs=1e-9)  # Ric = (m-1) g with m = 2

    def test_linear_hessian_matches_analytic(self):
        # Hess(phi)(u, u) = kappa <a, x> for phi = -kappa <a, x> on the sphere
        pot = linear_potential(A_AXIS, 4.0)
        rng = np.random.default_rng(7)
        x = S2.sample(rng, 24)
        u = rng.standard_normal(x.shape)
        hess = geodesic_hessian(S2, pot, x, u)
        assert np.max(np.abs(hess - 4.0 * (x @ A_AXIS))) < 1e-4

    def test_convex_potential_adds_nonnegative_amount(self):
        man = flat_plane()
        rng = np.random.default_rng(8)
        x = man.sample(rng, 16)
        u = rng.standard_normal(x.shape)
        base = bakry_emery_diagnostic(man, zero_potential(), x, u)
        quad = bakry_emery_diagnostic(man, quadratic_potential(np.eye(3)), x, u)
        assert quad >= base - 1e-6

    def test_zero_direction_rejected(self):
        x = np.array([[0.0, 0.0, 1.0]])
        with pytest.raises(ValueError):
            bakry_emery_diagnostic(S2, zero_potential(), x, np.array([[0.0, 0.0, 1.0]]))
