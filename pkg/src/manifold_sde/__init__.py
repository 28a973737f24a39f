"""Stochastic differential equations on embedded submanifolds of R^n.

Geometric Euler-Maruyama time stepping, its extrinsic Euclidean companion on
the bump-extended ambient SDE, Riemannian Langevin sampling, and a harness
for measuring strong convergence orders, one-step biases, and empirical
Wasserstein mixing.
"""

__version__ = "0.1.0"

from .geometry import (
    GeodesicConfig,
    GeometryError,
    Manifold,
    NotTangentError,
    OffManifoldError,
    ProjectionError,
    RankDeficiencyError,
    cutoff_profile,
    orthonormal_tangent_frame,
    radial_clamp,
    smooth_step,
    tangent_projection,
)
from .manifolds import (
    Graph,
    GraphSpec,
    LevelSet,
    LevelSetSpec,
    Sphere,
    flat_plane,
    make_graph,
    make_level_set,
    make_sphere,
    named_manifold,
    sphere_level_set_spec,
    torus_spec,
)
from .schemes import (
    BrownianLattice,
    DriftField,
    TrajectoryBundle,
    as_drift,
    brownian_lattice,
    em_step,
    gem_step,
    path_lattice,
    simulate_coupled,
    simulate_coupled_paths,
    simulate_gem,
    simulate_gem_paths,
    zero_drift,
)
from .rld import (
    Potential,
    SamplerConfig,
    bakry_emery_diagnostic,
    geodesic_hessian,
    linear_potential,
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
from .analysis import (
    EmpiricalMeasure,
    ErrorCurve,
    OrderFit,
    coupling_discrepancy_curve,
    fit_order,
    one_step_bias,
    pool_curves,
    strong_error_curve,
    wasserstein_bruteforce,
    wasserstein_p,
)

__all__ = [name for name in dir() if not name.startswith("_")]
