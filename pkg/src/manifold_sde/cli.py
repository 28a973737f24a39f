"""Batch experiment runner.

Subcommands: ``geometry-check``, ``convergence``, ``coupling``,
``one-step-bias``, ``rld-sample``, ``rld-mixing``, ``selftest``.  Every run
reads a flat ``key=value`` config (dotted sections, ``#`` comments), applies
``--set`` overrides, executes the experiment, and writes ``results.csv`` plus
``manifest.json`` into the output directory.  Unknown config keys are
rejected.  Exit codes: 0 success, 1 runtime error, 2 config error, 3 an
acceptance check failed while ``--check`` was set.

The results CSV has the fixed header ``kind,p,h,error,stderr,n_paths`` with
floats at 17 significant digits and LF line endings; given the same seed and
config it is byte-identical for any worker count.  For check-style rows the
``error`` column holds the measured value and ``stderr`` the tolerance.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .analysis import (
    EmpiricalMeasure,
    ErrorCurve,
    fit_order,
    one_step_bias,
    pool_curves,
    coupling_discrepancy_curve,
    strong_error_curve,
    wasserstein_p,
)
from .geometry import GeometryError, orthonormal_tangent_frame
from .manifolds import Graph, LevelSet, Sphere, named_manifold
from .rld import (
    Potential,
    SamplerConfig,
    potential_by_name,
    rld_drift_field,
    sample_rld,
    uniform_sphere_cloud,
    vmf_mean_cosine,
    vmf_sphere_cloud,
)
from .schemes import zero_drift

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_CONFIG = 2
EXIT_CHECK = 3

EXPERIMENTS = ("geometry-check", "convergence", "coupling", "one-step-bias",
               "rld-sample", "rld-mixing", "selftest")


class ConfigError(Exception):
    """Bad configuration: missing, malformed, or unknown keys."""


# -- config ---------------------------------------------------------------------

_COMMON_KEYS = {"experiment", "seed", "workers", "out"}
_MANIFOLD_KEYS = {"manifold.name", "manifold.n", "manifold.R", "manifold.r",
                  "manifold.a"}
_POTENTIAL_KEYS = {"potential.name", "potential.kappa", "potential.axis",
                   "potential.diag"}

SCHEMA = {
    "convergence": _MANIFOLD_KEYS | _POTENTIAL_KEYS | {
        "T", "levels", "ref_steps", "n_paths", "p", "synthetic.slope",
        "check.slope_min", "check.slope_max", "check.r2_min"},
    "coupling": _MANIFOLD_KEYS | _POTENTIAL_KEYS | {
        "T", "levels", "n_paths", "p",
        "check.slope_min", "check.slope_max", "check.agree"},
    "one-step-bias": _MANIFOLD_KEYS | _POTENTIAL_KEYS | {
        "h_list", "n_samples", "n_points",
        "check.bias_min", "check.bias_max", "check.centered_min",
        "check.centered_max"},
    "rld-sample": _MANIFOLD_KEYS | _POTENTIAL_KEYS | {
        "T", "h", "n_paths", "check.moment_tol", "check.mean_norm_tol"},
    "rld-mixing": _MANIFOLD_KEYS | _POTENTIAL_KEYS | {
        "T", "h", "n_paths", "checkpoints", "target_reps"},
    "geometry-check": _MANIFOLD_KEYS | {"n_points", "n_mc"},
    "selftest": set(),
}

DEFAULTS = {
    "convergence": {
        "manifold.name": "sphere", "potential.name": "linear",
        "potential.kappa": "4", "potential.axis": "0,0,1",
        "T": "1.0", "levels": "16,32,64,128,256,512", "ref_steps": "32768",
        "n_paths": "512", "p": "2"},
    "coupling": {
        "manifold.name": "sphere", "potential.name": "linear",
        "potential.kappa": "4", "potential.axis": "0,0,1",
        "T": "1.0", "levels": "16,32,64,128,256,512", "n_paths": "512",
        "p": "1,2"},
    "one-step-bias": {
        "manifold.name": "sphere", "potential.name": "zero",
        "h_list": "0.0625,0.03125,0.015625,0.0078125,0.00390625,0.001953125",
        "n_samples": "100000", "n_points": "5"},
    "rld-sample": {
        "manifold.name": "sphere", "potential.name": "linear",
        "potential.kappa": "4", "potential.axis": "0,0,1",
        "T": "8.0", "h": "0.0078125", "n_paths": "4096"},
    "rld-mixing": {
        "manifold.name": "sphere", "potential.name": "linear",
        "potential.kappa": "4", "potential.axis": "0,0,1",
        "T": "8.0", "h": "0.0078125", "n_paths": "512",
        "checkpoints": "1,2,4,8", "target_reps": "8"},
    "geometry-check": {
        "manifold.name": "sphere", "n_points": "10", "n_mc": "20000"},
    "selftest": {},
}


def parse_config_text(text: str) -> dict:
    """Parse flat key=value lines; '#' starts a comment, blanks are skipped."""
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw!r}")
        key, value = line.split("=", 1)
        key = key.strip()
        if not key:
            raise ConfigError(f"line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        out[key] = value.strip()
    return out


def load_config(path) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text)


def _coerce(cfg: dict, key: str, conv, default=None):
    if key not in cfg:
        if default is None:
            raise ConfigError(f"missing required key {key!r}")
        return conv(default) if isinstance(default, str) else default
    try:
        return conv(cfg[key])
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for key {key!r}: {cfg[key]!r} ({exc})") from exc


def _floats(s: str):
    return [float(v) for v in s.split(",") if v.strip()]


def _ints(s: str):
    return [int(v) for v in s.split(",") if v.strip()]


def validate_keys(cfg: dict, experiment: str):
    allowed = SCHEMA[experiment] | _COMMON_KEYS
    unknown = sorted(set(cfg) - allowed)
    if unknown:
        raise ConfigError(
            f"unknown key {unknown[0]!r} for experiment {experiment!r} "
            f"(unknown keys: {unknown})")


def build_manifold(cfg: dict):
    name = cfg.get("manifold.name", "sphere")
    params = {}
    for key, label in (("manifold.n", "n"), ("manifold.R", "R"),
                       ("manifold.r", "r"), ("manifold.a", "a")):
        if key in cfg:
            conv = int if label == "n" else float
            params[label] = _coerce(cfg, key, conv)
    try:
        return named_manifold(name, **params)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def build_potential(cfg: dict) -> Potential:
    name = cfg.get("potential.name", "zero")
    params = {}
    if "potential.kappa" in cfg:
        params["kappa"] = _coerce(cfg, "potential.kappa", float)
    if "potential.axis" in cfg:
        params["a"] = _coerce(cfg, "potential.axis", _floats)
    if "potential.diag" in cfg:
        params["Q"] = np.diag(_coerce(cfg, "potential.diag", _floats))
    try:
        return potential_by_name(name, **params)
    except KeyError as exc:
        raise ConfigError(str(exc)) from exc


def default_start(man) -> np.ndarray:
    """A deterministic on-manifold start point for each built-in family."""
    if isinstance(man, Sphere):
        x = np.zeros(man.ambient_dim)
        x[-1] = 1.0
        return x
    if isinstance(man, Graph):
        return man.lift(np.zeros(man.spec.m))
    if isinstance(man, LevelSet):
        if man.spec.anchor is not None:
            return np.asarray(man.spec.anchor, dtype=float)
        return man.sample(np.random.default_rng(0), 1)[0]
    return man.sample(np.random.default_rng(0), 1)[0]


# -- CSV ------------------------------------------------------------------------

CSV_HEADER = "kind,p,h,error,stderr,n_paths"


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def curve_rows(curve: ErrorCurve):
    return [(curve.kind, int(curve.p), h, e, s, int(n))
            for h, e, s, n in zip(curve.h, curve.error, curve.stderr, curve.n_paths)]


def emit_curve_csv(curves, path):
    """Write curve rows (one per level) with a fixed header and LF endings.

    ``curves`` may be a single ErrorCurve, a list of curves, or raw
    ``(kind, p, h, error, stderr, n_paths)`` tuples.
    """
    if isinstance(curves, ErrorCurve):
        curves = [curves]
    rows = []
    for c in curves:
        rows.extend(curve_rows(c) if isinstance(c, ErrorCurve) else [c])
    lines = [CSV_HEADER]
    for kind, p, h, err, se, n in rows:
        lines.append(f"{kind},{int(p)},{_fmt(h)},{_fmt(err)},{_fmt(se)},{int(n)}")
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write("\n".join(lines) + "\n")
    return path


def read_curve_csv(path):
    """Parse a results CSV back into row tuples (exact float round trip)."""
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != CSV_HEADER:
        raise ValueError(f"{path}: missing curve header")
    rows = []
    for line in lines[1:]:
        kind, p, h, err, se, n = line.split(",")
        rows.append((kind, int(p), float(h), float(err), float(se), int(n)))
    return rows


# -- checks ---------------------------------------------------------------------

class Check:
    def __init__(self, name: str, passed: bool, detail: str):
        self.name = name
        self.passed = bool(passed)
        self.detail = detail

    def as_dict(self):
        return {"name": self.name, "passed": self.passed, "detail": self.detail}


def _band_check(name, value, lo, hi):
    return Check(name, lo <= value <= hi, f"{value:.4g} in [{lo:g}, {hi:g}]")


# -- experiment runners -----------------------------------------------------------


def run_convergence(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    levels = _coerce(cfg, "levels", _ints)
    T = _coerce(cfg, "T", float)
    p = _coerce(cfg, "p", int)
    is_sphere = isinstance(man, Sphere)
    lo = _coerce(cfg, "check.slope_min", float, "0.40" if is_sphere else "0.38")
    hi = _coerce(cfg, "check.slope_max", float, "0.62" if is_sphere else "0.65")
    r2_min = _coerce(cfg, "check.r2_min", float, "0.98" if is_sphere else "0.0")
    if "synthetic.slope" in cfg:
        gamma = _coerce(cfg, "synthetic.slope", float)
        h = np.array(sorted((T / L for L in levels), reverse=True))
        curve = ErrorCurve(kind="strong-vs-reference", p=p, h=h, error=h ** gamma,
                           stderr=np.zeros_like(h), n_paths=[32] * len(h))
    else:
        pot = build_potential(cfg)
        drift = rld_drift_field(man, pot)
        curve = strong_error_curve(
            man, drift, default_start(man), seed, levels,
            _coerce(cfg, "ref_steps", int), _coerce(cfg, "n_paths", int),
            p=p, T=T, workers=workers)
    fit = fit_order(curve)
    checks = [_band_check("strong-slope", fit.slope, lo, hi),
              Check("strong-r2", fit.r_squared >= r2_min,
                    f"{fit.r_squared:.4f} >= {r2_min:g}")]
    return [curve], checks


def run_coupling(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    pot = build_potential(cfg)
    drift = rld_drift_field(man, pot)
    levels = _coerce(cfg, "levels", _ints)
    T = _coerce(cfg, "T", float)
    ps = _coerce(cfg, "p", _ints)
    lo = _coerce(cfg, "check.slope_min", float, "0.40")
    hi = _coerce(cfg, "check.slope_max", float, "0.65")
    agree = _coerce(cfg, "check.agree", float, "0.1")
    curves, slopes, checks = [], {}, []
    for p in ps:
        curve = coupling_discrepancy_curve(
            man, drift, default_start(man), seed, levels,
            _coerce(cfg, "n_paths", int), p=p, T=T, workers=workers)
        fit = fit_order(curve)
        slopes[p] = fit.slope
        curves.append(curve)
        checks.append(_band_check(f"coupling-slope-p{p}", fit.slope, lo, hi))
    if len(ps) > 1:
        spread = max(slopes.values()) - min(slopes.values())
        checks.append(Check("coupling-slope-agreement", spread <= agree,
                            f"spread {spread:.4g} <= {agree:g}"))
    return curves, checks


def run_one_step_bias(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    pot = build_potential(cfg)
    drift = zero_drift() if pot.name == "zero" else rld_drift_field(man, pot)
    h_list = _coerce(cfg, "h_list", _floats)
    n_samples = _coerce(cfg, "n_samples", int)
    n_points = _coerce(cfg, "n_points", int)
    points = man.sample(np.random.default_rng(np.random.SeedSequence((seed, 1))),
                        n_points)
    mean_curves, cent_curves = [], []
    for i, x in enumerate(points):
        m, c = one_step_bias(man, drift, x, h_list, n_samples, seed=(seed, 2, i))
        mean_curves.append(m)
        cent_curves.append(c)
    pooled_mean = pool_curves(mean_curves)
    pooled_cent = pool_curves(cent_curves)
    fit_m = fit_order(pooled_mean)
    fit_c = fit_order(pooled_cent)
    checks = [
        _band_check("one-step-bias-slope", fit_m.slope,
                    _coerce(cfg, "check.bias_min", float, "1.3"),
                    _coerce(cfg, "check.bias_max", float, "1.7")),
        _band_check("one-step-centered-slope", fit_c.slope,
                    _coerce(cfg, "check.centered_min", float, "1.8"),
                    _coerce(cfg, "check.centered_max", float, "2.2")),
    ]
    return [pooled_mean, pooled_cent], checks


def run_rld_sample(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    pot = build_potential(cfg)
    sampler = SamplerConfig(T=_coerce(cfg, "T", float), h=_coerce(cfg, "h", float),
                            n_paths=_coerce(cfg, "n_paths", int), seed=seed)
    cloud = sample_rld(man, pot, default_start(man), sampler, workers=workers)
    rows, checks = [], []
    n = len(cloud)
    if pot.name.startswith("linear"):
        axis = _coerce(cfg, "potential.axis", _floats, "0,0,1")
        kappa = _coerce(cfg, "potential.kappa", float, "4")
        a = np.asarray(axis) / np.linalg.norm(axis)
        vals = cloud.points @ a
        oracle = vmf_mean_cosine(kappa)
        err = abs(float(vals.mean()) - oracle)
        se = float(vals.std(ddof=1) / np.sqrt(n))
        tol = _coerce(cfg, "check.moment_tol", float, "0.02")
        rows.append(("vmf-moment-error", 1, sampler.h, err, se, n))
        checks.append(Check("vmf-moment", err <= tol,
                            f"|mean - {oracle:.6f}| = {err:.4g} <= {tol:g}"))
    else:
        mean = cloud.points.mean(axis=0)
        err = float(np.linalg.norm(mean))
        se = float(cloud.points.std(ddof=1) / np.sqrt(n))
        tol = _coerce(cfg, "check.mean_norm_tol", float, "0.05")
        rows.append(("mean-vector-norm", 1, sampler.h, err, se, n))
        checks.append(Check("mean-vector-norm", err <= tol, f"{err:.4g} <= {tol:g}"))
    worst = float(np.max(man.membership_residual(cloud.points)))
    rows.append(("membership-residual", 0, sampler.h, worst, 1e-8, n))
    checks.append(Check("on-manifold", worst <= 1e-8, f"{worst:.3g} <= 1e-08"))
    return rows, checks


def run_rld_mixing(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    pot = build_potential(cfg)
    n_cloud = _coerce(cfg, "n_paths", int)
    sampler = SamplerConfig(T=_coerce(cfg, "T", float), h=_coerce(cfg, "h", float),
                            n_paths=n_cloud, seed=seed)
    checkpoints = _coerce(cfg, "checkpoints", _floats)
    reps = _coerce(cfg, "target_reps", int)
    x0 = default_start(man)
    if isinstance(man, Sphere) and man.ambient_dim == 3:
        x0 = -x0  # start opposite the target mode so the decay is visible
    _, clouds = sample_rld(man, pot, x0, sampler, checkpoints=checkpoints,
                           workers=workers)

    kappa = _coerce(cfg, "potential.kappa", float, "4")
    axis = np.asarray(_coerce(cfg, "potential.axis", _floats, "0,0,1"))

    def draw_target(rng):
        if pot.name == "zero":
            return uniform_sphere_cloud(rng, n_cloud)
        return vmf_sphere_cloud(rng, n_cloud, axis, kappa)

    t_rng = np.random.default_rng(np.random.SeedSequence((seed, 3)))
    targets = [EmpiricalMeasure(draw_target(t_rng)) for _ in range(2 * reps)]
    rows, est, se = [], {}, {}
    for t in checkpoints:
        vals = [wasserstein_p(clouds[float(t)], targets[i], p=2, metric="spherical")
                for i in range(reps)]
        est[t] = float(np.mean(vals))
        se[t] = float(np.std(vals, ddof=1) / np.sqrt(reps))
        rows.append(("mixing-w2", 2, float(t), est[t], se[t], n_cloud))
    base_vals = [wasserstein_p(targets[i], targets[reps + i], p=2, metric="spherical")
                 for i in range(reps)]
    baseline = float(np.mean(base_vals))
    rows.append(("mixing-w2-baseline", 2, 0.0, baseline,
                 float(np.std(base_vals, ddof=1) / np.sqrt(reps)), n_cloud))
    checks = []
    ts = sorted(checkpoints)
    mono = all(est[b] <= est[a] + 2.0 * np.hypot(se[a], se[b])
               for a, b in zip(ts, ts[1:]))
    checks.append(Check("mixing-nonincreasing", mono,
                        "W2 nonincreasing within 2*SE over " + str(ts)))
    final = est[ts[-1]]
    checks.append(Check("mixing-final-near-target", final <= 2.0 * baseline,
                        f"final {final:.4g} <= 2 x baseline {baseline:.4g}"))
    return rows, checks


def run_geometry_check(cfg: dict, seed: int, workers: int):
    man = build_manifold(cfg)
    n_points = _coerce(cfg, "n_points", int)
    n_mc = _coerce(cfg, "n_mc", int)
    rows, checks = [], []
    rng = np.random.default_rng(np.random.SeedSequence((seed, 4)))
    x = man.sample(rng, n_points)

    def record(name, value, tol):
        rows.append((name, 0, 0.0, float(value), float(tol), n_points))
        checks.append(Check(name, value <= tol, f"{value:.3g} <= {tol:g}"))

    P = np.atleast_3d(man.projection(x))
    record("projector-symmetry",
           np.linalg.norm(P - np.swapaxes(P, 1, 2), axis=(1, 2)).max(), 1e-10)
    record("projector-idempotency",
           np.linalg.norm(np.einsum("bij,bjk->bik", P, P) - P, axis=(1, 2)).max(), 1e-8)
    record("projector-trace",
           np.abs(np.einsum("bii->b", P) - man.dim).max(), 1e-8)

    u = man.apply_projection(x, rng.standard_normal(x.shape))
    v = man.apply_projection(x, rng.standard_normal(x.shape))
    ii_uv = man.second_fundamental_form(x, u, v)
    scale = np.linalg.norm(u, axis=-1) * np.linalg.norm(v, axis=-1)
    record("ii-normality",
           (np.linalg.norm(man.apply_projection(x, ii_uv), axis=-1) / scale).max(),
           1e-6)
    ii_vu = man.second_fundamental_form(x, v, u)
    record("ii-symmetry",
           (np.linalg.norm(ii_uv - ii_vu, axis=-1) / scale).max(), 1e-8)
    ii_2u = man.second_fundamental_form(x, 2.0 * u, v)
    record("ii-linearity",
           (np.linalg.norm(ii_2u - 2.0 * ii_uv, axis=-1) / scale).max(), 1e-6)

    # basis independence of the Ito correction
    A = man.ito_drift(x)
    frames = [orthonormal_tangent_frame(man, x, rng) for _ in range(2)]
    alts = []
    for fr in frames:
        acc = np.zeros_like(x)
        for i in range(man.dim):
            acc += man.second_fundamental_form(x, fr[:, i], fr[:, i])
        alts.append(0.5 * acc)
    record("ito-basis-independence",
           max(np.linalg.norm(a - b, axis=-1).max()
               for a, b in ((alts[0], alts[1]), (alts[0], A))), 1e-8)

    # Monte Carlo identity A = 1/2 E[II(P xi, P xi)]
    worst = 0.0
    for i in range(n_points):
        xi = rng.standard_normal((n_mc, man.ambient_dim))
        xs = np.broadcast_to(x[i], (n_mc, man.ambient_dim)).copy()
        pu = man.apply_projection(xs, xi)
        vals = 0.5 * man.second_fundamental_form(xs, pu, pu)
        mc = vals.mean(axis=0)
        se3 = 3.0 * np.sqrt(vals.var(axis=0).sum() / n_mc)
        worst = max(worst, float(np.linalg.norm(A[i] - mc) / se3))
    record("ito-monte-carlo-3se", worst, 1.0)

    # exponential map: fixed point, membership, speed conservation proxy
    record("exp-at-zero",
           np.linalg.norm(man.exp(x, np.zeros_like(x)) - x, axis=-1).max(), 0.0)
    w = 0.3 * u / np.linalg.norm(u, axis=-1, keepdims=True)
    record("exp-membership",
           np.max(man.membership_residual(man.exp(x, w))), 1e-8)

    # nearest-point projection: idempotence and normality of the residual
    y = x + 0.05 * rng.standard_normal(x.shape)
    px = man.project_point(y)
    record("projection-idempotence",
           np.linalg.norm(man.project_point(px) - px, axis=-1).max(), 1e-9)
    record("projection-normality",
           np.linalg.norm(man.apply_projection(px, y - px), axis=-1).max(), 1e-9)

    if man.kappa1 is not None and man.kappa2 is not None:
        vv = 0.5 * u / np.linalg.norm(u, axis=-1, keepdims=True)
        ii_vv = man.second_fundamental_form(x, vv, vv)
        taylor = np.linalg.norm(man.exp(x, vv) - (x + vv + 0.5 * ii_vv),
                                axis=-1).max()
        bound = (man.kappa1 ** 2 + man.kappa2) / 6.0 * 0.5 ** 3
        if bound > 0:
            record("exp-taylor-remainder", taylor / (bound * (1.0 + 1e-3)), 1.0)
        else:
            record("exp-taylor-remainder", taylor, 1e-9)  # flat family
    return rows, checks


def run_selftest(cfg: dict, seed: int, workers: int):
    """Synthetic battery: order-fit recovery, band logic, CSV round trip."""
    import tempfile

    rows, checks = [], []
    h = 2.0 ** -np.arange(4, 10)
    for gamma in (0.5, 1.0, 1.5):
        curve = ErrorCurve(kind="synthetic", p=2, h=h, error=h ** gamma,
                           stderr=np.zeros_like(h), n_paths=[64] * len(h))
        fit = fit_order(curve)
        ok = abs(fit.slope - gamma) <= 0.02
        rows.append((f"selftest-fit-{gamma:g}", 2, float(gamma), fit.slope, 0.02, 64))
        checks.append(Check(f"fit-recovers-{gamma:g}", ok,
                            f"slope {fit.slope:.4f} ~ {gamma:g}"))
    # the band check must reject a slope-1 curve against the strong band
    curve = ErrorCurve(kind="synthetic", p=2, h=h, error=h ** 1.0,
                       stderr=np.zeros_like(h), n_paths=[64] * len(h))
    rejected = not (0.40 <= fit_order(curve).slope <= 0.62)
    rows.append(("selftest-band-rejects-slope-1", 2, 1.0,
                 fit_order(curve).slope, 0.0, 64))
    checks.append(Check("band-rejects-slope-1", rejected,
                        "slope 1.0 outside [0.40, 0.62]"))
    # CSV round trip is exact
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "roundtrip.csv"
        emit_curve_csv(curve, path)
        back = read_curve_csv(path)
        exact = all(b == r for b, r in zip(back, curve_rows(curve)))
    checks.append(Check("csv-roundtrip-exact", exact, "parse-back reproduces rows"))
    rows.append(("selftest-csv-roundtrip", 0, 0.0, float(not exact), 0.0, 64))
    return rows, checks


RUNNERS = {
    "convergence": run_convergence,
    "coupling": run_coupling,
    "one-step-bias": run_one_step_bias,
    "rld-sample": run_rld_sample,
    "rld-mixing": run_rld_mixing,
    "geometry-check": run_geometry_check,
    "selftest": run_selftest,
}


# -- driver ---------------------------------------------------------------------


def run(experiment: str, config_path=None, overrides=(), seed=None, workers=None,
        check: bool = False, out=None) -> int:
    """Execute one experiment; returns the process exit code."""
    started = time.perf_counter()
    try:
        cfg = dict(DEFAULTS[experiment]) if experiment in DEFAULTS else {}
        if config_path is not None:
            cfg.update(load_config(config_path))
        for item in overrides:
            if "=" not in item:
                raise ConfigError(f"--set expects key=value, got {item!r}")
            key, value = item.split("=", 1)
            cfg[key.strip()] = value.strip()
        cfg["experiment"] = experiment
        if seed is not None:
            cfg["seed"] = str(seed)
        if workers is not None:
            cfg["workers"] = str(workers)
        if out is not None:
            cfg["out"] = str(out)
        validate_keys(cfg, experiment)
        seed_val = _coerce(cfg, "seed", int, "0")
        workers_val = _coerce(cfg, "workers", int, str(os.cpu_count() or 1))
        out_dir = Path(cfg.get("out", "out"))
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG

    try:
        rows, checks = RUNNERS[experiment](cfg, seed_val, workers_val)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (GeometryError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    csv_path = emit_curve_csv(rows, out_dir / "results.csv")
    manifest = {
        "experiment": experiment,
        "config": {k: cfg[k] for k in sorted(cfg)},
        "version": f"manifold-sde {__version__} (numpy {np.__version__})",
        "wall_time_s": round(time.perf_counter() - started, 3),
        "checks": [c.as_dict() for c in checks],
        "outputs": [str(csv_path)],
    }
    manifest_path = out_dir / "manifest.json"
    with open(manifest_path, "w", newline="\n") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")
    for c in checks:
        print(f"[{'PASS' if c.passed else 'FAIL'}] {c.name}: {c.detail}")
    failed = [c for c in checks if not c.passed]
    if failed:
        print(f"{len(failed)} of {len(checks)} checks failed", file=sys.stderr)
        if check:
            return EXIT_CHECK
    return EXIT_OK


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="manifold-sde",
        description="Batch experiments for SDE schemes on embedded manifolds.")
    sub = parser.add_subparsers(dest="experiment", required=True,
                                metavar="|".join(EXPERIMENTS))
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", default=None, help="key=value config file")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override one config key (repeatable)")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--workers", type=int, default=None)
        p.add_argument("--check", action="store_true",
                       help="exit 3 if an acceptance band fails")
        p.add_argument("--out", default=None, help="output directory")
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code not in (0, None) else 0
    try:
        return run(args.experiment, config_path=args.config, overrides=args.set,
                   seed=args.seed, workers=args.workers, check=args.check,
                   out=args.out)
    except Exception as exc:  # pragma: no cover - last-resort guard
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
