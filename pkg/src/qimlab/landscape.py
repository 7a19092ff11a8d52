"""Empirical certification of the geometric-landscape claims at desk scale.

Each probe checks one qualitative prediction on a concrete random instance:
strictly negative curvature at the origin, radial-derivative signs away
from the unit sphere, negative angular curvature on the equator (strict
saddles), positive curvature near the global minimizers, and a basin
census over many random gradient-descent starts.

The theory guarantees these properties with high probability once
``m >= C n`` for an unspecified constant ``C``; probes therefore *report*
measured values together with the predicted sign, and the suite flags the
whole report as ``below_threshold`` when ``m < 6 n`` (the empirical
recovery threshold), in which regime failed checks are expected and not
treated as errors.

Default regime constants (reported in every record, never silently
assumed tight): outer radius threshold ``1 + eps0`` with ``eps0 = 0.1``,
small-radius band ``R <= 0.02`` for qim3, ball radius ``0.05 * ||x||``
around the minimizers, equator window ``pi/2 +- 0.2``, radial grid
``{0.01, 0.1, 0.25, 0.5, 0.8, 1.2, 2, 4, 10}``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import NonFinite
from .losses import (QimModel, dir_curvature, gradient, hessian_matrix,
                     hessian_vector_product, perp_direction, polar_eval,
                     polar_point, _as_y)
from .measurements import SensingEnsemble, gen_gaussian_ensemble, intensities
from .optim import GdConfig, default_config, gradient_descent
from .rng import stream

EPS0 = 0.1
R2_SMALL = 0.02
BALL_RADIUS = 0.05
EQUATOR_HALF_WIDTH = 0.2
POLE_THETA = 0.1
DEFAULT_R_GRID = (0.01, 0.1, 0.25, 0.5, 0.8, 1.2, 2.0, 4.0, 10.0)
DENSE_EIG_MAX_N = 256
SADDLE_GRAD_TOL = 1e-6
SADDLE_CURV_TOL = -1e-6
BELOW_THRESHOLD_RATIO = 6.0


def expected_origin_curvature(model: QimModel) -> float:
    """Expected directional curvature at u = 0 (twice the radial slope there)."""
    if model.variant == "qim1":
        return -4.0
    if model.variant == "qim2":
        return -2.0 * (model.beta + 2.0)
    if model.variant == "qim3":
        return -2.0 * (1.0 + model.beta1 + 2.0 * model.beta2) / model.beta2 ** 2
    return -4.0  # intensity: same Hessian at 0 as qim1 up to the y weighting


def extreme_eig_estimate(matvec, n: int, which: str, seed: int = 0) -> float:
    """Extreme eigenvalue of a symmetric operator, matrix-free.

    Lanczos iteration (scipy ``eigsh``) from a seeded start vector; used
    above the dense-eigendecomposition cutoff.  Deterministic for a fixed
    seed.
    """
    from scipy.sparse.linalg import LinearOperator, eigsh

    v0 = stream(seed, 40).standard_normal(n)
    op = LinearOperator((n, n), matvec=matvec, dtype=float)
    vals = eigsh(op, k=1, which="LA" if which == "max" else "SA", v0=v0,
                 tol=1e-10, return_eigenvectors=False)
    return float(vals[0])


@dataclass(frozen=True)
class OriginCurvature:
    probe_max: float
    dense_max: Optional[float]
    expected: float
    probes: int


def curvature_at_zero(model: QimModel, E: SensingEnsemble, y, probes: int = 16,
                      seed: int = 0) -> OriginCurvature:
    """Maximum directional curvature at the origin over random probe directions.

    For ``n <= 256`` the exact maximum Hessian eigenvalue at 0 is computed
    by dense symmetric eigendecomposition as well (it dominates every
    probe's Rayleigh quotient); above that a matrix-free Lanczos estimate
    is used.
    """
    if probes < 1:
        raise ValueError("probes must be at least 1")
    y = _as_y(y)
    g = stream(seed, 41)
    zero = np.zeros(E.n)
    best = -np.inf
    for _ in range(probes):
        xi = g.standard_normal(E.n)
        xi /= np.linalg.norm(xi)
        best = max(best, dir_curvature(model, E, y, zero, xi))
    if E.n <= DENSE_EIG_MAX_N:
        dense = float(np.linalg.eigvalsh(hessian_matrix(model, E, y, zero))[-1])
    else:
        dense = extreme_eig_estimate(
            lambda v: hessian_vector_product(model, E, y, zero, v), E.n, "max", seed)
    return OriginCurvature(probe_max=best, dense_max=dense,
                           expected=expected_origin_curvature(model), probes=probes)


@dataclass(frozen=True)
class RadialScanEntry:
    R: float
    direction: str
    dR_f: float
    expected_sign: Optional[str]
    sign_ok: bool


def _expected_radial_sign(model: QimModel, tag: str, R: float) -> Optional[str]:
    if tag == "aligned":
        # along the truth direction the per-measurement radial derivative has
        # the sign of R - 1 exactly, for every variant
        if R < 1.0:
            return "-"
        if R > 1.0:
            return "+"
        return "0"
    if R >= 1.0 + EPS0:
        return "+"
    if model.variant == "qim3" and R <= R2_SMALL:
        return "-"
    return None


def radial_sign_scan(model: QimModel, E: SensingEnsemble, y, x: np.ndarray,
                     R_grid: Sequence[float] = DEFAULT_R_GRID,
                     n_random: int = 8, seed: int = 0) -> List[RadialScanEntry]:
    """Scan ``df/dR`` over radii and directions, checking the predicted signs.

    Directions always include the truth-aligned direction and one random
    orthogonal direction, plus ``n_random`` random directions.
    """
    y = _as_y(y)
    g = stream(seed, 42)
    x = np.asarray(x, dtype=float)
    x_dir = x / np.linalg.norm(x)

    def decompose(uhat):
        # polar coordinates of a unit direction around the truth axis
        ct = float(np.clip(uhat @ x_dir, -1.0, 1.0))
        perp = uhat - ct * x_dir
        pn = np.linalg.norm(perp)
        if pn < 1e-12:
            return (0.0 if ct > 0 else np.pi), perp_direction(x, g)
        return float(np.arccos(ct)), perp / pn

    dir_specs: List[Tuple[str, float, np.ndarray]] = [
        ("aligned", 0.0, perp_direction(x, g)),
        ("orthogonal", np.pi / 2, perp_direction(x, g)),
    ]
    for i in range(n_random):
        v = g.standard_normal(E.n)
        theta_i, ep_i = decompose(v / np.linalg.norm(v))
        dir_specs.append((f"random-{i}", theta_i, ep_i))

    entries = []
    scale = max(1.0, float(np.mean(y)))
    for R in R_grid:
        if not R > 0:
            raise ValueError(f"R grid must be positive, got {R}")
        for tag, theta, ep in dir_specs:
            val = polar_eval(model, E, y, polar_point(R, theta, ep, x)).dR
            expected = _expected_radial_sign(model, tag, R)
            if expected is None:
                ok = True
            elif expected == "0":
                ok = abs(val) <= 1e-12 * scale
            elif expected == "+":
                ok = val > 0
            else:
                ok = val < 0
            entries.append(RadialScanEntry(R=float(R), direction=tag, dR_f=val,
                                           expected_sign=expected, sign_ok=ok))
    return entries


@dataclass(frozen=True)
class EquatorEntry:
    R: float
    theta: float
    value: float
    kind: str          # "dtheta2" or "qim1_radial_crit"
    expected_sign: Optional[str]
    ok: bool


def _expected_equator_sign(theta: float) -> Optional[str]:
    if abs(theta - np.pi / 2) <= EQUATOR_HALF_WIDTH:
        return "-"
    if theta <= POLE_THETA or theta >= np.pi - POLE_THETA:
        return "+"
    return None


def equator_curvature_check(model: QimModel, E: SensingEnsemble, y, x: np.ndarray,
                            R_grid: Sequence[float] = (0.25, 0.5, 1.0, 2.0),
                            thetas: Optional[Sequence[float]] = None,
                            perp_count: int = 3, seed: int = 0) -> List[EquatorEntry]:
    """Angular curvature near the equator.

    qim2/qim3: ``d2f/dtheta2 < 0`` throughout the window (strict saddle);
    near the poles the sign flips to positive.  qim1: at each window
    direction, locate the unique radial critical point and verify it either
    falls below ``R = 1/9`` or has negative curvature along the truth axis.
    """
    y = _as_y(y)
    g = stream(seed, 43)
    x = np.asarray(x, dtype=float)
    if thetas is None:
        thetas = [np.pi / 2 + d for d in (-0.2, -0.1, -0.05, 0.0, 0.05, 0.1, 0.2)]
    perps = [perp_direction(x, g) for _ in range(perp_count)]
    entries = []
    if model.variant == "qim1":
        x_dir = x / np.linalg.norm(x)
        for theta in thetas:
            for ep in perps:
                uhat = np.cos(theta) * x_dir + np.sin(theta) * ep
                p = polar_point(1.0, theta, ep, x)
                pd = polar_eval(model, E, y, p)
                # dR f = 2 R a - 2 b with a = mean(Z^4/y), b = mean(Z^2):
                # the unique radial critical point sits at R* = b / a
                a = pd.dRR / 2.0
                b = (2.0 * 1.0 * a - pd.dR) / 2.0
                R_star = b / a
                if R_star < 1.0 / 9.0 or R_star > 2.0:
                    entries.append(EquatorEntry(R=float(R_star), theta=float(theta),
                                                value=np.nan, kind="qim1_radial_crit",
                                                expected_sign=None, ok=True))
                    continue
                u = np.sqrt(R_star) * uhat
                h11 = dir_curvature(model, E, y, u, x_dir)
                entries.append(EquatorEntry(R=float(R_star), theta=float(theta),
                                            value=h11, kind="qim1_radial_crit",
                                            expected_sign="-", ok=h11 < 0))
        return entries
    for R in R_grid:
        for theta in thetas:
            expected = _expected_equator_sign(theta)
            for ep in perps:
                val = polar_eval(model, E, y, polar_point(R, theta, ep, x)).dtheta2
                if expected == "-":
                    ok = val < 0
                elif expected == "+":
                    ok = val > 0
                else:
                    ok = True
                entries.append(EquatorEntry(R=float(R), theta=float(theta), value=val,
                                            kind="dtheta2", expected_sign=expected, ok=ok))
    return entries


@dataclass(frozen=True)
class ConvexityRecord:
    kind: str               # "full" (qim1/qim3) or "restricted" (qim2)
    min_curvature: float    # the asserted quantity (restricted for qim2)
    threshold: float
    samples: int
    ok: bool
    full_min_eig: Optional[float] = None   # qim2: reported, never asserted


def convexity_near_truth(model: QimModel, E: SensingEnsemble, y, x: np.ndarray,
                         radius: float = BALL_RADIUS, samples: int = 25,
                         seed: int = 0) -> ConvexityRecord:
    """Minimum curvature over a ball of relative radius ``radius`` around ±x.

    qim1 and qim3 use the dense minimum Hessian eigenvalue (full convexity;
    qim1's bound is 1, qim3's is only existence of a positive constant).
    qim2 measures curvature restricted to the direction pointing back to
    the nearest minimizer, and additionally reports the full minimum
    eigenvalue without asserting its sign (restricted convexity only).
    """
    if radius > 0.1:
        raise ValueError("ball radius is capped at 0.1")
    if samples < 1:
        raise ValueError("samples must be at least 1")
    y = _as_y(y)
    g = stream(seed, 44)
    x = np.asarray(x, dtype=float)
    nx = np.linalg.norm(x)
    restricted = model.variant == "qim2"
    threshold = 1.0 if model.variant == "qim1" else 0.0

    def min_eig(u):
        if E.n <= DENSE_EIG_MAX_N:
            return float(np.linalg.eigvalsh(hessian_matrix(model, E, y, u))[0])
        return extreme_eig_estimate(
            lambda v: hessian_vector_product(model, E, y, u, v), E.n, "min", seed)

    points = []
    for sign in (1.0, -1.0):
        points.append((sign, sign * x))   # the exact minimizers are included
        for _ in range(samples):
            d = g.standard_normal(E.n)
            d *= radius * nx * g.random() / np.linalg.norm(d)
            points.append((sign, sign * x + d))
    curv_min = np.inf
    full_min = np.inf
    for sign, u in points:
        if restricted:
            delta = u - sign * x
            nd = np.linalg.norm(delta)
            if nd < 1e-14 * nx:
                vals = []
                for _ in range(8):
                    xi = g.standard_normal(E.n)
                    xi /= np.linalg.norm(xi)
                    vals.append(dir_curvature(model, E, y, u, xi))
                curv_min = min(curv_min, min(vals))
            else:
                curv_min = min(curv_min, dir_curvature(model, E, y, u, delta / nd))
            full_min = min(full_min, min_eig(u))
        else:
            curv_min = min(curv_min, min_eig(u))
    return ConvexityRecord(kind="restricted" if restricted else "full",
                           min_curvature=float(curv_min), threshold=threshold,
                           samples=len(points), ok=curv_min > threshold,
                           full_min_eig=float(full_min) if restricted else None)


@dataclass(frozen=True)
class EndpointRecord:
    trial: int
    rel_error: float
    grad_norm: Optional[float] = None
    min_curvature: Optional[float] = None


@dataclass(frozen=True)
class BasinCensus:
    trials: int
    reached_truth: int
    reached_other: int
    nonconverged: int
    other_records: List[EndpointRecord] = dc_field(default_factory=list)


def basin_census(model: QimModel, E: SensingEnsemble, y, x: np.ndarray,
                 trials: int, cfg: Optional[GdConfig] = None,
                 seed: int = 0) -> BasinCensus:
    """Classify gradient-descent endpoints over independent random starts.

    ``reached_truth``: final relative error at most ``cfg.tol``.
    ``reached_other``: endpoint with gradient norm below
    ``1e-6 sqrt(mean y)`` that is not the truth, i.e. a spurious critical
    point (a benign landscape has none); its gradient norm and minimum
    curvature are logged.  Everything else is ``nonconverged``.
    """
    if trials < 1:
        raise ValueError("trials must be at least 1")
    y = _as_y(y)
    if cfg is None:
        cfg = default_config(model.variant)
    scale = np.sqrt(float(np.mean(y)))
    # the experiments start from a unit-norm direction against a
    # standard-normal truth; carried over scale-equivariantly this means
    # ||u0|| = sqrt(mean y / n), which keeps the published steps stable
    init_scale = np.sqrt(float(np.mean(y)) / E.n)
    truth = other = nonconv = 0
    others: List[EndpointRecord] = []
    for i in range(trials):
        g = stream(seed, 50, i)
        u0 = g.standard_normal(E.n)
        u0 *= init_scale / np.linalg.norm(u0)
        try:
            res = gradient_descent(model, E, y, x, cfg, u0)
        except NonFinite:
            nonconv += 1
            continue
        if res.converged:
            truth += 1
            continue
        gnorm = float(np.linalg.norm(gradient(model, E, y, res.u_final)))
        if gnorm <= SADDLE_GRAD_TOL * scale:
            if E.n <= DENSE_EIG_MAX_N:
                mc = float(np.linalg.eigvalsh(hessian_matrix(model, E, y, res.u_final))[0])
            else:
                mc = extreme_eig_estimate(
                    lambda v: hessian_vector_product(model, E, y, res.u_final, v),
                    E.n, "min", seed)
            other += 1
            others.append(EndpointRecord(trial=i, rel_error=res.final_dist_rel,
                                         grad_norm=gnorm, min_curvature=mc))
        else:
            nonconv += 1
    return BasinCensus(trials=trials, reached_truth=truth, reached_other=other,
                       nonconverged=nonconv, other_records=others)


@dataclass(frozen=True)
class LandscapeReport:
    model: str
    n: int
    m: int
    seed: int
    origin: OriginCurvature
    radial_scan: List[RadialScanEntry]
    equator: List[EquatorEntry]
    convexity: ConvexityRecord
    census: Optional[BasinCensus]
    below_threshold: bool
    violations: List[str]

    @property
    def all_ok(self) -> bool:
        return not self.violations

    def to_dict(self) -> dict:
        return {
            "model": self.model,
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "below_threshold": self.below_threshold,
            "origin_curvature": {
                "probe_max": self.origin.probe_max,
                "dense_max": self.origin.dense_max,
                "expected": self.origin.expected,
                "probes": self.origin.probes,
            },
            "radial_scan": [
                {"R": e.R, "direction": e.direction, "dR_f": e.dR_f,
                 "expected_sign": e.expected_sign, "sign_ok": e.sign_ok}
                for e in self.radial_scan
            ],
            "equator_curvatures": [
                {"R": e.R, "theta": e.theta, "value": None if np.isnan(e.value) else e.value,
                 "kind": e.kind, "expected_sign": e.expected_sign, "ok": e.ok}
                for e in self.equator
            ],
            "convexity_near_truth": {
                "kind": self.convexity.kind,
                "min_curvature": self.convexity.min_curvature,
                "threshold": self.convexity.threshold,
                "samples": self.convexity.samples,
                "ok": self.convexity.ok,
                "full_min_eig": self.convexity.full_min_eig,
            },
            "basin_census": None if self.census is None else {
                "trials": self.census.trials,
                "reached_truth": self.census.reached_truth,
                "reached_other": self.census.reached_other,
                "nonconverged": self.census.nonconverged,
                "other_records": [
                    {"trial": r.trial, "rel_error": r.rel_error,
                     "grad_norm": r.grad_norm, "min_curvature": r.min_curvature}
                    for r in self.census.other_records
                ],
            },
            "violations": list(self.violations),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"


def run_landscape_suite(model: QimModel, n: int = 64, m: Optional[int] = None,
                        seed: int = 1, probes: int = 16, census_trials: int = 50,
                        census_cfg: Optional[GdConfig] = None,
                        with_census: bool = True) -> LandscapeReport:
    """Run every landscape probe on one random instance (real field, unit truth)."""
    if m is None:
        m = 10 * n
    E = gen_gaussian_ensemble(n, m, "real", seed)
    g = stream(seed, 45)
    x = g.standard_normal(n)
    x /= np.linalg.norm(x)
    y = intensities(E, x).y

    origin = curvature_at_zero(model, E, y, probes=probes, seed=seed)
    radial = radial_sign_scan(model, E, y, x, seed=seed)
    equator = equator_curvature_check(model, E, y, x, seed=seed)
    convex = convexity_near_truth(model, E, y, x, seed=seed)
    census = None
    if with_census:
        census = basin_census(model, E, y, x, trials=census_trials,
                              cfg=census_cfg, seed=seed)

    violations = []
    if origin.dense_max is not None and origin.dense_max >= 0:
        violations.append("origin: dense max eigenvalue is not negative")
    if origin.probe_max >= 0:
        violations.append("origin: probe max curvature is not negative")
    for e in radial:
        if not e.sign_ok:
            violations.append(
                f"radial: dR_f at R={e.R} ({e.direction}) expected {e.expected_sign}")
    for e in equator:
        if not e.ok:
            violations.append(f"equator: {e.kind} at R={e.R:.4g}, theta={e.theta:.4g}")
    if not convex.ok:
        violations.append("convexity: minimum curvature at or below threshold")
    if census is not None and census.reached_other > 0:
        violations.append(f"census: {census.reached_other} spurious endpoint(s)")

    return LandscapeReport(model=model.label(), n=n, m=m, seed=seed, origin=origin,
                           radial_scan=radial, equator=equator, convexity=convex,
                           census=census, below_threshold=m < BELOW_THRESHOLD_RATIO * n,
                           violations=violations)
