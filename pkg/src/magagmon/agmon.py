"""Averaged-flux weight, Agmon-type metric, and weighted path-length optimization.

The central quantity is the averaged squared flux density along the
straight-line homotopy between a fixed path point p = gamma(t) and the time-t
Brownian marginal started at x:

    beta_bar(p; x, t) = E_{w ~ N(x, t I2)} [ |w - p|^2 (int_0^1 beta(s w + (1-s) p) s ds)^2 ]

The decay weight clamps beta_bar - 2(lambda - nu1/a^2) at zero and takes a
square root; integrating it against arclength along paths from x to the
classically allowed region gives the decay metric.

Because beta_bar depends on the Brownian motion only through its time-t
marginal, it is computed by deterministic tensor Gauss-Hermite quadrature
(Monte Carlo over the marginal is kept as an independent cross-check).
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Optional, Union

import numpy as np
from scipy.optimize import minimize
from scipy.special import jn_zeros

from .fields import ScalarField2D, VectorField2D
from .geometry import Grid2D, Polyline, points_at_arclength
from .paths import MCEstimate
from .rng import substream_generator

__all__ = [
    "NU1_DISC",
    "AgmonParams",
    "BetaBarQuery",
    "AgmonResult",
    "AllowedRegion",
    "OptimizerSpec",
    "FunctionalValue",
    "ConfineBound",
    "ConcaveBound",
    "CarmonaBound",
    "beta_bar",
    "agmon_weight",
    "weight_profile",
    "classically_allowed",
    "path_length_functional",
    "agmon_distance",
    "corollary_bounds",
    "carmona_bound",
]

# ground state energy of -(1/2) Laplacian on the unit disc, j_{0,1}^2 / 2
NU1_DISC = float(jn_zeros(0, 1)[0] ** 2 / 2.0)


@dataclass(frozen=True)
class AgmonParams:
    """Energy, tube radius, tube eigenvalue constant, and region conventions."""

    lam: float
    a: float = 1.0
    nu1: float = NU1_DISC
    gauge: Optional[VectorField2D] = None
    convention: str = "half-square"  # "half-square": (1/2)|A|^2 <= lam; "half-abs": (1/2)|A| <= lam

    def __post_init__(self):
        if self.a <= 0:
            raise ValueError("tube radius a must be positive")
        if self.nu1 <= 0:
            raise ValueError("nu1 must be positive")

    @property
    def clamp_level(self) -> float:
        return 2.0 * (self.lam - self.nu1 / self.a ** 2)


@dataclass(frozen=True)
class BetaBarQuery:
    """Evaluation request for the averaged-flux weight at p with start x and time t."""

    beta: ScalarField2D
    x: tuple
    p: tuple
    t: float
    n_gh: int = 20
    n_s: int = 16
    method: str = "gh"  # "gh" | "mc"
    mc_samples: int = 100_000
    seed: int = 0

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("time t must be nonnegative")
        if self.n_gh < 1 or self.n_s < 1:
            raise ValueError("quadrature orders must be >= 1")


def _s_rule(n_s: int) -> tuple:
    u, v = np.polynomial.legendre.leggauss(n_s)
    return 0.5 * (u + 1.0), 0.5 * v


def _gh_rule(n_gh: int) -> tuple:
    xi, w = np.polynomial.hermite.hermgauss(n_gh)
    nodes = np.stack([np.repeat(xi, n_gh), np.tile(xi, n_gh)], axis=-1)  # (G, 2)
    weights = np.outer(w, w).ravel() / np.pi
    return nodes, weights


def _segment_flux_sq(beta: ScalarField2D, w_pts: np.ndarray, p: np.ndarray,
                     s_nodes: np.ndarray, s_weights: np.ndarray) -> np.ndarray:
    """(int_0^1 beta(s w + (1-s) p) s ds)^2 for each w in w_pts against matching p."""
    gamma = (s_nodes[:, None] * w_pts[..., None, :]
             + (1.0 - s_nodes[:, None]) * p[..., None, :])  # (..., n_s, 2)
    vals = beta.fn(gamma)
    if not np.all(np.isfinite(vals)):
        finite = np.isfinite(vals)
        bad_pt = gamma[~finite][0] if gamma[~finite].size else None
        bcast_w = np.broadcast_to(w_pts[..., None, :], gamma.shape)
        bcast_p = np.broadcast_to(p[..., None, :], gamma.shape)
        raise ValueError(
            "beta is not finite on the segment from "
            f"{tuple(bcast_w[~finite][0])} to {tuple(bcast_p[~finite][0])}"
            f" (first bad point {tuple(bad_pt)})")
    inner = np.tensordot(vals, s_weights * s_nodes, axes=(-1, 0))
    return inner ** 2


def _beta_bar_batch(beta: ScalarField2D, x: np.ndarray, pts: np.ndarray,
                    ts: np.ndarray, n_gh: int, n_s: int,
                    block: int = 128) -> np.ndarray:
    """Gauss-Hermite beta_bar at points pts (M, 2) with times ts (M,)."""
    gh_nodes, gh_weights = _gh_rule(n_gh)
    s_nodes, s_weights = _s_rule(n_s)
    out = np.empty(len(pts))
    for a in range(0, len(pts), block):
        b = min(a + block, len(pts))
        p = pts[a:b]  # (m, 2)
        t = ts[a:b]
        w_pts = x + np.sqrt(2.0 * t)[:, None, None] * gh_nodes[None, :, :]  # (m, G, 2)
        flux_sq = _segment_flux_sq(beta, w_pts, p[:, None, :], s_nodes, s_weights)
        dist2 = np.sum((w_pts - p[:, None, :]) ** 2, axis=-1)
        out[a:b] = np.tensordot(dist2 * flux_sq, gh_weights, axes=(1, 0))
    return out


def beta_bar(q: BetaBarQuery) -> Union[float, MCEstimate]:
    """Averaged-flux weight; deterministic quadrature or Monte Carlo cross-check."""
    x = np.asarray(q.x, dtype=float)
    p = np.asarray(q.p, dtype=float)
    if q.method == "gh":
        return float(_beta_bar_batch(q.beta, x, p[None, :], np.array([q.t]),
                                     q.n_gh, q.n_s)[0])
    if q.method != "mc":
        raise ValueError(f"unknown beta_bar method {q.method!r}")
    rng = np.random.default_rng(q.seed)
    w = x + np.sqrt(q.t) * rng.standard_normal((q.mc_samples, 2))
    s_nodes, s_weights = _s_rule(q.n_s)
    flux_sq = _segment_flux_sq(q.beta, w, p[None, :], s_nodes, s_weights)
    values = np.sum((w - p) ** 2, axis=-1) * flux_sq
    return MCEstimate(float(values.mean()),
                      float(values.std(ddof=1) / np.sqrt(len(values))) if len(values) > 1 else 0.0,
                      len(values), q.seed)


def agmon_weight(q: BetaBarQuery, params: AgmonParams) -> float:
    """sqrt(max(beta_bar - 2(lambda - nu1/a^2), 0))."""
    bb = beta_bar(q)
    value = bb.value if isinstance(bb, MCEstimate) else bb
    return float(np.sqrt(max(value - params.clamp_level, 0.0)))


def weight_profile(beta: ScalarField2D, x, pts, ts, params: AgmonParams,
                   n_gh: int = 20, n_s: int = 16) -> np.ndarray:
    """Vectorized clamp weight at points pts (M, 2) with times ts (M,)."""
    bb = _beta_bar_batch(beta, np.asarray(x, dtype=float),
                         np.asarray(pts, dtype=float), np.asarray(ts, dtype=float),
                         n_gh, n_s)
    return np.sqrt(np.maximum(bb - params.clamp_level, 0.0))


# ---------------------------------------------------------------------------
# classically allowed region
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AllowedRegion:
    """Sublevel-set mask of the effective potential with its boundary point cloud."""

    mask: np.ndarray  # (nx, ny) bool
    boundary_points: np.ndarray  # (B, 2)
    lam: float
    convention: str
    a: VectorField2D
    grid: Grid2D

    @property
    def empty(self) -> bool:
        return not bool(self.mask.any())

    def level(self, p) -> np.ndarray:
        amag2 = np.sum(self.a.fn(np.asarray(p, dtype=float)) ** 2, axis=-1)
        return (0.5 * amag2 if self.convention == "half-square"
                else 0.5 * np.sqrt(amag2)) - self.lam

    def contains(self, p) -> np.ndarray:
        return self.level(p) <= 0.0


def classically_allowed(a: VectorField2D, lam: float, grid: Grid2D,
                        convention: str = "half-square") -> AllowedRegion:
    """Nodes where the gauge's effective potential lies below lam, plus boundary points.

    Default convention is the squared form (1/2)|A|^2 <= lam; the unsquared
    variant (1/2)|A| <= lam is available behind the convention flag.
    """
    if convention not in ("half-square", "half-abs"):
        raise ValueError(f"unknown region convention {convention!r}")
    nodes = grid.nodes()
    amag2 = np.sum(a.fn(nodes) ** 2, axis=-1)
    g = (0.5 * amag2 if convention == "half-square" else 0.5 * np.sqrt(amag2)) - lam
    mask = g <= 0.0
    crossings = []
    for axis in (0, 1):
        ga = g
        gb = np.roll(g, -1, axis=axis)
        pa = nodes
        pb = np.roll(nodes, -1, axis=axis)
        valid = np.ones_like(ga, dtype=bool)
        if axis == 0:
            valid[-1, :] = False
        else:
            valid[:, -1] = False
        sign_change = valid & ((ga <= 0) != (gb <= 0)) & np.isfinite(ga) & np.isfinite(gb)
        if np.any(sign_change):
            fa = ga[sign_change]
            fb = gb[sign_change]
            frac = fa / (fa - fb)
            crossings.append(pa[sign_change] + frac[:, None] * (pb[sign_change] - pa[sign_change]))
    pts = np.concatenate(crossings, axis=0) if crossings else np.zeros((0, 2))
    return AllowedRegion(mask, pts, float(lam), convention, a, grid)


def _boundary_loop(region: AllowedRegion) -> tuple:
    """Boundary points ordered by angle around the region centroid, closed loop.

    Returns (loop_points (B+1, 2), cumulative_arclength (B+1,)).
    """
    pts = region.boundary_points
    if len(pts) == 0:
        raise ValueError("allowed region has no boundary inside the grid box")
    center = region.grid.nodes()[region.mask].mean(axis=0) if not region.empty else pts.mean(axis=0)
    ang = np.arctan2(pts[:, 1] - center[1], pts[:, 0] - center[0])
    order = np.argsort(ang, kind="stable")
    loop = pts[order]
    loop = np.concatenate([loop, loop[:1]], axis=0)
    seg = np.sqrt(np.sum(np.diff(loop, axis=0) ** 2, axis=1))
    cum = np.concatenate([[0.0], np.cumsum(seg)])
    return loop, cum


def _loop_point(loop: np.ndarray, cum: np.ndarray, s: float) -> np.ndarray:
    total = cum[-1]
    s = float(s) % total if total > 0 else 0.0
    x = np.interp(s, cum, loop[:, 0])
    y = np.interp(s, cum, loop[:, 1])
    return np.array([x, y])


# ---------------------------------------------------------------------------
# weighted length functional
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FunctionalValue:
    value: float
    converged: bool
    refinements: int


def _functional_once(weight_fn: Callable, poly: Polyline) -> float:
    t = poly.times
    v = poly.vertices
    t_mid = 0.5 * (t[:-1] + t[1:])
    p_mid = 0.5 * (v[:-1] + v[1:])
    seg = np.sqrt(np.sum(np.diff(v, axis=0) ** 2, axis=1))
    if np.all(seg == 0.0):
        return 0.0
    w = weight_fn(p_mid, t_mid)
    return float(np.sum(w * seg))


def _refine_polyline(poly: Polyline) -> Polyline:
    t = poly.times
    v = poly.vertices
    t2 = np.empty(2 * len(t) - 1)
    v2 = np.empty((2 * len(t) - 1, 2))
    t2[0::2] = t
    t2[1::2] = 0.5 * (t[:-1] + t[1:])
    v2[0::2] = v
    v2[1::2] = 0.5 * (v[:-1] + v[1:])
    return Polyline(t2, v2, poly.domain)


def path_length_functional(poly: Polyline, x, params: AgmonParams, beta: ScalarField2D,
                           n_gh: int = 20, n_s: int = 16,
                           refine_tol: Optional[float] = 1e-3, max_refine: int = 6,
                           freeze_time: Optional[float] = None) -> FunctionalValue:
    """Composite midpoint quadrature of the clamp weight against arclength.

    Refinement halves every segment until the relative change drops below
    refine_tol (None runs a single pass). freeze_time evaluates the weight at
    a fixed time for every midpoint, which isolates the spatial part of the
    weight; with it the value depends only on the traced curve.
    """
    x = np.asarray(x, dtype=float)
    if not np.allclose(poly.start, x, atol=1e-12):
        raise ValueError(f"path starts at {tuple(poly.start)}, expected {tuple(x)}")

    def weight_fn(p_mid, t_mid):
        ts = np.full(len(t_mid), freeze_time) if freeze_time is not None else t_mid
        return weight_profile(beta, x, p_mid, ts, params, n_gh, n_s)

    value = _functional_once(weight_fn, poly)
    if refine_tol is None:
        return FunctionalValue(value, True, 0)
    for level in range(1, max_refine + 1):
        poly = _refine_polyline(poly)
        refined = _functional_once(weight_fn, poly)
        if abs(refined - value) <= refine_tol * max(abs(refined), 1e-300):
            return FunctionalValue(refined, True, level)
        value = refined
    warnings.warn("path_length_functional: refinement cap reached before convergence")
    return FunctionalValue(value, False, max_refine)


# ---------------------------------------------------------------------------
# distance optimization
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OptimizerSpec:
    """Multi-restart Nelder-Mead over interior vertices plus a boundary endpoint."""

    grid: Grid2D
    restarts: int = 8
    interior_vertices: int = 24
    jitter_scale: float = 0.2
    seed: int = 0
    nm_iters: int = 20  # simplex iterations between arclength reparametrizations
    max_cycles: int = 12
    improvement_tol: float = 1e-6
    n_gh: int = 20
    n_s: int = 16

    @staticmethod
    def light(grid: Grid2D, seed: int = 0) -> "OptimizerSpec":
        return OptimizerSpec(grid, restarts=2, interior_vertices=8, seed=seed,
                             max_cycles=3, n_gh=8, n_s=8)


@dataclass(frozen=True)
class AgmonResult:
    """Distance value with the minimizing path and optimizer diagnostics."""

    distance: float
    polyline: Optional[Polyline]
    vertex_weights: Optional[np.ndarray]
    converged: bool
    diagnostics: dict = field(default_factory=dict)


def _minimize_weighted_length(weight_fn: Callable, x: np.ndarray, region: AllowedRegion,
                              opt: OptimizerSpec) -> tuple:
    """Shared NM driver; weight_fn(points, times) -> weights. Returns (value, poly, diag)."""
    loop, cum = _boundary_loop(region)
    total = cum[-1]
    m = opt.interior_vertices
    times = np.linspace(0.0, 1.0, m + 2)

    def build(z: np.ndarray) -> Polyline:
        verts = np.empty((m + 2, 2))
        verts[0] = x
        verts[1:-1] = z[:-1].reshape(m, 2)
        verts[-1] = _loop_point(loop, cum, z[-1])
        return Polyline(times, verts)

    evals = [0]

    def objective(z: np.ndarray) -> float:
        evals[0] += 1
        poly = build(z)
        t_mid = 0.5 * (times[:-1] + times[1:])
        p_mid = 0.5 * (poly.vertices[:-1] + poly.vertices[1:])
        seg = poly.segment_lengths()
        return float(np.sum(weight_fn(p_mid, t_mid) * seg))

    def seed_z(theta: float, jitter: Optional[np.random.Generator]) -> np.ndarray:
        y = _loop_point(loop, cum, theta)
        interior = x + np.linspace(0, 1, m + 2)[1:-1, None] * (y - x)
        if jitter is not None:
            scale = opt.jitter_scale * max(float(np.hypot(*(y - x))), 1e-6)
            interior = interior + jitter.normal(0.0, scale, size=interior.shape)
        return np.concatenate([interior.ravel(), [theta]])

    def reparametrized(z: np.ndarray) -> np.ndarray:
        poly = build(z)
        s = np.linspace(0.0, poly.length(), m + 2)[1:-1]
        interior = points_at_arclength(poly, s)
        return np.concatenate([interior.ravel(), [z[-1]]])

    d_boundary = np.sqrt(np.sum((region.boundary_points - x) ** 2, axis=1))
    theta_nearest = cum[np.argmin(np.sum((loop[:-1] - x) ** 2, axis=1))]

    best_val = np.inf
    best_z = None
    converged = False
    total_iters = 0
    for r in range(opt.restarts):
        if r == 0:
            z = seed_z(theta_nearest, None)
        else:
            gen = substream_generator(opt.seed, r)
            z = seed_z(gen.uniform(0.0, total), gen)
        val = objective(z)
        for _cycle in range(opt.max_cycles):
            res = minimize(objective, z, method="Nelder-Mead",
                           options={"maxiter": opt.nm_iters, "xatol": 1e-10,
                                    "fatol": 1e-12, "adaptive": True})
            total_iters += res.nit
            improved = val - res.fun
            z = reparametrized(res.x)
            zval = objective(z)
            if zval > res.fun:  # reparametrization may not help; keep the better iterate
                z, zval = res.x, res.fun
            val = zval
            if improved <= opt.improvement_tol * max(abs(val), 1e-12):
                converged = True
                break
        if val < best_val:
            best_val, best_z = val, z

    straight = seed_z(theta_nearest, None)
    straight_val = objective(straight)
    if straight_val < best_val:
        best_val, best_z = straight_val, straight
    diag = {
        "restarts": opt.restarts,
        "nm_iterations": total_iters,
        "function_evaluations": evals[0],
        "straight_line_value": straight_val,
        "nearest_boundary_distance": float(d_boundary.min()) if len(d_boundary) else np.nan,
    }
    return best_val, build(best_z), converged, diag


def agmon_distance(x, a: Optional[VectorField2D], beta: ScalarField2D,
                   params: AgmonParams, opt: OptimizerSpec) -> AgmonResult:
    """Decay distance from x to the classically allowed region of (A, lambda).

    Minimizes the weighted length over polylines from x to a free endpoint on
    the region boundary; the straight line to the nearest boundary point is
    always a candidate, so the result never exceeds its value.
    """
    x = np.asarray(x, dtype=float)
    gauge = a if a is not None else params.gauge
    if gauge is None:
        raise ValueError("no gauge provided for the classically allowed region")
    region = classically_allowed(gauge, params.lam, opt.grid, params.convention)
    if region.empty:
        return AgmonResult(np.inf, None, None, True, {"reason": "empty allowed region"})
    if bool(region.contains(x)):
        poly = Polyline(np.array([0.0, 1.0]), np.array([x, x]))
        vw = weight_profile(beta, x, poly.vertices, poly.times, params, opt.n_gh, opt.n_s)
        return AgmonResult(0.0, poly, vw, True, {"reason": "start inside region"})

    def weight_fn(pts, ts):
        return weight_profile(beta, x, pts, ts, params, opt.n_gh, opt.n_s)

    value, poly, converged, diag = _minimize_weighted_length(weight_fn, x, region, opt)
    vw = weight_profile(beta, x, poly.vertices, poly.times, params, opt.n_gh, opt.n_s)
    if not converged:
        warnings.warn("agmon_distance: optimizer hit the cycle cap; returning best-so-far")
    return AgmonResult(float(value), poly, vw, converged, diag)


# ---------------------------------------------------------------------------
# corollary and splitting bounds
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class ConfineBound:
    """Confining-field bound: beta >= beta0 |p|^2 outside a compact set."""

    beta0: float
    compact_radius: float = 0.0


@dataclass(frozen=True)
class ConcaveBound:
    """Concave-field bound with a declared infimum of beta."""

    beta_inf: float


def _screen_confining(beta: ScalarField2D, kind: ConfineBound, grid: Grid2D) -> None:
    nodes = grid.nodes().reshape(-1, 2)
    r2 = np.sum(nodes ** 2, axis=-1)
    outside = r2 > kind.compact_radius ** 2
    vals = beta.fn(nodes[outside])
    need = kind.beta0 * r2[outside]
    bad = vals < need - 1e-9 * np.maximum(np.abs(need), 1.0)
    if np.any(bad):
        witness = nodes[outside][bad][0]
        raise ValueError(f"confining hypothesis fails at {tuple(witness)}: "
                         f"beta={vals[bad][0]:.6g} < beta0|p|^2={need[bad][0]:.6g}")


def _screen_concave(beta: ScalarField2D, grid: Grid2D, n_pairs: int = 512,
                    seed: int = 0) -> None:
    nodes = grid.nodes().reshape(-1, 2)
    gen = np.random.default_rng(seed)
    i = gen.integers(0, len(nodes), size=n_pairs)
    j = gen.integers(0, len(nodes), size=n_pairs)
    p, q = nodes[i], nodes[j]
    mid = 0.5 * (p + q)
    lhs = beta.fn(mid)
    rhs = 0.5 * (beta.fn(p) + beta.fn(q))
    bad = lhs < rhs - 1e-9 * np.maximum(np.abs(rhs), 1.0)
    if np.any(bad):
        witness = mid[bad][0]
        raise ValueError(f"concavity fails at midpoint {tuple(witness)}")


def concave_weight(beta: ScalarField2D, x, pts, ts, beta_inf: float,
                   params: AgmonParams) -> np.ndarray:
    """sqrt(max((beta - inf beta)^2/36 (2t + (|x|-|p|)^2) - 2(lambda - nu1/a^2), 0))."""
    pts = np.asarray(pts, dtype=float)
    ts = np.asarray(ts, dtype=float)
    xnorm = float(np.hypot(*np.asarray(x, dtype=float)))
    gap = (beta.fn(pts) - beta_inf) ** 2 / 36.0
    geom = 2.0 * ts + (xnorm - np.sqrt(np.sum(pts ** 2, axis=-1))) ** 2
    return np.sqrt(np.maximum(gap * geom - params.clamp_level, 0.0))


def corollary_bounds(kind, x, poly: Polyline, beta: ScalarField2D,
                     params: AgmonParams, grid: Grid2D) -> float:
    """Closed-form decay exponents under structural hypotheses on beta.

    Returns the exponent E such that |f(x)| <= c_a exp(-E) ||f||_inf holds for
    the supplied path/endpoint; hypothesis violations found on the grid refuse
    with a witness point.
    """
    x = np.asarray(x, dtype=float)
    if isinstance(kind, ConfineBound):
        _screen_confining(beta, kind, grid)
        y = poly.end
        return float(kind.beta0 / 6.0 * (np.sum((x + y) ** 2) - 2.0))
    if isinstance(kind, ConcaveBound):
        _screen_concave(beta, grid)
        t = poly.times
        t_mid = 0.5 * (t[:-1] + t[1:])
        p_mid = 0.5 * (poly.vertices[:-1] + poly.vertices[1:])
        w = concave_weight(beta, x, p_mid, t_mid, kind.beta_inf, params)
        return float(np.sum(w * poly.segment_lengths()))
    raise ValueError(f"unknown corollary kind {type(kind).__name__}")


@dataclass(frozen=True)
class CarmonaBound:
    """Two-term global decay bound from a W - U splitting of the field."""

    value: float
    tube_term: float
    gaussian_term: float
    w_inf: float
    u_sup: float
    w_tube_min: float
    path_length: float
    c1: float = 1.0
    c2a: float = 1.0


def _tube_min(w: ScalarField2D, poly: Polyline, radius: float, grid: Grid2D) -> float:
    """Min of W over grid nodes within `radius` of the path (plus the vertices)."""
    nodes = grid.nodes().reshape(-1, 2)
    a = poly.vertices[:-1]
    b = poly.vertices[1:]
    ab = b - a
    ab2 = np.maximum(np.sum(ab ** 2, axis=1), 1e-300)
    d2_min = np.full(len(nodes), np.inf)
    for k in range(len(a)):
        s = np.clip(np.dot(nodes - a[k], ab[k]) / ab2[k], 0.0, 1.0)
        proj = a[k] + s[:, None] * ab[k]
        d2_min = np.minimum(d2_min, np.sum((nodes - proj) ** 2, axis=1))
    tube = nodes[d2_min <= radius ** 2]
    candidates = np.concatenate([tube, poly.vertices], axis=0)
    return float(np.min(w.fn(candidates)))


def carmona_bound(x, horizon: float, poly: Polyline, split: ScalarField2D,
                  params: AgmonParams, lam: float, grid: Grid2D) -> CarmonaBound:
    """Evaluate the W - U splitting bound along a path over time horizon T.

    The distance term uses len(gamma)^2 / 2T, the equality case of
    len^2 <= 2T * energy; W_inf and ||U||_inf are sampled on the grid box and
    the tube minimum over an a-neighborhood of the path at grid resolution.
    """
    if split.w is None or split.u is None:
        raise ValueError("carmona_bound needs a W - U split field")
    if horizon <= 0:
        raise ValueError("time horizon must be positive")
    nodes = grid.nodes()
    uv = split.u.fn(nodes)
    if np.any(uv < 0):
        witness = nodes[np.unravel_index(np.argmin(uv), uv.shape)]
        raise ValueError(f"split part U is negative at {tuple(witness)}")
    w_inf = float(np.min(split.w.fn(nodes)))
    u_sup = float(np.max(uv))
    w_tube = _tube_min(split.w, poly, params.a, grid)
    ell = poly.length()
    t1 = np.exp(-0.5 * params.a ** 2 * horizon * (w_inf - u_sup) ** 2
                - params.nu1 * horizon / params.a ** 2 - ell ** 2 / (2 * horizon))
    t2 = np.exp(-0.5 * horizon * w_tube)
    value = float(np.exp(lam * horizon) * (t1 + t2))
    return CarmonaBound(value, float(t2), float(t1), w_inf, u_sup, w_tube, float(ell))
