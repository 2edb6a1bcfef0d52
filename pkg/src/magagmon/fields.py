"""Magnetic fields, vector potentials, gauge constructions, and admissibility screens.

Scalar fields are the field strength beta = curl A; vector fields are the
potentials A themselves. Evaluators are pure vectorized functions of point
arrays with shape (..., 2) and are safe to share across threads.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.signal import fftconvolve

from .geometry import Domain, Grid2D

__all__ = [
    "ScalarField2D",
    "VectorField2D",
    "KatoReport",
    "constant_field",
    "radial_quadratic_field",
    "concave_field",
    "gaussian_bump_field",
    "split_field",
    "grid_field",
    "landau_gauge",
    "transversal_gauge",
    "custom_potential",
    "gauge_shifted",
    "curl_check",
    "kato_lp_check",
]


@dataclass(frozen=True)
class ScalarField2D:
    """Scalar magnetic field strength with an analytic or grid-sampled evaluator."""

    fn: Callable[[np.ndarray], np.ndarray]
    kind: str
    beta0: Optional[float] = None
    w: Optional["ScalarField2D"] = None  # W part of a W - U split
    u: Optional["ScalarField2D"] = None  # U part (must be >= 0 where sampled)

    def __call__(self, p) -> np.ndarray:
        return self.fn(np.asarray(p, dtype=float))


@dataclass(frozen=True)
class VectorField2D:
    """Vector potential A with a declared gauge tag and divergence.

    divergence None means "not declared": callers that need Div A fall back
    to a central-difference estimate. divergence_free=True declares Div A = 0
    exactly (landau and transversal gauges).
    """

    fn: Callable[[np.ndarray], np.ndarray]
    gauge: str  # "landau" | "transversal" | "custom"
    divergence_free: bool = False
    divergence: Optional[Callable[[np.ndarray], np.ndarray]] = None
    beta0: Optional[float] = None

    def __call__(self, p) -> np.ndarray:
        return self.fn(np.asarray(p, dtype=float))

    def div(self, p, h: float = 1e-5) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        if self.divergence_free:
            return np.zeros(p.shape[:-1])
        if self.divergence is not None:
            return np.asarray(self.divergence(p))
        ex = np.array([h, 0.0])
        ey = np.array([0.0, h])
        d1 = (self.fn(p + ex)[..., 0] - self.fn(p - ex)[..., 0]) / (2 * h)
        d2 = (self.fn(p + ey)[..., 1] - self.fn(p - ey)[..., 1]) / (2 * h)
        return d1 + d2


# ---------------------------------------------------------------------------
# scalar field catalog
# ---------------------------------------------------------------------------

def constant_field(beta0: float) -> ScalarField2D:
    b = float(beta0)
    return ScalarField2D(lambda p: np.full(p.shape[:-1], b), "constant", beta0=b)


def radial_quadratic_field(beta0: float) -> ScalarField2D:
    """beta(p) = beta0 |p|^2."""
    b = float(beta0)
    return ScalarField2D(lambda p: b * np.sum(p ** 2, axis=-1), "radial-quadratic", beta0=b)


def concave_field(beta0: float, curvature: float = 0.5) -> ScalarField2D:
    """beta(p) = beta0 - (curvature/2) |p|^2, a smooth concave example."""
    b, c = float(beta0), float(curvature)
    return ScalarField2D(lambda p: b - 0.5 * c * np.sum(p ** 2, axis=-1), "concave", beta0=b)


def gaussian_bump_field(beta0: float, width: float = 1.0) -> ScalarField2D:
    b, w2 = float(beta0), float(width) ** 2
    return ScalarField2D(lambda p: b * np.exp(-np.sum(p ** 2, axis=-1) / (2 * w2)),
                         "gaussian-bump", beta0=b)


def split_field(w: ScalarField2D, u: ScalarField2D, grid: Optional[Grid2D] = None) -> ScalarField2D:
    """beta = W - U, evaluated pointwise from the two parts.

    When a grid is supplied, U >= 0 is screened on its nodes and a violation
    raises with a witness point.
    """
    if grid is not None:
        uv = u(grid.nodes())
        if np.any(uv < 0):
            bad = grid.nodes()[np.unravel_index(np.argmin(uv), uv.shape)]
            raise ValueError(f"split field U is negative at {tuple(bad)}")
        wv = w(grid.nodes())
        if not np.all(np.isfinite(wv)):
            raise ValueError("split field W is not finite on the sampling box")
    return ScalarField2D(lambda p: w.fn(p) - u.fn(p), "split", w=w, u=u)


def grid_field(xs: np.ndarray, ys: np.ndarray, values: np.ndarray) -> ScalarField2D:
    """Bilinear interpolation of samples, constant-extrapolated outside the box.

    Stochastic paths leave every box, so the evaluator must be total; clamping
    the query to the sample box gives constant extrapolation along each axis.
    """
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    values = np.asarray(values, dtype=float)
    interp = RegularGridInterpolator((xs, ys), values, method="linear",
                                     bounds_error=False, fill_value=None)

    def fn(p: np.ndarray) -> np.ndarray:
        q = np.empty_like(p)
        q[..., 0] = np.clip(p[..., 0], xs[0], xs[-1])
        q[..., 1] = np.clip(p[..., 1], ys[0], ys[-1])
        return interp(q.reshape(-1, 2)).reshape(p.shape[:-1])

    return ScalarField2D(fn, "grid")


# ---------------------------------------------------------------------------
# potentials and gauges
# ---------------------------------------------------------------------------

def _rot(p: np.ndarray) -> np.ndarray:
    """(-p2, p1)."""
    return np.stack([-p[..., 1], p[..., 0]], axis=-1)


def landau_gauge(beta0: float) -> VectorField2D:
    """A(p) = (beta0/2)(-p2, p1); Div A = 0, curl A = beta0."""
    b = float(beta0)
    return VectorField2D(lambda p: 0.5 * b * _rot(p), "landau",
                         divergence_free=True, beta0=b)


def transversal_gauge(beta: ScalarField2D, quad_n: int = 32) -> VectorField2D:
    """Poincare gauge A(p) = (int_0^1 t beta(t p) dt)(-p2, p1).

    Satisfies Div A = 0 and curl A = beta for smooth beta; the radial integral
    is evaluated by Gauss-Legendre quadrature of the requested order. For a
    constant field this reduces exactly to the landau gauge.
    """
    if quad_n < 1:
        raise ValueError("quad_n must be >= 1")
    u, v = np.polynomial.legendre.leggauss(quad_n)
    t_nodes = 0.5 * (u + 1.0)
    t_weights = 0.5 * v

    def fn(p: np.ndarray) -> np.ndarray:
        scaled = t_nodes.reshape((-1,) + (1,) * p.ndim) * p[None, ...]
        vals = beta.fn(scaled)  # (quad_n, ...)
        g = np.tensordot(t_weights * t_nodes, vals, axes=(0, 0))
        return g[..., None] * _rot(p)

    return VectorField2D(fn, "transversal", divergence_free=True, beta0=beta.beta0)


def custom_potential(fn: Callable[[np.ndarray], np.ndarray],
                     divergence: Optional[Callable] = None,
                     divergence_free: bool = False) -> VectorField2D:
    return VectorField2D(fn, "custom", divergence_free=divergence_free,
                         divergence=divergence)


def gauge_shifted(a: VectorField2D, grad_phi: Callable[[np.ndarray], np.ndarray],
                  laplacian_phi: Optional[Callable] = None) -> VectorField2D:
    """A + grad(phi): same curl, shifted divergence, custom gauge tag."""
    div = None
    if a.divergence_free and laplacian_phi is not None:
        div = laplacian_phi
    elif a.divergence is not None and laplacian_phi is not None:
        div = lambda p: a.divergence(p) + laplacian_phi(p)
    return VectorField2D(lambda p: a.fn(p) + np.asarray(grad_phi(p)), "custom",
                         divergence=div, beta0=a.beta0)


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------

def curl_check(a: VectorField2D, beta: ScalarField2D, region: Grid2D, h: float) -> float:
    """Max over grid nodes of |central-difference curl(A) - beta|.

    A non-finite evaluation is reported as a failure at that node (warning)
    and yields +inf.
    """
    if h <= 0:
        raise ValueError("step h must be positive")
    pts = region.nodes()[region.mask]
    ex = np.array([h, 0.0])
    ey = np.array([0.0, h])
    curl = ((a.fn(pts + ex)[..., 1] - a.fn(pts - ex)[..., 1]) / (2 * h)
            - (a.fn(pts + ey)[..., 0] - a.fn(pts - ey)[..., 0]) / (2 * h))
    dev = np.abs(curl - beta.fn(pts))
    if not np.all(np.isfinite(dev)):
        bad = pts[~np.isfinite(dev)][0]
        warnings.warn(f"curl_check: non-finite evaluation at node {tuple(bad)}")
        return np.inf
    return float(np.max(dev)) if dev.size else 0.0


@dataclass(frozen=True)
class KatoReport:
    """Result of the L^p uniformly-local integrability screen for |A|^2."""

    finite: bool
    verdict: str  # "passes screen" | "fails screen"
    sup_value: float
    sup_center: tuple
    exponent: float
    ball_integrals: np.ndarray  # (nx, ny) map of (int_{B_1(c)} |A|^{2p})^{1/p}


def kato_lp_check(a: VectorField2D, box: Domain, p: float, grid: Grid2D) -> KatoReport:
    """Screen |A|^2 for membership in L^p_unif,loc on the box (sufficient condition).

    Estimates sup over unit balls of (int |A|^{2p} chi_{B_1})^{1/p} by a
    Riemann sum on the grid; this is a screen, not a proof. Overflowing or
    non-finite samples fail the screen.
    """
    if p <= 1:
        raise ValueError("exponent p must exceed 1 in two dimensions")
    pts = grid.nodes()
    with np.errstate(over="ignore", invalid="ignore"):
        a2 = np.sum(a.fn(pts) ** 2, axis=-1)
        integrand = a2 ** p
    if not np.all(np.isfinite(integrand)):
        bad = pts[~np.isfinite(integrand)][0] if np.any(~np.isfinite(integrand)) else (np.nan, np.nan)
        return KatoReport(False, "fails screen", float("inf"), tuple(np.asarray(bad)),
                          p, np.full((grid.nx, grid.ny), np.inf))
    # disc stencil of radius 1 in node units; fftconvolve('same') integrates
    # the part of each unit ball inside the box
    rx = max(1, int(round(1.0 / grid.hx)))
    ry = max(1, int(round(1.0 / grid.hy)))
    ox, oy = np.meshgrid(np.arange(-rx, rx + 1) * grid.hx,
                         np.arange(-ry, ry + 1) * grid.hy, indexing="ij")
    stencil = ((ox ** 2 + oy ** 2) <= 1.0).astype(float)
    balls = fftconvolve(integrand, stencil, mode="same") * grid.hx * grid.hy
    balls = np.maximum(balls, 0.0) ** (1.0 / p)
    i, j = np.unravel_index(np.argmax(balls), balls.shape)
    sup = float(balls[i, j])
    finite = bool(np.isfinite(sup))
    return KatoReport(finite, "passes screen" if finite else "fails screen",
                      sup, (float(grid.xs[i]), float(grid.ys[j])), p, balls)
