"""Domains, grids, and discretized paths shared by every other module.

All types are immutable after construction (arrays are frozen), so they can
be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

__all__ = [
    "Domain",
    "Grid2D",
    "Polyline",
    "boundary_distance",
    "make_grid",
    "polyline_length",
    "resample",
]


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Domain:
    """Rectangle, disc, or whole-plane domain with Dirichlet-killed or free boundary."""

    kind: str  # "rectangle" | "disc" | "plane"
    bounds: tuple = ()  # rectangle: (xmin, xmax, ymin, ymax)
    center: tuple = (0.0, 0.0)
    radius: float = 0.0
    dirichlet: bool = True

    @staticmethod
    def rectangle(xmin: float, xmax: float, ymin: float, ymax: float,
                  dirichlet: bool = True) -> "Domain":
        if not (xmin < xmax and ymin < ymax):
            raise ValueError(f"degenerate rectangle [{xmin},{xmax}]x[{ymin},{ymax}]")
        return Domain("rectangle", bounds=(float(xmin), float(xmax), float(ymin), float(ymax)),
                      dirichlet=dirichlet)

    @staticmethod
    def disc(center, radius: float, dirichlet: bool = True) -> "Domain":
        if radius <= 0:
            raise ValueError(f"disc radius must be positive, got {radius}")
        cx, cy = float(center[0]), float(center[1])
        return Domain("disc", center=(cx, cy), radius=float(radius), dirichlet=dirichlet)

    @staticmethod
    def plane() -> "Domain":
        return Domain("plane", dirichlet=False)

    def boundary_distance(self, p) -> np.ndarray:
        """Signed distance to the boundary: positive inside, negative outside.

        Exact for disc and rectangle; +inf for the whole plane.
        """
        p = np.asarray(p, dtype=float)
        if self.kind == "plane":
            return np.full(p.shape[:-1], np.inf) if p.ndim > 1 else np.inf
        if self.kind == "disc":
            c = np.asarray(self.center)
            return self.radius - np.sqrt(np.sum((p - c) ** 2, axis=-1))
        xmin, xmax, ymin, ymax = self.bounds
        qx = np.maximum(xmin - p[..., 0], p[..., 0] - xmax)
        qy = np.maximum(ymin - p[..., 1], p[..., 1] - ymax)
        inside = -np.maximum(qx, qy)
        outside = -np.hypot(np.maximum(qx, 0.0), np.maximum(qy, 0.0))
        return np.where((qx <= 0) & (qy <= 0), inside, outside)

    def contains(self, p) -> np.ndarray:
        return self.boundary_distance(p) > 0

    def bounding_box(self) -> tuple:
        if self.kind == "rectangle":
            return self.bounds
        if self.kind == "disc":
            cx, cy = self.center
            r = self.radius
            return (cx - r, cx + r, cy - r, cy + r)
        raise ValueError("whole-plane domain has no bounding box; supply one explicitly")


def boundary_distance(domain: Domain, p):
    return domain.boundary_distance(p)


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered grid over a domain's bounding box with an interior-node mask."""

    domain: Domain
    nx: int
    ny: int
    hx: float
    hy: float
    xs: np.ndarray  # (nx,) node x coordinates
    ys: np.ndarray  # (ny,) node y coordinates
    mask: np.ndarray  # (nx, ny) bool, True where the node is inside the domain

    def nodes(self) -> np.ndarray:
        """All node coordinates, shape (nx, ny, 2), indexing 'ij'."""
        X, Y = np.meshgrid(self.xs, self.ys, indexing="ij")
        return np.stack([X, Y], axis=-1)

    def interior_nodes(self) -> np.ndarray:
        return self.nodes()[self.mask]

    @property
    def extent(self) -> tuple:
        return (self.xs[0] - 0.5 * self.hx, self.xs[-1] + 0.5 * self.hx,
                self.ys[0] - 0.5 * self.hy, self.ys[-1] + 0.5 * self.hy)


def make_grid(domain: Domain, nx: int, ny: int, box: Optional[tuple] = None) -> Grid2D:
    """Cell-centered grid on the domain's bounding box (or an explicit box for the plane)."""
    if nx < 1 or ny < 1:
        raise ValueError("grid counts must be >= 1")
    if box is None:
        box = domain.bounding_box()
    xmin, xmax, ymin, ymax = box
    hx = (xmax - xmin) / nx
    hy = (ymax - ymin) / ny
    xs = xmin + (np.arange(nx) + 0.5) * hx
    ys = ymin + (np.arange(ny) + 0.5) * hy
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    pts = np.stack([X, Y], axis=-1)
    if domain.kind == "plane":
        mask = np.ones((nx, ny), dtype=bool)
    else:
        mask = domain.boundary_distance(pts) > 0
    return Grid2D(domain, nx, ny, hx, hy, _frozen(xs), _frozen(ys), mask)


@dataclass(frozen=True)
class Polyline:
    """Piecewise-linear path on the unit parameter interval, fixed endpoints.

    times are strictly increasing with t0=0 and tM=1; vertices are points in
    the plane. The path is the optimization variable of the distance solvers.
    """

    times: np.ndarray  # (M+1,)
    vertices: np.ndarray  # (M+1, 2)
    domain: Optional[Domain] = None

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.vertices, dtype=float)
        if t.ndim != 1 or v.ndim != 2 or v.shape[1] != 2 or len(t) != len(v):
            raise ValueError("times must be (M+1,), vertices (M+1, 2)")
        if len(t) < 2:
            raise ValueError("a polyline needs at least two vertices")
        if not (np.all(np.diff(t) > 0) and t[0] == 0.0 and t[-1] == 1.0):
            raise ValueError("times must increase strictly from 0 to 1")
        if self.domain is not None and self.domain.kind != "plane":
            d = self.domain.boundary_distance(v)
            if np.any(d < 0):
                bad = v[np.argmin(d)]
                raise ValueError(f"vertex {tuple(bad)} lies outside the attached domain")
        object.__setattr__(self, "times", _frozen(t))
        object.__setattr__(self, "vertices", _frozen(v))

    @property
    def start(self) -> np.ndarray:
        return self.vertices[0]

    @property
    def end(self) -> np.ndarray:
        return self.vertices[-1]

    def segment_lengths(self) -> np.ndarray:
        return np.sqrt(np.sum(np.diff(self.vertices, axis=0) ** 2, axis=1))

    def length(self) -> float:
        return float(np.sum(self.segment_lengths()))

    def reverse(self) -> "Polyline":
        return Polyline(1.0 - self.times[::-1], self.vertices[::-1], self.domain)

    def point_at(self, t) -> np.ndarray:
        """Position at parameter t by linear interpolation in time."""
        t = np.asarray(t, dtype=float)
        x = np.interp(t, self.times, self.vertices[:, 0])
        y = np.interp(t, self.times, self.vertices[:, 1])
        return np.stack([x, y], axis=-1)

    @staticmethod
    def line(x, y, n_segments: int = 1, domain: Optional[Domain] = None) -> "Polyline":
        t = np.linspace(0.0, 1.0, n_segments + 1)
        v = np.asarray(x, dtype=float) + t[:, None] * (np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
        return Polyline(t, v, domain)

    def to_csv(self, fh) -> int:
        fh.write("t,x,y\n")
        for t, (x, y) in zip(self.times, self.vertices):
            fh.write(f"{t:.17g},{x:.17g},{y:.17g}\n")
        return len(self.times)

    @staticmethod
    def from_csv(fh, domain: Optional[Domain] = None) -> "Polyline":
        header = fh.readline().strip()
        if header != "t,x,y":
            raise ValueError(f"expected polyline header 't,x,y', got {header!r}")
        rows = np.loadtxt(fh, delimiter=",", ndmin=2)
        return Polyline(rows[:, 0], rows[:, 1:3], domain)


def polyline_length(poly: Polyline) -> float:
    return poly.length()


def _cumulative_arclength(poly: Polyline) -> np.ndarray:
    return np.concatenate([[0.0], np.cumsum(poly.segment_lengths())])


def points_at_arclength(poly: Polyline, s) -> np.ndarray:
    """Points on the path at the given arclength positions (clipped to [0, L])."""
    cum = _cumulative_arclength(poly)
    L = cum[-1]
    s = np.clip(np.asarray(s, dtype=float), 0.0, L)
    x = np.interp(s, cum, poly.vertices[:, 0])
    y = np.interp(s, cum, poly.vertices[:, 1])
    return np.stack([x, y], axis=-1)


def resample(poly: Polyline, n_segments: int) -> Polyline:
    """Refine a polyline with arclength-uniform sample points.

    The uniform samples are merged with the original vertices, so every output
    vertex lies on the original curve: length is preserved exactly and the
    operation is idempotent on already-uniform polylines. A zero-length path
    resamples to a constant path.
    """
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    cum = _cumulative_arclength(poly)
    L = cum[-1]
    if L == 0.0:
        t = np.linspace(0.0, 1.0, n_segments + 1)
        v = np.repeat(poly.vertices[:1], n_segments + 1, axis=0)
        return Polyline(t, v, poly.domain)
    s_uniform = np.linspace(0.0, L, n_segments + 1)
    s_all = np.union1d(s_uniform, cum)
    # drop near-duplicates introduced by vertices sitting on the uniform grid
    keep = np.concatenate([[True], np.diff(s_all) > 1e-12 * L])
    s_all = s_all[keep]
    s_all[-1] = L
    v = points_at_arclength(poly, s_all)
    v[0] = poly.vertices[0]
    v[-1] = poly.vertices[-1]
    return Polyline(s_all / L, v, poly.domain)
