"""Seeded Brownian and Brownian-bridge ensembles, killing, and stochastic integrals.

Path k of a bundle is a pure function of (seed, k): ensembles can be generated
in chunks over the path index range and reductions taken in fixed chunk order,
which makes every estimator reproducible for any worker count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import NamedTuple, Optional, Union

import numpy as np

from .geometry import Domain
from .rng import path_increments

__all__ = [
    "MCEstimate",
    "PathBundle",
    "Sampling",
    "sample_brownian",
    "sample_bridge",
    "ito_line_integral",
    "levy_area",
    "bundle_from_positions",
    "dump_paths",
    "mc_from_values",
]

NOT_KILLED = -1


@dataclass(frozen=True)
class MCEstimate:
    """Value, standard error, and sample count of a Monte Carlo reduction."""

    value: Union[float, complex]
    stderr: float
    samples: int
    seed: int

    def agrees_with(self, other: "MCEstimate", n_sigma: float = 3.0) -> bool:
        combined = np.hypot(self.stderr, other.stderr)
        return abs(self.value - other.value) <= n_sigma * combined


def mc_from_values(values: np.ndarray, seed: int) -> MCEstimate:
    """Mean and componentwise stderr (max over re/im) of per-path values."""
    values = np.asarray(values)
    n = len(values)
    mean = values.mean()
    if n < 2:
        return MCEstimate(complex(mean) if np.iscomplexobj(values) else float(mean),
                          0.0, n, seed)
    if np.iscomplexobj(values):
        se = max(values.real.std(ddof=1), values.imag.std(ddof=1)) / np.sqrt(n)
        return MCEstimate(complex(mean), float(se), n, seed)
    return MCEstimate(float(mean), float(values.std(ddof=1) / np.sqrt(n)), n, seed)


@dataclass(frozen=True)
class Sampling:
    """Monte Carlo sampling plan shared by the stochastic estimators.

    chunk_size fixes the reduction blocking and therefore the floating-point
    result; threads only distribute chunks and must not change any output.
    """

    n_steps: int
    n_paths: int
    seed: int
    chunk_size: int = 4096
    threads: int = 1


@dataclass(frozen=True)
class PathBundle:
    """A seeded ensemble of planar paths carried as per-step increments.

    killed_at[k] is the first position index (1..n_steps) outside the domain,
    or NOT_KILLED. Contributions of a killed path freeze at the exit step.
    """

    start: np.ndarray  # (2,)
    horizon: float
    n_steps: int
    n_paths: int
    increments: np.ndarray  # (K, N, 2)
    kind: str  # "free-brownian" | "bridge" | "deterministic"
    seed: int
    path_offset: int = 0
    endpoint: Optional[np.ndarray] = None  # bridge target, (2,) or (K, 2)
    killed_at: Optional[np.ndarray] = None  # (K,) int

    @property
    def dt(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        return np.linspace(0.0, self.horizon, self.n_steps + 1)

    def positions(self) -> np.ndarray:
        """Path positions, shape (K, N+1, 2)."""
        pos = np.empty((self.n_paths, self.n_steps + 1, 2))
        pos[:, 0, :] = self.start
        np.cumsum(self.increments, axis=1, out=pos[:, 1:, :])
        pos[:, 1:, :] += self.start
        return pos

    def step_mask(self) -> np.ndarray:
        """(K, N) bool: True for increments at or before the exit step."""
        mask = np.ones((self.n_paths, self.n_steps), dtype=bool)
        if self.killed_at is not None:
            killed = self.killed_at != NOT_KILLED
            if np.any(killed):
                steps = np.arange(self.n_steps)
                mask[killed] = steps[None, :] < self.killed_at[killed, None]
        return mask

    def alive(self) -> np.ndarray:
        if self.killed_at is None:
            return np.ones(self.n_paths, dtype=bool)
        return self.killed_at == NOT_KILLED


def _first_exit(positions: np.ndarray, domain: Optional[Domain]) -> Optional[np.ndarray]:
    if domain is None or domain.kind == "plane" or not domain.dirichlet:
        return None
    outside = domain.boundary_distance(positions) < 0  # (K, N+1)
    any_out = outside.any(axis=1)
    killed_at = np.full(positions.shape[0], NOT_KILLED, dtype=np.int64)
    killed_at[any_out] = outside[any_out].argmax(axis=1)
    return killed_at


def sample_brownian(x, horizon: float, n_steps: int, n_paths: int, seed: int,
                    domain: Optional[Domain] = None, path_offset: int = 0) -> PathBundle:
    """Free Brownian paths from x with N(0, (T/N) I2) increments and killing."""
    if horizon <= 0 or n_steps < 1 or n_paths < 1:
        raise ValueError("need horizon > 0, n_steps >= 1, n_paths >= 1")
    x = np.asarray(x, dtype=float)
    inc = path_increments(seed, path_offset, n_paths, n_steps,
                          np.sqrt(horizon / n_steps))
    bundle = PathBundle(x, float(horizon), n_steps, n_paths, inc, "free-brownian",
                        seed, path_offset)
    killed = _first_exit(bundle.positions(), domain)
    if killed is None:
        return bundle
    return PathBundle(x, float(horizon), n_steps, n_paths, inc, "free-brownian",
                      seed, path_offset, killed_at=killed)


def sample_bridge(x, y, horizon: float, n_steps: int, n_paths: int, seed: int,
                  domain: Optional[Domain] = None, path_offset: int = 0) -> PathBundle:
    """Brownian bridge paths pinned from x to y (single endpoint or one per path).

    Built from the free paths of the same (seed, path index) stream:
    B(t_j) = x + W_j - (t_j/T)(W_N - (y - x)), so the endpoint is hit exactly.
    """
    if horizon <= 0 or n_steps < 1 or n_paths < 1:
        raise ValueError("need horizon > 0, n_steps >= 1, n_paths >= 1")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dw = path_increments(seed, path_offset, n_paths, n_steps,
                         np.sqrt(horizon / n_steps))
    w_total = dw.sum(axis=1)  # (K, 2)
    drift = (y - (x + w_total)) / n_steps  # (K, 2) or broadcast of (2,)
    inc = dw + drift[:, None, :] if drift.ndim == 2 else dw + drift
    bundle = PathBundle(x, float(horizon), n_steps, n_paths, inc, "bridge", seed,
                        path_offset, endpoint=y)
    killed = _first_exit(bundle.positions(), domain)
    if killed is None:
        return bundle
    return PathBundle(x, float(horizon), n_steps, n_paths, inc, "bridge", seed,
                      path_offset, endpoint=y, killed_at=killed)


def bundle_from_positions(positions, horizon: float = 1.0, kind: str = "deterministic",
                          seed: int = 0) -> PathBundle:
    """Wrap explicit path positions (K, N+1, 2) as a bundle (deterministic substitutes)."""
    positions = np.asarray(positions, dtype=float)
    if positions.ndim == 2:
        positions = positions[None, ...]
    inc = np.diff(positions, axis=1)
    return PathBundle(positions[0, 0].copy(), float(horizon), positions.shape[1] - 1,
                      positions.shape[0], inc, kind, seed)


class LineIntegrals(NamedTuple):
    ito: np.ndarray  # (K,) left-point rule
    stratonovich: np.ndarray  # (K,) midpoint rule


def ito_line_integral(bundle: PathBundle, a) -> LineIntegrals:
    """Per-path stochastic line integrals of the potential along the paths.

    Left-point Ito sum sum_j A(w_j) . dw_j together with the midpoint
    (Stratonovich) variant; killed paths accumulate only up to their exit.
    """
    pos = bundle.positions()
    inc = bundle.increments
    mask = bundle.step_mask()
    a_left = a(pos[:, :-1, :])
    a_mid = a(0.5 * (pos[:, :-1, :] + pos[:, 1:, :]))
    ito = np.sum(np.sum(a_left * inc, axis=-1) * mask, axis=1)
    strat = np.sum(np.sum(a_mid * inc, axis=-1) * mask, axis=1)
    return LineIntegrals(ito, strat)


def levy_area(bundle: PathBundle) -> np.ndarray:
    """Discrete Ito sum sum_j [w2_j dw1_j - w1_j dw2_j], coordinates relative to the start.

    For a deterministic closed polygon substituted in, this equals -2 times the
    signed (counterclockwise-positive) enclosed area, the discrete Green's
    theorem with this orientation. Time reversal flips the sign.
    """
    pos = bundle.positions() - bundle.start
    inc = bundle.increments
    mask = bundle.step_mask()
    terms = pos[:, :-1, 1] * inc[:, :, 0] - pos[:, :-1, 0] * inc[:, :, 1]
    return np.sum(terms * mask, axis=1)


def dump_paths(bundle: PathBundle, fh, row_warning_threshold: int = 1_000_000) -> int:
    """Write paths as CSV rows path_id,step,t,x,y; warns above the row threshold."""
    rows = bundle.n_paths * (bundle.n_steps + 1)
    if rows > row_warning_threshold:
        warnings.warn(f"path dump emits {rows} rows (threshold {row_warning_threshold})")
    pos = bundle.positions()
    ts = bundle.times()
    fh.write("path_id,step,t,x,y\n")
    for k in range(bundle.n_paths):
        pid = bundle.path_offset + k
        for j in range(bundle.n_steps + 1):
            fh.write(f"{pid},{j},{ts[j]:.17g},{pos[k, j, 0]:.17g},{pos[k, j, 1]:.17g}\n")
    return rows
