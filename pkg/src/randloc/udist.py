"""Distributions of the dimensionless squared localization length.

The state variable u lives on a uniform grid [0, u_max]. Densities are
node-valued and integrated with trapezoid weights; every mass statement in
this module uses the same weight vector, so conservation checks are exact
at rounding level rather than merely consistent to O(h^2).

Core physics operations:

* ``combine``: harmonic pairing u1*u2/(u1+u2). A proximity measurement on a
  pair of localized particles contracts both onto the harmonic combination
  of their squared widths (inverse variances add).
* ``collision_kernel``: bilinear deposition of all node pairs onto the bin
  of their combined value. This is the gain term of the pairing dynamics.
* ``drift_shift``: free spreading between measurements, a rigid translation
  of the density toward larger u.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = [
    "UGrid",
    "UDensity",
    "combine",
    "collision_kernel",
    "drift_shift",
    "laplace",
    "mass",
    "moment",
    "normalize",
    "pair_average",
    "point_mass",
    "exponential_density",
    "default_init_density",
]


@dataclass(frozen=True)
class UGrid:
    """Uniform grid over u in [0, u_max] with nodes u_i = i * h."""

    u_max: float
    n_bins: int

    def __post_init__(self) -> None:
        if not np.isfinite(self.u_max) or self.u_max <= 0:
            raise ValueError(f"u_max must be positive and finite, got {self.u_max}")
        if self.n_bins < 2:
            raise ValueError(f"need at least 2 bins, got {self.n_bins}")

    @classmethod
    def from_spacing(cls, u_max: float, h: float) -> "UGrid":
        if h <= 0:
            raise ValueError(f"spacing must be positive, got {h}")
        n = int(round(u_max / h))
        if n < 2 or abs(n * h - u_max) > 1e-9 * u_max:
            raise ValueError(f"u_max={u_max} is not an integer multiple of h={h}")
        return cls(float(u_max), n)

    @property
    def h(self) -> float:
        return self.u_max / self.n_bins

    @property
    def n_nodes(self) -> int:
        return self.n_bins + 1

    def nodes(self) -> np.ndarray:
        return _grid_tables(self.u_max, self.n_bins)[0]

    def quad_weights(self) -> np.ndarray:
        """Trapezoid weights: h at interior nodes, h/2 at the two ends."""
        return _grid_tables(self.u_max, self.n_bins)[1]


@dataclass(frozen=True, eq=False)
class UDensity:
    """Nonnegative node values of a density over u on a fixed grid."""

    grid: UGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.n_nodes,):
            raise ValueError(
                f"expected {self.grid.n_nodes} node values, got shape {vals.shape}"
            )
        if not np.all(np.isfinite(vals)):
            raise ValueError("density values must be finite")
        if np.any(vals < 0.0):
            raise ValueError("density values must be nonnegative")
        vals = vals.copy()
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)


@lru_cache(maxsize=8)
def _grid_tables(u_max: float, n_bins: int):
    nodes = np.linspace(0.0, u_max, n_bins + 1)
    w = np.full(n_bins + 1, u_max / n_bins)
    w[0] *= 0.5
    w[-1] *= 0.5
    nodes.setflags(write=False)
    w.setflags(write=False)
    return nodes, w


@lru_cache(maxsize=8)
def _deposit_tables(u_max: float, n_bins: int):
    """Pair-binning tables: for every node pair, the flat target bin of the
    combined value and the linear split fraction toward the upper node.

    The (0, 0) pair is pinned to u = 0, the limit of combine along any path.
    Cached per grid; the largest supported grids cost a few hundred MB.
    """
    nodes = _grid_tables(u_max, n_bins)[0]
    s = nodes[:, None] + nodes[None, :]
    c = np.multiply.outer(nodes, nodes)
    np.divide(c, s, out=c, where=s > 0.0)
    c[0, 0] = 0.0
    f = c.ravel()
    f *= n_bins / u_max
    idx = np.floor(f).astype(np.int64)
    frac = f - idx
    # combine <= min(u1, u2) <= u_max, so idx <= n_bins; fold the exact-edge
    # case onto the last node.
    over = idx >= n_bins
    if np.any(over):
        idx[over] = n_bins - 1
        frac[over] = 1.0
    om_frac = 1.0 - frac
    for arr in (idx, frac, om_frac):
        arr.setflags(write=False)
    return idx, frac, om_frac


def combine(u1, u2):
    """Harmonic combination u1*u2/(u1+u2) of squared localization lengths.

    Equals adding the inverse variances of two localized wave packets.
    Supports the extended value combine(u, inf) = u. Raises on negative
    input and on the undefined (0, 0) pair.
    """
    a = np.asarray(u1, dtype=float)
    b = np.asarray(u2, dtype=float)
    if np.any(a < 0.0) or np.any(b < 0.0):
        raise ValueError("combine requires nonnegative arguments")
    if np.any((a == 0.0) & (b == 0.0)):
        raise ValueError("combine(0, 0) is undefined")
    with np.errstate(invalid="ignore", divide="ignore"):
        raw = a * b / (a + b)
    out = np.where(np.isinf(a), b, np.where(np.isinf(b), a, raw))
    if out.ndim == 0:
        return float(out)
    return out


def collision_kernel(p: UDensity, q: UDensity) -> UDensity:
    """Distribution of combine(X, Y) for independent X ~ p, Y ~ q.

    Every node pair deposits its trapezoid-weighted product mass into the
    bin containing the combined value, split linearly between the two
    adjacent nodes. Deposition is mass-exact: the output trapezoid mass
    equals mass(p) * mass(q) up to rounding. Summation order is fixed, so
    results are bit-reproducible.
    """
    if p.grid != q.grid:
        raise ValueError("collision_kernel requires both densities on the same grid")
    g = p.grid
    idx, frac, om_frac = _deposit_tables(g.u_max, g.n_bins)
    w = g.quad_weights()
    wflat = np.multiply.outer(w * p.values, w * q.values).ravel()
    n = g.n_nodes
    dep = np.bincount(idx, weights=wflat * om_frac, minlength=n)
    hi = np.bincount(idx, weights=wflat * frac, minlength=n)
    dep[1:] += hi[: n - 1]
    return UDensity(g, dep / w)


def pair_average(p: UDensity, q: UDensity) -> float:
    """Expectation of combine(X, Y) under X ~ p, Y ~ q (same grid).

    Uses exactly the combined values seen by collision_kernel, so the two
    agree at rounding level.
    """
    if p.grid != q.grid:
        raise ValueError("pair_average requires both densities on the same grid")
    g = p.grid
    idx, frac, _ = _deposit_tables(g.u_max, g.n_bins)
    w = g.quad_weights()
    wflat = np.multiply.outer(w * p.values, w * q.values).ravel()
    return float(g.h * (wflat @ (idx + frac)))


def drift_shift(
    p: UDensity, delta: float, *, lost_warn: float = 1e-8
) -> tuple[UDensity, float]:
    """Translate the density by +delta in u (free spreading for a time delta).

    Semi-Lagrangian: out(u) = p(u - delta), zero below u = delta. A shift by
    an integer number of cells is exact; otherwise nodes are filled by linear
    interpolation. Returns (shifted density, lost mass), where the lost mass
    is the trapezoid-mass defect, dominated by tail leakage past u_max. A
    RuntimeWarning is emitted when the relative loss exceeds ``lost_warn``.
    """
    if not np.isfinite(delta) or delta < 0.0:
        raise ValueError(f"shift must be nonnegative and finite, got {delta}")
    g = p.grid
    n = g.n_bins
    steps = delta / g.h
    m = int(round(steps))
    out = np.zeros(g.n_nodes)
    if abs(steps - m) <= 1e-9 * max(1.0, steps):
        if m <= n:
            out[m:] = p.values[: g.n_nodes - m]
    else:
        out = np.interp(g.nodes() - delta, g.nodes(), p.values, left=0.0, right=0.0)
        np.maximum(out, 0.0, out=out)
    mass_in = mass(p)
    shifted = UDensity(g, out)
    lost = mass_in - mass(shifted)
    if mass_in > 0.0 and lost > lost_warn * mass_in:
        warnings.warn(
            f"drift_shift by {delta} lost mass {lost:.3e} past u_max={g.u_max}",
            RuntimeWarning,
            stacklevel=2,
        )
    return shifted, lost


def mass(p: UDensity) -> float:
    """Trapezoid mass of the density over [0, u_max]."""
    return float(p.grid.quad_weights() @ p.values)


def moment(p: UDensity, k: int) -> float:
    """k-th raw moment, k in {0, 1, 2}."""
    if k not in (0, 1, 2):
        raise ValueError(f"moment order must be 0, 1 or 2, got {k}")
    g = p.grid
    return float(p.grid.quad_weights() @ (p.values * g.nodes() ** k))


def laplace(p: UDensity, kappa: float) -> float:
    """Laplace transform integral of p(u) * exp(-kappa*u) du, kappa >= 0."""
    if not np.isfinite(kappa) or kappa < 0.0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    g = p.grid
    return float(g.quad_weights() @ (p.values * np.exp(-kappa * g.nodes())))


def normalize(p: UDensity) -> UDensity:
    """Rescale to unit trapezoid mass. Raises on zero total mass."""
    m = mass(p)
    if m <= 0.0 or not np.isfinite(m):
        raise ValueError(f"cannot normalize density with mass {m}")
    return UDensity(p.grid, p.values / m)


def point_mass(grid: UGrid, u0: float) -> UDensity:
    """Unit point mass at u0, split onto the two adjacent nodes."""
    if not 0.0 <= u0 <= grid.u_max:
        raise ValueError(f"u0={u0} outside [0, {grid.u_max}]")
    w = grid.quad_weights()
    f = u0 / grid.h
    i = min(int(f), grid.n_bins - 1)
    t = f - i
    dep = np.zeros(grid.n_nodes)
    dep[i] = 1.0 - t
    dep[i + 1] = t
    return UDensity(grid, dep / w)


def exponential_density(grid: UGrid) -> UDensity:
    """Normalized exp(-u) profile on the grid."""
    return normalize(UDensity(grid, np.exp(-grid.nodes())))


def default_init_density(grid: UGrid) -> UDensity:
    """Normalized u * exp(-u) profile, the default transient seed shape."""
    u = grid.nodes()
    return normalize(UDensity(grid, u * np.exp(-u)))
