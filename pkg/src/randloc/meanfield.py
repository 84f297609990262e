"""Mean-field kinetics of the localization-length distribution.

Steady state. The normalized distribution solves

    p(u) + p'(u) = K[p, p](u),      p(0) = 0,

where K is the pair-combination gain of ``udist.collision_kernel``. The
left side is inverted exactly per iteration with the integrating factor
e^u, giving the fixed-point map

    p_{k+1}(u) = int_0^u e^{-(u-s)} K[p_k, p_k](s) ds,

under-relaxed with a mixing weight and renormalized each sweep.

Transient. The time-dependent density follows the local balance

    (d_tau + d_u) p = g(tau) (K[p, p] - p),

advanced by first-order operator splitting: an exact semi-Lagrangian drift
by dtau (one grid cell per step when dtau = h), an Euler reaction step, and
a renormalization. The local form is the differential restatement of the
all-orders memory-integral identity for g(tau) p(u; tau); that equivalence
is never assumed here, it is measured by ``residual_resummed``.

Memory-integral residual. With the seed entering as an impulse at tau = 0
(weight gt0 = g0/(1-g0), survival factor e^-B with B(tau) = int_0^tau g
- ln(1-g0)), the resummed identity reads

    g(tau) p(u; tau) = e^-B(tau) [ gt0 (S_tau p0)(u)
        + int_0^tau ds g(s) (S_{tau-s} p(.; s))(u)
        + int_0^tau ds g(s)^2 e^B(s) (S_{tau-s} K[p,p](.; s))(u) ],

where S_d is the drift shift by d. At tau = 0 the bracket reduces to the
seed term and both sides equal g0 p0 identically. Truncating the underlying
event-chain hierarchy at depth m replaces the closed collision term by m
nested quadratures; the truncated mismatch must grow with tau and shrink
as more depths are included.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import ConvergenceError, MassLossError, StepInstabilityError
from .gamma import GammaTrajectory
from .udist import (
    UDensity,
    UGrid,
    collision_kernel,
    default_init_density,
    drift_shift,
    exponential_density,
    mass,
    normalize,
    point_mass,
)

__all__ = [
    "SolverConfig",
    "SteadyResidual",
    "TransientSolution",
    "ResummedResidual",
    "solve_steady",
    "residual_steady",
    "evolve_transient",
    "pm_recursion",
    "residual_resummed",
]

# e^u scaling inside the integrating-factor sweep bounds the usable domain.
_U_MAX_LIMIT = 500.0
_HIERARCHY_LIMIT = 3


@dataclass(frozen=True)
class SolverConfig:
    """Grid and iteration controls shared by the mean-field solvers.

    dtau defaults to the grid spacing h so that the transient drift is an
    exact one-cell shift; any integer multiple of h is accepted.
    tol_mass bounds the tolerated per-step mass defect before the transient
    renormalization; lost_mass_cap bounds the cumulative drift leakage past
    u_max (relative to unit mass) before the run aborts.
    """

    u_max: float = 30.0
    h: float = 0.01
    alpha: float = 0.5
    tol_fixed_point: float = 1e-8
    tol_mass: float = 1e-8
    max_iters: int = 500
    dtau: float | None = None
    m_max: int = 3
    lost_mass_cap: float = 1e-10

    def __post_init__(self) -> None:
        if self.u_max > _U_MAX_LIMIT:
            raise ValueError(f"u_max above {_U_MAX_LIMIT} overflows the e^u sweep")
        if not 0.0 < self.alpha <= 1.0:
            raise ValueError(f"mixing alpha must lie in (0, 1], got {self.alpha}")
        if self.tol_fixed_point <= 0.0 or self.tol_mass <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError(f"max_iters must be >= 1, got {self.max_iters}")
        if not 1 <= self.m_max <= _HIERARCHY_LIMIT:
            raise ValueError(f"m_max must lie in 1..{_HIERARCHY_LIMIT}, got {self.m_max}")
        if self.lost_mass_cap <= 0.0:
            raise ValueError("lost_mass_cap must be positive")
        self.grid  # validates u_max, h
        self.dtau_resolved  # validates dtau

    @property
    def grid(self) -> UGrid:
        return UGrid.from_spacing(self.u_max, self.h)

    @property
    def dtau_resolved(self) -> float:
        if self.dtau is None:
            return self.grid.h
        k = self.dtau / self.h
        if abs(k - round(k)) > 1e-9 or round(k) < 1:
            raise ValueError(
                f"dtau={self.dtau} must be a positive integer multiple of h={self.h}"
            )
        return float(self.dtau)


def _if_sweep(grid: UGrid, kvals: np.ndarray) -> np.ndarray:
    """Exact solution of p' + p = K with p(0) = 0 for piecewise-linear K."""
    h = grid.h
    a = float(np.exp(-h))
    # Series-stable forms; the naive expressions cancel to O(h^2).
    c1 = ((1.0 - a) - h * a) / h
    c2 = (h + np.expm1(-h)) / h
    d = c1 * kvals[:-1] + c2 * kvals[1:]
    u = grid.nodes()
    out = np.empty(grid.n_nodes)
    out[0] = 0.0
    out[1:] = np.exp(-u[1:]) * np.cumsum(d * np.exp(u[1:]))
    return out


def _resolve_init(grid: UGrid, init) -> UDensity:
    if isinstance(init, UDensity):
        if init.grid != grid:
            raise ValueError("initial guess lives on a different grid")
        return normalize(init)
    table = {
        "ue": default_init_density,
        "exp": exponential_density,
        "point": lambda g: point_mass(g, 1.0),
    }
    if init not in table:
        raise ValueError(f"unknown initial guess {init!r}; use one of {sorted(table)}")
    return table[init](grid)


def solve_steady(cfg: SolverConfig, init="ue") -> UDensity:
    """Fixed-point solve of the steady balance p + p' = K[p, p].

    init selects the starting guess: "ue" (u e^-u, default), "exp", "point",
    or any normalized UDensity on the config grid. Raises ConvergenceError
    if the L1 change between sweeps does not fall below tol_fixed_point
    within max_iters iterations.
    """
    grid = cfg.grid
    w = grid.quad_weights()
    p = _resolve_init(grid, init)
    change = np.inf
    for _ in range(cfg.max_iters):
        k = collision_kernel(p, p)
        swept = _if_sweep(grid, k.values)
        mixed = (1.0 - cfg.alpha) * p.values + cfg.alpha * swept
        total = float(w @ mixed)
        if not np.isfinite(total) or total <= 0.0:
            raise ConvergenceError(f"fixed-point sweep lost its mass (total={total})")
        mixed /= total
        change = float(w @ np.abs(mixed - p.values))
        p = UDensity(grid, mixed)
        if change < cfg.tol_fixed_point:
            return p
    raise ConvergenceError(
        f"steady solve stalled at L1 change {change:.3e} after {cfg.max_iters} iterations"
    )


class SteadyResidual(NamedTuple):
    sup: float
    l1: float


def residual_steady(p: UDensity) -> SteadyResidual:
    """Pointwise defect p + p' - K[p, p] of a candidate steady density.

    The derivative uses central differences in the interior and one-sided
    second-order stencils at the two boundary nodes. Returns the sup and the
    trapezoid L1 norm of the defect.
    """
    grid = p.grid
    k = collision_kernel(p, p)
    dp = np.gradient(p.values, grid.h, edge_order=2)
    r = p.values + dp - k.values
    return SteadyResidual(float(np.max(np.abs(r))), float(grid.quad_weights() @ np.abs(r)))


@dataclass(frozen=True, eq=False)
class TransientSolution:
    """Snapshots of the transient density at equally spaced times.

    densities has one row per snapshot; every row is renormalized to unit
    mass. max_renorm_drift is the largest per-step mass defect seen before
    renormalization, lost_mass the accumulated drift leakage past u_max.
    """

    grid: UGrid
    taus: np.ndarray
    densities: np.ndarray
    dtau: float
    max_renorm_drift: float = 0.0
    lost_mass: float = 0.0
    m_max: int = _HIERARCHY_LIMIT

    def __post_init__(self) -> None:
        taus = np.asarray(self.taus, dtype=float)
        dens = np.asarray(self.densities, dtype=float)
        if dens.shape != (taus.size, self.grid.n_nodes):
            raise ValueError("densities must have one row of node values per snapshot")
        object.__setattr__(self, "taus", taus)
        object.__setattr__(self, "densities", dens)

    def index_of(self, tau: float) -> int:
        i = int(np.argmin(np.abs(self.taus - tau)))
        if abs(self.taus[i] - tau) > 0.5 * self.dtau + 1e-12:
            raise ValueError(f"no stored snapshot near tau={tau}")
        return i

    def density_at(self, tau: float) -> UDensity:
        return UDensity(self.grid, self.densities[self.index_of(tau)])


def _g_of(g, tau: float) -> float:
    if isinstance(g, GammaTrajectory):
        return float(g.value_at(tau))
    return float(g)


def evolve_transient(
    p0: UDensity,
    g,
    tau_end: float,
    cfg: SolverConfig,
    *,
    snapshot_stride: int = 1,
) -> TransientSolution:
    """Advance (d_tau + d_u) p = g (K[p,p] - p) from p0 to tau_end.

    g is either a constant fraction or a GammaTrajectory covering
    [0, tau_end]; it is sampled at the start of each step. Every step
    performs the exact cell-shift drift, the Euler reaction update, and a
    renormalization. Snapshots are stored every ``snapshot_stride`` steps
    plus the final state.

    Raises StepInstabilityError when a step produces values below -1e-12
    (rounding-level negatives are clipped) or a pre-renormalization mass
    defect beyond cfg.tol_mass, and MassLossError when cumulative leakage
    past u_max exceeds cfg.lost_mass_cap.
    """
    grid = cfg.grid
    if p0.grid != grid:
        raise ValueError("p0 lives on a different grid than the config")
    if abs(mass(p0) - 1.0) > 1e-9:
        raise ValueError("p0 must be normalized")
    if snapshot_stride < 1:
        raise ValueError("snapshot_stride must be >= 1")
    if isinstance(g, GammaTrajectory) and g.tau_end < tau_end - 1e-12:
        raise ValueError("fraction trajectory does not cover [0, tau_end]")
    dtau = cfg.dtau_resolved
    n_steps = int(round(tau_end / dtau))
    if n_steps < 1 or abs(n_steps * dtau - tau_end) > 1e-9 * max(1.0, tau_end):
        raise ValueError(f"tau_end={tau_end} is not an integer multiple of dtau={dtau}")

    w = grid.quad_weights()
    vals = p0.values.copy()
    snaps = [vals.copy()]
    snap_taus = [0.0]
    cum_lost = 0.0
    max_drift = 0.0
    for step in range(n_steps):
        tau_here = step * dtau
        shifted, lost = drift_shift(UDensity(grid, vals), dtau, lost_warn=np.inf)
        cum_lost += abs(lost)
        if cum_lost > cfg.lost_mass_cap:
            raise MassLossError(
                f"cumulative drift leakage {cum_lost:.3e} exceeded cap "
                f"{cfg.lost_mass_cap:.3e} at tau={tau_here + dtau:.6g}"
            )
        gval = _g_of(g, tau_here)
        k = collision_kernel(shifted, shifted)
        vals = shifted.values + dtau * gval * (k.values - shifted.values)
        vmin = float(vals.min())
        if vmin < -1e-12:
            raise StepInstabilityError(
                f"negative density {vmin:.3e} at tau={tau_here + dtau:.6g}"
            )
        if vmin < 0.0:
            vals = np.maximum(vals, 0.0)
        total = float(w @ vals)
        drift = abs(total - 1.0)
        max_drift = max(max_drift, drift)
        if drift > cfg.tol_mass:
            raise StepInstabilityError(
                f"per-step mass defect {drift:.3e} exceeds tol_mass={cfg.tol_mass:.1e} "
                f"at tau={tau_here + dtau:.6g}"
            )
        vals = vals / total
        if (step + 1) % snapshot_stride == 0 or step + 1 == n_steps:
            snaps.append(vals.copy())
            snap_taus.append((step + 1) * dtau)
    return TransientSolution(
        grid=grid,
        taus=np.asarray(snap_taus),
        densities=np.asarray(snaps),
        dtau=dtau,
        max_renorm_drift=max_drift,
        lost_mass=cum_lost,
        m_max=cfg.m_max,
    )


def pm_recursion(sol: TransientSolution, m: int, times) -> UDensity:
    """Depth-m event-chain density at observation time times[0].

    times = (tau, tau_1, ..., tau_m) must be nonincreasing; ties are allowed.
    Depth 1 is the stored snapshot at tau_1 drifted forward by tau - tau_1;
    each further depth pairs the snapshot at tau_i with the previous chain
    through the collision deposition and drifts the result. For normalized
    snapshots the chain mass is the product of the input masses, i.e. 1 up
    to drift leakage.
    """
    times = [float(t) for t in times]
    if m < 1 or m > sol.m_max:
        raise ValueError(f"chain depth must lie in 1..{sol.m_max}, got {m}")
    if len(times) != m + 1:
        raise ValueError(f"need m+1={m + 1} times for depth {m}, got {len(times)}")
    if any(a < b - 1e-12 for a, b in zip(times, times[1:])):
        raise ValueError(f"times must be nonincreasing, got {times}")

    def chain(ts: list[float]) -> UDensity:
        inner = (
            sol.density_at(ts[1])
            if len(ts) == 2
            else collision_kernel(sol.density_at(ts[1]), chain(ts[1:]))
        )
        shifted, _ = drift_shift(inner, ts[0] - ts[1], lost_warn=np.inf)
        return shifted

    return chain(times)


@dataclass(frozen=True, eq=False)
class ResummedResidual:
    """L1(u) mismatch of the memory-integral identity per snapshot time.

    footnote[k] uses the closed two-event form of the collision term;
    truncated[m-1, k] uses the event-chain hierarchy cut at depth m. Both
    include the tau = 0 seed impulse, so the residual vanishes identically
    at tau = 0.
    """

    taus: np.ndarray
    footnote: np.ndarray
    truncated: np.ndarray


def residual_resummed(sol: TransientSolution, g, m_max: int | None = None) -> ResummedResidual:
    """Measure how well the transient snapshots satisfy the resummed identity.

    g must be the fraction input used for the evolution (constant or
    trajectory) with g(0) < 1. Snapshots must be dense enough for the time
    quadrature: spacing at most 10 * dtau.
    """
    m_max = sol.m_max if m_max is None else int(m_max)
    if not 1 <= m_max <= sol.m_max:
        raise ValueError(f"m_max must lie in 1..{sol.m_max}, got {m_max}")
    taus = sol.taus
    if taus.size < 2:
        raise ValueError("need at least two snapshots")
    spacing = np.diff(taus)
    if np.max(spacing) > 10.0 * sol.dtau + 1e-12:
        raise ValueError(
            f"snapshot spacing {np.max(spacing):.4g} too coarse for the time "
            f"quadrature (limit {10.0 * sol.dtau:.4g})"
        )
    g0 = _g_of(g, 0.0)
    if g0 >= 1.0:
        raise ValueError("resummed residual requires g(0) < 1")

    grid = sol.grid
    w = grid.quad_weights()
    nsnap = taus.size
    gvals = np.array([_g_of(g, t) for t in taus])
    if isinstance(g, GammaTrajectory):
        cum = np.interp(taus, g.taus, g.cumulative())
    else:
        cum = float(g) * taus
    exp_b = np.exp(cum) / (1.0 - g0)  # e^{B}, B = int g - ln(1-g0)
    exp_mb = np.exp(-cum) * (1.0 - g0)
    gt0 = g0 / (1.0 - g0)

    dens = sol.densities
    kern = np.empty_like(dens)
    for j in range(nsnap):
        kern[j] = collision_kernel(UDensity(grid, dens[j]), UDensity(grid, dens[j])).values

    def shift(vals: np.ndarray, delta: float) -> np.ndarray:
        out, _ = drift_shift(UDensity(grid, vals), delta, lost_warn=np.inf)
        return out.values

    def quad_weights_upto(k: int) -> np.ndarray:
        wq = np.zeros(k + 1)
        for j in range(k):
            half = 0.5 * (taus[j + 1] - taus[j])
            wq[j] += half
            wq[j + 1] += half
        return wq

    lhs = gvals[:, None] * dens

    footnote = np.zeros(nsnap)
    for k in range(nsnap):
        acc = gt0 * shift(dens[0], taus[k])
        wq = quad_weights_upto(k)
        for j in range(k + 1):
            d = taus[k] - taus[j]
            acc = acc + wq[j] * (
                gvals[j] * shift(dens[j], d)
                + gvals[j] ** 2 * exp_b[j] * shift(kern[j], d)
            )
        footnote[k] = float(w @ np.abs(lhs[k] - exp_mb[k] * acc))

    truncated = np.zeros((m_max, nsnap))
    r_prev = np.zeros_like(dens)
    for m in range(1, m_max + 1):
        # Pair each snapshot with the previous depth's chain sum once per time.
        kr = np.empty_like(dens)
        for j in range(nsnap):
            kr[j] = collision_kernel(
                UDensity(grid, dens[j]), UDensity(grid, r_prev[j])
            ).values
        r_m = np.empty_like(dens)
        for k in range(nsnap):
            acc = gt0 * shift(dens[0], taus[k])
            wq = quad_weights_upto(k)
            for j in range(k + 1):
                acc = acc + wq[j] * gvals[j] * shift(dens[j] + kr[j], taus[k] - taus[j])
            r_m[k] = acc
            truncated[m - 1, k] = float(w @ np.abs(lhs[k] - exp_mb[k] * acc))
        r_prev = r_m
    return ResummedResidual(taus=taus.copy(), footnote=footnote, truncated=truncated)
