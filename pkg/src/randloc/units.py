"""Mapping between laboratory quantities and the dimensionless variables.

The effective pairing rate is Gamma = mu * number_density * box_volume.
Dimensionless variables: u = xi^2 * Gamma / (2 D) for a squared localization
length xi^2, and tau = Gamma * t for time. The factor 2 means u = 1
corresponds to the spreading scale xi_char^2 = 2 D / Gamma, i.e. the squared
width gained by free diffusion over one mean waiting time between pairings.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["UnitsMap", "RegimeReport", "units_convert", "validate_regime"]

_DIRECTIONS = ("xi2_to_u", "u_to_xi2", "t_to_tau", "tau_to_t")


@dataclass(frozen=True)
class UnitsMap:
    """Physical inputs fixing the dimensionless map.

    mu: rate constant of the pairwise proximity measurements.
    number_density: particle number per volume (N/V).
    box_volume: acceptance volume of a single proximity measurement.
    diffusion: single-particle diffusion constant D.
    """

    mu: float
    number_density: float
    box_volume: float
    diffusion: float

    def __post_init__(self) -> None:
        for name in ("mu", "number_density", "box_volume", "diffusion"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0.0:
                raise ValueError(f"{name} must be positive and finite, got {v}")

    @property
    def gamma_rate(self) -> float:
        """Effective pairing rate Gamma = mu * (N/V) * box_volume."""
        return self.mu * self.number_density * self.box_volume


def units_convert(units: UnitsMap, value: float, direction: str) -> float:
    """Convert between lab and dimensionless variables.

    direction is one of 'xi2_to_u', 'u_to_xi2', 't_to_tau', 'tau_to_t'.
    Round trips invert to full double precision.
    """
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
    gamma = units.gamma_rate
    if direction == "xi2_to_u":
        return value * gamma / (2.0 * units.diffusion)
    if direction == "u_to_xi2":
        return value * (2.0 * units.diffusion) / gamma
    if direction == "t_to_tau":
        return value * gamma
    return value / gamma


@dataclass(frozen=True)
class RegimeReport:
    """Advisory check of the narrow-measurement regime."""

    ratio: float
    threshold: float
    status: str  # "pass" or "warn"

    @property
    def ok(self) -> bool:
        return self.status == "pass"


def validate_regime(
    units: UnitsMap,
    box_diameter: float,
    typical_xi2: float,
    threshold: float = 0.1,
) -> RegimeReport:
    """Check that the measurement box is small against the localization length.

    The mean-field kinetics assumes box_diameter << typical localization
    length. An exact tie with the threshold counts as a warning. Advisory
    only; nothing is raised.
    """
    if box_diameter <= 0.0 or typical_xi2 <= 0.0:
        raise ValueError("box_diameter and typical_xi2 must be positive")
    if threshold <= 0.0:
        raise ValueError(f"threshold must be positive, got {threshold}")
    ratio = box_diameter / float(np.sqrt(typical_xi2))
    status = "pass" if ratio < threshold else "warn"
    return RegimeReport(ratio=ratio, threshold=threshold, status=status)
