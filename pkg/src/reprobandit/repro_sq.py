"""Reproducible mean estimation by randomly offset grid rounding.

The empirical mean is snapped to the nearest point of ``u + m * tau`` where the
offset ``u`` comes from the shared randomness. Two executions whose empirical
means are close land on the same grid point unless a grid boundary falls
between them, which happens with probability ``|gap| / tau``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InsufficientSamples, InvalidRegime, OutOfRange
from .shared_randomness import Purpose, SharedSeed, SubstreamKey

HOEFFDING_C0 = 8.0
# variance proxy of a [0, 1]-valued variable; C0 is calibrated against it
UNIT_INTERVAL_SCALE = 0.25
DELTA_FLOOR = 1e-12


@dataclass(frozen=True)
class SqRequest:
    """Accuracy ``tau``, reproducibility budget ``rho`` and failure probability ``delta``.

    ``scale`` is the subgaussian variance proxy of the samples; the default
    matches values in ``[0, 1]``.
    """

    tau: float
    rho: float
    delta: float
    key: SubstreamKey = SubstreamKey(Purpose.GRID_OFFSET)
    scale: float = UNIT_INTERVAL_SCALE

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must lie in (0, 1], got {self.tau}")
        if not 0.0 < self.rho <= 1.0:
            raise ValueError(f"rho must lie in (0, 1], got {self.rho}")
        if not 0.0 < self.delta:
            raise ValueError("delta must be positive")
        if self.delta >= self.rho:
            raise InvalidRegime(f"delta={self.delta} must be below rho={self.rho}")
        if self.scale < 0.0:
            raise ValueError("scale must be nonnegative")


def required_samples(req: SqRequest) -> int:
    """``ceil(C0 * (scale / 0.25) * ln(1/delta) / (tau^2 rho^2))``, at least 1."""
    delta = max(req.delta, DELTA_FLOOR)
    n = HOEFFDING_C0 * (req.scale / UNIT_INTERVAL_SCALE) * math.log(1.0 / delta) / (req.tau**2 * req.rho**2)
    return max(1, math.ceil(n - 1e-9))


def concentration_radius(req: SqRequest, n: int | None = None) -> float:
    """Two-sided subgaussian radius at confidence ``1 - delta`` for ``n`` samples."""
    n = required_samples(req) if n is None else n
    return math.sqrt(2.0 * req.scale * math.log(2.0 / max(req.delta, DELTA_FLOOR)) / n)


def round_to_grid(value, offset, spacing: float):
    """Nearest point of ``offset + m * spacing``; exact midpoints go down.

    Works elementwise on arrays.
    """
    m = np.ceil((np.asarray(value) - offset) / spacing - 0.5)
    out = offset + m * spacing
    return float(out) if np.ndim(out) == 0 else out


def grid_offset(seed: SharedSeed, req: SqRequest) -> float:
    return seed.uniform(req.key, 0.0, req.tau)


def repro_mean_from_stats(mean: float, count: int, req: SqRequest, seed: SharedSeed, strict: bool = True) -> float:
    """Round an already computed empirical mean of ``count`` samples."""
    if strict and count < required_samples(req):
        raise InsufficientSamples(f"{count} samples < {required_samples(req)} required")
    return round_to_grid(mean, grid_offset(seed, req), req.tau)


def repro_mean(samples, req: SqRequest, seed: SharedSeed, strict: bool = True) -> float:
    x = np.asarray(samples, dtype=float)
    if x.size == 0:
        raise InsufficientSamples("no samples")
    return repro_mean_from_stats(float(x.mean()), x.size, req, seed, strict)


def grid_crossing_probability(gamma: float, spacing: float) -> float:
    """Chance that a uniformly offset grid separates two points ``gamma`` apart."""
    if spacing <= 0.0:
        raise ValueError("spacing must be positive")
    if gamma < 0.0 or gamma > spacing:
        raise OutOfRange(f"gamma={gamma} outside [0, {spacing}]")
    return gamma / spacing
