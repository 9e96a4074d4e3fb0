"""
Synthetic fault distributions: a uniform noise carpet overlaid with Gumbel-shaped peaks.

Every cycle carries ``carpet_height`` faults. Each peak adds a rounded Gumbel
bump whose total mass is ``height_factor`` times the carpet's total mass and
whose central 99% spans ``width_fraction`` of the range. Locations and widths
scale with ``steps``, so the same seed at twice the steps gives twice the faults.
"""

import logging
import math
from dataclasses import dataclass, asdict, replace
from typing import Iterable, List, Tuple

import numpy as np

from distribution_core import FaultDistribution

logger = logging.getLogger(__name__)

GENERATOR_ID = "PCG64"
SEED_MASK = (1 << 64) - 1

# Gumbel quantiles bounding the central 99% of a peak's mass
_Z_LOW = -math.log(-math.log(0.005))
_Z_HIGH = -math.log(-math.log(0.995))
CENTRAL_MASS_WIDTH = _Z_HIGH - _Z_LOW


class SynthParamsError(ValueError):
    """Raised for invalid generator parameters."""


@dataclass(frozen=True)
class SynthParams:
    steps: int = 10000
    carpet_height: int = 4
    peak_count_mu: float = 2.5
    peak_count_sigma: float = 0.8
    peak_count_range: Tuple[int, int] = (2, 100)
    height_factor_range: Tuple[float, float] = (2.0, 5.0)
    width_fraction_range: Tuple[float, float] = (0.02, 0.10)
    seed: int = 0

    def __post_init__(self):
        if self.steps < 100:
            raise SynthParamsError(f"steps must be at least 100, got {self.steps}")
        if self.carpet_height < 1:
            raise SynthParamsError(f"carpet_height must be positive, got {self.carpet_height}")
        if self.peak_count_sigma < 0:
            raise SynthParamsError(f"peak_count_sigma must be non-negative, got {self.peak_count_sigma}")
        for name in ('peak_count_range', 'height_factor_range', 'width_fraction_range'):
            low, high = getattr(self, name)
            if low > high or low < 0:
                raise SynthParamsError(f"{name} must be a non-empty, non-negative range, got {(low, high)}")
        if self.width_fraction_range[0] <= 0:
            raise SynthParamsError("width_fraction_range must be strictly positive")

    @classmethod
    def from_config(cls, config, **overrides) -> "SynthParams":
        values = {}
        for name in cls.__dataclass_fields__:
            value = config.get(f'synthgen.{name}')
            if value is not None:
                values[name] = tuple(value) if isinstance(value, list) else value
        values.update({k: (tuple(v) if isinstance(v, list) else v)
                       for k, v in overrides.items() if v is not None})
        return cls(**values)


def gumbel_shape(z: np.ndarray) -> np.ndarray:
    """Gumbel pdf divided by its maximum (attained at z = 0)."""
    with np.errstate(over='ignore'):
        return np.exp(1.0 - z - np.exp(-z))


def draw_peak_count(p: SynthParams, rng: np.random.Generator) -> int:
    low, high = p.peak_count_range
    drawn = int(round(rng.lognormal(p.peak_count_mu, p.peak_count_sigma)))
    return min(max(drawn, low), high)


def generate(p: SynthParams) -> FaultDistribution:
    """Deterministic distribution for the given parameters and seed."""
    rng = np.random.default_rng(p.seed & SEED_MASK)
    t = np.arange(p.steps, dtype=float)
    peaks = np.zeros(p.steps, dtype=float)

    count = draw_peak_count(p, rng)
    for _ in range(count):
        location = rng.uniform(0, p.steps)
        mass = rng.uniform(*p.height_factor_range) * p.carpet_height * p.steps
        width = rng.uniform(*p.width_fraction_range) * p.steps
        scale = width / CENTRAL_MASS_WIDTH
        # gumbel_shape integrates to e * scale
        amplitude = mass / (math.e * scale)
        peaks += amplitude * gumbel_shape((t - location) / scale)

    counts = p.carpet_height + np.floor(peaks + 0.5).astype(np.int64)
    logger.debug(f"Generated {count} peaks over {p.steps} steps (seed {p.seed})")
    return FaultDistribution(0, p.steps, tuple((i, int(c)) for i, c in enumerate(counts)))


def format_provenance(p: SynthParams) -> List[str]:
    """Header comment lines recording every parameter, the seed and the generator."""
    fields = asdict(p)
    rendered = " ".join(
        f"{k}={','.join(str(x) for x in v) if isinstance(v, (list, tuple)) else v}"
        for k, v in fields.items()
    )
    return [f"synthgen rng={GENERATOR_ID} {rendered}"]


def generate_batch(p: SynthParams, seeds: Iterable[int]) -> List[FaultDistribution]:
    return [generate(replace(p, seed=seed)) for seed in seeds]
