"""Grids, thread blocks, waves, occupancy and utilization arithmetic.

Everything here is exact: wave counts are `fractions.Fraction`, so results
like 192 blocks / 160 slots compare equal to 6/5 rather than to a float.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple


@dataclass(frozen=True)
class Dim3:
    """A 3-d grid extent; every component is at least 1."""

    x: int
    y: int
    z: int = 1

    def __post_init__(self) -> None:
        if min(self.x, self.y, self.z) < 1:
            raise ValueError(f"grid dimensions must be >= 1, got {self}")

    def total(self) -> int:
        return self.x * self.y * self.z

    def __str__(self) -> str:
        return f"{self.x}x{self.y}x{self.z}"


@dataclass(frozen=True)
class TileCoord:
    """Coordinate of one tile: x = row, y = column, z = reduction slice."""

    x: int
    y: int
    z: int = 0

    def within(self, grid: Dim3) -> bool:
        return (0 <= self.x < grid.x and 0 <= self.y < grid.y
                and 0 <= self.z < grid.z)


@dataclass(frozen=True)
class GpuConfig:
    """The device: just a count of SMs. Occupancy is a per-kernel property."""

    num_sms: int

    def __post_init__(self) -> None:
        if self.num_sms < 1:
            raise ValueError("num_sms must be >= 1")


class WaveCount(NamedTuple):
    fractional: Fraction
    ceil: int


def linearize(grid: Dim3, c: TileCoord) -> int:
    """Hardware dispatch index of a block: x varies fastest, then y, then z."""
    if not c.within(grid):
        raise ValueError(f"coordinate {c} outside grid {grid}")
    return c.x + grid.x * (c.y + grid.y * c.z)


def tbs_per_wave(cfg: GpuConfig, occupancy: int) -> int:
    """Thread blocks resident per wave: occupancy blocks on each SM."""
    if occupancy < 1:
        raise ValueError("occupancy must be >= 1")
    return occupancy * cfg.num_sms


def waves(tbs: int, cfg: GpuConfig, occupancy: int) -> WaveCount:
    """Fractional and whole waves needed to run `tbs` thread blocks."""
    if tbs < 1:
        raise ValueError("tbs must be >= 1")
    frac = Fraction(tbs, tbs_per_wave(cfg, occupancy))
    return WaveCount(frac, math.ceil(frac))


def utilization(tbs: int, cfg: GpuConfig, occupancy: int) -> Fraction:
    """Percentage of wave slots doing work over the whole-wave footprint.

    100% exactly when the block count is a multiple of the per-wave capacity.
    """
    per_wave = tbs_per_wave(cfg, occupancy)
    ceil_waves = waves(tbs, cfg, occupancy).ceil
    return Fraction(100 * tbs, ceil_waves * per_wave)
