"""Synchronization policies: semaphore layouts, wait rules, and tile orders.

A policy answers three questions about a producer/consumer kernel pair:

* how many semaphores the dependency needs (`sem_count`),
* which semaphore a finished producer tile increments (`post_target`),
* which semaphore, and up to what value, a consumer tile must observe
  before a given k-step (`consumer_wait`).

Split-k grids (z > 1) post one increment per z-slice to the slice's tile
semaphore, and every expected value is scaled by the producer's z extent, so
a tile only counts as ready once all of its partial-sum slices are done.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Union

from .errors import ConfigError
from .gpu import Dim3, TileCoord


@dataclass(frozen=True)
class TileSync:
    """One semaphore per producer tile; the consumer waits every k-step."""


@dataclass(frozen=True)
class RowSync:
    """One semaphore per producer row; the consumer waits once, at k-step 0."""


@dataclass(frozen=True)
class StridedSync:
    """Producer tiles whose columns are `stride` apart share one semaphore."""

    stride: int


@dataclass(frozen=True)
class Conv2DTileSync:
    """Tile sync through an implicit-GeMM view of a KxK convolution.

    The consumer's reduction loop is `kk` = K*K times longer than the
    producer's column-tile count, so only every kk-th k-step starts a new
    producer tile and needs a wait.
    """

    kk: int


SyncPolicy = Union[TileSync, RowSync, StridedSync, Conv2DTileSync]


@dataclass(frozen=True)
class RowMajor:
    """Tiles in lexicographic (x, y, z) order: whole rows complete first."""


@dataclass(frozen=True)
class StridedRowMajor:
    """Row-major over columns regrouped so columns `stride` apart go first.

    Column y is visited at position (y % stride) * (cols / stride) + y // stride
    within its row, i.e. group 0 = columns {0, stride, 2*stride, ...}, then
    group 1, and so on.
    """

    stride: int


TileOrder = Union[RowMajor, StridedRowMajor]


@dataclass(frozen=True)
class WaitSpec:
    """A single semaphore observation: block until sem[sem_index] >= expected."""

    sem_index: int
    expected: int


class SemaphoreArray:
    """Monotone counters, all starting at zero."""

    def __init__(self, count: int):
        self.values = [0] * count

    def post(self, index: int) -> int:
        """Increment one counter and return its new value."""
        self.values[index] += 1
        return self.values[index]

    def satisfied(self, spec: WaitSpec) -> bool:
        return self.values[spec.sem_index] >= spec.expected

    def __len__(self) -> int:
        return len(self.values)


def check_policy(policy: SyncPolicy, producer_grid: Dim3) -> None:
    """Raise ConfigError if the policy's divisibility constraints fail."""
    if isinstance(policy, StridedSync):
        if policy.stride < 1:
            raise ConfigError("stride must be >= 1")
        if producer_grid.y % policy.stride != 0:
            raise ConfigError(
                f"stride {policy.stride} does not divide producer "
                f"columns {producer_grid.y}")
    elif isinstance(policy, Conv2DTileSync) and policy.kk < 1:
        raise ConfigError("kk must be >= 1")


def sem_count(policy: SyncPolicy, producer_grid: Dim3) -> int:
    """Number of semaphores a dependency under `policy` allocates."""
    check_policy(policy, producer_grid)
    match policy:
        case TileSync() | Conv2DTileSync():
            return producer_grid.x * producer_grid.y
        case RowSync():
            return producer_grid.x
        case StridedSync(stride=s):
            return producer_grid.x * s
    raise TypeError(f"unknown policy {policy!r}")


def post_target(policy: SyncPolicy, tile: TileCoord, producer_grid: Dim3) -> int:
    """Semaphore a producer tile increments on completion.

    All z-slices of a tile post to the same index; each slice adds 1.
    """
    if not tile.within(producer_grid):
        raise ValueError(f"tile {tile} outside producer grid {producer_grid}")
    match policy:
        case TileSync() | Conv2DTileSync():
            return tile.x * producer_grid.y + tile.y
        case RowSync():
            return tile.x
        case StridedSync(stride=s):
            return tile.x * s + tile.y % s
    raise TypeError(f"unknown policy {policy!r}")


def consumer_wait(policy: SyncPolicy, consumer_tile: TileCoord, k_step: int,
                  producer_grid: Dim3, producer_z: int) -> WaitSpec | None:
    """Wait a consumer tile issues before k-step `k_step`, or None for no wait."""
    row, col = consumer_tile.x, consumer_tile.y
    match policy:
        case TileSync():
            return WaitSpec(row * producer_grid.y + k_step, producer_z)
        case RowSync():
            if k_step == 0:
                return WaitSpec(row, producer_grid.y * producer_z)
            return None
        case StridedSync(stride=s):
            if k_step == 0:
                expected = (producer_grid.y // s) * producer_z
                return WaitSpec(row * s + col % s, expected)
            return None
        case Conv2DTileSync(kk=kk):
            if k_step % kk == 0:
                return WaitSpec(row * producer_grid.y + k_step // kk,
                                producer_z)
            return None
    raise TypeError(f"unknown policy {policy!r}")


def wait_steps(policy: SyncPolicy, k_steps: int) -> tuple[int, ...]:
    """The k-steps at which `policy` issues a wait, in increasing order."""
    match policy:
        case TileSync():
            return tuple(range(k_steps))
        case RowSync() | StridedSync():
            return (0,)
        case Conv2DTileSync(kk=kk):
            return tuple(range(0, k_steps, kk))
    raise TypeError(f"unknown policy {policy!r}")


def order_tile(order: TileOrder, grid: Dim3, counter: int) -> TileCoord:
    """Tile computed by the `counter`-th draw from a stage's global counter.

    RowMajor walks coordinates in lexicographic (x, y, z) order, so a row's
    tiles (and each tile's z-slices) are drawn consecutively. StridedRowMajor
    walks the same order over the regrouped column axis.
    """
    if not 0 <= counter < grid.total():
        raise ValueError(f"counter {counter} outside grid {grid}")
    z = counter % grid.z
    rest = counter // grid.z
    yy = rest % grid.y
    x = rest // grid.y
    match order:
        case RowMajor():
            return TileCoord(x, yy, z)
        case StridedRowMajor(stride=s):
            if grid.y % s != 0:
                raise ConfigError(
                    f"stride {s} does not divide grid columns {grid.y}")
            group_len = grid.y // s
            # yy is the position in the regrouped column walk; invert it.
            y = (yy // group_len) + (yy % group_len) * s
            return TileCoord(x, y, z)
    raise TypeError(f"unknown order {order!r}")
