"""Scenario generators: table-driven presets and seeded random scenarios.

The preset tables pin grid sizes and occupancy directly from the published
configurations of the modeled workloads (two dependent MLP GeMMs at hidden
size 12288 on an 80-SM device, paired 128-channel 3x3 convolutions, and the
three-kernel attention block). Derivation helpers from problem shapes exist,
but the presets are the authoritative inputs.

Both kernels of a preset pair use the same k-step count (one inner iteration
per producer column tile), so paired blocks have equal durations under unit
costs and wave-generation counts line up with the whole-wave arithmetic.
"""

from __future__ import annotations

import random
from dataclasses import dataclass

from .engine import (CostModel, Dependency, Mode, Scenario, SimOptions,
                     Stage)
from .errors import ConfigError
from .gpu import Dim3, GpuConfig
from .policies import (Conv2DTileSync, RowMajor, RowSync, StridedRowMajor,
                       StridedSync, SyncPolicy, TileSync)

V100_SMS = 80


# -- MLP: two dependent GeMMs -------------------------------------------------

@dataclass(frozen=True)
class MlpParams:
    """Grids and occupancy for the two chained GeMMs at one batch size."""

    batch: str
    grid1: Dim3
    grid2: Dim3
    occupancy: int
    num_sms: int = V100_SMS


# Occupancy is 3 blocks/SM for the small-batch tile shapes (240 blocks per
# wave) and 2 for the rest (160 per wave), matching the per-wave capacities
# the grids imply.
MLP_PRESETS: dict[str, MlpParams] = {
    "1-64": MlpParams("1-64", Dim3(1, 24, 3), Dim3(1, 48, 1), 3),
    "128": MlpParams("128", Dim3(1, 48, 2), Dim3(1, 96, 1), 3),
    "256": MlpParams("256", Dim3(1, 96, 2), Dim3(1, 96, 1), 2),
    "512": MlpParams("512", Dim3(2, 48, 2), Dim3(2, 96, 1), 2),
    "1024": MlpParams("1024", Dim3(4, 48, 1), Dim3(4, 96, 1), 2),
    "2048": MlpParams("2048", Dim3(8, 48, 1), Dim3(8, 96, 1), 2),
}


def mlp_scenario(params: MlpParams, policy: SyncPolicy = RowSync(),
                 mode: Mode = Mode.FINE, options: SimOptions = SimOptions(),
                 cost: CostModel = CostModel()) -> Scenario:
    """Two-stage scenario: the second GeMM consumes the first one's output."""
    k = params.grid1.y
    stages = (
        Stage(id="gemm1", grid=params.grid1, occupancy=params.occupancy,
              k_steps=k),
        Stage(id="gemm2", grid=params.grid2, occupancy=params.occupancy,
              k_steps=k),
    )
    deps = (Dependency(producer="gemm1", consumer="gemm2", operand="a",
                       policy=policy),)
    return Scenario(gpu=GpuConfig(params.num_sms), stages=stages, deps=deps,
                    mode=mode, options=options, cost=cost)


# -- Motivating example: two 3x2 kernels on a 4-SM device ---------------------

def fig2_scenario(policy: SyncPolicy = RowSync(), mode: Mode = Mode.FINE,
                  options: SimOptions = SimOptions(),
                  cost: CostModel = CostModel()) -> Scenario:
    """Two dependent 6-block kernels on 4 SMs at occupancy 1."""
    grid = Dim3(3, 2, 1)
    stages = (
        Stage(id="producer", grid=grid, occupancy=1, k_steps=2),
        Stage(id="consumer", grid=grid, occupancy=1, k_steps=2),
    )
    deps = (Dependency(producer="producer", consumer="consumer", operand="a",
                       policy=policy),)
    return Scenario(gpu=GpuConfig(4), stages=stages, deps=deps, mode=mode,
                    options=options, cost=cost)


# -- Self-attention: GeMM -> fused dot product -> GeMM ------------------------

@dataclass(frozen=True)
class AttentionParams:
    """Grids for the QKV GeMM, the fused dot-product kernel, and the output
    GeMM. The QKV grid's columns hold three equal slices, so the group stride
    is a third of them."""

    grid_qkv: Dim3
    grid_dot: Dim3
    grid_out: Dim3
    occupancy: int = 1
    num_sms: int = 4

    @property
    def stride(self) -> int:
        if self.grid_qkv.y % 3 != 0:
            raise ConfigError(
                f"QKV grid columns {self.grid_qkv.y} must split into three "
                f"equal slices")
        return self.grid_qkv.y // 3


def attention_stride(hidden: int, ty: int) -> int:
    """Group stride from the model's hidden size and column tile width."""
    return hidden // (8 * ty)


ATTENTION_PRESETS: dict[str, AttentionParams] = {
    "toy": AttentionParams(Dim3(1, 6, 1), Dim3(1, 2, 1), Dim3(1, 3, 1)),
    "1024": AttentionParams(Dim3(4, 36, 1), Dim3(4, 12, 1), Dim3(4, 96, 1),
                            occupancy=2, num_sms=V100_SMS),
}


def attention_scenario(params: AttentionParams,
                       second_policy: SyncPolicy = TileSync(),
                       mode: Mode = Mode.FINE,
                       options: SimOptions = SimOptions(),
                       cost: CostModel = CostModel()) -> Scenario:
    """Three-stage chain with a strided-group sync into the dot product.

    The QKV GeMM computes strided column groups consecutively, the dot
    product waits once for its group (one tile from each of the three
    slices), and the output GeMM consumes dot-product tiles under
    `second_policy`.
    """
    stride = params.stride
    stages = (
        Stage(id="qkv", grid=params.grid_qkv, occupancy=params.occupancy,
              k_steps=max(1, params.grid_dot.y),
              order=StridedRowMajor(stride)),
        Stage(id="dot", grid=params.grid_dot, occupancy=params.occupancy,
              k_steps=1, operands=("qkv",)),
        Stage(id="out", grid=params.grid_out, occupancy=params.occupancy,
              k_steps=params.grid_dot.y),
    )
    deps = (
        Dependency(producer="qkv", consumer="dot", operand="qkv",
                   policy=StridedSync(stride)),
        Dependency(producer="dot", consumer="out", operand="a",
                   policy=second_policy),
    )
    return Scenario(gpu=GpuConfig(params.num_sms), stages=stages, deps=deps,
                    mode=mode, options=options, cost=cost)


# -- Paired convolutions ------------------------------------------------------

@dataclass(frozen=True)
class ConvPairParams:
    """Two identical implicit-GeMM convolution kernels."""

    channels: int
    batch: int
    grid: Dim3
    occupancy: int = 2
    kernel_size: int = 3
    num_sms: int = V100_SMS


# Per-kernel block counts for the 128-channel 3x3 pairs: grid rows follow the
# batch size, columns make the totals (39, 98, 98, 147, ..., 392).
CONV128_PRESETS: dict[str, ConvPairParams] = {
    str(b): ConvPairParams(128, b, Dim3(x, y, 1))
    for b, x, y in [(1, 13, 3), (4, 49, 2), (8, 98, 1), (12, 147, 1),
                    (16, 196, 1), (20, 245, 1), (24, 294, 1), (28, 343, 1),
                    (32, 392, 1)]
}


def conv_pair_scenario(params: ConvPairParams,
                       policy: SyncPolicy | None = None,
                       mode: Mode = Mode.FINE,
                       options: SimOptions = SimOptions(),
                       cost: CostModel = CostModel()) -> Scenario:
    """Two identical-grid stages; a KxK kernel stretches the consumer's
    reduction loop K*K-fold per producer column tile."""
    kk = params.kernel_size ** 2
    if policy is None:
        policy = Conv2DTileSync(kk)
    k_steps = kk * params.grid.y
    stages = (
        Stage(id="conv1", grid=params.grid, occupancy=params.occupancy,
              k_steps=k_steps),
        Stage(id="conv2", grid=params.grid, occupancy=params.occupancy,
              k_steps=k_steps),
    )
    deps = (Dependency(producer="conv1", consumer="conv2", operand="a",
                       policy=policy),)
    return Scenario(gpu=GpuConfig(params.num_sms), stages=stages, deps=deps,
                    mode=mode, options=options, cost=cost)


# -- Preset registry ----------------------------------------------------------

# "strided" selects the degenerate stride-1 grouping (whole rows share one
# semaphore); real strided groups appear in the attention chain's first
# dependency, whose stride is fixed by the grid.
POLICY_BY_NAME: dict[str, SyncPolicy] = {
    "tile": TileSync(),
    "row": RowSync(),
    "strided": StridedSync(1),
    "conv2dtile": Conv2DTileSync(9),
}


@dataclass(frozen=True)
class PresetInfo:
    name: str
    policies: tuple[str, ...]
    default_policy: str
    description: str


def _preset_infos() -> list[PresetInfo]:
    infos = [PresetInfo("fig2", ("row", "tile", "strided"), "row",
                        "two 3x2-grid kernels on 4 SMs, occupancy 1")]
    for label, p in MLP_PRESETS.items():
        infos.append(PresetInfo(
            f"mlp:{label}", ("row", "tile", "strided"), "row",
            f"MLP GeMM pair, batch {label}: grids {p.grid1} / {p.grid2}, "
            f"occupancy {p.occupancy}"))
    for label, p in ATTENTION_PRESETS.items():
        infos.append(PresetInfo(
            f"attn:{label}", ("tile", "row", "strided"), "tile",
            f"attention chain, {label}: grids {p.grid_qkv} / {p.grid_dot} / "
            f"{p.grid_out} (strided group sync into the dot product)"))
    for label, p in CONV128_PRESETS.items():
        infos.append(PresetInfo(
            f"conv128:{label}", ("conv2dtile", "row", "strided"),
            "conv2dtile",
            f"conv pair, 128 channels, batch {label}: grid {p.grid}, "
            f"occupancy {p.occupancy}"))
    return infos


PRESETS: dict[str, PresetInfo] = {i.name: i for i in _preset_infos()}


def build_preset(name: str, policy: str | None = None,
                 mode: Mode = Mode.FINE, options: SimOptions = SimOptions(),
                 cost: CostModel = CostModel(), seed: int = 0) -> Scenario:
    """Construct a preset scenario by name, e.g. ``mlp:1024`` or ``fig2``.

    ``random:<n>`` builds the n-th scenario of the seeded random family.
    """
    if name.startswith("random:"):
        return random_scenario(seed + int(name.split(":", 1)[1]),
                               mode=mode, options=options, cost=cost)
    info = PRESETS.get(name)
    if info is None:
        raise ConfigError(f"unknown preset {name!r}; see list-presets")
    if policy is None:
        policy = info.default_policy
    if policy not in info.policies:
        raise ConfigError(
            f"policy {policy!r} does not apply to preset {name} "
            f"(choose from {', '.join(info.policies)})")
    pol = POLICY_BY_NAME[policy]
    if name == "fig2":
        return fig2_scenario(pol, mode, options, cost)
    family, label = name.split(":", 1)
    if family == "mlp":
        return mlp_scenario(MLP_PRESETS[label], pol, mode, options, cost)
    if family == "attn":
        return attention_scenario(ATTENTION_PRESETS[label], pol, mode,
                                  options, cost)
    return conv_pair_scenario(CONV128_PRESETS[label], pol, mode, options,
                              cost)


# -- Seeded random scenarios --------------------------------------------------

def _divisors(n: int) -> list[int]:
    return [d for d in range(1, n + 1) if n % d == 0]


def random_scenario(seed: int, max_stages: int = 4,
                    max_tiles_per_stage: int = 64,
                    mode: Mode = Mode.FINE,
                    options: SimOptions | None = None,
                    cost: CostModel = CostModel()) -> Scenario:
    """A small random scenario whose policies satisfy every divisibility and
    range constraint by construction. Deterministic in `seed`."""
    rng = random.Random(seed)
    num_sms = rng.choice([1, 2, 2, 3, 4, 6])
    n_stages = rng.randint(1, max_stages)
    stages: list[Stage] = []
    deps: list[Dependency] = []
    for i in range(n_stages):
        n_deps = 0 if i == 0 else rng.choice([0, 1, 1, 1, 2])
        producers = rng.sample(range(i), k=min(n_deps, i)) if n_deps else []
        max_x = min([stages[j].grid.x for j in producers], default=6)
        x = rng.randint(1, max_x)
        y = rng.randint(1, max(1, min(8, max_tiles_per_stage // x)))
        z = rng.choice([1, 1, 1, 2])
        while x * y * z > max_tiles_per_stage:
            z = 1
            y = max(1, y // 2)
        grid = Dim3(x, y, z)
        occupancy = rng.choice([1, 1, 1, 2])
        order = RowMajor()
        k_steps = rng.randint(1, 6)
        stage_deps: list[Dependency] = []
        operand_names = ("a", "b")
        for slot, j in enumerate(producers):
            prod = stages[j]
            if slot == 0:
                kind = rng.choice(["row", "row", "tile", "strided", "conv"])
            else:
                kind = rng.choice(["row", "strided"])
            if kind == "tile":
                k_steps = rng.randint(1, prod.grid.y)
                policy: SyncPolicy = TileSync()
            elif kind == "conv":
                kk = rng.choice([2, 3, 4])
                reps = rng.randint(1, prod.grid.y)
                k_steps = kk * reps
                policy = Conv2DTileSync(kk)
            elif kind == "strided":
                stride = rng.choice(_divisors(prod.grid.y))
                policy = StridedSync(stride)
            else:
                policy = RowSync()
            stage_deps.append(Dependency(
                producer=prod.id, consumer=f"s{i}",
                operand=operand_names[slot], policy=policy))
        stages.append(Stage(id=f"s{i}", grid=grid, occupancy=occupancy,
                            k_steps=k_steps, order=order,
                            operands=operand_names))
        deps.extend(stage_deps)
    if options is None:
        options = SimOptions(wait_kernel="auto",
                             reorder_loads=rng.random() < 0.5)
    return Scenario(gpu=GpuConfig(num_sms), stages=tuple(stages),
                    deps=tuple(deps), mode=mode, options=options, cost=cost)
