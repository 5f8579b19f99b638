"""Deterministic simulator for GPU thread-block waves and fine-grained
inter-kernel tile synchronization.

The library models dependent tile-based kernels (GeMM pairs, attention
chains, convolution pairs) sharing a GPU's thread-block slots, either under
coarse stream synchronization or under per-tile semaphore protocols, and
reports exact wave counts, utilization, makespans, and dependency-safety
checks against a brute-force oracle.
"""

from .engine import (CostModel, Dependency, Event, Metrics, Mode, Scenario,
                     SimOptions, SimTrace, Stage, StageMetrics,
                     avoid_wait_kernel, gated_producers, kstep_duration,
                     simulate)
from .errors import ConfigError, MalformedTraceError
from .gpu import (Dim3, GpuConfig, TileCoord, WaveCount, linearize,
                  tbs_per_wave, utilization, waves)
from .oracle import (DepDag, Violation, build_dep_dag, reference_makespan,
                     validate_trace)
from .policies import (Conv2DTileSync, RowMajor, RowSync, SemaphoreArray,
                       StridedRowMajor, StridedSync, SyncPolicy, TileOrder,
                       TileSync, WaitSpec, consumer_wait, order_tile,
                       post_target, sem_count, wait_steps)
from .workloads import (ATTENTION_PRESETS, CONV128_PRESETS, MLP_PRESETS,
                        PRESETS, AttentionParams, ConvPairParams, MlpParams,
                        attention_scenario, attention_stride, build_preset,
                        conv_pair_scenario, fig2_scenario, mlp_scenario,
                        random_scenario)

__version__ = "0.1.0"

__all__ = [
    "CostModel", "Dependency", "Event", "Metrics", "Mode", "Scenario",
    "SimOptions", "SimTrace", "Stage", "StageMetrics", "avoid_wait_kernel",
    "gated_producers", "kstep_duration", "simulate",
    "ConfigError", "MalformedTraceError",
    "Dim3", "GpuConfig", "TileCoord", "WaveCount", "linearize",
    "tbs_per_wave", "utilization", "waves",
    "DepDag", "Violation", "build_dep_dag", "reference_makespan",
    "validate_trace",
    "Conv2DTileSync", "RowMajor", "RowSync", "SemaphoreArray",
    "StridedRowMajor", "StridedSync", "SyncPolicy", "TileOrder", "TileSync",
    "WaitSpec", "consumer_wait", "order_tile", "post_target", "sem_count",
    "wait_steps",
    "ATTENTION_PRESETS", "CONV128_PRESETS", "MLP_PRESETS", "PRESETS",
    "AttentionParams", "ConvPairParams", "MlpParams", "attention_scenario",
    "attention_stride", "build_preset", "conv_pair_scenario",
    "fig2_scenario", "mlp_scenario", "random_scenario",
]
