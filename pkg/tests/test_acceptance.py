"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with `pytest tests/test_acceptance.py -v -s` to see the lines.

Printed reference values for the conv table mix truncation and rounding in
their source, so those comparisons use |exact - printed| < one unit in the
last printed decimal place; everything else is exact rational arithmetic.
"""

import dataclasses
import itertools
import time
from contextlib import contextmanager
from fractions import Fraction

from tilesync_sim.engine import (Dependency, Mode, Scenario, SimOptions,
                                 Stage, avoid_wait_kernel, simulate)
from tilesync_sim.gpu import Dim3, GpuConfig, TileCoord, utilization
from tilesync_sim.oracle import (build_dep_dag, reference_makespan,
                                 validate_trace)
from tilesync_sim.policies import (Conv2DTileSync, RowMajor, RowSync,
                                   StridedRowMajor, StridedSync, TileSync,
                                   consumer_wait, order_tile, post_target,
                                   sem_count)
from tilesync_sim.workloads import (CONV128_PRESETS, MLP_PRESETS, PRESETS,
                                    build_preset, random_scenario)

RANDOM_SUITE = 1000


@contextmanager
def criterion(num: int, desc: str, budget: float | None = None):
    t0 = time.monotonic()
    try:
        yield
    except Exception:
        print(f"ACCEPTANCE {num:02d} FAIL  {desc}")
        raise
    elapsed = time.monotonic() - t0
    if budget is not None and elapsed > budget:
        print(f"ACCEPTANCE {num:02d} FAIL  {desc} "
              f"(runtime {elapsed:.2f}s over {budget}s budget)")
        raise AssertionError(
            f"criterion {num} runtime {elapsed:.2f}s exceeds {budget}s")
    print(f"ACCEPTANCE {num:02d} PASS  {desc} ({elapsed:.2f}s)")


def close_to_printed(exact: Fraction, printed: str) -> bool:
    decimals = len(printed.split(".")[1]) if "." in printed else 0
    return abs(exact - Fraction(printed)) < Fraction(1, 10 ** decimals)


def test_c1_utilization_rows():
    with criterion(1, "utilization of the six GeMM-pair rows", budget=1.0):
        gpu = GpuConfig(80)
        rows = [Dim3(1, 96, 2), Dim3(1, 96, 1), Dim3(2, 48, 2),
                Dim3(2, 96, 1), Dim3(4, 48, 1), Dim3(4, 96, 1)]
        got = [utilization(g.total(), gpu, 2) for g in rows]
        assert got == [60, 60, 60, 60, 60, 80]
        assert all(isinstance(u, Fraction) for u in got)


def test_c2_mlp_preset_waves():
    with criterion(2, "MLP preset per-stage and combined waves", budget=5.0):
        expected = {
            "1-64": (Fraction(3, 10), Fraction(1, 5), 2, Fraction(1, 2)),
            "128": (Fraction(2, 5), Fraction(2, 5), 2, Fraction(4, 5)),
            "256": (Fraction(6, 5), Fraction(3, 5), 3, Fraction(9, 5)),
            "512": (Fraction(6, 5), Fraction(6, 5), 4, Fraction(12, 5)),
            "1024": (Fraction(6, 5), Fraction(12, 5), 5, Fraction(18, 5)),
            "2048": (Fraction(12, 5), Fraction(24, 5), 8, Fraction(36, 5)),
        }
        for label, (w1, w2, stream_waves, fine_waves) in expected.items():
            _, fine = simulate(build_preset(f"mlp:{label}", mode=Mode.FINE))
            _, stream = simulate(build_preset(f"mlp:{label}",
                                              mode=Mode.STREAM))
            assert fine.per_stage[0].waves_frac == w1, label
            assert fine.per_stage[1].waves_frac == w2, label
            assert stream.combined_waves == stream_waves, label
            assert fine.combined_waves == fine_waves, label


def test_c3_conv_preset_waves():
    with criterion(3, "conv-pair preset waves to printed precision",
                   budget=5.0):
        per_kernel = ["0.24", "0.61", "0.61", "0.91", "1.22", "1.53", "1.83",
                      "2.14", "2.45"]
        stream_expected = [2, 2, 2, 2, 4, 4, 4, 6, 6]
        fine_expected = ["0.48", "1.22", "1.22", "1.84", "2.45", "3.06",
                         "3.68", "4.3", "4.9"]
        for i, batch in enumerate(CONV128_PRESETS):
            _, fine = simulate(build_preset(f"conv128:{batch}",
                                            mode=Mode.FINE))
            _, stream = simulate(build_preset(f"conv128:{batch}",
                                              mode=Mode.STREAM))
            for s in fine.per_stage:
                assert close_to_printed(s.waves_frac, per_kernel[i]), (
                    batch, s.waves_frac)
            assert stream.combined_waves == stream_expected[i], batch
            assert close_to_printed(fine.combined_waves_frac,
                                    fine_expected[i]), (
                batch, fine.combined_waves_frac)


def test_c4_motivating_example_waves():
    with criterion(4, "4-SM pair: 4 stream generations vs 3 full fine ones"):
        _, stream = simulate(build_preset("fig2", mode=Mode.STREAM))
        _, fine = simulate(build_preset("fig2", policy="row",
                                        mode=Mode.FINE))
        assert stream.generations == 4
        assert fine.generations == 3
        assert fine.generation_sizes == (4, 4, 4)  # every slot busy


def test_c5_combined_wave_arithmetic():
    with criterion(5, "192+384 blocks at 160/wave: 4 fine vs 5 stream, "
                      "last fine wave 96 blocks"):
        _, stream = simulate(build_preset("mlp:1024", mode=Mode.STREAM))
        _, fine = simulate(build_preset("mlp:1024", mode=Mode.FINE))
        assert stream.combined_waves == 5
        assert -(-fine.combined_waves_frac // 1) == 4  # ceil of 3.6
        assert fine.generations == 4
        assert fine.generation_sizes[-1] == 96


def _preset_runs():
    for name, info in PRESETS.items():
        for policy in info.policies:
            for mode in (Mode.STREAM, Mode.FINE):
                yield name, policy, mode


def test_c6_dependency_safety():
    with criterion(6, "zero violations on presets and the random suite; "
                      "engine equals oracle makespan", budget=60.0):
        for name, policy, mode in _preset_runs():
            sc = build_preset(name, policy=policy, mode=mode)
            trace, m = simulate(sc)
            assert not m.deadlock, (name, policy, mode)
            assert validate_trace(trace, build_dep_dag(sc)) == [], (
                name, policy, mode)
        for seed in range(RANDOM_SUITE):
            sc = random_scenario(seed)
            trace, m = simulate(sc)
            assert not m.deadlock, seed
            assert validate_trace(trace, build_dep_dag(sc)) == [], seed
            assert reference_makespan(sc) == m.makespan, seed


def test_c7_deadlock_behavior():
    with criterion(7, "deadlock detected without the gate; none with it"):
        hostile = SimOptions(wait_kernel="off", adversarial_order=True)
        _, m = simulate(build_preset("fig2", mode=Mode.FINE,
                                     options=hostile))
        assert m.deadlock
        guarded = SimOptions(wait_kernel="on", adversarial_order=True)
        _, m = simulate(build_preset("fig2", mode=Mode.FINE,
                                     options=guarded))
        assert not m.deadlock
        for seed in range(RANDOM_SUITE):
            for wk in ("on", "auto"):
                sc = random_scenario(seed, options=SimOptions(wait_kernel=wk))
                _, m = simulate(sc)
                assert not m.deadlock, (seed, wk)


def test_c8_policy_laws():
    with criterion(8, "semaphore-count laws, conservation, order "
                      "bijectivity, strided toy grouping"):
        # Count laws over a grid sweep.
        for x, y, z in itertools.product(range(1, 7), range(1, 9), (1, 2)):
            grid = Dim3(x, y, z)
            assert sem_count(TileSync(), grid) == x * y
            assert sem_count(RowSync(), grid) == x
            for stride in (d for d in range(1, y + 1) if y % d == 0):
                assert sem_count(StridedSync(stride), grid) == x * stride
            # Conservation: posts per semaphore equal every waiter's target.
            for policy, k_steps in ((TileSync(), y), (RowSync(), y),
                                    (Conv2DTileSync(3), 3 * y)):
                totals = [0] * sem_count(policy, grid)
                for tx, ty, tz in itertools.product(range(x), range(y),
                                                    range(z)):
                    totals[post_target(policy, TileCoord(tx, ty, tz),
                                       grid)] += 1
                for cx, cy, k in itertools.product(range(x), range(y),
                                                   range(k_steps)):
                    w = consumer_wait(policy, TileCoord(cx, cy, 0), k, grid, z)
                    if w is not None:
                        assert totals[w.sem_index] == w.expected
        # Tile-order bijectivity, both orders, totals up to 4096.
        for grid in (Dim3(3, 2, 1), Dim3(4, 6, 2), Dim3(8, 8, 2),
                     Dim3(16, 16, 16), Dim3(1, 6, 1)):
            for order in (RowMajor(), StridedRowMajor(2)):
                if grid.y % 2:
                    continue
                seen = {order_tile(order, grid, i)
                        for i in range(grid.total())}
                assert len(seen) == grid.total()
        # Strided grouping on the toy attention chain.
        dag = build_dep_dag(build_preset("attn:toy"))
        assert dag.producers_of("dot", 0, 0, 0) == {
            ("qkv", 0, 0), ("qkv", 0, 2), ("qkv", 0, 4)}
        assert dag.producers_of("dot", 0, 1, 0) == {
            ("qkv", 0, 1), ("qkv", 0, 3), ("qkv", 0, 5)}
        for j in range(3):
            assert (dag.producers_of("out", 0, j, 0)
                    | dag.producers_of("out", 0, j, 1)) == {
                ("dot", 0, 0), ("dot", 0, 1)}


def _uniform_occupancy(sc: Scenario) -> Scenario:
    occ = sc.stages[0].occupancy
    return dataclasses.replace(
        sc, stages=tuple(dataclasses.replace(s, occupancy=occ)
                         for s in sc.stages))


def test_c9_optimization_directionality():
    with criterion(9, "load reordering never hurts and strictly helps a "
                      "waiting pair; gate-skip rule matches capacity"):
        # Strict improvement on a pair where the consumer blocks mid-wave.
        stages = (Stage("p", Dim3(1, 1, 1), occupancy=2, k_steps=2),
                  Stage("c", Dim3(1, 1, 1), occupancy=2, k_steps=1))
        deps = (Dependency("p", "c", policy=TileSync()),)
        base = Scenario(gpu=GpuConfig(1), stages=stages, deps=deps)
        _, off = simulate(base)
        _, on = simulate(dataclasses.replace(
            base, options=SimOptions(reorder_loads=True)))
        assert on.makespan < off.makespan

        # Never an increase across occupancy-uniform random scenarios.
        for seed in range(300):
            sc_off = _uniform_occupancy(random_scenario(
                seed, options=SimOptions(reorder_loads=False)))
            sc_on = _uniform_occupancy(random_scenario(
                seed, options=SimOptions(reorder_loads=True)))
            _, m_off = simulate(sc_off)
            _, m_on = simulate(sc_on)
            assert m_on.makespan <= m_off.makespan, seed

        # The wait-kernel is skipped exactly for presets fitting one wave.
        fits_one_wave = {"mlp:1-64", "mlp:128", "conv128:1"}
        for name, info in PRESETS.items():
            sc = build_preset(name)
            skipped = all(
                avoid_wait_kernel(sc.stage_by_id(d.producer),
                                  sc.stage_by_id(d.consumer), sc.gpu)
                for d in sc.deps)
            assert skipped == (name in fits_one_wave), name


def test_c10_fine_never_slower_on_presets():
    with criterion(10, "fine-grained makespan never exceeds stream makespan "
                       "on the table presets"):
        names = ([f"mlp:{b}" for b in MLP_PRESETS]
                 + [f"conv128:{b}" for b in CONV128_PRESETS])
        for name in names:
            for policy in PRESETS[name].policies:
                _, stream = simulate(build_preset(name, policy=policy,
                                                  mode=Mode.STREAM))
                _, fine = simulate(build_preset(name, policy=policy,
                                                mode=Mode.FINE))
                assert fine.makespan <= stream.makespan, (name, policy)
                assert not fine.deadlock and not stream.deadlock
