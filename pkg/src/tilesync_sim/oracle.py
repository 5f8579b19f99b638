"""Ground truth for the event engine, built by brute force.

The dependency DAG is derived by enumerating every consumer tile and k-step,
expanding each semaphore wait into the exact set of producer tiles that post
to that semaphore (the full preimage of the post target). Tile sets, not
semaphore counters, are the currency here, so an indexing bug in the policy
layer cannot cancel itself out between the engine and this module.

`validate_trace` replays a trace against the DAG and against the posts alone;
`reference_makespan` reruns the scenario as a unit-time-stepped list scheduler
driven by tile completion instead of semaphores.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .engine import (Event, Mode, Scenario, SimTrace, gated_producers,
                     kstep_duration)
from .errors import MalformedTraceError
from .gpu import TileCoord
from .policies import consumer_wait, order_tile, post_target

RequireKey = tuple[str, int, int, int]  # consumer stage, tile x, tile y, k
ProducerTile = tuple[str, int, int]


@dataclass
class DepDag:
    """Tile-level dependency edges, independent of the engine's code paths."""

    scenario: Scenario
    # (consumer, x, y, k) -> (producer tiles that must be complete, number of
    # semaphore checks issued at that k-step)
    requires: dict[RequireKey, tuple[frozenset[ProducerTile], int]]
    slices: dict[str, int]  # stage id -> z extent (blocks per tile)

    def producers_of(self, consumer: str, x: int, y: int,
                     k: int) -> frozenset[ProducerTile]:
        entry = self.requires.get((consumer, x, y, k))
        return entry[0] if entry else frozenset()


def build_dep_dag(scenario: Scenario) -> DepDag:
    """Expand every policy wait into explicit producer tile sets."""
    requires: dict[RequireKey, tuple[set[ProducerTile], int]] = {}
    for dep in scenario.deps:
        prod = scenario.stage_by_id(dep.producer)
        cons = scenario.stage_by_id(dep.consumer)
        preimage: dict[int, set[tuple[int, int]]] = {}
        for x, y in itertools.product(range(prod.grid.x), range(prod.grid.y)):
            idx = post_target(dep.policy, TileCoord(x, y, 0), prod.grid)
            preimage.setdefault(idx, set()).add((x, y))
        for cx, cy in itertools.product(range(cons.grid.x),
                                        range(cons.grid.y)):
            tile = TileCoord(cx, cy, 0)
            for k in range(cons.k_steps):
                w = consumer_wait(dep.policy, tile, k, prod.grid, prod.grid.z)
                if w is None:
                    continue
                tiles = preimage[w.sem_index]
                if w.expected != len(tiles) * prod.grid.z:
                    raise AssertionError(
                        f"conservation broken for {dep.id} sem "
                        f"{w.sem_index}: expected {w.expected}, total posts "
                        f"{len(tiles) * prod.grid.z}")
                key = (cons.id, cx, cy, k)
                prev_tiles, prev_checks = requires.get(key, (set(), 0))
                prev_tiles |= {(prod.id, x, y) for x, y in tiles}
                requires[key] = (prev_tiles, prev_checks + 1)
    return DepDag(
        scenario=scenario,
        requires={k: (frozenset(tiles), n)
                  for k, (tiles, n) in requires.items()},
        slices={s.id: s.grid.z for s in scenario.stages})


@dataclass(frozen=True)
class Violation:
    kind: str  # missing_post | late_read | weak_semaphore | missing_wait
    consumer_stage: str
    consumer_tile: tuple[int, int, int]
    k: int | None
    message: str

    def __str__(self) -> str:
        return (f"{self.kind}: consumer {self.consumer_stage}"
                f"{list(self.consumer_tile)} k={self.k}: {self.message}")


def _check_shape(events: list[Event], dag: DepDag) -> None:
    known = {s.id for s in dag.scenario.stages}
    last_t = None
    counts: dict[tuple[str, int], list[int]] = {}
    for ev in events:
        if ev.stage not in known:
            raise MalformedTraceError(f"unknown stage {ev.stage!r} in trace")
        if last_t is not None and ev.time < last_t:
            raise MalformedTraceError("trace times are not non-decreasing")
        last_t = ev.time
        c = counts.setdefault((ev.stage, ev.tb), [0, 0])
        if ev.kind == "scheduled":
            c[0] += 1
        elif ev.kind == "finished":
            c[1] += 1
    for (stage, tb), (sched, fin) in counts.items():
        if sched != 1 or fin > 1:
            raise MalformedTraceError(
                f"block {stage}/{tb} has {sched} scheduled and {fin} "
                f"finished events")


def validate_trace(trace: SimTrace | list[Event], dag: DepDag,
                   mode: Mode | None = None) -> list[Violation]:
    """Replay a trace against the DAG; an empty list means dependency-safe.

    Two independent checks: (a) every k-step-gated read happens at or after
    the completion of every producer tile it needs, and (b) semaphore values
    replayed from post events alone support every observed wait_end.
    """
    if isinstance(trace, SimTrace):
        events = trace.events
        mode = trace.mode
    else:
        events = trace
        if mode is None:
            waity = any(e.kind in ("wait_begin", "wait_end") for e in events)
            mode = Mode.FINE if waity else Mode.STREAM
    _check_shape(events, dag)
    violations: list[Violation] = []

    # Replay (b): posts alone must justify every wait_end, in trace order.
    sems: dict[tuple[str, int], int] = {}
    for ev in events:
        if ev.kind == "post":
            sems[(ev.dep, ev.sem)] = sems.get((ev.dep, ev.sem), 0) + 1
        elif ev.kind == "wait_end":
            have = sems.get((ev.dep, ev.sem), 0)
            if have < ev.expected:
                violations.append(Violation(
                    "weak_semaphore", ev.stage, ev.tile, ev.k,
                    f"wait_end at t={ev.time} expected {ev.expected} on "
                    f"{ev.dep}[{ev.sem}] but only {have} posts precede it"))

    # Check (a): reconstruct read times and producer tile completion times.
    finish_times: dict[tuple[str, int, int], list] = {}
    scheduled_at: dict[tuple[str, int], float] = {}
    wait_end_at: dict[tuple[str, int, int], float] = {}
    finished_tbs: set[tuple[str, int]] = set()
    for ev in events:
        if ev.kind == "finished":
            key = (ev.stage, ev.tile[0], ev.tile[1])
            finish_times.setdefault(key, []).append(ev.time)
            finished_tbs.add((ev.stage, ev.tb))
        elif ev.kind == "scheduled":
            scheduled_at[(ev.stage, ev.tb)] = ev.time
        elif ev.kind == "wait_end":
            wait_end_at[(ev.stage, ev.tb, ev.k)] = ev.time

    tb_tiles: dict[tuple[str, int], tuple[int, int, int]] = {}
    for ev in events:
        if ev.kind == "scheduled":
            tb_tiles[(ev.stage, ev.tb)] = ev.tile

    for (stage, tb), tile in tb_tiles.items():
        x, y = tile[0], tile[1]
        for k in range(dag.scenario.stage_by_id(stage).k_steps):
            needed = dag.producers_of(stage, x, y, k)
            if not needed:
                continue
            if mode is Mode.FINE:
                t_read = wait_end_at.get((stage, tb, k))
                if t_read is None:
                    if (stage, tb) in finished_tbs:
                        violations.append(Violation(
                            "missing_wait", stage, tile, k,
                            "block finished without observing its wait"))
                    continue  # blocked forever; it never read
            else:
                t_read = scheduled_at[(stage, tb)]
            for pstage, px, py in sorted(needed):
                done = finish_times.get((pstage, px, py), [])
                on_time = [t for t in done if t <= t_read]
                if len(on_time) < dag.slices[pstage]:
                    violations.append(Violation(
                        "missing_post", stage, tile, k,
                        f"requires producer {pstage}[{px},{py}] complete "
                        f"({dag.slices[pstage]} blocks) by t={t_read}, "
                        f"saw {len(on_time)}"))
    return violations


class _RefTB:
    __slots__ = ("stage", "index", "tile", "k", "check_time", "n_checks")

    def __init__(self, stage, index, tile):
        self.stage = stage
        self.index = index
        self.tile = tile
        self.k = 0
        self.check_time = 0
        self.n_checks = 0


class _RefStage:
    def __init__(self, spec, index, priority, cost, n_deps_in, out_deps):
        self.spec = spec
        self.index = index
        self.priority = priority
        self.cost = cost
        self.n_deps_in = n_deps_in
        self.out_deps = out_deps
        self.counter = 0
        self.next_tb = 0
        self.started = False
        self.finished = 0
        self.resident = 0


def reference_makespan(scenario: Scenario, max_tiles: int = 256) -> float:
    """Unit-time-stepped list scheduling over the brute-force DAG.

    Blocks become ready per DAG edges rather than semaphores, under the same
    arbitration, capacity, and cost rules as the engine; the result must
    match the engine's makespan.
    """
    total_tiles = sum(s.grid.total() for s in scenario.stages)
    if total_tiles > max_tiles:
        raise ValueError(f"scenario has {total_tiles} tiles, above the "
                         f"reference cap of {max_tiles}")
    dag = build_dep_dag(scenario)
    fine = scenario.mode is Mode.FINE

    stages: list[_RefStage] = []
    for i, spec in enumerate(scenario.stages):
        base = spec.stream_priority if spec.stream_priority is not None else i
        prio = -base if scenario.options.adversarial_order else base
        n_in = sum(1 for d in scenario.deps if d.consumer == spec.id)
        n_out = sum(1 for d in scenario.deps if d.producer == spec.id)
        stages.append(_RefStage(spec, i, prio, spec.cost or scenario.cost,
                                n_in, n_out))
    order = sorted(stages, key=lambda s: (s.priority, s.index))
    gates = {s.spec.id: set(gated_producers(scenario, s.spec))
             for s in stages}
    by_id = {s.spec.id: s for s in stages}

    slice_done: dict[tuple[str, int, int], int] = {}
    completions: dict[float, list[_RefTB]] = {}
    boundaries: dict[float, list[_RefTB]] = {}
    blocked: list[_RefTB] = []
    resident_total = 0
    finished = 0
    total_tbs = sum(s.spec.grid.total() for s in stages)
    makespan = 0

    def complete(tiles: frozenset) -> bool:
        return all(slice_done.get((ps, px, py), 0) == dag.slices[ps]
                   for ps, px, py in tiles)

    def kstep_len(sr: _RefStage, wait, n_checks) -> float:
        cost = sr.cost
        n_ops = len(sr.spec.operands)
        reorder = (scenario.options.reorder_loads and fine and wait > 0
                   and n_ops == 2 and sr.n_deps_in == 1)
        if sr.n_deps_in and fine:
            dep_load, other = cost.load, (n_ops - 1) * cost.load
        else:
            dep_load, other = n_ops * cost.load, 0
        return (kstep_duration(wait, dep_load, other, cost.compute, reorder)
                + n_checks * cost.sync_overhead)

    def advance(tb: _RefTB, v, t) -> None:
        nonlocal makespan
        sr = tb.stage
        while tb.k < sr.spec.k_steps:
            entry = (dag.requires.get((sr.spec.id, tb.tile.x, tb.tile.y, tb.k))
                     if fine else None)
            if entry is not None:
                tiles, n_checks = entry
                if not complete(tiles):
                    if v > t:
                        boundaries.setdefault(v, []).append(tb)
                    else:
                        tb.check_time = v
                        tb.n_checks = n_checks
                        blocked.append(tb)
                    return
                v += kstep_len(sr, 0, n_checks)
            else:
                v += kstep_len(sr, 0, 0)
            tb.k += 1
        fin = v + sr.cost.epilogue + sr.out_deps * sr.cost.sync_overhead
        completions.setdefault(fin, []).append(tb)
        if fin > makespan:
            makespan = fin

    def eligible(sr: _RefStage) -> bool:
        if not fine:
            return all(prev.finished == prev.spec.grid.total()
                       for prev in stages[:sr.index])
        return all(by_id[p].started for p in gates[sr.spec.id])

    def fits(sr: _RefStage) -> bool:
        min_occ = sr.spec.occupancy
        for other in stages:
            if other.resident > 0:
                min_occ = min(min_occ, other.spec.occupancy)
        return resident_total + 1 <= min_occ * scenario.gpu.num_sms

    def tick(t, fresh: bool) -> None:
        nonlocal resident_total, finished
        # Re-run until this timestamp quiesces: with zero-cost steps a grant
        # can complete at the same tick and free a slot immediately.
        while fresh or completions.get(t) or boundaries.get(t):
            fresh = False
            for tb in completions.pop(t, []):
                key = (tb.stage.spec.id, tb.tile.x, tb.tile.y)
                slice_done[key] = slice_done.get(key, 0) + 1
                tb.stage.resident -= 1
                resident_total -= 1
                tb.stage.finished += 1
                finished += 1
            for tb in boundaries.pop(t, []):
                advance(tb, t, t)
            still = []
            for tb in blocked:
                entry = dag.requires[(tb.stage.spec.id, tb.tile.x,
                                      tb.tile.y, tb.k)]
                if complete(entry[0]):
                    end = tb.check_time + kstep_len(
                        tb.stage, t - tb.check_time, tb.n_checks)
                    tb.k += 1
                    advance(tb, end, t)
                else:
                    still.append(tb)
            blocked[:] = still
            changed = True
            while changed:
                changed = False
                for sr in order:
                    if sr.next_tb >= sr.spec.grid.total() or not eligible(sr):
                        continue
                    while sr.next_tb < sr.spec.grid.total() and fits(sr):
                        tile = order_tile(sr.spec.order, sr.spec.grid,
                                          sr.counter)
                        sr.counter += 1
                        tb = _RefTB(sr, sr.next_tb, tile)
                        sr.next_tb += 1
                        sr.started = True
                        sr.resident += 1
                        resident_total += 1
                        changed = True
                        advance(tb, t, t)

    t = 0
    tick(t, fresh=True)
    while finished < total_tbs:
        pending = list(completions) + list(boundaries)
        future = [tt for tt in pending if tt > t]
        if not future:
            raise RuntimeError(
                "reference scheduler stalled with unfinished blocks "
                "(deadlocked scenario)")
        # Advancing one unit at a time; intermediate ticks are no-ops, so
        # hop straight to the next one where anything happens.
        t = min(future)
        tick(t, fresh=True)
    return makespan
