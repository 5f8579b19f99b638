"""Deterministic discrete-event simulation of thread-block wave execution.

The machine model: a GPU offers `num_sms * occupancy` concurrent thread-block
slots. Thread blocks become eligible according to the run mode:

* stream mode: a stage's blocks are eligible only once every earlier stage
  has completely finished (coarse synchronization on one stream),
* fine mode: all stages are eligible immediately, except that a consumer
  stage can be gated until each of its producers has started at least one
  block (the one-thread wait-kernel on the consumer's stream).

Free slots are granted to eligible blocks in a fixed arbitration order:
stream priority first (producers default higher), then stage invocation
order, then block index. A granted block draws its tile from the stage's
global counter, then executes its k-steps; in fine mode each k-step first
performs the policy's semaphore waits. An unsatisfied wait blocks the thread
block while it keeps its slot (the spin loop holds the SM), and that time is
charged to `total_wait`. On completion the block increments the semaphore
chosen by the policy and releases its slot.

Everything is deterministic: identical scenarios produce identical traces.
"""

from __future__ import annotations

import enum
import heapq
import json
from dataclasses import dataclass, replace
from fractions import Fraction

from . import policies as _pol
from .errors import ConfigError
from .gpu import Dim3, GpuConfig, TileCoord, utilization, waves
from .policies import (RowMajor, StridedRowMajor, SyncPolicy, TileOrder,
                       WaitSpec, check_policy, consumer_wait, order_tile,
                       post_target, sem_count)


class Mode(str, enum.Enum):
    STREAM = "stream"
    FINE = "fine"


@dataclass(frozen=True)
class CostModel:
    """Abstract time units per k-step; no hardware fidelity implied."""

    load: float = 1
    compute: float = 1
    sync_overhead: float = 0
    epilogue: float = 0

    def __post_init__(self) -> None:
        if min(self.load, self.compute, self.sync_overhead, self.epilogue) < 0:
            raise ConfigError("cost parameters must be >= 0")


@dataclass(frozen=True)
class SimOptions:
    wait_kernel: str = "auto"  # on | off | auto
    reorder_loads: bool = False
    adversarial_order: bool = False

    def __post_init__(self) -> None:
        if self.wait_kernel not in ("on", "off", "auto"):
            raise ConfigError(f"wait_kernel must be on/off/auto, "
                              f"got {self.wait_kernel!r}")


@dataclass(frozen=True)
class Stage:
    """One kernel: its grid, occupancy, reduction depth, and tile order."""

    id: str
    grid: Dim3
    occupancy: int = 1
    k_steps: int = 1
    order: TileOrder = RowMajor()
    operands: tuple[str, ...] = ("a", "b")
    stream_priority: int | None = None
    cost: CostModel | None = None

    def __post_init__(self) -> None:
        if self.occupancy < 1:
            raise ConfigError(f"stage {self.id}: occupancy must be >= 1")
        if self.k_steps < 1:
            raise ConfigError(f"stage {self.id}: k_steps must be >= 1")
        if len(set(self.operands)) != len(self.operands):
            raise ConfigError(f"stage {self.id}: duplicate operand names")
        if isinstance(self.order, StridedRowMajor):
            if self.grid.y % self.order.stride != 0:
                raise ConfigError(
                    f"stage {self.id}: order stride {self.order.stride} does "
                    f"not divide grid columns {self.grid.y}")


@dataclass(frozen=True)
class Dependency:
    """Consumer's `operand` tiles come from `producer`, synced by `policy`."""

    producer: str
    consumer: str
    operand: str = "a"
    policy: SyncPolicy = _pol.RowSync()

    @property
    def id(self) -> str:
        return f"{self.producer}->{self.consumer}/{self.operand}"


@dataclass(frozen=True)
class Scenario:
    gpu: GpuConfig
    stages: tuple[Stage, ...]
    deps: tuple[Dependency, ...] = ()
    mode: Mode = Mode.FINE
    options: SimOptions = SimOptions()
    cost: CostModel = CostModel()

    def __post_init__(self) -> None:
        validate_scenario(self)

    def with_mode(self, mode: Mode) -> "Scenario":
        return replace(self, mode=mode)

    def stage_by_id(self, stage_id: str) -> Stage:
        for s in self.stages:
            if s.id == stage_id:
                return s
        raise KeyError(stage_id)


def validate_scenario(sc: Scenario) -> None:
    ids = [s.id for s in sc.stages]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate stage ids")
    index = {s.id: i for i, s in enumerate(sc.stages)}
    for dep in sc.deps:
        if dep.producer not in index or dep.consumer not in index:
            raise ConfigError(f"dependency {dep.id} names unknown stage")
        if index[dep.producer] >= index[dep.consumer]:
            raise ConfigError(
                f"dependency {dep.id}: producer must be invoked before "
                f"consumer (cycles are not allowed)")
        prod = sc.stages[index[dep.producer]]
        cons = sc.stages[index[dep.consumer]]
        if dep.operand not in cons.operands:
            raise ConfigError(
                f"dependency {dep.id}: {dep.operand!r} is not an operand of "
                f"stage {cons.id}")
        check_policy(dep.policy, prod.grid)
        if cons.grid.x > prod.grid.x:
            raise ConfigError(
                f"dependency {dep.id}: consumer rows {cons.grid.x} exceed "
                f"producer rows {prod.grid.x}")
        if isinstance(dep.policy, _pol.TileSync) and cons.k_steps > prod.grid.y:
            raise ConfigError(
                f"dependency {dep.id}: tile sync needs one producer column "
                f"per consumer k-step ({cons.k_steps} > {prod.grid.y})")
        if isinstance(dep.policy, _pol.Conv2DTileSync):
            kk = dep.policy.kk
            if cons.k_steps % kk != 0:
                raise ConfigError(
                    f"dependency {dep.id}: kk {kk} does not divide consumer "
                    f"k_steps {cons.k_steps}")
            if cons.k_steps > kk * prod.grid.y:
                raise ConfigError(
                    f"dependency {dep.id}: consumer k_steps {cons.k_steps} "
                    f"exceed kk * producer columns {kk * prod.grid.y}")


def avoid_wait_kernel(producer: Stage, consumer: Stage, gpu: GpuConfig) -> bool:
    """True when the scheduling gate is unnecessary.

    Both kernels fit one combined wave, so every producer block is guaranteed
    a slot no matter how the runtime interleaves the two grids.
    """
    capacity = min(producer.occupancy, consumer.occupancy) * gpu.num_sms
    return producer.grid.total() + consumer.grid.total() <= capacity


def gated_producers(scenario: Scenario, stage: Stage) -> tuple[str, ...]:
    """Producer stages that must have started before `stage` may schedule.

    This is the wait-kernel rule: with the gate on, the consumer's blocks are
    held back until each gated producer has started at least one block. An
    empty result means the stage is never held back.
    """
    if scenario.mode is not Mode.FINE:
        return ()
    opt = scenario.options.wait_kernel
    if opt == "off":
        return ()
    gated = []
    for dep in scenario.deps:
        if dep.consumer != stage.id:
            continue
        producer = scenario.stage_by_id(dep.producer)
        if opt == "auto" and avoid_wait_kernel(producer, stage, scenario.gpu):
            continue
        if dep.producer not in gated:
            gated.append(dep.producer)
    return tuple(gated)


def kstep_duration(wait: float, dep_load: float, other_loads: float,
                   compute: float, reorder: bool = False) -> float:
    """Length of one k-step given its semaphore wait and tile-load costs.

    Without reordering the block waits, loads every operand tile, then
    computes. With reordering, the loads that do not depend on the producer
    are issued first and overlap the wait.
    """
    if reorder:
        return max(wait, other_loads) + dep_load + compute
    return wait + dep_load + other_loads + compute


@dataclass(frozen=True)
class Event:
    time: float
    stage: str
    tb: int
    kind: str  # scheduled | wait_begin | wait_end | post | finished
    tile: tuple[int, int, int]
    k: int | None = None
    dep: str | None = None
    sem: int | None = None
    expected: int | None = None
    value: int | None = None

    def to_json(self) -> str:
        rec = {"t": self.time, "stage": self.stage, "tb": self.tb,
               "kind": self.kind, "tile": list(self.tile)}
        for name in ("k", "sem", "expected", "value", "dep"):
            v = getattr(self, name)
            if v is not None:
                rec[name] = v
        return json.dumps(rec, sort_keys=True)

    @classmethod
    def from_json(cls, line: str) -> "Event":
        rec = json.loads(line)
        return cls(time=rec["t"], stage=rec["stage"], tb=rec["tb"],
                   kind=rec["kind"], tile=tuple(rec["tile"]),
                   k=rec.get("k"), dep=rec.get("dep"), sem=rec.get("sem"),
                   expected=rec.get("expected"), value=rec.get("value"))


@dataclass
class SimTrace:
    mode: Mode
    events: list[Event]
    final_semaphores: dict[str, tuple[int, ...]]

    def dump_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for ev in self.events:
                fh.write(ev.to_json() + "\n")

    @staticmethod
    def load_events(path) -> list[Event]:
        with open(path) as fh:
            return [Event.from_json(line) for line in fh if line.strip()]


@dataclass(frozen=True)
class StageMetrics:
    stage: str
    tbs: int
    waves_frac: Fraction
    waves_ceil: int
    utilization_pct: Fraction
    finish_time: float | None
    total_wait: float


@dataclass(frozen=True)
class Metrics:
    mode: Mode
    per_stage: tuple[StageMetrics, ...]
    combined_waves_frac: Fraction
    combined_waves_ceil_sum: int
    generations: int
    generation_sizes: tuple[int, ...]
    makespan: float
    total_wait: float
    deadlock: bool

    @property
    def combined_waves(self) -> Fraction | int:
        """Headline wave count: whole waves chained in stream mode, the
        fractional sum in fine mode."""
        if self.mode is Mode.STREAM:
            return self.combined_waves_ceil_sum
        return self.combined_waves_frac


# Event-loop phases at one timestamp: completions post and free slots first,
# then blocked/deferred blocks re-check, then new blocks are granted.
_FINISH, _RESUME, _GRANT = 0, 1, 2

_RUNNING, _DEFERRED, _BLOCKED, _WOKEN, _DONE = range(5)


class _DepRun:
    def __init__(self, dep: Dependency, producer: "_StageRun",
                 consumer: "_StageRun"):
        self.spec = dep
        self.producer = producer
        self.consumer = consumer
        self.sems = _pol.SemaphoreArray(sem_count(dep.policy, producer.spec.grid))
        self.waiters: dict[int, list[_TB]] = {}
        self.gated = False


class _StageRun:
    def __init__(self, spec: Stage, index: int, priority: int, cost: CostModel):
        self.spec = spec
        self.index = index
        self.priority = priority
        self.cost = cost
        self.total = spec.grid.total()
        self.counter = 0
        self.next_tb = 0
        self.started = False
        self.finished = 0
        self.resident = 0
        self.deps_in: list[_DepRun] = []
        self.deps_out: list[_DepRun] = []
        self.total_wait = 0
        self.finish_time: float | None = None


class _TB:
    __slots__ = ("stage", "index", "tile", "k", "state", "pending",
                 "check_time", "n_checks", "total_wait")

    def __init__(self, stage: _StageRun, index: int, tile: TileCoord):
        self.stage = stage
        self.index = index
        self.tile = tile
        self.k = 0
        self.state = _RUNNING
        self.pending: dict[tuple[int, int], tuple[_DepRun, WaitSpec]] = {}
        self.check_time = 0
        self.n_checks = 0
        self.total_wait = 0


class _Engine:
    def __init__(self, scenario: Scenario):
        self.sc = scenario
        self.gpu = scenario.gpu
        self.mode = scenario.mode
        n = len(scenario.stages)
        self.stages: list[_StageRun] = []
        for i, spec in enumerate(scenario.stages):
            base = spec.stream_priority if spec.stream_priority is not None else i
            prio = -base if scenario.options.adversarial_order else base
            self.stages.append(_StageRun(spec, i, prio,
                                         spec.cost or scenario.cost))
        by_id = {sr.spec.id: sr for sr in self.stages}
        self.deps: list[_DepRun] = []
        for dep in scenario.deps:
            dr = _DepRun(dep, by_id[dep.producer], by_id[dep.consumer])
            dr.producer.deps_out.append(dr)
            dr.consumer.deps_in.append(dr)
            self.deps.append(dr)
        for sr in self.stages:
            gated = set(gated_producers(scenario, sr.spec))
            for dr in sr.deps_in:
                dr.gated = dr.spec.producer in gated
        self.grant_order = sorted(self.stages,
                                  key=lambda s: (s.priority, s.index))
        self.resident_total = 0
        self.total_tbs = sum(sr.total for sr in self.stages)
        self.finished_tbs = 0
        self.heap: list = []
        self.seq = 0
        self.ev_seq = 0
        self.raw_events: list[tuple[float, int, Event]] = []
        self.grant_pending: set[float] = set()
        self.now = 0
        self.last_time = 0

    # -- event plumbing ------------------------------------------------

    def _push(self, time: float, phase: int, kind: str, payload) -> None:
        self.seq += 1
        heapq.heappush(self.heap, (time, phase, self.seq, kind, payload))

    def _emit(self, time, stage: _StageRun, tb: _TB, kind: str, **kw) -> None:
        self.ev_seq += 1
        ev = Event(time=time, stage=stage.spec.id, tb=tb.index, kind=kind,
                   tile=(tb.tile.x, tb.tile.y, tb.tile.z), **kw)
        self.raw_events.append((time, self.ev_seq, ev))
        if time > self.last_time:
            self.last_time = time

    def _request_grant(self, time: float) -> None:
        if time not in self.grant_pending:
            self.grant_pending.add(time)
            self._push(time, _GRANT, "grant", None)

    # -- eligibility and capacity ---------------------------------------

    def _eligible(self, sr: _StageRun) -> bool:
        if self.mode is Mode.STREAM:
            return all(prev.finished == prev.total
                       for prev in self.stages[:sr.index])
        return all(dr.producer.started for dr in sr.deps_in if dr.gated)

    def _fits(self, sr: _StageRun) -> bool:
        min_occ = sr.spec.occupancy
        for other in self.stages:
            if other.resident > 0:
                min_occ = min(min_occ, other.spec.occupancy)
        return self.resident_total + 1 <= min_occ * self.gpu.num_sms

    # -- handlers --------------------------------------------------------

    def _grant(self, _payload, t: float) -> None:
        self.grant_pending.discard(t)
        changed = True
        while changed:
            changed = False
            for sr in self.grant_order:
                if sr.next_tb >= sr.total or not self._eligible(sr):
                    continue
                while sr.next_tb < sr.total and self._fits(sr):
                    tile = order_tile(sr.spec.order, sr.spec.grid, sr.counter)
                    sr.counter += 1
                    tb = _TB(sr, sr.next_tb, tile)
                    sr.next_tb += 1
                    sr.started = True
                    sr.resident += 1
                    self.resident_total += 1
                    self._emit(t, sr, tb, "scheduled")
                    changed = True
                    self._advance(tb, t)

    def _waits_at(self, tb: _TB, k: int) -> list[tuple[_DepRun, WaitSpec]]:
        if self.mode is Mode.STREAM:
            return []
        out = []
        for dr in tb.stage.deps_in:
            w = consumer_wait(dr.spec.policy, tb.tile, k,
                              dr.producer.spec.grid, dr.producer.spec.grid.z)
            if w is not None:
                out.append((dr, w))
        return out

    def _kstep_len(self, sr: _StageRun, wait: float, n_checks: int) -> float:
        cost = sr.cost
        n_ops = len(sr.spec.operands)
        reorder = (self.sc.options.reorder_loads and self.mode is Mode.FINE
                   and wait > 0 and n_ops == 2 and len(sr.deps_in) == 1)
        if sr.deps_in and self.mode is Mode.FINE:
            dep_load = cost.load
            other = (n_ops - 1) * cost.load
        else:
            dep_load = n_ops * cost.load
            other = 0
        return (kstep_duration(wait, dep_load, other, cost.compute, reorder)
                + n_checks * cost.sync_overhead)

    def _advance(self, tb: _TB, v: float) -> None:
        """Run k-steps from virtual time v until blocking or finishing.

        Semaphores only grow, so a wait satisfied by the current state stays
        satisfied at any later virtual time and can be fast-forwarded. An
        unsatisfied wait at a future boundary is re-checked right at that
        boundary via a deferred resume.
        """
        sr = tb.stage
        tb.state = _RUNNING
        while tb.k < sr.spec.k_steps:
            ws = self._waits_at(tb, tb.k)
            if ws:
                unsat = [(dr, w) for dr, w in ws if not dr.sems.satisfied(w)]
                if unsat:
                    if v > self.now:
                        tb.state = _DEFERRED
                        self._push(v, _RESUME, "resume", tb)
                        return
                    for dr, w in ws:
                        self._emit(v, sr, tb, "wait_begin", k=tb.k,
                                   dep=dr.spec.id, sem=w.sem_index,
                                   expected=w.expected)
                    for dr, w in ws:
                        if dr.sems.satisfied(w):
                            self._emit(v, sr, tb, "wait_end", k=tb.k,
                                       dep=dr.spec.id, sem=w.sem_index,
                                       expected=w.expected)
                    tb.state = _BLOCKED
                    tb.check_time = v
                    tb.n_checks = len(ws)
                    for dr, w in unsat:
                        tb.pending[(id(dr), w.sem_index)] = (dr, w)
                        dr.waiters.setdefault(w.sem_index, []).append(tb)
                    return
                for dr, w in ws:
                    self._emit(v, sr, tb, "wait_begin", k=tb.k,
                               dep=dr.spec.id, sem=w.sem_index,
                               expected=w.expected)
                    self._emit(v, sr, tb, "wait_end", k=tb.k,
                               dep=dr.spec.id, sem=w.sem_index,
                               expected=w.expected)
            v += self._kstep_len(sr, 0, len(ws))
            tb.k += 1
        finish = v + sr.cost.epilogue + len(sr.deps_out) * sr.cost.sync_overhead
        self._push(finish, _FINISH, "finish", tb)

    def _resume(self, tb: _TB, t: float) -> None:
        if tb.state == _DEFERRED:
            self._advance(tb, t)
        elif tb.state == _WOKEN:
            wait = t - tb.check_time
            tb.total_wait += wait
            tb.stage.total_wait += wait
            end = tb.check_time + self._kstep_len(tb.stage, wait, tb.n_checks)
            tb.k += 1
            self._advance(tb, end)

    def _finish(self, tb: _TB, t: float) -> None:
        sr = tb.stage
        tb.state = _DONE
        for dr in sr.deps_out:
            idx = post_target(dr.spec.policy, tb.tile, sr.spec.grid)
            val = dr.sems.post(idx)
            self._emit(t, sr, tb, "post", dep=dr.spec.id, sem=idx, value=val)
            waiters = dr.waiters.get(idx)
            if not waiters:
                continue
            still = []
            for wtb in waiters:
                entry = wtb.pending.get((id(dr), idx))
                if entry is None:
                    continue
                _, spec = entry
                if val >= spec.expected:
                    del wtb.pending[(id(dr), idx)]
                    self._emit(t, wtb.stage, wtb, "wait_end", k=wtb.k,
                               dep=dr.spec.id, sem=idx, expected=spec.expected)
                    if not wtb.pending:
                        wtb.state = _WOKEN
                        self._push(t, _RESUME, "resume", wtb)
                else:
                    still.append(wtb)
            dr.waiters[idx] = still
        self._emit(t, sr, tb, "finished")
        sr.resident -= 1
        self.resident_total -= 1
        sr.finished += 1
        self.finished_tbs += 1
        if sr.finished == sr.total:
            sr.finish_time = t
        self._request_grant(t)

    # -- main loop ---------------------------------------------------------

    def run(self) -> tuple[SimTrace, Metrics]:
        self._request_grant(0)
        while self.heap:
            t, phase, _, kind, payload = heapq.heappop(self.heap)
            self.now = t
            if kind == "finish":
                self._finish(payload, t)
            elif kind == "resume":
                self._resume(payload, t)
            else:
                self._grant(payload, t)
        deadlock = detect_deadlock(self)
        return self._trace(), self._metrics(deadlock)

    def _trace(self) -> SimTrace:
        self.raw_events.sort(key=lambda rec: (rec[0], rec[1]))
        finals = {dr.spec.id: tuple(dr.sems.values) for dr in self.deps}
        return SimTrace(mode=self.mode,
                        events=[ev for _, _, ev in self.raw_events],
                        final_semaphores=finals)

    def _metrics(self, deadlock: bool) -> Metrics:
        per = []
        frac_sum = Fraction(0)
        ceil_sum = 0
        total_wait = 0
        for sr in self.stages:
            wc = waves(sr.total, self.gpu, sr.spec.occupancy)
            util = utilization(sr.total, self.gpu, sr.spec.occupancy)
            per.append(StageMetrics(
                stage=sr.spec.id, tbs=sr.total, waves_frac=wc.fractional,
                waves_ceil=wc.ceil, utilization_pct=util,
                finish_time=sr.finish_time, total_wait=sr.total_wait))
            frac_sum += wc.fractional
            ceil_sum += wc.ceil
            total_wait += sr.total_wait
        gen_times: dict[float, int] = {}
        for _, _, ev in self.raw_events:
            if ev.kind == "scheduled":
                gen_times[ev.time] = gen_times.get(ev.time, 0) + 1
        sizes = tuple(gen_times[t] for t in sorted(gen_times))
        makespan = self.last_time
        return Metrics(mode=self.mode, per_stage=tuple(per),
                       combined_waves_frac=frac_sum,
                       combined_waves_ceil_sum=ceil_sum,
                       generations=len(sizes), generation_sizes=sizes,
                       makespan=makespan, total_wait=total_wait,
                       deadlock=deadlock)


def detect_deadlock(engine: _Engine) -> bool:
    """Decide whether a drained engine stalled in a deadlock.

    Requires the event queue to be empty. A deadlock means unfinished blocks
    remain and every resident block sits in a wait whose semaphore can no
    longer reach the expected value, because no block can run or be granted
    a slot to produce further posts.
    """
    if engine.heap:
        raise RuntimeError("deadlock detection requires a drained event queue")
    if engine.finished_tbs == engine.total_tbs:
        return False
    # Nothing is executing (the queue is empty), so semaphore values are
    # final; each blocked block must be short of at least one of them.
    for sr in engine.stages:
        for dr in sr.deps_in:
            for waiters in dr.waiters.values():
                for tb in waiters:
                    short = [spec for owner, spec in tb.pending.values()
                             if not _satisfiable(owner, spec)]
                    if tb.state == _BLOCKED and not short:
                        raise RuntimeError(
                            "stalled block has only satisfiable waits")
    return True


def _satisfiable(dr: _DepRun, spec: WaitSpec) -> bool:
    return dr.sems.values[spec.sem_index] >= spec.expected


def simulate(scenario: Scenario) -> tuple[SimTrace, Metrics]:
    """Run the scenario to completion (or stall) and report trace + metrics."""
    return _Engine(scenario).run()
