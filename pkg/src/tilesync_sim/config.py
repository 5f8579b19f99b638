"""Scenario config files: a strict, versioned JSON schema.

Presets are the primary interface; files are the escape hatch for custom
scenarios. Unknown keys are errors, not warnings, so typos cannot silently
change a run.
"""

from __future__ import annotations

import json
from typing import Any

from .engine import (CostModel, Dependency, Mode, Scenario, SimOptions,
                     Stage)
from .errors import ConfigError
from .gpu import Dim3, GpuConfig
from .policies import (Conv2DTileSync, RowMajor, RowSync, StridedRowMajor,
                       StridedSync, SyncPolicy, TileOrder, TileSync)

SCHEMA_VERSION = 1


def _require_keys(obj: dict, allowed: set[str], required: set[str],
                  where: str) -> None:
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{where}: unknown keys {sorted(unknown)}")
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


def _parse_policy(obj: Any, where: str) -> SyncPolicy:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where}: policy must be an object with a 'kind'")
    kind = obj["kind"]
    if kind == "tile":
        _require_keys(obj, {"kind"}, {"kind"}, where)
        return TileSync()
    if kind == "row":
        _require_keys(obj, {"kind"}, {"kind"}, where)
        return RowSync()
    if kind == "strided":
        _require_keys(obj, {"kind", "stride"}, {"kind", "stride"}, where)
        return StridedSync(int(obj["stride"]))
    if kind == "conv2dtile":
        _require_keys(obj, {"kind", "kk"}, {"kind", "kk"}, where)
        return Conv2DTileSync(int(obj["kk"]))
    raise ConfigError(f"{where}: unknown policy kind {kind!r}")


def _parse_order(obj: Any, where: str) -> TileOrder:
    if obj == "row_major":
        return RowMajor()
    if isinstance(obj, dict) and obj.get("kind") == "strided_row_major":
        _require_keys(obj, {"kind", "stride"}, {"kind", "stride"}, where)
        return StridedRowMajor(int(obj["stride"]))
    raise ConfigError(f"{where}: order must be 'row_major' or "
                      f"{{kind: strided_row_major, stride: n}}")


def _parse_grid(obj: Any, where: str) -> Dim3:
    if (not isinstance(obj, list) or len(obj) != 3
            or not all(isinstance(v, int) for v in obj)):
        raise ConfigError(f"{where}: grid must be a list of three integers")
    return Dim3(*obj)


def scenario_from_dict(doc: dict, mode: Mode = Mode.FINE) -> Scenario:
    _require_keys(doc, {"schema_version", "gpu", "stages", "deps", "options",
                        "cost"}, {"schema_version", "gpu", "stages"}, "config")
    if doc["schema_version"] != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version "
                          f"{doc['schema_version']!r} (expected "
                          f"{SCHEMA_VERSION})")
    _require_keys(doc["gpu"], {"num_sms"}, {"num_sms"}, "gpu")
    gpu = GpuConfig(int(doc["gpu"]["num_sms"]))

    stages = []
    for i, sobj in enumerate(doc["stages"]):
        where = f"stages[{i}]"
        _require_keys(sobj, {"id", "grid", "occupancy", "k_steps", "order",
                             "operands", "stream_priority"},
                      {"id", "grid"}, where)
        stages.append(Stage(
            id=str(sobj["id"]),
            grid=_parse_grid(sobj["grid"], where),
            occupancy=int(sobj.get("occupancy", 1)),
            k_steps=int(sobj.get("k_steps", 1)),
            order=_parse_order(sobj.get("order", "row_major"), where),
            operands=tuple(sobj.get("operands", ("a", "b"))),
            stream_priority=sobj.get("stream_priority")))

    deps = []
    for i, dobj in enumerate(doc.get("deps", [])):
        where = f"deps[{i}]"
        _require_keys(dobj, {"producer", "consumer", "operand", "policy"},
                      {"producer", "consumer"}, where)
        deps.append(Dependency(
            producer=str(dobj["producer"]),
            consumer=str(dobj["consumer"]),
            operand=str(dobj.get("operand", "a")),
            policy=_parse_policy(dobj.get("policy", {"kind": "row"}), where)))

    options = SimOptions()
    if "options" in doc:
        oobj = doc["options"]
        _require_keys(oobj, {"wait_kernel", "reorder_loads",
                             "adversarial_order"}, set(), "options")
        options = SimOptions(
            wait_kernel=oobj.get("wait_kernel", "auto"),
            reorder_loads=bool(oobj.get("reorder_loads", False)),
            adversarial_order=bool(oobj.get("adversarial_order", False)))

    cost = CostModel()
    if "cost" in doc:
        cobj = doc["cost"]
        _require_keys(cobj, {"load", "compute", "sync_overhead", "epilogue"},
                      set(), "cost")
        cost = CostModel(load=cobj.get("load", 1),
                         compute=cobj.get("compute", 1),
                         sync_overhead=cobj.get("sync_overhead", 0),
                         epilogue=cobj.get("epilogue", 0))

    return Scenario(gpu=gpu, stages=tuple(stages), deps=tuple(deps),
                    mode=mode, options=options, cost=cost)


def load_scenario(path, mode: Mode = Mode.FINE) -> Scenario:
    with open(path) as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return scenario_from_dict(doc, mode)


def _policy_to_dict(policy: SyncPolicy) -> dict:
    if isinstance(policy, TileSync):
        return {"kind": "tile"}
    if isinstance(policy, RowSync):
        return {"kind": "row"}
    if isinstance(policy, StridedSync):
        return {"kind": "strided", "stride": policy.stride}
    return {"kind": "conv2dtile", "kk": policy.kk}


def scenario_to_dict(sc: Scenario) -> dict:
    stages = []
    for s in sc.stages:
        sobj: dict[str, Any] = {
            "id": s.id, "grid": [s.grid.x, s.grid.y, s.grid.z],
            "occupancy": s.occupancy, "k_steps": s.k_steps,
            "operands": list(s.operands)}
        if isinstance(s.order, StridedRowMajor):
            sobj["order"] = {"kind": "strided_row_major",
                             "stride": s.order.stride}
        else:
            sobj["order"] = "row_major"
        if s.stream_priority is not None:
            sobj["stream_priority"] = s.stream_priority
        stages.append(sobj)
    return {
        "schema_version": SCHEMA_VERSION,
        "gpu": {"num_sms": sc.gpu.num_sms},
        "stages": stages,
        "deps": [{"producer": d.producer, "consumer": d.consumer,
                  "operand": d.operand, "policy": _policy_to_dict(d.policy)}
                 for d in sc.deps],
        "options": {"wait_kernel": sc.options.wait_kernel,
                    "reorder_loads": sc.options.reorder_loads,
                    "adversarial_order": sc.options.adversarial_order},
        "cost": {"load": sc.cost.load, "compute": sc.cost.compute,
                 "sync_overhead": sc.cost.sync_overhead,
                 "epilogue": sc.cost.epilogue},
    }
