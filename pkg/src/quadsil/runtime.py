"""Typed message bus, node registry, deterministic scheduler, CSV logs.

Execution model: a single logical clock ticks at the physics rate. Each
tick runs the bound nodes in a fixed order (sim, estimator, planner,
manager, follower, controller, then the sim's firmware slot, then the
logger); a node executes when the tick lands on its period. Messages
published during a tick are visible to nodes later in the order on the
same tick and to earlier nodes on the next tick. Nothing depends on wall
time, so a (config, seed) pair fully determines every published value.

Logs are one CSV per topic plus a JSON manifest. Cells are written with
shortest round-trip float formatting so that replaying a log feeds the
exact float values the live run saw.
"""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

from .messages import SENSOR_PRIORITY, SENSOR_TOPICS, TOPIC_SCHEMAS

SCHEMA_VERSION = 1

ROLE_ORDER = ("sim", "estimator", "planner", "manager", "follower", "controller", "logger")


class RuntimeError_(RuntimeError):
    pass


class DuplicateRole(RuntimeError_):
    pass


class UnknownImplementation(RuntimeError_):
    pass


class SchemaMismatch(RuntimeError_):
    pass


class CorruptLog(RuntimeError_):
    def __init__(self, path, row):
        super().__init__(f"corrupted CSV row {row} in {path}")
        self.path = path
        self.row = row


class Topic:
    __slots__ = ("name", "schema", "history")

    def __init__(self, name, schema):
        self.name = name
        self.schema = schema
        self.history = []  # list of (stamp, payload)

    @property
    def latest(self):
        return self.history[-1] if self.history else None


class Bus:
    """Topic store with publish/latest/cursor access."""

    def __init__(self):
        self._topics: dict[str, Topic] = {}

    def declare(self, name: str, schema) -> Topic:
        existing = self._topics.get(name)
        if existing is not None:
            if existing.schema is not schema:
                raise SchemaMismatch(f"topic {name} already bound to another schema")
            return existing
        topic = Topic(name, schema)
        self._topics[name] = topic
        return topic

    def publish(self, name: str, stamp: float, payload) -> None:
        topic = self._topics.get(name)
        if topic is None:
            topic = self.declare(name, type(payload))
        if not isinstance(payload, topic.schema):
            raise SchemaMismatch(
                f"topic {name} expects {topic.schema.__name__}, got {type(payload).__name__}"
            )
        topic.history.append((stamp, payload))

    def latest(self, name: str):
        topic = self._topics.get(name)
        return topic.latest if topic else None

    def read_new(self, name: str, cursor: int):
        topic = self._topics.get(name)
        if topic is None:
            return [], cursor
        history = topic.history
        return history[cursor:], len(history)

    def history(self, name: str):
        topic = self._topics.get(name)
        return list(topic.history) if topic else []

    def topics(self):
        return dict(self._topics)

    def counts(self):
        return {name: len(t.history) for name, t in self._topics.items()}


class Node:
    """Base node: a role, a tick rate, and a work function."""

    role = "node"
    has_post_work = False

    def __init__(self, rate_hz: float, params: dict | None = None):
        self.rate_hz = float(rate_hz)
        self.params = params or {}
        self.bus: Bus | None = None

    def bind(self, bus: Bus) -> None:
        self.bus = bus

    def work(self, t: float) -> None:  # pragma: no cover - abstract
        raise NotImplementedError

    def post_work(self, t: float) -> None:
        pass


@dataclass
class NodeDescriptor:
    role: str
    implementation: str
    rate_hz: float
    params: dict = field(default_factory=dict)


_IMPLEMENTATIONS: dict[str, dict[str, object]] = {}


def register_implementation(role: str, name: str, factory) -> None:
    """Make a node implementation available to descriptors by name."""
    _IMPLEMENTATIONS.setdefault(role, {})[name] = factory


class Registry:
    """Binds exactly one implementation per role."""

    def __init__(self):
        self._nodes: dict[str, Node] = {}

    def bind(self, descriptor: NodeDescriptor) -> Node:
        if descriptor.role in self._nodes:
            raise DuplicateRole(f"role {descriptor.role} is already bound")
        factories = _IMPLEMENTATIONS.get(descriptor.role, {})
        factory = factories.get(descriptor.implementation)
        if factory is None:
            raise UnknownImplementation(
                f"no implementation {descriptor.implementation!r} for role {descriptor.role!r}"
            )
        node = factory(descriptor.rate_hz, descriptor.params)
        node.role = descriptor.role
        self._nodes[descriptor.role] = node
        return node

    def bind_node(self, role: str, node: Node) -> Node:
        """Bind an already-constructed node (used by tests and the CLI)."""
        if role in self._nodes:
            raise DuplicateRole(f"role {role} is already bound")
        node.role = role
        self._nodes[role] = node
        return node

    def get(self, role: str) -> Node | None:
        return self._nodes.get(role)

    def bound_roles(self):
        return dict(self._nodes)


@dataclass
class RunReport:
    status: str  # "completed" | "finished" | "failsafe"
    t_end: float
    ticks: int
    fault: str | None
    counts: dict
    mission_complete: bool


class Scheduler:
    """Fixed-step, single-threaded executor over the bound roles."""

    def __init__(self, registry: Registry, bus: Bus, physics_rate: float = 1000.0,
                 completion_grace: float = 1.0):
        self.registry = registry
        self.bus = bus
        self.physics_rate = float(physics_rate)
        self.completion_grace = completion_grace

    def run(self, duration: float) -> RunReport:
        base_dt = 1.0 / self.physics_rate
        nodes = self.registry.bound_roles()
        periods = {}
        for role, node in nodes.items():
            period = self.physics_rate / node.rate_hz
            if abs(period - round(period)) > 1e-9:
                raise ValueError(f"{role} rate {node.rate_hz} must divide the physics rate")
            periods[role] = int(round(period))
            node.bind(self.bus)

        ordered = [role for role in ROLE_ORDER if role in nodes]
        sim_node = nodes.get("sim")
        n_ticks = int(round(duration * self.physics_rate))
        fault = None
        status = "finished"
        complete_at: float | None = None
        t = 0.0
        ticks_done = 0
        for k in range(n_ticks):
            t = k * base_dt
            try:
                for role in ordered:
                    if role == "logger":
                        continue
                    if k % periods[role] == 0:
                        nodes[role].work(t)
                if sim_node is not None and k % periods["sim"] == 0:
                    sim_node.post_work(t)
                if "logger" in nodes and k % periods["logger"] == 0:
                    nodes["logger"].work(t)
            except Exception as exc:  # node fault -> failsafe stop
                fault = f"{type(exc).__name__}: {exc}"
                status = "failsafe"
                ticks_done = k + 1
                break
            ticks_done = k + 1
            if complete_at is None:
                latest = self.bus.latest("mission")
                if latest is not None and latest[1].complete:
                    complete_at = t
            elif t - complete_at >= self.completion_grace:
                status = "completed"
                break

        mission_msg = self.bus.latest("mission")
        mission_complete = bool(mission_msg and mission_msg[1].complete)
        if status == "finished" and mission_complete:
            status = "completed"
        return RunReport(
            status=status,
            t_end=t,
            ticks=ticks_done,
            fault=fault,
            counts=self.bus.counts(),
            mission_complete=mission_complete,
        )


# ---------------------------------------------------------------------------
# CSV record / replay


def _format_cell(value) -> str:
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_run_dir(out_dir: str, bus: Bus, meta: dict) -> str:
    """Write one CSV per topic plus manifest.json; returns the manifest path."""
    os.makedirs(out_dir, exist_ok=True)
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "topics": {},
    }
    manifest.update(meta)
    for name, topic in sorted(bus.topics().items()):
        schema = topic.schema
        filename = f"{name}.csv"
        path = os.path.join(out_dir, filename)
        with open(path, "w") as fh:
            fh.write("t," + ",".join(schema.COLUMNS) + "\n")
            for stamp, payload in topic.history:
                cells = [_format_cell(stamp)] + [_format_cell(v) for v in payload.to_row()]
                fh.write(",".join(cells) + "\n")
        manifest["topics"][name] = {
            "file": filename,
            "columns": list(schema.COLUMNS),
            "units": list(getattr(schema, "UNITS", ())),
        }
    manifest_path = os.path.join(out_dir, "manifest.json")
    with open(manifest_path, "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return manifest_path


def read_manifest(run_dir: str) -> dict:
    path = os.path.join(run_dir, "manifest.json")
    if not os.path.exists(path):
        raise SchemaMismatch(f"no manifest.json in {run_dir}")
    with open(path) as fh:
        manifest = json.load(fh)
    if manifest.get("schema_version") != SCHEMA_VERSION:
        raise SchemaMismatch(
            f"log schema version {manifest.get('schema_version')} != {SCHEMA_VERSION}"
        )
    return manifest


def read_topic(run_dir: str, name: str, manifest: dict | None = None):
    """Parse one topic CSV into [(stamp, payload)].

    A malformed final row is treated as truncation and dropped; a
    malformed row with valid rows after it raises CorruptLog.
    """
    manifest = manifest or read_manifest(run_dir)
    entry = manifest["topics"].get(name)
    if entry is None:
        raise SchemaMismatch(f"topic {name} not present in manifest")
    schema = TOPIC_SCHEMAS[name]
    path = os.path.join(run_dir, entry["file"])
    with open(path) as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise CorruptLog(path, 0)
    header = lines[0].split(",")
    if header != ["t"] + list(schema.COLUMNS):
        raise SchemaMismatch(f"column mismatch in {path}")
    rows = []
    bad_row = None
    last_t = None
    for i, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        cells = line.split(",")
        try:
            if len(cells) != len(header):
                raise ValueError("cell count")
            stamp = float(cells[0])
            values = []
            for cell in cells[1:]:
                try:
                    values.append(float(cell))
                except ValueError:
                    values.append(cell)
            payload = schema.from_row(values)
            if last_t is not None and stamp < last_t:
                raise ValueError("non-monotone time")
        except (ValueError, IndexError):
            if bad_row is None:
                bad_row = i
                continue
            raise CorruptLog(path, bad_row)
        if bad_row is not None:
            # a valid row after a malformed one means real corruption
            raise CorruptLog(path, bad_row)
        last_t = stamp
        rows.append((stamp, payload))
    return rows


def load_run(run_dir: str, topics=None) -> dict:
    manifest = read_manifest(run_dir)
    names = topics if topics is not None else list(manifest["topics"])
    return {name: read_topic(run_dir, name, manifest) for name in names if name in manifest["topics"]}


def sensor_stream(run_dir: str):
    """Recorded sensor messages merged in (stamp, ingest-priority) order."""
    manifest = read_manifest(run_dir)
    merged = []
    for name in SENSOR_TOPICS:
        if name in manifest["topics"]:
            for stamp, payload in read_topic(run_dir, name, manifest):
                merged.append((stamp, SENSOR_PRIORITY[name], name, payload))
    merged.sort(key=lambda item: (item[0], item[1]))
    for stamp, _, name, payload in merged:
        yield name, stamp, payload
