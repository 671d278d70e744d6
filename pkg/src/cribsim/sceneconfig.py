"""Scene/environment config file: a line-oriented sectioned key-value
format (documented in docs/formats.md), validated with position-annotated
errors.

Sections: [env], [schedule], [body], [vision], [entity <name>],
[scenario-schedule], [contingent], [scripts].
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

from . import world
from .curriculum import STAGE_BY_LABEL, Stage, StageSchedule
from .errors import ParseError
from .scenario import ContingentRule, ScheduleEntry


@dataclass
class BodyConfig:
    root_pos: tuple = (0.0, 0.14, 0.0)
    root_rot: tuple = (1.0, 0.0, 0.0, 0.0)
    hunger_decay: int = 10  # millionths of a full stomach per step


@dataclass
class SceneConfig:
    seed: int = 0
    gravity: tuple = (0.0, -9.81, 0.0)
    gestation_offset_s: float = 4800.0
    background: tuple = (0.03, 0.03, 0.05)
    render: bool = True
    retina_size: int = 32
    schedule: StageSchedule = field(default_factory=StageSchedule)
    body: BodyConfig = field(default_factory=BodyConfig)
    entities: list = field(default_factory=list)
    scenario_schedule: list = field(default_factory=list)
    rules: list = field(default_factory=list)
    script_paths: list = field(default_factory=list)
    lexicon_path: Optional[str] = None
    base_dir: str = "."


def _floats(parts, n, source, ln):
    if len(parts) != n:
        raise ParseError(f"expected {n} numbers, got {len(parts)}", source, ln, 1)
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise ParseError(str(e), source, ln, 1) from None


def _shape(parts, source, ln) -> world.Shape:
    kind = parts[0] if parts else ""
    dims = parts[1:]
    try:
        shape = None
        if kind == "sphere":
            shape = world.sphere(*_floats(dims, 1, source, ln))
        elif kind == "box":
            shape = world.box(*_floats(dims, 3, source, ln))
        elif kind == "capsule":
            shape = world.capsule(*_floats(dims, 2, source, ln))
        elif kind == "plane":
            vals = _floats(dims, 4, source, ln)
            shape = world.plane(vals[0:3], vals[3])
        if shape is not None:
            shape.validate()
            return shape
    except (world.SceneError, ValueError) as e:
        raise ParseError(str(e), source, ln, 1) from None
    raise ParseError(f"unknown shape kind {kind!r}", source, ln, 1)


def parse_scene_config(text: str, source: str = "<config>") -> SceneConfig:
    cfg = SceneConfig()
    schedule_kv: dict[str, float] = {}
    section = None
    ent_name = None
    ent_kv: dict = {}
    ent_line = 0
    entities: list[world.EntitySpec] = []

    def err(msg, ln, col=1):
        raise ParseError(msg, source, ln, col)

    def flush_entity(ln):
        nonlocal ent_name, ent_kv
        if ent_name is None:
            return
        if "shape" not in ent_kv:
            err(f"entity {ent_name!r} missing 'shape'", ent_line)
        entities.append(world.EntitySpec(
            name=ent_name,
            shape=ent_kv["shape"],
            pos=ent_kv.get("pos", (0.0, 0.0, 0.0)),
            quat=ent_kv.get("rot", (1.0, 0.0, 0.0, 0.0)),
            color=ent_kv.get("color", (0.5, 0.5, 0.5)),
            tags=frozenset(ent_kv.get("tags", ())),
            dynamic=ent_kv.get("dynamic", False),
            mass=ent_kv.get("mass", 1.0),
            damping=ent_kv.get("damping", 0.1),
            entity_id=ent_kv.get("id"),
            group=ent_kv.get("group"),
        ))
        ent_name, ent_kv = None, {}

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        stripped = line.strip()
        if stripped.startswith("["):
            if not stripped.endswith("]"):
                err("unterminated section header", ln)
            flush_entity(ln)
            header = stripped[1:-1].split()
            if header[0] == "entity":
                if len(header) != 2:
                    err("expected '[entity <name>]'", ln)
                section = "entity"
                ent_name = header[1]
                ent_line = ln
            elif header[0] in ("env", "schedule", "body", "vision",
                               "scenario-schedule", "contingent", "scripts"):
                if len(header) != 1:
                    err(f"section [{header[0]}] takes no arguments", ln)
                section = header[0]
            else:
                err(f"unknown section [{header[0]}]", ln)
            continue

        parts = stripped.split()
        key = parts[0]
        vals = parts[1:]
        if section == "env":
            if key == "seed":
                cfg.seed = int(vals[0])
            elif key == "gravity":
                cfg.gravity = _floats(vals, 3, source, ln)
            elif key == "gestation_offset_s":
                cfg.gestation_offset_s = _floats(vals, 1, source, ln)[0]
            elif key == "background":
                cfg.background = _floats(vals, 3, source, ln)
            elif key == "render":
                cfg.render = vals[0].lower() in ("true", "1", "on")
            elif key == "lexicon":
                cfg.lexicon_path = vals[0]
            else:
                err(f"unknown [env] key {key!r}", ln)
        elif section == "schedule":
            if key in ("month_s", "birth_month", "immobile_end_month",
                       "crawling_end_month", "walking_end_month"):
                schedule_kv[key] = _floats(vals, 1, source, ln)[0]
            else:
                err(f"unknown [schedule] key {key!r}", ln)
        elif section == "body":
            if key == "root_pos":
                cfg.body.root_pos = _floats(vals, 3, source, ln)
            elif key == "root_rot":
                cfg.body.root_rot = _floats(vals, 4, source, ln)
            elif key == "hunger_decay":
                cfg.body.hunger_decay = int(vals[0])
            else:
                err(f"unknown [body] key {key!r}", ln)
        elif section == "vision":
            if key == "retina_size":
                cfg.retina_size = int(vals[0])
            else:
                err(f"unknown [vision] key {key!r}", ln)
        elif section == "entity":
            if key == "shape":
                ent_kv["shape"] = _shape(vals, source, ln)
            elif key == "pos":
                ent_kv["pos"] = _floats(vals, 3, source, ln)
            elif key == "rot":
                ent_kv["rot"] = _floats(vals, 4, source, ln)
            elif key == "color":
                ent_kv["color"] = _floats(vals, 3, source, ln)
            elif key == "tags":
                ent_kv["tags"] = tuple(vals)
            elif key == "dynamic":
                ent_kv["dynamic"] = vals[0].lower() in ("true", "1", "on")
            elif key == "mass":
                ent_kv["mass"] = _floats(vals, 1, source, ln)[0]
            elif key == "damping":
                ent_kv["damping"] = _floats(vals, 1, source, ln)[0]
            elif key == "id":
                try:
                    ent_kv["id"] = int(vals[0])
                except ValueError:
                    err(f"bad entity id {vals[0]!r}", ln)
            elif key == "group":
                ent_kv["group"] = vals[0]
            else:
                err(f"unknown entity key {key!r}", ln)
        elif section == "scenario-schedule":
            if key == "at":
                if len(vals) != 2 or not vals[0].isdigit():
                    err("expected 'at <step> <scenario>'", ln)
                cfg.scenario_schedule.append(
                    ScheduleEntry(vals[1], "at", at_step=int(vals[0])))
            elif key == "periodic":
                if len(vals) != 3 or not (vals[0].isdigit() and vals[1].isdigit()):
                    err("expected 'periodic <period> <phase> <scenario>'", ln)
                cfg.scenario_schedule.append(
                    ScheduleEntry(vals[2], "periodic",
                                  period=int(vals[0]), phase=int(vals[1])))
            elif key == "stage":
                if len(vals) != 2 or vals[0] not in STAGE_BY_LABEL:
                    err("expected 'stage <Fetus|Immobile|Crawling|Walking> "
                        "<scenario>'", ln)
                cfg.scenario_schedule.append(
                    ScheduleEntry(vals[1], "stage", stage=STAGE_BY_LABEL[vals[0]]))
            else:
                err(f"unknown [scenario-schedule] key {key!r}", ln)
        elif section == "contingent":
            # rule <id> touched <tag> <K> <response> refractory <steps>
            # rule <id> vocalized <K> <response> refractory <steps>
            # rule <id> fixated <tag> <M> <response> refractory <steps>
            if key != "rule":
                err(f"unknown [contingent] key {key!r}", ln)
            try:
                rid, kind = vals[0], vals[1]
                if kind == "vocalized":
                    tag, window, response = None, int(vals[2]), vals[3]
                    rest = vals[4:]
                else:
                    tag, window, response = vals[2], int(vals[3]), vals[4]
                    rest = vals[5:]
                if kind not in ("touched", "vocalized", "fixated"):
                    raise ValueError(f"unknown predicate {kind!r}")
                if rest[:1] != ["refractory"]:
                    raise ValueError("missing 'refractory <steps>'")
                refractory = int(rest[1])
                cfg.rules.append(ContingentRule(rid, kind, tag, window,
                                                response, refractory))
            except (IndexError, ValueError) as e:
                err(f"bad rule: {e}", ln)
        elif section == "scripts":
            if key == "file":
                cfg.script_paths.append(vals[0])
            else:
                err(f"unknown [scripts] key {key!r}", ln)
        else:
            err(f"key {key!r} outside any section", ln)

    flush_entity(len(text.splitlines()))
    cfg.entities = entities
    if schedule_kv:
        month = schedule_kv.get("month_s", 600.0)
        try:
            cfg.schedule = StageSchedule(
                month_s=month,
                birth_age=schedule_kv.get("birth_month", 9) * month,
                immobile_end=schedule_kv.get("immobile_end_month", 12) * month,
                crawling_end=schedule_kv.get("crawling_end_month", 19) * month,
                walking_end=schedule_kv.get("walking_end_month", 27) * month,
            )
        except ValueError as e:
            raise ParseError(str(e), source, 1, 1) from None
    return cfg


def load_scene_config(path: str | Path) -> SceneConfig:
    p = Path(path)
    cfg = parse_scene_config(p.read_text(), source=str(p))
    cfg.base_dir = str(p.parent)
    return cfg


OVERRIDE_KEYS = {
    "seed", "gestation_offset_s", "render", "stage", "retina_size",
    "schedule.month_s", "schedule.birth_age", "schedule.immobile_end",
    "schedule.crawling_end", "schedule.walking_end",
    "body.hunger_decay",
}


def apply_overrides(cfg: SceneConfig, overrides: dict) -> SceneConfig:
    """Copy cfg with overrides applied; unknown keys raise ValueError
    naming the key. 'stage' jumps the gestation offset so the run starts
    at that stage's onset."""
    out = dataclasses.replace(cfg)
    out.body = dataclasses.replace(cfg.body)
    out.entities = list(cfg.entities)
    out.scenario_schedule = list(cfg.scenario_schedule)
    out.rules = list(cfg.rules)
    out.script_paths = list(cfg.script_paths)
    sched = dataclasses.asdict(cfg.schedule)
    for key, value in overrides.items():
        if key not in OVERRIDE_KEYS:
            raise ValueError(f"unknown override key {key!r}")
        if key == "seed":
            out.seed = int(value)
        elif key == "gestation_offset_s":
            out.gestation_offset_s = float(value)
        elif key == "render":
            out.render = bool(value)
        elif key == "retina_size":
            out.retina_size = int(value)
        elif key == "stage":
            stage = STAGE_BY_LABEL.get(str(value))
            if stage is None:
                raise ValueError(f"unknown stage {value!r}")
            out.gestation_offset_s = StageSchedule(**sched).stage_span(stage)[0]
        elif key.startswith("schedule."):
            sched[key.split(".", 1)[1]] = float(value)
        elif key == "body.hunger_decay":
            out.body.hunger_decay = int(value)
    out.schedule = StageSchedule(**sched)
    if "stage" in overrides:
        out.gestation_offset_s = out.schedule.stage_span(
            STAGE_BY_LABEL[str(overrides["stage"])])[0]
    return out
