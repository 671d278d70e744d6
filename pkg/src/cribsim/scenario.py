"""Caregiver behavior system: scenario scripts (a line-oriented DSL),
a deterministic scheduler, and contingent responses to infant behavior.

Script grammar (documented in docs/formats.md):

    scenario <id>
    duration <steps>
    token_steps <steps>            # optional, default 25
    use <scene-entity-name>        # reference an entity owned by the scene
    entity <name> sphere <r> color <r g b> [tags ...]
    entity <name> box <hx> <hy> <hz> color <r g b> [tags ...]
    entity <name> capsule <r> <hl> color <r g b> [tags ...]
    track <name>
    key <step> pos <x> <y> <z> [rot <w> <x> <y> <z>]
    end
    utter <start> <amplitude> <word> [<word> ...]
    action <step> spawn <name> <x> <y> <z>
    action <step> move <name> <x> <y> <z>
    action <step> despawn <name>
    action <step> feed <amount>

Utterances play their words over equal spans of token_steps ticks at a
constant amplitude. Playback applies keyframe tracks with linear position
interpolation (normalized-lerp rotation), clamped at the ends.
"""

from __future__ import annotations

import bisect
from collections import deque
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import world
from .curriculum import Stage, STAGE_BY_LABEL
from .errors import ParseError
from .geometry import quat_nlerp

SILENCE_TOKEN = 0
DEFAULT_TOKEN_STEPS = 25
RESPONSE_QUEUE_CAP = 4


class Lexicon:
    """Token id <-> word manifest. Id 0 is reserved for silence."""

    def __init__(self, words: dict[int, str]):
        if 0 in words and words[0] != "<silence>":
            raise ValueError("token 0 is reserved for silence")
        self.id_to_word = {0: "<silence>", **words}
        self.word_to_id = {w: i for i, w in self.id_to_word.items()}

    @classmethod
    def parse(cls, text: str, source: str = "<lexicon>") -> "Lexicon":
        words: dict[int, str] = {}
        for ln, raw in enumerate(text.splitlines(), start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            parts = line.split()
            if len(parts) != 2 or not parts[0].isdigit():
                raise ParseError("expected '<id> <word>'", source, ln, 1)
            tid = int(parts[0])
            if tid == 0:
                raise ParseError("token 0 is reserved for silence", source, ln, 1)
            if tid in words:
                raise ParseError(f"duplicate token id {tid}", source, ln, 1)
            if parts[1] in words.values():
                raise ParseError(f"duplicate word {parts[1]!r}", source, ln, 1)
            words[tid] = parts[1]
        return cls(words)

    def serialize(self) -> str:
        lines = [f"{i} {w}" for i, w in sorted(self.id_to_word.items()) if i != 0]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Keyframe:
    step: int
    pos: tuple
    rot: Optional[tuple] = None


@dataclass(frozen=True)
class KeyframeTrack:
    entity: str
    keys: tuple


@dataclass(frozen=True)
class UtteranceSpan:
    start: int
    amplitude: float
    words: tuple  # human-readable
    tokens: tuple  # lexicon ids, same length


@dataclass(frozen=True)
class ObjectAction:
    step: int
    kind: str  # spawn | move | despawn | feed
    entity: Optional[str] = None
    pos: Optional[tuple] = None
    amount: Optional[float] = None


@dataclass(frozen=True)
class ScriptEntity:
    name: str
    shape_kind: str
    shape_params: tuple
    color: tuple = (0.6, 0.6, 0.6)
    tags: tuple = ()


@dataclass(frozen=True)
class Utterance:
    token: int = SILENCE_TOKEN
    amplitude: float = 0.0


@dataclass(frozen=True)
class ScenarioScript:
    script_id: str
    duration: int
    token_steps: int = DEFAULT_TOKEN_STEPS
    uses: tuple = ()
    entities: tuple = ()
    tracks: tuple = ()
    utterances: tuple = ()
    actions: tuple = ()


def _floats(parts: Sequence[str], n: int, source, ln) -> tuple:
    if len(parts) != n:
        raise ParseError(f"expected {n} numbers, got {len(parts)}", source, ln, 1)
    try:
        return tuple(float(p) for p in parts)
    except ValueError as e:
        raise ParseError(str(e), source, ln, 1) from None


_SHAPE_ARITY = {"sphere": 1, "box": 3, "capsule": 2}


def parse_script(text: str, lexicon: Lexicon,
                 source: str = "<script>") -> ScenarioScript:
    """Parse scenario source; all errors carry source:line:column."""
    script_id = None
    duration = None
    token_steps = DEFAULT_TOKEN_STEPS
    uses: list[str] = []
    entities: list[ScriptEntity] = []
    tracks: list[KeyframeTrack] = []
    utterances: list[UtteranceSpan] = []
    actions: list[ObjectAction] = []

    cur_track: Optional[str] = None
    cur_keys: list[Keyframe] = []

    def err(msg: str, ln: int, col: int = 1):
        raise ParseError(msg, source, ln, col)

    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].rstrip()
        if not line.strip():
            continue
        parts = line.split()
        word = parts[0]
        col = line.index(word) + 1

        if cur_track is not None and word not in ("key", "end"):
            err("track block must end with 'end'", ln, col)

        if word == "scenario":
            if len(parts) != 2:
                err("expected 'scenario <id>'", ln, col)
            script_id = parts[1]
        elif word == "duration":
            if len(parts) != 2 or not parts[1].isdigit():
                err("expected 'duration <steps>'", ln, col)
            duration = int(parts[1])
        elif word == "token_steps":
            if len(parts) != 2 or not parts[1].isdigit():
                err("expected 'token_steps <steps>'", ln, col)
            token_steps = int(parts[1])
        elif word == "use":
            if len(parts) != 2:
                err("expected 'use <entity-name>'", ln, col)
            uses.append(parts[1])
        elif word == "entity":
            if len(parts) < 3:
                err("expected 'entity <name> <shape> ...'", ln, col)
            name, shape_kind = parts[1], parts[2]
            arity = _SHAPE_ARITY.get(shape_kind)
            if arity is None:
                err(f"unknown shape {shape_kind!r}", ln, line.index(shape_kind) + 1)
            rest = parts[3:]
            if len(rest) < arity:
                err(f"{shape_kind} needs {arity} dimension(s)", ln, col)
            params = _floats(rest[:arity], arity, source, ln)
            if min(params) <= 0:
                err(f"{shape_kind} dimensions must be positive", ln, col)
            rest = rest[arity:]
            color = (0.6, 0.6, 0.6)
            tags: tuple = ()
            while rest:
                if rest[0] == "color":
                    color = _floats(rest[1:4], 3, source, ln)
                    rest = rest[4:]
                elif rest[0] == "tags":
                    tags = tuple(rest[1:])
                    rest = []
                else:
                    err(f"unexpected token {rest[0]!r}", ln, line.index(rest[0]) + 1)
            entities.append(ScriptEntity(name, shape_kind, params, color, tags))
        elif word == "track":
            if len(parts) != 2:
                err("expected 'track <entity-name>'", ln, col)
            cur_track = parts[1]
            cur_keys = []
        elif word == "key":
            if cur_track is None:
                err("'key' outside a track block", ln, col)
            if len(parts) < 6 or parts[2] != "pos" or not parts[1].isdigit():
                err("expected 'key <step> pos <x> <y> <z> [rot <w> <x> <y> <z>]'", ln, col)
            step = int(parts[1])
            pos = _floats(parts[3:6], 3, source, ln)
            rot = None
            rest = parts[6:]
            if rest:
                if rest[0] != "rot" or len(rest) != 5:
                    err("expected 'rot <w> <x> <y> <z>'", ln, line.index(rest[0]) + 1)
                rot = _floats(rest[1:], 4, source, ln)
            if cur_keys and step <= cur_keys[-1].step:
                err(f"keyframe step {step} not after previous "
                    f"step {cur_keys[-1].step}", ln, line.index(parts[1]) + 1)
            cur_keys.append(Keyframe(step, pos, rot))
        elif word == "end":
            if cur_track is None:
                err("'end' outside a track block", ln, col)
            if not cur_keys:
                err(f"track {cur_track!r} has no keyframes", ln, col)
            tracks.append(KeyframeTrack(cur_track, tuple(cur_keys)))
            cur_track = None
        elif word == "utter":
            if len(parts) < 4 or not parts[1].isdigit():
                err("expected 'utter <start> <amplitude> <word> ...'", ln, col)
            start = int(parts[1])
            try:
                amp = float(parts[2])
            except ValueError:
                err(f"bad amplitude {parts[2]!r}", ln, line.index(parts[2]) + 1)
            if not 0.0 <= amp <= 1.0:
                err("amplitude must be in [0, 1]", ln, line.index(parts[2]) + 1)
            words = tuple(parts[3:])
            tokens = []
            for w in words:
                tid = lexicon.word_to_id.get(w)
                if tid is None:
                    err(f"unknown token {w!r} (not in lexicon)",
                        ln, line.index(w) + 1)
                tokens.append(tid)
            utterances.append(UtteranceSpan(start, amp, words, tuple(tokens)))
        elif word == "action":
            if len(parts) < 3 or not parts[1].isdigit():
                err("expected 'action <step> <kind> ...'", ln, col)
            step, kind = int(parts[1]), parts[2]
            if kind == "feed":
                if len(parts) != 4:
                    err("expected 'action <step> feed <amount>'", ln, col)
                amount = _floats(parts[3:4], 1, source, ln)[0]
                if amount < 0:
                    err("feed amount must be non-negative", ln, col)
                actions.append(ObjectAction(step, "feed", amount=amount))
            elif kind in ("spawn", "move"):
                if len(parts) != 7:
                    err(f"expected 'action <step> {kind} <name> <x> <y> <z>'", ln, col)
                actions.append(ObjectAction(step, kind, entity=parts[3],
                                            pos=_floats(parts[4:7], 3, source, ln)))
            elif kind == "despawn":
                if len(parts) != 4:
                    err("expected 'action <step> despawn <name>'", ln, col)
                actions.append(ObjectAction(step, "despawn", entity=parts[3]))
            else:
                err(f"unknown action kind {kind!r}", ln, line.index(kind) + 1)
        else:
            err(f"unknown directive {word!r}", ln, col)

    if cur_track is not None:
        err("unterminated track block", len(text.splitlines()), 1)
    if script_id is None:
        err("missing 'scenario <id>' header", 1, 1)
    if duration is None or duration <= 0:
        err("missing or non-positive 'duration'", 1, 1)

    declared = set(uses) | {e.name for e in entities}
    for t in tracks:
        if t.entity not in declared:
            err(f"track references undeclared entity {t.entity!r}", 1, 1)
    for a in actions:
        if a.entity is not None:
            if a.kind in ("spawn",) and a.entity not in {e.name for e in entities}:
                err(f"spawn references undeclared script entity {a.entity!r}", 1, 1)
            if a.entity not in declared:
                err(f"action references undeclared entity {a.entity!r}", 1, 1)
        if not 0 <= a.step < duration:
            err(f"action step {a.step} outside [0, {duration})", 1, 1)

    return ScenarioScript(script_id, duration, token_steps, tuple(uses),
                          tuple(entities), tuple(tracks), tuple(utterances),
                          tuple(actions))


def serialize_script(s: ScenarioScript) -> str:
    """Canonical text form; parse(serialize(x)) is structurally x."""
    out = [f"scenario {s.script_id}", f"duration {s.duration}"]
    if s.token_steps != DEFAULT_TOKEN_STEPS:
        out.append(f"token_steps {s.token_steps}")
    for u in s.uses:
        out.append(f"use {u}")
    for e in s.entities:
        parts = [f"entity {e.name} {e.shape_kind}"]
        parts += [repr(p) for p in e.shape_params]
        parts.append("color " + " ".join(repr(c) for c in e.color))
        if e.tags:
            parts.append("tags " + " ".join(e.tags))
        out.append(" ".join(parts))
    for t in s.tracks:
        out.append(f"track {t.entity}")
        for k in t.keys:
            line = f"key {k.step} pos " + " ".join(repr(p) for p in k.pos)
            if k.rot is not None:
                line += " rot " + " ".join(repr(r) for r in k.rot)
            out.append(line)
        out.append("end")
    for u in s.utterances:
        out.append(f"utter {u.start} {u.amplitude!r} " + " ".join(u.words))
    for a in s.actions:
        if a.kind == "feed":
            out.append(f"action {a.step} feed {a.amount!r}")
        elif a.kind == "despawn":
            out.append(f"action {a.step} despawn {a.entity}")
        else:
            out.append(f"action {a.step} {a.kind} {a.entity} "
                       + " ".join(repr(p) for p in a.pos))
    return "\n".join(out) + "\n"


# -- scheduling ------------------------------------------------------------


@dataclass(frozen=True)
class ScheduleEntry:
    scenario_id: str
    trigger: str  # at | periodic | stage
    at_step: int = 0
    period: int = 0
    phase: int = 0
    stage: Optional[Stage] = None

    def fires(self, step: int, stage: Stage, prev_stage: Optional[Stage]) -> bool:
        if self.trigger == "at":
            return step == self.at_step
        if self.trigger == "periodic":
            return self.period > 0 and step % self.period == self.phase % self.period
        if self.trigger == "stage":
            return stage == self.stage and prev_stage != self.stage
        return False


@dataclass(frozen=True)
class ContingentRule:
    rule_id: str
    kind: str  # touched | vocalized | fixated
    tag: Optional[str]
    window: int  # K steps for touched/vocalized, M consecutive for fixated
    response_id: str
    refractory: int

    def __post_init__(self):
        if self.refractory < 1:
            raise ValueError("refractory must be >= 1")
        if self.window < 1:
            raise ValueError("predicate window must be >= 1")


class BehaviorLog:
    """Recent agent events the contingency rules read: touch-by-tag and
    vocalization step sets, plus consecutive-fixation counters per tag."""

    def __init__(self, horizon: int = 2000):
        self.horizon = horizon
        self.touched: deque = deque()  # (step, tag)
        self.vocalized: deque = deque()  # step
        self.fixation_counts: dict[str, int] = {}

    def record_step(self, step: int, touched_tags: set[str], vocalizing: bool,
                    fixated_tags: set[str]) -> None:
        for tag in sorted(touched_tags):
            self.touched.append((step, tag))
        if vocalizing:
            self.vocalized.append(step)
        for tag in list(self.fixation_counts):
            if tag not in fixated_tags:
                self.fixation_counts[tag] = 0
        for tag in fixated_tags:
            self.fixation_counts[tag] = self.fixation_counts.get(tag, 0) + 1
        cutoff = step - self.horizon
        while self.touched and self.touched[0][0] < cutoff:
            self.touched.popleft()
        while self.vocalized and self.vocalized[0] < cutoff:
            self.vocalized.popleft()

    def touched_within(self, tag: str, k: int, now: int) -> bool:
        return any(s > now - k and t == tag for s, t in self.touched)

    def vocalized_within(self, k: int, now: int) -> bool:
        return any(s > now - k for s in self.vocalized)

    def fixation_run(self, tag: str) -> int:
        return self.fixation_counts.get(tag, 0)


def evaluate_contingent(rules: Sequence[ContingentRule], log: BehaviorLog,
                        step: int, last_fired: dict[str, int]) -> list[str]:
    """Response scenario ids for rules whose predicate holds outside their
    refractory period; records firing steps in last_fired."""
    fired = []
    for rule in rules:
        prev = last_fired.get(rule.rule_id)
        if prev is not None and step - prev < rule.refractory:
            continue
        if rule.kind == "touched":
            ok = log.touched_within(rule.tag, rule.window, step)
        elif rule.kind == "vocalized":
            ok = log.vocalized_within(rule.window, step)
        elif rule.kind == "fixated":
            ok = log.fixation_run(rule.tag) >= rule.window
        else:
            ok = False
        if ok:
            last_fired[rule.rule_id] = step
            fired.append(rule.response_id)
    return fired


@dataclass
class PlaybackResult:
    utterance: Utterance
    fed: float = 0.0
    started: tuple = ()
    dropped: tuple = ()


class ScenarioEngine:
    """Owns the script library, schedule, contingent rules and playback
    state. One scenario plays at a time; responses queue FIFO (cap 4)."""

    def __init__(self, scene: world.Scene, scripts: dict[str, ScenarioScript],
                 schedule: Sequence[ScheduleEntry],
                 rules: Sequence[ContingentRule]):
        self.scene = scene
        self.scripts = dict(scripts)
        self.schedule = list(schedule)
        self.rules = list(rules)
        for entry in self.schedule:
            if entry.scenario_id not in self.scripts:
                raise ValueError(f"schedule references unknown scenario "
                                 f"{entry.scenario_id!r}")
        for rule in self.rules:
            if rule.response_id not in self.scripts:
                raise ValueError(f"rule {rule.rule_id!r} references unknown "
                                 f"scenario {rule.response_id!r}")
        self.active: Optional[str] = None
        self.active_start = 0
        self.queue: deque[str] = deque()
        self.last_fired: dict[str, int] = {}
        self.dropped_log: list[tuple[int, str]] = []
        self._entity_names: dict[tuple[str, str], str] = {}
        # pre-register script entities (inactive) so spawns never re-pack arrays
        for sid, script in sorted(self.scripts.items()):
            for ent in script.entities:
                scene_name = f"{sid}/{ent.name}"
                shape = {
                    "sphere": lambda p: world.sphere(*p),
                    "box": lambda p: world.box(*p),
                    "capsule": lambda p: world.capsule(*p),
                }[ent.shape_kind](ent.shape_params)
                scene.add_entity(
                    world.EntitySpec(name=scene_name, shape=shape,
                                     color=ent.color,
                                     tags=frozenset(ent.tags) | {"scenario"}),
                    active=False)
                self._entity_names[(sid, ent.name)] = scene_name

    def _resolve(self, sid: str, name: str) -> str:
        return self._entity_names.get((sid, name), name)

    def tick_scheduler(self, step: int, stage: Stage,
                       prev_stage: Optional[Stage]) -> list[str]:
        started = []
        for entry in self.schedule:
            if entry.fires(step, stage, prev_stage):
                started.append(entry.scenario_id)
        return started

    def _start_or_queue(self, sid: str, step: int) -> tuple[list[str], list[str]]:
        started, dropped = [], []
        if self.active == sid:
            return started, dropped  # already playing; not restarted
        if self.active is None:
            self.active = sid
            self.active_start = step
            started.append(sid)
        elif sid in self.queue:
            pass  # queued once
        elif len(self.queue) < RESPONSE_QUEUE_CAP:
            self.queue.append(sid)
        else:
            self.dropped_log.append((step, sid))
            dropped.append(sid)
        return started, dropped

    def step(self, step: int, stage: Stage, prev_stage: Optional[Stage],
             log: BehaviorLog) -> PlaybackResult:
        started_all: list[str] = []
        dropped_all: list[str] = []
        for sid in self.tick_scheduler(step, stage, prev_stage):
            s, d = self._start_or_queue(sid, step)
            started_all += s
            dropped_all += d
        for sid in evaluate_contingent(self.rules, log, step, self.last_fired):
            s, d = self._start_or_queue(sid, step)
            started_all += s
            dropped_all += d
        if self.active is None and self.queue:
            self.active = self.queue.popleft()
            self.active_start = step
            started_all.append(self.active)
        utter = Utterance()
        fed = 0.0
        if self.active is not None:
            script = self.scripts[self.active]
            local = step - self.active_start
            utter, fed = self.play_step(script, local)
            if local >= script.duration - 1:
                self.active = None
        return PlaybackResult(utter, fed, tuple(started_all), tuple(dropped_all))

    def play_step(self, script: ScenarioScript, local_step: int
                  ) -> tuple[Utterance, float]:
        """Apply one playback tick to the scene; returns (utterance, fed)."""
        if not 0 <= local_step < script.duration:
            raise ValueError(f"step {local_step} outside [0, {script.duration})")
        for track in script.tracks:
            name = self._resolve(script.script_id, track.entity)
            ent = self.scene.by_name(name)
            pos, rot = _sample_track(track, local_step)
            ent.pos = pos
            if rot is not None:
                ent.quat = rot
        fed = 0.0
        for action in script.actions:
            if action.step != local_step:
                continue
            if action.kind == "feed":
                fed += action.amount
                continue
            name = self._resolve(script.script_id, action.entity)
            ent = self.scene.by_name(name)
            if action.kind == "spawn":
                self.scene.set_active(ent.id, True)
                self.scene.by_name(name).pos = action.pos
            elif action.kind == "move":
                ent.pos = action.pos
            elif action.kind == "despawn":
                self.scene.set_active(ent.id, False)
        utter = Utterance()
        for span in script.utterances:
            span_len = len(span.tokens) * script.token_steps
            if span.start <= local_step < span.start + span_len:
                idx = (local_step - span.start) // script.token_steps
                utter = Utterance(span.tokens[idx], span.amplitude)
                break
        return utter, fed


def _sample_track(track: KeyframeTrack, step: int):
    keys = track.keys
    steps = [k.step for k in keys]
    if step <= steps[0]:
        k = keys[0]
        return np.array(k.pos), (np.array(k.rot) if k.rot else None)
    if step >= steps[-1]:
        k = keys[-1]
        return np.array(k.pos), (np.array(k.rot) if k.rot else None)
    i = bisect.bisect_right(steps, step)
    a, b = keys[i - 1], keys[i]
    t = (step - a.step) / (b.step - a.step)
    pos = np.array(a.pos) + t * (np.array(b.pos) - np.array(a.pos))
    rot = None
    ra = a.rot if a.rot is not None else (1.0, 0.0, 0.0, 0.0)
    rb = b.rot if b.rot is not None else (1.0, 0.0, 0.0, 0.0)
    if a.rot is not None or b.rot is not None:
        rot = quat_nlerp(np.array(ra), np.array(rb), t)
    return pos, rot
