"""Stimulus geometry for the evaluation experiments: expectation-paradigm
flashes, composite-primitive faces, the rod-behind-box display, and the
rolling-ball solidity events.

Builders return entity specs plus per-step presentation callbacks; all
motion is kinematic and a pure function of the step index.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .world import EntitySpec, Scene, box, capsule, sphere

# stimuli sit in front of the infant's resting gaze (+z), at head height
HEAD_Y = 0.37
STIM_DIST = 1.2


def side_position(side: str, angle_deg: float = 15.0,
                  dist: float = STIM_DIST) -> np.ndarray:
    x = dist * math.sin(math.radians(angle_deg))
    z = dist * math.cos(math.radians(angle_deg))
    return np.array([x if side == "right" else -x, HEAD_Y, z])


def vexp_entities(radius: float = 0.06) -> list[EntitySpec]:
    return [
        EntitySpec(name="stim/left", shape=sphere(radius),
                   pos=tuple(side_position("left")),
                   color=(1.0, 0.9, 0.1), tags=frozenset({"stimulus"})),
        EntitySpec(name="stim/right", shape=sphere(radius),
                   pos=tuple(side_position("right")),
                   color=(0.1, 0.9, 1.0), tags=frozenset({"stimulus"})),
    ]


def face_entities(gender: str, center: np.ndarray) -> list[EntitySpec]:
    """Parameterized composite-primitive face. The two parameter sets vary
    head size, hair block, and feature proportions."""
    male = gender == "male"
    head_r = 0.085 if male else 0.075
    hair_h = 0.02 if male else 0.05
    skin = (0.88, 0.72, 0.6) if male else (0.92, 0.78, 0.68)
    cx, cy, cz = center
    n = f"face-{gender}"
    ents = [
        EntitySpec(name=f"{n}/head", shape=sphere(head_r),
                   pos=(cx, cy, cz), color=skin,
                   tags=frozenset({"face", gender}), group=n),
        EntitySpec(name=f"{n}/hair", shape=box(head_r * 0.95, hair_h, head_r * 0.7),
                   pos=(cx, cy + head_r * 0.8, cz), color=(0.25, 0.15, 0.1),
                   tags=frozenset({"face", gender}), group=n),
    ]
    eye_dx = head_r * 0.45
    for side, sx in (("l", -1.0), ("r", 1.0)):
        ents.append(EntitySpec(
            name=f"{n}/eye-{side}",
            shape=sphere(0.012),
            pos=(cx + sx * eye_dx, cy + head_r * 0.15, cz - head_r * 0.92),
            color=(0.08, 0.08, 0.1), tags=frozenset({"face", gender}), group=n))
    if male:
        ents.append(EntitySpec(
            name=f"{n}/jaw", shape=box(head_r * 0.6, 0.018, head_r * 0.4),
            pos=(cx, cy - head_r * 0.85, cz), color=(0.5, 0.35, 0.3),
            tags=frozenset({"face", gender}), group=n))
    else:
        ents.append(EntitySpec(
            name=f"{n}/locks", shape=box(head_r * 1.1, 0.06, 0.02),
            pos=(cx, cy - head_r * 0.3, cz + head_r * 0.85),
            color=(0.3, 0.2, 0.12), tags=frozenset({"face", gender}), group=n))
    return ents


@dataclass
class HabituationDisplay:
    """One presentable display: entity names plus a kinematic driver.
    target_point gives the gaze target while the display is shown."""

    name: str
    entity_names: list[str]
    drive: Optional[Callable[[Scene, int], None]] = None
    target: np.ndarray = None  # type: ignore[assignment]


def rod_box_displays() -> tuple[list[EntitySpec], dict[str, HabituationDisplay]]:
    """Perceptual-completion set: habituation = rod translating behind an
    occluding box; tests = complete rod vs two aligned rod segments."""
    cy, cz = HEAD_Y, STIM_DIST
    sweep = 0.22
    period = 240  # steps for a full left-right-left cycle

    def rod_x(step: int) -> float:
        phase = (step % period) / period
        return sweep * math.sin(2.0 * math.pi * phase)

    ents = [
        EntitySpec(name="rb/occluder", shape=box(0.28, 0.09, 0.02),
                   pos=(0.0, cy, cz - 0.06), color=(0.75, 0.6, 0.3),
                   tags=frozenset({"occluder"})),
        EntitySpec(name="rb/rod", shape=capsule(0.018, 0.16),
                   pos=(0.0, cy, cz), quat=_upright_capsule(),
                   color=(0.2, 0.8, 0.3), tags=frozenset({"stimulus", "rod"})),
        EntitySpec(name="rb/rod-top", shape=capsule(0.018, 0.05),
                   pos=(0.0, cy + 0.11, cz), quat=_upright_capsule(),
                   color=(0.2, 0.8, 0.3), tags=frozenset({"stimulus", "rod"})),
        EntitySpec(name="rb/rod-bottom", shape=capsule(0.018, 0.05),
                   pos=(0.0, cy - 0.11, cz), quat=_upright_capsule(),
                   color=(0.2, 0.8, 0.3), tags=frozenset({"stimulus", "rod"})),
    ]

    def drive_habituation(scene: Scene, step: int) -> None:
        scene.by_name("rb/rod").pos = (rod_x(step), cy, cz)

    def drive_complete(scene: Scene, step: int) -> None:
        scene.by_name("rb/rod").pos = (rod_x(step), cy, cz)

    def drive_broken(scene: Scene, step: int) -> None:
        x = rod_x(step)
        scene.by_name("rb/rod-top").pos = (x, cy + 0.11, cz)
        scene.by_name("rb/rod-bottom").pos = (x, cy - 0.11, cz)

    target = np.array([0.0, cy, cz])
    displays = {
        "habituation": HabituationDisplay(
            "rod-behind-box", ["rb/occluder", "rb/rod"], drive_habituation, target),
        "familiar": HabituationDisplay(
            "complete-rod", ["rb/rod"], drive_complete, target),
        "novel": HabituationDisplay(
            "broken-rod", ["rb/rod-top", "rb/rod-bottom"], drive_broken, target),
    }
    return ents, displays


def basic_habituation_displays() -> tuple[list[EntitySpec], dict[str, HabituationDisplay]]:
    """Plain displays for habituation arithmetic tests: colored sphere,
    same-again, and a novel cube."""
    cy, cz = HEAD_Y, STIM_DIST
    ents = [
        EntitySpec(name="hb/ball", shape=sphere(0.07), pos=(0.0, cy, cz),
                   color=(0.9, 0.2, 0.2), tags=frozenset({"stimulus"})),
        EntitySpec(name="hb/cube", shape=box(0.06, 0.06, 0.06), pos=(0.0, cy, cz),
                   color=(0.2, 0.3, 0.95), tags=frozenset({"stimulus"})),
    ]
    target = np.array([0.0, cy, cz])
    displays = {
        "habituation": HabituationDisplay("red-ball", ["hb/ball"], None, target),
        "familiar": HabituationDisplay("red-ball-again", ["hb/ball"], None, target),
        "novel": HabituationDisplay("blue-cube", ["hb/cube"], None, target),
    }
    return ents, displays


def _upright_capsule() -> tuple:
    # rotate capsule local z axis onto world y
    s = math.sin(math.pi / 4)
    return (math.cos(math.pi / 4), s, 0.0, 0.0)


@dataclass
class VoeEventTrack:
    """Rolling-ball solidity event. The ball approaches behind a screen;
    at reveal the screen lifts, showing the ball either resting against
    the wall (possible) or beyond it (impossible)."""

    kind: str  # possible | impossible
    approach_steps: int
    reveal_step: int
    rest_pos: np.ndarray
    start_pos: np.ndarray

    def ball_pos(self, step: int) -> np.ndarray:
        t = min(1.0, step / self.approach_steps)
        return self.start_pos + t * (self.rest_pos - self.start_pos)


def voe_entities() -> list[EntitySpec]:
    cy, cz = HEAD_Y, STIM_DIST
    return [
        EntitySpec(name="voe/floor-line", shape=box(0.6, 0.01, 0.08),
                   pos=(0.0, cy - 0.16, cz), color=(0.4, 0.4, 0.45),
                   tags=frozenset({"voe"})),
        EntitySpec(name="voe/wall", shape=box(0.02, 0.12, 0.08),
                   pos=(0.25, cy - 0.03, cz), color=(0.6, 0.25, 0.2),
                   tags=frozenset({"voe", "wall"})),
        EntitySpec(name="voe/screen", shape=box(0.22, 0.14, 0.012),
                   pos=(0.12, cy - 0.01, cz - 0.1), color=(0.85, 0.8, 0.2),
                   tags=frozenset({"voe", "occluder"})),
        EntitySpec(name="voe/ball", shape=sphere(0.045),
                   pos=(-0.45, cy - 0.105, cz), color=(0.15, 0.5, 0.9),
                   tags=frozenset({"voe", "stimulus"})),
    ]


def voe_tracks(approach_steps: int, reveal_step: int) -> dict[str, VoeEventTrack]:
    cy, cz = HEAD_Y, STIM_DIST
    y = cy - 0.105  # ball center height when resting on the floor line
    start = np.array([-0.45, y, cz])
    wall_x = 0.25
    wall_half = 0.02
    r = 0.045
    # grazing interpenetration so the validity probe reports a wall contact
    possible_rest = np.array([wall_x - wall_half - r + 1e-4, y, cz])
    impossible_rest = np.array([wall_x + wall_half + 0.12, y, cz])
    return {
        "possible": VoeEventTrack("possible", approach_steps, reveal_step,
                                  possible_rest, start),
        "impossible": VoeEventTrack("impossible", approach_steps, reveal_step,
                                    impossible_rest, start),
    }
