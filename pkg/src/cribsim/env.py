"""Environment facade: one `step(action) -> ObservationFrame` loop over
the world, body, curriculum gates, scenario engine and renderer.

Tick order (fixed, documented for reproducibility): motor command ->
forward kinematics -> scenario playback -> world step -> interoception ->
senses -> observation. Stage, strength and acuity are sampled at the age
of the tick being produced.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import vision as vision_mod
from .body import Body, N_MOTORS
from .curriculum import Stage, acuity_at, capability_mask, stage_at, stage_strength
from .observation import ObservationFrame, layout_manifest
from .scenario import BehaviorLog, Lexicon, ScenarioEngine, Utterance, parse_script
from .sceneconfig import SceneConfig, apply_overrides, load_scene_config
from .world import DT, Scene, create_scene

LOOKING_CONE_DEG = 5.0


def _load_scripts(cfg: SceneConfig, lexicon: Lexicon) -> dict:
    scripts = {}
    for rel in cfg.script_paths:
        path = Path(cfg.base_dir) / rel
        script = parse_script(path.read_text(), lexicon, source=str(path))
        scripts[script.script_id] = script
    return scripts


def _load_lexicon(cfg: SceneConfig) -> Lexicon:
    if cfg.lexicon_path is None:
        return Lexicon({})
    path = Path(cfg.base_dir) / cfg.lexicon_path
    return Lexicon.parse(path.read_text(), source=str(path))


class Environment:
    """Owns a Scene + Body + ScenarioEngine; single-threaded."""

    def __init__(self, config: SceneConfig, seed: Optional[int] = None,
                 scripts: Optional[dict] = None,
                 lexicon: Optional[Lexicon] = None):
        self._base_config = config
        self._scripts_arg = scripts
        self._lexicon_arg = lexicon
        self.episode = 0
        self._build(config, config.seed if seed is None else seed)

    def _build(self, config: SceneConfig, seed: int) -> None:
        self.config = config
        self.seed = int(seed)
        self.lexicon = self._lexicon_arg or _load_lexicon(config)
        self.scene: Scene = create_scene(config, self.seed)
        self.body = Body(self.scene, root_pos=config.body.root_pos,
                         root_quat=config.body.root_rot,
                         hunger_decay_units=config.body.hunger_decay)
        scripts = self._scripts_arg
        if scripts is None:
            scripts = _load_scripts(config, self.lexicon)
        self.engine = ScenarioEngine(self.scene, scripts,
                                     config.scenario_schedule, config.rules)
        self.log = BehaviorLog()
        self._fixation_tags = sorted({r.tag for r in config.rules
                                      if r.kind == "fixated" and r.tag})
        self._last_utterance = Utterance()
        self._last_contacts: list = []
        self._stage_prev: Optional[Stage] = None

    # -- lifecycle ---------------------------------------------------------

    def reset(self, seed: Optional[int] = None,
              overrides: Optional[dict] = None) -> ObservationFrame:
        """Deterministic rebuild; returns the step-0 observation."""
        cfg = self._base_config
        if overrides:
            cfg = apply_overrides(cfg, overrides)
        self._build(cfg, self.seed if seed is None else seed)
        self.episode += 1
        return self.observe()

    @property
    def sim_age(self) -> float:
        return self.scene.clock.sim_age

    @property
    def stage(self) -> Stage:
        return stage_at(self.sim_age, self.config.schedule)

    def eye_state(self) -> vision_mod.EyeState:
        a = self.body.angles
        return vision_mod.EyeState(float(a[0]), float(a[1]), float(a[2]))

    # -- main loop ---------------------------------------------------------

    def step(self, action: Sequence[float]) -> ObservationFrame:
        action = np.asarray(action, dtype=float)
        if action.shape != (N_MOTORS,):
            raise ValueError(f"action must have {N_MOTORS} values")
        clock = self.scene.clock
        next_step = clock.step + 1
        age = (next_step + clock.offset_steps) * DT
        stage = stage_at(age, self.config.schedule)
        strength = stage_strength(age, self.config.schedule)

        self.body.apply_motor_command(action, strength)
        self.body.fk_update()
        playback = self.engine.step(next_step, stage, self._stage_prev, self.log)
        self._stage_prev = stage
        contacts = self.scene.step_world()
        self._last_contacts = contacts
        self.body.update_head_kinematics()
        self.body.update_interoception(playback.fed)
        self._last_utterance = playback.utterance
        self._update_behavior_log(next_step, contacts)
        return self.observe()

    def _update_behavior_log(self, step: int, contacts) -> None:
        touched = set()
        for c in contacts:
            for eid, other in ((c.entity_a, c.entity_b), (c.entity_b, c.entity_a)):
                if self.body._entity_node(eid) >= 0:
                    row = self.scene._row_of(other)
                    if self.scene.body_node[row] < 0:
                        touched |= self.scene._tags[row]
        fixated = set()
        eyes = self.eye_state()
        hp, hq = self.body.head_pos(), self.body.head_quat()
        for tag in self._fixation_tags:
            for ent in self.scene.tagged(tag):
                err = vision_mod.gaze_error_to(self.scene, eyes, hp, hq, ent.id)
                if err < LOOKING_CONE_DEG:
                    fixated.add(tag)
                    break
        self.log.record_step(step, touched, self.body.vocalizing, fixated)

    # -- observation -------------------------------------------------------

    def observe(self) -> ObservationFrame:
        clock = self.scene.clock
        age = self.sim_age
        stage = self.stage
        acuity = acuity_at(age, self.config.schedule)
        eyes = self.eye_state()
        hp, hq = self.body.head_pos(), self.body.head_quat()
        if self.config.render and acuity.mode != "blackout":
            frame = vision_mod.render_frame(self.scene, eyes, hp, hq,
                                            acuity=acuity,
                                            retina_size=self.config.retina_size)
        else:
            # fetal blackout / vision off: zero retinas, attention stays live
            frame = vision_mod.zero_frame(self.scene, eyes, hp, hq,
                                          retina_size=self.config.retina_size)
        gain = capability_mask(stage).audio_gain
        utter = self._last_utterance
        audio = Utterance(utter.token, utter.amplitude * gain)
        return ObservationFrame(
            step=clock.step,
            sim_age=age,
            stage=stage,
            episode=self.episode,
            vision=frame,
            touch=self.body.read_touch(self._last_contacts),
            proprioception=self.body.read_proprioception(),
            vestibular=self.body.read_vestibular(),
            interoception=self.body.stomach,
            audio=audio,
            gaze_dir=frame.gaze_dir,
            fixated_entity=frame.fixated_entity,
        )

    # -- helpers -----------------------------------------------------------

    def gaze_error_to(self, target_id: int) -> float:
        return vision_mod.gaze_error_to(self.scene, self.eye_state(),
                                        self.body.head_pos(),
                                        self.body.head_quat(), target_id)

    def manifests(self) -> dict:
        return {
            "motor": self.body.motor_manifest(),
            "touch": self.body.touch_manifest(),
            "observation": layout_manifest(self.config.retina_size),
        }


def load_environment(config_path: str | Path, seed: Optional[int] = None,
                     overrides: Optional[dict] = None) -> Environment:
    cfg = load_scene_config(config_path)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return Environment(cfg, seed=seed)
