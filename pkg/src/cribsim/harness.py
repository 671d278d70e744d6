"""Simulated developmental-psychology experiments and looking-time metrics:
visual expectation, infant-controlled habituation-dishabituation (incl. the
rod-behind-box perceptual-completion set), preferential looking, and
violation-of-expectation solidity events.

Each run builds a private environment (own scene, own RNG streams) from
the experiment spec, drives the presentation kinematically, queries the
agent for an action every tick, and scores gaze geometry. The harness
reports metrics only; pass/fail thresholds belong to curriculum gates.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

import numpy as np

from . import stimuli, vision
from .curriculum import Stage
from .env import Environment
from .errors import ExperimentError
from .geometry import angle_between, direction_to_pan_tilt, quat_rotate_inverse
from .scenario import Lexicon
from .sceneconfig import BodyConfig, SceneConfig
from .world import DT

DEFAULT_CONE_DEG = 5.0
DEFAULT_MIN_FIX_STEPS = 10  # 100 ms


@dataclass(frozen=True)
class LookingRule:
    cone_deg: float = DEFAULT_CONE_DEG
    min_fix_steps: int = DEFAULT_MIN_FIX_STEPS


@dataclass
class GazeSample:
    step: int
    gaze_dir: tuple
    fixated_entity: Optional[int]
    errors: dict  # target name -> degrees


@dataclass
class TrialRecord:
    index: int
    stimulus: str
    onset_step: int
    offset_step: int
    looking_time: float
    first_look_latency: Optional[float] = None
    anticipatory: Optional[bool] = None

    def to_json(self) -> dict:
        return {
            "index": self.index, "stimulus": self.stimulus,
            "onset_step": self.onset_step, "offset_step": self.offset_step,
            "looking_time": self.looking_time,
            "first_look_latency": self.first_look_latency,
            "anticipatory": self.anticipatory,
        }


@dataclass
class Metrics:
    experiment_id: str
    kind: str
    seed: int
    values: dict = field(default_factory=dict)
    flags: dict = field(default_factory=dict)
    trials: list = field(default_factory=list)
    gaze_samples: list = field(default_factory=list)  # kept out of reports

    def to_json(self, spec_hash: str = "") -> dict:
        return {
            "experiment_id": self.experiment_id, "kind": self.kind,
            "seed": self.seed, "spec_hash": spec_hash,
            "values": dict(sorted(self.values.items())),
            "flags": dict(sorted(self.flags.items())),
            "trials": [t.to_json() for t in self.trials],
        }


_PARAM_DEFAULTS = {
    "vexp": {"onset_steps": 70, "isi_steps": 100, "trials": 60,
             "anticipation_steps": 20, "side_angle_deg": 15.0,
             "distance": 1.2, "stimulus_radius": 0.06},
    "habituation": {"max_trial_steps": 2000, "lookaway_steps": 200,
                    "intertrial_steps": 100, "baseline_trials": 3,
                    "criterion_ratio": 0.5, "window": 3, "max_trials": 20,
                    "test_trials_each": 3, "template": "basic"},
    "preferential": {"trials": 10, "trial_steps": 1000,
                     "intertrial_steps": 100, "side_angle_deg": 15.0,
                     "template": "faces"},
    "voe": {"reps": 3, "approach_steps": 300, "reveal_steps": 1000,
            "gap_steps": 100, "template": "rolling_ball_wall"},
}

_INT_PARAMS = {"onset_steps", "isi_steps", "trials", "anticipation_steps",
               "max_trial_steps", "lookaway_steps", "intertrial_steps",
               "baseline_trials", "window", "max_trials", "test_trials_each",
               "trial_steps", "reps", "approach_steps", "reveal_steps",
               "gap_steps"}


@dataclass(frozen=True)
class ExperimentSpec:
    exp_id: str
    kind: str  # vexp | habituation | preferential | voe
    params: dict = field(default_factory=dict)
    rule: LookingRule = field(default_factory=LookingRule)
    render: bool = False
    collect_gaze: bool = False  # record one GazeSample per step

    def __post_init__(self):
        if self.kind not in _PARAM_DEFAULTS:
            raise ExperimentError(f"unknown experiment kind {self.kind!r}")

    def param(self, name: str):
        if name in self.params:
            return self.params[name]
        return _PARAM_DEFAULTS[self.kind][name]

    def canonical_text(self) -> str:
        lines = [f"experiment {self.exp_id}", f"kind {self.kind}"]
        merged = {**_PARAM_DEFAULTS[self.kind], **self.params}
        for k in sorted(merged):
            lines.append(f"{k} {merged[k]}")
        lines.append(f"cone_deg {self.rule.cone_deg}")
        lines.append(f"min_fix_steps {self.rule.min_fix_steps}")
        lines.append(f"render {str(self.render).lower()}")
        return "\n".join(lines) + "\n"

    def spec_hash(self) -> str:
        return hashlib.sha256(self.canonical_text().encode()).hexdigest()


def parse_experiment_spec(text: str, source: str = "<preset>") -> ExperimentSpec:
    from .errors import ParseError

    exp_id = None
    kind = None
    params: dict = {}
    cone = DEFAULT_CONE_DEG
    min_fix = DEFAULT_MIN_FIX_STEPS
    render = False
    for ln, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        key, vals = parts[0], parts[1:]
        if not vals:
            raise ParseError(f"key {key!r} needs a value", source, ln, 1)
        if key == "experiment":
            exp_id = vals[0]
        elif key == "kind":
            kind = vals[0]
        elif key == "cone_deg":
            cone = float(vals[0])
        elif key == "min_fix_steps":
            min_fix = int(vals[0])
        elif key == "render":
            render = vals[0].lower() in ("true", "1", "on")
        else:
            if key in _INT_PARAMS:
                params[key] = int(vals[0])
            elif key == "template":
                params[key] = vals[0]
            else:
                try:
                    params[key] = float(vals[0])
                except ValueError:
                    raise ParseError(f"bad value for {key!r}", source, ln, 1) from None
    if exp_id is None or kind is None:
        raise ParseError("preset needs 'experiment <id>' and 'kind <kind>'",
                         source, 1, 1)
    if kind not in _PARAM_DEFAULTS:
        raise ParseError(f"unknown kind {kind!r}", source, 1, 1)
    unknown = set(params) - set(_PARAM_DEFAULTS[kind])
    if unknown:
        raise ParseError(f"unknown parameter(s) {sorted(unknown)} for kind "
                         f"{kind!r}", source, 1, 1)
    return ExperimentSpec(exp_id, kind, params,
                          LookingRule(cone, min_fix), render)


def load_preset(name: str) -> ExperimentSpec:
    """Load an experiment preset by file path or by shipped preset name."""
    p = Path(name)
    if p.exists():
        return parse_experiment_spec(p.read_text(), source=str(p))
    shipped = Path(__file__).parent / "presets" / f"{name}.exp"
    if shipped.exists():
        return parse_experiment_spec(shipped.read_text(), source=str(shipped))
    raise ExperimentError(f"unknown preset {name!r}")


# -- looking-time measurement -------------------------------------------------


def fixation_intervals(in_zone: np.ndarray, min_fix_steps: int) -> list[tuple[int, int]]:
    """Maximal runs of in-zone steps of length >= min_fix_steps, as
    half-open (start, end) index pairs."""
    if in_zone.size == 0:
        return []
    padded = np.concatenate([[False], in_zone.astype(bool), [False]])
    delta = np.diff(padded.astype(np.int8))
    starts = np.flatnonzero(delta == 1)
    ends = np.flatnonzero(delta == -1)
    return [(int(s), int(e)) for s, e in zip(starts, ends)
            if e - s >= min_fix_steps]


def compute_looking(gaze_errors: Sequence[float], rule: LookingRule
                    ) -> tuple[float, list[tuple[int, int]]]:
    """Total looking time (seconds) and fixation intervals for a stream of
    per-step gaze errors to one target."""
    errors = np.asarray(gaze_errors, dtype=float)
    if errors.size == 0:
        raise ExperimentError("empty gaze stream")
    intervals = fixation_intervals(errors < rule.cone_deg, rule.min_fix_steps)
    total = sum(e - s for s, e in intervals)
    return total * DT, intervals


# -- experiment scaffolding ----------------------------------------------------


def _experiment_config(spec: ExperimentSpec, seed: int,
                       entities: list) -> SceneConfig:
    cfg = SceneConfig(
        seed=seed,
        render=spec.render,
        body=BodyConfig(root_pos=(0.0, 0.1, 0.0)),
        entities=list(entities),
    )
    # start at Crawling onset: full vision, stationary posture
    cfg.gestation_offset_s = cfg.schedule.stage_span(Stage.CRAWLING)[0]
    return cfg


def _make_env(spec: ExperimentSpec, seed: int, entities: list) -> Environment:
    cfg = _experiment_config(spec, seed, entities)
    return Environment(cfg, seed=seed, scripts={}, lexicon=Lexicon({}))


class _Driver:
    """Shared per-step machinery: act -> step -> gaze errors."""

    def __init__(self, env: Environment, rule: LookingRule,
                 collect_gaze: bool = False):
        self.env = env
        self.rule = rule
        self.obs = env.observe()
        self.aborted = False
        self.collect_gaze = collect_gaze
        self.samples: list[GazeSample] = []

    def gaze_error_to_point(self, point: np.ndarray) -> float:
        eyes = self.env.eye_state()
        _, co, cd, _ = vision.eye_geometry(eyes, self.env.body.head_pos(),
                                           self.env.body.head_quat())
        to_t = np.asarray(point, float) - co
        n = np.linalg.norm(to_t)
        if n < 1e-12:
            return 0.0
        return angle_between(cd, to_t)

    def pan_tilt_to_point(self, point: np.ndarray) -> tuple[float, float]:
        eyes = self.env.eye_state()
        _, co, _, _ = vision.eye_geometry(eyes, self.env.body.head_pos(),
                                          self.env.body.head_quat())
        d = np.asarray(point, float) - co
        d = d / np.linalg.norm(d)
        local = quat_rotate_inverse(self.env.body.head_quat(), d)
        return direction_to_pan_tilt(local)

    def tick(self, agent, ctx: dict, targets: dict) -> dict:
        """One lockstep tick; returns per-target gaze errors after the step."""
        try:
            action = agent.act(self.obs, ctx)
        except ConnectionError:
            self.aborted = True
            raise
        self.obs = self.env.step(action)
        errors = {name: self.gaze_error_to_point(point)
                  for name, point in targets.items()}
        if self.collect_gaze:
            self.samples.append(GazeSample(
                step=self.obs.step,
                gaze_dir=tuple(float(v) for v in self.obs.gaze_dir),
                fixated_entity=self.obs.fixated_entity,
                errors=dict(errors)))
        return errors

    def show(self, names: Sequence[str], active: bool) -> None:
        for n in names:
            ent = self.env.scene.by_name(n)
            self.env.scene.set_active(ent.id, active)


# -- visual expectation paradigm ----------------------------------------------


def run_visual_expectation(spec: ExperimentSpec, agent, seed: int) -> Metrics:
    if spec.kind != "vexp":
        raise ExperimentError(f"spec kind {spec.kind!r} is not 'vexp'")
    onset = spec.param("onset_steps")
    isi = spec.param("isi_steps")
    n_trials = spec.param("trials")
    antic = spec.param("anticipation_steps")
    angle = spec.param("side_angle_deg")
    dist = spec.param("distance")
    ents = stimuli.vexp_entities(spec.param("stimulus_radius"))
    env = _make_env(spec, seed, ents)
    d = _Driver(env, spec.rule, spec.collect_gaze)
    sides = ("left", "right")
    pos = {s: stimuli.side_position(s, angle, dist) for s in sides}
    ids = {s: env.scene.id_of(f"stim/{s}") for s in sides}
    for s in sides:
        env.scene.set_active(ids[s], False)

    briefing = {
        "kind": "vexp",
        "start_step": env.scene.clock.step + 1,
        "onset_steps": onset, "isi_steps": isi, "trials": n_trials,
        "anticipation_steps": antic,
        "sides": list(sides),
        "positions": {s: [float(v) for v in pos[s]] for s in sides},
        "pan_tilt": {s: list(d.pan_tilt_to_point(pos[s])) for s in sides},
    }
    agent.begin(briefing, seed)

    period = isi + onset
    total = n_trials * period
    errs = {s: np.empty(total) for s in sides}
    flags = {}
    try:
        for t in range(total):
            trial = t // period
            within = t % period
            side = sides[trial % 2]
            if within == isi:
                env.scene.set_active(ids[side], True)
            elif within == 0 and trial > 0:
                env.scene.set_active(ids[sides[(trial - 1) % 2]], False)
            ctx = {"trial": trial,
                   "phase": "onset" if within >= isi else "isi",
                   "trial_step": within}
            e = d.tick(agent, ctx, pos)
            for s in sides:
                errs[s][t] = e[s]
    except ConnectionError:
        flags["aborted"] = True
        total = 0  # partial: score whatever completed
    trials = []
    n_antic = 0
    reactive_latencies = []
    for n in range(n_trials):
        w0, w1 = n * period, (n + 1) * period
        if w1 > (total or 0) and flags.get("aborted"):
            break
        side = sides[n % 2]
        err = errs[side][w0:w1]
        runs = fixation_intervals(err < spec.rule.cone_deg, spec.rule.min_fix_steps)
        onset_rel = isi  # onset start within the window
        anticipatory = False
        latency = None
        if runs:
            arrival = runs[0][0] - onset_rel  # steps relative to onset
            latency = arrival * DT
            anticipatory = arrival <= -antic
        if anticipatory:
            n_antic += 1
        elif latency is not None:
            reactive_latencies.append(latency)
        look, _ = compute_looking(err[isi:], spec.rule)
        trials.append(TrialRecord(
            index=n, stimulus=side,
            onset_step=briefing["start_step"] + w0 + isi,
            offset_step=briefing["start_step"] + w1,
            looking_time=look, first_look_latency=latency,
            anticipatory=anticipatory))
    done = len(trials)
    values = {
        "anticipation_rate": n_antic / done if done else 0.0,
        "mean_reactive_latency": (float(np.mean(reactive_latencies))
                                  if reactive_latencies else None),
        "trials_completed": float(done),
    }
    return Metrics(spec.exp_id, "vexp", seed, values, flags, trials,
                   gaze_samples=d.samples)


# -- habituation / dishabituation ----------------------------------------------


_HAB_TEMPLATES = {
    "basic": stimuli.basic_habituation_displays,
    "rod_box": stimuli.rod_box_displays,
}


def run_habituation_dishab(spec: ExperimentSpec, agent, seed: int) -> Metrics:
    if spec.kind != "habituation":
        raise ExperimentError(f"spec kind {spec.kind!r} is not 'habituation'")
    template = spec.param("template")
    builder = _HAB_TEMPLATES.get(template)
    if builder is None:
        raise ExperimentError(f"unknown habituation template {template!r}")
    ents, displays = builder()
    env = _make_env(spec, seed, ents)
    d = _Driver(env, spec.rule, spec.collect_gaze)
    for disp in displays.values():
        d.show(disp.entity_names, False)

    max_steps = spec.param("max_trial_steps")
    lookaway = spec.param("lookaway_steps")
    inter = spec.param("intertrial_steps")
    baseline_n = spec.param("baseline_trials")
    ratio = spec.param("criterion_ratio")
    window = spec.param("window")
    max_trials = spec.param("max_trials")
    test_each = spec.param("test_trials_each")

    agent.begin({"kind": "habituation", "max_trial_steps": max_steps}, seed)
    flags: dict = {}
    trials: list[TrialRecord] = []

    def run_trial(index: int, phase: str, disp_name: str,
                  hab_trials: Optional[int]) -> float:
        disp = displays[disp_name]
        target = disp.target
        # intertrial gap: display hidden, agent may pre-orient
        for t in range(inter):
            ctx = {"phase": "intertrial", "trial": index, "trial_step": t,
                   "shown": False, "stimulus": disp_name,
                   "target_pan_tilt": d.pan_tilt_to_point(target),
                   "hab_trials": hab_trials}
            d.tick(agent, ctx, {})
        d.show(disp.entity_names, True)
        onset_step = env.scene.clock.step + 1
        errors = []
        away_run = 0
        t = 0
        while t < max_steps:
            if disp.drive is not None:
                disp.drive(env.scene, t)
            ctx = {"phase": phase, "trial": index, "trial_step": t,
                   "shown": True, "stimulus": disp_name,
                   "target_pan_tilt": d.pan_tilt_to_point(target),
                   "hab_trials": hab_trials}
            e = d.tick(agent, ctx, {"target": target})
            errors.append(e["target"])
            if e["target"] >= spec.rule.cone_deg:
                away_run += 1
                if away_run >= lookaway:
                    t += 1
                    break
            else:
                away_run = 0
            t += 1
        d.show(disp.entity_names, False)
        look, _ = compute_looking(np.array(errors), spec.rule)
        trials.append(TrialRecord(index=index, stimulus=disp.name,
                                  onset_step=onset_step,
                                  offset_step=env.scene.clock.step,
                                  looking_time=look))
        return look

    looks: list[float] = []
    habituated_at = None
    try:
        for k in range(max_trials):
            looks.append(run_trial(k, "habituation", "habituation", None))
            if k + 1 >= baseline_n + window:
                base = float(np.mean(looks[:baseline_n]))
                recent = float(np.mean(looks[-window:]))
                if recent < ratio * base:
                    habituated_at = k
                    break
        values: dict = {"trials_to_criterion": float(habituated_at + 1)
                        if habituated_at is not None else None}
        flags["habituated"] = habituated_at is not None
        if habituated_at is None:
            flags["criterion_failure"] = True
            return Metrics(spec.exp_id, "habituation", seed, values, flags,
                           trials, gaze_samples=d.samples)

        first = "novel" if seed % 2 == 0 else "familiar"
        order = [first, "familiar" if first == "novel" else "novel"] * test_each
        test_looks = {"novel": [], "familiar": []}
        hab_count = habituated_at + 1
        for j, stim in enumerate(order):
            look = run_trial(len(looks) + j, "test", stim, hab_count)
            test_looks[stim].append(look)
        mean_novel = float(np.mean(test_looks["novel"]))
        mean_familiar = float(np.mean(test_looks["familiar"]))
        criterion_level = float(np.mean(looks[-window:]))
        values.update({
            "dishabituation_score": mean_novel - mean_familiar,
            "mean_novel_looking": mean_novel,
            "mean_familiar_looking": mean_familiar,
            "recovery_ratio": (mean_novel / criterion_level
                               if criterion_level > 0 else None),
        })
        flags["test_order_first"] = first
    except ConnectionError:
        flags["aborted"] = True
        values = {"trials_to_criterion": None}
    return Metrics(spec.exp_id, "habituation", seed, values, flags, trials,
                   gaze_samples=d.samples)


# -- preferential looking --------------------------------------------------------


def run_preferential_looking(spec: ExperimentSpec, agent, seed: int) -> Metrics:
    if spec.kind != "preferential":
        raise ExperimentError(f"spec kind {spec.kind!r} is not 'preferential'")
    angle = spec.param("side_angle_deg")
    n_trials = spec.param("trials")
    steps = spec.param("trial_steps")
    inter = spec.param("intertrial_steps")
    if n_trials % 2 != 0:
        raise ExperimentError("preferential trials must be even for "
                              "side counterbalancing")
    a_ents = stimuli.face_entities("male", np.zeros(3))
    b_ents = stimuli.face_entities("female", np.zeros(3))
    offsets = {"A": [(e.name, np.array(e.pos)) for e in a_ents],
               "B": [(e.name, np.array(e.pos)) for e in b_ents]}
    env = _make_env(spec, seed, a_ents + b_ents)
    d = _Driver(env, spec.rule, spec.collect_gaze)
    all_names = [e.name for e in a_ents + b_ents]
    d.show(all_names, False)
    side_pos = {s: stimuli.side_position(s, angle) for s in ("left", "right")}
    briefing = {"kind": "preferential",
                "pan_tilt": {s: list(d.pan_tilt_to_point(side_pos[s]))
                             for s in ("left", "right")}}
    agent.begin(briefing, seed)

    first_a_side = "left" if seed % 2 == 0 else "right"
    look_sum = {"A": 0.0, "B": 0.0}
    per_side_count = {"A": {"left": 0, "right": 0}, "B": {"left": 0, "right": 0}}
    trials: list[TrialRecord] = []
    flags: dict = {}
    try:
        for n in range(n_trials):
            a_side = first_a_side if n % 2 == 0 else (
                "right" if first_a_side == "left" else "left")
            b_side = "right" if a_side == "left" else "left"
            per_side_count["A"][a_side] += 1
            per_side_count["B"][b_side] += 1
            centers = {"A": side_pos[a_side], "B": side_pos[b_side]}
            pt = {f"pan_tilt_{k}": d.pan_tilt_to_point(centers[k]) for k in "AB"}
            for t in range(inter):
                ctx = {"phase": "intertrial", "trial": n, "trial_step": t, **pt}
                d.tick(agent, ctx, {})
            for key in ("A", "B"):
                for name, off in offsets[key]:
                    env.scene.by_name(name).pos = centers[key] + off
            d.show(all_names, True)
            errs = {"A": [], "B": []}
            onset_step = env.scene.clock.step + 1
            for t in range(steps):
                ctx = {"phase": "trial", "trial": n, "trial_step": t, **pt}
                e = d.tick(agent, ctx, centers)
                errs["A"].append(e["A"])
                errs["B"].append(e["B"])
            d.show(all_names, False)
            for key in ("A", "B"):
                look, _ = compute_looking(np.array(errs[key]), spec.rule)
                look_sum[key] += look
                trials.append(TrialRecord(
                    index=n, stimulus=f"{key}@{a_side if key == 'A' else b_side}",
                    onset_step=onset_step,
                    offset_step=env.scene.clock.step,
                    looking_time=look))
    except ConnectionError:
        flags["aborted"] = True
    total = look_sum["A"] + look_sum["B"]
    if total <= 0.0:
        pref_a = pref_b = 0.5
        flags["zero_confidence"] = True
    else:
        pref_a = look_sum["A"] / total
        pref_b = look_sum["B"] / total
    values = {"preference_A": pref_a, "preference_B": pref_b,
              "looking_A": look_sum["A"], "looking_B": look_sum["B"]}
    flags["counterbalanced"] = (
        per_side_count["A"]["left"] == per_side_count["A"]["right"])
    return Metrics(spec.exp_id, "preferential", seed, values, flags,
                   trials, gaze_samples=d.samples)


# -- violation-of-expectation physics ---------------------------------------------


def run_voe_physics(spec: ExperimentSpec, agent, seed: int) -> Metrics:
    if spec.kind != "voe":
        raise ExperimentError(f"spec kind {spec.kind!r} is not 'voe'")
    reps = spec.param("reps")
    approach = spec.param("approach_steps")
    reveal_steps = spec.param("reveal_steps")
    gap = spec.param("gap_steps")
    ents = stimuli.voe_entities()
    env = _make_env(spec, seed, ents)
    d = _Driver(env, spec.rule, spec.collect_gaze)
    tracks = stimuli.voe_tracks(approach, approach)
    ball = env.scene.by_name("voe/ball")
    screen = env.scene.by_name("voe/screen")
    wall = env.scene.by_name("voe/wall")
    screen_home = screen.pos.copy()

    # geometric validity: the possible rest position contacts the wall,
    # the impossible one is beyond it (no contact, far side)
    ball_home = ball.pos.copy()
    ball.pos = tracks["possible"].rest_pos
    c = env.scene.contact_pair(ball.id, wall.id)
    if c is None:
        raise ExperimentError("voe possible-event rest position does not "
                              "contact the wall")
    ball.pos = tracks["impossible"].rest_pos
    c = env.scene.contact_pair(ball.id, wall.id)
    if c is not None or tracks["impossible"].rest_pos[0] <= wall.pos[0]:
        raise ExperimentError("voe impossible-event rest position is not "
                              "beyond the wall")
    ball.pos = ball_home

    first = "possible" if seed % 2 == 0 else "impossible"
    order = [first, "impossible" if first == "possible" else "possible"] * reps
    agent.begin({"kind": "voe", "reps": reps}, seed)
    looks = {"possible": [], "impossible": []}
    trials: list[TrialRecord] = []
    flags: dict = {}
    try:
        for j, kind in enumerate(order):
            track = tracks[kind]
            env.scene.by_name("voe/ball").pos = track.start_pos
            env.scene.by_name("voe/screen").pos = screen_home
            for t in range(gap):
                ctx = {"phase": "gap", "event": kind, "phase_step": t,
                       "target_pan_tilt": d.pan_tilt_to_point(track.rest_pos)}
                d.tick(agent, ctx, {})
            for t in range(approach):
                bp = track.ball_pos(t)
                env.scene.by_name("voe/ball").pos = bp
                ctx = {"phase": "approach", "event": kind, "phase_step": t,
                       "target_pan_tilt": d.pan_tilt_to_point(track.rest_pos)}
                d.tick(agent, ctx, {})
            # reveal: lift the screen, ball at rest position
            env.scene.by_name("voe/screen").pos = screen_home + np.array([0.0, 0.4, 0.0])
            env.scene.by_name("voe/ball").pos = track.rest_pos
            errors = []
            onset_step = env.scene.clock.step + 1
            for t in range(reveal_steps):
                ctx = {"phase": "reveal", "event": kind, "phase_step": t,
                       "target_pan_tilt": d.pan_tilt_to_point(track.rest_pos)}
                e = d.tick(agent, ctx, {"target": track.rest_pos})
                errors.append(e["target"])
            look, _ = compute_looking(np.array(errors), spec.rule)
            looks[kind].append(look)
            trials.append(TrialRecord(index=j, stimulus=kind,
                                      onset_step=onset_step,
                                      offset_step=env.scene.clock.step,
                                      looking_time=look))
    except ConnectionError:
        flags["aborted"] = True
    mean_impossible = float(np.mean(looks["impossible"])) if looks["impossible"] else None
    mean_possible = float(np.mean(looks["possible"])) if looks["possible"] else None
    values = {"voe_score": (mean_impossible - mean_possible
                            if mean_impossible is not None
                            and mean_possible is not None else None),
              "mean_looking_impossible": mean_impossible,
              "mean_looking_possible": mean_possible}
    return Metrics(spec.exp_id, "voe", seed, values, flags, trials,
                   gaze_samples=d.samples)


_RUNNERS: dict[str, Callable] = {
    "vexp": run_visual_expectation,
    "habituation": run_habituation_dishab,
    "preferential": run_preferential_looking,
    "voe": run_voe_physics,
}


def run_experiment(spec: ExperimentSpec, agent, seed: int) -> Metrics:
    return _RUNNERS[spec.kind](spec, agent, seed)


# -- reporting / registry ----------------------------------------------------------


def export_report(results: Sequence[tuple[ExperimentSpec, Metrics]],
                  path: Optional[str] = None) -> str:
    """Canonical JSON report: stable field order, no timestamps, byte-
    identical for identical runs."""
    doc = {
        "format": "cribsim-report",
        "version": 1,
        "experiments": [m.to_json(spec_hash=s.spec_hash()) for s, m in results],
    }
    text = json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False) + "\n"
    if path is not None:
        Path(path).write_text(text)
    return text


# milestone registry: rows map onto shipped presets or explicit stubs
MILESTONE_REGISTRY = [
    {"milestone": "visual-expectation", "stage": "Immobile",
     "preset": "vexp-standard", "implemented": True},
    {"milestone": "face-gender-preference", "stage": "Immobile",
     "preset": "face-preference", "implemented": True},
    {"milestone": "generic-habituation", "stage": "Immobile",
     "preset": "habituation-basic", "implemented": True},
    {"milestone": "occluded-object-unity", "stage": "Crawling",
     "preset": "rod-and-box", "implemented": True},
    {"milestone": "innate-physics-solidity", "stage": "Crawling",
     "preset": "voe-solidity", "implemented": True},
    {"milestone": "mark-test", "stage": "Walking",
     "preset": None, "implemented": False},
    {"milestone": "fear-of-heights", "stage": "Crawling",
     "preset": None, "implemented": False},
    {"milestone": "adapted-hook-use", "stage": "Walking",
     "preset": None, "implemented": False},
    {"milestone": "mirror-self-perception", "stage": "Walking",
     "preset": None, "implemented": False},
]
