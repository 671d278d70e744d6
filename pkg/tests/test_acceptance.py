"""Acceptance suite: one test per acceptance criterion, each at its stated
tolerance, printing one PASS line on success (run with -s to see them).

Run: pytest tests/test_acceptance.py -v -s
"""

import hashlib
import json
import math
import socket
import threading
import time

import numpy as np
import pytest

from cribsim import protocol
from cribsim.body import Body, N_MOTORS, N_TOUCH
from cribsim.curriculum import Stage, StageSchedule, acuity_at, stage_strength
from cribsim.env import Environment
from cribsim.harness import load_preset, run_habituation_dishab, run_visual_expectation
from cribsim.kernels import BACKEND
from cribsim.observation import layout_manifest
from cribsim.oracles import HabituatingLooker, make_oracle
from cribsim.scenario import (BehaviorLog, ContingentRule, Lexicon,
                              ScheduleEntry, evaluate_contingent, parse_script,
                              serialize_script)
from cribsim.sceneconfig import SceneConfig, BodyConfig
from cribsim.vision import EyeState, apply_acuity, blur_radius_map, render_frame
from cribsim.world import Scene, EntitySpec, sphere
from cribsim.errors import ParseError

from conftest import static_sphere
from pathlib import Path

PRESETS = Path(__file__).parent.parent / "src" / "cribsim" / "presets"


def _report(name: str):
    print(f"\nACCEPTANCE {name}: PASS")


# ---------------------------------------------------------------------------
def test_io_contract_constants():
    """Action length 53 (9 DOF per hand); 2,110 touch bits; 4 retinas at
    8/100 deg FOV; 100 steps per simulated second. Structural."""
    scene = Scene(seed=0)
    body = Body(scene)
    motor = body.motor_manifest()
    assert motor["motor_count"] == 53
    assert len(motor["slots"]) == 53
    assert sum(1 for s in motor["slots"] if 23 <= s["index"] <= 31) == 9
    assert sum(1 for s in motor["slots"] if 32 <= s["index"] <= 40) == 9
    touch = body.touch_manifest()
    assert touch["touch_count"] == N_TOUCH == 2110
    assert sum(r["count"] for r in touch["regions"]) == 2110
    layout = layout_manifest(32)
    vision_block = layout["blocks"][0]
    assert vision_block["name"] == "vision"
    assert len(vision_block["images"]) == 4
    assert vision_block["fov_deg"] == [8.0, 100.0, 8.0, 100.0]
    assert vision_block["size"] == 4 * 32 * 32 * 3
    # cadence: 100 steps advance simulated age by exactly one second
    from cribsim.world import SimClock, DT
    assert DT == 0.01
    c = SimClock()
    for _ in range(100):
        c.advance()
    assert c.sim_age == pytest.approx(1.0, abs=0)
    _report("io-contract-constants")


# ---------------------------------------------------------------------------
DET_SCRIPT = """scenario waves
duration 600
use prop-head
entity puff sphere 0.04 color 0.9 0.4 0.1 tags toy
track prop-head
key 0 pos 0.3 0.6 0.3 rot 1 0 0 0
key 300 pos -0.3 0.5 0.3
key 599 pos 0.3 0.6 0.3
end
action 50 spawn puff 0.12 0.3 0.2
action 200 feed 0.2
action 550 despawn puff
"""


def _determinism_env():
    lex = Lexicon({})
    script = parse_script(DET_SCRIPT, lex)
    cfg = SceneConfig(
        seed=31,
        render=True,
        body=BodyConfig(root_pos=(0.0, 0.12, 0.0)),
        entities=[
            EntitySpec(name="prop-head", shape=sphere(0.09), pos=(0.3, 0.6, 0.3),
                       tags=frozenset({"caregiver-head"})),
            EntitySpec(name="ball", shape=sphere(0.05), pos=(0.1, 0.3, 0.3),
                       dynamic=True, mass=0.2),
            static_sphere("beacon", (0.0, 0.4, 1.0), 0.06),
        ],
    )
    # compressed schedule: the 10k-step window crosses Fetus -> Immobile
    cfg.schedule = StageSchedule(month_s=3.0, birth_age=27.0,
                                 immobile_end=36.0, crawling_end=57.0,
                                 walking_end=81.0)
    cfg.gestation_offset_s = 5.0
    cfg.scenario_schedule = [ScheduleEntry("waves", "at", at_step=40),
                             ScheduleEntry("waves", "periodic",
                                           period=3000, phase=1500)]
    cfg.rules = [ContingentRule("coo", "vocalized", None, 50, "waves", 800)]
    return Environment(cfg, scripts={"waves": script}, lexicon=lex)


def _run_det(steps: int) -> str:
    env = _determinism_env()
    rng = np.random.default_rng(99)
    h = hashlib.sha256()
    h.update(protocol.encode_obs(env.observe(), 0))
    transition_seen = set()
    for i in range(steps):
        a = rng.uniform(-1.0, 1.0, N_MOTORS)
        a[8] = 0.9 if (i % 700) < 20 else 0.0  # periodic vocalization
        obs = env.step(a)
        transition_seen.add(obs.stage)
        h.update(protocol.encode_obs(obs, i + 1))
    assert Stage.FETUS in transition_seen and Stage.IMMOBILE in transition_seen
    return h.hexdigest()


def test_determinism_10k_steps_bit_identical():
    """Two runs, same seed and action stream: bit-identical observation
    streams over 10,000 steps with a stage transition and scenario
    playback."""
    t0 = time.monotonic()
    h1 = _run_det(10_000)
    h2 = _run_det(10_000)
    assert h1 == h2
    assert time.monotonic() - t0 < 120.0
    _report("determinism-10k-steps")


# ---------------------------------------------------------------------------
def test_renderer_oracle():
    """100 randomized sphere placements within +/-2 px of the analytic
    projection; fetal blackout all-zero; nearsighted equals independent
    box blur on 10 cases."""
    import cribsim.vision as vz
    from cribsim.curriculum import AcuityProfile, BLACKOUT

    head_pos = np.zeros(3)
    head_quat = np.array([1.0, 0.0, 0.0, 0.0])
    bg = np.array([0.03, 0.03, 0.05])

    def scene_with(specs):
        s = Scene(seed=1)
        s.background = bg
        for spec in specs:
            s.add_entity(spec)
        return s

    rng = np.random.default_rng(555)
    checked = 0
    for case in range(100):
        use_central = case % 2 == 0
        fov = vz.CENTRAL_FOV if use_central else vz.PERIPHERAL_FOV
        half_fov = math.radians(fov / 2.0)
        dist = float(rng.uniform(0.8, 3.0))
        theta = float(rng.uniform(-0.25 * half_fov, 0.25 * half_fov))
        alpha = float(rng.uniform(0.12 * half_fov, 0.4 * half_fov))
        r = dist * math.sin(alpha)
        pos = (dist * math.sin(theta), 0.0, dist * math.cos(theta))
        s = scene_with([static_sphere("ball", pos, r, color=(1, 0, 0))])
        frame = render_frame(s, EyeState(focal=dist), head_pos, head_quat)
        img = frame.left_central if use_central else frame.left_peripheral
        eye_x = -0.02
        dx, dz = pos[0] - eye_x, pos[2]
        d_eye = math.hypot(dx, dz)
        if r >= d_eye:
            continue
        per_eye, _, _, _ = vz.eye_geometry(EyeState(focal=dist), head_pos, head_quat)
        fwd = per_eye["left"][1]
        theta_eye = math.atan2(dx, dz) - math.atan2(fwd[0], fwd[2])
        alpha_eye = math.asin(r / d_eye)
        if abs(theta_eye) + alpha_eye > 0.9 * half_fov:
            continue
        t0 = math.tan(theta_eye - alpha_eye)
        t1 = math.tan(theta_eye + alpha_eye)
        expected_px = 32 * (t1 - t0) / (2 * math.tan(half_fov))
        hit = np.any(img.pixels != bg, axis=2)
        measured = len(np.flatnonzero(hit.any(axis=0)))
        assert abs(measured - expected_px) <= 2.0, (case, measured, expected_px)
        checked += 1
    assert checked >= 80

    # fetal blackout
    s = scene_with([static_sphere("ball", (0, 0, 1.0), 0.3, color=(1, 0, 0))])
    frame = render_frame(s, EyeState(), head_pos, head_quat, acuity=BLACKOUT)
    for _, img in frame.retinas():
        assert np.all(img.pixels == 0.0)

    # nearsighted blur equals an independently computed box blur, 10 cases
    profile = AcuityProfile("nearsighted", d_clear=0.75, d_max=2.0)
    for case in range(10):
        n = int(rng.integers(1, 4))
        specs = [static_sphere(
            f"s{i}", (float(rng.uniform(-0.6, 0.6)), float(rng.uniform(-0.4, 0.4)),
                      float(rng.uniform(0.5, 3.5))),
            float(rng.uniform(0.1, 0.35)), color=tuple(rng.uniform(0.2, 1.0, 3)))
            for i in range(n)]
        s = scene_with(specs)
        raw = render_frame(s, EyeState(focal=1.0), head_pos, head_quat)
        blurred = apply_acuity(raw, profile)
        for name, img in raw.retinas():
            radii = blur_radius_map(raw.depths[name], profile)
            out = getattr(blurred, name).pixels
            h, w, _ = img.pixels.shape
            for i in range(h):
                for j in range(w):
                    rr = int(radii[i, j])
                    y0, y1 = max(0, i - rr), min(h, i + rr + 1)
                    x0, x1 = max(0, j - rr), min(w, j + rr + 1)
                    expect = img.pixels[y0:y1, x0:x1].reshape(-1, 3).mean(axis=0)
                    assert np.allclose(out[i, j], expect, atol=1e-12)
    _report("renderer-oracle")


# ---------------------------------------------------------------------------
def test_harness_discrimination_10_seeds():
    """vexp-standard: ideal-looker >= 0.9, random-gaze <= 0.2, separated
    by >= 0.5, on every one of 10 seeds."""
    t0 = time.monotonic()
    spec = load_preset("vexp-standard")
    for seed in range(10):
        ideal = run_visual_expectation(spec, make_oracle("ideal-looker"), seed)
        rnd = run_visual_expectation(spec, make_oracle("random-gaze"), seed)
        ri = ideal.values["anticipation_rate"]
        rr = rnd.values["anticipation_rate"]
        assert ri >= 0.9, f"seed {seed}: ideal {ri}"
        assert rr <= 0.2, f"seed {seed}: random {rr}"
        assert ri - rr >= 0.5, f"seed {seed}: separation {ri - rr}"
    assert time.monotonic() - t0 < 300.0
    _report("harness-discrimination-10-seeds")


# ---------------------------------------------------------------------------
def test_habituation_arithmetic_and_rod_box():
    """Habituating looker reaches criterion at the hand-computed trial;
    dishabituation equals the closed form within 1e-9 s. Rod-and-box gives
    a positive score toward the broken rod (direction only)."""
    t0 = time.monotonic()
    looker = HabituatingLooker()
    planned = [looker.planned_look_steps(t, "habituation", "") / 100.0
               for t in range(20)]
    base = sum(planned[:3]) / 3.0
    expect_idx = next(i for i in range(5, 20)
                      if sum(planned[i - 2:i + 1]) / 3.0 < 0.5 * base)
    m = run_habituation_dishab(load_preset("habituation-basic"),
                               HabituatingLooker(), seed=0)
    assert m.flags["habituated"]
    assert m.values["trials_to_criterion"] == expect_idx + 1
    hab_n = expect_idx + 1
    novel = looker.planned_look_steps(0, "test", "novel", hab_n) / 100.0
    familiar = looker.planned_look_steps(0, "test", "familiar", hab_n) / 100.0
    assert abs(m.values["dishabituation_score"] - (novel - familiar)) < 1e-9

    rb = run_habituation_dishab(load_preset("rod-and-box"),
                                make_oracle("four-month-looker"), seed=1)
    assert rb.flags["habituated"]
    assert rb.values["dishabituation_score"] > 0.0
    assert time.monotonic() - t0 < 300.0
    _report("habituation-arithmetic-rod-box")


# ---------------------------------------------------------------------------
def test_curriculum_gating_sweep():
    """Sweeping sim_age: acuity and strength monotone per the documented
    profiles; observation shapes never change; fetal frames zero."""
    sched = StageSchedule()
    ages = np.linspace(0.0, sched.walking_end, 2000)
    strengths = [stage_strength(float(a), sched) for a in ages]
    clarities = [acuity_at(float(a), sched).clarity() for a in ages]
    assert all(b >= a for a, b in zip(strengths, strengths[1:]))
    assert all(b >= a - 1e-12 for a, b in zip(clarities, clarities[1:]))
    assert strengths[0] == 0.2 and strengths[-1] == 1.0
    assert clarities[0] == 0.0 and clarities[-1] == 1.0

    # live sweep: one env stepped across every stage boundary
    cfg = SceneConfig(seed=5, render=True,
                      entities=[static_sphere("probe", (0, 0.5, 1.0), 0.2,
                                              color=(1.0, 0.2, 0.2))])
    cfg.schedule = StageSchedule(month_s=0.4, birth_age=3.6,
                                 immobile_end=4.8, crawling_end=7.6,
                                 walking_end=10.8)
    cfg.gestation_offset_s = 3.0
    env = Environment(cfg, scripts={}, lexicon=Lexicon({}))
    shapes = None
    seen = []
    for _ in range(800):  # 8 simulated seconds: crosses every boundary
        obs = env.step(np.zeros(N_MOTORS))
        if obs.stage not in seen:
            seen.append(obs.stage)
        sh = (obs.touch.shape, obs.proprioception.shape,
              obs.vestibular.shape,
              tuple(img.pixels.shape for _, img in obs.vision.retinas()))
        if shapes is None:
            shapes = sh
        assert sh == shapes
        if obs.stage == Stage.FETUS:
            assert all(np.all(img.pixels == 0.0)
                       for _, img in obs.vision.retinas())
    assert seen == [Stage.FETUS, Stage.IMMOBILE, Stage.CRAWLING, Stage.WALKING]
    _report("curriculum-gating")


# ---------------------------------------------------------------------------
def test_scenario_engine_criterion():
    """Exact-step starts; contingent window + refractory under 1,000
    fuzzed logs; corpus round-trip; position-annotated errors."""
    lex = Lexicon.parse((PRESETS / "core.lex").read_text())

    # exact-step scheduled start
    scene = Scene(seed=2)
    scene.add_entity(EntitySpec(name="caregiver-head", shape=sphere(0.09),
                                pos=(0, 1, 0)))
    from cribsim.scenario import ScenarioEngine
    script = parse_script("scenario s\nduration 30\nutter 0 1.0 hello\n", lex)
    eng = ScenarioEngine(scene, {"s": script},
                         [ScheduleEntry("s", "at", at_step=123)], [])
    for step in range(1, 200):
        res = eng.step(step, Stage.IMMOBILE, Stage.IMMOBILE, BehaviorLog())
        if step == 123:
            assert res.started == ("s",)
        else:
            assert "s" not in res.started

    # fuzz: firing respects window and refractory on 1,000 random logs
    rng = np.random.default_rng(77)
    for case in range(1000):
        window = int(rng.integers(1, 80))
        refractory = int(rng.integers(1, 200))
        rule = ContingentRule(f"r{case}", "touched", "toy", window,
                              "resp", refractory)
        last = {}
        touch_steps = sorted(rng.choice(600, size=rng.integers(0, 25),
                                        replace=False))
        log = BehaviorLog()
        cursor = 0
        fired = []
        for step in range(600):
            touched = set()
            while cursor < len(touch_steps) and touch_steps[cursor] == step:
                touched.add("toy")
                cursor += 1
            log.record_step(step, touched, False, set())
            if evaluate_contingent([rule], log, step, last):
                fired.append(step)
                # a firing implies a touch within the window
                assert any(step - window < t <= step for t in touch_steps)
        for a, b in zip(fired, fired[1:]):
            assert b - a >= refractory

    # corpus round-trip (>= 10 scripts)
    files = sorted(PRESETS.glob("*.scn"))
    assert len(files) >= 10
    for path in files:
        s1 = parse_script(path.read_text(), lex, source=str(path))
        assert parse_script(serialize_script(s1), lex) == s1

    # malformed scripts carry positions
    with pytest.raises(ParseError) as ei:
        parse_script("scenario x\nduration 10\nutter 0 2.5 hello\n", lex,
                     source="m.scn")
    assert ei.value.line == 3 and "m.scn:3" in str(ei.value)
    _report("scenario-engine")


# ---------------------------------------------------------------------------
def test_performance_targets():
    """>= 100 steps/s with full rendering; >= 2,000 steps/s vision off
    (single scene, active kernel backend)."""
    from cribsim.bench import bench_step_loop

    sps_render = bench_step_loop(steps=300, render=True)
    sps_blind = bench_step_loop(steps=600, render=False)
    print(f"\n  [{BACKEND} backend] render {sps_render:.0f} steps/s, "
          f"no-vision {sps_blind:.0f} steps/s")
    assert sps_render >= 100.0
    assert sps_blind >= 2000.0
    _report("performance-targets")


# ---------------------------------------------------------------------------
def _random_body(rng):
    keys = ["k" + str(i) for i in range(rng.integers(1, 6))]
    out = {}
    for k in keys:
        choice = rng.integers(0, 4)
        if choice == 0:
            out[k] = int(rng.integers(-10**9, 10**9))
        elif choice == 1:
            out[k] = float(np.round(rng.uniform(-1e6, 1e6), 6))
        elif choice == 2:
            out[k] = bool(rng.integers(0, 2))
        else:
            out[k] = "".join(chr(97 + int(c)) for c in rng.integers(0, 26, 8))
    return out


def test_protocol_criterion():
    """Encode/decode round-trip identity on 10,000 randomized valid
    frames; bad action length and version mismatch produce the documented
    ERROR behavior."""
    rng = np.random.default_rng(2718)
    types = sorted(protocol.TYPE_NAMES)
    for case in range(10_000):
        body = _random_body(rng)
        blocks = {}
        for b in range(rng.integers(0, 3)):
            blocks[f"blk{b}"] = bytes(rng.integers(0, 256,
                                                   rng.integers(0, 200),
                                                   dtype=np.uint8))
        mt = types[case % len(types)]
        data = protocol.encode_frame(mt, body, blocks)
        frame, consumed = protocol.decode_frame(data)
        assert consumed == len(data)
        assert frame.msg_type == mt
        assert frame.body == json.loads(json.dumps(body))
        assert frame.blocks == blocks

    # documented error behavior over a live socket
    from cribsim.service import EnvironmentService
    from cribsim.protocol import (ACT, ERROR, HELLO, Connection,
                                  PROTOCOL_VERSION)

    cfg = SceneConfig(seed=1, render=False)
    svc = EnvironmentService(cfg, port=0)
    th = threading.Thread(target=svc.serve_forever, daemon=True)
    th.start()

    # bad action length -> ERROR + close
    sock = socket.create_connection(svc.address, timeout=10)
    conn = Connection(sock)
    conn.send(HELLO, {"version": PROTOCOL_VERSION})
    conn.recv(); conn.recv(); conn.recv()
    conn.send(ACT, {"values": [0.0] * 52})
    err = conn.recv()
    assert err.msg_type == ERROR and "bad action length" in err.body["message"]
    with pytest.raises(ConnectionError):
        conn.recv()
    conn.close()

    # version mismatch -> ERROR + close
    sock = socket.create_connection(svc.address, timeout=10)
    conn = Connection(sock)
    conn.send(HELLO, {"version": "0.0"})
    err = conn.recv()
    assert err.msg_type == ERROR and err.body["code"] == "version_mismatch"
    with pytest.raises(ConnectionError):
        conn.recv()
    conn.close()
    svc.stop()
    th.join(timeout=5)
    _report("protocol")
