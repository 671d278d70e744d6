"""Scenario engine: DSL parsing and round-trip, scheduling, contingency,
keyframe playback."""

from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cribsim.curriculum import Stage
from cribsim.errors import ParseError
from cribsim.scenario import (BehaviorLog, ContingentRule, Keyframe, Lexicon,
                              ScenarioEngine, ScheduleEntry, Utterance,
                              evaluate_contingent, parse_script,
                              serialize_script)
from cribsim.world import EntitySpec, Scene, sphere

PRESETS = Path(__file__).parent.parent / "src" / "cribsim" / "presets"


@pytest.fixture(scope="module")
def lexicon():
    return Lexicon.parse((PRESETS / "core.lex").read_text())


def simple_script(lexicon, text=None):
    src = text or (
        "scenario demo\n"
        "duration 400\n"
        "use caregiver-head\n"
        "entity ball sphere 0.05 color 1 0 0 tags toy\n"
        "track caregiver-head\n"
        "key 0 pos 0 1 0\n"
        "key 100 pos 1 1 0\n"
        "end\n"
        "utter 50 0.8 hello baby\n"
        "action 10 spawn ball 0 0.5 0\n"
        "action 300 despawn ball\n"
        "action 200 feed 0.25\n")
    return parse_script(src, lexicon)


class TestParser:
    def test_header_only(self, lexicon):
        s = parse_script("scenario empty\nduration 100\n", lexicon)
        assert s.script_id == "empty"
        assert s.duration == 100
        assert s.tracks == ()

    def test_full_script(self, lexicon):
        s = simple_script(lexicon)
        assert len(s.tracks) == 1
        assert s.tracks[0].keys[1].pos == (1.0, 1.0, 0.0)
        assert s.utterances[0].tokens == (1, 2)  # hello baby
        assert {a.kind for a in s.actions} == {"spawn", "despawn", "feed"}

    def test_non_monotone_keyframes_position_annotated(self, lexicon):
        src = ("scenario bad\nduration 100\n"
               "use thing\n"
               "track thing\n"
               "key 10 pos 0 0 0\n"
               "key 5 pos 1 0 0\n"
               "end\n")
        with pytest.raises(ParseError) as ei:
            parse_script(src, lexicon, source="bad.scn")
        assert ei.value.line == 6  # the offending keyframe line
        assert "bad.scn:6" in str(ei.value)
        assert "not after previous" in str(ei.value)

    def test_unknown_token_rejected(self, lexicon):
        src = "scenario x\nduration 10\nutter 0 0.5 flibbertigibbet\n"
        with pytest.raises(ParseError, match="unknown token"):
            parse_script(src, lexicon)

    def test_dangling_entity_reference(self, lexicon):
        src = ("scenario x\nduration 100\n"
               "track ghost\nkey 0 pos 0 0 0\nend\n")
        with pytest.raises(ParseError, match="undeclared entity"):
            parse_script(src, lexicon)

    def test_syntax_error_carries_position(self, lexicon):
        src = "scenario x\nduration 100\nfrobnicate 1 2 3\n"
        with pytest.raises(ParseError) as ei:
            parse_script(src, lexicon, source="s.scn")
        assert ei.value.line == 3

    def test_action_outside_duration_rejected(self, lexicon):
        src = "scenario x\nduration 100\naction 100 feed 0.5\n"
        with pytest.raises(ParseError, match="outside"):
            parse_script(src, lexicon)

    def test_roundtrip_simple(self, lexicon):
        s = simple_script(lexicon)
        assert parse_script(serialize_script(s), lexicon) == s

    def test_roundtrip_shipped_corpus(self, lexicon):
        """parse -> serialize -> parse is the identity on every shipped
        scenario (the corpus has >= 10 scripts)."""
        files = sorted(PRESETS.glob("*.scn"))
        assert len(files) >= 10
        for path in files:
            s1 = parse_script(path.read_text(), lexicon, source=str(path))
            s2 = parse_script(serialize_script(s1), lexicon)
            assert s1 == s2, path.name


class TestLexicon:
    def test_token_zero_reserved(self):
        with pytest.raises(ParseError, match="reserved"):
            Lexicon.parse("0 hello\n")

    def test_duplicate_id_rejected(self):
        with pytest.raises(ParseError, match="duplicate token id"):
            Lexicon.parse("1 a\n1 b\n")

    def test_roundtrip(self, lexicon):
        again = Lexicon.parse(lexicon.serialize())
        assert again.id_to_word == lexicon.id_to_word


def make_engine(lexicon, schedule=(), rules=(), scripts_text=()):
    scene = Scene(seed=5)
    scene.add_entity(EntitySpec(name="caregiver-head", shape=sphere(0.09),
                                pos=(0, 1, 0), tags=frozenset({"caregiver-head"})))
    scripts = {}
    for text in scripts_text:
        s = parse_script(text, lexicon)
        scripts[s.script_id] = s
    return scene, ScenarioEngine(scene, scripts, schedule, rules)


BASIC = ("scenario basic\nduration 50\nuse caregiver-head\n"
         "track caregiver-head\nkey 0 pos 0 1 0\nkey 40 pos 1 1 0\nend\n")
OTHER = "scenario other\nduration 30\nutter 0 1.0 hello\n"


class TestScheduler:
    def test_at_step_fires_exactly_once(self, lexicon):
        scene, eng = make_engine(
            lexicon, schedule=[ScheduleEntry("basic", "at", at_step=500)],
            scripts_text=[BASIC])
        started = []
        for step in range(1, 700):
            r = eng.step(step, Stage.IMMOBILE, Stage.IMMOBILE, BehaviorLog())
            started.extend(r.started)
        assert started == ["basic"]

    def test_periodic_fires_on_phase(self, lexicon):
        scene, eng = make_engine(
            lexicon, schedule=[ScheduleEntry("basic", "periodic",
                                             period=1000, phase=0)],
            scripts_text=[BASIC])
        assert eng.tick_scheduler(3000, Stage.IMMOBILE, Stage.IMMOBILE) == ["basic"]
        assert eng.tick_scheduler(3001, Stage.IMMOBILE, Stage.IMMOBILE) == []

    def test_stage_entry_fires_once_across_ramp(self, lexicon):
        scene, eng = make_engine(
            lexicon,
            schedule=[ScheduleEntry("basic", "stage", stage=Stage.CRAWLING)],
            scripts_text=[BASIC])
        fires = []
        prev = None
        # scripted age ramp crossing into Crawling and beyond
        stages = [Stage.IMMOBILE] * 100 + [Stage.CRAWLING] * 200 + [Stage.WALKING] * 100
        for step, stage in enumerate(stages, start=1):
            fires.extend(eng.tick_scheduler(step, stage, prev))
            prev = stage
        assert fires == ["basic"]

    def test_playing_scenario_not_restarted(self, lexicon):
        scene, eng = make_engine(
            lexicon, schedule=[ScheduleEntry("basic", "at", at_step=10),
                               ScheduleEntry("basic", "at", at_step=12)],
            scripts_text=[BASIC])
        started = []
        for step in range(1, 100):
            started.extend(eng.step(step, Stage.IMMOBILE, Stage.IMMOBILE,
                                    BehaviorLog()).started)
        assert started == ["basic"]


class TestContingent:
    def test_touched_within_window_fires(self):
        rules = [ContingentRule("r", "touched", "toy", 50, "resp", 500)]
        log = BehaviorLog()
        log.record_step(100, {"toy"}, False, set())
        assert evaluate_contingent(rules, log, 110, {}) == ["resp"]

    def test_refractory_blocks_refire(self):
        rules = [ContingentRule("r", "touched", "toy", 50, "resp", 500)]
        log = BehaviorLog()
        log.record_step(100, {"toy"}, False, set())
        last = {}
        assert evaluate_contingent(rules, log, 105, last) == ["resp"]
        log.record_step(108, {"toy"}, False, set())
        assert evaluate_contingent(rules, log, 110, last) == []
        assert evaluate_contingent(rules, log, 606, last) == []  # event stale

    def test_fixation_run_requirement(self):
        rules = [ContingentRule("r", "fixated", "caregiver-head", 30, "resp", 100)]
        log = BehaviorLog()
        for step in range(1, 30):
            log.record_step(step, set(), False, {"caregiver-head"})
            assert evaluate_contingent(rules, log, step, {}) == []
        log.record_step(30, set(), False, {"caregiver-head"})
        assert evaluate_contingent(rules, log, 30, {}) == ["resp"]
        # a broken run resets the counter
        log.record_step(31, set(), False, set())
        assert log.fixation_run("caregiver-head") == 0

    def test_vocalized_window(self):
        rules = [ContingentRule("r", "vocalized", None, 50, "resp", 100)]
        log = BehaviorLog()
        log.record_step(10, set(), True, set())
        assert evaluate_contingent(rules, log, 59, {}) == ["resp"]
        log2 = BehaviorLog()
        log2.record_step(10, set(), True, set())
        assert evaluate_contingent(rules, log2, 61, {}) == []

    def test_invalid_rule_parameters(self):
        with pytest.raises(ValueError):
            ContingentRule("r", "touched", "toy", 50, "resp", 0)
        with pytest.raises(ValueError):
            ContingentRule("r", "touched", "toy", 0, "resp", 10)

    @settings(max_examples=200, deadline=None)
    @given(st.lists(st.tuples(st.integers(0, 2000), st.booleans()),
                    min_size=0, max_size=60),
           st.integers(2, 300), st.integers(1, 60))
    def test_refractory_never_violated_fuzz(self, events, refractory, window):
        """For any behavior log, two firings of a rule are never closer
        than the refractory period."""
        rules = [ContingentRule("r", "touched", "toy", window, "resp",
                                refractory)]
        log = BehaviorLog()
        last = {}
        fired_steps = []
        evs = sorted(events)
        cursor = 0
        for step in range(0, 2100):
            touched = set()
            while cursor < len(evs) and evs[cursor][0] == step:
                if evs[cursor][1]:
                    touched.add("toy")
                cursor += 1
            log.record_step(step, touched, False, set())
            if evaluate_contingent(rules, log, step, last):
                fired_steps.append(step)
        for a, b in zip(fired_steps, fired_steps[1:]):
            assert b - a >= refractory


class TestPlayback:
    def test_lerp_between_keyframes(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[
            "scenario lerp\nduration 200\nuse caregiver-head\n"
            "track caregiver-head\nkey 0 pos 0 0 0\nkey 100 pos 1 0 0\nend\n"])
        s = eng.scripts["lerp"]
        eng.play_step(s, 50)
        assert scene.by_name("caregiver-head").pos[0] == pytest.approx(0.5)

    def test_clamped_before_first_and_after_last(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[
            "scenario clamp\nduration 300\nuse caregiver-head\n"
            "track caregiver-head\nkey 100 pos 2 0 0\nkey 200 pos 3 0 0\nend\n"])
        s = eng.scripts["clamp"]
        eng.play_step(s, 0)
        assert scene.by_name("caregiver-head").pos[0] == 2.0
        eng.play_step(s, 299)
        assert scene.by_name("caregiver-head").pos[0] == 3.0

    def test_silence_outside_utterances(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[
            "scenario quiet\nduration 100\nutter 50 0.9 hello\n"])
        s = eng.scripts["quiet"]
        utter, _ = eng.play_step(s, 10)
        assert utter == Utterance(0, 0.0)
        utter, _ = eng.play_step(s, 60)
        assert utter.token == 1 and utter.amplitude == 0.9

    def test_out_of_range_step_rejected(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[OTHER])
        with pytest.raises(ValueError, match="outside"):
            eng.play_step(eng.scripts["other"], 30)

    def test_feed_action_returns_amount(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[
            "scenario feed\nduration 300\naction 200 feed 0.4\n"])
        s = eng.scripts["feed"]
        _, fed = eng.play_step(s, 199)
        assert fed == 0.0
        _, fed = eng.play_step(s, 200)
        assert fed == 0.4

    def test_spawn_despawn_toggle_activity(self, lexicon):
        scene, eng = make_engine(lexicon, scripts_text=[
            "scenario sp\nduration 100\n"
            "entity ball sphere 0.05 color 1 0 0 tags toy\n"
            "action 10 spawn ball 0 2 0\naction 90 despawn ball\n"])
        s = eng.scripts["sp"]
        ball = scene.by_name("sp/ball")
        assert not ball.active
        eng.play_step(s, 10)
        assert ball.active
        np.testing.assert_allclose(scene.by_name("sp/ball").pos, [0, 2, 0])
        eng.play_step(s, 90)
        assert not scene.by_name("sp/ball").active

    def test_queue_fifo_with_overflow_drop(self, lexicon):
        texts = [BASIC] + [
            f"scenario s{i}\nduration 20\nutter 0 1.0 hello\n" for i in range(6)]
        scene, eng = make_engine(lexicon, scripts_text=texts)
        log = BehaviorLog()
        eng._start_or_queue("basic", 1)
        for i in range(6):
            eng._start_or_queue(f"s{i}", 1)
        assert eng.active == "basic"
        assert list(eng.queue) == ["s0", "s1", "s2", "s3"]
        assert eng.dropped_log == [(1, "s4"), (1, "s5")]
