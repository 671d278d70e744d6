"""Curriculum: stage mapping, capability gating, milestone gates."""

import numpy as np
import pytest

from cribsim.curriculum import (AcuityProfile, CapabilityMask, MilestoneGate,
                                Stage, StageSchedule, acuity_at,
                                capability_mask, evaluate_gate, stage_at,
                                stage_strength)
from cribsim.errors import ExperimentError
from cribsim.harness import Metrics


@pytest.fixture
def sched():
    return StageSchedule()


class TestStageAt:
    def test_before_birth_is_fetus(self, sched):
        assert stage_at(0.0, sched) == Stage.FETUS
        assert stage_at(sched.birth_age - 1e-9, sched) == Stage.FETUS

    def test_two_months_after_birth_immobile(self, sched):
        age = sched.birth_age + 2 * sched.month_s
        assert stage_at(age, sched) == Stage.IMMOBILE

    def test_twelve_months_after_birth_walking(self, sched):
        age = sched.birth_age + 12 * sched.month_s
        assert stage_at(age, sched) == Stage.WALKING

    def test_boundary_belongs_to_later_stage(self, sched):
        assert stage_at(sched.birth_age, sched) == Stage.IMMOBILE
        assert stage_at(sched.immobile_end, sched) == Stage.CRAWLING
        assert stage_at(sched.crawling_end, sched) == Stage.WALKING

    def test_exactly_one_stage_everywhere(self, sched):
        for age in np.linspace(0, sched.walking_end * 1.5, 5000):
            assert stage_at(float(age), sched) in list(Stage)

    def test_monotone_step_function(self, sched):
        ages = np.linspace(0, sched.walking_end * 1.2, 3000)
        stages = [stage_at(float(a), sched) for a in ages]
        assert all(b >= a for a, b in zip(stages, stages[1:]))

    def test_invalid_boundaries_rejected(self):
        with pytest.raises(ValueError):
            StageSchedule(birth_age=100.0, immobile_end=50.0)


class TestCapabilityMask:
    def test_fetus_blackout_locked_muffled(self):
        m = capability_mask(Stage.FETUS)
        assert m.acuity.mode == "blackout"
        assert m.strength_anchor == 0.2
        assert m.root_locked
        assert m.audio_gain == pytest.approx(0.3)

    def test_immobile_nearsighted(self):
        m = capability_mask(Stage.IMMOBILE)
        assert m.acuity.mode == "nearsighted"
        assert m.strength_anchor == 0.4
        assert m.root_locked

    def test_walking_full(self):
        m = capability_mask(Stage.WALKING)
        assert m.acuity.mode == "full"
        assert m.strength_anchor == 1.0
        assert not m.root_locked

    def test_strength_anchors_nondecreasing(self):
        anchors = [capability_mask(s).strength_anchor for s in Stage]
        assert anchors == sorted(anchors)

    def test_acuity_clarity_never_degrades(self, sched):
        ages = np.linspace(0, sched.walking_end, 4000)
        clar = [acuity_at(float(a), sched).clarity() for a in ages]
        assert all(b >= a - 1e-12 for a, b in zip(clar, clar[1:]))
        assert clar[0] == 0.0 and clar[-1] == 1.0

    def test_immobile_ramp_reaches_full(self, sched):
        lo, hi = sched.stage_span(Stage.IMMOBILE)
        early = acuity_at(lo, sched)
        assert early.d_clear == pytest.approx(0.75)
        assert early.d_max == pytest.approx(2.0)
        late = acuity_at(hi - 1e-6, sched)
        assert late.d_clear > 9.0  # effectively clear across the nursery


def _metrics(exp_id, **values):
    return Metrics(experiment_id=exp_id, kind="vexp", seed=0, values=values)


class TestMilestoneGate:
    def make_gate(self):
        return MilestoneGate("g1", Stage.IMMOBILE, "vexp-standard",
                             "anticipation_rate", ">=", 0.5,
                             replay_scenarios=("rattle-shake", "peekaboo"))

    def test_pass(self):
        r = evaluate_gate(self.make_gate(),
                          _metrics("vexp-standard", anticipation_rate=0.95))
        assert r.passed and r.replay_scenarios == ()

    def test_replay_on_failure(self):
        r = evaluate_gate(self.make_gate(),
                          _metrics("vexp-standard", anticipation_rate=0.1))
        assert not r.passed
        assert r.replay_scenarios == ("rattle-shake", "peekaboo")

    def test_wrong_experiment_mismatch(self):
        with pytest.raises(ExperimentError, match="expects metrics"):
            evaluate_gate(self.make_gate(),
                          _metrics("face-preference", anticipation_rate=0.9))

    def test_deterministic(self):
        m = _metrics("vexp-standard", anticipation_rate=0.5)
        g = self.make_gate()
        assert evaluate_gate(g, m).passed == evaluate_gate(g, m).passed
