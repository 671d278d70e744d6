"""Developmental stage controller.

Maps simulated age to one of four stages, gates sensory acuity / muscle
strength / mobility / audio, and evaluates milestone gates that decide
between passing on and replaying experiences.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

from .errors import ExperimentError


class Stage(enum.IntEnum):
    FETUS = 0
    IMMOBILE = 1
    CRAWLING = 2
    WALKING = 3

    @property
    def label(self) -> str:
        return self.name.capitalize()


STAGE_BY_LABEL = {s.label: s for s in Stage}

# strength anchors pinned at stage midpoints
STRENGTH_ANCHORS = {
    Stage.FETUS: 0.2,
    Stage.IMMOBILE: 0.4,
    Stage.CRAWLING: 0.7,
    Stage.WALKING: 1.0,
}

# nearsighted optics at birth; thresholds ramp out across the Immobile stage
NEARSIGHT_D_CLEAR = 0.75
NEARSIGHT_D_MAX = 2.0
FULL_D_CLEAR = 10.0
FULL_D_MAX = 12.0

FETAL_AUDIO_GAIN = 0.3


@dataclass(frozen=True)
class AcuityProfile:
    """Vision post-processing parameters. mode is one of
    'blackout' | 'nearsighted' | 'full'."""

    mode: str
    d_clear: float = NEARSIGHT_D_CLEAR
    d_max: float = NEARSIGHT_D_MAX

    def clarity(self) -> float:
        """Monotone scalar used by gating tests: 0 blackout, 1 full."""
        if self.mode == "blackout":
            return 0.0
        if self.mode == "full":
            return 1.0
        return min(1.0, 0.5 + 0.5 * (self.d_clear - NEARSIGHT_D_CLEAR)
                   / (FULL_D_CLEAR - NEARSIGHT_D_CLEAR))


BLACKOUT = AcuityProfile("blackout")
FULL_ACUITY = AcuityProfile("full")


@dataclass(frozen=True)
class StageSchedule:
    """Age thresholds in seconds of simulated age (since conception).

    The default desk scale compresses one developmental month to
    `month_s` = 600 simulated seconds; a real-scale schedule is just a
    different month_s in the config.
    """

    month_s: float = 600.0
    birth_age: float = 9 * 600.0
    immobile_end: float = 12 * 600.0   # birth + 3 months
    crawling_end: float = 19 * 600.0   # birth + 10 months
    walking_end: float = 27 * 600.0    # birth + 18 months

    def __post_init__(self):
        ages = (self.birth_age, self.immobile_end, self.crawling_end, self.walking_end)
        if not all(b < a for b, a in zip(ages, ages[1:])):
            raise ValueError("stage boundaries must be strictly increasing")

    def stage_at(self, sim_age: float) -> Stage:
        """Boundaries belong to the later stage."""
        if sim_age < self.birth_age:
            return Stage.FETUS
        if sim_age < self.immobile_end:
            return Stage.IMMOBILE
        if sim_age < self.crawling_end:
            return Stage.CRAWLING
        return Stage.WALKING

    def stage_span(self, stage: Stage) -> tuple[float, float]:
        if stage == Stage.FETUS:
            return (0.0, self.birth_age)
        if stage == Stage.IMMOBILE:
            return (self.birth_age, self.immobile_end)
        if stage == Stage.CRAWLING:
            return (self.immobile_end, self.crawling_end)
        return (self.crawling_end, self.walking_end)

    def stage_midpoint(self, stage: Stage) -> float:
        lo, hi = self.stage_span(stage)
        return 0.5 * (lo + hi)


def stage_at(sim_age: float, schedule: StageSchedule) -> Stage:
    return schedule.stage_at(sim_age)


def stage_strength(sim_age: float, schedule: StageSchedule) -> float:
    """Piecewise-linear muscle strength through the per-stage anchors,
    continuous and non-decreasing in age."""
    stages = list(Stage)
    mids = [schedule.stage_midpoint(s) for s in stages]
    vals = [STRENGTH_ANCHORS[s] for s in stages]
    if sim_age <= mids[0]:
        return vals[0]
    for k in range(len(mids) - 1):
        if sim_age <= mids[k + 1]:
            t = (sim_age - mids[k]) / (mids[k + 1] - mids[k])
            return vals[k] + t * (vals[k + 1] - vals[k])
    return vals[-1]


def acuity_at(sim_age: float, schedule: StageSchedule) -> AcuityProfile:
    """Stage-gated acuity; nearsighted thresholds relax linearly across
    the Immobile stage, reaching full acuity at stage end."""
    stage = schedule.stage_at(sim_age)
    if stage == Stage.FETUS:
        return BLACKOUT
    if stage == Stage.IMMOBILE:
        lo, hi = schedule.stage_span(Stage.IMMOBILE)
        t = (sim_age - lo) / (hi - lo)
        return AcuityProfile(
            "nearsighted",
            d_clear=NEARSIGHT_D_CLEAR + t * (FULL_D_CLEAR - NEARSIGHT_D_CLEAR),
            d_max=NEARSIGHT_D_MAX + t * (FULL_D_MAX - NEARSIGHT_D_MAX),
        )
    return FULL_ACUITY


@dataclass(frozen=True)
class CapabilityMask:
    acuity: AcuityProfile
    strength_anchor: float
    root_locked: bool
    audio_gain: float


def capability_mask(stage: Stage) -> CapabilityMask:
    if stage == Stage.FETUS:
        return CapabilityMask(BLACKOUT, 0.2, True, FETAL_AUDIO_GAIN)
    if stage == Stage.IMMOBILE:
        return CapabilityMask(AcuityProfile("nearsighted"), 0.4, True, 1.0)
    if stage == Stage.CRAWLING:
        return CapabilityMask(FULL_ACUITY, 0.7, False, 1.0)
    return CapabilityMask(FULL_ACUITY, 1.0, False, 1.0)


@dataclass(frozen=True)
class GateResult:
    passed: bool
    replay_scenarios: tuple[str, ...] = ()


@dataclass(frozen=True)
class MilestoneGate:
    """Pass/replay decision attached to one experiment's metrics.

    predicate: (metric_name, op, threshold) with op in {'>=','<=','>','<'}.
    The gate never mutates the schedule; the driver decides what to do
    with a replay result.
    """

    gate_id: str
    stage: Stage
    experiment_id: str
    metric: str
    op: str
    threshold: float
    replay_scenarios: tuple[str, ...] = ()

    def evaluate(self, metrics) -> GateResult:
        if metrics.experiment_id != self.experiment_id:
            raise ExperimentError(
                f"gate {self.gate_id!r} expects metrics from "
                f"{self.experiment_id!r}, got {metrics.experiment_id!r}")
        value = metrics.values.get(self.metric)
        if value is None or (isinstance(value, float) and math.isnan(value)):
            raise ExperimentError(
                f"gate {self.gate_id!r}: metric {self.metric!r} missing")
        ok = {
            ">=": value >= self.threshold,
            "<=": value <= self.threshold,
            ">": value > self.threshold,
            "<": value < self.threshold,
        }.get(self.op)
        if ok is None:
            raise ExperimentError(f"gate {self.gate_id!r}: bad op {self.op!r}")
        if ok:
            return GateResult(True)
        return GateResult(False, self.replay_scenarios)


def evaluate_gate(gate: MilestoneGate, metrics) -> GateResult:
    return gate.evaluate(metrics)
