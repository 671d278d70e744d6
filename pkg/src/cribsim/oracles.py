"""Scripted oracle agents for exercising the evaluation harness.

Oracles are deterministic per seed. They receive the experiment briefing
once and a per-step context dict from the harness (trial phase, current
display, target pan/tilt); a learning agent gets neither.
"""

from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .body import N_MOTORS
from .rng import stream

EYE_REST_FOCAL = 1.2


class OracleAgent:
    name = "oracle"

    def begin(self, briefing: dict, seed: int) -> None:  # pragma: no cover
        pass

    def act(self, obs, ctx: dict) -> np.ndarray:
        raise NotImplementedError

    def _gaze_action(self, pan: float, tilt: float,
                     focal: float = EYE_REST_FOCAL) -> np.ndarray:
        a = np.zeros(N_MOTORS)
        a[0] = pan
        a[1] = tilt
        a[2] = focal
        return a


class RandomGaze(OracleAgent):
    """Saccades to a uniformly random gaze direction, holding each target
    for 12-30 steps (long enough that chance fixations can register)."""

    name = "random-gaze"

    def begin(self, briefing: dict, seed: int) -> None:
        self.rng = stream(seed, "oracle/random-gaze")
        self._hold = 0
        self._pan = 0.0
        self._tilt = 0.0

    def act(self, obs, ctx: dict) -> np.ndarray:
        if self._hold <= 0:
            self._pan = float(self.rng.uniform(-45.0, 45.0))
            self._tilt = float(self.rng.uniform(-40.0, 40.0))
            self._hold = int(self.rng.integers(12, 31))
        self._hold -= 1
        return self._gaze_action(self._pan, self._tilt)


class IdealLooker(OracleAgent):
    """Knows the expectation-paradigm alternation: as soon as each
    inter-stimulus interval begins, saccades to the upcoming side."""

    name = "ideal-looker"

    def begin(self, briefing: dict, seed: int) -> None:
        self.b = briefing
        self.start = briefing["start_step"]
        self.onset = briefing["onset_steps"]
        self.isi = briefing["isi_steps"]
        self.sides = briefing["sides"]  # e.g. ["left", "right"]
        self.pan_tilt = briefing["pan_tilt"]

    def act(self, obs, ctx: dict) -> np.ndarray:
        local = obs.step - self.start
        period = self.isi + self.onset
        trial = max(0, local) // period
        side = self.sides[trial % len(self.sides)]
        pan, tilt = self.pan_tilt[side]
        return self._gaze_action(pan, tilt)


class HabituatingLooker(OracleAgent):
    """Looks at the display for a scheduled time per trial, then looks
    away. Habituation looking decays by `decay` per trial; novel test
    displays recover looking by `novel_boost`."""

    name = "habituating-looker"

    def __init__(self, initial_look_s: float = 10.0, decay: float = 0.9,
                 novel_boost: float = 3.0, cap_s: float = 20.0):
        self.initial_look_s = initial_look_s
        self.decay = decay
        self.novel_boost = novel_boost
        self.cap_s = cap_s

    def begin(self, briefing: dict, seed: int) -> None:
        self.away = (25.0, -30.0)  # parked gaze, well off any stimulus

    def planned_look_steps(self, trial: int, phase: str, stimulus: str,
                           hab_trials: Optional[int] = None) -> int:
        """Closed-form schedule; tests recompute criterion math from this."""
        if phase == "habituation":
            return int(round(100.0 * self.initial_look_s * self.decay ** trial))
        level = self.initial_look_s * self.decay ** (hab_trials or 0)
        if stimulus == "novel":
            level = min(self.cap_s, level * self.novel_boost)
        return int(round(100.0 * level))

    def act(self, obs, ctx: dict) -> np.ndarray:
        phase = ctx.get("phase")
        if phase == "intertrial":
            # pre-orient toward the upcoming display
            return self._gaze_action(*ctx["target_pan_tilt"])
        if phase in ("habituation", "test") and ctx.get("shown", False):
            planned = self.planned_look_steps(ctx["trial"], phase,
                                              ctx.get("stimulus", ""),
                                              ctx.get("hab_trials"))
            if ctx["trial_step"] < planned:
                return self._gaze_action(*ctx["target_pan_tilt"])
        return self._gaze_action(*self.away)


class FourMonthLooker(HabituatingLooker):
    """Habituating looker with the post-completion novelty profile: treats
    the broken rod as novel (same machinery, different label semantics)."""

    name = "four-month-looker"


class StimulusTracker(OracleAgent):
    """Preferential looking: fixates one named stimulus wherever it is."""

    name = "stimulus-tracker"

    def __init__(self, target: str = "A"):
        self.target = target

    def begin(self, briefing: dict, seed: int) -> None:
        pass

    def act(self, obs, ctx: dict) -> np.ndarray:
        pt = ctx.get(f"pan_tilt_{self.target}")
        if pt is None:
            return self._gaze_action(0.0, 0.0)
        return self._gaze_action(*pt)


class SideLockedLooker(OracleAgent):
    """Preferential looking: always fixates one side regardless of what
    is shown there."""

    name = "side-locked-looker"

    def __init__(self, side: str = "left"):
        self.side = side

    def begin(self, briefing: dict, seed: int) -> None:
        self.pan_tilt = briefing["pan_tilt"][self.side]

    def act(self, obs, ctx: dict) -> np.ndarray:
        return self._gaze_action(*self.pan_tilt)


class VoeScriptedLooker(OracleAgent):
    """Solidity test: looks at the reveal for `impossible_s` when the
    event is impossible and `possible_s` when possible."""

    name = "voe-looker"

    def __init__(self, impossible_s: float = 8.0, possible_s: float = 3.0):
        self.impossible_s = impossible_s
        self.possible_s = possible_s

    def begin(self, briefing: dict, seed: int) -> None:
        self.away = (25.0, -30.0)

    def act(self, obs, ctx: dict) -> np.ndarray:
        if ctx.get("phase") == "reveal":
            budget = self.impossible_s if ctx["event"] == "impossible" else self.possible_s
            if ctx["phase_step"] < int(round(100.0 * budget)):
                return self._gaze_action(*ctx["target_pan_tilt"])
        elif ctx.get("phase") == "approach":
            return self._gaze_action(*ctx["target_pan_tilt"])
        return self._gaze_action(*self.away)


class ReflexToucher(OracleAgent):
    """Sweeps an arm back and forth and squeezes the hand; used to drive
    touch-contingent caregiver responses."""

    name = "reflex-toucher"

    def begin(self, briefing: dict, seed: int) -> None:
        self._step = 0

    def act(self, obs, ctx: dict) -> np.ndarray:
        a = np.zeros(N_MOTORS)
        swing = math.sin(self._step / 50.0)
        a[9] = swing          # left shoulder pitch
        a[12] = 0.6           # left elbow
        a[23:32] = 0.8        # close left hand
        self._step += 1
        return a


ORACLES = {
    "random-gaze": RandomGaze,
    "ideal-looker": IdealLooker,
    "habituating-looker": HabituatingLooker,
    "four-month-looker": FourMonthLooker,
    "stimulus-tracker": StimulusTracker,
    "side-locked-looker": SideLockedLooker,
    "voe-looker": VoeScriptedLooker,
    "reflex-toucher": ReflexToucher,
}


def make_oracle(name: str) -> OracleAgent:
    cls = ORACLES.get(name)
    if cls is None:
        from .errors import ExperimentError

        raise ExperimentError(f"unknown oracle {name!r}; "
                              f"known: {sorted(ORACLES)}")
    return cls()
