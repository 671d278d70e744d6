"""Scene config parsing, validation errors with positions, overrides."""

import pytest

from cribsim.curriculum import Stage
from cribsim.errors import ParseError
from cribsim.sceneconfig import (apply_overrides, parse_scene_config)

GOOD = """\
[env]
seed 7
gravity 0 -9.81 0
gestation_offset_s 100

[schedule]
month_s 10
birth_month 9
immobile_end_month 12
crawling_end_month 19
walking_end_month 27

[entity floor]
shape plane 0 1 0 0
tags floor

[entity ball]
shape sphere 0.1
pos 0 1 0
dynamic true
mass 0.2

[scenario-schedule]
at 100 greet

[contingent]
rule r1 touched toy 50 greet refractory 500
"""


class TestParse:
    def test_good_config(self):
        cfg = parse_scene_config(GOOD)
        assert cfg.seed == 7
        assert len(cfg.entities) == 2
        ball = cfg.entities[1]
        assert ball.dynamic and ball.mass == 0.2
        assert cfg.schedule.birth_age == 90.0
        assert cfg.scenario_schedule[0].at_step == 100
        assert cfg.rules[0].refractory == 500

    def test_unknown_key_position(self):
        bad = "[env]\nseed 1\nbogus 2\n"
        with pytest.raises(ParseError) as ei:
            parse_scene_config(bad, source="x.cfg")
        assert ei.value.line == 3
        assert "x.cfg:3" in str(ei.value)

    def test_missing_shape_rejected(self):
        bad = "[entity thing]\npos 0 0 0\n"
        with pytest.raises(ParseError, match="missing 'shape'"):
            parse_scene_config(bad)

    def test_bad_shape_dimension(self):
        bad = "[entity thing]\nshape sphere -1\n"
        with pytest.raises(ParseError, match="positive"):
            parse_scene_config(bad)

    def test_unknown_section(self):
        with pytest.raises(ParseError, match="unknown section"):
            parse_scene_config("[wat]\n")

    def test_key_outside_section(self):
        with pytest.raises(ParseError, match="outside any section"):
            parse_scene_config("seed 3\n")

    def test_bad_stage_name_in_schedule(self):
        bad = "[scenario-schedule]\nstage Flying hello\n"
        with pytest.raises(ParseError, match="Fetus"):
            parse_scene_config(bad)

    def test_nonincreasing_boundaries(self):
        bad = ("[schedule]\nmonth_s 10\nbirth_month 9\n"
               "immobile_end_month 8\n")
        with pytest.raises(ParseError, match="increasing"):
            parse_scene_config(bad)


class TestOverrides:
    def test_seed_and_schedule(self):
        cfg = parse_scene_config(GOOD)
        out = apply_overrides(cfg, {"seed": 99, "schedule.month_s": 20.0})
        assert out.seed == 99
        assert out.schedule.month_s == 20.0
        assert cfg.seed == 7  # original untouched

    def test_stage_jump(self):
        cfg = parse_scene_config(GOOD)
        out = apply_overrides(cfg, {"stage": "Crawling"})
        assert out.gestation_offset_s == cfg.schedule.immobile_end

    def test_unknown_key_named(self):
        cfg = parse_scene_config(GOOD)
        with pytest.raises(ValueError, match="gravityy"):
            apply_overrides(cfg, {"gravityy": 1})
