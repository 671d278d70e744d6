"""Environment service over a real socket: handshake, lockstep, errors,
reset, recording and offline replay."""

import socket
import threading
from pathlib import Path

import numpy as np
import pytest

from cribsim.protocol import (ACT, BYE, CONFIG, ERROR, HELLO, OBS, RESET,
                              Connection, PROTOCOL_VERSION)
from cribsim.sceneconfig import SceneConfig, parse_scene_config
from cribsim.service import EnvironmentService, replay_log
from cribsim.stimuli import vexp_entities

CONFIG_TEXT = """\
[env]
seed 11
render false

[schedule]
month_s 2
birth_month 9
immobile_end_month 12
crawling_end_month 19
walking_end_month 27

[entity marker]
shape sphere 0.05
pos 0 0.4 0.8
color 1 0 0
tags stimulus
"""


@pytest.fixture
def service(tmp_path):
    cfg = parse_scene_config(CONFIG_TEXT)
    svc = EnvironmentService(cfg, config_text=CONFIG_TEXT, port=0)
    thread = threading.Thread(target=svc.serve_forever, daemon=True)
    thread.start()
    yield svc
    svc.stop()
    thread.join(timeout=5)


def connect(svc, version=PROTOCOL_VERSION):
    sock = socket.create_connection(svc.address, timeout=10)
    conn = Connection(sock)
    conn.send(HELLO, {"version": version, "role": "agent"})
    return conn


class TestHandshake:
    def test_hello_config_obs(self, service):
        conn = connect(service)
        hello = conn.recv()
        assert hello.msg_type == HELLO
        assert hello.body["version"] == PROTOCOL_VERSION
        cfg = conn.recv()
        assert cfg.msg_type == CONFIG
        manifests = cfg.body["manifests"]
        assert manifests["motor"]["motor_count"] == 53
        assert manifests["touch"]["touch_count"] == 2110
        assert manifests["observation"]["binary_size"] > 0
        obs0 = conn.recv()
        assert obs0.msg_type == OBS
        assert obs0.body["seq"] == 0 and obs0.body["step"] == 0
        conn.close()

    def test_version_mismatch_error(self, service):
        conn = connect(service, version="0.9")
        err = conn.recv()
        assert err.msg_type == ERROR
        assert err.body["code"] == "version_mismatch"
        # server closes afterwards
        with pytest.raises(ConnectionError):
            conn.recv()
            conn.recv()
        conn.close()


class TestLockstep:
    def test_act_obs_sequence(self, service):
        conn = connect(service)
        conn.recv()  # HELLO
        conn.recv()  # CONFIG
        obs = conn.recv()
        for i in range(1, 6):
            conn.send(ACT, {"values": [0.0] * 53})
            obs = conn.recv()
            assert obs.msg_type == OBS
            assert obs.body["seq"] == i
            assert obs.body["step"] == i
        conn.send(BYE, {})
        assert conn.recv().msg_type == BYE
        conn.close()

    def test_bad_action_length_closes(self, service):
        conn = connect(service)
        conn.recv(); conn.recv(); conn.recv()
        conn.send(ACT, {"values": [0.0] * 52})
        err = conn.recv()
        assert err.msg_type == ERROR
        assert "bad action length" in err.body["message"]
        with pytest.raises(ConnectionError):
            conn.recv()
        conn.close()

    def test_reset_returns_step0(self, service):
        conn = connect(service)
        conn.recv(); conn.recv(); conn.recv()
        conn.send(ACT, {"values": [0.0] * 53})
        conn.recv()
        conn.send(RESET, {"seed": 5, "overrides": {}})
        obs = conn.recv()
        assert obs.body["step"] == 0
        assert obs.body["episode"] == 1
        conn.close()

    def test_invalid_override_reports_key(self, service):
        conn = connect(service)
        conn.recv(); conn.recv(); conn.recv()
        conn.send(RESET, {"seed": 1, "overrides": {"gravityy": 2}})
        err = conn.recv()
        assert err.msg_type == ERROR
        assert err.body["code"] == "bad_override"
        assert "gravityy" in err.body["message"]
        # connection stays usable
        conn.send(ACT, {"values": [0.0] * 53})
        assert conn.recv().msg_type == OBS
        conn.close()

    def test_one_connection_at_a_time_then_next(self, service):
        c1 = connect(service)
        c1.recv(); c1.recv(); c1.recv()
        c1.send(BYE, {})
        c1.recv()
        c1.close()
        c2 = connect(service)
        assert c2.recv().msg_type == HELLO
        c2.close()


class TestRecordingReplay:
    def test_record_and_replay_roundtrip(self, tmp_path):
        log_path = tmp_path / "episode.log"
        cfg = parse_scene_config(CONFIG_TEXT)
        svc = EnvironmentService(cfg, config_text=CONFIG_TEXT, port=0,
                                 record_path=str(log_path))
        thread = threading.Thread(target=svc.serve_forever,
                                  kwargs={"max_sessions": 1}, daemon=True)
        thread.start()
        conn = connect(svc)
        conn.recv(); conn.recv(); conn.recv()
        rng = np.random.default_rng(3)
        for _ in range(40):
            conn.send(ACT, {"values": [float(v) for v in rng.uniform(-1, 1, 53)]})
            conn.recv()
        conn.send(RESET, {"seed": 11, "overrides": {}})
        conn.recv()
        for _ in range(10):
            conn.send(ACT, {"values": [0.0] * 53})
            conn.recv()
        conn.send(BYE, {})
        conn.recv()
        conn.close()
        thread.join(timeout=10)
        svc.stop()
        assert log_path.exists()
        ok, recorded, replayed = replay_log(log_path)
        assert ok, f"replay hash mismatch: {recorded} != {replayed}"
