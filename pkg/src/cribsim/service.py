"""Environment service: serves one agent connection at a time over the
wire protocol, in strict lockstep (OBS out, ACT in, one tick per ACT).

Also provides episode recording (seed + config + action stream + stream
hash) and offline replay verification of recorded logs.
"""

from __future__ import annotations

import hashlib
import json
import socket
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import protocol
from .body import N_MOTORS
from .env import Environment
from .errors import ProtocolError
from .harness import load_preset, run_experiment, export_report
from .oracles import OracleAgent
from .protocol import (ACT, BYE, CONFIG, ERROR, EVAL_RESULT, EVAL_START,
                       HELLO, RESET, Connection, PROTOCOL_VERSION)
from .sceneconfig import SceneConfig


@dataclass
class Recorder:
    """Collects everything needed for an exact re-simulation: the config
    text, every file it references (lexicon, scenario scripts), the seed,
    and the action/reset event stream."""

    config_text: str
    seed: int
    files: dict = field(default_factory=dict)  # relative path -> content
    events: list = field(default_factory=list)  # dicts: act / reset
    _hash: "hashlib._Hash" = field(default_factory=hashlib.sha256)
    _written: bool = False

    def on_obs(self, payload_frame: bytes) -> None:
        self._hash.update(payload_frame)

    def on_act(self, values) -> None:
        self.events.append({"act": [float(v) for v in values]})

    def on_reset(self, seed, overrides) -> None:
        self.events.append({"reset": {"seed": seed, "overrides": overrides or {}}})

    def obs_hash(self) -> str:
        return self._hash.hexdigest()

    def write(self, path: str | Path) -> None:
        self._written = True
        with open(path, "w") as f:
            f.write(json.dumps({"format": "cribsim-replay", "version": 1,
                                "seed": self.seed,
                                "config": self.config_text,
                                "files": self.files},
                               sort_keys=True) + "\n")
            for ev in self.events:
                f.write(json.dumps(ev, sort_keys=True) + "\n")
            f.write(json.dumps({"obs_hash": self.obs_hash()}) + "\n")


def gather_config_files(config: SceneConfig) -> dict:
    """Contents of every file the config references, keyed by the relative
    path the config uses."""
    files = {}
    base = Path(config.base_dir)
    for rel in ([config.lexicon_path] if config.lexicon_path else []) \
            + list(config.script_paths):
        files[rel] = (base / rel).read_text()
    return files


def replay_log(path: str | Path) -> tuple[bool, str, str]:
    """Re-simulate a recorded log; returns (ok, recorded_hash, replayed_hash).

    The log is self-contained: the config and every file it references are
    materialized into a scratch directory before the environment rebuild.
    """
    import tempfile

    from .sceneconfig import parse_scene_config

    lines = Path(path).read_text().splitlines()
    header = json.loads(lines[0])
    if header.get("format") != "cribsim-replay":
        raise ValueError("not a replay log")
    trailer = json.loads(lines[-1])
    recorded = trailer["obs_hash"]
    cfg = parse_scene_config(header["config"], source=str(path))
    with tempfile.TemporaryDirectory(prefix="cribsim-replay-") as tmp:
        for rel, content in (header.get("files") or {}).items():
            target = Path(tmp) / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_text(content)
        cfg.base_dir = tmp
        env = Environment(cfg, seed=header["seed"])
        h = hashlib.sha256()
        seq = 0
        h.update(protocol.encode_obs(env.observe(), seq))
        for line in lines[1:-1]:
            ev = json.loads(line)
            if "act" in ev:
                obs = env.step(np.asarray(ev["act"], dtype=float))
            else:
                r = ev["reset"]
                obs = env.reset(seed=r["seed"], overrides=r["overrides"] or None)
            seq += 1
            h.update(protocol.encode_obs(obs, seq))
        replayed = h.hexdigest()
    return replayed == recorded, recorded, replayed


class WireAgent(OracleAgent):
    """Adapter presenting a connected wire agent as a harness agent."""

    name = "wire-agent"

    def __init__(self, conn: Connection, session: "Session"):
        self.conn = conn
        self.session = session

    def begin(self, briefing: dict, seed: int) -> None:
        self.conn.send(EVAL_START, {"briefing": briefing, "seed": seed})

    def act(self, obs, ctx: dict) -> np.ndarray:
        self.session.send_obs(obs)
        frame = self.conn.recv()
        if frame.msg_type == BYE:
            raise ConnectionError("agent left during experiment")
        if frame.msg_type != ACT:
            raise ProtocolError(f"expected ACT during experiment, got "
                                f"{frame.type_name}")
        return self.session.parse_act(frame)


class Session:
    """One agent connection's lockstep state."""

    def __init__(self, conn: Connection, env: Environment,
                 recorder: Optional[Recorder] = None,
                 throttle_hz: Optional[float] = None):
        self.conn = conn
        self.env = env
        self.recorder = recorder
        self.throttle_dt = (1.0 / throttle_hz) if throttle_hz else None
        self.seq = 0
        self._last_send = 0.0

    def send_obs(self, obs) -> None:
        if self.throttle_dt is not None:
            now = time.monotonic()
            wait = self._last_send + self.throttle_dt - now
            if wait > 0:
                time.sleep(wait)
            self._last_send = time.monotonic()
        frame_bytes = protocol.encode_obs(obs, self.seq)
        if self.recorder is not None:
            self.recorder.on_obs(frame_bytes)
        self.conn.send_raw(frame_bytes)
        self.seq += 1

    def parse_act(self, frame) -> np.ndarray:
        values = frame.body.get("values")
        if not isinstance(values, list) or len(values) != N_MOTORS:
            got = len(values) if isinstance(values, list) else "none"
            raise _FatalSessionError("bad_action_length",
                                     f"bad action length (expected {N_MOTORS}, "
                                     f"got {got})")
        return np.asarray(values, dtype=float)


class _FatalSessionError(Exception):
    def __init__(self, code: str, message: str):
        self.code = code
        self.message = message
        super().__init__(message)


class EnvironmentService:
    """Accepts one agent at a time; lockstep loop; optional recording."""

    def __init__(self, config: SceneConfig, config_text: str = "",
                 host: str = "127.0.0.1", port: int = 0,
                 throttle: bool = False, record_path: Optional[str] = None,
                 agent_timeout_s: Optional[float] = None):
        self.config = config
        self.config_text = config_text
        self.throttle_hz = 100.0 if throttle else None
        self.record_path = record_path
        self.agent_timeout_s = agent_timeout_s  # default: fully agent-paced
        self._listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        self._listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        self._listener.bind((host, port))
        self._listener.listen(1)
        self.address = self._listener.getsockname()
        self._stop = threading.Event()

    def stop(self) -> None:
        self._stop.set()
        try:
            # unblock accept()
            poke = socket.create_connection(self.address, timeout=0.5)
            poke.close()
        except OSError:
            pass

    def serve_forever(self, max_sessions: Optional[int] = None) -> None:
        served = 0
        while not self._stop.is_set():
            try:
                sock, _ = self._listener.accept()
            except OSError:
                break
            if self._stop.is_set():
                sock.close()
                break
            conn = Connection(sock)
            try:
                self.handle_session(conn)
            except (ConnectionError, ProtocolError):
                pass
            finally:
                conn.close()
            served += 1
            if max_sessions is not None and served >= max_sessions:
                break
        self._listener.close()

    def handle_session(self, conn: Connection) -> None:
        if self.agent_timeout_s is not None:
            conn.sock.settimeout(self.agent_timeout_s)
        hello = conn.recv()
        if hello.msg_type != HELLO:
            conn.send(ERROR, {"code": "bad_handshake",
                              "message": "expected HELLO"})
            return
        if hello.body.get("version") != PROTOCOL_VERSION:
            conn.send(ERROR, {"code": "version_mismatch",
                              "message": f"server speaks {PROTOCOL_VERSION}, "
                              f"client sent {hello.body.get('version')!r}"})
            return
        env = Environment(self.config)
        recorder = None
        if self.record_path:
            recorder = Recorder(self.config_text, env.seed,
                                files=gather_config_files(self.config))
        session = Session(conn, env, recorder, self.throttle_hz)
        conn.send(HELLO, {"version": PROTOCOL_VERSION, "role": "environment"})
        conn.send(CONFIG, {"manifests": env.manifests(),
                           "seed": env.seed,
                           "retina_size": env.config.retina_size})
        session.send_obs(env.observe())
        try:
            self._lockstep_loop(conn, session, env)
        except _FatalSessionError as e:
            conn.send(ERROR, {"code": e.code, "message": e.message})
        except ProtocolError as e:
            self._best_effort_error(conn, "malformed_frame", str(e))
        except TimeoutError:
            self._best_effort_error(conn, "agent_timeout",
                                    f"no message within {self.agent_timeout_s}s")
        finally:
            if recorder is not None and not recorder._written:
                recorder.write(self.record_path)

    @staticmethod
    def _best_effort_error(conn: Connection, code: str, message: str) -> None:
        try:
            conn.send(ERROR, {"code": code, "message": message})
        except OSError:
            pass

    def _lockstep_loop(self, conn: Connection, session: Session,
                       env: Environment) -> None:
        while True:
            frame = conn.recv()
            if frame.msg_type == BYE:
                # persist the recording before acknowledging, so a client
                # that tears the server down right after BYE has the log
                if session.recorder is not None:
                    session.recorder.write(self.record_path)
                conn.send(BYE, {})
                return
            if frame.msg_type == ACT:
                values = session.parse_act(frame)
                if session.recorder is not None:
                    session.recorder.on_act(values)
                session.send_obs(env.step(values))
            elif frame.msg_type == RESET:
                seed = frame.body.get("seed")
                overrides = frame.body.get("overrides") or {}
                try:
                    obs = env.reset(seed=seed, overrides=overrides or None)
                except ValueError as e:
                    conn.send(ERROR, {"code": "bad_override", "message": str(e)})
                    continue
                if session.recorder is not None:
                    session.recorder.on_reset(seed, overrides)
                session.send_obs(obs)
            elif frame.msg_type == EVAL_START:
                self._run_eval(conn, session, frame.body)
            else:
                raise _FatalSessionError(
                    "unexpected_message",
                    f"unexpected {frame.type_name} in lockstep loop")

    def _run_eval(self, conn: Connection, session: Session, body: dict) -> None:
        preset = body.get("preset", "")
        seed = int(body.get("seed", 0))
        try:
            spec = load_preset(preset)
        except Exception as e:
            conn.send(ERROR, {"code": "bad_preset", "message": str(e)})
            return
        agent = WireAgent(conn, session)
        try:
            metrics = run_experiment(spec, agent, seed)
        except ConnectionError:
            raise ConnectionError("agent disconnected during experiment")
        report = json.loads(export_report([(spec, metrics)]))
        conn.send(EVAL_RESULT, {"report": report})


def run_eval_over_wire(service: EnvironmentService, preset: str, seed: int):
    """Serve one connection and immediately drive the experiment against
    it (used by `cribsim evaluate --agent <host:port>`). Returns
    (spec, metrics)."""
    sock, _ = service._listener.accept()
    conn = Connection(sock)
    try:
        hello = conn.recv()
        if hello.msg_type != HELLO or hello.body.get("version") != PROTOCOL_VERSION:
            conn.send(ERROR, {"code": "version_mismatch",
                              "message": "bad handshake"})
            raise ProtocolError("handshake failed")
        env = Environment(service.config)
        session = Session(conn, env)
        conn.send(HELLO, {"version": PROTOCOL_VERSION, "role": "environment"})
        conn.send(CONFIG, {"manifests": env.manifests(), "seed": env.seed,
                           "retina_size": env.config.retina_size})
        spec = load_preset(preset)
        agent = WireAgent(conn, session)
        metrics = run_experiment(spec, agent, seed)
        report = json.loads(export_report([(spec, metrics)]))
        conn.send(EVAL_RESULT, {"report": report})
        return spec, metrics
    finally:
        conn.close()
        service._listener.close()
