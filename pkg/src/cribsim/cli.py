"""Operator CLI.

Subcommands: serve, evaluate, validate, dump-manifest, replay, bench.
Exit codes: 0 ok, 1 runtime failure, 2 usage/validation error.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import kernels
from .errors import CribsimError, ParseError
from .sceneconfig import load_scene_config

DEFAULT_CONFIG = Path(__file__).parent / "presets" / "nursery.cfg"


def _cmd_serve(args) -> int:
    from .service import EnvironmentService

    cfg_path = Path(args.config)
    cfg = load_scene_config(cfg_path)
    service = EnvironmentService(cfg, config_text=cfg_path.read_text(),
                                 host=args.host, port=args.port,
                                 throttle=args.throttle,
                                 record_path=args.record,
                                 agent_timeout_s=args.timeout)
    host, port = service.address
    print(f"serving on {host}:{port} (kernel backend: {kernels.BACKEND})",
          flush=True)
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def _cmd_evaluate(args) -> int:
    from .harness import export_report, load_preset, run_experiment
    from .oracles import make_oracle

    spec = load_preset(args.preset)
    if ":" in args.agent:
        from .service import EnvironmentService, run_eval_over_wire

        host, port_s = args.agent.rsplit(":", 1)
        cfg = load_scene_config(args.config)
        service = EnvironmentService(cfg, host=host, port=int(port_s))
        h, p = service.address
        print(f"waiting for agent on {h}:{p} ...")
        spec, metrics = run_eval_over_wire(service, args.preset, args.seed)
    else:
        agent = make_oracle(args.agent)
        metrics = run_experiment(spec, agent, args.seed)
    text = export_report([(spec, metrics)], path=args.report)
    if args.report:
        print(f"report written to {args.report}")
    else:
        print(text, end="")
    return 0


def _cmd_validate(args) -> int:
    path = Path(args.path)
    if not path.exists():
        print(f"error: no such file {path}", file=sys.stderr)
        return 2
    text = path.read_text()
    try:
        if path.suffix == ".scn":
            from .scenario import Lexicon, parse_script

            lex_path = args.lexicon or str(Path(__file__).parent / "presets" / "core.lex")
            lexicon = Lexicon.parse(Path(lex_path).read_text(), source=lex_path)
            parse_script(text, lexicon, source=str(path))
        elif path.suffix == ".exp":
            from .harness import parse_experiment_spec

            parse_experiment_spec(text, source=str(path))
        elif path.suffix == ".lex":
            from .scenario import Lexicon

            Lexicon.parse(text, source=str(path))
        else:
            cfg = load_scene_config(path)
            # also check the scripts the config references
            from .env import _load_lexicon, _load_scripts

            _load_scripts(cfg, _load_lexicon(cfg))
    except ParseError as e:
        print(f"invalid: {e}", file=sys.stderr)
        return 2
    print(f"ok: {path}")
    return 0


def _cmd_dump_manifest(args) -> int:
    from .env import Environment

    env = Environment(load_scene_config(args.config))
    print(json.dumps(env.manifests(), indent=2, sort_keys=True))
    return 0


def _cmd_replay(args) -> int:
    from .service import replay_log

    ok, recorded, replayed = replay_log(args.log)
    if ok:
        print(f"replay ok: observation hash {recorded}")
        return 0
    print(f"replay MISMATCH: recorded {recorded} != replayed {replayed}",
          file=sys.stderr)
    return 1


def _cmd_bench(args) -> int:
    from .bench import run_benchmarks

    run_benchmarks(steps=args.steps)
    return 0


def _cmd_snapshot(args) -> int:
    import numpy as np

    from .env import Environment
    from .vision import dump_frame, render_frame

    env = Environment(load_scene_config(args.config))
    for _ in range(args.steps):
        env.step(np.zeros(53))
    frame = render_frame(env.scene, env.eye_state(), env.body.head_pos(),
                         env.body.head_quat(), with_debug=True,
                         retina_size=env.config.retina_size)
    written = dump_frame(frame, args.out, prefix=f"step{env.scene.clock.step}")
    for p in written:
        print(p)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="cribsim",
        description="deterministic infant-development simulator")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("serve", help="run the environment service")
    s.add_argument("--config", default=str(DEFAULT_CONFIG))
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=5910)
    s.add_argument("--throttle", action="store_true",
                   help="pace to 100 steps/s wall clock")
    s.add_argument("--record", default=None, help="write a replay log here")
    s.add_argument("--timeout", type=float, default=None,
                   help="drop agents silent for this many seconds "
                        "(default: fully agent-paced)")
    s.set_defaults(fn=_cmd_serve)

    e = sub.add_parser("evaluate", help="run an experiment preset")
    e.add_argument("--preset", required=True)
    e.add_argument("--agent", required=True,
                   help="oracle name, or host:port to await a wire agent")
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--report", default=None)
    e.add_argument("--config", default=str(DEFAULT_CONFIG))
    e.set_defaults(fn=_cmd_evaluate)

    v = sub.add_parser("validate", help="parse-check a config/script/preset")
    v.add_argument("path")
    v.add_argument("--lexicon", default=None)
    v.set_defaults(fn=_cmd_validate)

    d = sub.add_parser("dump-manifest", help="print motor/touch/observation layouts")
    d.add_argument("--config", default=str(DEFAULT_CONFIG))
    d.set_defaults(fn=_cmd_dump_manifest)

    r = sub.add_parser("replay", help="verify a recorded episode log")
    r.add_argument("log")
    r.set_defaults(fn=_cmd_replay)

    b = sub.add_parser("bench", help="compare kernel backends")
    b.add_argument("--steps", type=int, default=500)
    b.set_defaults(fn=_cmd_bench)

    n = sub.add_parser("snapshot",
                       help="render and dump retinas + debug view as PPM")
    n.add_argument("--config", default=str(DEFAULT_CONFIG))
    n.add_argument("--out", default="snapshots")
    n.add_argument("--steps", type=int, default=0,
                   help="steps to advance before rendering")
    n.set_defaults(fn=_cmd_snapshot)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except CribsimError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
