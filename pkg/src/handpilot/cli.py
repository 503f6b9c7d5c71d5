"""Command-line entry points.

Exit codes are stable: 0 success, 1 usage error, 2 data/schema error,
3 acceptance-threshold failure (eval accuracy below --min-accuracy).
Every flag can also be supplied from a key=value config file via --config;
explicit flags win.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .errors import HandpilotError
from .hands import CLASS_ORDER, GestureClass

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_THRESHOLD = 3

DEFAULT_COUNTS = "200,200,200,400"
DEFAULT_SEED = 42
DEFAULT_NOISE = 0.08


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # exit 1, not argparse's default 2
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="handpilot", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    def opt(p, flag, default=None, **kwargs):
        if default is not None and "help" in kwargs:
            kwargs["help"] += f" (default: {default})"
        p.add_argument(flag, default=None, **kwargs)
        p.set_defaults(**{f"_default_{flag.lstrip('-').replace('-', '_')}": default})

    gen = sub.add_parser("gen-dataset", help="generate a labeled synthetic dataset")
    gen.add_argument("--config", help="key=value config file; flags win")
    opt(gen, "--counts", DEFAULT_COUNTS, help="Move,Angle,Grab,NoGesture counts")
    opt(gen, "--seed", DEFAULT_SEED, type=int, help="generator seed")
    opt(gen, "--noise", DEFAULT_NOISE, type=float, help="noise scale, radians")
    gen.add_argument("--out", help="output labeled JSONL file (required)")
    opt(gen, "--holdout", 0.0, type=float, help="held-out fraction written separately")
    gen.add_argument("--holdout-out", help="file for the held-out split")

    tr = sub.add_parser("train", help="train the gesture classifier")
    tr.add_argument("--config", help="key=value config file; flags win")
    tr.add_argument("--data", help="labeled JSONL dataset (required)")
    tr.add_argument("--out-model", help="output model file (required)")
    opt(tr, "--rounds", 100, type=int, help="boosting rounds")
    opt(tr, "--learning-rate", 0.1, type=float, help="shrinkage per round")
    opt(tr, "--max-depth", 3, type=int, help="tree depth limit")
    opt(tr, "--min-samples-leaf", 5, type=int, help="minimum samples per leaf")
    opt(tr, "--seed", 0, type=int, help="training seed")

    ev = sub.add_parser("eval", help="evaluate a model on a labeled dataset")
    ev.add_argument("--config", help="key=value config file; flags win")
    ev.add_argument("--data", help="labeled JSONL dataset (required)")
    ev.add_argument("--model", help="model file (required)")
    opt(ev, "--min-accuracy", 0.0, type=float, help="exit 3 below this accuracy")

    rp = sub.add_parser("replay", help="replay a landmark trace into commands")
    rp.add_argument("--config", help="key=value config file; flags win")
    rp.add_argument("--trace", help="landmark trace JSONL (required)")
    rp.add_argument("--model", help="model file (required)")
    rp.add_argument("--out-commands", help="output command JSONL (required)")

    sm = sub.add_parser("simulate", help="run commands or a trace through the robot cell")
    sm.add_argument("--config", help="key=value config file; flags win")
    sm.add_argument("--commands", help="command JSONL (from replay)")
    sm.add_argument("--trace", help="landmark trace JSONL (implies --model)")
    sm.add_argument("--model", help="model file, required with --trace")
    sm.add_argument("--scene", help="scene JSON file (default: bundled tabletop)")
    sm.add_argument("--out-log", help="output state-log JSONL (required)")
    opt(sm, "--log-every", 3, type=int, help="log every Nth simulator tick")

    sv = sub.add_parser("serve", help="serve the wire protocol")
    sv.add_argument("--config", help="key=value config file; flags win")
    sv.add_argument("--model", help="model file (required)")
    opt(sv, "--host", "127.0.0.1", help="listen address")
    opt(sv, "--port", 8700, type=int, help="HTTP/WebSocket port")
    sv.add_argument("--tcp-port", type=int, help="optional raw-socket port")
    opt(sv, "--policy", "ExclusiveToken", help="ExclusiveToken or LastWriter")
    opt(sv, "--state-rate", 30.0, type=float, help="robot_state broadcast Hz")
    opt(sv, "--tactile-rate", 30.0, type=float, help="tactile_frame broadcast Hz")
    sv.add_argument(
        "--tactile-full",
        action="store_true",
        help="broadcast tactile at the full 120 Hz sensor rate",
    )
    sv.add_argument("--scene", help="scene JSON file (default: bundled tabletop)")

    return parser


def _load_config_file(path: str) -> dict[str, str]:
    values = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise _UsageError(f"{path}:{lineno}: expected key=value")
        key, _, value = line.partition("=")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


def _resolve(args: argparse.Namespace, name: str, cast=None):
    """Flag value, else config-file value, else built-in default."""
    value = getattr(args, name, None)
    if value is None and getattr(args, "_config_values", None):
        raw = args._config_values.get(name)
        if raw is not None:
            value = cast(raw) if cast else raw
    if value is None:
        value = getattr(args, f"_default_{name}", None)
    return value


def _need(args: argparse.Namespace, name: str, cast=None):
    value = _resolve(args, name, cast)
    if value is None:
        raise _UsageError(f"--{name.replace('_', '-')} is required")
    return value


def _parse_counts(text: str) -> dict[GestureClass, int]:
    parts = text.split(",")
    if len(parts) != 4:
        raise _UsageError("--counts needs 4 comma-separated integers")
    try:
        numbers = [int(p) for p in parts]
    except ValueError:
        raise _UsageError("--counts entries must be integers") from None
    if any(n < 0 for n in numbers):
        raise _UsageError("--counts entries must be non-negative")
    return dict(zip(CLASS_ORDER, numbers))


def _read_labeled_file(path: str):
    from .hands import read_labeled

    try:
        with open(path) as fp:
            return list(read_labeled(fp))
    except OSError as exc:
        raise HandpilotError(f"cannot read {path}: {exc}") from None


def _load_model_file(path: str):
    from . import gbdt

    try:
        blob = Path(path).read_bytes()
    except OSError as exc:
        raise HandpilotError(f"cannot read {path}: {exc}") from None
    return gbdt.load_model(blob)


def _feature_pairs(samples):
    from .features import feature_vector

    return [(feature_vector(s.frame), s.label) for s in samples]


# --- subcommands ---------------------------------------------------------------


def cmd_gen_dataset(args) -> int:
    from .hands import write_labeled
    from .synth import generate_dataset, stratified_split

    counts = _parse_counts(_resolve(args, "counts"))
    seed = _resolve(args, "seed", int)
    noise = _resolve(args, "noise", float)
    holdout = _resolve(args, "holdout", float)
    out_path = _need(args, "out")
    holdout_out = _resolve(args, "holdout_out")
    samples = generate_dataset(counts, seed=seed, noise_scale=noise)
    heldout = []
    if holdout > 0:
        if not holdout_out:
            raise _UsageError("--holdout requires --holdout-out")
        samples, heldout = stratified_split(samples, holdout, seed)
    with open(out_path, "w") as fp:
        write_labeled(fp, samples)
    if holdout_out:
        with open(holdout_out, "w") as fp:
            write_labeled(fp, heldout)
    tally = {c.value: 0 for c in CLASS_ORDER}
    for s in samples:
        tally[s.label.value] += 1
    for cls in CLASS_ORDER:
        print(f"{cls.value}: {tally[cls.value]}")
    if heldout:
        print(f"held out: {len(heldout)}")
    return EXIT_OK


def cmd_train(args) -> int:
    from . import gbdt

    samples = _read_labeled_file(_need(args, "data"))
    config = gbdt.TrainConfig(
        rounds=_resolve(args, "rounds", int),
        learning_rate=_resolve(args, "learning_rate", float),
        max_depth=_resolve(args, "max_depth", int),
        min_samples_leaf=_resolve(args, "min_samples_leaf", int),
        seed=_resolve(args, "seed", int),
    )
    model = gbdt.train(_feature_pairs(samples), config)
    Path(_need(args, "out_model")).write_bytes(gbdt.save_model(model))
    print(f"trained {model.rounds} rounds on {len(samples)} samples")
    print(f"final train loss: {model.train_losses[-1]:.6f}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from . import gbdt

    samples = _read_labeled_file(_need(args, "data"))
    model = _load_model_file(_need(args, "model"))
    result = gbdt.evaluate(model, _feature_pairs(samples))
    print(f"accuracy: {result['accuracy']:.4f}")
    print("confusion (rows true, cols predicted; order Move,Angle,Grab,NoGesture):")
    for row in result["confusion"]:
        print("  " + " ".join(f"{int(v):5d}" for v in row))
    min_accuracy = _resolve(args, "min_accuracy", float)
    if result["accuracy"] < min_accuracy:
        print(f"accuracy below threshold {min_accuracy}", file=sys.stderr)
        return EXIT_THRESHOLD
    return EXIT_OK


def _read_trace_file(path: str):
    from .hands import read_trace

    try:
        with open(path) as fp:
            return list(read_trace(fp))
    except OSError as exc:
        raise HandpilotError(f"cannot read {path}: {exc}") from None


def command_record_line(ts: int, user: str, cmd_payload: dict) -> str:
    return json.dumps({"ts": ts, "user": user, "cmd": cmd_payload}, separators=(",", ":"))


def cmd_replay(args) -> int:
    from .pipeline import replay_trace
    from .protocol import command_payload

    frames = _read_trace_file(_need(args, "trace"))
    model = _load_model_file(_need(args, "model"))
    commands = replay_trace(frames, model)
    with open(_need(args, "out_commands"), "w") as fp:
        for accepted in commands:
            fp.write(
                command_record_line(
                    accepted.timestamp_ms,
                    accepted.user,
                    command_payload(accepted.command),
                )
                + "\n"
            )
    print(f"{len(commands)} commands from {len(frames)} frames")
    return EXIT_OK


def _read_commands_file(path: str) -> list[dict]:
    from .errors import MalformedRecord, SchemaViolation
    from .protocol import payload_to_command

    out = []
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise HandpilotError(f"cannot read {path}: {exc}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise MalformedRecord(f"{path}:{lineno}: {exc}") from None
        if not isinstance(obj, dict) or set(obj) != {"ts", "user", "cmd"}:
            raise SchemaViolation(f"{path}:{lineno}: expected ts/user/cmd keys")
        if not isinstance(obj["ts"], int) or not isinstance(obj["user"], str):
            raise SchemaViolation(f"{path}:{lineno}: bad ts or user")
        payload_to_command(obj["cmd"])  # validates
        out.append(obj)
    return out


def _load_scene(path: str | None):
    from .scenario import scene_from_json
    from .sim import default_scene

    if path is None:
        return default_scene()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise HandpilotError(f"cannot read {path}: {exc}") from None
    return scene_from_json(text)


def cmd_simulate(args) -> int:
    from .pipeline import replay_trace
    from .protocol import command_payload
    from .scenario import run_simulation

    commands_path = _resolve(args, "commands")
    trace_path = _resolve(args, "trace")
    if bool(commands_path) == bool(trace_path):
        raise _UsageError("exactly one of --commands or --trace is required")
    if trace_path:
        model_path = _resolve(args, "model")
        if not model_path:
            raise _UsageError("--trace requires --model")
        frames = _read_trace_file(trace_path)
        model = _load_model_file(model_path)
        commands = [
            {
                "ts": a.timestamp_ms,
                "user": a.user,
                "cmd": command_payload(a.command),
            }
            for a in replay_trace(frames, model)
        ]
    else:
        commands = _read_commands_file(commands_path)
    scene = _load_scene(_resolve(args, "scene"))
    log = run_simulation(commands, scene, log_every=_resolve(args, "log_every", int))
    with open(_need(args, "out_log"), "w") as fp:
        for record in log:
            fp.write(json.dumps(record, separators=(",", ":")) + "\n")
    summary = log[-1]
    print(f"simulated {summary['duration_ms']} ms, {len(commands)} commands")
    if summary.get("pipette_released_over_tube") is not None:
        print(f"pipette released over tube: {summary['pipette_released_over_tube']}")
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from . import arbitration as arb
    from .server import ServeConfig, build_app
    from .tactile import SENSOR_RATE_HZ

    model = _load_model_file(_need(args, "model"))
    policy_name = _resolve(args, "policy")
    try:
        policy = arb.Policy(policy_name)
    except ValueError:
        raise _UsageError(f"unknown policy {policy_name!r}") from None
    tactile_rate = _resolve(args, "tactile_rate", float)
    full = args.tactile_full or str(
        args._config_values.get("tactile_full", "")
    ).lower() in ("1", "true", "yes")
    if full:
        tactile_rate = float(SENSOR_RATE_HZ)
    config = ServeConfig(
        model=model,
        policy=policy,
        scene=_load_scene(_resolve(args, "scene")),
        state_rate_hz=_resolve(args, "state_rate", float),
        tactile_rate_hz=tactile_rate,
        tcp_port=_resolve(args, "tcp_port", int),
    )
    app = build_app(config)
    uvicorn.run(app, host=_resolve(args, "host"), port=_resolve(args, "port", int))
    return EXIT_OK


_COMMANDS = {
    "gen-dataset": cmd_gen_dataset,
    "train": cmd_train,
    "eval": cmd_eval,
    "replay": cmd_replay,
    "simulate": cmd_simulate,
    "serve": cmd_serve,
}


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help()
            return EXIT_USAGE
        if getattr(args, "config", None):
            args._config_values = _load_config_file(args.config)
        else:
            args._config_values = {}
        return _COMMANDS[args.command](args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HandpilotError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
