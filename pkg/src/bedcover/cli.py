"""Command line: ``bedcover {collect,train,eval,replay}``.

Settings come from three layers, later ones winning: the defaults table in
``bedcover.defaults``, one JSON config file (``--config``), then flags.  Any
key can be set from the command line with ``--set section.key=VALUE``, where
VALUE is parsed as JSON when possible (so ``--set env.vary_body=true`` and
``--set eval.targets='["upper_body"]'`` work).

Exit status is 0 on success.  On failure a one-line JSON object
``{"error": <category>, "message": ...}`` goes to stderr and the status is
one of ``EXIT_CODES``.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np

from . import defaults as D

EXIT_CODES = {"config": 2, "io": 3, "runtime": 4, "replay_mismatch": 5}


class CliError(Exception):
    def __init__(self, category: str, message: str):
        super().__init__(message)
        self.category = category


# configuration

def _merge(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, value in override.items():
        where = f"{path}{key}"
        if key not in base:
            raise CliError("config", f"unknown config key '{where}'")
        if isinstance(base[key], dict) and base[key] and not isinstance(value, dict):
            raise CliError("config", f"'{where}' must be a mapping")
        if isinstance(base[key], dict) and base[key]:
            out[key] = _merge(base[key], value, where + ".")
        else:
            out[key] = copy.deepcopy(value)
    return out


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _dotted(assignments: list[str]) -> dict:
    out: dict = {}
    for item in assignments:
        if "=" not in item:
            raise CliError("config", f"--set expects KEY=VALUE, got '{item}'")
        key, value = item.split("=", 1)
        parts = key.strip().split(".")
        node = out
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = _parse_value(value)
    return out


def load_config(path: str | None, flag_overrides: dict) -> dict:
    cfg = D.defaults()
    if path:
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except OSError as e:
            raise CliError("io", f"cannot read config {path}: {e}") from e
        except json.JSONDecodeError as e:
            raise CliError("config", f"{path} is not valid JSON: {e}") from e
        if not isinstance(data, dict):
            raise CliError("config", "config file must hold a JSON object")
        version = data.get("schema_version", D.SCHEMA_VERSION)
        if version != D.SCHEMA_VERSION:
            raise CliError("config", f"unsupported schema_version {version}")
        cfg = _merge(cfg, data)
    return _merge(cfg, flag_overrides)


def env_config(cfg: dict):
    from .env import EnvConfig
    from .physics import ClothParams

    e = dict(cfg["env"])
    e["cloth"] = ClothParams(**e["cloth"])
    e["blanket_pose"] = tuple(e["blanket_pose"])
    try:
        return EnvConfig(**e)
    except (TypeError, ValueError) as err:
        raise CliError("config", f"env: {err}") from err


def train_config(cfg: dict):
    from .policy import TrainConfig

    t = cfg["train"]
    names = {f.name for f in fields(TrainConfig)}
    kw = {k: v for k, v in t.items() if k in names}
    try:
        return TrainConfig(**kw, seed=cfg["seed"], workers=cfg["workers"])
    except (TypeError, ValueError) as err:
        raise CliError("config", f"train: {err}") from err


# output helpers

def _write_text(path: str | Path, text: str) -> None:
    p = Path(path)
    try:
        if p.parent != Path(""):
            p.parent.mkdir(parents=True, exist_ok=True)
        with open(p, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    except OSError as e:
        raise CliError("io", f"cannot write {p}: {e}") from e


def _json_line(obj) -> str:
    return json.dumps(obj, sort_keys=True, default=_json_default)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not serialisable: {type(o)}")


def _say(args, msg: str) -> None:
    if not args.quiet:
        print(msg, file=sys.stderr)


# commands

def cmd_collect(cfg: dict, args) -> int:
    from .env import pose_task_factory
    from .optimizer import CollectConfig, collect_dataset, filter_dataset

    env_cfg = env_config(cfg)
    c = cfg["collect"]
    try:
        cc = CollectConfig(total_rollouts=int(c["total_rollouts"]),
                           per_pose_cap=int(c["per_pose_cap"]),
                           success_reward=float(c["success_reward"]), sigma0=float(c["sigma0"]),
                           popsize=c["popsize"], seed=int(cfg["seed"]),
                           workers=int(cfg["workers"]))
        ds, logs = collect_dataset(
            pose_task_factory(env_cfg), env_cfg.target, cc,
            progress=lambda used, best: _say(args, f"collect: {used} rollouts, best {best:.1f}"))
    except ValueError as e:
        raise CliError("config", str(e)) from e
    _write_text(c["output"], ds.to_csv())
    kept = filter_dataset(ds, float(c["threshold"]))
    _write_text(c["filtered_output"], kept.to_csv())
    _say(args, f"collect: {len(ds)} rows -> {c['output']}, {len(kept)} kept (> {c['threshold']})"
               f" -> {c['filtered_output']}, {len(logs)} poses")
    return 0


def cmd_train(cfg: dict, args) -> int:
    from .optimizer import Dataset
    from .policy import ppo_train, train_supervised

    t = cfg["train"]
    tc = train_config(cfg)
    if t["mode"] == "supervised":
        try:
            ds = Dataset.read(t["dataset"])
        except OSError as e:
            raise CliError("io", f"cannot read dataset {t['dataset']}: {e}") from e
        except ValueError as e:
            raise CliError("io", str(e)) from e
        if len(ds) == 0:
            raise CliError("runtime", f"dataset {t['dataset']} has no rows")
        res = train_supervised(ds.obs, ds.act, tc)
        model, history = res.model, ["epoch,mse"] + [
            f"{i + 1},{v!r}" for i, v in enumerate(res.history)]
    elif t["mode"] == "ppo":
        from .env import EnvEpisode

        res = ppo_train(EnvEpisode(env_config(cfg)), tc,
                        progress=lambda d, r: _say(args, f"ppo: {d} rollouts, batch mean {r:.1f}"))
        model, history = res.model, ["batch,mean_reward"] + [
            f"{i + 1},{v!r}" for i, v in enumerate(res.batch_rewards)]
    else:
        raise CliError("config", f"train.mode must be 'supervised' or 'ppo', got {t['mode']!r}")
    _write_text(t["output"], json.dumps(model.to_record()) + "\n")
    if t["history"]:
        _write_text(t["history"], "\n".join(history) + "\n")
    _say(args, f"train: wrote {t['output']}")
    return 0


def _load_model(path: str):
    from .policy import PolicyModel

    try:
        return PolicyModel.load(path)
    except OSError as e:
        raise CliError("io", f"cannot read model {path}: {e}") from e
    except (ValueError, KeyError, json.JSONDecodeError) as e:
        raise CliError("io", f"bad model file {path}: {e}") from e


def cmd_eval(cfg: dict, args) -> int:
    from .eval import compare_conditions, results_csv, results_markdown, trials_csv

    e = cfg["eval"]
    base = env_config(cfg)
    targets = list(e["targets"]) or (list(e["models"]) if e["models"] else [base.target])
    policies = {}
    for t in targets:
        path = e["models"].get(t, e["model"]) if e["models"] else e["model"]
        policies[t] = _load_model(path)
    try:
        rows = compare_conditions(policies, targets, list(e["conditions"]), int(e["trials"]),
                                  int(cfg["seed"]), base, int(cfg["workers"]))
    except ValueError as err:
        raise CliError("config", str(err)) from err
    _write_text(e["output_csv"], results_csv(rows))
    _write_text(e["output_md"], results_markdown(rows))
    if e["trials_csv"]:
        parts = []
        for r in rows:
            body = trials_csv(r.metrics).splitlines()
            if not parts:
                parts.append("target,condition," + body[0])
            parts += [f"{r.target},{r.condition},{line}" for line in body[1:]]
        _write_text(e["trials_csv"], "\n".join(parts) + "\n")
    if e["episode_log"]:
        lines = []
        for r in rows:
            for t in r.metrics.trials:
                lines.append(_json_line({"condition": r.condition, **(t.log or {})}))
        _write_text(e["episode_log"], "\n".join(lines) + "\n")
    for r in rows:
        m = r.metrics
        _say(args, f"eval: {r.target}/{r.condition}: F1 {m.f1:.3f}, "
                   f"reward {m.mean_reward:.1f} ± {m.std_reward:.1f}")
    return 0


def cmd_replay(cfg: dict, args) -> int:
    from .env import EnvConfig, execute, reset
    from .physics import ClothParams, frame_record

    r = cfg["replay"]
    try:
        lines = Path(r["log"]).read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise CliError("io", f"cannot read episode log {r['log']}: {e}") from e
    lines = [ln for ln in lines if ln.strip()]
    idx = int(r["episode"])
    if not 0 <= idx < len(lines):
        raise CliError("config", f"episode {idx} not in log ({len(lines)} episodes)")
    rec = json.loads(lines[idx])
    ec = dict(rec["config"])
    ec["cloth"] = ClothParams(**ec["cloth"])
    env_cfg = EnvConfig(**ec)
    stride = max(1, int(r["stride"]))
    out = Path(r["output_dir"])
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise CliError("io", f"cannot create {out}: {e}") from e

    state, _ = reset(env_cfg, int(rec["seed"]))
    frames = [frame_record(state.cloth, 0)]
    counter = {"step": 0}

    def record(cloth):
        counter["step"] += 1
        if counter["step"] % stride == 0:
            frames.append(frame_record(cloth, len(frames)))

    action = rec["raw_action"] if rec.get("raw_action") is not None else rec["action"]
    res = execute(state, action, on_step=record)
    if counter["step"] % stride:
        frames.append(frame_record(res.state.cloth, len(frames)))
    for i, fr in enumerate(frames):
        fr["index"] = i
        _write_text(out / f"frame_{i:05d}.json", json.dumps(fr) + "\n")
    summary = {"seed": rec["seed"], "frames": len(frames), "steps": counter["step"],
               "logged_reward": rec["total"], "reward": res.reward.total,
               "match": res.reward.total == rec["total"],
               "human": state.human.to_record(),
               "body_points": state.cloud.points.tolist(),
               "body_labels": [str(v) for v in state.cloud.labels]}
    _write_text(out / "episode.json", _json_line(summary) + "\n")
    _say(args, f"replay: {len(frames)} frames -> {out}, reward {res.reward.total:.4f}"
               f" (logged {rec['total']:.4f})")
    if not summary["match"]:
        raise CliError("replay_mismatch",
                       f"replayed reward {res.reward.total!r} != logged {rec['total']!r}")
    return 0


COMMANDS = {"collect": cmd_collect, "train": cmd_train, "eval": cmd_eval, "replay": cmd_replay}

# convenience flags -> dotted config keys
FLAG_KEYS = {
    "collect": {"target": "env.target", "budget": "collect.total_rollouts",
                "threshold": "collect.threshold", "output": "collect.output",
                "filtered_output": "collect.filtered_output"},
    "train": {"mode": "train.mode", "dataset": "train.dataset", "output": "train.output",
              "target": "env.target", "rollouts": "train.rollouts", "epochs": "train.epochs",
              "lr": "train.lr"},
    "eval": {"model": "eval.model", "target": "env.target", "trials": "eval.trials",
             "output_csv": "eval.output_csv", "output_md": "eval.output_md"},
    "replay": {"log": "replay.log", "episode": "replay.episode",
               "output_dir": "replay.output_dir", "stride": "replay.stride"},
}
FLAG_TYPES = {"budget": int, "threshold": float, "rollouts": int, "epochs": int, "lr": float,
              "trials": int, "episode": int, "stride": int}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bedcover", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON config file")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--workers", type=int, help="concurrent episodes")
        p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                       help="override any config key (repeatable)")
        p.add_argument("--print-config", action="store_true",
                       help="print the resolved config and exit")
        p.add_argument("--quiet", action="store_true")
        for flag in FLAG_KEYS[name]:
            p.add_argument("--" + flag.replace("_", "-"), dest=flag,
                           type=FLAG_TYPES.get(flag, str))
    return parser


def _flag_overrides(args) -> dict:
    assignments = []
    for flag, key in FLAG_KEYS[args.command].items():
        value = getattr(args, flag)
        if value is not None:
            assignments.append((key, value))
    over = _dotted(args.set)
    for key, value in assignments:
        node = over
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
        node[parts[-1]] = value
    if args.seed is not None:
        over["seed"] = args.seed
    if args.workers is not None:
        over["workers"] = args.workers
    return over


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return EXIT_CODES["config"] if e.code else 0
    try:
        cfg = load_config(args.config, _flag_overrides(args))
        if int(cfg["workers"]) < 1:
            raise CliError("config", "workers must be >= 1")
        if args.print_config:
            print(json.dumps(cfg, indent=2, sort_keys=True))
            return 0
        return COMMANDS[args.command](cfg, args)
    except CliError as e:
        print(json.dumps({"error": e.category, "message": str(e)}), file=sys.stderr)
        return EXIT_CODES[e.category]
    except Exception as e:  # simulation failures and the like
        print(json.dumps({"error": "runtime", "message": f"{type(e).__name__}: {e}"}),
              file=sys.stderr)
        return EXIT_CODES["runtime"]


if __name__ == "__main__":
    sys.exit(main())
