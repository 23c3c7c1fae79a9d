"""Command-line interface: ``train``, ``eval`` and ``compare``.

Exit codes: 0 success, 2 configuration or usage error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .agents import POLICIES, TrainConfig, make_policy, train
from .agents.training import BOOTSTRAPS, REWARDS
from .env import EnvConfig, QueueingEnv
from .errors import ConfigError, DivergenceError
from .harness import compare_results, load_scenario, run_campaign, write_result
from .harness.campaign import check_checkpoint
from .nn import load_params, save_params

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3
CHECKPOINT = "checkpoint.sqps"
CHECKPOINT_META = "checkpoint.json"


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--scenario", default="sdwan-desk",
                   help="built-in name (sdwan-desk, sdwan-desk-tcp, sdwan-paper, sdwan-paper-tcp, abilene) "
                        "or a scenario JSON file (default: %(default)s)")
    p.add_argument("--policy", default="dgn", choices=POLICIES, help="policy (default: %(default)s)")
    p.add_argument("--seed", type=int, default=0, help="run seed (default: %(default)s)")
    p.add_argument("--snapshot", type=float, default=None,
                   help="snapshot duration in seconds (default: the scenario's, 10 s for sdwan-paper)")
    p.add_argument("--conv-layers", type=int, default=2, choices=(1, 2),
                   help="DGN convolutional layers (default: %(default)s, parameters for DGN agents)")
    p.add_argument("--out", default="runs/out", help="output directory (default: %(default)s)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="smartqueue", description="Train, evaluate and compare adaptive WFQ agents on simulated networks.",
                 formatter_class=argparse.ArgumentDefaultsHelpFormatter)
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    t = sub.add_parser("train", help="train a learning policy and write a checkpoint")
    _common(t)
    t.add_argument("--steps", type=int, default=3000, help="environment steps (snapshots) to train for (default: %(default)s)")
    t.add_argument("--episode-len", type=int, default=60, help="snapshots per episode before weights are re-drawn (default: %(default)s)")
    t.add_argument("--warmup", type=int, default=200, help="steps collected before training starts (default: %(default)s)")
    t.add_argument("--lr", type=float, default=None, help="learning rate (default: 1e-3, Adam)")
    t.add_argument("--epsilon", type=float, default=None,
                   help="DGN exploration rate, constant (default: 0.1); MADQN decays 1 -> 0.001 by x0.99955 per episode")
    t.add_argument("--buffer-size", type=int, default=20000, help="replay capacity (default: %(default)s)")
    t.add_argument("--reward", choices=REWARDS, default=None,
                   help="learning reward: 'regret' is the SLA reward minus the best attainable, 'raw' the SLA reward "
                        "itself (default: regret; raw with --strict)")
    t.add_argument("--bootstrap", choices=BOOTSTRAPS, default=None,
                   help="'always' bootstraps every target, 'cutoff' stops at done (best reward reached) "
                        "(default: always; cutoff with --strict)")
    t.add_argument("--strict", action="store_true",
                   help="train only on the literal filter: DGN on all-positive rewards, MADQN on terminal "
                        "experiences; needs raw rewards and the done cutoff")

    e = sub.add_parser("eval", help="evaluate a policy and write metrics.csv, CDFs and summary.json")
    _common(e)
    e.add_argument("--checkpoint", default=None, help="checkpoint directory or .sqps file from train (not needed for pq)")
    e.add_argument("--snapshots", type=int, default=None, help="evaluation snapshots (default: the scenario's, 60 at desk scale)")
    e.add_argument("--trace", action="store_true", help="also write the per-step JSON-lines trace")

    c = sub.add_parser("compare", help="merge eval results into side-by-side tables and CDFs")
    c.add_argument("results", nargs="+", help="eval output directories, in column order")
    c.add_argument("--out", default="runs/compare", help="output directory (default: %(default)s)")
    return ap


def _scenario(args):
    sc = load_scenario(args.scenario)
    if args.snapshot is not None:
        if args.snapshot <= 0:
            raise ConfigError("--snapshot must be positive")
        sc = sc.with_overrides(snapshot=args.snapshot)
    return sc


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out}: {exc}") from None
    return out


def cmd_train(args) -> int:
    if args.policy == "pq":
        raise ConfigError("PQ has no trainable parameters")
    if args.steps < 1 or args.episode_len < 1 or args.warmup < 0:
        raise ConfigError("--steps and --episode-len must be >= 1 and --warmup >= 0")
    sc = _scenario(args)
    out = _out_dir(args.out)
    policy = make_policy(args.policy, sc.n_agents, seed=args.seed, conv_layers=args.conv_layers, strict=args.strict,
                         lr=args.lr, buffer_size=args.buffer_size, epsilon=args.epsilon)
    env = QueueingEnv(sc, EnvConfig(snapshot=sc.snapshot, seed=args.seed))
    reward = args.reward or ("raw" if args.strict else "regret")
    bootstrap = args.bootstrap or ("cutoff" if args.strict else "always")
    cfg = TrainConfig(steps=args.steps, episode_len=args.episode_len, warmup=args.warmup, seed=args.seed,
                      reward=reward, bootstrap=bootstrap)
    with open(out / "train_log.jsonl", "w") as log:
        res = train(env, policy, cfg, log)
    save_params(policy.state(), out / CHECKPOINT)
    meta = {"policy": args.policy, "scenario": sc.name, "n_agents": sc.n_agents, "conv_layers": args.conv_layers,
            "seed": args.seed, "steps": args.steps, "strict": args.strict, "reward": reward, "bootstrap": bootstrap,
            "lr": policy.cfg.lr}
    (out / CHECKPOINT_META).write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    (out / "loss_curve.json").write_text(json.dumps([l for l in res.losses]) + "\n")
    curve = res.loss_curve()
    last = f"{curve[-1]:.4g}" if len(curve) else "n/a"
    print(f"trained {args.policy} for {args.steps} steps on {sc.name}; final loss {last}; checkpoint {out / CHECKPOINT}")
    return EXIT_OK


def _load_checkpoint(args, policy, sc) -> list:
    if args.checkpoint is None:
        raise ConfigError(f"--checkpoint is required for {args.policy}")
    path = Path(args.checkpoint)
    if path.is_dir():
        path = path / CHECKPOINT
    if not path.is_file():
        raise ConfigError(f"checkpoint {path} not found")
    meta_path = path.with_name(CHECKPOINT_META)
    losses = []
    if meta_path.is_file():
        meta = json.loads(meta_path.read_text())
        if meta.get("policy") != args.policy:
            raise ConfigError(f"checkpoint was trained for {meta.get('policy')}, not {args.policy}")
    curve_path = path.with_name("loss_curve.json")
    if curve_path.is_file():
        losses = [l for l in json.loads(curve_path.read_text()) if l is not None]
    try:
        params = load_params(path)
    except ValueError as exc:
        raise ConfigError(f"cannot read checkpoint {path}: {exc}") from None
    check_checkpoint(policy, params)
    policy.load_state(params)
    return losses


def cmd_eval(args) -> int:
    sc = _scenario(args)
    out = _out_dir(args.out)
    policy = make_policy(args.policy, sc.n_agents, seed=args.seed, conv_layers=args.conv_layers)
    losses = _load_checkpoint(args, policy, sc) if policy.trainable else []
    snapshots = sc.snapshots if args.snapshots is None else args.snapshots
    if snapshots < 0:
        raise ConfigError("--snapshots must be >= 0")
    trace = open(out / "trace.jsonl", "w") if args.trace else None
    try:
        res = run_campaign(sc, policy, snapshots, seed=args.seed, trace=trace)
    finally:
        if trace is not None:
            trace.close()
    res.loss_curve = losses
    env = QueueingEnv(sc, EnvConfig(snapshot=sc.snapshot))
    summary = write_result(res, out, sc.agent_links, env.served)
    print(format_sla(summary))
    return EXIT_OK


def format_sla(summary: dict) -> str:
    sla = summary["sla"]
    lines = [f"{summary['policy']} on {summary['scenario']} ({summary['snapshots']} snapshots, seed {summary['seed']})",
             f"{'group':<8}{'throughput':>12}{'delay':>10}{'congested':>11}"]
    for lab in ("gold", "silver", "bronze"):
        tp, d = sla["throughput"][lab], sla["delay"][lab]
        lines.append(f"{lab:<8}{'-' if tp is None else f'{tp:.3f}':>12}{'-' if d is None else f'{d:.3f}':>10}"
                     f"{sla['congested'][lab]:>11}")
    lines.append(f"beta {summary['beta']:.4f}  feature bandwidth {summary['feature_bandwidth_kbps']:.4f} kbit/s")
    return "\n".join(lines)


def cmd_compare(args) -> int:
    merged = compare_results(args.results, _out_dir(args.out))
    names = merged["policies"]
    print(f"{'sla':<11}{'group':<8}" + "".join(f"{n:>15}" for n in names))
    for row in merged["sla"]:
        vals = "".join(f"{'-' if v is None else f'{v:.3f}':>15}" for v in row[2:])
        print(f"{row[0]:<11}{row[1]:<8}{vals}")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handler = {"train": cmd_train, "eval": cmd_eval, "compare": cmd_compare}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"smartqueue: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DivergenceError as exc:
        print(f"smartqueue: numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
