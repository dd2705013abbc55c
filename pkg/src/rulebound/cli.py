"""Command line: synthesize, corrupt, audit, train, evaluate.

Exit codes: 0 success, 1 usage error, 2 input validation error (rule files,
datasets, configs, hyperparameter values), 3 runtime failure. Given identical
arguments and inputs, every subcommand writes byte-identical outputs.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import jsonio
from .data import DatasetError, audit, inject_noise, load_dataset, save_dataset, synthesize
from .metrics import correction_report
from .model import TrainConfig, load_model, save_model
from .rules import RuleError, parse_rules
from .training import evaluate, train


class UsageError(Exception):
    pass


class ConfigError(ValueError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse would exit(2); the contract wants 1
        raise UsageError(f"{self.format_usage()}{self.prog}: error: {message}")


_TRAIN_KEYS = (
    "learning_rate",
    "epochs",
    "batch_size",
    "lambda",
    "warmup_epochs",
    "tau",
    "hidden_units",
    "seed",
    "correction_mode",
)
_CONFIG_KEYS = _TRAIN_KEYS + ("rules", "data", "out_model", "out_history", "out_report", "threshold")


def _read_text(path) -> str:
    with open(path, encoding="utf-8") as fh:
        return fh.read()


def _load_config(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigError(f"{path}: invalid JSON: {err.msg}") from None
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: config must be a JSON object")
    unknown = sorted(set(doc) - set(_CONFIG_KEYS))
    if unknown:
        raise ConfigError(f"{path}: unknown config keys: {', '.join(unknown)}")
    return doc


def build_parser() -> _Parser:
    parser = _Parser(prog="rulebound", description="Rule-constrained multi-label training.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")

    p = sub.add_parser("synth", help="generate a rule-consistent synthetic dataset")
    p.add_argument("--rules", required=True, help="rule file")
    p.add_argument("--out", required=True, help="output dataset (JSONL)")
    p.add_argument("--n", type=int, required=True, help="number of samples")
    p.add_argument("--dims", type=int, required=True, help="feature dimensions")
    p.add_argument("--patterns", type=int, required=True, help="distinct label patterns")
    p.add_argument("--seed", type=int, required=True)

    p = sub.add_parser("noise", help="flip label bits and record the flips")
    p.add_argument("--in", dest="in_path", required=True, help="input dataset")
    p.add_argument("--out", required=True, help="output dataset")
    p.add_argument("--rho", type=float, required=True, help="noise rate")
    p.add_argument("--mode", choices=("uniform", "violating"), required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--rules", help="rule file (required for violating mode)")

    p = sub.add_parser("audit", help="count hard rule violations in a dataset")
    p.add_argument("--rules", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--json", action="store_true", help="emit the full JSON report")

    p = sub.add_parser("train", help="train a classifier under the rule-aware schedule")
    p.add_argument("--rules")
    p.add_argument("--data")
    p.add_argument("--config", help="experiment config (JSON); flags override its values")
    p.add_argument("--lambda", dest="lambda_", type=float)
    p.add_argument("--epochs", type=int)
    p.add_argument("--warmup", type=int)
    p.add_argument("--tau", type=float)
    p.add_argument("--lr", type=float)
    p.add_argument("--batch", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--mode", choices=("off", "mask_only", "relabel"))
    p.add_argument("--out-model")
    p.add_argument("--out-history")
    p.add_argument("--out-report")

    p = sub.add_parser("eval", help="score a saved model against a dataset")
    p.add_argument("--rules", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--model", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--out-report", help="report path (default: print to stdout)")
    return parser


def cmd_synth(args) -> int:
    rs = parse_rules(_read_text(args.rules))
    ds = synthesize(args.seed, args.n, args.dims, rs, args.patterns)
    save_dataset(ds, args.out)
    return 0


def cmd_noise(args) -> int:
    if args.mode == "violating" and not args.rules:
        raise UsageError("--mode violating requires --rules")
    ds = load_dataset(args.in_path)
    rs = parse_rules(_read_text(args.rules), ds.names) if args.rules else None
    save_dataset(inject_noise(ds, args.rho, args.seed, args.mode, rs), args.out)
    return 0


def cmd_audit(args) -> int:
    ds = load_dataset(args.data)
    rs = parse_rules(_read_text(args.rules), ds.names)
    report = audit(ds, rs)
    print(jsonio.dumps(report.as_dict()) if args.json else report.to_text())
    return 0


def cmd_train(args) -> int:
    doc = _load_config(args.config) if args.config else {}

    def pick(flag_value, key, default=None):
        return flag_value if flag_value is not None else doc.get(key, default)

    rules_path = pick(args.rules, "rules")
    data_path = pick(args.data, "data")
    if not rules_path:
        raise UsageError("train needs a rule file (--rules or config key 'rules')")
    if not data_path:
        raise UsageError("train needs a dataset (--data or config key 'data')")
    ds = load_dataset(data_path)
    rs = parse_rules(_read_text(rules_path), ds.names)
    defaults = TrainConfig()
    cfg = TrainConfig(
        learning_rate=pick(args.lr, "learning_rate", defaults.learning_rate),
        epochs=pick(args.epochs, "epochs", defaults.epochs),
        batch_size=pick(args.batch, "batch_size", defaults.batch_size),
        lambda_=pick(args.lambda_, "lambda", defaults.lambda_),
        warmup_epochs=pick(args.warmup, "warmup_epochs", defaults.warmup_epochs),
        tau=pick(args.tau, "tau", defaults.tau),
        hidden_units=pick(args.hidden, "hidden_units", defaults.hidden_units),
        seed=pick(args.seed, "seed", defaults.seed),
        correction_mode=pick(args.mode, "correction_mode", defaults.correction_mode),
    )
    params, history, state = train(ds, rs, cfg)
    out_model = pick(args.out_model, "out_model")
    out_history = pick(args.out_history, "out_history")
    out_report = pick(args.out_report, "out_report")
    if out_model:
        save_model(params, out_model, cfg.seed, cfg)
    if out_history:
        history.write_jsonl(out_history)
    if out_report:
        threshold = float(doc.get("threshold", 0.5))
        report = evaluate(params, ds, rs, threshold)
        if ds.flips is not None:
            report.correction = correction_report(state, ds)
        jsonio.dump(report.as_dict(), out_report)
    return 0


def cmd_eval(args) -> int:
    params, _, _ = load_model(args.model)
    ds = load_dataset(args.data)
    rs = parse_rules(_read_text(args.rules), ds.names)
    report = evaluate(params, ds, rs, args.threshold)
    if args.out_report:
        jsonio.dump(report.as_dict(), args.out_report)
    else:
        print(jsonio.dumps(report.as_dict()))
    return 0


_COMMANDS = {
    "synth": cmd_synth,
    "noise": cmd_noise,
    "audit": cmd_audit,
    "train": cmd_train,
    "eval": cmd_eval,
}


def run(argv=None) -> int:
    """Parse argv and run one subcommand; returns the process exit code."""
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as err:
        print(err, file=sys.stderr)
        return 1
    except SystemExit as err:  # --help
        return int(err.code or 0)
    try:
        return _COMMANDS[args.command](args)
    except UsageError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except (RuleError, DatasetError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    except Exception as err:  # noqa: BLE001  runtime failures map to exit 3
        print(f"error: {err}", file=sys.stderr)
        return 3


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
