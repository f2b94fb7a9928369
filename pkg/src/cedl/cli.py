"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 configuration error, 3 data error.
"""

import argparse
import json
import sys
from pathlib import Path

from . import calibration, datagen, harness, net as netmod
from .attacks import AttackKind
from .errors import ConfigError, InvalidInputError, ParseError

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_DATA = 0, 1, 2, 3

DATA_FILES = {name: f"{name}.cedl" for name in harness.COHORTS}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad usage; 2 is reserved for config errors here.
    def error(self, message):
        raise UsageError(f"{self.prog}: error: {message}")


def _common():
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("experiment")
    g.add_argument("--seed", type=int)
    g.add_argument("--config", type=Path, help="JSON file of experiment settings")
    g.add_argument("--out", type=Path, default=Path("."), help="output directory")
    g.add_argument("--metric", choices=["diff-entropy", "total-evidence", "mutual-info"])
    g.add_argument("--method", choices=["edl", "edlpp-meta", "edlpp-mc", "cedl-meta", "cedl-mc"])
    g.add_argument("--beta", type=float)
    g.add_argument("--lambda", dest="lam", type=float)
    g.add_argument("--delta", type=float)
    g.add_argument("--T", dest="T", type=int)
    g.add_argument("--dropout", type=float)
    g.add_argument("--attack", choices=[k.value for k in AttackKind])
    g.add_argument("--eps", dest="epsilon", type=float)
    g.add_argument("--steps", type=int)
    g.add_argument("--workers", type=int)
    g.add_argument("--calibrate-with", dest="calibrate_with", choices=["method", "edl"])
    g.add_argument("--dump-decisions", action="store_true",
                   help="write per-sample scores, margins and decisions")
    g.add_argument("--data", type=Path, help="directory written by gen-data")
    g.add_argument("--weights", type=Path, help="weights file written by train")
    return p


def build_parser():
    common = _common()
    parser = _Parser(prog="cedl", description="Conflict-aware evidential classification toolkit.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    sub.add_parser("gen-data", parents=[common], help="generate and split synthetic cohorts")
    sub.add_parser("train", parents=[common], help="train the base evidential network")
    sub.add_parser("calibrate", parents=[common], help="fit the abstention threshold")
    sub.add_parser("eval", parents=[common], help="evaluate coverage for one method")
    sub.add_parser("attack", parents=[common], help="write an attacked OOD test set")
    ab = sub.add_parser("ablate", parents=[common], help="sweep one hyperparameter")
    ab.add_argument("--axis", required=True, choices=list(harness.ABLATION_AXES))
    ab.add_argument("--values", required=True, help="comma-separated values")
    rep = sub.add_parser("report", parents=[common], help="merge JSON reports into one CSV")
    rep.add_argument("inputs", nargs="+", type=Path)
    return parser


_OVERRIDES = ("seed", "metric", "method", "beta", "lam", "delta", "T", "dropout",
              "attack", "epsilon", "steps", "workers", "calibrate_with")


def load_config(args):
    base = harness.ExperimentConfig.load(args.config).to_dict() if args.config else {}
    for name in _OVERRIDES:
        value = getattr(args, name, None)
        if value is not None:
            base[name] = value
    return harness.ExperimentConfig.from_dict(base)


def load_cohorts(directory):
    data = {}
    for name, fname in DATA_FILES.items():
        path = Path(directory) / fname
        if not path.exists():
            raise ConfigError(f"missing cohort {name}: {path} not found")
        split = name.split("_")[1]
        data[name] = datagen.load_dataset(path, split=split)
    return data


def _experiment(args, cfg):
    data = load_cohorts(args.data) if args.data else None
    net = netmod.load_weights(args.weights) if args.weights else None
    return harness.Experiment(cfg, net=net, data=data)


def _out(args):
    args.out.mkdir(parents=True, exist_ok=True)
    return args.out


def cmd_gen_data(args, cfg):
    out = _out(args)
    for name, ds in harness.make_cohorts(cfg).items():
        datagen.save_dataset(ds, out / DATA_FILES[name])
    print(f"wrote {len(DATA_FILES)} cohorts to {out}")


def cmd_train(args, cfg):
    out = _out(args)
    data = load_cohorts(args.data) if args.data else harness.make_cohorts(cfg)
    net, log = harness.train_net(cfg, data)
    netmod.save_weights(net, out / "weights.json")
    log.to_csv(out / "training_log.csv")
    print(f"wrote {out / 'weights.json'}")


def cmd_calibrate(args, cfg):
    out = _out(args)
    thr = _experiment(args, cfg).threshold()
    calibration.save_threshold(thr, out / "threshold.json")
    print(json.dumps(thr.to_dict()))


def cmd_eval(args, cfg):
    out = _out(args)
    dump = out / "decisions.csv" if args.dump_decisions else None
    report = _experiment(args, cfg).evaluate(dump_path=dump)
    harness.emit_report(report, "json", out / "report.json")
    harness.emit_report(report, "csv", out / "report.csv")
    print((out / "report.csv").read_text(), end="")


def cmd_attack(args, cfg):
    out = _out(args)
    exp = _experiment(args, cfg)
    spec = exp.attack_spec()
    adv = exp.attacked(spec)
    ood = exp.data["ood_test"]
    ds = datagen.LabeledDataset(adv[: len(ood)], ood.labels, ood.K, "test")
    datagen.save_dataset(ds, out / "adv_ood_test.cedl")
    print(f"wrote {out / 'adv_ood_test.cedl'} ({spec.kind.value}, epsilon={spec.epsilon!r})")


def _parse_values(text, axis):
    try:
        cast = int if axis == "T" else float
        return [cast(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ConfigError(f"cannot parse --values {text!r} for axis {axis}") from None


def cmd_ablate(args, cfg):
    out = _out(args)
    values = _parse_values(args.values, args.axis)
    reports = harness.ablate(args.axis, values, cfg, experiment=_experiment(args, cfg))
    harness.emit_report(reports, "csv", out / f"ablate_{args.axis}.csv")
    harness.emit_report(reports, "json", out / f"ablate_{args.axis}.json")
    print((out / f"ablate_{args.axis}.csv").read_text(), end="")


def cmd_report(args, cfg):
    reports = []
    for path in args.inputs:
        reports.extend(harness.load_reports(path))
    out = _out(args) / "summary.csv"
    harness.emit_report(reports, "csv", out)
    print(out.read_text(), end="")


COMMANDS = {
    "gen-data": cmd_gen_data,
    "train": cmd_train,
    "calibrate": cmd_calibrate,
    "eval": cmd_eval,
    "attack": cmd_attack,
    "ablate": cmd_ablate,
    "report": cmd_report,
}


def main(argv=None):
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    try:
        cfg = load_config(args)
        COMMANDS[args.command](args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ParseError, InvalidInputError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
