"""Command-line entry point: ``zexe <subcommand> ...``.

Exit codes: 0 success, 1 usage or configuration error, 2 data error
(missing or malformed inputs), 3 internal error.
"""

import argparse
import json
import logging
import os
import sys

from . import __version__

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INTERNAL = 0, 1, 2, 3
log = logging.getLogger("zexe")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# options of `attack` that may also come from the [attack] table of a TOML file
ATTACK_DEFAULTS = {
    "algo": "zexe",
    "budget": 1000,
    "sections": 50,
    "section_bytes": 2048,
    "window": "printable",
    "seeds": [0],
    "max_samples": None,
    "threshold": None,
    "workers": os.cpu_count() or 1,
    "optimizer": {},
}
OPTIMIZER_FLAGS = ("l", "omega", "h0", "h_min", "beta_scale", "population", "mutation_rate")
STEP_FLAGS = {"step": "kind", "gamma_lo": "gamma_lo", "gamma_hi": "gamma_hi",
              "gamma": "gamma", "max_trials": "max_trials"}


def load_config(path):
    if path is None:
        return {}
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except FileNotFoundError:
        raise DataError(f"config file not found: {path}")
    except tomllib.TOMLDecodeError as exc:
        raise UsageError(f"{path}: {exc}")


def resolve_attack_options(args):
    """Defaults, then the config file's ``[attack]`` table, then explicit flags."""
    file_cfg = load_config(args.config).get("attack", {})
    unknown = set(file_cfg) - set(ATTACK_DEFAULTS) - {"model", "corpus", "out"}
    if unknown:
        raise UsageError(f"unknown [attack] keys in {args.config}: {', '.join(sorted(unknown))}")
    opts = {k: file_cfg.get(k, v) for k, v in ATTACK_DEFAULTS.items()}
    opts["optimizer"] = dict(file_cfg.get("optimizer", {}))
    for key in ("model", "corpus", "out"):
        opts[key] = getattr(args, key) or file_cfg.get(key)
        if opts[key] is None:
            raise UsageError(f"--{key} is required (flag or [attack] {key} in the config file)")
    for key in ATTACK_DEFAULTS:
        val = getattr(args, key, None)
        if val is not None and key != "optimizer":
            opts[key] = val
    for key in OPTIMIZER_FLAGS:
        val = getattr(args, key)
        if val is not None:
            opts["optimizer"][key] = val
    step = dict(opts["optimizer"].get("step", {}))
    for flag, field in STEP_FLAGS.items():
        val = getattr(args, flag)
        if val is not None:
            step[field] = val
    if step:
        opts["optimizer"]["step"] = step
    return opts


# -- subcommands ---------------------------------------------------------------

def cmd_gen_corpus(args):
    from .corpus import gen_corpus, write_corpus

    if args.benign < 1 or args.malicious < 1:
        raise UsageError("--benign and --malicious must be at least 1")
    corpus = gen_corpus(args.seed, args.benign, args.malicious, (args.min_size, args.max_size))
    try:
        manifest = write_corpus(corpus, args.out, force=args.force)
    except FileExistsError as exc:
        raise DataError(str(exc))
    print(f"wrote {len(corpus)} samples and {manifest}")


def _read_corpus(path):
    from .corpus import read_corpus

    try:
        return read_corpus(path)
    except (FileNotFoundError, KeyError, ValueError) as exc:
        raise DataError(f"cannot read corpus {path}: {exc}")


def cmd_train(args):
    from . import detectors

    corpus = _read_corpus(args.corpus)
    try:
        model = detectors.train(corpus, args.kind, args.epochs, args.rate)
    except ValueError as exc:
        raise DataError(str(exc))
    if args.threshold is not None:
        model.threshold = args.threshold
    detectors.save_model(model, args.out)
    acc = detectors.accuracy(model, corpus.samples, corpus.labels)
    print(f"{args.kind} model -> {args.out} (training accuracy {acc:.4f})")


def cmd_attack(args):
    from . import campaign, detectors

    opts = resolve_attack_options(args)
    try:
        cfg = campaign.CampaignConfig(
            algo=opts["algo"], budget=opts["budget"], n_sections=opts["sections"],
            section_bytes=opts["section_bytes"], window=opts["window"],
            seeds=list(opts["seeds"]), max_samples=opts["max_samples"],
            threshold=opts["threshold"], optimizer=opts["optimizer"], workers=opts["workers"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"invalid attack configuration: {exc}")
    try:
        model = detectors.read_model(opts["model"])
    except (OSError, ValueError) as exc:
        raise DataError(f"cannot read model {opts['model']}: {exc}")
    corpus = _read_corpus(opts["corpus"])
    report = campaign.run_campaign(model, corpus, cfg)
    report.config["model_path"] = opts["model"]
    report.config["corpus_path"] = opts["corpus"]
    csv_path, json_path = report.write(opts["out"])
    agg = report.aggregates
    print(f"{cfg.algo}: ER {agg['er']:.3f} over {agg['n']} attacks "
          f"({len(report.skipped)} skipped) -> {csv_path}, {json_path}")


def cmd_verify_theory(args):
    from . import theory

    checks = theory.DEFAULT_CHECKS if not args.check else args.check
    if "all" in checks:
        checks = theory.CHECKS
    for name in checks:
        if name not in theory.CHECKS:
            raise UsageError(f"unknown check {name!r}; choose from {', '.join(theory.CHECKS)} or all")
    results = []
    for name in checks:
        res = theory.run_check(name, seed=args.seed, frames=args.frames,
                               repetitions=args.repetitions)
        print(f"{name}: {'pass' if res['pass'] else 'FAIL'}")
        results.append(res)
    report = {"config": {"checks": list(checks), "seed": args.seed, "frames": args.frames,
                         "repetitions": args.repetitions},
              "results": results, "pass": all(r["pass"] for r in results)}
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            json.dump(report, fh, indent=2)
            fh.write("\n")
    if not report["pass"]:
        return EXIT_DATA
    return EXIT_OK


def cmd_report(args):
    from . import campaign

    out = {}
    all_rows = []
    for path in args.csv:
        try:
            rows = campaign.read_csv(path)
        except (OSError, ValueError) as exc:
            raise DataError(str(exc))
        out[path] = campaign.aggregate(rows)
        all_rows += rows
    if len(args.csv) > 1:
        out["combined"] = campaign.aggregate(all_rows)
    text = json.dumps(out, indent=2)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    print(text)


# -- parser --------------------------------------------------------------------

def build_parser():
    from .optim import ALGOS
    from .theory import CHECKS

    p = _Parser(prog="zexe", description="Zeroth-order adversarial EXEmple benchmark.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-corpus", help="generate a seeded synthetic TEXE corpus")
    g.add_argument("--seed", type=int, default=42)
    g.add_argument("--benign", type=int, default=200)
    g.add_argument("--malicious", type=int, default=200)
    g.add_argument("--min-size", type=int, default=8192)
    g.add_argument("--max-size", type=int, default=65536)
    g.add_argument("--out", required=True)
    g.add_argument("--force", action="store_true", help="overwrite an existing corpus")
    g.set_defaults(func=cmd_gen_corpus)

    t = sub.add_parser("train", help="train a detector on a corpus")
    t.add_argument("--kind", choices=("histogram", "stumps"), required=True)
    t.add_argument("--corpus", required=True)
    t.add_argument("--out", required=True)
    t.add_argument("--epochs", type=int, help="GD iterations (histogram) or boosting rounds (stumps)")
    t.add_argument("--rate", type=float, help="GD step (histogram) or shrinkage (stumps)")
    t.add_argument("--threshold", type=float, help="override the detection threshold")
    t.set_defaults(func=cmd_train)

    a = sub.add_parser("attack", help="run an attack campaign on the malicious samples")
    a.add_argument("--config", help="TOML file with an [attack] table; flags override it")
    a.add_argument("--model")
    a.add_argument("--corpus")
    a.add_argument("--out", help="output prefix; writes <out>.csv and <out>.json")
    a.add_argument("--algo", choices=ALGOS)
    a.add_argument("--budget", type=int)
    a.add_argument("--sections", type=int)
    a.add_argument("--section-bytes", type=int)
    a.add_argument("--window", choices=("printable", "full"))
    a.add_argument("--seeds", type=int, nargs="+")
    a.add_argument("--max-samples", type=int)
    a.add_argument("--threshold", type=float)
    a.add_argument("--workers", type=int)
    a.add_argument("--l", type=int, help="directions per surrogate")
    a.add_argument("--omega", type=float, help="exploration threshold on ||g||^2")
    a.add_argument("--h0", type=float)
    a.add_argument("--h-min", type=float)
    a.add_argument("--beta-scale", type=float)
    a.add_argument("--population", type=int)
    a.add_argument("--mutation-rate", type=float)
    a.add_argument("--step", choices=("adaptive", "constant", "inverse_sqrt", "armijo"))
    a.add_argument("--gamma-lo", type=float)
    a.add_argument("--gamma-hi", type=float)
    a.add_argument("--gamma", type=float)
    a.add_argument("--max-trials", type=int)
    a.set_defaults(func=cmd_attack)

    v = sub.add_parser("verify-theory", help="numerical checks of the smoothing/convergence results")
    v.add_argument("--check", action="append",
                   help=f"one of {', '.join(CHECKS)} or all (repeatable; default: all but convergence)")
    v.add_argument("--frames", type=int, help="Monte-Carlo sample count override")
    v.add_argument("--repetitions", type=int, default=20)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--out", help="write the JSON report here")
    v.set_defaults(func=cmd_verify_theory)

    r = sub.add_parser("report", help="re-aggregate per-sample CSV reports")
    r.add_argument("csv", nargs="+")
    r.add_argument("--out")
    r.set_defaults(func=cmd_report)
    return p


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors, --help, --version
        return exc.code
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        code = args.func(args)
    except UsageError as exc:
        print(f"zexe: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"zexe: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        log.debug("internal error", exc_info=True)
        print(f"zexe: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK if code is None else code


if __name__ == "__main__":
    sys.exit(main())
