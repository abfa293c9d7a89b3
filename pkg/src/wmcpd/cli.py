"""Command-line entry point: ``wmcpd <subcommand> ...``.

Every subcommand takes ``--seed`` (all randomness derives from it),
``--config FILE`` (``key=value`` lines, keys named like the long flags with
dashes or underscores; explicit flags win) and ``--jobs``. When ``--out`` names
a file, the resolved configuration and a timestamp go to ``<out>.meta.json``
so the primary output stays byte-identical across runs.

Exit status: 0 on success, 2 on usage errors, 1 on bad input data.
"""
import argparse
import json
import sys
import time
from dataclasses import replace
from pathlib import Path

from . import io as wio
from ._rng import derive_seed
from .attacks_eval import (ExperimentConfig, GroundTruth, apply_setting, attack_delete,
                           false_positives, generate_text, insert_plain, rand_index,
                           substitute_plain, watermarked_length, run_experiment)
from .dependence import MeasureKind
from .errors import InvalidParameter, InvalidToken
from .rtest import TestConfig, auto_window, read_pvalue_csv, window_pvalues
from .segmentation import SegmentationConfig, seedbs_not
from .toy_lm import new_markov_model, sample_prompt
from .watermark import gen_keys, generate_watermarked

QUICK_T = 99


def _write(text, path):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


def _write_meta(args, path):
    if path in (None, "-"):
        return
    config = {k: v for k, v in vars(args).items() if k not in ("func", "config")}
    meta = {"command": args.command, "config": config,
            "created": time.strftime("%Y-%m-%dT%H:%M:%S%z")}
    Path(str(path) + ".meta.json").write_text(json.dumps(meta, indent=1, default=str) + "\n")


# --- option groups -----------------------------------------------------------

def _common(p):
    p.add_argument("--seed", type=int, default=0, help="master seed")
    p.add_argument("--config", help="key=value file of option defaults")
    p.add_argument("--jobs", type=int, default=1, help="worker processes (output does not depend on it)")


def _out(p, help="output file (default stdout)"):
    p.add_argument("--out", default="-", help=help)


def _test_opts(p):
    p.add_argument("--measure", default="ems", choices=["its", "itsl", "ems", "emsl"])
    p.add_argument("--gamma", type=float, default=0.4, help="edit penalty for itsl/emsl")
    p.add_argument("--window-b", type=int, default=20, help="window size B (even)")
    p.add_argument("--auto-window", action="store_true", help="B = floor(3 n^(1/3)), rounded up to even")
    p.add_argument("--replicates", type=int, default=999, help="randomization replicates T")
    p.add_argument("--quick", action="store_true", help=f"use T={QUICK_T}")


def _seg_opts(p):
    p.add_argument("--decay-a", type=float, default=2 ** -0.5)
    p.add_argument("--zeta", type=float, default=0.005, help="bootstrap p-value threshold")
    p.add_argument("--block-bp", type=int, default=20, help="bootstrap block length B'")
    p.add_argument("--boot-reps", type=int, default=999, help="bootstrap replicates T'")
    p.add_argument("--min-len", type=int, default=50, help="shortest seeded interval")


def _test_config(args, n):
    B = auto_window(n) if args.auto_window else args.window_b
    T = QUICK_T if args.quick else args.replicates
    return TestConfig(B, T, MeasureKind(args.measure, args.gamma), derive_seed(args.seed, "rtest"),
                      args.jobs)


def _seg_config(args):
    return SegmentationConfig(args.decay_a, args.zeta, args.block_bp, args.boot_reps, args.min_len,
                              derive_seed(args.seed, "segment"), args.jobs)


def _json_list(s):
    try:
        v = json.loads(s)
    except json.JSONDecodeError as e:
        raise argparse.ArgumentTypeError(f"not a JSON list: {s!r}") from e
    if not isinstance(v, list) or not all(isinstance(x, int) for x in v):
        raise argparse.ArgumentTypeError(f"expected a JSON list of integers, got {s!r}")
    return v


# --- subcommands -------------------------------------------------------------

def cmd_model(args):
    model = new_markov_model(args.vocab_size, args.beta, args.seed)
    wio.save_model(model, args.out)


def cmd_keys(args):
    wio.save_keys(gen_keys(args.scheme, args.n, args.vocab_size, args.seed), args.out)


def cmd_generate(args):
    model = wio.load_model(args.model)
    if args.keys:
        keys = wio.load_keys(args.keys)
        text = generate_watermarked(model, sample_prompt(model, 10, derive_seed(args.seed, "prompt")),
                                    keys)
    else:
        _, keys, text = generate_text(model, args.scheme, args.n, args.seed)
    if args.keys_out:
        wio.save_keys(keys, args.keys_out)
    wio.save_text(text, args.out)


def cmd_attack(args):
    model = wio.load_model(args.model)
    text = wio.load_text(args.text)
    if args.setting is not None:
        text, truth = apply_setting(args.setting, model, text, args.seed)
    elif args.insert is not None:
        pos, count = args.insert
        text = insert_plain(model, text, pos, count, args.seed)
    elif args.substitute is not None:
        text = substitute_plain(model, text, *args.substitute, args.seed)
    else:
        text = attack_delete(text, *args.delete)
    if args.truth_out:
        wio.dump_json(GroundTruth.from_flags(text).to_dict(), args.truth_out)
    wio.save_text(text, args.out)


def cmd_pvalues(args):
    keys = wio.load_keys(args.keys)
    text = wio.load_text(args.text)
    pv = window_pvalues(keys, text, _test_config(args, len(keys)))
    _write(pv.to_csv(), args.out)


def cmd_segment(args):
    pvals = read_pvalue_csv(Path(args.pvalues).read_text())
    wio.dump_json(seedbs_not(pvals, _seg_config(args)).to_dict(), args.out)


def cmd_evaluate(args):
    if (args.detected is None) == (args.segmentation is None):
        raise InvalidParameter("give exactly one of --detected and --segmentation")
    if (args.truth is None) == (args.truth_file is None):
        raise InvalidParameter("give exactly one of --truth and --truth-file")
    detected = args.detected if args.detected is not None else \
        wio.load_json(args.segmentation)["change_points"]
    if args.truth_file:
        gt = wio.load_truth(args.truth_file)
        truth, m = gt.change_points, args.m or gt.length
    else:
        truth, m = args.truth, args.m
    if m is None:
        raise InvalidParameter("--m is required with --truth")
    wio.dump_json({"m": m, "detected": detected, "truth": truth,
                   "rand_index": rand_index(detected, truth, m),
                   "n_detected": len(detected),
                   "n_false_positive": false_positives(detected, truth, args.tol)}, args.out)


def cmd_experiment(args):
    watermarked_length(args.setting)
    test = _test_config(args, watermarked_length(args.setting))
    config = ExperimentConfig(args.vocab_size, args.beta, args.model_seed,
                              replace(test, jobs=1), replace(_seg_config(args), jobs=1),
                              args.auto_window, args.jobs)
    report = run_experiment(args.setting, args.seeds, test.measure, config, first_seed=args.seed)
    _write(report.to_csv(), args.out)
    if args.json_out:
        wio.dump_json(report.to_dict(), args.json_out)


def build_parser():
    parser = argparse.ArgumentParser(prog="wmcpd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("model", help="create a Markov token model")
    p.add_argument("--vocab-size", type=int, default=20)
    p.add_argument("--beta", type=float, default=5.0, help="Dirichlet concentration")
    _common(p), _out(p)
    p.set_defaults(func=cmd_model)

    p = sub.add_parser("keys", help="draw a watermark key sequence")
    p.add_argument("--scheme", choices=["its", "ems"], default="ems")
    p.add_argument("--n", type=int, default=500)
    p.add_argument("--vocab-size", type=int, default=20)
    _common(p), _out(p)
    p.set_defaults(func=cmd_keys)

    p = sub.add_parser("generate", help="generate watermarked text")
    p.add_argument("--model", required=True)
    p.add_argument("--scheme", choices=["its", "ems"], default="ems")
    p.add_argument("--n", type=int, default=500, help="watermarked tokens (ignored with --keys)")
    p.add_argument("--keys", help="use this key file instead of drawing keys from --seed")
    p.add_argument("--keys-out", help="write the keys used here")
    _common(p), _out(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("attack", help="edit a text with unwatermarked tokens")
    p.add_argument("--model", required=True)
    p.add_argument("--text", required=True)
    g = p.add_mutually_exclusive_group(required=True)
    g.add_argument("--setting", type=int, choices=[1, 2, 3, 4])
    g.add_argument("--insert", type=int, nargs=2, metavar=("POS", "COUNT"))
    g.add_argument("--substitute", type=int, nargs=2, metavar=("LO", "HI"))
    g.add_argument("--delete", type=int, nargs=2, metavar=("LO", "HI"))
    p.add_argument("--truth-out", help="write change points read off the provenance flags")
    _common(p), _out(p)
    p.set_defaults(func=cmd_attack)

    p = sub.add_parser("pvalues", help="per-token window p-values (CSV)")
    p.add_argument("--keys", required=True)
    p.add_argument("--text", required=True)
    _test_opts(p), _common(p), _out(p)
    p.set_defaults(func=cmd_pvalues)

    p = sub.add_parser("segment", help="change points from a p-value CSV (JSON)")
    p.add_argument("--pvalues", required=True)
    _seg_opts(p), _common(p), _out(p)
    p.set_defaults(func=cmd_segment)

    p = sub.add_parser("evaluate", help="Rand index and false positives")
    p.add_argument("--detected", type=_json_list)
    p.add_argument("--segmentation", help="JSON from the segment subcommand")
    p.add_argument("--truth", type=_json_list)
    p.add_argument("--truth-file", help="JSON from attack --truth-out")
    p.add_argument("--m", type=int, help="sequence length")
    p.add_argument("--tol", type=int, default=20, help="matching tolerance for false positives")
    _common(p), _out(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("experiment", help="run a benchmark setting over several seeds (CSV)")
    p.add_argument("--setting", type=int, required=True, choices=[1, 2, 3, 4])
    p.add_argument("--seeds", type=int, default=10, help="number of seeds, starting at --seed")
    p.add_argument("--vocab-size", type=int, default=20)
    p.add_argument("--beta", type=float, default=5.0)
    p.add_argument("--model-seed", type=int, default=0)
    p.add_argument("--json-out", help="full report with summary statistics")
    _test_opts(p), _seg_opts(p), _common(p), _out(p)
    p.set_defaults(func=cmd_experiment)
    return parser


def read_config_file(path):
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InvalidParameter(f"{path}:{n}: expected key=value")
        k, v = (s.strip() for s in line.split("=", 1))
        out[k.replace("-", "_")] = v
    return out


def _apply_config(parser, argv):
    """Reparse with defaults taken from the --config file."""
    args = parser.parse_args(argv)
    if not getattr(args, "config", None):
        return args
    values = read_config_file(args.config)
    sub = parser._subparsers._group_actions[0].choices[args.command]
    actions = {a.dest: a for a in sub._actions}
    defaults = {}
    for k, v in values.items():
        if k not in actions or k in ("config", "help"):
            parser.error(f"unknown config key {k!r} for {args.command}")
        a = actions[k]
        if a.nargs == 0:
            defaults[k] = v.lower() in ("1", "true", "yes", "on")
        elif a.nargs is not None:
            defaults[k] = [a.type(x) if a.type else x for x in v.split()]
        else:
            defaults[k] = a.type(v) if a.type else v
    sub.set_defaults(**defaults)
    return parser.parse_args(argv)


def main(argv=None):
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        args = _apply_config(parser, argv)
    except SystemExit as e:
        return e.code if isinstance(e.code, int) else 2
    except (InvalidParameter, OSError, ValueError) as e:
        print(f"wmcpd: error: {e}", file=sys.stderr)
        return 2
    try:
        args.func(args)
    except (InvalidParameter, InvalidToken, OSError, ValueError, KeyError, TypeError) as e:
        print(f"wmcpd: error: {e}", file=sys.stderr)
        return 1
    _write_meta(args, args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
