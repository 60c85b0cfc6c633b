"""Command line entry point: ``kstester {test,experiment,lemma-check,ks-baseline,memory}``.

Exit codes: 0 accept (or all checks passed), 1 reject (or a check failed),
2 error.  Output is plain comma-separated text; colour is never used.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from typing import Sequence

import numpy as np

from ..oracle import certification_catalog, exact_kdistance, ks_test, lemma1_witness
from ..reference import DomainError, UnsupportedModel, model_from_dict
from ..sketch import InsufficientSamples, TesterConfig, amplified_test
from ..streams import ModelStream
from .inputs import FileStream, ParseError, parse_model_spec
from .runner import ExperimentPlan, memory_report, run_experiment

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


def _config(args) -> TesterConfig:
    return TesterConfig(
        eps=args.eps, delta=args.delta, c=args.c, mode=args.mode, early_exit=args.early_exit
    )


def _writer(out):
    return csv.writer(out, lineterminator="\n")


def cmd_test(args, out) -> int:
    config = _config(args)
    model = parse_model_spec(args.model)
    if args.sample_from:
        stream = ModelStream(parse_model_spec(args.sample_from), np.random.default_rng(args.seed))
        report = amplified_test(config, model, stream)
    else:
        with FileStream(args.stream) as stream:
            report = amplified_test(config, model, stream)
    v = report.verdict
    w = v.witness
    wr = _writer(out)
    wr.writerow(["decision", "witness_i", "witness_j", "observed", "threshold",
                 "samples", "rounds", "reject_votes", "peak_words"])
    wr.writerow([
        str(v.decision),
        w.i if w else "",
        w.j if w else "",
        f"{w.observed_frequency:.6g}" if w else "",
        f"{w.threshold:.6g}" if w else "",
        report.samples_consumed,
        report.rounds,
        report.reject_votes,
        report.peak_live_words,
    ])
    return EXIT_REJECT if v.rejected else EXIT_ACCEPT


def cmd_experiment(args, out) -> int:
    plan = ExperimentPlan.load(args.plan)
    result = run_experiment(plan, output_path=args.out, workers=args.workers)
    if not (args.out or plan.output_path):
        out.write(result.csv_text)
    if args.figures:
        from .plotting import experiment_figures

        for path in experiment_figures(result.summaries, plan.config.eps, args.figures):
            print(f"wrote {path}", file=sys.stderr)
    for s in result.summaries:
        print(f"{s.hypothesis} d={s.distance:g}: reject_rate={s.reject_rate:.4f} "
              f"over {s.trials} trials", file=sys.stderr)
    return EXIT_ACCEPT


def _load_pairs(path: str):
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    return [
        (entry.get("name", f"pair{k}"), model_from_dict(entry["unknown"]),
         model_from_dict(entry["reference"]))
        for k, entry in enumerate(raw)
    ]


def cmd_lemma_check(args, out) -> int:
    pairs = _load_pairs(args.pairs) if args.pairs else certification_catalog(args.eps)
    wr = _writer(out)
    wr.writerow(["name", "kdistance", "i", "j", "gap", "threshold", "satisfied"])
    ok = True
    for name, d, ref in pairs:
        rep = lemma1_witness(d, ref, args.eps)
        dist = exact_kdistance(d, ref)
        wr.writerow([name, f"{dist:.6g}", rep.best_bucket[0], rep.best_bucket[1],
                     f"{rep.gap:.6g}", f"{rep.threshold:.6g}", str(rep.satisfied).lower()])
        ok &= rep.satisfied or dist < args.eps - 1e-12
    return EXIT_ACCEPT if ok else EXIT_REJECT


def cmd_ks_baseline(args, out) -> int:
    model = parse_model_spec(args.model)
    with FileStream(args.stream) as stream:
        sample = stream.read_all()
    if sample.size == 0:
        raise DomainError("empty sample")
    res = ks_test(sample, model, args.delta)
    wr = _writer(out)
    wr.writerow(["decision", "statistic", "threshold", "n"])
    wr.writerow(["reject" if res.reject else "accept", f"{res.statistic:.6g}",
                 f"{res.threshold:.6g}", res.n])
    return EXIT_REJECT if res.reject else EXIT_ACCEPT


def cmd_memory(args, out) -> int:
    wr = _writer(out)
    wr.writerow(["eps", "levels", "batch_size", "peak_words"])
    for e in args.eps:
        cfg = TesterConfig(eps=e)
        wr.writerow([f"{e:g}", cfg.levels, cfg.batch_size, memory_report(cfg)])
    if args.figure:
        from .plotting import plot_memory

        plot_memory(sorted(args.eps, reverse=True), args.figure)
    return EXIT_ACCEPT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kstester", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("test", help="run the streaming tester on one stream")
    t.add_argument("--eps", type=float, required=True)
    t.add_argument("--delta", type=float, default=0.1)
    t.add_argument("--c", type=float, default=None)
    t.add_argument("--mode", choices=("theory", "practical"), default="practical")
    t.add_argument("--early-exit", action="store_true")
    t.add_argument("--model", required=True, help="reference model: JSON file, inline JSON or shorthand")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--stream", help="sample file, one value per line; '-' for stdin")
    src.add_argument("--sample-from", help="generate the stream from this model spec")
    t.add_argument("--seed", type=int, default=0, help="seed for --sample-from")
    t.set_defaults(func=cmd_test)

    e = sub.add_parser("experiment", help="Monte-Carlo type-I / type-II experiment")
    e.add_argument("--plan", required=True)
    e.add_argument("--out", default=None)
    e.add_argument("--figures", default=None, help="directory for rendered figures")
    e.add_argument("--workers", type=int, default=1)
    e.set_defaults(func=cmd_experiment)

    lc = sub.add_parser("lemma-check", help="exhaustive witness-bucket certification")
    lc.add_argument("--eps", type=float, required=True)
    lc.add_argument("--pairs", default=None, help="JSON list of {name, unknown, reference}")
    lc.set_defaults(func=cmd_lemma_check)

    kb = sub.add_parser("ks-baseline", help="classical KS test with the DKW threshold")
    kb.add_argument("--model", required=True)
    kb.add_argument("--stream", required=True)
    kb.add_argument("--delta", type=float, default=0.1)
    kb.set_defaults(func=cmd_ks_baseline)

    m = sub.add_parser("memory", help="predicted peak live words")
    m.add_argument("--eps", type=float, nargs="+", required=True)
    m.add_argument("--figure", default=None)
    m.set_defaults(func=cmd_memory)
    return p


def main(argv: Sequence[str] | None = None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        return args.func(args, out)
    except InsufficientSamples as exc:
        print(str(exc), file=sys.stderr)
    except ParseError as exc:
        print(str(exc), file=sys.stderr)
    except (DomainError, UnsupportedModel, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
    except OSError as exc:
        print(f"IoError: {exc}", file=sys.stderr)
    return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
