"""Command-line interface.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import io
from .adaptation import AdaptConfig, coral_adapt_model, coral_plus_adapt_model
from .core import DataError, NumericError
from .diagnostics import DEFAULT_TAU, diagnose, write_report
from .metrics import LabeledScores, det_points, summarize
from .plda import PldaFitConfig, fit_plda
from .planfile import load_plan, run_plan, write_results
from .scoring import Backend, score_trials
from .synthlab import DomainSpec, apply_domain_shift, default_truth, make_trials, sample_plda

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

logger = logging.getLogger("spkback")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def cmd_train_plda(args):
    eset = io.read_embeddings(args.train)
    model = fit_plda(eset, PldaFitConfig(em_iters=args.em_iters, tol=args.tol))
    io.save_plda(args.out, model)
    print(f"trained PLDA: dim={model.dim} speakers={eset.n_speakers} utterances={len(eset)}")


def cmd_score(args):
    if args.backend == "plda":
        if not args.model:
            raise UsageError("score --backend plda requires --model")
        backend = Backend.plda(io.load_plda(args.model))
    else:
        center = io.read_embeddings(args.center_from).X.mean(axis=0) if args.center_from else None
        backend = Backend.cos(center)
    enroll = io.read_embeddings(args.enroll)
    test = enroll if args.test == args.enroll else io.read_embeddings(args.test)
    trials = io.read_trials(args.trials)
    scores = score_trials(backend, enroll, test, trials, workers=args.workers)
    io.write_scores(args.out, scores)


def cmd_adapt(args):
    model = io.load_plda(args.model)
    indom = io.read_embeddings(args.indomain)
    if args.method == "coral":
        adapted = coral_adapt_model(model, indom)
    else:
        adapted = coral_plus_adapt_model(model, indom, AdaptConfig(args.alpha_b, args.alpha_w))
    io.save_plda(args.out, adapted)


def cmd_diagnose(args):
    model = io.load_plda(args.model)
    test = io.read_embeddings(args.test)
    train = io.read_embeddings(args.train) if args.train else None
    report = diagnose(model, test, train, tau=args.tau)
    write_report(args.out, report)
    print(f"recommendation={report.recommendation} mismatch_index={report.mismatch_index:.6f} tau={report.tau:g}")


def cmd_metrics(args):
    scores = io.read_scores(args.scores)
    trials = io.read_trials(args.trials)
    ls = LabeledScores.from_scores(scores, trials)
    ls.check()
    res = summarize(ls, args.p_target)
    print(f"eer={res['eer']:.6f}, min_dcf={res['min_dcf']:.6f}, min_cp={res['min_cp']:.6f}")
    if args.det:
        thr, pm, pf = det_points(ls)
        with open(args.det, "w", encoding="utf-8") as f:
            f.write("threshold,p_miss,p_fa\n")
            for t, a, b in zip(thr, pm, pf):
                f.write(f"{t:.17g},{a:.17g},{b:.17g}\n")


def cmd_synth(args):
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    truth = default_truth(args.dim, args.psi_min, args.psi_max, seed=args.seed)
    train = sample_plda(truth, args.train_speakers, args.train_sessions, args.seed, prefix="tr_")
    test = sample_plda(truth, args.test_speakers, args.test_sessions, args.seed + 1, prefix="te_")
    if args.shift == "cross":
        test = apply_domain_shift(test, DomainSpec.cross_domain(args.dim, 1000 + args.seed))
    elif args.shift == "truncation":
        spec = DomainSpec.truncation(args.dim, 1000 + args.seed, args.offset_sigma * truth.marginal_std())
        train = apply_domain_shift(train, spec)
        test = apply_domain_shift(test, spec)
    ext = "csv" if args.format == "csv" else "bin"
    io.write_embeddings(out / f"train.{ext}", train)
    io.write_embeddings(out / f"test.{ext}", test)
    io.write_trials(out / "trials.txt", make_trials(test, args.seed))
    io.save_plda(out / "truth.plda", truth.to_plda_model())
    print(f"wrote train ({len(train)}), test ({len(test)}), trials and truth model to {out}")


def cmd_experiment(args):
    pf = load_plan(args.plan)
    rows = run_plan(pf)
    write_results(args.out, rows)
    print(f"{len(rows)} result rows written to {args.out}")


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="spkback", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    s = sub.add_parser("train-plda", help="train a two-covariance PLDA model")
    s.add_argument("--train", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--em-iters", type=int, default=20)
    s.add_argument("--tol", type=float, default=1e-6)
    s.set_defaults(func=cmd_train_plda)

    s = sub.add_parser("score", help="score a trial list")
    s.add_argument("--backend", choices=["cos", "plda"], required=True)
    s.add_argument("--model")
    s.add_argument("--center-from", help="cos only: subtract the mean of these embeddings")
    s.add_argument("--enroll", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--trials", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--workers", type=int, default=1)
    s.set_defaults(func=cmd_score)

    s = sub.add_parser("adapt", help="adapt a PLDA model to unlabeled in-domain data")
    s.add_argument("--method", choices=["coral", "coral+"], required=True)
    s.add_argument("--model", required=True)
    s.add_argument("--indomain", required=True)
    s.add_argument("--out", required=True)
    s.add_argument("--alpha-b", type=float, default=0.5)
    s.add_argument("--alpha-w", type=float, default=0.5)
    s.set_defaults(func=cmd_adapt)

    s = sub.add_parser("diagnose", help="embedding diagnostics and back-end recommendation")
    s.add_argument("--model", required=True)
    s.add_argument("--test", required=True)
    s.add_argument("--train")
    s.add_argument("--out", required=True)
    s.add_argument("--tau", type=float, default=DEFAULT_TAU)
    s.set_defaults(func=cmd_diagnose)

    s = sub.add_parser("metrics", help="EER, minDCF and min C_primary of a score file")
    s.add_argument("--scores", required=True)
    s.add_argument("--trials", required=True)
    s.add_argument("--p-target", type=float, default=0.01)
    s.add_argument("--det", help="optional DET points CSV")
    s.set_defaults(func=cmd_metrics)

    s = sub.add_parser("synth", help="write a synthetic train/test dataset")
    s.add_argument("--out-dir", required=True)
    s.add_argument("--dim", type=int, default=32)
    s.add_argument("--psi-min", type=float, default=0.1)
    s.add_argument("--psi-max", type=float, default=50.0)
    s.add_argument("--train-speakers", type=int, default=200)
    s.add_argument("--train-sessions", type=int, default=10)
    s.add_argument("--test-speakers", type=int, default=50)
    s.add_argument("--test-sessions", type=int, default=4)
    s.add_argument("--shift", choices=["none", "cross", "truncation"], default="none")
    s.add_argument("--offset-sigma", type=float, default=1.0)
    s.add_argument("--format", choices=["csv", "bin"], default="bin")
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("experiment", help="synthetic back-end experiments")
    esub = s.add_subparsers(dest="action", parser_class=_Parser)
    r = esub.add_parser("run", help="run a plan file and write a CSV results table")
    r.add_argument("--plan", required=True)
    r.add_argument("--out", required=True)
    r.set_defaults(func=cmd_experiment)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "func", None) is None:
            raise UsageError("missing subcommand")
        logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                            format="%(levelname)s %(name)s: %(message)s")
        args.func(args)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
