"""Command-line front end: synth, calibrate, xval, simulate, align, analyze.

Exit codes: 0 success, 2 invalid input or arguments, 3 validation or
significance failure, 4 I/O failure. Machine-readable JSON summaries go to
stdout; log messages go to stderr.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace

from . import __version__
from .alignment import (
    align_words, analysis_report, fit_clock_map, ols_trend, round_means, save_analysis,
    save_words_csv,
)
from .calibration import calibrate, cross_validate
from .classifier import load_model, save_model
from .errors import (
    DegenerateModel, InputError, IoFailure, MissingFile, NotPositiveDefinite, PipelineError,
    SingularCovariance,
)
from .evaluation import save_report
from .online import normalize_trace, simulate_online, trace_from_csv, trace_to_csv
from .session import load_rounds, load_session, load_sync, load_transcript
from .synth import MODES, SynthConfig, write_synth_bundle

log = logging.getLogger("convbci")

EXIT_OK, EXIT_INPUT, EXIT_INVALID, EXIT_IO = 0, 2, 3, 4


def _emit(obj) -> None:
    sys.stdout.write(json.dumps(obj) + "\n")


def _gamma(value: str):
    if value == "auto":
        return None
    try:
        g = float(value)
    except ValueError:
        raise argparse.ArgumentTypeError("gamma must be 'auto' or a number in [0, 1]") from None
    if not 0.0 <= g <= 1.0:
        raise argparse.ArgumentTypeError("gamma must lie in [0, 1]")
    return g


def cmd_synth(args) -> int:
    overrides = {}
    if args.noise_sigma is not None:
        overrides["noise_sigma_uv"] = args.noise_sigma
    if args.n_trials is not None:
        overrides["n_trials"] = args.n_trials
    if args.n_rounds is not None:
        overrides["n_rounds"] = args.n_rounds
    cfg = SynthConfig(mode=args.mode, seed=args.seed, **overrides)
    if args.duration is not None:
        if args.mode != "workload_conversation":
            raise InputError("--duration applies to workload_conversation only")
        cfg = replace(cfg, round_s=args.duration / cfg.n_rounds - cfg.gap_s)
    session = write_synth_bundle(cfg, args.out)
    log.info("wrote %s session to %s", args.mode, args.out)
    _emit({"mode": args.mode, "out": args.out, "seed": args.seed,
           "duration_s": session.data.duration_s, "n_events": len(session.events)})
    return EXIT_OK


def cmd_calibrate(args) -> int:
    session = load_session(args.session)
    model, summary = calibrate(session, args.kind, k=args.k, gamma=args.gamma,
                               reject_fraction=args.reject_fraction)
    save_model(model, args.model)
    log.info("saved %s model (%d features) to %s", args.kind, model.n_features, args.model)
    _emit(summary)
    return EXIT_OK


def cmd_xval(args) -> int:
    session = load_session(args.session)
    report = cross_validate(session, args.kind, folds=args.folds, repeats=args.repeats,
                            seed=args.seed, k=args.k, gamma=args.gamma,
                            shuffle_labels=args.shuffle_labels,
                            reject_fraction=args.reject_fraction)
    save_report(report, args.report)
    log.info("mean accuracy %.3f (sd %.3f), chance threshold %.3f", report.mean_acc,
             report.sd_acc, report.chance_threshold)
    _emit({k: v for k, v in report.to_dict().items() if k != "fold_accuracies"})
    return EXIT_OK if report.significant else EXIT_INVALID


def cmd_simulate(args) -> int:
    session = load_session(args.session)
    model = load_model(args.model)
    trace = simulate_online(session, model)
    if args.normalize == "pm1":
        trace = normalize_trace(trace, "minmax_pm1")
    trace_to_csv(trace, args.out)
    _emit({"ticks": len(trace), "t0_s": trace.t0_s, "rate_hz": trace.rate_hz, "out": args.out})
    return EXIT_OK


def cmd_align(args) -> int:
    trace = trace_from_csv(args.trace)
    words = load_transcript(args.transcript)
    clock = fit_clock_map(load_sync(args.sync))
    rows = align_words(trace, words, clock)
    save_words_csv(rows, args.out)
    _emit({"words": len(rows), "absent": sum(r.absent for r in rows),
           "clock": {"offset_s": clock.offset_s, "drift": clock.drift,
                     "rms_residual_s": clock.rms_residual_s}})
    return EXIT_OK


def cmd_analyze(args) -> int:
    trace = trace_from_csv(args.trace)
    summaries = round_means(trace, load_rounds(args.rounds))
    report = analysis_report(summaries, ols_trend(summaries))
    save_analysis(report, args.out)
    _emit(report["trend"])
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="convbci", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="write a synthetic session bundle")
    s.add_argument("--mode", required=True, choices=MODES)
    s.add_argument("--out", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise-sigma", type=float)
    s.add_argument("--duration", type=float, help="total length of a workload conversation (s)")
    s.add_argument("--n-trials", type=int)
    s.add_argument("--n-rounds", type=int)
    s.set_defaults(func=cmd_synth)

    def decoder_args(q):
        q.add_argument("--session", required=True)
        q.add_argument("--kind", required=True, choices=("workload", "agreement"))
        q.add_argument("--k", type=int, default=3, help="CSP filters per side per band")
        q.add_argument("--gamma", type=_gamma, default=None,
                       help="shrinkage intensity or 'auto' (default)")
        q.add_argument("--reject-fraction", type=float, default=0.0,
                       help="drop epochs touching the worst fraction of 1 s windows")

    c = sub.add_parser("calibrate", help="train a decoder")
    decoder_args(c)
    c.add_argument("--model", required=True)
    c.set_defaults(func=cmd_calibrate)

    x = sub.add_parser("xval", help="repeated cross-validation against the chance threshold")
    decoder_args(x)
    x.add_argument("--folds", type=int, default=5)
    x.add_argument("--repeats", type=int, default=5)
    x.add_argument("--seed", type=int, default=0)
    x.add_argument("--report", required=True)
    x.add_argument("--shuffle-labels", action="store_true", help="chance-level control run")
    x.set_defaults(func=cmd_xval)

    m = sub.add_parser("simulate", help="replay a session through a model at 50 Hz")
    m.add_argument("--session", required=True)
    m.add_argument("--model", required=True)
    m.add_argument("--out", required=True)
    m.add_argument("--normalize", choices=("none", "pm1"), default="none")
    m.set_defaults(func=cmd_simulate)

    a = sub.add_parser("align", help="summarize a trace per transcript word")
    a.add_argument("--trace", required=True)
    a.add_argument("--transcript", required=True)
    a.add_argument("--sync", required=True)
    a.add_argument("--out", required=True)
    a.set_defaults(func=cmd_align)

    z = sub.add_parser("analyze", help="round means and OLS trend of a trace")
    z.add_argument("--trace", required=True)
    z.add_argument("--rounds", required=True)
    z.add_argument("--out", required=True)
    z.set_defaults(func=cmd_analyze)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except (DegenerateModel, SingularCovariance, NotPositiveDefinite) as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except IoFailure as exc:
        log.error("%s", exc)
        return EXIT_IO
    except (InputError, MissingFile) as exc:
        log.error("%s", exc)
        return EXIT_INPUT
    except PipelineError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except OSError as exc:
        log.error("%s", exc)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
