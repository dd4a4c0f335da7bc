"""Command-line entry point: ``spectralhmm <subcommand> ...``."""

import argparse
import csv
import io
import json
import sys

import numpy as np

from . import bench
from .em import baum_welch, random_init
from .errors import HmmError, ModelValidationError
from .evaluation import align_permutation, cond_OT
from .hmm import load_model, load_sequence, sample_sequence, save_sequence
from .moments import TRIPLET_SCHEMES, estimate_moments, exact_moments, load_moments
from .spectral import SpectralOptions, spectral_learn
from .systems import bundled_examples, example_ids, get_example, resolve_example


class UsageError(Exception):
    pass


def _emit(text, out):
    if out:
        with open(out, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json(obj):
    return json.dumps(obj, indent=2, default=_json_default) + "\n"


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _csv(rows):
    if not rows:
        return ""
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0]))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()


def _matrix_rows(named):
    rows = []
    for name, a in named.items():
        a = np.atleast_2d(np.asarray(a)) if np.ndim(a) != 1 else np.asarray(a)[:, None]
        for i, j in np.ndindex(a.shape):
            rows.append({"matrix": name, "row": i + 1, "col": j + 1, "real": float(np.real(a[i, j])), "imag": float(np.imag(a[i, j]))})
    return rows


def _model_arg(args, required=True):
    if getattr(args, "model", None):
        return load_model(args.model), args.model
    if getattr(args, "example", None):
        return get_example(args.example).model, args.example
    if required:
        raise UsageError("one of --model FILE or --example ID is required")
    return None, None


def _spectral_opts(args):
    return SpectralOptions(
        pinv_tol=args.pinv_tol,
        eig_gap_tol=args.eig_gap_tol,
        eig_gap_target=args.eig_gap_target,
        max_resamples=args.max_resamples,
        tol_neg=args.tol_neg,
        tol_imag=args.tol_imag,
    )


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_simulate(args):
    model, ref = _model_arg(args)
    seq = sample_sequence(model, args.length, args.seed, model_id=ref)
    if args.out:
        save_sequence(seq, args.out, fmt=args.format)
    elif args.format == "json":
        _emit(json.dumps(seq.to_dict()) + "\n", None)
    else:
        _emit("symbol\n" + "\n".join(map(str, seq.symbols.tolist())) + "\n", None)


def cmd_moments(args):
    if args.sequence:
        seq = load_sequence(args.sequence)
        m = estimate_moments(TRIPLET_SCHEMES[args.scheme](seq))
    else:
        model, _ = _model_arg(args)
        m = exact_moments(model)
    _emit(json.dumps(m.to_dict()) + "\n", args.out)


def cmd_sl(args):
    if args.moments:
        m = load_moments(args.moments)
    elif args.sequence:
        m = estimate_moments(TRIPLET_SCHEMES[args.scheme](load_sequence(args.sequence)))
    else:
        raise UsageError("one of --moments FILE or --sequence FILE is required")
    truth, _ = _model_arg(args, required=False)
    X = args.states or (truth.X if truth is not None else None)
    if X is None:
        raise UsageError("--states is required when no truth model is given")
    est = spectral_learn(m, X, args.seed, _spectral_opts(args))
    result = est.to_dict()
    if truth is not None:
        result["aligned"] = align_permutation(truth, est).summary()
    if args.format == "csv":
        _emit(_csv(_matrix_rows({"O": est.O_hat, "T": est.T_hat, "pi0": est.pi_hat})), args.out)
    else:
        _emit(_json(result), args.out)


def cmd_em(args):
    seq = load_sequence(args.sequence)
    truth, _ = _model_arg(args, required=False)
    X = args.states or (truth.X if truth is not None else None)
    if X is None:
        raise UsageError("--states is required when no truth model is given")
    Y = max(seq.Y, truth.Y if truth is not None else 0)
    if args.model_init == "random":
        init = random_init(X, Y, args.seed)
    elif args.model_init == "true":
        if truth is None:
            raise UsageError("--model-init true needs --model or --example")
        init = truth
    else:
        if not args.init_file:
            raise UsageError("--model-init file needs --init-file")
        init = load_model(args.init_file)
    res = baum_welch(init, seq, args.max_iter, args.tol)
    out = {
        "model": res.model.to_dict(),
        "iterations": res.iterations,
        "converged": res.converged,
        "reset_columns": res.reset_columns,
        "log_likelihood_trace": list(res.log_likelihood_trace),
    }
    if truth is not None:
        out["aligned"] = align_permutation(truth, res.model).summary()
    if args.format == "csv":
        _emit(_csv(_matrix_rows({"O": res.model.O, "T": res.model.T, "pi0": res.model.pi0})), args.out)
    else:
        _emit(_json(out), args.out)


def cmd_cond(args):
    if args.all:
        rows = [{"example_id": s.id, "Y": s.model.Y, "class": s.intended_cond_class, "cond_OT": s.cond_OT} for s in bundled_examples()]
    else:
        model, ref = _model_arg(args)
        rows = [{"example_id": ref, "Y": model.Y, "cond_OT": cond_OT(model)}]
    _emit(_json(rows) if args.format == "json" else _csv(rows), args.out)


def cmd_bench(args):
    sizes = args.sample_sizes or (bench.QUICK_SAMPLE_SIZES if args.quick else bench.DEFAULT_SAMPLE_SIZES)
    if args.quick:
        sizes = [n for n in sizes if n <= 10**5]
    config = bench.BenchmarkConfig(
        examples=args.examples or example_ids(),
        sample_sizes=tuple(sorted(set(sizes))),
        repetitions=args.repetitions,
        algorithms=tuple(args.algorithms),
        master_seed=args.seed,
        triplet_scheme=args.scheme,
        em_max_iter=args.em_max_iter,
        em_tol=args.em_tol,
        output_path=args.out,
        spectral=_spectral_opts(args),
        jobs=args.jobs,
    )
    for ref in config.examples:
        resolve_example(ref)

    def progress(recs):
        r = recs[0]
        print(f"{r.example_id} N={r.N} rep={r.rep} done", file=sys.stderr)

    records = bench.run_benchmark(config, progress=None if args.quiet else progress)
    if not args.out:
        _emit(_csv([r.to_row() for r in records]), None)
    n_err = sum(bool(r.error_tag) for r in records)
    print(f"{len(records)} records, {n_err} with errors", file=sys.stderr)


def cmd_summarize(args):
    records = bench.read_records(args.input)
    if not records:
        raise UsageError(f"{args.input} has no records")
    summary = bench.summarize(records, table_algorithm=args.table_algorithm, exclude_invalid=args.exclude_invalid)
    if args.out:
        ext = "json" if args.format == "json" else "csv"
        bench.write_table(summary.mse_table, f"{args.out}_mse.{ext}", args.format)
        bench.write_table(summary.validity_table, f"{args.out}_invalid.{ext}", args.format)
        bench.write_table(summary.cond_table, f"{args.out}_cond.{ext}", args.format)
    if args.format == "json" and not args.out:
        _emit(_json(summary.to_dict()), None)
        return
    print(f"examples sorted by mean mse_O ({args.table_algorithm}) at N={summary.table_N}:")
    print(f"{'example':<24}{'mse_O':>14}{'cond(OT)':>12}")
    for row in summary.cond_table:
        print(f"{row['example_id']:<24}{row['mse_O']:>14.3e}{row['cond_OT']:>12.1f}")
    print(f"Spearman rank correlation cond(OT) vs mse_O: {summary.spearman:.3f}")
    print("invalid fraction (SL; label: fraction of runs with negative or complex entries, or failures):")
    for row in summary.validity_table:
        print(f"  {row['example_id']:<22} N={row['N']:<10} {row['invalid_fraction']:.2f}")


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def _add_model_args(p):
    p.add_argument("--model", help="model JSON file")
    p.add_argument("--example", help=f"bundled example id ({', '.join(example_ids())})")


def _add_spectral_args(p):
    d = SpectralOptions()
    p.add_argument("--pinv-tol", type=float, default=d.pinv_tol)
    p.add_argument("--eig-gap-tol", type=float, default=d.eig_gap_tol)
    p.add_argument("--eig-gap-target", type=float, default=d.eig_gap_target)
    p.add_argument("--max-resamples", type=int, default=d.max_resamples)
    p.add_argument("--tol-neg", type=float, default=d.tol_neg)
    p.add_argument("--tol-imag", type=float, default=d.tol_imag)


def _add_common(p, fmt_default="json"):
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="output file (default: stdout)")
    p.add_argument("--format", choices=("csv", "json"), default=fmt_default)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="spectralhmm",
        description="Spectral learning vs. Baum-Welch for discrete hidden Markov models.",
        formatter_class=argparse.ArgumentDefaultsHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="sample an observation sequence")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--length", type=int, required=True)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("moments", help="empirical or exact moments")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--sequence", help="sequence file (JSON or one-symbol-per-line CSV)")
    p.add_argument("--scheme", choices=sorted(TRIPLET_SCHEMES), default="sliding")
    p.set_defaults(func=cmd_moments)

    p = sub.add_parser("sl", help="spectral learning estimate")
    _add_model_args(p)
    _add_common(p)
    _add_spectral_args(p)
    p.add_argument("--moments", help="moments JSON file")
    p.add_argument("--sequence", help="sequence file")
    p.add_argument("--scheme", choices=sorted(TRIPLET_SCHEMES), default="sliding")
    p.add_argument("--states", type=int, help="number of hidden states X")
    p.set_defaults(func=cmd_sl)

    p = sub.add_parser("em", help="Baum-Welch estimate")
    _add_model_args(p)
    _add_common(p)
    p.add_argument("--sequence", required=True)
    p.add_argument("--states", type=int)
    p.add_argument("--model-init", choices=("random", "true", "file"), default="random")
    p.add_argument("--init-file")
    p.add_argument("--max-iter", type=int, default=500)
    p.add_argument("--tol", type=float, default=1e-6)
    p.set_defaults(func=cmd_em)

    p = sub.add_parser("cond", help="cond(OT) of a model or of every bundled example")
    _add_model_args(p)
    _add_common(p, fmt_default="csv")
    p.add_argument("--all", action="store_true")
    p.set_defaults(func=cmd_cond)

    p = sub.add_parser("bench", help="sample-size sweep")
    _add_common(p, fmt_default="csv")
    _add_spectral_args(p)
    p.add_argument("--examples", nargs="+", help="bundled ids or model files (default: all bundled)")
    p.add_argument("--sample-sizes", type=int, nargs="+")
    p.add_argument("--quick", action="store_true", help="cap sample sizes at 1e5")
    p.add_argument("--repetitions", type=int, default=20)
    p.add_argument("--algorithms", nargs="+", choices=bench.ALGORITHMS, default=["SL"])
    p.add_argument("--scheme", choices=sorted(TRIPLET_SCHEMES), default="sliding")
    p.add_argument("--em-max-iter", type=int, default=500)
    p.add_argument("--em-tol", type=float, default=1e-6)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("summarize", help="summary tables from a bench CSV")
    _add_common(p, fmt_default="csv")
    p.add_argument("--input", required=True, help="bench CSV")
    p.add_argument("--table-algorithm", choices=bench.ALGORITHMS, default="SL")
    p.add_argument("--exclude-invalid", action="store_true", help="drop invalid estimates from MSE means")
    p.set_defaults(func=cmd_summarize)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ModelValidationError as exc:
        report = exc.report.to_dict() if exc.report is not None else None
        print(json.dumps({"error": str(exc), "report": report}, indent=2), file=sys.stderr)
        return 2
    except (UsageError, HmmError, KeyError, OSError, ValueError) as exc:
        print(f"spectralhmm {args.command}: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
