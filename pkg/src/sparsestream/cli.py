"""Command-line interface.

Exit codes: 0 success, 2 invalid input or flags, 1 runtime failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import os
import sys
import tempfile
from pathlib import Path


from . import __version__
from .data import MaskSpec, dumps_csv, generate_synthetic, load_csv, sparsify, stream_columns
from .errors import ValidationError
from .evaluation import cross_validate, wilcoxon_signed_ranks
from .fuzzy import AlphaBand, TrapezoidParams
from .lfa import LfaConfig
from .selector import SelectorConfig, run, selection_to_dict

log = logging.getLogger("sparsestream")

EXIT_OK, EXIT_RUNTIME, EXIT_INVALID = 0, 1, 2
SEED_ENV = "OSFSU_SEED"


def _default_seed() -> int:
    raw = os.environ.get(SEED_ENV)
    if raw is None:
        return 0
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"{SEED_ENV} must be an integer, got {raw!r}") from None


def write_atomic(path, text: str) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _dumps(obj) -> str:
    return json.dumps(obj, indent=2, sort_keys=False) + "\n"


def parse_sweep(text: str) -> list[float]:
    """``start:stop:step`` inclusive of both ends, snapped to a 1e-9 grid."""
    try:
        start, stop, step = (float(p) for p in text.split(":"))
    except ValueError:
        raise ValidationError(f"sweep must look like start:stop:step, got {text!r}") from None
    if step <= 0 or stop < start:
        raise ValidationError(f"sweep needs step > 0 and stop >= start, got {text!r}")
    count = math.floor((stop - start) / step + 1e-9) + 1
    return [round(start + i * step, 9) for i in range(count)]


def _sibling(out: Path, suffix: str) -> Path:
    return out.with_name(out.stem + suffix)


# -- commands -----------------------------------------------------------------

def cmd_synth(args) -> int:
    d, truth = generate_synthetic(args.instances, args.features, args.relevant, args.noise, args.seed)
    out = Path(args.out)
    write_atomic(out, dumps_csv(d))
    write_atomic(_sibling(out, ".truth.json"), truth.to_json() + "\n")
    log.info("wrote %s (%d x %d), relevant columns %s", out, d.M, d.T, list(truth.relevant_indices))
    return EXIT_OK


def cmd_mask(args) -> int:
    d = load_csv(args.input)
    masked = sparsify(d, MaskSpec(args.rate, args.seed))
    write_atomic(args.out, dumps_csv(masked))
    added = int(masked.missing_mask.sum() - d.missing_mask.sum())
    log.info("masked %d cells into %s", added, args.out)
    return EXIT_OK


def selector_config(args) -> SelectorConfig:
    lfa = LfaConfig(
        d=args.latent_dim, lam=args.lam, eta=args.eta, lmax=args.lmax, tol=args.tol,
        init_scale=args.init_scale,
    )
    return SelectorConfig(
        block_size=args.block_size,
        lfa=lfa,
        band=AlphaBand(args.alpha_min, args.alpha_max),
        trapezoid=TrapezoidParams.parse(args.trapezoid),
        k_max=args.max_cond,
        radius=args.radius,
        seed=args.seed,
        discrete=args.discrete,
        keep_observed=not args.reconstruct_observed,
    )


def cmd_select(args) -> int:
    d = load_csv(args.input)
    cfg = selector_config(args)
    state = run(stream_columns(d), d.labels, cfg)
    result = selection_to_dict(state, cfg)
    out = Path(args.out)
    write_atomic(out, _dumps(result))
    if args.trace is not None:
        trace_path = Path(args.trace) if args.trace else _sibling(out, ".trace.jsonl")
        lines = (json.dumps(r.to_dict()) for r in state.trace)
        write_atomic(trace_path, "".join(line + "\n" for line in lines))
    log.info("selected %d of %d columns: %s", len(state.selected), d.T, state.indices)
    return EXIT_OK


def cmd_eval(args) -> int:
    d = load_csv(args.input)
    cfg = selector_config(args)
    thetas = parse_sweep(args.sweep) if args.sweep else [args.rate]
    reports = []
    for theta in thetas:
        rep = cross_validate(d, cfg, theta, args.folds, args.knn, args.seed, jobs=args.jobs)
        log.info("theta=%g mean accuracy %.4f", theta, rep.mean)
        reports.append(rep)
    out = Path(args.out)
    if args.sweep:
        write_atomic(out, _dumps({"sweep": args.sweep, "reports": [r.to_dict() for r in reports]}))
    else:
        write_atomic(out, _dumps(reports[0].to_dict()))
    csv_path = args.csv or (_sibling(out, ".csv") if args.sweep else None)
    if csv_path:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["theta", "fold", "accuracy", "n_selected"])
        for rep in reports:
            w.writerows(rep.csv_rows())
        write_atomic(csv_path, buf.getvalue())
    return EXIT_OK


def read_values(path) -> list[float]:
    """Numbers separated by newlines and/or commas; blank lines and ``#`` comments skipped."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            for tok in line.split(","):
                tok = tok.strip()
                if not tok:
                    continue
                try:
                    values.append(float(tok))
                except ValueError:
                    raise ValidationError(f"{path}:{lineno}: not a number: {tok!r}") from None
    return values


def cmd_wilcoxon(args) -> int:
    a, b = read_values(args.a), read_values(args.b)
    if len(a) != len(b):
        raise ValidationError(f"length mismatch: {len(a)} vs {len(b)} values")
    res = wilcoxon_signed_ranks(a, b, args.alpha)
    decision = "reject" if res.reject else "accept"
    print(f"R+ = {res.r_plus:g}")
    print(f"R- = {res.r_minus:g}")
    print(f"Rm = {res.r_m:g}")
    print(f"N = {res.n_effective}")
    print(f"z = {res.z:.4f}")
    print(f"critical = -{res.critical:.2f}")
    print(f"decision = {decision}" + (" (no non-zero differences)" if res.degenerate else ""))
    if args.out:
        write_atomic(args.out, _dumps({**res.to_dict(), "decision": decision}))
    return EXIT_OK


# -- parser -------------------------------------------------------------------

def _add_selector_flags(p):
    g = p.add_argument_group("selector")
    g.add_argument("--block-size", type=int, default=15)
    g.add_argument("--latent-dim", type=int, default=5)
    g.add_argument("--lambda", dest="lam", type=float, default=0.01)
    g.add_argument("--eta", type=float, default=1e-5)
    g.add_argument("--lmax", type=int, default=1000)
    g.add_argument("--tol", type=float, default=1e-5)
    g.add_argument("--init-scale", type=float, default=0.1)
    g.add_argument("--alpha-min", type=float, default=0.01)
    g.add_argument("--alpha-max", type=float, default=0.1)
    g.add_argument("--trapezoid", default="0,0.5,0.9,1",
                   help="a,b,c,d of the trapezoid mapping block missing rate to threshold")
    g.add_argument("--radius", type=float, default=0.15)
    g.add_argument("--max-cond", type=int, default=3)
    g.add_argument("--discrete", action="store_true", help="use the G2 test instead of Fisher's z")
    g.add_argument("--reconstruct-observed", action="store_true",
                   help="replace observed cells by their low-rank reconstruction too")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="sparsestream", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--seed", type=int, default=None, help=f"defaults to ${SEED_ENV} or 0")
        p.add_argument("--out", required=out_required)

    p = sub.add_parser("synth", help="write a synthetic dataset and its ground truth")
    p.add_argument("--instances", type=int, default=200)
    p.add_argument("--features", type=int, default=50)
    p.add_argument("--relevant", type=int, default=3)
    p.add_argument("--noise", type=float, default=0.1)
    common(p)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("mask", help="blank a fraction of feature cells")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--rate", type=float, required=True)
    common(p)
    p.set_defaults(func=cmd_mask)

    p = sub.add_parser("select", help="run online selection over the dataset's columns")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--trace", nargs="?", const="", default=None,
                   help="write a per-column JSONL trace (default path: <out>.trace.jsonl)")
    _add_selector_flags(p)
    common(p)
    p.set_defaults(func=cmd_select)

    p = sub.add_parser("eval", help="cross-validated KNN accuracy under training-set masking")
    p.add_argument("--in", dest="input", required=True)
    rate = p.add_mutually_exclusive_group()
    rate.add_argument("--rate", type=float, default=0.1)
    rate.add_argument("--sweep", help="start:stop:step over missing rates, e.g. 0.1:0.9:0.1")
    p.add_argument("--folds", type=int, default=5)
    p.add_argument("--knn", type=int, default=3)
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--csv", help="plot-ready CSV (theta, fold, accuracy, n_selected)")
    _add_selector_flags(p)
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("wilcoxon", help="signed-ranks test on two paired value files")
    p.add_argument("a")
    p.add_argument("b")
    p.add_argument("--alpha", type=float, default=0.1)
    p.add_argument("--out")
    p.set_defaults(func=cmd_wilcoxon)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if hasattr(args, "seed") and args.seed is None:
            args.seed = _default_seed()
        return args.func(args)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - top-level reporter
        log.debug("unhandled", exc_info=True)
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
