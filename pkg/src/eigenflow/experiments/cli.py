"""
Command-line interface::

    eigenflow run --config exp.json
    eigenflow compare --theory theory.csv --mc mc.csv --tol z=3,frac=0.9
    eigenflow figure 4 --n 200 --seed 1 --out fig4

Exit codes: 0 success, 1 comparison failed, 2 configuration or input error,
3 numerical failure.
"""
from __future__ import annotations

import argparse
import sys
import traceback

from ..errors import ConfigError, InputError, NumericError
from .compare import compare
from .config import load_config
from .runner import figure_config, run

__all__ = ["main", "EXIT_OK", "EXIT_MISMATCH", "EXIT_CONFIG", "EXIT_NUMERIC"]

EXIT_OK, EXIT_MISMATCH, EXIT_CONFIG, EXIT_NUMERIC = 0, 1, 2, 3


def _parser():
    p = argparse.ArgumentParser(prog="eigenflow", description="Eigenvector overlap experiments.")
    sub = p.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run an experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", help="override the config's output_dir")
    c = sub.add_parser("compare", help="compare a theory CSV with a Monte Carlo CSV")
    c.add_argument("--theory", required=True)
    c.add_argument("--mc", required=True)
    c.add_argument("--tol", default="z=3", help="tolerance, e.g. 'z=3,frac=0.9' or 'abs=1e-3'")
    c.add_argument("--report", help="write the per-row report here")
    f = sub.add_parser("figure", help="reproduce one of the standard figures")
    f.add_argument("which", type=int, choices=(2, 3, 4))
    f.add_argument("--n", type=int, default=None, help="matrix size N")
    f.add_argument("--seed", type=int, default=None)
    f.add_argument("--samples", type=int, default=None, help="Monte Carlo samples")
    f.add_argument("--out", default=None)
    return p


def _where(exc):
    """``module.function`` of the innermost package frame of the traceback."""
    frames = [fr for fr in traceback.extract_tb(exc.__traceback__) if "eigenflow" in fr.filename]
    if not frames:
        return "eigenflow"
    fr = frames[-1]
    mod = fr.filename.replace("\\", "/").rsplit("eigenflow/", 1)[-1][:-3].replace("/", ".")
    return f"eigenflow.{mod}.{fr.name}"


def _summary_line(rec):
    items = ", ".join(f"{k}={v:.6g}" if isinstance(v, float) else f"{k}={v}"
                      for k, v in rec.summary.items() if not isinstance(v, (list, dict)))
    return f"{rec.experiment}: {items}" if items else rec.experiment


def _dispatch(args):
    if args.command == "run":
        cfg = load_config(args.config)
        if args.out:
            from dataclasses import replace
            cfg = replace(cfg, output_dir=args.out)
        rec = run(cfg)
        print(_summary_line(rec))
        print(f"wrote {len(rec.files)} files and run.json to {cfg.output_dir}")
        return EXIT_OK
    if args.command == "compare":
        rep = compare(args.theory, args.mc, args.tol)
        text = rep.text()
        if args.report:
            from .io import write_atomic
            write_atomic(args.report, text)
        print(text.rstrip().splitlines()[-1].lstrip("# "))
        return EXIT_OK if rep.passed else EXIT_MISMATCH
    cfg = figure_config(args.which, args.n, args.seed, args.samples, args.out)
    rec = run(cfg)
    print(_summary_line(rec))
    print(f"wrote {len(rec.files)} files and run.json to {cfg.output_dir}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        return _dispatch(args)
    except (ConfigError, InputError) as exc:
        print(f"eigenflow: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FileNotFoundError as exc:
        print(f"eigenflow: error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    except NumericError as exc:
        print(f"eigenflow: numerical failure in {_where(exc)}: {type(exc).__name__}: {exc}",
              file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
