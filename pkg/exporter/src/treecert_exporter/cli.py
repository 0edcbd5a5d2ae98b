"""Command-line exporter.

Loads a pickled scikit-learn classifier, writes it in the treecert text
format, and by default cross-checks the file by sampling inputs and
comparing ``treecert predict`` against the source model.

Exit codes: 0 exported (and equivalent when checked), 1 the equivalence
check found disagreements, 64 usage or input errors.
"""
from __future__ import annotations

import argparse
import pickle
import sys
from pathlib import Path

from .export import (
    DEFAULT_TREECERT,
    ExportConfig,
    ExportError,
    check_equivalence,
    export_model,
)

EXIT_OK = 0
EXIT_MISMATCH = 1
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise ExportError(message)


def _load_source(path: Path):
    try:
        blob = path.read_bytes()
    except OSError as exc:
        raise ExportError(f"cannot read source model {path}: {exc}") from None
    try:
        import joblib
        return joblib.load(path)
    except Exception:
        pass
    try:
        return pickle.loads(blob)
    except Exception as exc:
        raise ExportError(f"cannot unpickle source model {path}: {exc}") from None


def _parse_range(raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise ExportError("--range takes LO:HI")
    try:
        lo, hi = float(parts[0]), float(parts[1])
    except ValueError:
        raise ExportError(f"--range bounds are not numbers: {raw!r}") from None
    if lo >= hi:
        raise ExportError("--range lower bound must be below the upper bound")
    return lo, hi


def build_parser() -> _Parser:
    parser = _Parser(prog="treecert-export",
                     description="Export scikit-learn ensembles for treecert")
    parser.add_argument("--source", required=True, type=Path,
                        help="pickled or joblib-dumped fitted classifier")
    parser.add_argument("--output", required=True, type=Path,
                        help="destination model file")
    parser.add_argument("--post", default=None,
                        help="post-processing kind; defaults per model family")
    parser.add_argument("--negate-leaves", action="store_true",
                        help="flip the sign of every leaf component")
    parser.add_argument("--check", dest="check", action="store_true",
                        default=True, help="sample-check the export (default)")
    parser.add_argument("--no-check", dest="check", action="store_false")
    parser.add_argument("--samples", type=int, default=1000,
                        help="equivalence sample count")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--range", dest="feature_range", default=None,
                        help="sample inputs from LO:HI on every feature; "
                             "write --range=-2:5 when LO is negative")
    parser.add_argument("--treecert", default=None,
                        help="verifier command for the cross-check")
    return parser


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
        if args.samples <= 0:
            raise ExportError("--samples must be positive")
        model = _load_source(args.source)
        bounds = None
        if args.feature_range is not None:
            lo, hi = _parse_range(args.feature_range)
            n = int(getattr(model, "n_features_in_", 0))
            if n <= 0:
                raise ExportError("source model is not fitted")
            bounds = tuple((lo, hi) for _ in range(n))
        cfg = ExportConfig(model=model, post_process=args.post,
                           negate_leaves=args.negate_leaves,
                           output=args.output, feature_bounds=bounds)
        export_model(cfg)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"wrote {args.output}")
    if not args.check:
        return EXIT_OK

    command = DEFAULT_TREECERT if args.treecert is None else \
        tuple(args.treecert.split())
    try:
        report = check_equivalence(cfg, sample_count=args.samples,
                                   seed=args.seed, command=command)
    except ExportError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    print(f"checked {report.samples} samples: "
          f"{report.class_disagreements} class disagreements, "
          f"max score deviation {report.max_score_deviation:.3g}")
    if report.ok:
        print("result: equivalent")
        return EXIT_OK
    if report.first_disagreement is not None:
        print(f"first disagreement at sample {report.first_disagreement}")
    print("result: mismatch")
    return EXIT_MISMATCH


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
