"""Command-line frontend.

Four subcommands: ``verify-robustness`` checks a dataset of labeled
samples under L-infinity perturbation, ``verify-property`` checks a
property file over its whole input region, ``validate-translation``
round-trips a count-leaf model file, and ``predict`` prints concrete
model outputs for external cross-checks.

Exit codes: 0 all verified / valid, 1 something was falsified, 2 only
timeouts stood in the way of full verification, 64 usage or input-data
errors.  Reports go to stdout (or ``--output``); diagnostics and the
measurement hint go to stderr.  Peak-memory measurement is left to
external tooling such as GNU time, which sees the whole process; the
hint line shows the invocation.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from dataclasses import dataclass
from pathlib import Path

from .boxes import Box, Interval
from .modelio import (
    Dataset,
    FormatError,
    parse_counts,
    parse_dataset,
    parse_model,
    parse_property,
    roundtrip_validate,
)
from .parallel import (
    BatchReport,
    ItemOutcome,
    is_robust_parallel,
    verify_property_parallel,
)
from .trees import Ensemble, classify, ensemble_predict

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_TIMEOUT = 2
EXIT_USAGE = 64

JOBS_ENV_VAR = "TREECERT_JOBS"


class UsageError(Exception):
    """Bad flags or unusable input data; maps to exit code 64."""


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):  # noqa: A003 - argparse API
        raise UsageError(message)


@dataclass(frozen=True, slots=True)
class RunConfig:
    """Everything a command needs, resolved from flags and environment."""

    command: str
    model: Path
    dataset: Path | None = None
    property_path: Path | None = None
    epsilon: float = 1.0
    timeout: float = 60.0
    jobs: int = 1
    split: int = 1
    clamp: tuple[float, float] | None = None
    format: str = "human"
    output: Path | None = None
    samples: int = 1000

    def __post_init__(self):
        if self.epsilon <= 0:
            raise UsageError("--epsilon must be positive")
        if self.timeout <= 0:
            raise UsageError("--timeout must be positive")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")
        if self.split < 1:
            raise UsageError("--split must be at least 1")
        if self.clamp is not None and not self.clamp[0] <= self.clamp[1]:
            raise UsageError("--clamp lower bound exceeds upper bound")


def _default_jobs() -> int:
    raw = os.environ.get(JOBS_ENV_VAR)
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"{JOBS_ENV_VAR} is not an integer: {raw!r}") from None
    return jobs


def _parse_clamp(raw: str) -> tuple[float, float]:
    parts = raw.split(":")
    if len(parts) != 2:
        raise UsageError("--clamp takes LO:HI")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise UsageError(f"--clamp bounds are not numbers: {raw!r}") from None


def _read(path: Path, what: str) -> str:
    try:
        return path.read_text()
    except OSError as exc:
        raise UsageError(f"cannot read {what} {path}: {exc}") from None


def _load_model(path: Path) -> Ensemble:
    try:
        return parse_model(_read(path, "model"))
    except FormatError as exc:
        raise UsageError(f"model {path}: {exc}") from None


def _load_dataset(path: Path, ens: Ensemble) -> Dataset:
    try:
        ds = parse_dataset(_read(path, "dataset"))
    except FormatError as exc:
        raise UsageError(f"dataset {path}: {exc}") from None
    if ds.n_features != ens.n_features:
        raise UsageError(
            f"dataset has {ds.n_features} features, model expects {ens.n_features}")
    for i, (label, _) in enumerate(ds.samples):
        if label > ens.n_outputs:
            raise UsageError(
                f"dataset sample {i} has label {label}, model has "
                f"{ens.n_outputs} classes")
    return ds


def _emit(cfg: RunConfig, text: str) -> None:
    if cfg.output is not None:
        cfg.output.write_text(text)
    else:
        sys.stdout.write(text)


def _hint(cfg: RunConfig, argv_hint: str) -> None:
    print(
        "hint: for peak memory, run under GNU time: "
        f"/usr/bin/time -v treecert {argv_hint}",
        file=sys.stderr,
    )


def _fmt_floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


_OUTCOME_WORDS = {
    ItemOutcome.VERIFIED: "verified",
    ItemOutcome.FALSIFIED: "falsified",
    ItemOutcome.TIMEOUT: "timeout",
    ItemOutcome.ERROR: "error",
}


def _item_records(report: BatchReport) -> list[str]:
    rows = []
    for r in report.results:
        fields = [f"index={r.index}", f"verdict={_OUTCOME_WORDS[r.outcome]}",
                  f"time={r.wall_time!r}"]
        if r.stats is not None:
            fields.append(f"checks={r.stats.checker_calls}")
            fields.append(f"depth={r.stats.max_recursion_depth}")
        if r.counterexample is not None:
            fields.append(f"witness={_fmt_floats(r.counterexample.witness)}")
            fields.append(f"output={_fmt_floats(r.counterexample.output)}")
        if r.error is not None:
            fields.append("error=" + r.error.replace("\t", " ").replace("\n", " "))
        rows.append("\t".join(["item"] + fields))
    return rows


def _batch_record(report: BatchReport, wall: float) -> str:
    return "\t".join([
        "batch",
        f"items={report.n_items}",
        f"verified={report.n_verified}",
        f"falsified={report.n_falsified}",
        f"timeout={report.n_timeout}",
        f"errors={report.n_error}",
        f"wall={wall!r}",
        f"jobs={report.jobs}",
    ])


def parse_records(text: str) -> list[tuple[str, dict[str, str]]]:
    """Parse the machine-readable report format back into records."""
    out = []
    for line in text.splitlines():
        if not line.strip():
            continue
        parts = line.split("\t")
        fields = {}
        for part in parts[1:]:
            key, sep, value = part.partition("=")
            if not sep:
                raise ValueError(f"malformed record field {part!r}")
            fields[key] = value
        out.append((parts[0], fields))
    return out


def _exit_code(report: BatchReport) -> int:
    if report.n_error:
        return EXIT_USAGE
    if report.n_falsified:
        return EXIT_FALSIFIED
    if report.n_timeout:
        return EXIT_TIMEOUT
    return EXIT_OK


def cmd_verify_robustness(cfg: RunConfig) -> int:
    start = time.monotonic()
    ens = _load_model(cfg.model)
    if cfg.dataset is None:
        raise UsageError("verify-robustness needs --dataset")
    ds = _load_dataset(cfg.dataset, ens)
    domain = None
    if cfg.clamp is not None:
        lo, hi = cfg.clamp
        domain = Box(tuple(Interval.closed(lo, hi) for _ in range(ens.n_features)))
    samples = [(x, label) for label, x in ds.samples]
    report = is_robust_parallel(
        ens, samples, cfg.epsilon, jobs=cfg.jobs, timeout=cfg.timeout,
        domain=domain)
    wall = time.monotonic() - start
    if cfg.format == "records":
        lines = _item_records(report) + [_batch_record(report, wall)]
    else:
        lines = []
        for r in report.results:
            line = f"sample {r.index}: {_OUTCOME_WORDS[r.outcome]} {r.wall_time:.3f}s"
            if r.counterexample is not None:
                line += f" witness {_fmt_floats(r.counterexample.witness)}"
            if r.error is not None:
                line += f" ({r.error})"
            lines.append(line)
        lines.append(
            f"summary: robust {report.n_verified} not-robust {report.n_falsified} "
            f"unsolved {report.n_timeout} errors {report.n_error} "
            f"total {wall:.3f}s")
    _emit(cfg, "\n".join(lines) + "\n")
    for r in report.results:
        if r.error is not None:
            print(f"sample {r.index} failed: {r.error}", file=sys.stderr)
    return _exit_code(report)


def cmd_verify_property(cfg: RunConfig) -> int:
    start = time.monotonic()
    ens = _load_model(cfg.model)
    if cfg.property_path is None:
        raise UsageError("verify-property needs --property")
    try:
        spec = parse_property(_read(cfg.property_path, "property"))
    except FormatError as exc:
        raise UsageError(f"property {cfg.property_path}: {exc}") from None
    try:
        report = verify_property_parallel(
            ens, spec, split=cfg.split, jobs=cfg.jobs, timeout=cfg.timeout)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    wall = time.monotonic() - start
    overall = report.overall
    words = {ItemOutcome.VERIFIED: "pass", ItemOutcome.FALSIFIED: "fail",
             ItemOutcome.TIMEOUT: "timeout", ItemOutcome.ERROR: "error"}
    witness = next(
        (r.counterexample for r in report.results if r.counterexample is not None),
        None)
    if cfg.format == "records":
        lines = _item_records(report)
        lines.append(_batch_record(report, wall))
        lines.append(f"property\tresult={words[overall]}\twall={wall!r}")
    else:
        lines = [
            f"piece {r.index}: {_OUTCOME_WORDS[r.outcome]} {r.wall_time:.3f}s"
            for r in report.results
        ]
        lines.append(f"result: {words[overall]} wall {wall:.3f}s")
        if witness is not None:
            lines.append(f"witness: {_fmt_floats(witness.witness)}")
            lines.append(f"witness-output: {_fmt_floats(witness.output)}")
    _emit(cfg, "\n".join(lines) + "\n")
    return _exit_code(report)


def cmd_validate_translation(cfg: RunConfig) -> int:
    text = _read(cfg.model, "model")
    try:
        report = roundtrip_validate(text, samples=cfg.samples)
    except FormatError as exc:
        raise UsageError(f"model {cfg.model}: {exc}") from None
    lines = []
    if cfg.format == "records":
        for d in report.discrepancies:
            lines.append("\t".join([
                "discrepancy", f"tree={d.tree_index}", f"path={d.node_path}",
                f"field={d.field}", f"left={d.left}", f"right={d.right}"]))
        bytes_word = {True: "yes", False: "no", None: "unknown"}[report.bytes_identical]
        lines.append("\t".join([
            "validation", f"discrepancies={len(report.discrepancies)}",
            f"bytes-identical={bytes_word}",
            f"semantic-checked={report.semantic_checked}",
            f"semantic-mismatches={report.semantic_mismatches}",
            f"result={'ok' if report.ok else 'corrupt'}"]))
    else:
        for d in report.discrepancies:
            lines.append(
                f"discrepancy: tree {d.tree_index} path {d.node_path or '<root>'} "
                f"field {d.field}: {d.left!r} vs {d.right!r}")
        bytes_word = {True: "yes", False: "no", None: "not-checked"}[report.bytes_identical]
        lines.append(f"bytes-identical: {bytes_word}")
        lines.append(
            f"semantic: {report.semantic_checked - report.semantic_mismatches}"
            f"/{report.semantic_checked} agree")
        lines.append(f"result: {'ok' if report.ok else 'corrupt'}")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK if report.ok else EXIT_FALSIFIED


def cmd_predict(cfg: RunConfig) -> int:
    ens = _load_model(cfg.model)
    if cfg.dataset is None:
        raise UsageError("predict needs --dataset")
    ds = _load_dataset(cfg.dataset, ens)
    lines = []
    for i, (label, x) in enumerate(ds.samples):
        scores = ensemble_predict(ens, x)
        cls = classify(ens, x)
        if cfg.format == "records":
            lines.append("\t".join([
                "prediction", f"index={i}", f"label={label}", f"class={cls}",
                f"scores={_fmt_floats(scores)}"]))
        else:
            lines.append(f"sample {i}: class {cls} scores {_fmt_floats(scores)}")
    _emit(cfg, "\n".join(lines) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="treecert",
                     description="Formal verification of tree ensembles")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: _Parser, dataset=False, prop=False, verification=False):
        p.add_argument("--model", required=True, type=Path)
        if dataset:
            p.add_argument("--dataset", required=True, type=Path)
        if prop:
            p.add_argument("--property", dest="property_path", required=True,
                           type=Path)
        if verification:
            p.add_argument("--timeout", type=float, default=60.0,
                           help="per-item deadline in seconds (default 60)")
            p.add_argument("--jobs", type=int, default=None,
                           help=f"worker processes (default ${JOBS_ENV_VAR} or 1)")
        p.add_argument("--format", choices=("human", "records"), default="human")
        p.add_argument("--output", type=Path, default=None)

    p = sub.add_parser("verify-robustness",
                       help="verify labels under L-infinity perturbation")
    common(p, dataset=True, verification=True)
    p.add_argument("--epsilon", type=float, default=1.0,
                   help="perturbation radius (default 1)")
    p.add_argument("--clamp", type=str, default=None, metavar="LO:HI",
                   help="clamp perturbations to a feature range")

    p = sub.add_parser("verify-property", help="verify a property file")
    common(p, prop=True, verification=True)
    p.add_argument("--split", type=int, default=1,
                   help="cut the input region into this many work items")

    p = sub.add_parser("validate-translation",
                       help="round-trip check a count-leaf model file")
    common(p)
    p.add_argument("--samples", type=int, default=1000,
                   help="semantic spot-check sample count (default 1000)")

    p = sub.add_parser("predict", help="print concrete outputs for a dataset")
    common(p, dataset=True)
    return parser


_COMMANDS = {
    "verify-robustness": cmd_verify_robustness,
    "verify-property": cmd_verify_property,
    "validate-translation": cmd_validate_translation,
    "predict": cmd_predict,
}


def main(argv: list[str] | None = None) -> int:
    if argv is None:
        argv = sys.argv[1:]
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
        jobs = getattr(ns, "jobs", None)
        if jobs is None:
            jobs = _default_jobs()
        clamp = getattr(ns, "clamp", None)
        cfg = RunConfig(
            command=ns.command,
            model=ns.model,
            dataset=getattr(ns, "dataset", None),
            property_path=getattr(ns, "property_path", None),
            epsilon=getattr(ns, "epsilon", 1.0),
            timeout=getattr(ns, "timeout", 60.0),
            jobs=jobs,
            split=getattr(ns, "split", 1),
            clamp=_parse_clamp(clamp) if clamp is not None else None,
            format=ns.format,
            output=ns.output,
            samples=getattr(ns, "samples", 1000),
        )
        if cfg.command in ("verify-robustness", "verify-property"):
            _hint(cfg, " ".join(argv))
        return _COMMANDS[cfg.command](cfg)
    except UsageError as exc:
        print(f"treecert: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entrypoint()
