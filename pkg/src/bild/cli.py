"""Command-line interface over traces, losses, and the experiment harness.

Subcommands mirror the library: analyze, loss, overlap, distill, compare,
sweep, bench. Every subcommand accepts --json for machine-readable output
with a stable schema (documented in the README). Exit codes: 0 success,
1 usage error, 2 file or config error, 3 numeric or training error.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from dataclasses import replace

import numpy as np

from . import __version__
from .config import ConfigError, DistillConfig, parse_config
from .losses import LossParams, Method, sequence_loss
from .metrics import kurtosis, overlap_at_k, topk_mass
from .trace import FormatError, read_dump, write_dump
from .harness import (
    bench_losses,
    TrainingError,
    distill_student,
    evaluate_accuracy,
    generate_corpus,
    model_trace,
    run_comparison,
    run_sweep,
    split_corpus,
    train_teacher,
)
from .harness.training import _student_config, _teacher_config

__all__ = ["main", "build_parser"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_FILE = 2
EXIT_NUMERIC = 3

_DEFAULT_ANALYZE_KS = (8, 64, 512, 1024)


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}")


def _csv_ints(text: str) -> list[int]:
    try:
        values = [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected a non-empty list")
    return values


def _csv_floats(text: str) -> list[float]:
    try:
        values = [float(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("expected a non-empty list")
    return values


def _csv_methods(text: str) -> list[Method]:
    out = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        try:
            out.append(Method(part))
        except ValueError:
            names = ", ".join(m.value for m in Method)
            raise argparse.ArgumentTypeError(f"unknown method {part!r}; expected one of {names}")
    if not out:
        raise argparse.ArgumentTypeError("expected a non-empty method list")
    return out


def _method_arg(text: str) -> Method:
    try:
        return Method(text.strip())
    except ValueError:
        names = ", ".join(m.value for m in Method)
        raise argparse.ArgumentTypeError(f"unknown method {text!r}; expected one of {names}")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="bild", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"bild {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("analyze", help="tail diagnostics of a logits dump")
    p.add_argument("file")
    p.add_argument("--k", type=_csv_ints, default=list(_DEFAULT_ANALYZE_KS),
                   metavar="K1,K2,...", help="top-k mass columns (default 8,64,512,1024)")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("loss", help="distillation loss between two dumps")
    p.add_argument("teacher")
    p.add_argument("student")
    p.add_argument("--method", type=_method_arg, default=Method.BILD,
                   help="one of " + ", ".join(m.value for m in Method))
    p.add_argument("--temperature", type=float, default=None)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--gradient", action="store_true",
                   help="include d(mean loss)/d(student logits); requires --json")
    p.add_argument("--json", action="store_true")

    p = sub.add_parser("overlap", help="top-k index agreement between two dumps")
    p.add_argument("teacher")
    p.add_argument("student")
    p.add_argument("--k", type=int, default=8)
    p.add_argument("--json", action="store_true")

    for name, help_text in (("distill", "train a student against a teacher"),
                            ("compare", "method comparison table"),
                            ("sweep", "re-distill over a parameter grid")):
        p = sub.add_parser(name, help=help_text)
        p.add_argument("--config", default=None,
                       help="key = value file; omitted means all defaults")
        p.add_argument("--seed", type=int, default=None, help="override the config seed")
        p.add_argument("--json", action="store_true")
        if name == "distill":
            p.add_argument("--dump-dir", default=None,
                           help="write held-out teacher/student traces here")
        if name == "compare":
            p.add_argument("--methods", type=_csv_methods,
                           default=[Method.VANILLA_KL, Method.REVERSE_KL,
                                    Method.TOPK_KL, Method.BILD])
        if name == "sweep":
            p.add_argument("--param", choices=("temperature", "k"), required=True)
            p.add_argument("--values", type=_csv_floats, default=None,
                           metavar="V1,V2,...",
                           help="grid values (default 1,2,3,4,5 for temperature; "
                                "2,4,8,16,32 for k)")

    p = sub.add_parser("bench", help="loss runtime table and scaling exponents")
    p.add_argument("--sizes", type=_csv_ints, default=[512])
    p.add_argument("--k-values", type=_csv_ints, default=[8, 16, 32, 64, 128])
    p.add_argument("--methods", type=_csv_methods, default=list(Method))
    p.add_argument("--repeats", type=int, default=30)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    return parser


def _emit(payload: dict, as_json: bool, table: str) -> None:
    if as_json:
        print(json.dumps(payload, indent=2))
    else:
        print(table, end="" if table.endswith("\n") else "\n")


def _config_dict(config: DistillConfig) -> dict:
    return {
        "method": config.loss.method.value,
        "temperature": config.loss.temperature,
        "k": config.loss.resolved_k,
        "epochs": config.epochs,
        "batch_size": config.batch_size,
        "learning_rate": config.learning_rate,
        "instruction_frac": config.instruction_frac,
        "seed": config.seed,
        "vocab_size": config.vocab_size,
        "teacher_layers": config.teacher_layers,
        "student_layers": config.student_layers,
        "hidden_dim": config.hidden_dim,
        "context_len": config.context_len,
    }


def _load_config(args) -> DistillConfig:
    config = parse_config(args.config) if args.config is not None else DistillConfig()
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    return config


def _cmd_analyze(args) -> int:
    ks = sorted(set(args.k))
    if ks[0] < 1:
        raise _UsageError(f"bild analyze: --k entries must be >= 1, got {ks[0]}")
    trace = read_dump(args.file)
    valid = [k for k in ks if k <= trace.vocab_size]
    rows = []
    for i in range(trace.num_positions):
        z = trace.values[i].astype(np.float64)
        rows.append({
            "position": i,
            "role": int(trace.role_mask[i]),
            "kurtosis": kurtosis(z),
            "topk_mass": {str(k): topk_mass(z, k) for k in valid},
        })
    payload = {
        "command": "analyze",
        "file": str(args.file),
        "num_positions": trace.num_positions,
        "vocab_size": trace.vocab_size,
        "k_values": ks,
        "per_position": rows,
        "summary": {
            "mean_kurtosis": float(np.mean([r["kurtosis"] for r in rows])),
            "mean_topk_mass": {str(k): float(np.mean([r["topk_mass"][str(k)] for r in rows]))
                               for k in valid},
        },
    }
    header = f"{'pos':>6} {'role':>4} {'kurtosis':>12}"
    header += "".join(f" {'mass@' + str(k):>12}" for k in ks)
    lines = [f"{args.file}: {trace.num_positions} positions, vocab {trace.vocab_size}", header]
    for r in rows:
        line = f"{r['position']:>6} {r['role']:>4} {r['kurtosis']:>12.4f}"
        for k in ks:
            mass = r["topk_mass"].get(str(k))
            line += f" {mass:>12.4f}" if mass is not None else f" {'-':>12}"
        lines.append(line)
    s = payload["summary"]
    line = f"{'mean':>6} {'':>4} {s['mean_kurtosis']:>12.4f}"
    for k in ks:
        mass = s["mean_topk_mass"].get(str(k))
        line += f" {mass:>12.4f}" if mass is not None else f" {'-':>12}"
    lines.append(line)
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_loss(args) -> int:
    if args.gradient and not args.json:
        raise _UsageError("bild loss: --gradient requires --json")
    if args.k is not None and args.k < 1:
        raise _UsageError(f"bild loss: --k must be >= 1, got {args.k}")
    if args.temperature is not None and not args.temperature > 0:
        raise _UsageError(f"bild loss: --temperature must be > 0, got {args.temperature}")
    teacher = read_dump(args.teacher)
    student = read_dump(args.student)
    temperature = args.temperature if args.temperature is not None else None
    kwargs = {"method": args.method}
    if temperature is not None:
        kwargs["temperature"] = temperature
    if args.k is not None:
        kwargs["k"] = args.k
    params = LossParams(**kwargs)
    requested_k = params.resolved_k
    effective_k = requested_k
    clamped = False
    if requested_k is not None and requested_k > teacher.vocab_size:
        effective_k = teacher.vocab_size
        clamped = True
        params = replace(params, k=effective_k)
    result = sequence_loss(teacher, student, params, want_gradient=args.gradient)
    degenerate = params.method in (Method.TLD, Method.SLD, Method.BILD) \
        and effective_k is not None and effective_k <= 2
    payload = {
        "command": "loss",
        "teacher": str(args.teacher),
        "student": str(args.student),
        "method": params.method.value,
        "temperature": params.temperature,
        "k": requested_k,
        "effective_k": effective_k,
        "num_positions": teacher.num_positions,
        "vocab_size": teacher.vocab_size,
        "mean": result.mean,
        "per_position": [float(v) for v in result.per_position],
        "degenerate": degenerate,
    }
    if args.gradient:
        payload["gradient"] = [[float(g) for g in row] for row in result.gradient]
    k_text = "-" if effective_k is None else str(effective_k)
    if clamped:
        k_text += f" (clamped from {requested_k})"
    lines = [
        f"method={params.method.value} temperature={params.temperature:g} k={k_text}",
        f"positions={teacher.num_positions} vocab={teacher.vocab_size}"
        + (" degenerate (loss is identically zero)" if degenerate else ""),
        f"mean loss = {result.mean:.10g}",
    ]
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_overlap(args) -> int:
    if args.k < 1:
        raise _UsageError(f"bild overlap: --k must be >= 1, got {args.k}")
    teacher = read_dump(args.teacher)
    student = read_dump(args.student)
    report = overlap_at_k(teacher, student, args.k)
    payload = {
        "command": "overlap",
        "teacher": str(args.teacher),
        "student": str(args.student),
        "k": report.k,
        "num_response_positions": int(report.per_position.size),
        "mean": report.mean,
        "per_position": [float(v) for v in report.per_position],
    }
    table = (f"overlap@{report.k} over {report.per_position.size} response positions: "
             f"{report.mean:.6f}")
    _emit(payload, args.json, table)
    return EXIT_OK


def _cmd_distill(args) -> int:
    config = _load_config(args)
    corpus = generate_corpus(config.seed, config.vocab_size,
                             context_len=config.context_len,
                             instruction_frac=config.instruction_frac)
    t0 = time.perf_counter()
    teacher = train_teacher(_teacher_config(config), corpus,
                            learning_rate=config.learning_rate,
                            batch_size=config.batch_size, seed=config.seed)
    student, log = distill_student(teacher, _student_config(config), config, corpus)
    seconds = time.perf_counter() - t0
    _, heldout = split_corpus(corpus)
    epoch_means = log.epoch_means()
    payload = {
        "command": "distill",
        "config": _config_dict(config),
        "steps": int(log.step_losses.size),
        "step_losses": [float(v) for v in log.step_losses],
        "epoch_mean_losses": [float(v) for v in epoch_means],
        "eval": {
            "overlap_at_1": log.overlap_at_1,
            "overlap_at_8": log.overlap_at_8,
            "accuracy": log.accuracy,
            "teacher_accuracy": evaluate_accuracy(teacher, heldout),
        },
        "seconds": seconds,
    }
    if args.dump_dir is not None:
        from pathlib import Path
        dump_dir = Path(args.dump_dir)
        dump_dir.mkdir(parents=True, exist_ok=True)
        teacher_path = dump_dir / "teacher.lgts"
        student_path = dump_dir / "student.lgts"
        write_dump(model_trace(teacher, heldout), teacher_path)
        write_dump(model_trace(student, heldout), student_path)
        payload["dumps"] = {"teacher": str(teacher_path), "student": str(student_path)}
    c = payload["config"]
    lines = [
        f"method={c['method']} temperature={c['temperature']:g} "
        f"k={c['k'] if c['k'] is not None else '-'} epochs={c['epochs']} seed={c['seed']}",
        f"loss: first epoch {epoch_means[0]:.6f}, last epoch {epoch_means[-1]:.6f}",
        f"held-out: overlap@1 {log.overlap_at_1:.4f}  overlap@8 {log.overlap_at_8:.4f}  "
        f"accuracy {log.accuracy:.4f}  (teacher {payload['eval']['teacher_accuracy']:.4f})",
        f"seconds: {seconds:.1f}",
    ]
    if "dumps" in payload:
        lines.append(f"dumps: {payload['dumps']['teacher']} {payload['dumps']['student']}")
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_compare(args) -> int:
    config = _load_config(args)
    table = run_comparison(args.methods, config)
    payload = {
        "command": "compare",
        "config": _config_dict(config),
        "methods": [m.value for m in args.methods],
        "teacher_accuracy": table.teacher_accuracy,
        "rows": [{
            "label": r.label,
            "accuracy": r.accuracy,
            "overlap_at_1": r.overlap_at_1,
            "overlap_at_8": r.overlap_at_8,
            "first_epoch_loss": r.first_epoch_loss,
            "last_epoch_loss": r.last_epoch_loss,
            "seconds": r.seconds,
        } for r in table.rows],
    }
    lines = [f"teacher accuracy: {table.teacher_accuracy:.4f}",
             f"{'label':<12} {'acc':>8} {'ov@1':>8} {'ov@8':>8} "
             f"{'loss0':>10} {'lossN':>10} {'sec':>7}"]
    for r in table.rows:
        l0 = f"{r.first_epoch_loss:.4f}" if r.first_epoch_loss is not None else "-"
        ln = f"{r.last_epoch_loss:.4f}" if r.last_epoch_loss is not None else "-"
        lines.append(f"{r.label:<12} {r.accuracy:>8.4f} {r.overlap_at_1:>8.4f} "
                     f"{r.overlap_at_8:>8.4f} {l0:>10} {ln:>10} {r.seconds:>7.1f}")
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_sweep(args) -> int:
    config = _load_config(args)
    if args.values is not None:
        values = args.values
    else:
        values = [1.0, 2.0, 3.0, 4.0, 5.0] if args.param == "temperature" \
            else [2, 4, 8, 16, 32]
    if args.param == "k":
        values = [int(v) for v in values]
    table = run_sweep(args.param, values, config)
    payload = {
        "command": "sweep",
        "param": table.param,
        "method": table.method,
        "config": _config_dict(config),
        "rows": [{
            "value": r.value,
            "diverged": r.diverged,
            "accuracy": None if r.diverged else r.accuracy,
            "overlap_at_1": None if r.diverged else r.overlap_at_1,
            "overlap_at_8": None if r.diverged else r.overlap_at_8,
            "last_epoch_loss": None if r.diverged else r.last_epoch_loss,
        } for r in table.rows],
    }
    lines = [f"sweep {table.param} with method={table.method}",
             f"{table.param:<12} {'acc':>8} {'ov@1':>8} {'ov@8':>8} {'lossN':>10}"]
    for r in table.rows:
        if r.diverged:
            lines.append(f"{r.value:<12g} {'diverged':>8} {'-':>8} {'-':>8} {'-':>10}")
        else:
            lines.append(f"{r.value:<12g} {r.accuracy:>8.4f} {r.overlap_at_1:>8.4f} "
                         f"{r.overlap_at_8:>8.4f} {r.last_epoch_loss:>10.4f}")
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


def _cmd_bench(args) -> int:
    if args.repeats < 1:
        raise _UsageError(f"bild bench: --repeats must be >= 1, got {args.repeats}")
    result = bench_losses(sizes=args.sizes, k_values=args.k_values,
                          methods=args.methods, repeats=args.repeats, seed=args.seed)
    payload = {
        "command": "bench",
        "sizes": list(result.sizes),
        "k_values": list(result.k_values),
        "methods": list(result.methods),
        "cells": [{"method": m, "size": n, "k": k, "seconds": s}
                  for (m, n, k), s in sorted(result.seconds.items())],
        "exponents": result.exponents,
    }
    lines = []
    for n in result.sizes:
        lines.append(f"vocab size {n} (microseconds per call)")
        header = f"{'method':<12}" + "".join(f" {'k=' + str(k):>10}" for k in result.k_values)
        lines.append(header + f" {'exponent':>10}")
        for m in result.methods:
            row = f"{m:<12}"
            for k in result.k_values:
                row += f" {result.seconds[(m, n, k)] * 1e6:>10.1f}"
            exp = result.exponents.get(m)
            row += f" {exp:>10.3f}" if exp is not None else f" {'-':>10}"
            lines.append(row)
    _emit(payload, args.json, "\n".join(lines))
    return EXIT_OK


_HANDLERS = {
    "analyze": _cmd_analyze,
    "loss": _cmd_loss,
    "overlap": _cmd_overlap,
    "distill": _cmd_distill,
    "compare": _cmd_compare,
    "sweep": _cmd_sweep,
    "bench": _cmd_bench,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        code = _HANDLERS[args.command](args)
        # Flush inside the try so a consumer that stopped reading
        # (e.g. `bild analyze ... | head`) is handled below rather than
        # erupting as "Exception ignored" during interpreter shutdown.
        sys.stdout.flush()
        return code
    except BrokenPipeError:
        devnull = os.open(os.devnull, os.O_WRONLY)
        os.dup2(devnull, sys.stdout.fileno())
        return EXIT_FILE
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, ConfigError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FILE
    except (TrainingError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
