"""Command-line interface.

Subcommands: simulate, oracle, estimate, curve, montecarlo, liv, baseline.
Every run writes a manifest next to each output file recording the command,
resolved configurations and their hash, the effective seed, and library
versions, so any artifact can be regenerated from its manifest alone.

Exit codes: 0 success, 2 validation problems (including bad flags), 3
numerical failures.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import pathlib
import platform
import sys
from dataclasses import replace
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import __version__
from .data import EstimationConfig, load_panel, save_panel
from .dgp import DgpSpec, oracle_ate, oracle_mtr, simulate
from .diagnostics import baseline_gformula, liv_decompose
from .effects import bootstrap_effect, check_sequence
from .errors import DynmteError, ValidationError
from .harness import McTarget, run_curve, run_mc, standard_targets
from .streams import substream

Seq = Tuple[int, int]


def parse_contrast(text: str) -> Tuple[Seq, Seq]:
    """Parse 'd1d2:d1'd2'' (e.g. 11:00) into a pair of sequences."""
    parts = text.split(":")
    if len(parts) != 2 or any(len(p) != 2 or set(p) - {"0", "1"} for p in parts):
        raise ValidationError(
            f"contrast must look like 11:00 (period-ordered bits), got {text!r}"
        )
    return (
        check_sequence((int(parts[0][0]), int(parts[0][1]))),
        check_sequence((int(parts[1][0]), int(parts[1][1]))),
    )


def parse_point(text: str, name: str) -> Tuple[float, float]:
    parts = text.split(",")
    if len(parts) != 2:
        raise ValidationError(f"{name} must be two comma-separated reals, got {text!r}")
    try:
        return float(parts[0]), float(parts[1])
    except ValueError:
        raise ValidationError(f"{name} must be two comma-separated reals, got {text!r}") from None


def parse_target(text: str) -> McTarget:
    parts = text.split(":")
    bad = ValidationError(f"target must be ate:AB-CD or mte:AB-CD:v1,v2, got {text!r}")
    if len(parts) >= 2 and parts[1].count("-") != 1:
        raise bad
    if parts[0] == "ate" and len(parts) == 2:
        a, b = parts[1].split("-")
        return McTarget(contrast=parse_contrast(f"{a}:{b}"), kind="ate")
    if parts[0] == "mte" and len(parts) == 3:
        a, b = parts[1].split("-")
        return McTarget(
            contrast=parse_contrast(f"{a}:{b}"), kind="mte", v=parse_point(parts[2], "v")
        )
    raise bad


def _load_dgp(path: Optional[str]) -> DgpSpec:
    if path is None:
        return DgpSpec()
    return DgpSpec.from_json(_read_text(path))


def _load_est(path: Optional[str]) -> EstimationConfig:
    if path is None:
        return EstimationConfig()
    return EstimationConfig.from_json(_read_text(path))


def _read_text(path: str) -> str:
    p = pathlib.Path(path)
    if not p.exists():
        raise ValidationError(f"file not found: {path}")
    return p.read_text(encoding="utf-8")


def _load_panel(path: str):
    if not pathlib.Path(path).exists():
        raise ValidationError(f"file not found: {path}")
    return load_panel(path)


def _write_text(path: str, text: str) -> None:
    pathlib.Path(path).write_text(text, encoding="utf-8")


def _write_json(path: str, payload: dict) -> None:
    _write_text(path, json.dumps(payload, indent=2) + "\n")


def write_manifest(
    command: str,
    argv: Sequence[str],
    outputs: Sequence[str],
    seed: int,
    dgp: Optional[DgpSpec] = None,
    est: Optional[EstimationConfig] = None,
) -> None:
    configs = {}
    if dgp is not None:
        configs["dgp"] = json.loads(dgp.to_json())
    if est is not None:
        configs["estimation"] = json.loads(est.to_json())
    blob = json.dumps(configs, sort_keys=True).encode("utf-8")
    manifest = {
        "command": command,
        "argv": list(argv),
        "config": configs,
        "config_sha256": hashlib.sha256(blob).hexdigest(),
        "seed": seed,
        "versions": {
            "python": platform.python_version(),
            "numpy": np.__version__,
            "dynmte": __version__,
        },
        "outputs": list(outputs),
    }
    for out in outputs:
        _write_json(f"{out}.manifest.json", manifest)


def _threads(args) -> int:
    if getattr(args, "threads", None) is not None:
        return args.threads
    env = os.environ.get("DYNMTE_THREADS")
    if env is not None:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValidationError(f"DYNMTE_THREADS must be an integer, got {env!r}") from None
    return 1


def _config_with_overrides(args) -> EstimationConfig:
    config = _load_est(getattr(args, "est", None))
    if getattr(args, "seed", None) is not None:
        config = replace(config, seed=args.seed)
    if getattr(args, "boot", None) is not None:
        config = replace(config, bootstrap_reps=args.boot)
    return config


def cmd_simulate(args, argv) -> int:
    spec = _load_dgp(args.config)
    data = simulate(spec, substream(args.seed, 0))
    save_panel(data, args.out)
    write_manifest("simulate", argv, [args.out], args.seed, dgp=spec)
    return 0


def cmd_oracle(args, argv) -> int:
    spec = _load_dgp(args.config)
    seq_a, seq_b = parse_contrast(args.contrast)
    if args.kind == "ate":
        est = oracle_ate(spec, seq_a, seq_b, draws=args.draws, stream=substream(args.seed, 0))
        payload = {
            "kind": "ate",
            "contrast": args.contrast,
            "value": est.value,
            "se": est.se,
            "draws": args.draws,
        }
    elif args.kind == "mte":
        if args.v is None:
            raise ValidationError("oracle --kind mte needs --v")
        v = parse_point(args.v, "v")
        x = spec.x_mean if args.x is None else np.array(parse_row(args.x))
        a = oracle_mtr(spec, seq_a, x, v, draws=args.draws, stream=substream(args.seed, 1))
        b = oracle_mtr(spec, seq_b, x, v, draws=args.draws, stream=substream(args.seed, 2))
        payload = {
            "kind": "mte",
            "contrast": args.contrast,
            "v": list(v),
            "x": [float(c) for c in x],
            "value": a.value - b.value,
            "se": float(np.hypot(a.se, b.se)),
            "draws": args.draws,
        }
    else:  # curve
        grid = np.linspace(0.05, 0.95, args.grid)
        x = spec.x_mean
        values, ses = [], []
        for i, t in enumerate(grid):
            v = (t, args.fixed) if args.axis == 1 else (args.fixed, t)
            a = oracle_mtr(spec, seq_a, x, v, draws=args.draws, stream=substream(args.seed, 10 + 2 * i))
            b = oracle_mtr(spec, seq_b, x, v, draws=args.draws, stream=substream(args.seed, 11 + 2 * i))
            values.append(a.value - b.value)
            ses.append(float(np.hypot(a.se, b.se)))
        payload = {
            "kind": "curve",
            "contrast": args.contrast,
            "axis": args.axis,
            "fixed_v": args.fixed,
            "v": [float(t) for t in grid],
            "value": values,
            "se": ses,
            "draws": args.draws,
        }
    _write_json(args.out, payload)
    write_manifest("oracle", argv, [args.out], args.seed, dgp=spec)
    return 0


def parse_row(text: str) -> Tuple[float, ...]:
    try:
        row = tuple(float(p) for p in text.split(","))
    except ValueError:
        raise ValidationError(f"covariate row must be comma-separated reals, got {text!r}") from None
    if len(row) != 3:
        raise ValidationError(f"covariate row must have 3 entries, got {len(row)}")
    return row


def cmd_estimate(args, argv) -> int:
    data = _load_panel(args.data)
    config = _config_with_overrides(args)
    contrast = parse_contrast(args.contrast)
    kind = {"mte": "mte", "ate": "ate", "ate-marginal": "ate_marginal"}[args.kind]
    x = None
    v = None
    if kind in ("mte", "ate"):
        x = parse_row(args.x) if args.x is not None else tuple(data.x.mean(axis=0))
    if kind == "mte":
        if args.v is None:
            raise ValidationError("estimate --kind mte needs --v")
        v = parse_point(args.v, "v")
    estimate = bootstrap_effect(data, contrast, kind, config, x=x, v=v)
    _write_json(args.out, estimate.to_dict())
    write_manifest("estimate", argv, [args.out], config.seed, est=config)
    return 0


def cmd_curve(args, argv) -> int:
    spec = _load_dgp(args.config)
    config = _config_with_overrides(args)
    contrast = parse_contrast(args.contrast)
    grid = run_curve(spec, contrast, args.axis, args.fixed, args.grid, config)
    _write_text(args.out, grid.to_csv())
    write_manifest("curve", argv, [args.out], config.seed, dgp=spec, est=config)
    return 0


def cmd_montecarlo(args, argv) -> int:
    spec = _load_dgp(args.config)
    config = _config_with_overrides(args)
    truths = json.loads(_read_text(args.truths))
    flat = {}
    for section in ("ate", "mte"):
        flat.update(truths.get(section, {}))
    targets = (
        standard_targets()
        if not args.target
        else [parse_target(t) for t in args.target]
    )
    report = run_mc(
        spec,
        targets,
        reps=args.reps,
        config=config,
        truths=flat,
        threads=_threads(args),
    )
    _write_text(args.out, report.to_csv())
    sidecar = f"{args.out}.sidecar.json"
    _write_json(sidecar, report.sidecar())
    write_manifest("montecarlo", argv, [args.out, sidecar], config.seed, dgp=spec, est=config)
    return 0


def cmd_liv(args, argv) -> int:
    spec = _load_dgp(args.config)
    config = _config_with_overrides(args)
    result = liv_decompose(
        spec,
        n=args.n,
        config=config,
        v=parse_point(args.v, "v"),
        y1=args.y1,
        draws=args.draws,
    )
    print(result.table())
    outputs = []
    if args.out:
        _write_json(args.out, result.to_dict())
        outputs.append(args.out)
        write_manifest("liv", argv, outputs, config.seed, dgp=spec, est=config)
    return 0


def cmd_baseline(args, argv) -> int:
    spec = None
    if args.data is not None:
        data = _load_panel(args.data)
    else:
        spec = _load_dgp(args.config)
        data = simulate(spec, substream(args.seed or 0, 0))
    config = _config_with_overrides(args)
    contrasts = [parse_contrast(c) for c in (args.contrast or ["11:00", "10:00", "01:00", "10:01"])]
    report = baseline_gformula(data, contrasts, config, sims=args.sims)
    _write_json(args.out, report.to_dict())
    write_manifest("baseline", argv, [args.out], config.seed, dgp=spec, est=config)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dynmte",
        description="Treatment-effect estimation for two-period sequences with instruments.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="draw a synthetic panel and write it as CSV")
    p.add_argument("--config", help="generator spec JSON (defaults used when omitted)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_simulate)

    p = sub.add_parser("oracle", help="simulate ground-truth effects from the generator")
    p.add_argument("--config", help="generator spec JSON")
    p.add_argument("--contrast", default="11:00", help="sequences as d1d2:d1'd2'")
    p.add_argument("--kind", choices=["ate", "mte", "curve"], default="ate")
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--v", help="resistance point v1,v2 (kind mte)")
    p.add_argument("--x", help="covariate row x1,x2,x3 (kind mte; defaults to the spec mean)")
    p.add_argument("--axis", type=int, choices=[1, 2], default=1, help="swept axis (kind curve)")
    p.add_argument("--fixed", type=float, default=0.5, help="held-fixed resistance (kind curve)")
    p.add_argument("--grid", type=int, default=19, help="grid size (kind curve)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("estimate", help="estimate one effect from a panel CSV")
    p.add_argument("--data", required=True)
    p.add_argument("--est", dest="est", help="estimation config JSON")
    p.add_argument("--config", dest="est", help="estimation config JSON (alias of --est)")
    p.add_argument("--contrast", required=True)
    p.add_argument("--kind", choices=["mte", "ate", "ate-marginal"], default="ate")
    p.add_argument("--x", help="covariate row x1,x2,x3 (default: sample mean)")
    p.add_argument("--v", help="resistance point v1,v2 (kind mte)")
    p.add_argument("--seed", type=int)
    p.add_argument("--boot", type=int, help="bootstrap replicates override")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_estimate)

    p = sub.add_parser("curve", help="effect curve over a resistance grid on one panel")
    p.add_argument("--config", help="generator spec JSON")
    p.add_argument("--est", help="estimation config JSON")
    p.add_argument("--contrast", default="11:00")
    p.add_argument("--axis", type=int, choices=[1, 2], required=True)
    p.add_argument("--fixed", type=float, default=0.5)
    p.add_argument("--grid", type=int, default=19)
    p.add_argument("--seed", type=int)
    p.add_argument("--boot", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_curve)

    p = sub.add_parser("montecarlo", help="replicate the estimator and report bias/RMSE/coverage")
    p.add_argument("--config", help="generator spec JSON")
    p.add_argument("--est", help="estimation config JSON")
    p.add_argument("--reps", type=int, required=True)
    p.add_argument("--truths", required=True, help="frozen oracle truths JSON")
    p.add_argument("--target", action="append", help="repeatable; default: standard table set")
    p.add_argument("--threads", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--boot", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_montecarlo)

    p = sub.add_parser("liv", help="cross-derivative estimand and its decomposition")
    p.add_argument("--config", help="generator spec JSON")
    p.add_argument("--est", help="estimation config JSON")
    p.add_argument("--n", type=int, default=1_000_000)
    p.add_argument("--v", default="0.25,0.75")
    p.add_argument("--y1", type=int, choices=[0, 1], default=1)
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_liv)

    p = sub.add_parser("baseline", help="parametric g-formula comparison estimator")
    p.add_argument("--data", help="panel CSV (otherwise simulates from --config)")
    p.add_argument("--config", help="generator spec JSON when simulating")
    p.add_argument("--est", help="estimation config JSON")
    p.add_argument("--contrast", action="append", help="repeatable; default: the four table contrasts")
    p.add_argument("--sims", type=int, default=10_000)
    p.add_argument("--seed", type=int)
    p.add_argument("--boot", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_baseline)

    return parser


def main(argv: Optional[List[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args, argv)
    except DynmteError as exc:
        print(f"{type(exc).__name__}: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
