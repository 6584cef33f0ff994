"""Command-line front end: ``postsolve {edit,reconstruct,verify,sweep}``."""

from __future__ import annotations

import argparse
import itertools
import sys
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import config as cfgmod
from .pipeline import ModeError, run
from .posterior import NonFiniteIterateError
from .records import atomic_write, record_text, trajectory_text
from .verify import SUITES, run_suites


def _load(args) -> dict:
    overrides = {}
    if getattr(args, "seed", None) is not None:
        overrides["posterior.seed"] = args.seed
    return cfgmod.load(args.config, overrides)


def sign_match(output, free, target) -> bool:
    """Every free coordinate of ``output`` has the sign of ``target``.

    With no free coordinates (mask keeps everything) the whole signal is tested.
    """
    region = free if np.any(free) else np.ones_like(free, dtype=bool)
    return bool(np.all(np.sign(output[region]) == np.sign(target[region])))


def _one_run(cfg: dict, mode: str, seed: int, out_dir: Path) -> dict:
    """Execute one seeded run, write its record and trajectory, return a summary row."""
    cfg = dict(cfg, **{"posterior.seed": seed})
    model = cfgmod.build_model(cfg)
    spec = cfgmod.build_run_spec(cfg, mode, model)
    rec = run(spec, model)
    atomic_write(out_dir / f"{mode}_seed{seed}.txt", record_text(rec, cfg))
    atomic_write(out_dir / f"{mode}_seed{seed}_trajectory.csv", trajectory_text(rec))
    moved = False
    if mode == "edit":
        moved = sign_match(rec.output, rec.unmeasured,
                           model.means[model.labels == spec.target_label].mean(axis=0))
    return {"seed": seed, "mse": rec.report.mse, "psnr": rec.report.psnr,
            "measured_mse": rec.measured_mse, "sign_match": moved}


def _summary_lines(rows: list[dict]) -> list[str]:
    lines = ["seed,mse,psnr,measured_mse,sign_match"]
    for r in rows:
        lines.append(f"{r['seed']},{r['mse']!r},{r['psnr']!r},{r['measured_mse']!r},"
                     f"{int(r['sign_match'])}")
    mse = float(np.mean([r["mse"] for r in rows]))
    meas = float(np.mean([r["measured_mse"] for r in rows]))
    rate = float(np.mean([r["sign_match"] for r in rows]))
    lines.append(f"aggregate,{mse!r},,{meas!r},{rate!r}")
    return lines


def run_batch(cfg: dict, mode: str, out_dir: Path, runs: int, jobs: int = 1) -> list[dict]:
    base = cfg["posterior.seed"]
    seeds = [base + i for i in range(runs)]
    if jobs > 1 and runs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(pool.map(_one_run, itertools.repeat(cfg), itertools.repeat(mode),
                                 seeds, itertools.repeat(out_dir)))
    else:
        rows = [_one_run(cfg, mode, s, out_dir) for s in seeds]
    if runs > 1:
        atomic_write(out_dir / f"{mode}_summary.csv", "\n".join(_summary_lines(rows)) + "\n")
    return rows


def cmd_run(args, mode: str) -> int:
    cfg = _load(args)
    out_dir = Path(args.out)
    rows = run_batch(cfg, mode, out_dir, args.runs, args.jobs)
    if args.runs > 1:
        print(_summary_lines(rows)[-1])
    else:
        r = rows[0]
        print(f"{mode} seed={r['seed']} mse={r['mse']!r} measured_mse={r['measured_mse']!r}")
    return 0


def cmd_verify(args) -> int:
    return 0 if run_suites(args.suites) else 1


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",")]


def cmd_sweep(args) -> int:
    """Grid over w, f and T; one aggregate line per combination."""
    cfg = _load(args)
    out_dir = Path(args.out)
    lines = ["w,f,T,mean_mse,mean_measured_mse,sign_match_rate"]
    for w, f, T in itertools.product(_floats(args.w), _floats(args.f),
                                     [int(v) for v in args.T.split(",")]):
        sub = dict(cfg, **{"posterior.w": w, "posterior.f": f, "posterior.T": T})
        sub_dir = out_dir / f"w{w}_f{f}_T{T}"
        rows = run_batch(sub, args.mode, sub_dir, args.runs, args.jobs)
        agg = _summary_lines(rows)[-1].split(",")
        line = f"{w!r},{f!r},{T},{agg[1]},{agg[3]},{agg[4]}"
        print(line)
        lines.append(line)
    atomic_write(out_dir / "sweep.csv", "\n".join(lines) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="postsolve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    def run_flags(p):
        p.add_argument("--config", type=Path, default=None, help="key = value config file")
        p.add_argument("--out", type=Path, default=Path("runs"), help="output directory")
        p.add_argument("--seed", type=int, default=None, help="override posterior.seed")
        p.add_argument("--runs", type=int, default=1, help="seeded runs (seed, seed+1, ...)")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for batches")

    run_flags(sub.add_parser("edit", help="posterior-sampling edit"))
    run_flags(sub.add_parser("reconstruct", help="posterior-sampling reconstruction"))
    p = sub.add_parser("verify", help="run oracle/invariant suites")
    p.add_argument("suites", nargs="*", default=["all"], choices=list(SUITES) + ["all"])
    p = sub.add_parser("sweep", help="grid over w, f, T")
    run_flags(p)
    p.add_argument("--mode", choices=["edit", "reconstruct"], default="edit")
    p.add_argument("--w", default="0,0.1,0.2")
    p.add_argument("--f", default="0.5,1.0")
    p.add_argument("--T", default="100")
    p = sub.add_parser("defaults", help="print every config key with its default")
    return parser


def _dispatch(args) -> int:
    if args.command in ("edit", "reconstruct"):
        return cmd_run(args, args.command)
    if args.command == "verify":
        return cmd_verify(args)
    if args.command == "sweep":
        return cmd_sweep(args)
    print(cfgmod.documented_defaults(), end="")
    return 0


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    with warnings.catch_warnings():
        warnings.simplefilter("always")
        warnings.showwarning = lambda msg, *a, **k: print(f"warning: {msg}", file=sys.stderr)
        try:
            return _dispatch(args)
        except (cfgmod.ConfigError, ModeError, NonFiniteIterateError, OSError, ValueError) as err:
            print(f"error: {err}", file=sys.stderr)
            return 2


if __name__ == "__main__":
    sys.exit(main())
