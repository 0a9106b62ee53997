"""Command line driver: ``elitelab run|estimate|report|verify-operators|demo-stuck|list``."""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from . import __version__
from .algorithms import POLICIES, describe, make_policy
from .lab import TrialPlan, exact_binomial_ci, loop_fraction, run_trials
from .model import TIE_POLICIES, VIEWS, ConfigError
from .operators import default_registry, flip_first_position, verify_unbiased
from .problems import FAMILIES
from .records import (
    RecordFormatError,
    context_of,
    read_records,
    summarize,
    write_records,
    write_summary,
)
from .report import FORMATS, build_tables, load_summary, render

OUTPUT_ENV = "ELITELAB_OUTPUT_DIR"

# run options that may also come from a key=value config file
RUN_KEYS = {
    "problem": str, "n": int, "k": int, "algorithm": str, "tie_policy": str, "fitness_view": str,
    "trials": int, "budget": int, "seed": int, "p": None, "jobs": int, "output_dir": str, "name": str,
}
RUN_DEFAULTS = {"trials": 100, "budget": 10**6, "seed": 0, "tie_policy": "prefer_offspring", "p": []}


def _parse_p_list(text: str) -> list[float]:
    return [float(t) for t in str(text).replace(",", " ").split()]


def read_config_file(path) -> dict:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    out = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for no, raw in enumerate(lines, start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{no}: expected key=value, got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        key = key.replace("-", "_")
        if key not in RUN_KEYS:
            raise ConfigError(f"{path}:{no}: unknown key {key!r}")
        try:
            out[key] = _parse_p_list(value) if key == "p" else RUN_KEYS[key](value)
        except ValueError as exc:
            raise ConfigError(f"{path}:{no}: bad value for {key}: {value!r}") from exc
    return out


def resolve_run_config(args: argparse.Namespace) -> dict:
    """Defaults, then config file, then explicit flags."""
    cfg = dict(RUN_DEFAULTS)
    if args.config:
        cfg.update(read_config_file(args.config))
    for key in RUN_KEYS:
        val = getattr(args, key, None)
        if val is not None and not (key == "p" and val == []):
            cfg[key] = val
    for key in ("problem", "n", "algorithm"):
        if cfg.get(key) is None:
            raise ConfigError(f"missing required setting {key!r} (flag --{key} or config file)")
    for p in cfg["p"]:
        if not 0 < p < 1:
            raise ConfigError(f"p values must lie in (0, 1), got {p}")
    if cfg["trials"] < 1:
        raise ConfigError(f"trials must be >= 1, got {cfg['trials']}")
    return cfg


def _plan(cfg: dict) -> TrialPlan:
    plan = TrialPlan(
        algorithm=cfg["algorithm"], family=cfg["problem"], n=cfg["n"], budget=cfg["budget"],
        master_seed=cfg["seed"], k=cfg.get("k"), fitness_view=cfg.get("fitness_view"),
        tie_policy=cfg["tie_policy"],
    )
    _, mode = plan.validate()
    cfg["fitness_view"] = mode.fitness_view
    return plan


def _output_dir(cfg: dict) -> Path:
    return Path(cfg.get("output_dir") or os.environ.get(OUTPUT_ENV) or "results")


def _default_name(cfg: dict) -> str:
    k = f"_k{cfg['k']}" if cfg.get("k") is not None else ""
    return f"{cfg['problem']}_n{cfg['n']}{k}_{cfg['algorithm']}_s{cfg['seed']}"


def cmd_run(args) -> int:
    cfg = resolve_run_config(args)
    plan = _plan(cfg)
    out_dir = _output_dir(cfg)
    name = cfg.get("name") or _default_name(cfg)
    t0 = time.perf_counter()
    records = run_trials(plan, cfg["trials"], jobs=cfg.get("jobs") or 0)
    elapsed = time.perf_counter() - t0
    echo = {k: cfg.get(k) for k in ("problem", "n", "k", "algorithm", "tie_policy", "fitness_view",
                                     "trials", "budget", "seed", "p")}
    summary = summarize(echo, records, cfg["p"])
    csv_path, json_path = out_dir / f"{name}.csv", out_dir / f"{name}.json"
    write_records(csv_path, records, context_of(echo))
    write_summary(json_path, summary)
    lv = summary["las_vegas"]
    bound = " (lower bound)" if lv["is_lower_bound"] else ""
    print(f"{cfg['trials']} trials in {elapsed:.1f}s: success {summary['success_fraction']:.4f}, "
          f"mean {lv['mean']:.1f}{bound}, loop fraction {summary['loop_fraction']:.4f}")
    for m in summary["monte_carlo"]:
        flag = " NOT ACHIEVED" if m["not_achieved_flag"] else ""
        print(f"  p={m['p']}: T={m['T']} (fraction {m['achieved']:.4f}){flag}")
    print(f"wrote {csv_path} and {json_path}")
    return 0


def cmd_estimate(args) -> int:
    ctx, records = read_records(args.input)
    config = {"problem": ctx["problem"], "n": ctx["n"], "k": ctx["param_k"] if ctx["param_k"] != "" else None,
              "algorithm": ctx["algorithm"], "tie_policy": ctx["tie_policy"], "fitness_view": ctx["fitness_view"],
              "trials": len(records), "budget": args.budget}
    summary = summarize(config, records, args.p or [])
    text = json.dumps(summary, indent=2) + "\n"
    if args.output:
        write_summary(args.output, summary)
    sys.stdout.write(text)
    return 0


def cmd_report(args) -> int:
    summaries = [load_summary(p, args.p) for p in args.inputs]
    text = render(build_tables(summaries), args.format)
    if args.output:
        Path(args.output).write_text(text)
    sys.stdout.write(text)
    return 0


def cmd_verify_operators(args) -> int:
    if not 1 <= args.n_min <= args.n_max:
        raise ConfigError(f"need 1 <= n-min <= n-max, got {args.n_min}..{args.n_max}")
    registry = default_registry()
    if args.inject_biased:
        registry["flip-position-1"] = lambda n: [flip_first_position(n)]
    failures = []
    for n in range(args.n_min, args.n_max + 1):
        for name, build in registry.items():
            try:
                ops = build(n)
            except ValueError:
                continue  # operator family undefined at this n
            for op in ops:
                rep = verify_unbiased(op)
                if not rep.unbiased:
                    failures.append(rep)
                if args.verbose or not rep.unbiased:
                    print(rep)
    if failures:
        names = sorted({f.name for f in failures})
        print(f"FAILED: {len(failures)} check(s), operators: {', '.join(names)}")
        return 1
    print(f"all registered operators unbiased for n={args.n_min}..{args.n_max}")
    return 0


def cmd_demo_stuck(args) -> int:
    if args.n < 1:
        raise ConfigError(f"n must be positive, got {args.n}")
    plan = TrialPlan(algorithm="stuck-demo", family="onemax", n=args.n, budget=args.budget, master_seed=args.seed)
    records = run_trials(plan, args.instances, jobs=args.jobs or 0)
    looped = sum(r.looped for r in records)
    lo, hi = exact_binomial_ci(looped, len(records))
    print(f"stuck-demo on {len(records)} OneMax instances, n={args.n}: "
          f"loop fraction {loop_fraction(records):.4f} (95% exact CI [{lo:.4f}, {hi:.4f}]), "
          f"solved {sum(r.success for r in records)}")
    return 0


def cmd_list(args) -> int:
    print("algorithms:")
    for pid in POLICIES:
        print("  " + describe(make_policy(pid, 0)))
    print("problems: " + ", ".join(FAMILIES))
    print("operators: " + ", ".join(default_registry()))
    print("tie policies: " + ", ".join(TIE_POLICIES))
    print("fitness views: " + ", ".join(VIEWS))
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="elitelab", description="Elitist black-box optimization experiments.")
    ap.add_argument("--version", action="version", version=f"elitelab {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run trials and write per-trial CSV plus JSON summary")
    run.add_argument("--config", help="key=value file; flags override it")
    run.add_argument("--problem", choices=FAMILIES)
    run.add_argument("--n", type=int)
    run.add_argument("--k", type=int, help="jump size (jump family, jump-mixed)")
    run.add_argument("--algorithm", choices=list(POLICIES))
    run.add_argument("--tie-policy", dest="tie_policy", choices=TIE_POLICIES)
    run.add_argument("--fitness-view", dest="fitness_view", choices=VIEWS)
    run.add_argument("--trials", type=int)
    run.add_argument("--budget", type=int)
    run.add_argument("--seed", type=int)
    run.add_argument("--p", type=float, action="append", default=[], help="Monte Carlo failure probability (repeatable)")
    run.add_argument("--jobs", type=int, help="worker processes (default: all cores)")
    run.add_argument("--output-dir", dest="output_dir", help=f"default ${OUTPUT_ENV} or ./results")
    run.add_argument("--name", help="output file stem")
    run.set_defaults(func=cmd_run)

    est = sub.add_parser("estimate", help="recompute estimates from a per-trial CSV")
    est.add_argument("input")
    est.add_argument("--p", type=float, action="append", default=[])
    est.add_argument("--budget", type=int, help="budget credited to censored trials")
    est.add_argument("--output", help="also write the JSON summary here")
    est.set_defaults(func=cmd_estimate)

    rep = sub.add_parser("report", help="measured-vs-reference tables from summaries or CSVs")
    rep.add_argument("inputs", nargs="+")
    rep.add_argument("--format", choices=FORMATS, default="text")
    rep.add_argument("--p", type=float, action="append", default=[])
    rep.add_argument("--output")
    rep.set_defaults(func=cmd_report)

    ver = sub.add_parser("verify-operators", help="exhaustive unbiasedness check of registered operators")
    ver.add_argument("--n-min", type=int, default=2)
    ver.add_argument("--n-max", type=int, default=8)
    ver.add_argument("--verbose", "-v", action="store_true")
    ver.add_argument("--inject-biased", action="store_true", help=argparse.SUPPRESS)
    ver.set_defaults(func=cmd_verify_operators)

    demo = sub.add_parser("demo-stuck", help="loop frequency of a deterministic elitist policy")
    demo.add_argument("--n", type=int, default=16)
    demo.add_argument("--instances", type=int, default=10_000)
    demo.add_argument("--seed", type=int, default=0)
    demo.add_argument("--budget", type=int, default=10**6)
    demo.add_argument("--jobs", type=int, default=1)
    demo.set_defaults(func=cmd_demo_stuck)

    ls = sub.add_parser("list", help="show registered algorithms, problems and operators")
    ls.set_defaults(func=cmd_list)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, RecordFormatError, FileNotFoundError, ValueError) as exc:
        print(f"elitelab {args.command}: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
