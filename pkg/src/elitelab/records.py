"""Per-trial CSV files and JSON run summaries."""

from __future__ import annotations

import csv
import io
import json
import os
import tempfile
from pathlib import Path
from typing import Iterable, Sequence

from .lab import (
    TrialRecord,
    estimate_las_vegas,
    estimate_monte_carlo,
    exact_binomial_ci,
    loop_fraction,
)

CSV_COLUMNS = (
    "problem", "n", "param_k", "algorithm", "tie_policy", "fitness_view",
    "trial", "seed", "queries", "success", "censored", "looped",
)
CONTEXT_COLUMNS = CSV_COLUMNS[:6]
SUMMARY_VERSION = 1


class RecordFormatError(ValueError):
    pass


def _atomic_write(path: Path, text: str) -> None:
    # write next to the target and rename, so readers never see half a file
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise


def context_of(config: dict) -> dict:
    """CSV context columns from a run configuration."""
    k = config.get("k")
    return {
        "problem": config["problem"],
        "n": int(config["n"]),
        "param_k": "" if k is None else int(k),
        "algorithm": config["algorithm"],
        "tie_policy": config["tie_policy"],
        "fitness_view": config["fitness_view"],
    }


def records_to_csv(records: Iterable[TrialRecord], context: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    ctx = [context[c] for c in CONTEXT_COLUMNS]
    for r in records:
        w.writerow(ctx + [r.trial_index, r.seed, r.queries, int(r.success), int(r.censored), int(r.looped)])
    return buf.getvalue()


def write_records(path, records: Iterable[TrialRecord], context: dict) -> None:
    _atomic_write(Path(path), records_to_csv(records, context))


def _flag(text: str, col: str) -> bool:
    if text not in ("0", "1"):
        raise RecordFormatError(f"column {col} must be 0 or 1, got {text!r}")
    return text == "1"


def read_records(path) -> tuple[dict, list[TrialRecord]]:
    """Parse a per-trial CSV; returns (context, records). One context per file."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != CSV_COLUMNS:
        raise RecordFormatError(f"{path}: header must be {','.join(CSV_COLUMNS)}")
    context = None
    records = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(CSV_COLUMNS):
            raise RecordFormatError(f"{path}:{line_no}: expected {len(CSV_COLUMNS)} fields, got {len(row)}")
        d = dict(zip(CSV_COLUMNS, row))
        ctx = {c: d[c] for c in CONTEXT_COLUMNS}
        ctx["n"] = int(ctx["n"])
        ctx["param_k"] = int(ctx["param_k"]) if ctx["param_k"] != "" else ""
        if context is None:
            context = ctx
        elif ctx != context:
            raise RecordFormatError(f"{path}:{line_no}: mixed experiment contexts in one file")
        try:
            records.append(TrialRecord(
                trial_index=int(d["trial"]),
                seed=int(d["seed"]),
                queries=int(d["queries"]),
                success=_flag(d["success"], "success"),
                censored=_flag(d["censored"], "censored"),
                looped=_flag(d["looped"], "looped"),
            ))
        except ValueError as exc:
            raise RecordFormatError(f"{path}:{line_no}: {exc}") from exc
    if context is None:
        raise RecordFormatError(f"{path}: no trial rows")
    return context, records


def summarize(config: dict, records: Sequence[TrialRecord], p_values: Sequence[float] = ()) -> dict:
    """JSON-ready summary with a fixed key layout."""
    budget = config.get("budget")
    lv = estimate_las_vegas(records, budget)
    wins = sum(r.success for r in records)
    lo, hi = exact_binomial_ci(wins, len(records))
    mc = []
    for p in p_values:
        est = estimate_monte_carlo(records, p, budget)
        mc.append({"p": p, "T": est.T, "achieved": est.achieved_success_fraction,
                   "not_achieved_flag": est.not_achieved_flag})
    return {
        "version": SUMMARY_VERSION,
        "config": dict(config),
        "trials": len(records),
        "las_vegas": {"mean": lv.mean, "ci_low": lv.ci_low, "ci_high": lv.ci_high,
                      "censored": lv.censored_count, "is_lower_bound": lv.is_lower_bound},
        "monte_carlo": mc,
        "loop_fraction": loop_fraction(records),
        "success_fraction": wins / len(records),
        "success_ci": [lo, hi],
    }


def write_summary(path, summary: dict) -> None:
    _atomic_write(Path(path), json.dumps(summary, indent=2, sort_keys=False) + "\n")


def read_summary(path) -> dict:
    with open(path) as fh:
        data = json.load(fh)
    for key in ("config", "las_vegas", "monte_carlo", "loop_fraction"):
        if key not in data:
            raise RecordFormatError(f"{path}: summary lacks key {key!r}")
    return data
