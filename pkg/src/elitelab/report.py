"""Measured-vs-reference tables built from run summaries or per-trial CSVs."""

from __future__ import annotations

import csv
import io
import math
from collections import defaultdict
from pathlib import Path
from typing import Sequence

from .problems import jump_regime
from .records import read_records, read_summary, summarize

FORMATS = ("text", "csv", "markdown")


def reference_columns(problem: str, n: int, k) -> dict:
    """Reference scales printed next to the measurements."""
    ref = {"n_ln_n": round(n * math.log(n), 2) if n > 1 else 0.0, "n_sq": n * n}
    if problem == "jump" and k not in (None, ""):
        k = int(k)
        ref["C(n,k+1)"] = math.comb(n, k + 1)
        ref["regime"] = jump_regime(n, k)
    return ref


def load_summary(path, p_values: Sequence[float] = ()) -> dict:
    """Summary dict from a .json summary or a .csv record file.

    ``p_values`` only applies to CSV inputs; JSON summaries are used as saved.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"no such input: {path}")
    if path.suffix == ".csv":
        ctx, records = read_records(path)
        config = {"problem": ctx["problem"], "n": ctx["n"], "k": ctx["param_k"] if ctx["param_k"] != "" else None,
                  "algorithm": ctx["algorithm"], "tie_policy": ctx["tie_policy"],
                  "fitness_view": ctx["fitness_view"]}
        return summarize(config, records, p_values)
    return read_summary(path)


def build_tables(summaries: Sequence[dict]) -> dict[str, list[dict]]:
    """Group summaries into series (problem and k) with one row per algorithm and n."""
    if not summaries:
        raise ValueError("no summaries to report")
    p_values = sorted({m["p"] for s in summaries for m in s["monte_carlo"]})
    series: dict[str, list[dict]] = defaultdict(list)
    for s in summaries:
        cfg = s["config"]
        k = cfg.get("k")
        name = cfg["problem"] + (f" k={k}" if k not in (None, "") else "")
        row = {
            "algorithm": cfg["algorithm"],
            "n": int(cfg["n"]),
            "trials": s.get("trials", ""),
            "success": round(s.get("success_fraction", float("nan")), 4),
            "mean": round(s["las_vegas"]["mean"], 2),
            "lower_bound": int(s["las_vegas"]["is_lower_bound"]),
            "loop_fraction": round(s["loop_fraction"], 4),
        }
        mc = {m["p"]: m for m in s["monte_carlo"]}
        for p in p_values:
            m = mc.get(p)
            row[f"T(p={p})"] = "" if m is None else (m["T"] if not m["not_achieved_flag"] else f">{m['T']}")
        row.update(reference_columns(cfg["problem"], int(cfg["n"]), k))
        series[name].append(row)
    for rows in series.values():
        rows.sort(key=lambda r: (r["n"], r["algorithm"]))
    return dict(sorted(series.items()))


def _columns(rows: list[dict]) -> list[str]:
    cols: list[str] = []
    for r in rows:
        cols += [c for c in r if c not in cols]
    return cols


def render(tables: dict[str, list[dict]], fmt: str = "text") -> str:
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {', '.join(FORMATS)}")
    out = []
    for name, rows in tables.items():
        cols = _columns(rows)
        cells = [[str(r.get(c, "")) for c in cols] for r in rows]
        if fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["series"] + cols)
            w.writerows([name] + c for c in cells)
            out.append(buf.getvalue().rstrip("\n"))
        elif fmt == "markdown":
            lines = [f"### {name}", "", "| " + " | ".join(cols) + " |", "|" + "---|" * len(cols)]
            lines += ["| " + " | ".join(c) + " |" for c in cells]
            out.append("\n".join(lines))
        else:
            widths = [max(len(c), *(len(row[i]) for row in cells)) for i, c in enumerate(cols)]
            lines = [f"== {name} ==", "  ".join(c.rjust(wd) for c, wd in zip(cols, widths))]
            lines += ["  ".join(v.rjust(wd) for v, wd in zip(row, widths)) for row in cells]
            out.append("\n".join(lines))
    return "\n\n".join(out) + "\n"
