from pathlib import Path
from typing import List, Optional, Sequence, Union

import pandas as pd

from sempe.schemas import BenchResult

CSV_COLUMNS = [
    "workload",
    "iterations",
    "width",
    "workload_size",
    "seed",
    "mode",
    "status",
    "cycles",
    "committed_instructions",
    "overhead_ratio",
    "ideal",
    "ratio_vs_ideal",
    "trap",
]

PLOT_COLUMNS = ["workload", "mode", "width", "overhead_ratio", "ratio_vs_ideal"]


def results_frame(results: Sequence[BenchResult]) -> pd.DataFrame:
    rows = []
    for result in results:
        row = result.spec.model_dump()
        row.update(result.model_dump(exclude={"spec", "final_state"}))
        rows.append(row)
    return pd.DataFrame(rows, columns=CSV_COLUMNS)


def write_csv(results: Sequence[BenchResult], path: Union[str, Path]) -> pd.DataFrame:
    df = results_frame(results)
    df.to_csv(path, index=False)
    return df


def summary_table(results: Sequence[BenchResult]) -> str:
    """Overhead and ratio to the ideal path count, one row per (workload, width)."""
    df = results_frame(results)
    if df.empty:
        return "no results"
    summary = df.pivot_table(
        index=["workload", "width"],
        columns="mode",
        values=["overhead_ratio", "ratio_vs_ideal"],
        aggfunc="mean",
    )
    summary = summary.round(2)
    rejected = df[df["status"] != "ok"]
    lines: List[str] = [summary.to_string(na_rep="-")]
    for row in rejected.itertuples(index=False):
        lines.append(f"{row.workload} W={row.width} {row.mode}: {row.status} ({row.trap})")
    return "\n".join(lines)


def write_plotdata(results: Sequence[BenchResult], path: Union[str, Path]) -> pd.DataFrame:
    """(width, ratio) series per workload and mode, sorted for plotting."""
    df = results_frame(results)
    df = df[df["status"] == "ok"][PLOT_COLUMNS].sort_values(["workload", "mode", "width"])
    df.to_csv(path, index=False)
    return df


def report(
    results: Sequence[BenchResult],
    csv_path: Union[str, Path],
    plotdata_path: Optional[Union[str, Path]] = None,
) -> str:
    write_csv(results, csv_path)
    if plotdata_path is not None:
        write_plotdata(results, plotdata_path)
    return summary_table(results)
