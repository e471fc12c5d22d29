"""Cross-repeat aggregation and plot-ready series files."""

from __future__ import annotations

import csv
import io
import json
from pathlib import Path

import numpy as np

from .log import EpisodeLog, LogError


def _stats(rows: np.ndarray) -> dict:
    return {"mean": rows.mean(axis=0), "sd": rows.std(axis=0)}


def summarize(logs: list[EpisodeLog]) -> dict:
    """Per-round mean and standard deviation over repeats, plus final-round scalars.

    Series are ``regret/<role>`` (time-averaged regret, averaged over the
    role's tracked agents) and ``congestion`` when the logs carry it.
    """
    if not logs:
        raise LogError("nothing to summarize")
    T = logs[0].rounds
    roles = sorted(logs[0].meta.get("roles", {}))
    has_cong = logs[0].congestion is not None
    for lg in logs[1:]:
        if lg.rounds != T or sorted(lg.meta.get("roles", {})) != roles or (lg.congestion is not None) != has_cong:
            raise LogError("logs differ in shape; summarize one variant of one config at a time")
    series = {}
    for role in roles:
        series[f"regret/{role}"] = _stats(np.vstack([lg.role_avg_regret(role) for lg in logs]))
    if has_cong:
        series["congestion"] = _stats(np.vstack([lg.congestion for lg in logs]))
    return {
        "repeats": len(logs),
        "rounds": T,
        "series": series,
        "final": {k: {"mean": float(v["mean"][-1]), "sd": float(v["sd"][-1])} for k, v in series.items()},
    }


def summary_json(summary: dict) -> str:
    def plain(v):
        if isinstance(v, np.ndarray):
            return [float(x) for x in v]
        if isinstance(v, dict):
            return {k: plain(x) for k, x in v.items()}
        return v

    return json.dumps(plain(summary), indent=1, sort_keys=True) + "\n"


def series_csv(stats: dict) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["x", "y", "y_sd"])
    for t, (m, s) in enumerate(zip(stats["mean"], stats["sd"]), 1):
        w.writerow([t, repr(float(m)), repr(float(s))])
    return buf.getvalue()


def write_outputs(out_dir, results: dict[str, list[EpisodeLog]]) -> dict[str, dict]:
    """Logs under ``<out>/<variant>/``, then the summary and series files."""
    out = Path(out_dir)
    for variant, logs in results.items():
        for lg in logs:
            lg.save(out / variant / f"repeat_{lg.meta.get('repeat', 0):03d}")
    return export(out)


def load_logs(out_dir) -> dict[str, list[EpisodeLog]]:
    out = Path(out_dir)
    if not out.is_dir():
        raise LogError(f"{out}: not a directory")
    results = {}
    for d in sorted(p for p in out.iterdir() if p.is_dir() and p.name != "series"):
        stems = sorted(p.with_suffix("") for p in d.glob("repeat_*.csv"))
        if stems:
            results[d.name] = [EpisodeLog.load(s) for s in stems]
    if not results:
        raise LogError(f"{out}: no episode logs found")
    return results


def export(out_dir) -> dict[str, dict]:
    """(Re)write ``summary.json`` and ``series/*.csv`` from the logs under ``out_dir``."""
    out = Path(out_dir)
    results = load_logs(out)
    summaries = {v: summarize(logs) for v, logs in results.items()}
    (out / "summary.json").write_text(summary_json(summaries))
    sdir = out / "series"
    sdir.mkdir(exist_ok=True)
    for variant, summ in summaries.items():
        for key, stats in summ["series"].items():
            (sdir / f"{variant}__{key.replace('/', '_')}.csv").write_text(series_csv(stats))
    return summaries
