"""Render report/sweep data to figure files (PNG) next to the CSV output."""

from __future__ import annotations

import csv
import json
import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from ..metrics import FecThreshold, net_throughput, q_from_ber, reach

_FORMAT_LABELS = {4: "QAM-4", 8: "QAM-8", 16: "QAM-16", 32: "QAM-32", 64: "QAM-64"}


def _save(fig, out_dir: str, name: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, name)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def plot_report(report_path: str, out_dir: str) -> list[str]:
    """Q vs distance and the windowed-Q trace of a single-run report."""
    with open(report_path) as f:
        report = json.load(f)
    pts = [p for p in report["points"] if p["status"] == "ok"]
    made = []

    order = report["config"]["tx"]["constellation_order"]
    label = _FORMAT_LABELS.get(order, f"QAM-{order}")
    if pts:
        fig, ax = plt.subplots(figsize=(6, 4))
        d = [p["distance_km"] for p in pts]
        q = [p["q_db"] for p in pts]
        ax.plot(d, q, "o-", label=label)
        for fd in report["config"]["metrics"]["fec_thresholds"]:
            ax.axhline(q_from_ber(fd["ber_limit"]), ls="--", lw=0.8,
                       label=f"{fd['name']} threshold")
        ax.set_xlabel("distance (km)")
        ax.set_ylabel("Q-factor (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend()
        made.append(_save(fig, out_dir, "q_vs_distance.png"))

    traces = [(p["distance_km"], p["windowed_q"]) for p in pts if p.get("windowed_q")]
    if traces:
        fig, ax = plt.subplots(figsize=(6, 4))
        for dist, series in traces:
            t = [row[0] * 1e3 for row in series]
            q = [row[1] for row in series]
            ax.plot(t, q, lw=0.9, label=f"{label} @ {dist:.0f} km")
        ax.set_xlabel("time (ms)")
        ax.set_ylabel("windowed Q (dB)")
        ax.grid(True, alpha=0.3)
        ax.legend(fontsize=8)
        made.append(_save(fig, out_dir, "windowed_q_trace.png"))
    return made


def _read_csv(path: str) -> list[dict]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def plot_sweep(csv_path: str, out_dir: str,
               fec_thresholds: list[dict] | None = None) -> list[str]:
    """Figures from a sweep CSV: Q vs axis value per distance, the optimal
    value vs distance, and (for format sweeps) net throughput vs distance."""
    rows = [r for r in _read_csv(csv_path) if r["status"] == "ok" and r["q_db"]]
    if not rows:
        return []
    axis = rows[0]["axis"]
    made = []

    fig, ax = plt.subplots(figsize=(6, 4))
    dists = sorted({float(r["distance_km"]) for r in rows})
    for dist in dists:
        sel = [r for r in rows if float(r["distance_km"]) == dist]
        sel.sort(key=lambda r: float(r["value"]))
        ax.plot([float(r["value"]) for r in sel], [float(r["q_db"]) for r in sel],
                "o-", label=f"{dist:.0f} km")
    ax.set_xlabel(axis)
    ax.set_ylabel("Q-factor (dB)")
    ax.grid(True, alpha=0.3)
    ax.legend(fontsize=8)
    made.append(_save(fig, out_dir, f"q_vs_{axis}.png"))

    by_dist: dict[float, dict] = {}
    for r in rows:
        d = float(r["distance_km"])
        if d not in by_dist or float(r["q_db"]) > float(by_dist[d]["q_db"]):
            by_dist[d] = r
    if len(by_dist) > 1:
        fig, ax = plt.subplots(figsize=(6, 4))
        ds = sorted(by_dist)
        ax.plot(ds, [float(by_dist[d]["value"]) for d in ds], "s-")
        ax.set_xlabel("distance (km)")
        ax.set_ylabel(f"optimal {axis}")
        ax.grid(True, alpha=0.3)
        made.append(_save(fig, out_dir, f"optimal_{axis}_vs_distance.png"))

    if axis == "format" and fec_thresholds:
        fig, ax = plt.subplots(figsize=(6, 4))
        for fd in fec_thresholds:
            fec = FecThreshold(**fd)
            q_lim = q_from_ber(fec.ber_limit)
            xs, ys = [], []
            for order in sorted({int(r["value"]) for r in rows}):
                sel = [(float(r["distance_km"]), float(r["q_db"]))
                       for r in rows if int(r["value"]) == order]
                r_km = reach(sel, q_lim)
                if r_km is not None:
                    xs.append(r_km)
                    ys.append(net_throughput(1e9, order, fec) / 1e9)
            if xs:
                ax.step(xs, ys, where="post", marker="o", label=fec.name)
        ax.set_xlabel("distance (km)")
        ax.set_ylabel("net throughput (Gb/s)")
        ax.grid(True, alpha=0.3)
        ax.legend()
        made.append(_save(fig, out_dir, "throughput_vs_distance.png"))
    return made
