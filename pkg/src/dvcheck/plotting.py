"""Figures for the bench tables (PNG, headless)."""

from __future__ import annotations

from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_line(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    by_n = defaultdict(list)
    for r in rows:
        by_n[r["n"]].append((r["distance"], r["messages"]))
    for n, pts in sorted(by_n.items()):
        pts.sort()
        ax.plot([p[0] for p in pts], [p[1] for p in pts], marker="o", ms=3, label=f"n={n}")
    ax.set_xlabel("distance of broken hop to root")
    ax.set_ylabel("messages until quiescence")
    ax.set_title("Chain: one breaking update")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_grid(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    by_n = defaultdict(list)
    for r in rows:
        by_n[r["n"]].append(r["messages"])
    ns = sorted(by_n)
    ax.bar([str(n) for n in ns], [sum(by_n[n]) for n in ns], color="tab:green")
    for i, n in enumerate(ns):
        ax.text(i, 0, f"{len(by_n[n])} flips", ha="center", va="bottom")
    ax.set_xlabel("grid side n")
    ax.set_ylabel("total messages over all interior flips")
    ax.set_title("Grid: right/down flips")
    ax.set_ylim(0, max(1, max(sum(v) for v in by_n.values())) * 1.2)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_fat_tree(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    for k in sorted({r["k"] for r in rows}):
        ev = [r for r in rows if r["k"] == k and r["event"] != "init"]
        ax.plot(range(len(ev)), [r["messages"] for r in ev], marker=".", label=f"k={k}")
    ax.set_xlabel("event index (alternating down/up)")
    ax.set_ylabel("messages")
    ax.set_title("Fat-tree: single link events")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_random_dag(rows, path):
    fig, ax = plt.subplots(figsize=(5, 3.5))
    ax.scatter([r["dv_nodes"] for r in rows], [r["init_messages"] for r in rows], label="initial wave")
    ax.scatter([r["dv_nodes"] for r in rows], [r["mean_break_messages"] for r in rows], label="mean per break")
    ax.set_xlabel("DV-nodes")
    ax.set_ylabel("messages")
    ax.set_title("Random DAGs")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


PLOTS = {"line": plot_line, "grid": plot_grid, "fat_tree": plot_fat_tree, "random_dag": plot_random_dag}


def render_all(tables: dict, out: Path) -> list[Path]:
    written = []
    for name, rows in tables.items():
        if rows and name in PLOTS:
            p = Path(out) / f"{name}.png"
            PLOTS[name](rows, p)
            written.append(p)
    return written
