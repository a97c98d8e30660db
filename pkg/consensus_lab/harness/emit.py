"""
Output files.

  metrics/<algorithm>__<topology>__seed<seed>.csv   one row per recorded round
  summary.csv                                       one row per run
  rounds.csv / rounds.md                            round counts per algorithm x topology
  plots/<problem>__<topology>.csv|png               convergence curves, one per algorithm
  plots/support__seed<seed>.csv|png                 elastic-net sparsity pattern
  plots/topology__<label>.png                       the communication graph

Floats are written with 17 significant digits so they re-parse to the same float64. Plot
rendering needs matplotlib (the "plots" extra); without it, or on any rendering failure,
only the data files are written.
"""
from __future__ import annotations

import csv
import logging
import statistics
from collections import defaultdict
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from consensus_lab.core.errors import OutputError
from consensus_lab.network.topology import Graph
from consensus_lab.records import RunRecord

logger = logging.getLogger("consensus_lab.harness.emit")

METRIC_COLUMNS = (
    "round",
    "objective_residual",
    "consensus_violation",
    "optimality_residual",
    "penalty",
    "rho",
    "stationarity_bound",
)
SUMMARY_COLUMNS = ("algorithm", "topology", "seed", "rounds", "converged", "max_consensus_rounds")
PLOTTED = ("objective_residual", "consensus_violation", "optimality_residual")
DAGGER = "†"


def _fmt(value) -> str:
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _ensure_dir(path: Path) -> Path:
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OutputError(f"cannot create {path}: {exc}") from exc
    return path


def _write_rows(path: Path, header: Iterable[str], rows: Iterable[Iterable]) -> Path:
    try:
        with open(path, "w", newline="") as f:
            writer = csv.writer(f)
            writer.writerow(header)
            for row in rows:
                writer.writerow([_fmt(v) for v in row])
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc}") from exc
    return path


def metrics_filename(record: RunRecord) -> str:
    return f"{record.algorithm}__{record.topology}__seed{record.seed}.csv"


def emit_csv(records: list[RunRecord], path) -> list[Path]:
    root = _ensure_dir(Path(path))
    metrics_dir = _ensure_dir(root / "metrics") if records else root / "metrics"
    written = []
    for record in records:
        rows = ([getattr(s, c) for c in METRIC_COLUMNS] for s in record.samples)
        written.append(_write_rows(metrics_dir / metrics_filename(record), METRIC_COLUMNS, rows))
    summary_rows = (
        (r.algorithm, r.topology, r.seed, r.summary.total_rounds, r.summary.converged, r.summary.max_consensus_rounds)
        for r in records
    )
    written.append(_write_rows(root / "summary.csv", SUMMARY_COLUMNS, summary_rows))
    logger.debug("wrote %s csv file(s) under %s", len(written), root)
    return written


@dataclass(frozen=True)
class CellStats:
    algorithm: str
    topology: str
    runs: int
    mean: float
    min: int
    max: int
    # at least one run ended at the cap without meeting its tolerance
    capped: bool
    skipped: bool = False

    def render(self) -> str:
        if self.skipped:
            return "n/a"
        text = f"{self.mean:.0f}" if self.runs == 1 else f"{self.mean:.0f} ({self.min}-{self.max})"
        return text + (DAGGER if self.capped else "")


def summarize_rounds(entries: Iterable[tuple[str, str, int, bool, str]]) -> list[CellStats]:
    """(algorithm, topology, rounds, converged, reason) tuples -> per-cell mean/min/max."""
    cells: dict[tuple[str, str], list[tuple[int, bool, str]]] = defaultdict(list)
    for algorithm, topology, rounds, converged, reason in entries:
        cells[(algorithm, topology)].append((rounds, converged, reason))
    stats = []
    for (algorithm, topology), runs in cells.items():
        counted = [r for r in runs if r[2] != "skipped"]
        if not counted:
            stats.append(CellStats(algorithm, topology, len(runs), 0.0, 0, 0, False, skipped=True))
            continue
        rounds = [r[0] for r in counted]
        stats.append(
            CellStats(
                algorithm=algorithm,
                topology=topology,
                runs=len(counted),
                mean=statistics.fmean(rounds),
                min=min(rounds),
                max=max(rounds),
                capped=any(not r[1] for r in counted),
            )
        )
    return stats


def record_entries(records: Iterable[RunRecord]):
    return (
        (r.algorithm, r.topology, r.summary.total_rounds, r.summary.converged, r.summary.reason) for r in records
    )


def round_table_markdown(stats: list[CellStats], title: str = "Communication rounds to reach the stopping tolerance") -> str:
    algorithms = list(dict.fromkeys(s.algorithm for s in stats))
    topologies = list(dict.fromkeys(s.topology for s in stats))
    by_cell = {(s.algorithm, s.topology): s for s in stats}
    lines = [f"## {title}", "", "| algorithm | " + " | ".join(topologies) + " |"]
    lines.append("| --- | " + " | ".join(["---"] * len(topologies)) + " |")
    for algorithm in algorithms:
        cells = [by_cell[(algorithm, t)].render() if (algorithm, t) in by_cell else "-" for t in topologies]
        lines.append(f"| {algorithm} | " + " | ".join(cells) + " |")
    lines.append("")
    lines.append(f"{DAGGER} hit the round cap without satisfying the tolerance")
    return "\n".join(lines) + "\n"


def write_round_table(stats: list[CellStats], path, title: str | None = None) -> list[Path]:
    root = _ensure_dir(Path(path))
    rows = ((s.algorithm, s.topology, s.runs, s.mean, s.min, s.max, not s.capped, s.skipped) for s in stats)
    csv_path = _write_rows(
        root / "rounds.csv", ("algorithm", "topology", "runs", "mean", "min", "max", "converged", "skipped"), rows
    )
    md_path = root / "rounds.md"
    try:
        md_path.write_text(round_table_markdown(stats, title) if title else round_table_markdown(stats))
    except OSError as exc:
        raise OutputError(f"cannot write {md_path}: {exc}") from exc
    return [csv_path, md_path]


def _pyplot():
    """matplotlib.pyplot on the Agg backend, or None when rendering is unavailable."""
    try:
        import matplotlib

        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        logger.warning("matplotlib not installed; writing plot data files only")
        return None
    return plt


def _render(path: Path, draw) -> Path | None:
    plt = _pyplot()
    if plt is None:
        return None
    try:
        fig = draw(plt)
        fig.savefig(path, dpi=150, bbox_inches="tight")
        plt.close(fig)
    except Exception:
        logger.warning("rendering %s failed; data file kept", path.name, exc_info=True)
        return None
    return path


def _curve_figure(records: list[RunRecord], title: str):
    def draw(plt):
        fig, axes = plt.subplots(len(PLOTTED), 1, figsize=(7, 3 * len(PLOTTED)), sharex=True)
        for ax, column in zip(axes, PLOTTED):
            for record in records:
                rounds = [s.round for s in record.samples]
                values = [max(getattr(s, column), np.finfo(float).tiny) for s in record.samples]
                ax.semilogy(rounds, values, label=record.algorithm, linewidth=1.5)
            ax.set_ylabel(column.replace("_", " "))
            ax.grid(True, which="both", alpha=0.3)
        axes[0].set_title(title)
        axes[0].legend(loc="upper right", fontsize="small")
        axes[-1].set_xlabel("communication rounds")
        fig.tight_layout()
        return fig

    return draw


def _support_figure(record: RunRecord):
    rec = record.recovery

    def draw(plt):
        fig, ax = plt.subplots(figsize=(8, 3))
        idx = np.arange(len(rec.x_true))
        ax.stem(idx, rec.x_true, linefmt="C0-", markerfmt="C0o", basefmt=" ", label="true")
        ax.plot(idx, rec.x_final, "C1x", label="recovered")
        ax.set_title(
            f"support: precision {rec.precision:.2f}, recall {rec.recall:.2f}, "
            f"{len(rec.true_support)} true nonzeros"
        )
        ax.set_xlabel("coordinate")
        ax.legend(fontsize="small")
        fig.tight_layout()
        return fig

    return draw


def emit_plots(records: list[RunRecord], path) -> list[Path]:
    root = _ensure_dir(Path(path) / "plots")
    written: list[Path] = []
    groups: dict[tuple[str, str], list[RunRecord]] = defaultdict(list)
    for record in records:
        if record.samples:
            groups[(record.problem, record.topology)].append(record)

    for (problem, topology), group in groups.items():
        curves: list[RunRecord] = []
        for r in group:
            # first seed of each algorithm
            if all(c.algorithm != r.algorithm for c in curves):
                curves.append(r)
        stem = f"{problem}__{topology}"
        rows = (
            [r.algorithm] + [getattr(s, c) for c in ("round",) + PLOTTED] for r in curves for s in r.samples
        )
        written.append(_write_rows(root / f"{stem}.csv", ("algorithm", "round") + PLOTTED, rows))
        png = _render(root / f"{stem}.png", _curve_figure(curves, f"{problem} / {topology}"))
        if png is not None:
            written.append(png)

    for record in records:
        if record.recovery is None:
            continue
        rec = record.recovery
        stem = f"support__seed{record.seed}"
        true_set, found_set = set(rec.true_support), set(rec.recovered_support)
        rows = (
            (j, rec.x_true[j], rec.x_final[j], j in true_set, j in found_set) for j in range(len(rec.x_true))
        )
        written.append(_write_rows(root / f"{stem}.csv", ("index", "x_true", "x_final", "true_nonzero", "recovered_nonzero"), rows))
        png = _render(root / f"{stem}.png", _support_figure(record))
        if png is not None:
            written.append(png)
    return written


def emit_topology_plot(graph: Graph, label: str, path) -> Path | None:
    """Draw the graph at its sampled positions (random geometric) or a spring layout."""
    import networkx as nx

    root = _ensure_dir(Path(path) / "plots")
    g = graph.to_networkx()
    if graph.positions is not None:
        pos = {i: tuple(graph.positions[i]) for i in range(graph.n)}
    else:
        pos = nx.circular_layout(g) if graph.kind == "ring" else nx.spring_layout(g, seed=0)

    def draw(plt):
        fig, ax = plt.subplots(figsize=(4, 4))
        nx.draw_networkx(g, pos=pos, ax=ax, node_size=120, font_size=6)
        ax.set_title(f"{label} (diameter {graph.diameter})")
        ax.set_axis_off()
        return fig

    return _render(root / f"topology__{label}.png", draw)
