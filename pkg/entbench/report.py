"""
Offline reports for experiment records.

``write_report`` reads a record directory and writes tables, graph maps and
SVG plots next to it. Every output is a pure function of the record, so two
reports of the same record are byte-identical.
"""

import csv
import io
import math
from pathlib import Path
from typing import Any, Optional, Union

import networkx as nx
from loguru import logger

from .core.analyze import EntanglementGraph, MAX_NEGATIVITY
from .core.records import ExperimentRecord, dump_json
from .schemas import ExperimentKind, QremMode

SVG_HASH_SALT = "entbench"
BRANCHES_ALL = ("raw", "mitigated")
BRANCH_STYLE = {"raw": ("tab:gray", "o", "unmitigated"), "mitigated": ("tab:blue", "s", "mitigated")}


def headline_branches(qrem: QremMode) -> list[str]:
    qrem = QremMode(qrem)
    if qrem is QremMode.ON:
        return ["mitigated"]
    if qrem is QremMode.OFF:
        return ["raw"]
    return ["raw", "mitigated"]


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams.update(
        {
            "svg.hashsalt": SVG_HASH_SALT,
            "svg.fonttype": "none",
            "font.family": "DejaVu Sans",
            "axes.unicode_minus": False,
        }
    )
    import matplotlib.pyplot as plt

    return plt


def _save_svg(fig, path: Path) -> Path:
    fig.savefig(path, format="svg", metadata={"Date": None})
    fig.clf()
    return path


def _write_text(path: Path, text: str) -> Path:
    path.write_text(text, encoding="utf-8")
    return path


def _csv_text(header: list[str], rows: list[list[Any]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buffer.getvalue()


def _fmt(value: Optional[float]) -> str:
    if value is None or (isinstance(value, float) and not math.isfinite(value)):
        return ""
    return f"{value:.6g}"


# ---------------------------------------------------------------------------
# Graph maps
# ---------------------------------------------------------------------------


def entanglement_to_dot(egraph: EntanglementGraph) -> str:
    """DOT map with edge width and label following negativity; N = 0 edges dashed"""
    device = egraph.device
    values = egraph.values()
    lines = [f'graph "{device.name or "device"}" {{', "  node [shape=circle];"]
    for q in device.active_qubits:
        lines.append(f'  {q} [label="{q}"];')
    for (a, b) in device.sorted_edges:
        n = values.get((a, b))
        if n is None or n <= 0.0:
            lines.append(f'  {a} -- {b} [color="gray60" style=dashed label="0"];')
            continue
        width = 1.0 + 4.0 * n / MAX_NEGATIVITY
        lines.append(f'  {a} -- {b} [penwidth={width:.2f} label="{n:.3f}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


def entanglement_to_graphml(egraph: EntanglementGraph, path: Path) -> Path:
    graph = egraph.to_networkx()
    graph.graph["reducer"] = egraph.reducer.value
    graph.graph["label"] = egraph.label
    nx.write_graphml(graph, path)
    return path


# ---------------------------------------------------------------------------
# Per-kind reports
# ---------------------------------------------------------------------------


def _report_ghz_fidelity(record: ExperimentRecord, out: Path, branches: list[str]) -> list[Path]:
    mqc = record.derived["mqc"]
    summary = {
        "kind": record.plan.kind.value,
        "device": record.device.name,
        "n": mqc["n"],
        "source": mqc["embedding"]["source"],
        "depth": mqc["embedding"]["depth"],
        "replicates": record.plan.replicates,
        "headline": branches,
        "results": {b: mqc["summary"][b] for b in branches},
    }
    rows = []
    for b in branches:
        s = mqc["summary"][b]
        rows.append(
            [b, mqc["n"], _fmt(s["fidelity"]["value"]), _fmt(s["fidelity"]["stderr"]),
             _fmt(s["population"]["value"]), _fmt(s["coherence"]["value"])]
        )
    written = [
        _write_text(out / "summary.json", dump_json(summary)),
        _write_text(
            out / "summary.csv",
            _csv_text(["branch", "n", "fidelity", "fidelity_stderr", "population", "coherence"], rows),
        ),
    ]

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    first = mqc["replicates"][0]
    n = mqc["n"]
    for b in branches:
        color, marker, label = BRANCH_STYLE[b]
        signal = first[b]["signal"]
        phases = [math.pi * j / (n + 1) for j in range(len(signal))]
        ax.plot(phases, signal, color=color, marker=marker, label=label)
    ax.set_xlabel("phase φ (rad)")
    ax.set_ylabel("S_φ")
    ax.set_title(f"MQC signal, GHZ({n})")
    ax.legend()
    written.append(_save_svg(fig, out / "mqc_signal.svg"))
    plt.close(fig)
    return written


def _report_ghz_decay(record: ExperimentRecord, out: Path, branches: list[str]) -> list[Path]:
    decay = record.derived["decay"]
    times = decay["times_us"]
    rows = []
    for scheme, per_size in sorted(decay["schemes"].items()):
        for n_text, entry in sorted(per_size.items(), key=lambda kv: int(kv[0])):
            for b in branches:
                fit = entry[b]["fit"] or {}
                rows.append(
                    [scheme, int(n_text), b, _fmt(fit.get("c0")), _fmt(fit.get("alpha_per_us")),
                     _fmt(fit.get("alpha_stderr")), _fmt(fit.get("t_ghz_us")), _fmt(fit.get("r_squared"))]
                )
    summary = {
        "kind": record.plan.kind.value,
        "device": record.device.name,
        "sizes": record.plan.sizes,
        "headline": branches,
        "scaling": {s: {b: v[b] for b in branches} for s, v in sorted(decay["scaling"].items())},
    }
    written = [
        _write_text(out / "summary.json", dump_json(summary)),
        _write_text(
            out / "summary.csv",
            _csv_text(["dd", "n", "branch", "c0", "alpha_per_us", "alpha_stderr", "t_ghz_us", "r_squared"], rows),
        ),
    ]

    plt = _pyplot()
    for scheme, per_size in sorted(decay["schemes"].items()):
        fig, ax = plt.subplots(figsize=(6, 4))
        for n_text, entry in sorted(per_size.items(), key=lambda kv: int(kv[0])):
            for b in branches:
                values = [c["value"] for c in entry[b]["coherence"]]
                errors = [c["stderr"] for c in entry[b]["coherence"]]
                line = ax.errorbar(times, values, yerr=errors, fmt=BRANCH_STYLE[b][1], label=f"N={n_text} {b}")
                fit = entry[b]["fit"]
                if fit is not None:
                    grid = [times[0] + (times[-1] - times[0]) * k / 100 for k in range(101)]
                    curve = [fit["c0"] * math.exp(-fit["alpha_per_us"] * t) for t in grid]
                    ax.plot(grid, curve, color=line[0].get_color(), linestyle="--")
        ax.set_xlabel("delay t (µs)")
        ax.set_ylabel("coherence C")
        ax.set_title(f"GHZ coherence decay, DD {scheme}")
        ax.legend(fontsize=7)
        written.append(_save_svg(fig, out / f"decay_{scheme.replace(':', '-')}.svg"))
        plt.close(fig)
    return written


def _report_graph_characterisation(record: ExperimentRecord, out: Path, branches: list[str]) -> list[Path]:
    ent = record.derived["entanglement"]
    graphs = {b: EntanglementGraph.from_dict(ent[b]["graphs"]["max"], record.device) for b in BRANCHES_ALL}
    summary = {
        "kind": record.plan.kind.value,
        "headline": branches,
        "n_batches": ent["batches"]["n_batches"],
        "n_circuits": ent["n_circuits"],
        "rows": {b: ent[b]["summary"] for b in branches},
    }
    columns = [
        "device", "qubits", "edges", "mean_negativity", "sd_negativity",
        "connected_50", "connected_75", "connected_90", "whole_device", "disconnected",
    ]
    rows = [[b] + [ent[b]["summary"][c] for c in columns] for b in branches]
    edge_rows = []
    for edge in record.device.sorted_edges:
        row: list[Any] = [edge[0], edge[1]]
        for b in BRANCHES_ALL:
            est = graphs[b].stats.get(edge)
            row.extend([_fmt(est.value), _fmt(est.stderr)] if est else ["", ""])
        edge_rows.append(row)

    headline = graphs[branches[-1]]
    written = [
        _write_text(out / "summary.json", dump_json(summary)),
        _write_text(out / "summary.csv", _csv_text(["branch"] + columns, rows)),
        _write_text(
            out / "edges.csv",
            _csv_text(["a", "b", "raw", "raw_stderr", "mitigated", "mitigated_stderr"], edge_rows),
        ),
        _write_text(out / "entanglement.dot", entanglement_to_dot(headline)),
        entanglement_to_graphml(headline, out / "entanglement.graphml"),
    ]

    plt = _pyplot()
    labels = [f"{a}-{b}" for a, b in record.device.sorted_edges]
    width = 0.8 / len(branches)
    fig, ax = plt.subplots(figsize=(max(6, 0.25 * len(labels)), 4))
    for k, b in enumerate(branches):
        xs = [i + (k - (len(branches) - 1) / 2) * width for i in range(len(labels))]
        values = [graphs[b].stats[e].value if e in graphs[b].stats else 0.0 for e in record.device.sorted_edges]
        ax.bar(xs, values, width=width, color=BRANCH_STYLE[b][0], label=BRANCH_STYLE[b][2])
    ax.axhline(MAX_NEGATIVITY, color="black", linewidth=0.5)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels, rotation=90, fontsize=6)
    ax.set_ylabel("negativity")
    ax.set_ylim(0, 0.55)
    ax.legend()
    fig.tight_layout()
    written.append(_save_svg(fig, out / "negativity.svg"))
    plt.close(fig)
    return written


def _report_graph_decay(record: ExperimentRecord, out: Path, branches: list[str]) -> list[Path]:
    data = record.derived["graph_decay"]
    times = data["times_us"]
    summary = {
        "kind": record.plan.kind.value,
        "device": record.device.name,
        "headline": branches,
        "curves": {s: {b: v[b]["curve"] for b in branches} for s, v in sorted(data["schemes"].items())},
    }
    edge_rows = []
    for scheme, per_branch in sorted(data["schemes"].items()):
        for b in branches:
            for edge, series in sorted(per_branch[b]["edges"].items()):
                for t, est in zip(times, series):
                    edge_rows.append([scheme, b, edge, _fmt(t), _fmt(est["value"]), _fmt(est["stderr"])])
    written = [
        _write_text(out / "summary.json", dump_json(summary)),
        _write_text(out / "edges.csv", _csv_text(["dd", "branch", "edge", "t_us", "negativity", "stderr"], edge_rows)),
    ]

    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for scheme, per_branch in sorted(data["schemes"].items()):
        for b in branches:
            curve = per_branch[b]["curve"]
            ax.errorbar(
                [p["t_us"] for p in curve],
                [p["mean"] for p in curve],
                yerr=[p["sd"] for p in curve],
                marker=BRANCH_STYLE[b][1],
                capsize=2,
                label=f"{scheme} {b}",
            )
    ax.set_xlabel("delay t (µs)")
    ax.set_ylabel("mean device negativity")
    ax.set_ylim(0, 0.55)
    ax.legend(fontsize=7)
    written.append(_save_svg(fig, out / "mean_negativity.svg"))
    plt.close(fig)
    return written



_REPORTERS = {
    ExperimentKind.GHZ_FIDELITY: _report_ghz_fidelity,
    ExperimentKind.GHZ_DECAY: _report_ghz_decay,
    ExperimentKind.GRAPH_CHARACTERISE: _report_graph_characterisation,
    ExperimentKind.GRAPH_DECAY: _report_graph_decay,
}


def write_report(
    record: Union[ExperimentRecord, str, Path],
    out_dir: Optional[Union[str, Path]] = None,
    qrem: Optional[QremMode] = None,
) -> list[Path]:
    """
    Write the report of a record.

    Args:
        record: Loaded record or record directory
        out_dir: Destination, default ``<record>/report``
        qrem: Branch selection; defaults to the plan's setting
    """
    if not isinstance(record, ExperimentRecord):
        root = Path(record)
        record = ExperimentRecord.load(root)
        out = Path(out_dir) if out_dir else root / "report"
    else:
        if out_dir is None:
            raise ValueError("out_dir is required when passing a loaded record")
        out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    branches = headline_branches(qrem or record.plan.qrem)
    written = _REPORTERS[record.plan.kind](record, out, branches)
    logger.info(f"📊 Wrote {len(written)} report files to {out}")
    return written
