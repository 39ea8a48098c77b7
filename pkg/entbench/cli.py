"""
Command-line interface for entbench
"""

import argparse
import json
import sys
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Optional, Sequence

from loguru import logger

from .core.config import BenchConfig
from .deterministic import DEFAULT_SEED
from .core.embed import (
    circuits_per_plan,
    embed_ghz,
    embed_ghz_best,
    embedding_to_dot,
    plan_qst_batches,
    schedule_graph_state,
    schedule_to_dot,
)
from .core.errors import LayoutParseError, UnknownQubitError
from .core.mitigate import CalibrationMatrixSpec, mitigate, sigma_bound
from .core.records import ExperimentRecord, dump_json
from .core.sim import DensityMatrixSimulator, distribution_from_dict
from .core.topology import (
    DEFAULT_CX_ERROR,
    DEFAULT_READOUT_FLIP,
    DEFAULT_T1_US,
    DEFAULT_T2_US,
    DEFAULT_ZZ_RATE_MHZ,
    NAMED_LAYOUTS,
    Calibration,
    heavy_hex,
    linear,
    load_layout,
    save_layout,
)
from .client import BenchApi
from .report import write_report
from .schemas import CoherenceEstimator, ExperimentKind, ExperimentPlan, QremMode, WeightMetric
from .settings import get_settings

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_VALIDATION = 3
EXIT_RUNTIME = 4


# ANSI color codes for rich formatting
class Colors:
    RESET = '\033[0m'
    BOLD = '\033[1m'
    GREEN = '\033[92m'
    YELLOW = '\033[93m'
    RED = '\033[91m'
    CYAN = '\033[96m'


def _paint(color: str, text: str, stream=None) -> str:
    stream = stream or sys.stdout
    return f"{color}{text}{Colors.RESET}" if stream.isatty() else text


def configure_logging(level: Optional[str] = None) -> None:
    """Route loguru to stderr at ENTBENCH_LOG (or ``level``)"""
    logger.remove()
    logger.add(sys.stderr, level=level or get_settings().LOG)


# ---------------------------------------------------------------------------
# Argument types
# ---------------------------------------------------------------------------


def _us_to_ns(text: str) -> int:
    try:
        value = Decimal(text)
    except InvalidOperation:
        raise argparse.ArgumentTypeError(f"{text!r} is not a number of microseconds") from None
    if value < 0:
        raise argparse.ArgumentTypeError("Delays must be non-negative")
    return int((value * 1000).to_integral_value())


def parse_delay_grid(text: str) -> list[int]:
    """``a:b:step`` in microseconds, both ends inclusive, to nanoseconds"""
    parts = text.split(":")
    if len(parts) != 3:
        raise argparse.ArgumentTypeError(f"Delay grid is written a:b:step (us), got {text!r}")
    start, stop, step = (_us_to_ns(p) for p in parts)
    if step <= 0:
        raise argparse.ArgumentTypeError("Delay grid step must be positive")
    if stop < start:
        raise argparse.ArgumentTypeError("Delay grid end must not precede its start")
    return list(range(start, stop + 1, step))


def parse_int_list(text: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"Expected comma-separated integers, got {text!r}") from None


def _positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"{text!r} is not an integer") from None
    if value < 1:
        raise argparse.ArgumentTypeError("Value must be at least 1")
    return value


def _write_or_print(data: dict, output: Optional[str]) -> None:
    text = dump_json(data)
    if output:
        path = Path(output)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
        print(f"📄 Output saved to: {path}")
    else:
        sys.stdout.write(text)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------


def cmd_layout(args: argparse.Namespace) -> int:
    if args.layout_kind == "heavy-hex":
        g = heavy_hex(args.rows, args.cols, trim_corners=args.trim_corners)
    elif args.layout_kind == "line":
        g = linear(args.n)
    else:
        g = NAMED_LAYOUTS[args.name]()
    cal = Calibration.uniform(
        g,
        cx_error=args.cx_error,
        readout_flip=args.readout_flip,
        t1_us=args.t1,
        t2_us=args.t2,
        zz_rate_mhz=args.zz_rate,
    )
    path = save_layout(args.output, g, cal)
    print(f"✅ Layout with {len(g.active_qubits)} qubits and {len(g.edges)} edges")
    print(f"📄 Output saved to: {path}")
    return EXIT_OK


def cmd_embed(args: argparse.Namespace) -> int:
    g, cal = load_layout(args.layout)
    if args.embed_kind == "ghz":
        weight = WeightMetric(args.weight)
        if args.source is not None and not args.trial_all_sources:
            emb = embed_ghz(g, cal, args.source, args.n, weight)
        else:
            emb = embed_ghz_best(g, cal, args.n, None, weight)
        emb.check(g)
        data = emb.to_dict()
        dot = embedding_to_dot(emb, g)
        summary = f"GHZ({emb.n}) from source {emb.source} at CNOT depth {emb.depth}"
    else:
        schedule = schedule_graph_state(g)
        data = schedule.to_dict()
        dot = schedule_to_dot(schedule, g)
        summary = f"Graph state on {len(schedule.edges)} edges in {schedule.depth} CZ layers"
    _write_or_print(data, args.output)
    if args.dot:
        Path(args.dot).write_text(dot, encoding="utf-8")
    print(f"✅ {summary}", file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def cmd_batches(args: argparse.Namespace) -> int:
    g, _ = load_layout(args.layout)
    plan = plan_qst_batches(g)
    _write_or_print(plan.to_dict(), args.output)
    message = f"✅ {len(plan.batches)} batches, {circuits_per_plan(plan)} circuits"
    print(message, file=sys.stderr if not args.output else sys.stdout)
    return EXIT_OK


def build_plan(args: argparse.Namespace) -> ExperimentPlan:
    """ExperimentPlan from ``run`` flags; validation errors surface as ValueError"""
    fields = {
        "kind": ExperimentKind(args.kind),
        "replicates": args.replicates,
        "dd": args.dd or ["none"],
        "shots": args.shots,
        "exact": args.exact,
        "seed": args.seed,
        "qrem": QremMode(args.qrem),
        "weight": WeightMetric(args.weight),
        "coherence": CoherenceEstimator(args.coherence),
        "pi_pulse": args.pi_pulse,
        "light_cone": False if args.no_light_cone else None,
        "drop_layer": args.drop_layer,
    }
    if not args.trial_all_sources and args.sources:
        fields["sources"] = args.sources
    if args.n is not None:
        fields["n"] = args.n
    if args.sizes:
        fields["sizes"] = args.sizes
    if args.delay is not None:
        fields["delay_ns"] = args.delay
    if args.delay_grid:
        fields["delays_ns"] = args.delay_grid
    return ExperimentPlan(**fields)


def build_config(args: argparse.Namespace) -> BenchConfig:
    settings = get_settings()
    return BenchConfig(
        threads=args.threads or settings.THREADS,
        progress=settings.PROGRESS and not args.no_progress,
    )


def cmd_run(args: argparse.Namespace) -> int:
    plan = build_plan(args)
    g, cal = load_layout(args.layout)
    config = build_config(args)
    backend = None
    if args.noiseless:
        cal = Calibration.uniform(g, cx_error=0.0, readout_flip=0.0, sx_error=0.0)
        backend = DensityMatrixSimulator(None, config)
    with BenchApi(g, cal, config, backend) as api:
        record = api.run(plan, args.output)
    print(f"{_paint(Colors.GREEN, '✅')} {plan.kind.value} finished: {_headline(record)}")
    print(f"📄 Record saved to: {args.output}")
    return EXIT_OK


def _headline(record: ExperimentRecord) -> str:
    derived = record.derived
    if "mqc" in derived:
        s = derived["mqc"]["summary"]
        return (
            f"F = {s['raw']['fidelity']['value']:.4f} (raw), "
            f"{s['mitigated']['fidelity']['value']:.4f} (mitigated)"
        )
    if "entanglement" in derived:
        raw = derived["entanglement"]["raw"]["summary"]
        mit = derived["entanglement"]["mitigated"]["summary"]
        return (
            f"mean N = {raw['mean_negativity']:.4f} (raw), {mit['mean_negativity']:.4f} (mitigated), "
            f"whole-device = {mit['whole_device']}"
        )
    if "decay" in derived:
        return f"{len(derived['decay']['schemes'])} DD scheme(s) fitted"
    return f"{len(derived['graph_decay']['times_us'])} delays characterised"


def cmd_mitigate(args: argparse.Namespace) -> int:
    g, cal = load_layout(args.layout)
    try:
        data = json.loads(Path(args.counts).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as e:
        raise ValueError(f"Cannot read counts file {args.counts}: {e}") from e
    dist = distribution_from_dict(data)
    spec = CalibrationMatrixSpec.from_calibration(cal, args.qubits)
    config = BenchConfig()
    quasi = mitigate(dist, spec, args.hamming_limit, config.mitigation_tol, config.mitigation_max_iter)
    result = {
        "quasi": quasi.to_dict(),
        "nearest_physical": quasi.nearest_physical().to_dict(),
        "qubits": list(args.qubits),
    }
    if quasi.shots:
        result["sigma_bound"] = sigma_bound(quasi.overhead, quasi.shots)
    _write_or_print(result, args.output)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace) -> int:
    record = ExperimentRecord.load(args.record)
    mismatched = record.verify()
    if mismatched:
        print(f"❌ Error: derived results differ from stored counts: {', '.join(mismatched)}", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"✅ {len(record.derived)} derived result(s) reproduced from {len(record.counts)} count group(s)")
    return EXIT_OK


def cmd_report(args: argparse.Namespace) -> int:
    qrem = QremMode(args.qrem) if args.qrem else None
    written = write_report(args.record, args.output, qrem)
    print(f"✅ Report written ({len(written)} files)")
    for path in written:
        print(f"📄 {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="entbench",
        description="entbench - GHZ and graph-state entanglement benchmarks on simulated devices",
        formatter_class=argparse.RawDescriptionHelpFormatter,
        epilog="""
Examples:
  entbench layout heavy-hex --rows 3 --cols 5 -o dev.json
  entbench embed ghz dev.json --n 12 --trial-all-sources
  entbench batches dev.json
  entbench run ghz-fidelity dev.json --n 5 --replicates 3 -o rec-ghz/
  entbench run ghz-decay dev.json --sizes 3,5 --delay-grid 0:10:2 --dd hahn -o rec-decay/
  entbench run graph-characterise dev.json --shots 8192 --seed 7 -o rec/
  entbench analyze rec/
  entbench report rec/
        """,
    )
    sub = parser.add_subparsers(dest="command", required=True)

    # layout
    p_layout = sub.add_parser("layout", help="Generate a device layout file")
    layout_sub = p_layout.add_subparsers(dest="layout_kind", required=True)
    p_hex = layout_sub.add_parser("heavy-hex", help="Heavy-hex lattice")
    p_hex.add_argument("--rows", type=_positive_int, required=True)
    p_hex.add_argument("--cols", type=_positive_int, required=True)
    p_hex.add_argument("--trim-corners", action="store_true", help="Drop the two dangling corner qubits")
    p_line = layout_sub.add_parser("line", help="Linear chain")
    p_line.add_argument("--n", type=_positive_int, required=True)
    p_named = layout_sub.add_parser("named", help="Built-in device layout")
    p_named.add_argument("name", choices=sorted(NAMED_LAYOUTS))
    for p in (p_hex, p_line, p_named):
        p.add_argument("-o", "--output", required=True, help="Layout JSON file")
        p.add_argument("--cx-error", type=float, default=DEFAULT_CX_ERROR, help="Uniform CNOT error")
        p.add_argument("--readout-flip", type=float, default=DEFAULT_READOUT_FLIP, help="Uniform symmetric readout flip")
        p.add_argument("--t1", type=float, default=DEFAULT_T1_US, help="T1 in microseconds")
        p.add_argument("--t2", type=float, default=DEFAULT_T2_US, help="T2 in microseconds")
        p.add_argument("--zz-rate", type=float, default=DEFAULT_ZZ_RATE_MHZ, help="Residual ZZ rate, angular MHz")
        p.set_defaults(func=cmd_layout)

    # embed
    p_embed = sub.add_parser("embed", help="Plan a GHZ embedding or graph-state schedule")
    embed_sub = p_embed.add_subparsers(dest="embed_kind", required=True)
    p_ghz = embed_sub.add_parser("ghz", help="Depth-minimal GHZ embedding")
    p_ghz.add_argument("layout")
    p_ghz.add_argument("--n", type=_positive_int, required=True, help="GHZ size")
    p_ghz.add_argument("--source", type=int, help="Grow from this source only")
    p_ghz.add_argument("--trial-all-sources", action="store_true", help="Keep the shallowest source")
    p_ghz.add_argument("--weight", choices=[w.value for w in WeightMetric], default="cx_error")
    p_graph = embed_sub.add_parser("graph", help="CZ layer schedule of the native graph state")
    p_graph.add_argument("layout")
    for p in (p_ghz, p_graph):
        p.add_argument("-o", "--output", help="JSON output file (stdout if omitted)")
        p.add_argument("--dot", help="Also write a DOT map")
        p.set_defaults(func=cmd_embed)

    # batches
    p_batches = sub.add_parser("batches", help="Plan parallel tomography batches")
    p_batches.add_argument("layout")
    p_batches.add_argument("-o", "--output", help="JSON output file (stdout if omitted)")
    p_batches.set_defaults(func=cmd_batches)

    # run
    p_run = sub.add_parser("run", help="Run an experiment on the simulator")
    p_run.add_argument("kind", choices=[k.value for k in ExperimentKind])
    p_run.add_argument("layout")
    p_run.add_argument("-o", "--output", required=True, help="Record directory")
    p_run.add_argument("--n", type=_positive_int, help="GHZ size (ghz-fidelity)")
    p_run.add_argument("--sizes", type=parse_int_list, help="GHZ sizes, e.g. 3,5,7 (ghz-decay)")
    p_run.add_argument("--replicates", type=_positive_int, default=1)
    p_run.add_argument("--delay", type=_us_to_ns, help="Fixed delay in us (graph-characterise)")
    p_run.add_argument("--delay-grid", type=parse_delay_grid, help="a:b:step in us")
    p_run.add_argument("--dd", action="append", help="none, hahn, double-pi, pdd:<rate>[:staggered]; repeatable")
    p_run.add_argument("--shots", type=_positive_int, help="Shots per circuit (per-kind default)")
    p_run.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p_run.add_argument("--qrem", choices=[m.value for m in QremMode], default="both")
    p_run.add_argument("--threads", type=_positive_int, help="Worker threads (ENTBENCH_THREADS)")
    p_run.add_argument("--weight", choices=[w.value for w in WeightMetric], default="cx_error")
    p_run.add_argument("--coherence", choices=[c.value for c in CoherenceEstimator], default="overlap")
    p_run.add_argument("--pi-pulse", action="store_true", help="Refocusing X before the MQC phase rotation")
    p_run.add_argument("--sources", type=parse_int_list, help="Candidate GHZ sources")
    p_run.add_argument("--trial-all-sources", action="store_true")
    p_run.add_argument("--drop-layer", type=int, help="Leave one CZ layer out (fault injection)")
    p_run.add_argument("--exact", action="store_true", help="Exact distributions instead of sampling")
    p_run.add_argument("--noiseless", action="store_true", help="Ideal gates and readout")
    p_run.add_argument("--no-light-cone", action="store_true", help="Simulate full batch circuits")
    p_run.add_argument("--no-progress", action="store_true")
    p_run.set_defaults(func=cmd_run)

    # mitigate
    p_mit = sub.add_parser("mitigate", help="Mitigate one counts file")
    p_mit.add_argument("counts", help="Distribution JSON ({shots, counts})")
    p_mit.add_argument("layout")
    p_mit.add_argument("--qubits", type=parse_int_list, required=True, help="Measured qubits in clbit order")
    p_mit.add_argument("--hamming-limit", type=int)
    p_mit.add_argument("-o", "--output", help="JSON output file (stdout if omitted)")
    p_mit.set_defaults(func=cmd_mitigate)

    # analyze
    p_an = sub.add_parser("analyze", help="Recompute derived results from stored counts")
    p_an.add_argument("record")
    p_an.set_defaults(func=cmd_analyze)

    # report
    p_rep = sub.add_parser("report", help="Write tables, maps and plots for a record")
    p_rep.add_argument("record")
    p_rep.add_argument("-o", "--output", help="Report directory (default <record>/report)")
    p_rep.add_argument("--qrem", choices=[m.value for m in QremMode])
    p_rep.set_defaults(func=cmd_report)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Main CLI entry point"""
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging()
    try:
        return args.func(args)
    except (ValueError, LayoutParseError, UnknownQubitError) as e:
        print(f"{_paint(Colors.RED, '❌ Error:', sys.stderr)} {e}", file=sys.stderr)
        return EXIT_VALIDATION
    except Exception as e:
        print(f"{_paint(Colors.RED, '❌ Error:', sys.stderr)} {e}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
