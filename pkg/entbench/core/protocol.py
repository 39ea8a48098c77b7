"""
End-to-end experiments: GHZ fidelity, GHZ decay sweeps, whole-device graph-state
characterisation and graph-state decay sweeps.

Every experiment runs in two steps. ``run_*`` builds circuits, executes them
and stores raw distributions in an ExperimentRecord; ``derive_*`` turns those
raw distributions into derived results. ``ExperimentRecord.verify`` reruns the
``derive_*`` step on stored counts.
"""

import time
from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Any, Callable, Optional, Sequence

import anyio
from anyio import to_thread
from loguru import logger
from tqdm import tqdm

from .. import __version__
from ..deterministic import derive_seed, replicate_seeds
from ..schemas import CoherenceEstimator, ExperimentKind, ExperimentPlan, Reducer
from .analyze import (
    DecayFit,
    Estimate,
    MqcResult,
    analyze_mqc,
    build_entanglement_graph,
    coherence,
    device_mean_curve,
    fit_decay,
    fit_scaling,
    projection_negativities,
    setting_label,
    summary_row,
)
from .circuit import (
    QST_SETTINGS,
    Circuit,
    DdScheme,
    build_mqc,
    build_population,
    build_qst_batch,
    mqc_phase_grid,
    two_coloring,
)
from .config import BenchConfig
from .embed import (
    BatchPlan,
    GhzEmbedding,
    GraphStateSchedule,
    TomographySet,
    circuits_per_plan,
    embed_ghz_best,
    plan_qst_batches,
    schedule_graph_state,
)
from .errors import FitError
from .mitigate import CalibrationMatrixSpec, mitigate
from .noise import NoiseModel
from .records import ExperimentRecord
from .sim import Backend, DensityMatrixSimulator, Distribution, distribution_from_dict, light_cone_reduce
from .topology import Calibration, DeviceGraph

BRANCHES = ("raw", "mitigated")


@dataclass(frozen=True)
class Job:
    key: tuple
    circuit: Circuit
    seed: int


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


class ExperimentRunner:
    """
    Owns the backend and the worker pool for a set of experiments.

    Args:
        g: Device graph
        cal: Device calibration
        config: Library knobs; threads caps concurrent circuit executions
        backend: Execution backend; defaults to the density-matrix simulator
            with the calibration's full noise model
    """

    def __init__(
        self,
        g: DeviceGraph,
        cal: Calibration,
        config: Optional[BenchConfig] = None,
        backend: Optional[Backend] = None,
    ):
        self.device = g
        self.calibration = cal
        self.config = config or BenchConfig()
        self.backend = backend or DensityMatrixSimulator(NoiseModel.from_calibration(g, cal), self.config)
        self.config.log_summary()

    def close(self) -> None:
        logger.debug("Experiment runner closed")

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.close()

    def _run_job(self, job: Job, shots: int, exact: bool) -> Distribution:
        if exact:
            probabilities = getattr(self.backend, "probabilities", None)
            if probabilities is None:
                raise RuntimeError("Exact mode needs a backend with exact probabilities")
            return probabilities(job.circuit)
        return self.backend.run([job.circuit], shots, job.seed)[0]

    def execute(self, jobs: Sequence[Job], shots: int, exact: bool = False, desc: str = "circuits") -> dict:
        """
        Run ``jobs`` on worker threads; results are keyed by job key.

        A failing job does not cancel the others; the first failure in job
        order is re-raised once every job has finished.
        """
        results: dict = {}
        errors: dict[int, Exception] = {}

        async def worker(index: int, job: Job, limiter: anyio.CapacityLimiter, bar: tqdm) -> None:
            try:
                results[job.key] = await to_thread.run_sync(self._run_job, job, shots, exact, limiter=limiter)
            except Exception as e:
                errors[index] = e
            bar.update(1)

        async def main() -> None:
            limiter = anyio.CapacityLimiter(self.config.threads)
            with tqdm(total=len(jobs), desc=desc, disable=not self.config.progress) as bar:
                async with anyio.create_task_group() as tg:
                    for index, job in enumerate(jobs):
                        tg.start_soon(worker, index, job, limiter, bar)

        start = time.perf_counter()
        anyio.run(main)
        if errors:
            first = min(errors)
            logger.error(f"❌ {len(errors)} of {len(jobs)} {desc} failed; first: {jobs[first].key}")
            raise errors[first]
        logger.info(f"⚡ Executed {len(jobs)} {desc} in {time.perf_counter() - start:.2f}s")
        return results

    def run(self, plan: ExperimentPlan) -> ExperimentRecord:
        runners: dict[ExperimentKind, Callable[..., ExperimentRecord]] = {
            ExperimentKind.GHZ_FIDELITY: run_ghz_fidelity,
            ExperimentKind.GHZ_DECAY: run_ghz_decay,
            ExperimentKind.GRAPH_CHARACTERISE: run_graph_characterisation,
            ExperimentKind.GRAPH_DECAY: run_graph_decay,
        }
        return runners[plan.kind](self.device, self.calibration, plan, runner=self)


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _shots(plan: ExperimentPlan, config: BenchConfig) -> int:
    return plan.shots or config.shots_for(plan.kind.value)


def _light_cone(plan: ExperimentPlan, config: BenchConfig) -> bool:
    return config.light_cone if plan.light_cone is None else plan.light_cone


def _dd_schemes(plan: ExperimentPlan) -> list[DdScheme]:
    return [DdScheme.parse(text) for text in plan.dd]


def _group_label(dd: DdScheme) -> str:
    return dd.label.replace(":", "-")


def _x_gate_ns(cal: Calibration, qubits: Sequence[int]) -> int:
    return max(cal.qubit(q).x_ns for q in qubits)


def _open_runner(g, cal, config, backend, runner) -> tuple[ExperimentRunner, bool]:
    if runner is not None:
        return runner, False
    return ExperimentRunner(g, cal, config, backend), True


def _record(runner: ExperimentRunner, plan: ExperimentPlan, counts: dict, started: float) -> ExperimentRecord:
    record = ExperimentRecord(
        plan=plan,
        device=runner.device,
        calibration=runner.calibration,
        config=runner.config,
        counts=counts,
    )
    record.derived = derive_record(record)
    record.metadata = {
        "created": datetime.now(timezone.utc).isoformat(),
        "entbench_version": __version__,
        "wall_time_s": round(time.perf_counter() - started, 3),
    }
    return record


def _dist(data: dict) -> Distribution:
    return distribution_from_dict(data)


def _mitigated(dist: Distribution, spec: CalibrationMatrixSpec, config: BenchConfig) -> Distribution:
    quasi = mitigate(
        dist,
        spec,
        hamming_limit=config.hamming_limit,
        tol=config.mitigation_tol,
        max_iter=config.mitigation_max_iter,
    )
    return quasi.nearest_physical()


# ---------------------------------------------------------------------------
# GHZ fidelity and decay
# ---------------------------------------------------------------------------


def _ghz_embedding(g: DeviceGraph, cal: Calibration, plan: ExperimentPlan, n: int) -> GhzEmbedding:
    return embed_ghz_best(g, cal, n, plan.sources, plan.weight)


def _mqc_circuits(
    emb: GhzEmbedding,
    g: DeviceGraph,
    cal: Calibration,
    delay_ns: int = 0,
    dd: Optional[DdScheme] = None,
    pi_pulse: bool = False,
) -> list[Circuit]:
    """Population circuit followed by the 2N+2 phase circuits"""
    dd = dd or DdScheme()
    x_ns = _x_gate_ns(cal, emb.qubits)
    circuits = [build_population(emb, delay_ns, dd, x_ns, g.n_qubits)]
    circuits.extend(
        build_mqc(emb, phi, pi_pulse, delay_ns, dd, x_ns, g.n_qubits) for phi in mqc_phase_grid(emb.n)
    )
    return circuits


def mqc_circuit_count(n: int) -> int:
    """Circuits per replicate: 2N+2 MQC phase circuits plus one population circuit"""
    return 2 * n + 3


def _mqc_counts(results: dict, prefix: tuple, n_circuits: int) -> dict:
    dists = [results[prefix + (j,)].to_dict() for j in range(n_circuits)]
    return {"population": dists[0], "mqc": dists[1:]}


def _mqc_branches(group: dict, n: int, spec: CalibrationMatrixSpec, plan: ExperimentPlan, config: BenchConfig) -> dict:
    population = _dist(group["population"])
    mqc = [_dist(d) for d in group["mqc"]]
    out = {"raw": analyze_mqc(population, mqc, n, plan.coherence)}
    out["mitigated"] = analyze_mqc(
        _mitigated(population, spec, config), [_mitigated(d, spec, config) for d in mqc], n, plan.coherence
    )
    return out


def run_ghz_fidelity(
    g: DeviceGraph,
    cal: Calibration,
    plan: ExperimentPlan,
    config: Optional[BenchConfig] = None,
    backend: Optional[Backend] = None,
    runner: Optional[ExperimentRunner] = None,
) -> ExperimentRecord:
    """Embed GHZ(N), run 1 population + 2N+2 MQC circuits per replicate, analyse both branches"""
    started = time.perf_counter()
    runner, owned = _open_runner(g, cal, config, backend, runner)
    try:
        emb = _ghz_embedding(g, cal, plan, plan.n)
        circuits = _mqc_circuits(emb, g, cal, pi_pulse=plan.pi_pulse)
        jobs = [
            Job((r, j), c, derive_seed(plan.seed, r, j))
            for r in range(plan.replicates)
            for j, c in enumerate(circuits)
        ]
        results = runner.execute(jobs, _shots(plan, runner.config), plan.exact, desc="MQC circuits")
        counts = {f"r{r}": _mqc_counts(results, (r,), len(circuits)) for r in range(plan.replicates)}
        return _record(runner, plan, counts, started)
    finally:
        if owned:
            runner.close()


def derive_ghz_fidelity(record: ExperimentRecord) -> dict[str, Any]:
    plan, g, cal, config = record.plan, record.device, record.calibration, record.config
    emb = _ghz_embedding(g, cal, plan, plan.n)
    spec = CalibrationMatrixSpec.from_calibration(cal, emb.qubits)
    replicates = [
        _mqc_branches(record.counts[f"r{r}"], plan.n, spec, plan, config) for r in range(plan.replicates)
    ]
    summary = {}
    for branch in BRANCHES:
        results = [rep[branch] for rep in replicates]
        summary[branch] = {
            name: Estimate.of([getattr(res, name) for res in results]).to_dict()
            for name in ("fidelity", "population", "coherence")
        }
    mqc = {
        "n": plan.n,
        "embedding": emb.to_dict(),
        "circuits_per_replicate": mqc_circuit_count(plan.n),
        "replicates": [{b: rep[b].to_dict() for b in BRANCHES} for rep in replicates],
        "summary": summary,
    }
    return {"mqc": mqc, "seeds": _seeds(plan)}


def check_decay_grid(delays_ns: Sequence[int]) -> None:
    """Exponential fits need at least 3 delays, 2 of them distinct"""
    if len(delays_ns) < 3 or len(set(delays_ns)) < 2:
        raise FitError(f"Decay fit needs at least 3 delays, got {list(delays_ns)}")


def run_ghz_decay(
    g: DeviceGraph,
    cal: Calibration,
    plan: ExperimentPlan,
    config: Optional[BenchConfig] = None,
    backend: Optional[Backend] = None,
    runner: Optional[ExperimentRunner] = None,
) -> ExperimentRecord:
    """MQC at every (size, DD scheme, delay, replicate), then exponential fits per size"""
    check_decay_grid(plan.delays_ns)
    started = time.perf_counter()
    runner, owned = _open_runner(g, cal, config, backend, runner)
    try:
        schemes = _dd_schemes(plan)
        jobs: list[Job] = []
        layout: dict[tuple, int] = {}
        for ni, n in enumerate(plan.sizes):
            emb = _ghz_embedding(g, cal, plan, n)
            for di, dd in enumerate(schemes):
                for ti, delay in enumerate(plan.delays_ns):
                    circuits = _mqc_circuits(emb, g, cal, delay, dd, plan.pi_pulse)
                    for r in range(plan.replicates):
                        layout[(ni, di, ti, r)] = len(circuits)
                        jobs.extend(
                            Job((ni, di, ti, r, j), c, derive_seed(plan.seed, r, ni, di, ti, j))
                            for j, c in enumerate(circuits)
                        )
        results = runner.execute(jobs, _shots(plan, runner.config), plan.exact, desc="decay circuits")

        counts: dict[str, Any] = {}
        for ni, n in enumerate(plan.sizes):
            for di, dd in enumerate(schemes):
                for r in range(plan.replicates):
                    counts[f"n{n}_{_group_label(dd)}_r{r}"] = {
                        str(delay): _mqc_counts(results, (ni, di, ti, r), layout[(ni, di, ti, r)])
                        for ti, delay in enumerate(plan.delays_ns)
                    }
        return _record(runner, plan, counts, started)
    finally:
        if owned:
            runner.close()


def _fit_or_none(times_us: list[float], values: list[float]) -> Optional[DecayFit]:
    try:
        return fit_decay(times_us, values)
    except FitError as e:
        logger.warning(f"⚠️ Decay fit skipped: {e}")
        return None


def _coherence_estimates(
    per_delay: list[list[dict[str, MqcResult]]], branch: str, n: int, estimator: CoherenceEstimator
) -> list[Estimate]:
    """Coherence per delay, one Estimate over the replicates"""
    return [
        Estimate.of([coherence(rep[branch].amplitudes[n], estimator) for rep in reps]) for reps in per_delay
    ]


def derive_ghz_decay(record: ExperimentRecord) -> dict[str, Any]:
    plan, g, cal, config = record.plan, record.device, record.calibration, record.config
    times_us = [d * 1e-3 for d in plan.delays_ns]
    decay: dict[str, Any] = {}
    scaling: dict[str, Any] = {}
    for dd in _dd_schemes(plan):
        per_size: dict[str, Any] = {}
        fitted: dict[str, tuple[list[int], list[float]]] = {b: ([], []) for b in BRANCHES}
        for n in plan.sizes:
            emb = _ghz_embedding(g, cal, plan, n)
            spec = CalibrationMatrixSpec.from_calibration(cal, emb.qubits)
            groups = [record.counts[f"n{n}_{_group_label(dd)}_r{r}"] for r in range(plan.replicates)]
            per_delay = [
                [_mqc_branches(group[str(delay)], n, spec, plan, config) for group in groups]
                for delay in plan.delays_ns
            ]
            entry: dict[str, Any] = {"source": emb.source, "depth": emb.depth}
            for branch in BRANCHES:
                # C = 4*I_N is linear in the GHZ off-diagonal, so it carries the decay fit
                coherences = _coherence_estimates(per_delay, branch, n, CoherenceEstimator.PROJECTOR)
                overlaps = _coherence_estimates(per_delay, branch, n, CoherenceEstimator.OVERLAP)
                fidelities = [Estimate.of([rep[branch].fidelity for rep in reps]) for reps in per_delay]
                fit = _fit_or_none(times_us, [c.value for c in coherences])
                if fit is not None:
                    fitted[branch][0].append(n)
                    fitted[branch][1].append(fit.alpha)
                entry[branch] = {
                    "coherence": [c.to_dict() for c in coherences],
                    "overlap_coherence": [c.to_dict() for c in overlaps],
                    "fidelity": [f.to_dict() for f in fidelities],
                    "fit": fit.to_dict() if fit is not None else None,
                }
            per_size[str(n)] = entry
        decay[dd.label] = per_size
        scaling[dd.label] = {}
        for branch, (sizes, alphas) in fitted.items():
            try:
                scaling[dd.label][branch] = fit_scaling(sizes, alphas).to_dict()
            except FitError as e:
                logger.debug(f"No scaling fit for {dd.label}/{branch}: {e}")
                scaling[dd.label][branch] = None
    logger.info(f"📉 Fitted decay for sizes {plan.sizes} under {len(decay)} DD scheme(s)")
    return {
        "decay": {"times_us": times_us, "schemes": decay, "scaling": scaling},
        "seeds": _seeds(plan),
    }



# ---------------------------------------------------------------------------
# Graph states
# ---------------------------------------------------------------------------


def _schedule(g: DeviceGraph, plan: ExperimentPlan) -> GraphStateSchedule:
    schedule = schedule_graph_state(g)
    if plan.drop_layer is not None:
        logger.warning(f"⚠️ Dropping CZ layer {plan.drop_layer} of {schedule.depth}")
        schedule = schedule.without_layer(plan.drop_layer)
    return schedule


def _tomography_jobs(
    g: DeviceGraph,
    cal: Calibration,
    schedule: GraphStateSchedule,
    batches: BatchPlan,
    delay_ns: int,
    dd: DdScheme,
    light_cone: bool,
    seed: int,
    prefix: tuple,
) -> tuple[list[Job], list[tuple]]:
    """
    Jobs for one graph-state characterisation.

    Returns the jobs and a split table of (set label, setting label, job key,
    first clbit) rows telling how to read each set's counts out of the results.
    """
    x_ns = _x_gate_ns(cal, schedule.qubits)
    coloring = two_coloring(schedule) if dd.staggered else None
    jobs: list[Job] = []
    split: list[tuple] = []
    for bi, batch in enumerate(batches.batches):
        for si, setting in enumerate(QST_SETTINGS):
            label = setting_label(setting)
            if light_cone:
                for ki, ts in enumerate(batch):
                    cone = light_cone_reduce(g, ts)
                    circuit = build_qst_batch(
                        schedule.restrict(cone.qubits),
                        [ts],
                        setting,
                        delay_ns,
                        dd,
                        x_ns,
                        dephase=cone.dephase,
                        n_qubits=g.n_qubits,
                        coloring=coloring,
                    )
                    key = prefix + (bi, si, ki)
                    jobs.append(Job(key, circuit, derive_seed(seed, *key)))
                    split.append((ts, label, key, 0))
            else:
                circuit = build_qst_batch(schedule, batch, setting, delay_ns, dd, x_ns, n_qubits=g.n_qubits)
                key = prefix + (bi, si)
                jobs.append(Job(key, circuit, derive_seed(seed, *key)))
                offset = 0
                for ts in batch:
                    split.append((ts, label, key, offset))
                    offset += len(ts.measured)
    return jobs, split


def _split_counts(results: dict, split: list[tuple]) -> dict:
    counts: dict[str, dict] = {}
    for ts, label, key, offset in split:
        dist = results[key]
        width = len(ts.measured)
        if dist.n_clbits != width:
            dist = dist.marginal(list(range(offset, offset + width)))
        counts.setdefault(ts.label, {})[label] = dist.to_dict()
    return counts


def _characterise(
    runner: ExperimentRunner,
    plan: ExperimentPlan,
    schedule: GraphStateSchedule,
    batches: BatchPlan,
    cells: list[tuple[str, int, DdScheme, tuple]],
) -> dict:
    """Run every (group, delay, scheme) cell; returns counts per group name"""
    g, cal = runner.device, runner.calibration
    light_cone = _light_cone(plan, runner.config)
    jobs: list[Job] = []
    splits: dict[str, list[tuple]] = {}
    for group, delay, dd, prefix in cells:
        cell_jobs, split = _tomography_jobs(g, cal, schedule, batches, delay, dd, light_cone, plan.seed, prefix)
        jobs.extend(cell_jobs)
        splits[group] = split
    mode = "light-cone" if light_cone else "full-register"
    logger.info(
        f"🔬 {len(batches.batches)} batches ({circuits_per_plan(batches)} circuits per characterisation), "
        f"{len(jobs)} {mode} simulations"
    )
    results = runner.execute(jobs, _shots(plan, runner.config), plan.exact, desc="tomography circuits")
    return {group: _split_counts(results, split) for group, split in splits.items()}


def run_graph_characterisation(
    g: DeviceGraph,
    cal: Calibration,
    plan: ExperimentPlan,
    config: Optional[BenchConfig] = None,
    backend: Optional[Backend] = None,
    runner: Optional[ExperimentRunner] = None,
) -> ExperimentRecord:
    """Prepare the native graph state, run pair tomography on every edge, map entanglement"""
    started = time.perf_counter()
    runner, owned = _open_runner(g, cal, config, backend, runner)
    try:
        schedule = _schedule(g, plan)
        batches = plan_qst_batches(g)
        dd = _dd_schemes(plan)[0]
        cells = [(f"r{r}", plan.delay_ns, dd, (r,)) for r in range(plan.replicates)]
        counts = _characterise(runner, plan, schedule, batches, cells)
        return _record(runner, plan, counts, started)
    finally:
        if owned:
            runner.close()


def _edge_projections(
    record: ExperimentRecord, groups: Sequence[str], batches: BatchPlan
) -> dict[str, dict]:
    """Per branch: edge -> list over replicates of {ring outcome: negativity}"""
    cal, config = record.calibration, record.config
    shots = _shots(record.plan, config) if not record.plan.exact else None
    out: dict[str, dict] = {b: {} for b in BRANCHES}
    for ts in batches.sets:
        spec = CalibrationMatrixSpec.from_calibration(cal, ts.measured)
        for group in groups:
            raw = {label: _dist(d) for label, d in record.counts[group][ts.label].items()}
            mitigated = {label: _mitigated(d, spec, config) for label, d in raw.items()}
            for branch, dists in (("raw", raw), ("mitigated", mitigated)):
                negs = projection_negativities(dists, ts, config.min_projection_shots, shots)
                out[branch].setdefault(ts.pair, []).append(negs)
    return out


def _entanglement(record: ExperimentRecord, groups: Sequence[str], batches: BatchPlan) -> dict:
    g = record.device
    projections = _edge_projections(record, groups, batches)
    result: dict[str, Any] = {}
    for branch in BRANCHES:
        graphs = {
            reducer.value: build_entanglement_graph(g, projections[branch], reducer, branch)
            for reducer in Reducer
        }
        result[branch] = {
            "graphs": {name: eg.to_dict() for name, eg in graphs.items()},
            "summary": summary_row(graphs[Reducer.MAX.value]),
            "projections": {
                f"{a}-{b}": reps for (a, b), reps in sorted(projections[branch].items())
            },
        }
    return result


def derive_graph_characterisation(record: ExperimentRecord) -> dict[str, Any]:
    plan, g = record.plan, record.device
    schedule = _schedule(g, plan)
    batches = plan_qst_batches(g)
    groups = [f"r{r}" for r in range(plan.replicates)]
    entanglement = _entanglement(record, groups, batches)
    entanglement.update(
        {
            "schedule": schedule.to_dict(),
            "batches": batches.to_dict(),
            "n_circuits": circuits_per_plan(batches),
            "delay_ns": plan.delay_ns,
            "dd": plan.dd[0],
        }
    )
    return {"entanglement": entanglement, "seeds": _seeds(plan)}


def run_graph_decay(
    g: DeviceGraph,
    cal: Calibration,
    plan: ExperimentPlan,
    config: Optional[BenchConfig] = None,
    backend: Optional[Backend] = None,
    runner: Optional[ExperimentRunner] = None,
) -> ExperimentRecord:
    """Whole-device characterisation at every delay of the grid, per DD scheme"""
    started = time.perf_counter()
    runner, owned = _open_runner(g, cal, config, backend, runner)
    try:
        schedule = _schedule(g, plan)
        batches = plan_qst_batches(g)
        cells = [
            (f"{_group_label(dd)}_t{delay}_r{r}", delay, dd, (di, ti, r))
            for di, dd in enumerate(_dd_schemes(plan))
            for ti, delay in enumerate(plan.delays_ns)
            for r in range(plan.replicates)
        ]
        counts = _characterise(runner, plan, schedule, batches, cells)
        return _record(runner, plan, counts, started)
    finally:
        if owned:
            runner.close()


def derive_graph_decay(record: ExperimentRecord) -> dict[str, Any]:
    plan, g = record.plan, record.device
    batches = plan_qst_batches(g)
    times_us = [d * 1e-3 for d in plan.delays_ns]
    schemes: dict[str, Any] = {}
    for dd in _dd_schemes(plan):
        per_branch: dict[str, Any] = {b: {"curve": [], "edges": {}} for b in BRANCHES}
        graphs_by_branch: dict[str, list] = {b: [] for b in BRANCHES}
        for delay in plan.delays_ns:
            groups = [f"{_group_label(dd)}_t{delay}_r{r}" for r in range(plan.replicates)]
            projections = _edge_projections(record, groups, batches)
            for branch in BRANCHES:
                eg = build_entanglement_graph(g, projections[branch], Reducer.MAX, branch)
                graphs_by_branch[branch].append(eg)
                for (a, b), stat in sorted(eg.stats.items()):
                    per_branch[branch]["edges"].setdefault(f"{a}-{b}", []).append(stat.to_dict())
        for branch in BRANCHES:
            per_branch[branch]["curve"] = device_mean_curve(times_us, graphs_by_branch[branch])
        schemes[dd.label] = per_branch
    return {"graph_decay": {"times_us": times_us, "schemes": schemes}, "seeds": _seeds(plan)}


# ---------------------------------------------------------------------------
# Dispatch
# ---------------------------------------------------------------------------


def _seeds(plan: ExperimentPlan) -> dict:
    return {"master": plan.seed, "replicates": replicate_seeds(plan.seed, plan.replicates)}


_DERIVERS: dict[ExperimentKind, Callable[[ExperimentRecord], dict[str, Any]]] = {
    ExperimentKind.GHZ_FIDELITY: derive_ghz_fidelity,
    ExperimentKind.GHZ_DECAY: derive_ghz_decay,
    ExperimentKind.GRAPH_CHARACTERISE: derive_graph_characterisation,
    ExperimentKind.GRAPH_DECAY: derive_graph_decay,
}


def derive_record(record: ExperimentRecord) -> dict[str, Any]:
    """Derived results of a record, recomputed from its raw counts"""
    return _DERIVERS[record.plan.kind](record)


def run_experiment(
    g: DeviceGraph,
    cal: Calibration,
    plan: ExperimentPlan,
    config: Optional[BenchConfig] = None,
    backend: Optional[Backend] = None,
) -> ExperimentRecord:
    with ExperimentRunner(g, cal, config, backend) as runner:
        return runner.run(plan)
