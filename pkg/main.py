"""
Command-line entry point: generate data, select prototypes, evaluate them,
run the property suites and the gain benchmark.

Every command writes its results plus a manifest.json into --out.
"""
import json
import sys
from contextlib import contextmanager
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple

import pandas as pd
import typer
from pydantic import BaseModel, ValidationError
from rich.console import Console

from core import __version__
from core.containers import Metric, ProblemSpec, SolverConfig, SolverMode
from core.errors import InvalidInputError, UniprotError
from core.logger import get_logger, set_level
from core.settings import get_settings
from core.similarity import build_similarity
from data.csv_io import load_csv, save_csv
from data.longtail_generator import Dataset, SkewSpec, gen_gaussian_longtail
from data.similarity_io import load_similarity
from evaluation.nn_classifier import nn_classify, weight_skew
from selection.bench import gain_trace_table, scaling_table
from selection.greedy_selector import (
    GainMode,
    Selection,
    StochasticConfig,
    select_kmedoids,
    select_per_source,
    select_random,
    select_uniprot,
    source_budgets,
)
from verify.instances import InstanceParams
from verify.property_suites import Suite, run_suite

app = typer.Typer(help="Uniform-weight prototype selection via partial optimal transport.",
                  no_args_is_help=True, add_completion=False)
console = Console(stderr=True)
logger = get_logger("cli")

_state = {"progress": True}


class Method(str, Enum):
    UNIPROT = "uniprot"
    KMEDOIDS = "kmedoids"
    RANDOM = "random"


class OutputFormat(str, Enum):
    JSON = "json"
    CSV = "csv"


class Manifest(BaseModel):
    command: str
    version: str
    seed: Optional[int]
    created: str
    config: Dict[str, Any]
    outputs: List[str]


def write_manifest(out: Path, command: str, config: Dict[str, Any], seed: Optional[int],
                   outputs: List[Path]) -> Path:
    manifest = Manifest(
        command=command,
        version=__version__,
        seed=seed,
        created=datetime.now(timezone.utc).isoformat(),
        config={key: value.value if isinstance(value, Enum) else str(value) if isinstance(value, Path) else value
                for key, value in config.items()},
        outputs=[p.name for p in outputs],
    )
    path = out / "manifest.json"
    path.write_text(manifest.model_dump_json(indent=2) + "\n", encoding="utf-8")
    return path


@contextmanager
def _handled():
    """Map library errors to exit codes: 2 for input/solver errors, 3 for OS errors."""
    try:
        yield
    except UniprotError as e:
        console.print(f"error[{e.code}]: {e.message}", markup=False, highlight=False)
        raise typer.Exit(code=2)
    except ValidationError as e:
        first = e.errors()[0]
        cause = first.get("ctx", {}).get("error")
        if isinstance(cause, UniprotError):
            message = f"error[{cause.code}]: {cause.message}"
        else:
            message = f"error[E_INPUT]: {first['msg']}"
        console.print(message, markup=False, highlight=False)
        raise typer.Exit(code=2)
    except OSError as e:
        console.print(f"error[E_IO]: {e}", markup=False, highlight=False)
        raise typer.Exit(code=3)


def _out_dir(out: Optional[Path], command: str) -> Path:
    path = out if out is not None else Path(get_settings().output_dir) / command
    path.mkdir(parents=True, exist_ok=True)
    return path


def _solver_config(solver: SolverMode, lam: Optional[float], max_iter: Optional[int],
                   tol: Optional[float]) -> SolverConfig:
    if SolverMode(solver) is SolverMode.EXACT:
        return SolverConfig.exact()
    settings = get_settings()
    return SolverConfig.entropic(
        lambda_=lam if lam is not None else settings.default_lambda,
        max_iter=max_iter,
        tol=tol if tol is not None else settings.default_tol,
    )


def parse_skew(text: str, num_classes: int) -> SkewSpec:
    """Parse "class:fraction,class:fraction" into a SkewSpec; an empty string means no skew."""
    pairs = []
    for item in filter(None, (part.strip() for part in text.split(","))):
        try:
            cls, fraction = item.split(":")
            pairs.append((int(cls), float(fraction)))
        except ValueError:
            raise InvalidInputError(f"cannot parse skew entry {item!r}, expected class:fraction")
    return SkewSpec(num_classes=num_classes, skew_classes=pairs)


def _parse_budgets(text: str) -> List[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError:
        raise InvalidInputError(f"cannot parse budgets {text!r}, expected comma-separated integers")


def _load_problem(source: Optional[Path], target: Optional[Path], similarity: Optional[Path],
                  label_column: Optional[str], metric: Metric, k: int) -> Tuple[ProblemSpec, Optional[Dataset]]:
    dataset = load_csv(source, label_column) if source is not None else None
    if similarity is not None:
        S = load_similarity(similarity)
        if dataset is not None and len(dataset) != S.rows:
            raise InvalidInputError(f"source has {len(dataset)} rows, similarity matrix has {S.rows}")
    elif dataset is not None:
        other = load_csv(target, label_column) if target is not None else dataset
        S = build_similarity(dataset.features, other.features, metric)
    else:
        raise InvalidInputError("give --source (and optionally --target) or --similarity")
    return ProblemSpec.uniform(S, k), dataset


@app.callback()
def main(quiet: bool = typer.Option(False, "--quiet", "-q", help="Only log warnings and hide progress bars."),
         log_level: Optional[str] = typer.Option(None, "--log-level", help="Override UNIPROT_LOG_LEVEL.")):
    if log_level:
        set_level(log_level)
    if quiet:
        set_level("WARNING")
    _state["progress"] = not quiet and sys.stderr.isatty()


@app.command("gen")
def cmd_gen(
    num_classes: int = typer.Option(10, help="Number of Gaussian classes."),
    dim: int = typer.Option(2, help="Feature dimension."),
    per_class_source: int = typer.Option(50, help="Source samples per class."),
    target_total: int = typer.Option(500, help="Target samples in total."),
    skew: str = typer.Option("0:0.05,1:0.05", help="Skewed target fractions as class:fraction pairs."),
    cluster_sep: float = typer.Option(10.0, help="Minimum distance between class means."),
    noise: float = typer.Option(1.0, help="Per-class standard deviation."),
    seed: int = typer.Option(0),
    out: Optional[Path] = typer.Option(None, help="Output directory."),
):
    """Write a balanced source.csv and a long-tailed target.csv."""
    config = dict(locals())
    with _handled():
        spec = parse_skew(skew, num_classes)
        source, target = gen_gaussian_longtail(num_classes, dim, per_class_source, target_total, spec,
                                               cluster_sep=cluster_sep, seed=seed, noise=noise)
        out = _out_dir(out, "gen")
        outputs = [save_csv(source, out / "source.csv"), save_csv(target, out / "target.csv")]
        write_manifest(out, "gen", config, seed, outputs)
    logger.info("wrote %d source and %d target rows to %s", len(source), len(target), out)


@app.command("select")
def cmd_select(
    k: int = typer.Option(..., "--k", help="Number of prototypes."),
    source: Optional[Path] = typer.Option(None, help="Source CSV."),
    target: Optional[Path] = typer.Option(None, help="Target CSV (defaults to the source)."),
    similarity: Optional[Path] = typer.Option(None, help="Precomputed .upsm similarity file."),
    label_column: Optional[str] = typer.Option(None, help="Label column in the CSVs."),
    metric: Metric = typer.Option(Metric.NEG_SQ_EUCLIDEAN),
    method: Method = typer.Option(Method.UNIPROT),
    solver: SolverMode = typer.Option(SolverMode.ENTROPIC, help="Partial OT solver for f."),
    lam: Optional[float] = typer.Option(None, "--lambda", help="Entropic regularisation (default 0.01)."),
    max_iter: Optional[int] = typer.Option(None, help="Entropic iterations (default by source size)."),
    tol: Optional[float] = typer.Option(None, help="Entropic marginal tolerance (default 1e-6)."),
    gain: GainMode = typer.Option(GainMode.APPROX, help="Marginal gain used by the greedy step."),
    stochastic: bool = typer.Option(False, help="Score a random candidate pool per step."),
    epsilon: float = typer.Option(0.01, help="Stochastic greedy failure probability."),
    warm_start: bool = typer.Option(False, help="Freeze the coupling of accepted prototypes."),
    per_source: bool = typer.Option(False, help="Select independently per source label."),
    budgets: Optional[str] = typer.Option(None, help="Per-source budgets, comma-separated, in label order."),
    seed: Optional[int] = typer.Option(None),
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format"),
    out: Optional[Path] = typer.Option(None, help="Output directory."),
):
    """Select k prototypes and write selection.json."""
    config = dict(locals())
    with _handled():
        spec, dataset = _load_problem(source, target, similarity, label_column, metric, k)
        cfg = _solver_config(solver, lam, max_iter, tol)
        pool = StochasticConfig(epsilon=epsilon) if stochastic else None

        if per_source:
            if dataset is None or dataset.labels is None:
                raise InvalidInputError("--per-source needs --source with --label-column")
            if budgets is None:
                raise InvalidInputError("--per-source needs --budgets")
            plan = source_budgets(_parse_budgets(budgets), dataset.labels)
            selection = select_per_source(spec, dataset.labels, plan, cfg, gain, pool, seed)
        elif method is Method.KMEDOIDS:
            selection = select_kmedoids(spec)
        elif method is Method.RANDOM:
            selection = select_random(spec, seed)
        else:
            selection = select_uniprot(spec, cfg, gain, pool, seed, warm_start=warm_start)

        out = _out_dir(out, "select")
        path = out / "selection.json"
        path.write_text(selection.to_json() + "\n", encoding="utf-8")
        outputs = [path]
        if fmt is OutputFormat.CSV:
            table = pd.DataFrame({"index": selection.indices, "weight": selection.weights})
            if len(selection.step_values) == len(selection.indices):
                table["step_value"] = selection.step_values
            table.to_csv(out / "selection.csv", index=False, lineterminator="\n")
            outputs.append(out / "selection.csv")
        write_manifest(out, "select", config, seed, outputs)
    console.print(f"selected {selection.indices}", highlight=False)


@app.command("eval")
def cmd_eval(
    source: Path = typer.Option(..., help="Labelled source CSV the selection indexes into."),
    target: Path = typer.Option(..., help="Labelled target CSV."),
    selection: Path = typer.Option(..., help="selection.json written by select."),
    label_column: str = typer.Option("label"),
    metric: Metric = typer.Option(Metric.NEG_SQ_EUCLIDEAN),
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format"),
    out: Optional[Path] = typer.Option(None, help="Output directory."),
):
    """1-NN accuracy of the selected prototypes on the target, and weight skew."""
    config = dict(locals())
    with _handled():
        if not selection.is_file():
            raise InvalidInputError(f"no such selection file: {selection}")
        picked = Selection.from_json(selection.read_text(encoding="utf-8"))
        labelled = load_csv(source, label_column)
        # target ids must follow the source ids, even when the target lacks a class
        held_out = load_csv(target, label_column, label_mapping=labelled.label_mapping)
        report = nn_classify(labelled, picked, held_out, metric)
        skew = weight_skew(picked) if picked.weights else None

        out = _out_dir(out, "eval")
        path = out / "eval_report.json"
        payload = {"manifest": "manifest.json", "report": report.model_dump(),
                   "weight_skew": skew.model_dump() if skew else None}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        outputs = [path]
        if fmt is OutputFormat.CSV:
            pd.DataFrame(report.per_class_rows()).to_csv(out / "per_class.csv", index=False, lineterminator="\n")
            outputs.append(out / "per_class.csv")
        write_manifest(out, "eval", config, picked.seed, outputs)
    console.print(f"accuracy {report.overall_accuracy:.4f}, minority {report.minority_avg_accuracy}",
                  highlight=False)


@app.command("verify")
def cmd_verify(
    suite: Optional[List[Suite]] = typer.Option(None, help="Suites to run (all when omitted)."),
    trials: int = typer.Option(200, min=0),
    min_m: int = typer.Option(2),
    max_m: int = typer.Option(10),
    min_n: int = typer.Option(2),
    max_n: int = typer.Option(8),
    max_k: int = typer.Option(3),
    seed: int = typer.Option(0),
    threads: Optional[int] = typer.Option(None, help="Worker processes (default UNIPROT_THREADS)."),
    allow_failures: bool = typer.Option(False, help="Exit 0 even when a property fails."),
    fmt: OutputFormat = typer.Option(OutputFormat.JSON, "--format"),
    out: Optional[Path] = typer.Option(None, help="Output directory."),
):
    """Run the property suites with the exact solvers and write verify_report.json."""
    config = dict(locals())
    config["suite"] = [s.value for s in suite] if suite else None
    with _handled():
        params = InstanceParams(min_m=min_m, max_m=max_m, min_n=min_n, max_n=max_n, max_k=max_k)
        workers = threads if threads is not None else get_settings().threads
        reports = [run_suite(s, trials, params, seed=seed, threads=workers, progress=_state["progress"])
                   for s in (suite or list(Suite))]

        out = _out_dir(out, "verify")
        path = out / "verify_report.json"
        payload = {"manifest": "manifest.json", "reports": [r.model_dump(mode="json") for r in reports]}
        path.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        outputs = [path]
        if fmt is OutputFormat.CSV:
            table = pd.DataFrame([{"suite": r.suite.value, "trials": r.trials, "failures": r.failures,
                                   "worst_violation": r.worst_violation, **r.statistics} for r in reports])
            table.to_csv(out / "verify_summary.csv", index=False, lineterminator="\n")
            outputs.append(out / "verify_summary.csv")
        write_manifest(out, "verify", config, seed, outputs)

    failed = sum(r.failures for r in reports)
    for r in reports:
        console.print(f"{r.suite.value}: {r.failures}/{r.trials} failed, worst {r.worst_violation:.3e}",
                      highlight=False)
    if failed and not allow_failures:
        raise typer.Exit(code=1)


@app.command("bench")
def cmd_bench(
    m: int = typer.Option(500, help="Points in the Gaussian-mixture instance."),
    k: int = typer.Option(50, "--k"),
    clusters: int = typer.Option(5),
    dim: int = typer.Option(2),
    cluster_sep: float = typer.Option(10.0),
    solver: SolverMode = typer.Option(SolverMode.EXACT, help="Partial OT solver for f."),
    lam: Optional[float] = typer.Option(None, "--lambda"),
    max_iter: Optional[int] = typer.Option(None),
    tol: Optional[float] = typer.Option(None),
    compare_exact: bool = typer.Option(True, help="Also run exact-gain greedy for the objective curve."),
    warm_start: bool = typer.Option(False),
    scaling: bool = typer.Option(True, help="Time gain scoring at m and 2m."),
    scaling_m: int = typer.Option(1000),
    scaling_n: int = typer.Option(200),
    seed: int = typer.Option(0),
    out: Optional[Path] = typer.Option(None, help="Output directory."),
):
    """Gain-ratio trace, objective curves and scaling timings as plot-ready CSV."""
    config = dict(locals())
    with _handled():
        if m < clusters:
            raise InvalidInputError(f"m={m} is smaller than the number of clusters {clusters}")
        points, _ = gen_gaussian_longtail(clusters, dim, m // clusters, clusters, SkewSpec(num_classes=clusters),
                                          cluster_sep=cluster_sep, seed=seed)
        spec = ProblemSpec.uniform(build_similarity(points.features, points.features), k)
        cfg = _solver_config(solver, lam, max_iter, tol)

        out = _out_dir(out, "bench")
        trace = gain_trace_table(spec, cfg, compare_exact=compare_exact, warm_start=warm_start)
        trace.to_csv(out / "bench_trace.csv", index=False, lineterminator="\n")
        outputs = [out / "bench_trace.csv"]
        summary = {"manifest": "manifest.json", "m": spec.m, "n": spec.n, "k": k,
                   "mean_ratio": float(trace["ratio"].mean()), "min_ratio": float(trace["ratio"].min()),
                   "max_ratio": float(trace["ratio"].max()), "f_approx": float(trace["f_approx"].iloc[-1])}
        if compare_exact:
            f_exact = float(trace["f_exact"].iloc[-1])
            summary["f_exact"] = f_exact
            summary["relative_gap"] = abs(f_exact - summary["f_approx"]) / f_exact if f_exact > 0 else 0.0
        if scaling:
            timings = scaling_table([scaling_m, 2 * scaling_m], scaling_n, min(k, scaling_n), seed=seed)
            timings.to_csv(out / "bench_scaling.csv", index=False, lineterminator="\n")
            outputs.append(out / "bench_scaling.csv")
            summary["scaling_factor"] = float(timings["relative_to_first"].iloc[-1])

        path = out / "bench_summary.json"
        path.write_text(json.dumps(summary, indent=2) + "\n", encoding="utf-8")
        outputs.append(path)
        write_manifest(out, "bench", config, seed, outputs)
    console.print(f"mean ratio {summary['mean_ratio']:.4f}, max ratio {summary['max_ratio']:.6f}", highlight=False)


if __name__ == "__main__":
    app()
