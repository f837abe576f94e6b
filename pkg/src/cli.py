"""
ymk-lab command line: identity checks and experiments on the lattice torus.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Annotated, Any, Callable, Dict, List, Optional

import typer
from rich import box
from rich.console import Console
from rich.table import Table

from deform import taubes_deform, ym_gradient_flow
from diagnostics import (
    check_failures, convergence_suite, exact_identity_suite, harmonicity_report, lp_ratio_report, rank_one_check,
)
from errors import CheckFailure, NearReducible, NoContraction, YMKError
from gauge_fields import Connection, curvature, energy_split, random_connection, random_form
from lattice_geometry import CutoffProfile, Torus4, cutoff_beta, pq_decompose, radial_cutoff_oracle
from lie_algebra import LieAlgebra
from records import (
    CONTINUITY_COLUMNS, CUTOFF_COLUMNS, DEFORM_TRACE_COLUMNS, GAP_COLUMNS, ExperimentRecord,
    append_record, records_path, write_csv_table,
)
from run_config import RunConfig, load_config
from snapshot_io import write_form
from spectral import continuity_sweep, lambda_A, mu_A
from utils import PROGRAM_NAME, get_worker_count, set_verbosity, timed

# Configure Logging
logger = logging.getLogger(__name__)

app = typer.Typer(
    name=PROGRAM_NAME,
    help="Yang-Mills lattice laboratory on the flat Kahler 4-torus",
    add_completion=False,
    rich_markup_mode="rich",
)

console = Console()

ConfigOption = Annotated[Optional[Path], typer.Option("--config", "-c", help="Flat dotted-key JSON config")]
OutOption = Annotated[Optional[Path], typer.Option("--out", "-o", help="Output directory (overrides output.dir)")]
SeedOption = Annotated[Optional[int], typer.Option("--seed", "-s", help="Field seed (overrides field.seed)")]
SnapshotsOption = Annotated[bool, typer.Option("--snapshots", help="Write YMK1 snapshots of the fields")]
VerboseOption = Annotated[bool, typer.Option("--verbose", "-v", help="Debug logging")]


@dataclass
class CommonOptions:
    config: Optional[Path] = None
    out: Optional[Path] = None
    seed: Optional[int] = None
    snapshots: bool = False
    verbose: bool = False


def _load(options: CommonOptions) -> RunConfig:
    overrides = {
        "output.dir": str(options.out) if options.out is not None else None,
        "field.seed": options.seed,
        "output.snapshots": True if options.snapshots else None,
    }
    return load_config(str(options.config) if options.config is not None else None, overrides)


def _execute(command: str, options: CommonOptions, body: Callable[[RunConfig], Dict[str, Any]]) -> None:
    """
    Loads the config, runs the body and appends one ExperimentRecord.

    Library errors become failed records and the exit code of their class.
    """
    set_verbosity(options.verbose)
    try:
        cfg = _load(options)
    except YMKError as e:
        console.print(f"[bold red]Error:[/bold red] {e.message}")
        raise typer.Exit(e.exit_code) from e

    with timed() as execution:
        try:
            payload = body(cfg)
            status, code = "ok", 0
        except YMKError as e:
            logger.error(f"{command} failed: {type(e).__name__}: {e.message}")
            console.print(f"[bold red]{type(e).__name__}:[/bold red] {e.message}")
            payload, status, code = e.to_payload(), type(e).__name__, e.exit_code
    execution["exit_code"] = code
    append_record(
        records_path(cfg.output_dir),
        ExperimentRecord(command, cfg.to_flat(), payload, status, execution=execution),
    )
    if code:
        raise typer.Exit(code)


def _connection(cfg: RunConfig, seed: Optional[int] = None, amplitude: Optional[float] = None) -> Connection:
    return random_connection(
        cfg.n, LieAlgebra(cfg.group), cfg.seed if seed is None else seed,
        cfg.amplitude if amplitude is None else amplitude, cfg.smoothness,
    )


def _snapshot(cfg: RunConfig, name: str, form) -> Optional[str]:
    if not cfg.snapshots:
        return None
    return write_form(os.path.join(cfg.output_dir, "snapshots", f"{name}.ymk"), form, cfg.group)


def _table(title: str, columns: List[str], rows: List[List[Any]]) -> None:
    table = Table(title=title, box=box.ROUNDED, show_header=True, header_style="bold magenta")
    for column in columns:
        table.add_column(column)
    for row in rows:
        table.add_row(*[f"{v:.4e}" if isinstance(v, float) else str(v) for v in row])
    console.print(table)


# check

def _check_body(cfg: RunConfig) -> Dict[str, Any]:
    algebra = LieAlgebra(cfg.group)
    reports = []
    for seed in cfg.check_seeds:
        A = _connection(cfg, seed=seed)
        reports.extend(exact_identity_suite(A, seed, corrupt=cfg.inject_corruption))
    reports.extend(convergence_suite(cfg.n, algebra))
    failed = check_failures(reports, cfg.exact_tol, cfg.order_min)

    _table(
        "Identity suite",
        ["identity", "n", "residual", "order"],
        [[r.name, r.n, r.residual, "-" if r.order_estimate is None else f"{r.order_estimate:.2f}"] for r in reports],
    )
    payload_reports = [r.to_payload() for r in reports]
    if failed:
        raise CheckFailure(f"{len(failed)} identities failed: {', '.join(sorted(set(failed)))}",
                           {"failures": failed, "reports": payload_reports})
    console.print(f"[bold green]All {len(reports)} identities passed[/bold green]")
    return {"reports": payload_reports, "failures": []}


@app.command()
def check(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """Exact identities at n plus refinement orders between n/2 and n. Exit 1 on any violation."""
    _execute("check", CommonOptions(config, out, seed, snapshots, verbose), _check_body)


# spectrum

def _spectrum_body(cfg: RunConfig) -> Dict[str, Any]:
    A = _connection(cfg)
    lam = lambda_A(A, cfg.spectral)
    mu = mu_A(A, cfg.spectral)
    _, _, _, f02 = pq_decompose(curvature(A))
    _snapshot(cfg, f"spectrum_seed{cfg.seed}_A", A.a)
    _snapshot(cfg, f"spectrum_seed{cfg.seed}_mu_witness", mu.witness_form())
    _table("Spectrum", ["quantity", "value"], [
        ["lambda", lam.value], ["mu", mu.value], ["mu (unconstrained)", mu.unconstrained_value],
    ])
    return {
        "lambda": lam.to_payload(),
        "mu": mu.to_payload(),
        "energy_split": energy_split(A),
        "harmonicity": harmonicity_report(A),
        "rank_one": rank_one_check(f02, A.algebra),
    }


@app.command()
def spectrum(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """lambda(A) and mu(A) for the configured random connection."""
    _execute("spectrum", CommonOptions(config, out, seed, snapshots, verbose), _spectrum_body)


# deform

def _deform_body(cfg: RunConfig) -> Dict[str, Any]:
    A = _connection(cfg)
    result = taubes_deform(A, cfg.deform)
    write_csv_table(
        os.path.join(cfg.output_dir, "deform_trace.csv"),
        [{"k": k, "trace_norm": value} for k, value in enumerate(result.trace_norms, start=1)],
        DEFORM_TRACE_COLUMNS,
    )
    _snapshot(cfg, f"deform_seed{cfg.seed}_s", result.s)
    _snapshot(cfg, f"deform_seed{cfg.seed}_A_inf", result.A_inf.a)
    _table("Deformation", ["quantity", "value"], [
        ["mode", result.mode.value], ["iterations", result.iterations],
        ["||Lambda F|| before", result.trace_norms[0]], ["||Lambda F|| after", result.final_residual],
        ["s ratio", result.s_norm_ratio],
    ])
    return result.to_payload()


@app.command()
def deform(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """Deform A to Lambda F = 0. Writes deform_trace.csv (k, trace_norm)."""
    _execute("deform", CommonOptions(config, out, seed, snapshots, verbose), _deform_body)


# flow

def _flow_body(cfg: RunConfig) -> Dict[str, Any]:
    A = _connection(cfg)
    result = ym_gradient_flow(A, cfg.flow)
    report = harmonicity_report(result.A)
    _snapshot(cfg, f"flow_seed{cfg.seed}_A", result.A.a)
    _table("Flow", ["quantity", "value"], [
        ["steps", result.steps], ["energy", result.energies[-1]],
        ["|d_A* F|", result.grad_norms[-1]], ["converged", result.converged],
    ])
    return {**result.to_payload(), "harmonicity": report, "lp_ratio": lp_ratio_report(result.A, 6.0)}


@app.command()
def flow(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """Yang-Mills gradient flow from the configured connection."""
    _execute("flow", CommonOptions(config, out, seed, snapshots, verbose), _flow_body)


# cutoff

def _cutoff_body(cfg: RunConfig) -> Dict[str, Any]:
    torus = Torus4(cfg.cutoff_grid_n)
    rows: List[Dict[str, Any]] = []
    for N in cfg.cutoff_N:
        oracle = radial_cutoff_oracle(CutoffProfile(N, cfg.cutoff_R))
        rows.append({"N": N, "R": cfg.cutoff_R, **oracle, "source": "oracle"})
        try:
            _, lattice = cutoff_beta(CutoffProfile.for_grid(N, cfg.cutoff_R, torus.h), torus)
            rows.append({"N": N, "R": cfg.cutoff_R, **lattice, "source": "lattice"})
        except YMKError as e:
            logger.warning(f"Cutoff N={N} not resolved on n={torus.n}: {e.message}")
    write_csv_table(os.path.join(cfg.output_dir, "cutoff.csv"), rows, CUTOFF_COLUMNS)
    sums = [row["norm_sum"] for row in rows if row["source"] == "oracle"]
    scaled = [row["scaled_sum"] for row in rows if row["source"] == "oracle"]
    _table("Cutoff", ["N", "source", "norm_sum", "scaled_sum"],
           [[row["N"], row["source"], row["norm_sum"], row["scaled_sum"]] for row in rows])
    return {
        "rows": rows,
        "decreasing": all(b < a for a, b in zip(sums, sums[1:])),
        "scaled_spread": max(scaled) / min(scaled) if scaled and min(scaled) > 0 else None,
    }


@app.command()
def cutoff(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """Logarithmic cutoff norms per N. Writes cutoff.csv (N, R, grad_l4, hess_l2, norm_sum, scaled_sum, source)."""
    _execute("cutoff", CommonOptions(config, out, seed, snapshots, verbose), _cutoff_body)


# continuity

def _continuity_body(cfg: RunConfig) -> Dict[str, Any]:
    A0 = _connection(cfg)
    direction = random_form(cfg.n, 1, A0.algebra, cfg.continuity_direction_seed, 1.0, cfg.smoothness)
    rows = [row.to_row() for row in continuity_sweep(A0, direction, cfg.continuity_amplitudes, cfg.spectral)]
    write_csv_table(os.path.join(cfg.output_dir, "continuity.csv"), rows, CONTINUITY_COLUMNS)
    _table("Continuity", CONTINUITY_COLUMNS, [[row[c] for c in CONTINUITY_COLUMNS] for row in rows])
    return {"rows": rows}


@app.command()
def continuity(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """lambda and mu along A0 + t a. Writes continuity.csv (t, a_l4, lambda, mu, d_lambda, d_mu)."""
    _execute("continuity", CommonOptions(config, out, seed, snapshots, verbose), _continuity_body)


# gap

def _gap_cell(cfg: RunConfig, seed: int, amplitude: float, grad_tol: float) -> Dict[str, Any]:
    """flow -> harmonicity -> lambda, mu -> deform for one cell; deformation failures are outcomes."""
    row: Dict[str, Any] = {"seed": seed, "amplitude": amplitude, "grad_tol": grad_tol}
    cell_cfg = cfg.with_overrides(**{"field.seed": seed})
    try:
        A = _connection(cell_cfg, seed=seed, amplitude=amplitude)
        flowed = ym_gradient_flow(A, replace(cfg.flow, grad_tol=grad_tol)).A
        report = harmonicity_report(flowed)
        lam = lambda_A(flowed, cell_cfg.spectral).value
        row.update({
            "fplus_norm": report["fplus"],
            "trace_before": report["trace"],
            "dbar_star_f02": report["dbar_star_f02"],
            "f_d": report["f_d"],
            "f_d_star": report["f_d_star"],
            "lambda": lam,
            "mu": mu_A(flowed, cell_cfg.spectral).value,
            "reducible": lam < cell_cfg.spectral.lambda_floor,
        })
        try:
            row["trace_after"] = taubes_deform(flowed, cell_cfg.deform).final_residual
            row["status"] = "ok"
        except (NearReducible, NoContraction) as e:
            row["trace_after"] = None
            row["status"] = type(e).__name__
        complete = True
    except YMKError as e:
        logger.warning(f"gap cell seed={seed} amplitude={amplitude} grad_tol={grad_tol} failed: {e.message}")
        row["status"] = type(e).__name__
        complete = False
    append_record(
        records_path(cfg.output_dir),
        ExperimentRecord("gap.cell", cfg.to_flat(), dict(row), "ok" if complete else row["status"]),
    )
    row["complete"] = complete
    return row


def _gap_body(cfg: RunConfig) -> Dict[str, Any]:
    cells = [(s, a, g) for s in cfg.gap_seeds for a in cfg.gap_amplitudes for g in cfg.gap_grad_tols]
    workers = min(get_worker_count(), max(1, len(cells)))
    logger.info(f"gap: {len(cells)} cells on {workers} workers")
    with ThreadPoolExecutor(max_workers=workers) as pool:
        rows = list(pool.map(lambda cell: _gap_cell(cfg, *cell), cells))
    write_csv_table(os.path.join(cfg.output_dir, "gap_table.csv"), rows, GAP_COLUMNS)
    _table("Gap table", GAP_COLUMNS, [[row.get(c, "-") for c in GAP_COLUMNS] for row in rows])

    completed = sum(row["complete"] for row in rows)
    fraction = completed / len(rows) if rows else 1.0
    payload = {"cells": len(rows), "completed": completed, "rows": rows}
    if fraction < 0.9:
        raise CheckFailure(f"Only {completed}/{len(rows)} gap cells completed", payload)
    return payload


@app.command()
def gap(
    config: ConfigOption = None, out: OutOption = None, seed: SeedOption = None,
    snapshots: SnapshotsOption = False, verbose: VerboseOption = False,
):
    """
    Seeds x amplitudes x grad_tols pipeline: flow, harmonicity, lambda, mu, deform.

    Writes gap_table.csv (seed, amplitude, grad_tol, fplus_norm, trace_before,
    trace_after, dbar_star_f02, f_d, f_d_star, lambda, mu, reducible, status).
    Cells with lambda below spectral.lambda_floor are flagged reducible.
    YMK_THREADS bounds the pool.
    """
    _execute("gap", CommonOptions(config, out, seed, snapshots, verbose), _gap_body)


def main() -> None:
    app()
