"""
Command-line interface for berknash.

Subcommands wrap the solvers and simulations: generate, validate, solve,
vom, arbitrage, simulate and mfg. Results go to stdout (or --out) as JSON
or CSV; status lines and tables go to stderr.
"""

import asyncio
import functools
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional
import logging

import click
import numpy as np
import pandas as pd
from rich.console import Console
from rich.table import Table

from . import __version__
from .config import RuntimeSettings, ScenarioConfig, load_config, save_config
from .errors import EXIT_NUMERICAL, EXIT_OK, BerkNashError
from .game.arbitrage import (
    DistortionPlan,
    assemble_qcqp,
    designer_objective,
    induced_equilibrium,
    kkt_verify,
    solve_arbitrage,
)
from .game.equilibrium import aggregate_cost, mean_field_sweep, solve_bne, solve_nash, vom_bound_check
from .game.learning import run
from .game.model import ConjectureKind, generate_scenario, validate
from .game.timescale import emit_diagnostics, run_two_timescale
from .utils.file_utils import create_directory, file_digest, write_csv
from .utils.json_serializer import format_json_output, save_json_to_file

logger = logging.getLogger(__name__)

console = Console(stderr=True)

SOLVE_KINDS = ["bne", "ne", "bne-const", "bne-agg", "bne-gmf", "bne-lmf"]
_KIND_TO_CONJECTURE = {
    "bne-const": ConjectureKind.CONSTANT,
    "bne-agg": ConjectureKind.AGGREGATE,
    "bne-gmf": ConjectureKind.GMF,
    "bne-lmf": ConjectureKind.LMF,
}


def handle_errors(func: Callable) -> Callable:
    """Map package errors to their exit codes; anything else exits 1."""

    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        start_time = time.time()
        try:
            return func(*args, **kwargs)
        except BerkNashError as e:
            logger.error(f"Command failed after {time.time() - start_time:.2f}s: {e}")
            console.print(f"Error: {e}", style="red", markup=False)
            raise SystemExit(e.exit_code)
        except KeyboardInterrupt:
            console.print("\nOperation cancelled by user.")
            raise SystemExit(1)
        except (click.ClickException, click.exceptions.Exit, SystemExit):
            raise
        except Exception as e:
            logger.exception(f"Unexpected error: {e}")
            console.print(f"An unexpected error occurred: {e}", style="red", markup=False)
            raise SystemExit(1)

    return wrapper


def _float_list(ctx, param, value: Optional[str]) -> Optional[List[float]]:
    if value is None:
        return None
    try:
        return [float(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated numbers, got {value!r}")


def _int_list(ctx, param, value: str) -> List[int]:
    try:
        return [int(v) for v in value.split(",") if v.strip()]
    except ValueError:
        raise click.BadParameter(f"expected comma-separated integers, got {value!r}")


def emit_json(data: Any, out: Optional[str]) -> None:
    if out:
        save_json_to_file(data, out)
        console.print(f"✓ Saved {out}")
    else:
        click.echo(format_json_output(data))


def emit_csv(frame: pd.DataFrame, out: Optional[str]) -> None:
    if out:
        write_csv(frame, out)
        console.print(f"✓ Saved {out}")
    else:
        click.echo(frame.to_csv(index=False, float_format="%.17g", lineterminator="\n"), nl=False)


config_option = click.option(
    "--config", "config_path", required=True, type=click.Path(dir_okay=False), help="Scenario JSON file."
)
out_option = click.option("--out", "out", type=click.Path(dir_okay=False), help="Write output here instead of stdout.")


@click.group()
@click.option("--verbose", "-v", is_flag=True, help="Enable debug logging.")
@click.version_option(__version__, prog_name="berknash")
def main(verbose: bool) -> None:
    """Equilibria, misspecification costs and cognitive arbitrage in linear-quadratic network games."""
    if verbose:
        logging.getLogger().setLevel(logging.DEBUG)


@main.command()
@click.option("--n", "n", default=12, show_default=True, type=int, help="Number of agents.")
@click.option("--avg-degree", default=3, show_default=True, type=int, help="Attention set size per agent.")
@click.option("--coverage", default=0.3, show_default=True, type=float, help="Target attended weight share.")
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--sigma", default=0.01, show_default=True, type=float, help="Observation noise scale.")
@click.option("--negative-fraction", default=0.0, show_default=True, type=float)
@click.option("--symmetric", is_flag=True, help="Draw a symmetric interaction matrix.")
@click.option("--budget", default=1.0, show_default=True, type=float, help="Designer distortion budget.")
@click.option("--out", "out", required=True, type=click.Path(dir_okay=False))
@handle_errors
def generate(n, avg_degree, coverage, seed, sigma, negative_fraction, symmetric, budget, out) -> None:
    """Draw a random scenario and write it as a config file."""
    game, attention = generate_scenario(
        n,
        avg_degree,
        coverage,
        seed,
        sigma=sigma,
        negative_fraction=negative_fraction,
        symmetric=symmetric,
    )
    config = ScenarioConfig.from_model(game, attention, budget=budget, seed=seed)
    save_config(config, out)
    achieved = attention.coverage(game)
    console.print(f"✓ Scenario written to {out} (n={n}, mean coverage {achieved.mean():.3f})")


@main.command("validate")
@config_option
@handle_errors
def validate_command(config_path) -> None:
    """Report stability diagnostics for a scenario."""
    config = load_config(config_path)
    report = validate(config.to_game(), config.to_attention(), config.to_conjecture())
    click.echo(format_json_output(report.to_dict()))


@main.command()
@config_option
@click.option("--kind", type=click.Choice(SOLVE_KINDS), default="bne", show_default=True,
              help="Equilibrium to compute; 'bne' uses the scenario's conjecture profile.")
@out_option
@handle_errors
def solve(config_path, kind, out) -> None:
    """Solve for a Nash or Berk-Nash equilibrium."""
    config = load_config(config_path)
    game = config.to_game()
    if kind == "ne":
        result = solve_nash(game)
    else:
        conjecture = _KIND_TO_CONJECTURE.get(kind) or config.to_conjecture()
        result = solve_bne(game, conjecture, config.to_attention())
    data = result.to_dict()
    data["cost"] = aggregate_cost(game, result.x)
    emit_json(data, out)


@main.command()
@config_option
@click.option("--scales", default="0.25,0.5,1.0", show_default=True, callback=_float_list,
              help="Comma-separated attenuation factors in [0, 1].")
@out_option
@handle_errors
def vom(config_path, scales, out) -> None:
    """Value of misspecification along attenuated perceptions."""
    config = load_config(config_path)
    conjecture = config.to_conjecture()
    report = vom_bound_check(config.to_game(), config.to_attention(), scales, conjecture)
    frame = pd.DataFrame(
        [
            {
                "scale": row.scale,
                "vom": row.vom,
                "cost_ne": row.cost_ne,
                "cost_bn": row.cost_bn,
                "delta_g_norm": row.delta_g_norm,
                "bound_ok": row.bound_ok,
            }
            for row in report.rows
        ],
        columns=["scale", "vom", "cost_ne", "cost_bn", "delta_g_norm", "bound_ok"],
    )
    emit_csv(frame, out)
    if not report.identity_ok:
        console.print(f"Nash cost identity off by {report.identity_error:.3e}", style="yellow")


def _agent_table(plan: DistortionPlan, x: np.ndarray, theta: Optional[np.ndarray]) -> List[Dict[str, Any]]:
    return [
        {
            "agent": i,
            "delta": float(plan.delta[i]),
            "x": float(x[i]),
            "theta": None if theta is None else float(theta[i]),
        }
        for i in range(len(x))
    ]


@main.command()
@config_option
@out_option
@handle_errors
def arbitrage(config_path, out) -> None:
    """Solve the designer's distortion problem and verify optimality."""
    config = load_config(config_path)
    designer = config.require_designer()
    game, attention, conjecture = config.to_game(), config.to_attention(), config.to_conjecture()

    q = assemble_qcqp(game, attention, designer.alpha, designer.budget, conjecture)
    plan = solve_arbitrage(q)
    kkt = kkt_verify(q, plan)
    induced = induced_equilibrium(game, attention, plan, conjecture)
    baseline_x = q.M @ game.b
    cost_baseline = aggregate_cost(game, baseline_x)
    cost_optimal = aggregate_cost(game, induced.x)
    rows = _agent_table(plan, induced.x, induced.theta)

    data = {
        "delta": plan.delta,
        "lambda": plan.lam,
        "active": plan.active,
        "f_opt": designer_objective(q, plan.delta),
        "x_induced": induced.x,
        "kkt": kkt.to_dict(),
        "plan": plan.to_dict(),
        "cost_baseline": cost_baseline,
        "cost_optimal": cost_optimal,
        "improvement": cost_baseline - cost_optimal,
        "table": rows,
    }
    emit_json(data, out)

    table = Table(title=f"Optimal distortion (lambda*={plan.lam:.6g}, active={plan.active})")
    for column in ("agent", "delta", "x", "theta"):
        table.add_column(column, justify="right")
    for row in rows:
        theta = "-" if row["theta"] is None else f"{row['theta']:.6g}"
        table.add_row(str(row["agent"]), f"{row['delta']:.6g}", f"{row['x']:.6g}", theta)
    console.print(table)

    if not kkt.passed:
        console.print("KKT verification failed", style="red")
        raise SystemExit(EXIT_NUMERICAL)
    console.print("✓ KKT conditions verified")


def _simulate_seed(config: ScenarioConfig, mode: str, seed: int, out_dir: Path) -> Dict[str, Any]:
    game, attention, conjecture = config.to_game(), config.to_attention(), config.to_conjecture()
    outputs = []
    try:
        if mode == "learning":
            learning = config.learning
            _, trace, report = run(
                game,
                attention,
                conjecture,
                schedule=learning.schedule(),
                seed=seed,
                max_steps=learning.max_steps,
                tol=learning.tol,
                window=learning.window,
                blowup_bound=learning.blowup_bound,
            )
            result = report.to_dict()
        else:
            trace, final = run_two_timescale(game, attention, config.two_scale_config(seed), conjecture)
            outputs.append(emit_diagnostics(trace, out_dir / f"diagnostics_seed{seed}.csv"))
            result = final.to_dict()
        outputs.insert(0, write_csv(trace.to_frame(), out_dir / f"trace_seed{seed}.csv"))
    except BerkNashError as e:
        logger.warning(f"Seed {seed} failed: {e}")
        return {"seed": seed, "error": str(e), "error_type": type(e).__name__, "exit_code": e.exit_code, "outputs": []}
    return {"seed": seed, "result": result, "exit_code": EXIT_OK, "outputs": [p.name for p in outputs]}


async def run_batch(config: ScenarioConfig, mode: str, seeds: List[int], out_dir: Path, threads: int) -> List[Dict[str, Any]]:
    """Fan seeds out over a thread pool; results come back in seed order."""
    loop = asyncio.get_running_loop()
    with ThreadPoolExecutor(max_workers=threads) as pool:
        tasks = [loop.run_in_executor(pool, _simulate_seed, config, mode, seed, out_dir) for seed in seeds]
        results = await asyncio.gather(*tasks)
    return sorted(results, key=lambda r: r["seed"])


def _summarize(mode: str, results: List[Dict[str, Any]]) -> Dict[str, Any]:
    summary: Dict[str, Any] = {"mode": mode, "version": __version__, "runs": results}
    ok = [r["result"] for r in results if "result" in r]
    summary["failed"] = [r["seed"] for r in results if "error" in r]
    if mode == "learning":
        counts: Dict[str, int] = {}
        for r in ok:
            counts[r["verdict"]] = counts.get(r["verdict"], 0) + 1
        summary["verdict_counts"] = dict(sorted(counts.items()))
    elif ok:
        summary["ordering_holds"] = sum(
            1 for r in ok if r["last_crossing"]["x"] < r["last_crossing"]["delta"]
        )
    return summary


@main.command()
@config_option
@click.option("--mode", type=click.Choice(["learning", "two-timescale"]), default="learning", show_default=True)
@click.option("--seeds", type=int, default=None, help="Number of seeds (defaults to the scenario's).")
@click.option("--out", "out_dir", default="runs", show_default=True, type=click.Path(file_okay=False))
@handle_errors
def simulate(config_path, mode, seeds, out_dir) -> None:
    """Run learning or two-time-scale simulations over a batch of seeds."""
    start_time = time.time()
    config = load_config(config_path)
    settings = RuntimeSettings.from_env()
    n_seeds = seeds if seeds is not None else config.simulation.seeds
    if n_seeds < 1:
        raise click.BadParameter("--seeds must be at least 1")
    seed_list = [config.simulation.seed + i for i in range(n_seeds)]
    out_path = create_directory(out_dir)

    console.print(f"Running {n_seeds} {mode} simulation(s) on {settings.threads} thread(s)...")
    results = asyncio.run(run_batch(config, mode, seed_list, out_path, settings.threads))
    summary = _summarize(mode, results)
    save_json_to_file(summary, out_path / "summary.json")

    outputs = [name for r in results for name in r["outputs"]] + ["summary.json"]
    manifest = {
        "config_hash": config.digest(),
        "seeds": seed_list,
        "version": __version__,
        "command": f"simulate --mode {mode} --seeds {n_seeds}",
        "outputs": outputs,
        "digests": {name: file_digest(out_path / name) for name in outputs},
        "duration_seconds": time.time() - start_time,
    }
    save_json_to_file(manifest, out_path / "manifest.json")

    table = Table(title=f"{mode} batch")
    table.add_column("seed", justify="right")
    table.add_column("outcome")
    for r in results:
        if "error" in r:
            outcome = f"{r['error_type']}: {r['error']}"
        elif mode == "learning":
            outcome = r["result"]["verdict"]
        else:
            crossing = r["result"]["last_crossing"]
            outcome = f"last crossings x={crossing['x']} theta={crossing['theta']} delta={crossing['delta']}"
        table.add_row(str(r["seed"]), outcome)
    console.print(table)
    console.print(f"✓ Batch completed in {time.time() - start_time:.2f}s, outputs in {out_path}")

    if summary["failed"] and len(summary["failed"]) == len(results):
        raise SystemExit(results[0]["exit_code"])


@main.command()
@click.option("--sizes", default="50,200,800", show_default=True, callback=_int_list)
@click.option("--gamma", default=0.5, show_default=True, type=float)
@click.option("--r", "r", default=1.0, show_default=True, type=float)
@click.option("--b", "b", default=1.0, show_default=True, type=float)
@click.option("--seed", default=0, show_default=True, type=int)
@click.option("--heterogeneity", default=1.0, show_default=True, type=float)
@out_option
@handle_errors
def mfg(sizes, gamma, r, b, seed, heterogeneity, out) -> None:
    """Gap between finite global mean-field equilibria and the mean-field limit."""
    rows = mean_field_sweep(sizes, gamma=gamma, r=r, b=b, seed=seed, heterogeneity=heterogeneity)
    frame = pd.DataFrame([row.to_dict() for row in rows], columns=["n", "max_gap", "mean_action", "limit"])
    emit_csv(frame, out)


if __name__ == "__main__":
    main()
