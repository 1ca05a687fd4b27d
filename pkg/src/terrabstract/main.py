import functools
import logging
from pathlib import Path

import click
import pandas as pd
from pydantic import ValidationError

from terrabstract import __version__
from terrabstract.config import CONFIG
from terrabstract.pathfind import COST_MODES
from terrabstract.skirmish.elo import rate_win_tables
from terrabstract.skirmish.scenario import Scenario
from terrabstract.skirmish.tournament import WinTable, tournament
from terrabstract.terrain import load_terrain
from terrabstract.trajectory import analyze_corpus, fidelity, load_trajectory, snap
from terrabstract.utils import (
    TerrabstractError,
    atomic_write,
    dump_document,
    dump_line,
    load_document,
)
from terrabstract.waygraph import (
    GraphConfig,
    build_graph,
    dump_graph,
    load_graph,
    revalidate,
)

logger = logging.getLogger(__name__)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR"]

existing_file = click.Path(exists=True, dir_okay=False, path_type=Path)
output_file = click.Path(dir_okay=False, path_type=Path)


def reports_errors(command):
    """Turn library errors into a click error (exit code 1)."""

    @functools.wraps(command)
    def wrapper(*args, **kwargs):
        try:
            return command(*args, **kwargs)
        except (TerrabstractError, ValidationError, OSError) as e:
            raise click.ClickException(str(e)) from e

    return wrapper


def load(what: str, path: Path, loader):
    """Call `loader(path)` and prefix any error with the offending file."""
    try:
        return loader(path)
    except (TerrabstractError, ValidationError, OSError) as e:
        raise click.ClickException(f"{what} {path}: {e}") from e


def default_output(out: Path | None, name: str) -> Path:
    return out if out is not None else CONFIG.output_root_dir / name


def write(path: Path, text: str):
    atomic_write(path, text)
    logger.info(f"Output written to {path}")


def print_table(rows: dict):
    width = max(len(k) for k in rows)
    for key, value in rows.items():
        click.echo(f"{key:<{width}}  {value}")


@click.group(context_settings={"help_option_names": ["-h", "--help"]})
@click.version_option(__version__, prog_name="terrabstract")
@click.option(
    "--log-level",
    default="INFO",
    type=click.Choice(LOG_LEVELS, case_sensitive=False),
    help="Verbosity of the log on stderr.",
)
def cli(log_level: str):
    """Waypoint graphs from terrain, path fidelity and skirmish tournaments."""
    logging.basicConfig(
        level=log_level.upper(), format="%(levelname)s %(name)s: %(message)s"
    )


@cli.command("build-graph")
@click.option("--terrain", "terrain_file", required=True, type=existing_file)
@click.option("--spacing", type=click.FloatRange(min=0, min_open=True), default=None)
@click.option("--slope-max", type=float, default=None, help="Degrees.")
@click.option("--detour-max", type=float, default=None)
@click.option("--vstep-max", type=float, default=None)
@click.option(
    "--seed-x", type=float, default=None, help="Defaults to the terrain origin."
)
@click.option(
    "--seed-z", type=float, default=None, help="Defaults to the terrain origin."
)
@click.option("--out", type=output_file, default=None)
@reports_errors
def build_graph_command(
    terrain_file: Path,
    spacing: float | None,
    slope_max: float | None,
    detour_max: float | None,
    vstep_max: float | None,
    seed_x: float | None,
    seed_z: float | None,
    out: Path | None,
):
    """Generate and validate a waypoint graph for a terrain."""
    grid = load("terrain", terrain_file, load_terrain)
    try:
        cfg = GraphConfig(
            spacing=CONFIG.spacing if spacing is None else spacing,
            slope_max_deg=CONFIG.slope_max_deg if slope_max is None else slope_max,
            detour_max=CONFIG.detour_max if detour_max is None else detour_max,
            vstep_max=CONFIG.vstep_max if vstep_max is None else vstep_max,
            seed_x=grid.origin_x if seed_x is None else seed_x,
            seed_z=grid.origin_z if seed_z is None else seed_z,
        )
    except ValidationError as e:
        raise click.UsageError(f"invalid graph parameters: {e}") from e

    graph = build_graph(grid, cfg)
    out = default_output(out, f"{terrain_file.stem}.graph")
    write(out, dump_graph(graph))
    summary = graph.summary()
    print_table(
        {
            "nodes": summary["nodes"],
            "valid nodes": summary["valid_nodes"],
            "edges": summary["edges"],
            "valid edges": summary["valid_edges"],
            **{f"invalid ({k})": v for k, v in summary["invalid_edges"].items()},
            "components": summary["components"],
        }
    )


@cli.command("validate-graph")
@click.option("--terrain", "terrain_file", required=True, type=existing_file)
@click.option("--graph", "graph_file", required=True, type=existing_file)
@reports_errors
def validate_graph_command(terrain_file: Path, graph_file: Path):
    """Re-derive every validity flag of a graph from its terrain."""
    grid = load("terrain", terrain_file, load_terrain)
    graph = load("graph", graph_file, load_graph)
    mismatches = revalidate(graph, grid)
    for line in mismatches:
        click.echo(line)
    click.echo(f"{len(mismatches)} mismatches")
    if mismatches:
        raise click.ClickException(f"graph {graph_file} does not match {terrain_file}")


@cli.command("snap")
@click.option("--graph", "graph_file", required=True, type=existing_file)
@click.option("--traj", "traj_file", required=True, type=existing_file)
@click.option("--cost", type=click.Choice(COST_MODES), default=None)
@click.option("--out", type=output_file, default=None)
@reports_errors
def snap_command(graph_file: Path, traj_file: Path, cost: str | None, out: Path | None):
    """Snap a trajectory onto the graph and report its fidelity."""
    mode = cost or CONFIG.cost_mode
    graph = load("graph", graph_file, load_graph)
    traj = load("trajectory", traj_file, load_trajectory)
    try:
        snapped = snap(graph, traj, mode)  # type: ignore[arg-type]
    except TerrabstractError as e:
        raise click.ClickException(f"trajectory {traj_file}: {e}") from e
    document = {"trajectory": str(traj_file), "snapped": snapped.model_dump()}
    try:
        report = fidelity(traj, snapped, graph)
    except TerrabstractError as e:
        logger.warning(f"No fidelity report for {traj_file}: {e}")
    else:
        document["fidelity"] = report.model_dump()
        print_table(
            {
                "samples": report.samples,
                "waypoints": len(snapped.path),
                "actual distance": f"{report.roundwise_actual:.3f}",
                "waypoint distance": f"{report.roundwise_waypoint:.3f}",
                "relative difference": f"{report.relative_difference:.4f}",
            }
        )
    out = default_output(out, f"{traj_file.stem}.snap.yaml")
    write(out, dump_document(document, flow_lists=True))


@cli.command("analyze")
@click.option("--graph", "graph_file", required=True, type=existing_file)
@click.option(
    "--traj-dir",
    required=True,
    type=click.Path(exists=True, file_okay=False, path_type=Path),
)
@click.option("--cost", type=click.Choice(COST_MODES), default=None)
@click.option("--out", type=output_file, default=None)
@reports_errors
def analyze_command(
    graph_file: Path, traj_dir: Path, cost: str | None, out: Path | None
):
    """Fidelity of every trajectory (*.csv) in a directory."""
    graph = load("graph", graph_file, load_graph)
    paths = sorted(traj_dir.glob("*.csv"))
    mode = cost or CONFIG.cost_mode
    report = analyze_corpus(graph, paths, mode)  # type: ignore[arg-type]
    write(default_output(out, f"{traj_dir.name}.report.yaml"), report.to_document())

    with pd.option_context("display.float_format", "{:.4f}".format):
        click.echo(report.to_frame().to_string(index=False))
    agg = report.aggregate
    print_table(
        {
            "trajectories": agg.trajectories,
            "skipped": agg.skipped,
            "errors": agg.errored,
            "relative difference": f"{agg.relative_difference_mean:.4f} "
            f"+- {agg.relative_difference_std:.4f}",
            "mean diff (step)": f"{agg.mean_diff_stepwise:.4f}",
            "mean diff (round)": f"{agg.mean_diff_roundwise:.4f}",
        }
    )


@cli.command("simulate")
@click.option("--terrain", "terrain_file", required=True, type=existing_file)
@click.option("--graph", "graph_file", required=True, type=existing_file)
@click.option("--scenario", "scenario_file", required=True, type=existing_file)
@click.option("--episodes-per-pair", type=click.IntRange(min=1), default=1)
@click.option(
    "--seed",
    type=click.IntRange(min=0, max=2**64 - 1),
    default=None,
    help="Base seed; defaults to rng_seed of the scenario.",
)
@click.option("--out", type=output_file, default=None)
@click.option("--transcript", is_flag=True, help="Also write a per-step transcript.")
@reports_errors
def simulate_command(
    terrain_file: Path,
    graph_file: Path,
    scenario_file: Path,
    episodes_per_pair: int,
    seed: int | None,
    out: Path | None,
    transcript: bool,
):
    """Play a tournament over all start position pairs of a scenario."""
    grid = load("terrain", terrain_file, load_terrain)
    graph = load("graph", graph_file, load_graph)
    scenario = load("scenario", scenario_file, Scenario.from_recipe)
    base_seed = scenario.config.rng_seed if seed is None else seed

    steps: list | None = [] if transcript else None
    table = tournament(
        grid,
        graph,
        scenario.config,
        scenario.blue,
        scenario.red,
        base_seed,
        episodes_per_pair=episodes_per_pair,
        transcript=steps,
    )
    out = default_output(out, f"{scenario_file.stem}.results.yaml")
    write(out, table.to_yaml())
    if steps is not None:
        write(
            out.with_name(f"{out.stem}.transcript.yaml"),
            "".join(f"- {dump_line(record)}\n" for record in steps),
        )
    print_table(
        {
            "blue": table.blue,
            "red": table.red,
            "episodes": len(table.rows),
            "blue wins": table.blue_wins,
            "red wins": table.red_wins,
            **table.end_reasons,
        }
    )


@cli.command("elo-report")
@click.option("--results", required=True, multiple=True, type=existing_file)
@click.option(
    "--k", "k_factor", type=click.FloatRange(min=0, min_open=True), default=None
)
@click.option("--out", type=output_file, default=None)
@reports_errors
def elo_report_command(
    results: tuple[Path, ...], k_factor: float | None, out: Path | None
):
    """Elo ratings from one or more simulation results."""
    tables = [
        load("results", path, lambda p: WinTable.from_document(load_document(p)))
        for path in results
    ]
    table = rate_win_tables(tables, k_factor)
    write(default_output(out, "elo.yaml"), table.to_yaml())
    print_table({name: f"{rating:.2f}" for name, rating in table.ranking()})


if __name__ == "__main__":
    cli()
