"""Command-line client: one subcommand per pipeline stage plus the full run.

Stages hand off through files (VOXB grids, NASV models, JSON-lines candidate
logs, JSON reports), so ``voxelize`` -> ``search`` -> ``train`` with one seed
reproduces ``pipeline``.
"""
import json
import logging
import sys
import time
from pathlib import Path

import click

from src.reconstruction.config import PipelineConfig, build_config
from src.reconstruction.errors import FormatError, NasvoxError
from src.reconstruction.formats import (
    export_grid,
    read_candidate_log,
    read_json,
    read_mesh,
    read_model,
    read_voxels,
    write_candidate_log,
    write_json,
    write_mesh,
    write_voxels,
)
from src.reconstruction.geometry import support_set
from src.reconstruction.metrics import evaluate_reconstruction
from src.reconstruction.nas import CandidateRecord
from src.reconstruction.neuralnet import reconstruct
from src.reconstruction.pipeline import (
    compression_ratio,
    run_pipeline,
    search_and_select,
    search_log_header,
    training_data,
    voxelize_mesh,
)
from src.reconstruction.selection import finalize, select_with_report
from src.reconstruction.shapes import SHAPES, make_shape
from src.server.database_service import RunStoreError
from src.server.results_service import record_run
from utils.validation import parse_arch, validate_activations, validate_resolution

logger = logging.getLogger(__name__)


class _ErrorReportingGroup(click.Group):
    """Turns toolkit errors into exit code 1 and a JSON line on stderr."""

    def invoke(self, ctx):
        try:
            return super().invoke(ctx)
        except (NasvoxError, RunStoreError) as e:
            click.echo(json.dumps({"error": str(e), "type": type(e).__name__}), err=True)
            ctx.exit(1)


def _load_config(config_path, **overrides):
    overrides = {k: v for k, v in overrides.items() if v is not None}
    if config_path:
        return PipelineConfig.from_file(config_path, **overrides)
    return build_config(PipelineConfig, **overrides)


def _activations(text):
    return validate_activations(text) if text else None


def _echo_json(data):
    click.echo(json.dumps(data, sort_keys=True))


def _run_data(name, cfg, grid, records, chosen=None, final=None):
    return {
        "name": name,
        "resolution": grid.resolution,
        "seed": cfg.seed,
        "config": cfg.model_dump(mode="json"),
        "selected_arch": str(chosen.arch) if chosen is not None else None,
        "selected_size": chosen.size if chosen is not None else None,
        "iou": final.metrics.iou if final is not None else None,
        "cd_x1000": final.metrics.cd if final is not None else None,
        "candidates": [r.to_dict() for r in records],
    }


def _search_options(func):
    """Options shared by ``search`` and ``pipeline``."""
    options = [
        click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config file."),
        click.option("--seed", type=int, help="Seed for sampling, search and training."),
        click.option("--rounds", type=int, help="Search rounds."),
        click.option("--per-round", type=int, help="Candidates per round."),
        click.option("--proxy-epochs", type=int, help="Proxy training epochs per candidate."),
        click.option("--final-epochs", type=int, help="Epochs for retraining the selected network."),
        click.option("--threshold", type=float, help="Accuracy margin for post-processing."),
        click.option("--activations", help="Comma-separated activations, e.g. relu,elu,swish."),
        click.option("--no-size-reward", is_flag=True, help="Reward accuracy only."),
        click.option("--no-postprocess", is_flag=True, help="Take the max-reward candidate."),
        click.option("--parallel", is_flag=True, help="Train each round's candidates concurrently."),
        click.option("--db", type=click.Path(dir_okay=False), help="Record the run in this ledger database."),
    ]
    for option in reversed(options):
        func = option(func)
    return func


def _search_overrides(seed, rounds, per_round, proxy_epochs, final_epochs, threshold, activations,
                      no_size_reward, no_postprocess, parallel):
    return dict(
        seed=seed,
        rounds=rounds,
        per_round=per_round,
        proxy_epochs=proxy_epochs,
        final_epochs=final_epochs,
        threshold=threshold,
        activations=_activations(activations),
        size_reward_enabled=False if no_size_reward else None,
        postprocess_enabled=False if no_postprocess else None,
        parallel_candidates=True if parallel else None,
    )


@click.group(cls=_ErrorReportingGroup)
@click.option("-v", "--verbose", is_flag=True, help="Log progress at DEBUG level; otherwise only warnings.")
def cli(verbose):
    """Voxel models compressed into small searched MLP occupancy classifiers."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.WARNING,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


@cli.command()
@click.argument("name", type=click.Choice(sorted(SHAPES)))
@click.argument("out_path", type=click.Path(dir_okay=False))
def shape(name, out_path):
    """Write an analytic test mesh (OBJ or STL by extension)."""
    mesh = make_shape(name)
    write_mesh(out_path, mesh)
    _echo_json({"shape": name, "vertices": len(mesh.vertices), "triangles": len(mesh.triangles)})


@cli.command()
@click.argument("mesh_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("-n", "--resolution", type=int, default=128, show_default=True, help="Grid resolution N.")
@click.option("--radius", type=float, default=0.9, show_default=True, help="Bounding-sphere radius after normalization.")
def voxelize(mesh_path, out_path, resolution, radius):
    """Normalize and voxelize a mesh into a VOXB grid."""
    resolution = validate_resolution(resolution)
    cfg = build_config(PipelineConfig, resolution=resolution, radius=radius)
    grid = voxelize_mesh(read_mesh(mesh_path), cfg)
    write_voxels(out_path, grid)
    support = support_set(grid)
    _echo_json({"occupied": grid.occupied_count(), "surface": len(support.surface), "resolution": resolution})


@cli.command()
@click.argument("voxels_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--log", "log_path", type=click.Path(dir_okay=False), required=True, help="Candidate log (JSON lines).")
@click.option("--selection", "selection_path", type=click.Path(dir_okay=False), help="Selection report (JSON).")
@click.option("--name", default=None, help="Run name for the ledger; defaults to the grid file stem.")
@_search_options
def search(voxels_path, log_path, selection_path, name, config_path, seed, rounds, per_round, proxy_epochs,
           final_epochs, threshold, activations, no_size_reward, no_postprocess, parallel, db):
    """Search architectures for a voxel grid and select one."""
    grid = read_voxels(voxels_path)
    cfg = _load_config(
        config_path,
        resolution=grid.resolution,
        **_search_overrides(seed, rounds, per_round, proxy_epochs, final_epochs, threshold, activations,
                            no_size_reward, no_postprocess, parallel),
    )
    _, data = training_data(grid, cfg)
    result, report = search_and_select(grid, data, cfg)
    write_candidate_log(log_path, result.records, search_log_header(cfg, result.space))
    if selection_path:
        write_json(selection_path, report.to_dict())

    summary = {
        "candidates": len(result.records),
        "selected": str(report.chosen.arch),
        "size": report.chosen.size,
        "acc": report.chosen.acc,
        "greedy": str(result.greedy),
    }
    if db:
        run_name = name or Path(voxels_path).stem
        summary["run_id"] = record_run(db, _run_data(run_name, cfg, grid, result.records, report.chosen))
        logger.info("recorded run %s in %s", summary["run_id"], db)
    _echo_json(summary)


def _architecture_from(selection_path, log_path, arch_text, cfg):
    given = [p for p in (selection_path, log_path, arch_text) if p]
    if len(given) != 1:
        raise click.UsageError("give exactly one of --selection, --log or --arch")
    if arch_text:
        return parse_arch(arch_text, enforce_caps=False)
    if selection_path:
        return CandidateRecord.from_dict(read_json(selection_path)["chosen"]).arch
    _, records = read_candidate_log(log_path)
    if not records:
        raise FormatError(f"candidate log {log_path} has no candidates")
    return select_with_report(records, cfg.selection_config()).chosen.arch


@cli.command()
@click.argument("voxels_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("model_path", type=click.Path(dir_okay=False))
@click.option("--selection", "selection_path", type=click.Path(exists=True, dir_okay=False), help="Selection report from search.")
@click.option("--log", "log_path", type=click.Path(exists=True, dir_okay=False), help="Candidate log to select from.")
@click.option("--arch", "arch_text", help="Architecture, e.g. 32:relu,16:elu, 6x32:relu or an alias (default, ni).")
@click.option("--metrics", "metrics_path", type=click.Path(dir_okay=False), help="Write the metrics report here.")
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), help="JSON config file.")
@click.option("--seed", type=int, help="Initialization and shuffling seed.")
@click.option("--epochs", type=int, help="Training epochs.")
@click.option("--threshold", type=float, help="Accuracy margin when selecting from --log.")
@click.option("--no-postprocess", is_flag=True, help="Select the max-reward candidate from --log.")
def train(voxels_path, model_path, selection_path, log_path, arch_text, metrics_path, config_path, seed, epochs,
          threshold, no_postprocess):
    """Retrain a selected architecture from scratch and write the model."""
    started = time.perf_counter()
    grid = read_voxels(voxels_path)
    cfg = _load_config(
        config_path,
        resolution=grid.resolution,
        seed=seed,
        final_epochs=epochs,
        threshold=threshold,
        postprocess_enabled=False if no_postprocess else None,
    )
    arch = _architecture_from(selection_path, log_path, arch_text, cfg)
    _, data = training_data(grid, cfg)
    final = finalize(arch, data, grid, cfg.final_train_config(), model_path=model_path)
    final.metrics.compression_ratio = compression_ratio(grid, final.network)
    final.metrics.runtime_seconds = time.perf_counter() - started
    if metrics_path:
        write_json(metrics_path, final.metrics.to_dict())
    _echo_json({"arch": str(arch), **final.metrics.to_dict()})


@cli.command("reconstruct")
@click.argument("model_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("-n", "--resolution", type=int, default=128, show_default=True, help="Grid resolution N.")
def reconstruct_command(model_path, out_path, resolution):
    """Evaluate a model at every voxel center and write the VOXB grid."""
    resolution = validate_resolution(resolution)
    grid = reconstruct(read_model(model_path), resolution)
    write_voxels(out_path, grid)
    _echo_json({"occupied": grid.occupied_count(), "resolution": resolution})


@cli.command("eval")
@click.option("--pred", "pred_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--gt", "gt_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), help="Model, for size and compression.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), help="Write the metrics report here.")
def eval_command(pred_path, gt_path, model_path, out_path):
    """IoU and Chamfer distance between two voxel grids."""
    pred, gt = read_voxels(pred_path), read_voxels(gt_path)
    size = 0
    ratio = None
    if model_path:
        net = read_model(model_path)
        size = net.parameter_count
        ratio = compression_ratio(gt, net)
    metrics = evaluate_reconstruction(pred, gt, size=size)
    metrics.compression_ratio = ratio
    if out_path:
        write_json(out_path, metrics.to_dict())
    _echo_json(metrics.to_dict())


@cli.command()
@click.argument("voxels_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_path", type=click.Path(dir_okay=False))
@click.option("--format", "fmt", type=click.Choice(["obj", "points"]), default="obj", show_default=True)
def export(voxels_path, out_path, fmt):
    """Write a grid as an OBJ of voxel cubes or a list of voxel centers."""
    grid = read_voxels(voxels_path)
    export_grid(out_path, grid, fmt)
    _echo_json({"format": fmt, "occupied": grid.occupied_count()})


@cli.command()
@click.argument("mesh_path", type=click.Path(exists=True, dir_okay=False))
@click.argument("out_dir", type=click.Path(file_okay=False))
@click.option("-n", "--resolution", type=int, help="Grid resolution N.")
@click.option("--name", default=None, help="Output file prefix; defaults to the mesh file stem.")
@click.option("--fixed-arch", help="Skip the search and train this architecture (or alias default, ni).")
@_search_options
def pipeline(mesh_path, out_dir, resolution, name, fixed_arch, config_path, seed, rounds, per_round, proxy_epochs,
             final_epochs, threshold, activations, no_size_reward, no_postprocess, parallel, db):
    """Run every stage on one mesh and write all artifacts to OUT_DIR."""
    if resolution is not None:
        resolution = validate_resolution(resolution)
    if fixed_arch:
        parse_arch(fixed_arch, enforce_caps=False)
    cfg = _load_config(
        config_path,
        resolution=resolution,
        fixed_arch=fixed_arch,
        **_search_overrides(seed, rounds, per_round, proxy_epochs, final_epochs, threshold, activations,
                            no_size_reward, no_postprocess, parallel),
    )
    name = name or Path(mesh_path).stem
    result = run_pipeline(read_mesh(mesh_path), cfg, out_dir=out_dir, name=name)
    summary = result.summary()
    if db:
        records = result.search.records if result.search else []
        chosen = result.selection.chosen if result.selection else None
        run_data = _run_data(name, cfg, result.grid, records, chosen, result.final)
        if chosen is None:
            run_data["selected_arch"] = str(result.final.network.arch)
            run_data["selected_size"] = result.final.network.parameter_count
        summary["run_id"] = record_run(db, run_data)
        logger.info("recorded run %s in %s", summary["run_id"], db)
    _echo_json(summary)


if __name__ == "__main__":
    cli()
