"""Stage functions shared by the command line and the end-to-end run.

Each stage consumes and produces plain objects that round-trip through the
files in :mod:`formats`, so running the stages one by one with the same seed
gives the same result as :func:`run_pipeline`.
"""
import logging
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .config import PipelineConfig
from .formats import encode_model, write_candidate_log, write_json, write_model, write_voxels
from .geometry import normalize_mesh, support_set, voxelize
from .nas import SearchResult, SearchSpace, run_search
from .neuralnet import ActivationKind, ArchSpec
from .sampling import build_training_set
from .selection import FinalModel, SelectionReport, finalize, select_with_report

logger = logging.getLogger(__name__)

# Topology of the fixed-architecture baseline, capped at our six hidden layers.
NO_NAS_ARCH = "6x32:relu"
NI_ARCH = "8x32:relu"
ARCH_ALIASES = {"default": NO_NAS_ARCH, "ni": NI_ARCH}


def fixed_architecture(text):
    """Architecture for runs without search; accepts the aliases ``default`` and ``ni``."""
    return ArchSpec.from_string(ARCH_ALIASES.get(text.strip().lower(), text))


def voxelize_mesh(mesh, cfg):
    return voxelize(normalize_mesh(mesh, cfg.radius), cfg.resolution)


def training_data(grid, cfg):
    support = support_set(grid)
    return support, build_training_set(grid, support, cfg=cfg.sampling_config())


def search_space(cfg):
    return SearchSpace(activations=tuple(ActivationKind.from_name(a) for a in cfg.activations))


def search_log_header(cfg, space):
    return {"config": cfg.model_dump(mode="json"), "space": space.to_dict()}


def search_and_select(grid, data, cfg):
    space = search_space(cfg)
    result = run_search(grid, data, space, cfg.search_config())
    report = select_with_report(result.records, cfg.selection_config())
    return result, report


def compression_ratio(grid, net):
    """Bytes of the packed voxel grid per byte of the stored model."""
    return -(-grid.resolution ** 3 // 8) / len(encode_model(net))


@dataclass
class PipelineResult:
    grid: object
    data: object
    search: Optional[SearchResult]
    selection: Optional[SelectionReport]
    final: FinalModel

    def summary(self):
        return {
            "arch": str(self.final.network.arch),
            "metrics": self.final.metrics.to_dict(),
            "candidates": len(self.search.records) if self.search else 0,
            "training_set": self.data.to_dict(),
        }


def run_pipeline(mesh, cfg=None, out_dir=None, name="model"):
    """voxelize, sample, search, select, retrain, reconstruct and score one mesh.

    With ``cfg.fixed_arch`` set the search is skipped. Files land in
    ``out_dir`` when given: ``<name>.voxb``, ``<name>.candidates.jsonl``,
    ``<name>.selection.json``, ``<name>.nasv``, ``<name>.metrics.json``.
    """
    cfg = cfg or PipelineConfig()
    started = time.perf_counter()
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    grid = voxelize_mesh(mesh, cfg)
    _, data = training_data(grid, cfg)

    search = report = None
    if cfg.fixed_arch:
        arch = fixed_architecture(cfg.fixed_arch)
    else:
        search, report = search_and_select(grid, data, cfg)
        arch = report.chosen.arch

    final = finalize(arch, data, grid, cfg.final_train_config())
    final.metrics.compression_ratio = compression_ratio(grid, final.network)
    final.metrics.runtime_seconds = time.perf_counter() - started

    if out is not None:
        write_voxels(out / f"{name}.voxb", grid)
        if search is not None:
            write_candidate_log(out / f"{name}.candidates.jsonl", search.records, search_log_header(cfg, search.space))
            write_json(out / f"{name}.selection.json", report.to_dict())
        write_model(out / f"{name}.nasv", final.network)
        write_json(out / f"{name}.metrics.json", final.metrics.to_dict())
    logger.info("%s: %s iou=%.4f size=%d in %.1fs", name, final.network.arch, final.metrics.iou, final.metrics.size, final.metrics.runtime_seconds)
    return PipelineResult(grid, data, search, report, final)
