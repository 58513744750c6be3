"""Post-processing of a search: keep near-best candidates, take the smallest, retrain it from scratch."""
import logging
import time
from dataclasses import dataclass, field
from typing import List, Optional

from .config import SelectionConfig, TrainConfig
from .errors import TrainingDivergedError
from .formats import write_model
from .metrics import ReportMetrics, evaluate_reconstruction
from .neuralnet import MlpNetwork, reconstruct, train

logger = logging.getLogger(__name__)


def _smallest_key(record):
    return (record.size, record.depth, record.round, record.index_in_round)


def _reward_key(record):
    return (-record.reward, record.size, record.depth, record.round, record.index_in_round)


@dataclass
class SelectionReport:
    chosen: object
    kept: List[object]
    rejected: List[dict]
    threshold: float
    postprocess_enabled: bool

    def to_dict(self):
        return {
            "chosen": self.chosen.to_dict(),
            "threshold": self.threshold,
            "postprocess_enabled": self.postprocess_enabled,
            "kept": [r.to_dict() for r in self.kept],
            "rejected": self.rejected,
        }


def select_candidate(records, cfg=None):
    """Among candidates within ``t`` of the best accuracy, the one with fewest parameters.

    Ties go to fewer hidden layers, then to the earlier (round, index) discovery.
    """
    return select_with_report(records, cfg).chosen


def select_with_report(records, cfg=None):
    cfg = cfg or SelectionConfig()
    records = list(records)
    if not records:
        raise ValueError("no candidates to select from")

    if not cfg.postprocess_enabled:
        chosen = min(records, key=_reward_key)
        rejected = [
            {**r.to_dict(), "reason": "lower reward"} for r in records if r is not chosen
        ]
        return SelectionReport(chosen, [chosen], rejected, cfg.threshold, False)

    floor = max(r.acc for r in records) - cfg.threshold
    kept = [r for r in records if r.acc >= floor]
    chosen = min(kept, key=_smallest_key)
    rejected = []
    for r in records:
        if r is chosen:
            continue
        if r.acc < floor:
            reason = f"accuracy {r.acc:.5f} below {floor:.5f}"
        elif r.size > chosen.size:
            reason = f"larger ({r.size} > {chosen.size} parameters)"
        else:
            reason = "lost tie-break (depth, discovery order)"
        rejected.append({**r.to_dict(), "reason": reason})
    logger.info("selected %s (acc %.5f, %d params) from %d kept of %d", chosen.arch, chosen.acc, chosen.size, len(kept), len(records))
    return SelectionReport(chosen, kept, rejected, cfg.threshold, True)


@dataclass
class FinalModel:
    network: MlpNetwork
    metrics: ReportMetrics
    losses: List[float] = field(default_factory=list)
    learning_rate: Optional[float] = None


def finalize(arch, data, grid, cfg=None, model_path=None):
    """Train a freshly initialized network of ``arch`` and score its reconstruction.

    Divergence retries once at half the learning rate before giving up.
    """
    cfg = cfg or TrainConfig()
    started = time.perf_counter()
    attempt_cfg = cfg
    for attempt in range(2):
        net = MlpNetwork.initialize(arch, seed=cfg.seed)
        try:
            result = train(net, data, attempt_cfg)
            break
        except TrainingDivergedError as e:
            if attempt == 1:
                raise TrainingDivergedError(
                    f"final training of {arch} diverged twice: {e}", checkpoint=e.checkpoint, epoch=e.epoch
                )
            logger.warning("final training diverged (%s); retrying with lr %.2e", e, cfg.learning_rate / 2)
            attempt_cfg = cfg.model_copy(update={"learning_rate": cfg.learning_rate / 2})

    predicted = reconstruct(result.network, grid.resolution)
    metrics = evaluate_reconstruction(predicted, grid, size=result.network.parameter_count)
    metrics.runtime_seconds = time.perf_counter() - started
    if model_path is not None:
        write_model(model_path, result.network)
    logger.info("final %s: iou=%.4f cd_x1000=%s size=%d", arch, metrics.iou, metrics.cd, metrics.size)
    return FinalModel(result.network, metrics, result.losses, attempt_cfg.learning_rate)
