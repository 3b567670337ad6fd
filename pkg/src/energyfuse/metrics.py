"""Evaluation: confusion-matrix IoU, depth error, branch energies.

Per-scene partial sums are sorted before the final reduction, so scene
order never changes a reported float. Predictions always come from the
fused heads; the plain head is consulted only for its mean energy.
"""

from dataclasses import dataclass, field

import numpy as np

from .autodiff import raw
from .config import RunConfig, config_echo
from .fusion import Scheme
from .model import Mode, forward_pass, init_model
from .numeric import ContractError
from .reliability import free_energy_map
from .rng import RngState
from .scenes import ShiftSpec, make_domain_pair
from .train import train

DATA_STREAM = 1
MODEL_STREAM = 2


@dataclass
class MetricsRow:
    iou: list
    miou: float
    depth_mae: float
    mean_energy_plain: float
    mean_energy_fused: float
    run_id: str = ""
    config: dict = field(default_factory=dict)
    phase1_mean_loss: float = float("nan")
    phase2_mean_loss: float = float("nan")

    def __post_init__(self):
        for v in self.iou:
            # nan marks a failed run's row; real values must be in range
            if np.isfinite(v) and not 0.0 <= v <= 1.0:
                raise ContractError(f"IoU out of [0, 1]: {v}")


def confusion_matrix(true_labels: np.ndarray, pred_labels: np.ndarray, k: int):
    """k x k counts, rows = true class, cols = predicted class."""
    t = np.asarray(true_labels, dtype=np.int64).ravel()
    p = np.asarray(pred_labels, dtype=np.int64).ravel()
    if t.shape != p.shape:
        raise ContractError(f"label shape mismatch: {t.shape} vs {p.shape}")
    if t.size and (t.min() < 0 or t.max() >= k or p.min() < 0 or p.max() >= k):
        raise ContractError(f"labels outside [0, {k})")
    return np.bincount(t * k + p, minlength=k * k).reshape(k, k)


def iou_from_confusion(conf: np.ndarray):
    """Per-class IoU (0 where the union is empty) and the mean over
    classes that actually appear in the ground truth."""
    inter = np.diag(conf).astype(np.float64)
    union = conf.sum(axis=1) + conf.sum(axis=0) - np.diag(conf)
    iou = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    present = conf.sum(axis=1) > 0
    if not present.any():
        raise ContractError("no ground-truth classes present")
    return iou, float(iou[present].mean())


def _ordered_mean(partial_sums: list, count: int) -> float:
    return float(np.sort(np.asarray(partial_sums, dtype=np.float64)).sum() / count)


def evaluate(model, scenes: list, mode: Mode = Mode.TRAIN) -> MetricsRow:
    """Metrics over a scene set from the fused heads.

    Train mode also reports the plain branch's mean free energy; Infer
    mode leaves it nan (that branch is never evaluated then).
    """
    if not scenes:
        raise ContractError("evaluate needs at least one scene")
    k = model.k
    conf = np.zeros((k, k), dtype=np.int64)
    err_sums, e_plain_sums, e_fused_sums = [], [], []
    n_total = 0
    for scene in scenes:
        pred = forward_pass(model, scene, mode)
        seg_hat = np.argmax(raw(pred.seg_fused), axis=0)
        conf += confusion_matrix(scene.labels.labels, seg_hat, k)
        err_sums.append(float(np.abs(raw(pred.dep_fused) - scene.depth).sum()))
        e_fused_sums.append(float(free_energy_map(raw(pred.seg_fused)).sum()))
        if mode == Mode.TRAIN:
            e_plain_sums.append(float(free_energy_map(raw(pred.seg_plain)).sum()))
        n_total += scene.h * scene.w
    iou, miou = iou_from_confusion(conf)
    return MetricsRow(
        iou=[float(v) for v in iou],
        miou=miou,
        depth_mae=_ordered_mean(err_sums, n_total),
        mean_energy_plain=(
            _ordered_mean(e_plain_sums, n_total) if mode == Mode.TRAIN else float("nan")
        ),
        mean_energy_fused=_ordered_mean(e_fused_sums, n_total),
    )


def build_data(cfg: RunConfig):
    """The (source, target) scene sets a config describes."""
    rng = RngState(cfg.seed, (DATA_STREAM,))
    spec = ShiftSpec(
        feature_shift=cfg.feature_shift,
        feature_scale=cfg.feature_scale,
        noise_sd=cfg.noise_sd,
        depth_noise_sd=cfg.depth_noise_sd,
    )
    return make_domain_pair(
        rng, spec, cfg.n_scenes, (cfg.h, cfg.w), cfg.k, cfg.channels
    )


def build_model(cfg: RunConfig):
    return init_model(
        RngState(cfg.seed, (MODEL_STREAM,)),
        cfg.k,
        cfg.channels,
        Scheme(cfg.scheme),
        cfg.gamma,
        cfg.steps,
    )


def run_experiment(cfg: RunConfig, run_id: str = "run"):
    """Fresh data + fresh model + train + evaluate, all from one config.

    Returns the filled MetricsRow and the loss trace. Target metrics use
    the evaluation-only labels, which never influenced training.
    """
    source, target = build_data(cfg)
    model = build_model(cfg)
    model, trace = train(model, source, target, cfg)
    row = evaluate(model, target, Mode.TRAIN)
    row.run_id = run_id
    row.config = config_echo(cfg)
    for phase in (1, 2):
        losses = [t.bundle.overall for t in trace if t.phase == phase]
        if losses:
            mean = float(np.mean(losses))
            if phase == 1:
                row.phase1_mean_loss = mean
            else:
                row.phase2_mean_loss = mean
    return row, trace
