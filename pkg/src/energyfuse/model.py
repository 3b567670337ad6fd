"""Shared encoder, task nets, and dual decoder heads.

Every network is a per-position map: weight matrices act on the channel
axis of C x N feature columns, so one matmul applies the layer at all
grid positions. Each task (segmentation, depth) owns two decoders: a
plain one fed by its own task features and a fused one fed by the
cross-task fusion output. Forward passes run on plain arrays or on a
DiffGraph, whichever the caller provides.
"""

from collections import Counter
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .autodiff import add_col, matmul, raw, tanh
from .fusion import FusionParams, Scheme, eb2f_apply
from .numeric import ContractError
from .rng import RngState

GATE_INIT = 0.01

# test instrumentation: decoder evaluations by name (not part of the API)
CALL_COUNTS = Counter()


class Mode(Enum):
    TRAIN = "train"
    INFER = "infer"


@dataclass
class Predictions:
    seg_plain: object  # K x N logits, None in Infer mode
    seg_fused: object  # K x N logits
    dep_plain: object  # 1 x N depth, None in Infer mode
    dep_fused: object  # 1 x N depth


@dataclass
class ModelParams:
    """All weights in one flat name -> array dict, plus fusion settings."""

    weights: dict
    scheme: Scheme
    gamma: float
    steps: int
    k: int
    channels: int
    width: int = 32

    def fusion_params(self, direction: str, weights: dict = None) -> FusionParams:
        """FusionParams for 'seg' or 'dep' queries, from the given weights."""
        w = self.weights if weights is None else weights
        if self.scheme == Scheme.GATED:
            return FusionParams(
                scheme=self.scheme,
                gamma=self.gamma,
                steps=self.steps,
                w1=w[f"fuse_{direction}_w1"],
                w2=w[f"fuse_{direction}_w2"],
            )
        return FusionParams(scheme=self.scheme, gamma=self.gamma, steps=self.steps)


def init_model(
    rng: RngState,
    k: int,
    channels: int,
    scheme: Scheme = Scheme.ADD,
    gamma: float = 1.0,
    steps: int = 1,
    width: int = 32,
) -> ModelParams:
    """Random weights; gate mixes start at zero so fusion opens gradually."""
    w = {}

    def dense(name, rows, cols):
        w[name + "_w"] = rng.normal(rows, cols, 1.0 / np.sqrt(cols))
        w[name + "_b"] = np.zeros((rows, 1))

    dense("enc0", width, channels)
    dense("enc1", width, width)
    for task in ("seg", "dep"):
        dense(f"{task}_net_a", width, width)
        dense(f"{task}_net_b", width, width)
    dense("seg_dec_plain", k, width)
    dense("seg_dec_fused", k, width)
    dense("dep_dec_plain", 1, width)
    dense("dep_dec_fused", 1, width)
    if scheme == Scheme.GATED:
        for direction in ("seg", "dep"):
            w[f"fuse_{direction}_w1"] = np.zeros((width, width))
            w[f"fuse_{direction}_w2"] = rng.uniform(
                -GATE_INIT, GATE_INIT, width, width
            )
    return ModelParams(
        weights=w,
        scheme=scheme,
        gamma=gamma,
        steps=steps,
        k=k,
        channels=channels,
        width=width,
    )


def bind(model: ModelParams, graph) -> dict:
    """Graph leaves for every weight, in a stable insertion order."""
    return {name: graph.leaf(arr) for name, arr in model.weights.items()}


def _dense(w, name, x):
    return add_col(matmul(w[name + "_w"], x), w[name + "_b"])


def _task_features(w, task, h):
    inner = tanh(_dense(w, f"{task}_net_a", h))
    return h + tanh(_dense(w, f"{task}_net_b", inner))


def forward_pass(
    model: ModelParams, scene, mode: Mode = Mode.TRAIN, weights: dict = None
) -> Predictions:
    """Run the network on a Scene (or directly on a C x N feature map).

    Train mode fills all four heads. Infer mode computes the fused heads
    only and never touches the plain decoders. Passing bound graph
    leaves as `weights` makes every head differentiable.
    """
    w = model.weights if weights is None else weights
    features = getattr(scene, "features", scene)
    if features.shape[0] != model.channels:
        raise ContractError(
            f"model expects {model.channels} channels, got {features.shape[0]}"
        )
    h = tanh(_dense(w, "enc0", features))
    h = tanh(_dense(w, "enc1", h))
    f_seg = _task_features(w, "seg", h)
    f_dep = _task_features(w, "dep", h)

    fused_seg_in = eb2f_apply(f_seg, f_dep, model.fusion_params("seg", w))
    fused_dep_in = eb2f_apply(f_dep, f_seg, model.fusion_params("dep", w))
    CALL_COUNTS["seg_dec_fused"] += 1
    CALL_COUNTS["dep_dec_fused"] += 1
    seg_fused = _dense(w, "seg_dec_fused", fused_seg_in)
    dep_fused = _dense(w, "dep_dec_fused", fused_dep_in)

    if mode == Mode.INFER:
        return Predictions(None, seg_fused, None, dep_fused)

    CALL_COUNTS["seg_dec_plain"] += 1
    CALL_COUNTS["dep_dec_plain"] += 1
    seg_plain = _dense(w, "seg_dec_plain", f_seg)
    dep_plain = _dense(w, "dep_dec_plain", f_dep)
    return Predictions(seg_plain, seg_fused, dep_plain, dep_fused)


def check_finite(model: ModelParams):
    """Every weight finite; raised the moment an optimizer step breaks it."""
    for name, arr in model.weights.items():
        if not np.all(np.isfinite(arr)):
            raise ContractError(f"non-finite weights in {name}")
