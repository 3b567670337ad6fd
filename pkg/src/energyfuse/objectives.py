"""Task losses and composite objectives.

Segmentation uses the energy-form negative log-likelihood (equivalent to
softmax cross-entropy), depth uses the reverse Huber loss with a
per-image threshold, and the composite losses stack per-branch totals
into the supervised and overall objectives. Loss functions accept plain
arrays or DiffGraph tensors.
"""

from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import numeric
from .autodiff import absolute, lse_cols, matmul, raw, sum_all
from .numeric import ContractError

IGNORE = -1


class LabelSource(Enum):
    GROUND_TRUTH = "ground_truth"
    PSEUDO = "pseudo"


@dataclass
class LabelMap:
    """Per-position integer class labels; IGNORE marks excluded positions."""

    labels: np.ndarray
    source: LabelSource = LabelSource.GROUND_TRUTH

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64).ravel()
        bad = self.labels[(self.labels != IGNORE) & (self.labels < 0)]
        if bad.size:
            raise ContractError(f"negative label {bad[0]} is not the IGNORE sentinel")


@dataclass
class LossBundle:
    """All scalar losses of one step, with the identities they must satisfy."""

    seg_total: float
    dep_total: float
    supervised: float
    rfa: float
    overall: float
    alpha: float
    beta: float

    def __post_init__(self):
        want_sup = self.seg_total + self.alpha * self.dep_total
        if abs(self.supervised - want_sup) > 1e-12 * max(1.0, abs(want_sup)):
            raise ContractError(
                f"supervised {self.supervised} != seg + alpha*dep {want_sup}"
            )
        want_all = self.supervised + self.beta * self.rfa
        if abs(self.overall - want_all) > 1e-12 * max(1.0, abs(want_all)):
            raise ContractError(
                f"overall {self.overall} != supervised + beta*rfa {want_all}"
            )


def seg_nll(logits, labels) -> object:
    """Mean over labeled positions of -P[y] + lse(P).

    Algebraically the softmax cross-entropy. IGNORE positions contribute
    to neither numerator nor normalizer; an all-IGNORE map gives 0.
    """
    lab = labels.labels if isinstance(labels, LabelMap) else None
    if lab is None:
        lab = np.asarray(labels, dtype=np.int64).ravel()
    k, n = logits.shape
    if lab.size != n:
        raise ContractError(f"{lab.size} labels for {n} positions")
    valid = lab != IGNORE
    used = lab[valid]
    if used.size and (used.min() < 0 or used.max() >= k):
        raise ContractError(f"label out of range [0, {k}): {used.max()}")
    n_valid = int(valid.sum())
    if n_valid == 0:
        return 0.0
    one_hot = np.zeros((k, n))
    one_hot[used, np.nonzero(valid)[0]] = 1.0
    picked = matmul(np.ones((1, k)), logits * one_hot)
    lse_row = lse_cols(logits) * valid.astype(np.float64)[None, :]
    return sum_all(lse_row - picked) * (1.0 / n_valid)


def berhu_map(diff, c: float):
    """Elementwise reverse Huber: |e| up to c, then (e^2 + c^2) / (2c).

    The two branches join with matching value and slope at |e| = c, so
    selecting the branch from current values keeps gradients exact.
    """
    if c < 0:
        raise ContractError(f"berhu threshold must be >= 0, got {c}")
    if c == 0.0:
        return diff * 0.0
    a = absolute(diff)
    linear = raw(a) <= c
    quad = (diff * diff) * (1.0 / (2.0 * c)) + (c / 2.0)
    sel = linear.astype(np.float64)
    return a * sel + quad * (1.0 - sel)


def berhu_loss(pred, gt, c: float = None) -> object:
    """Mean reverse Huber loss with c = max |pred - gt| / 5 per image.

    The threshold is computed from current values and held fixed for
    differentiation; pass c explicitly to freeze it entirely (finite
    difference probes need that). Identical maps give 0 without
    dividing by c = 0.
    """
    if pred.shape != gt.shape:
        raise ContractError(f"depth shape mismatch: {pred.shape} vs {gt.shape}")
    e = pred - gt
    if c is None:
        c = float(np.max(np.abs(raw(e)))) / 5.0
    if c == 0.0:
        return 0.0
    per = berhu_map(e, c)
    return sum_all(per) * (1.0 / raw(e).size)


def four_term_total(src_plain, src_fused, tgt_plain, tgt_fused):
    """Per-task total across both domains and both decoder branches."""
    return src_plain + src_fused + tgt_plain + tgt_fused


def supervised_loss(seg_total, dep_total, alpha: float = 0.001):
    return seg_total + alpha * dep_total


def overall_loss(l_s, l_rfa, beta: float = 1.0):
    return l_s + beta * l_rfa


def pseudo_label(logits, threshold: float = 0.9) -> LabelMap:
    """Argmax labels where the top softmax probability clears the threshold.

    Positions below it get IGNORE. A fixed confidence cutoff is a plain
    stand-in for schedule-based self-training.
    """
    if not 0.0 <= threshold <= 1.0:
        raise ContractError(f"threshold must be in [0, 1], got {threshold}")
    p = numeric.softmax_cols(raw(logits))
    conf = p.max(axis=0)
    winners = p.argmax(axis=0)
    labels = np.where(conf >= threshold, winners, IGNORE).astype(np.int64)
    return LabelMap(labels=labels, source=LabelSource.PSEUDO)
