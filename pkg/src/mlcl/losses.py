"""Objective functions for contrastive and supervised training.

The contrastive family scores temperature-scaled dot products of unit-norm
projections.  For an anchor i with positive set P(i) (other batch elements
whose label sets intersect the anchor's) the loss is

    sum_i  1/|P(i)| * sum_{j in P(i)}  -log( exp(z_i.z_j / t) / D_i )

where D_i sums exp(z_i.z_k / t) over all k != i, optionally extended by the
projections of every incorrectly completed matrix in the batch.  Anchors
with no positives contribute zero.  Two behaviour flags exist:

* ``normalization`` -- "positives" divides by |P(i)| as above; "batch" uses
  the literal constant 2*N_i - 1 where N_i counts batch elements (anchor
  included) sharing a label with the anchor.
* ``anchor_negatives`` -- whether the anchor's own seven incorrect
  completions join its denominator (default) or only other elements' do.

Every vectorized loss here has a brute-force oracle twin written with plain
Python floats and explicit loops, sharing no intermediates with the main
path; tests require agreement to 1e-12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .rules import MetaTarget

NEGATIVES_PER_INSTANCE = 7

UNIT_NORM_TOL = 1e-9


@dataclass(frozen=True)
class PositiveMask:
    """Boolean positive-pair matrix; diagonal excluded, symmetric."""

    mask: np.ndarray

    @property
    def counts(self) -> np.ndarray:
        return self.mask.sum(axis=1)


def build_positive_mask(labelsets) -> PositiveMask:
    """mask[i, j] = (i != j) and labelsets[i] intersects labelsets[j]."""
    labelsets = [frozenset(s) for s in labelsets]
    if len(labelsets) < 2:
        raise ValueError("a contrastive batch needs at least 2 elements")
    if any(not s for s in labelsets):
        raise ValueError("every batch element needs a nonempty label set")
    n = len(labelsets)
    mask = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(i + 1, n):
            if labelsets[i] & labelsets[j]:
                mask[i, j] = mask[j, i] = True
    return PositiveMask(mask)


@dataclass
class ContrastBatch:
    """Projected embeddings plus labels for one contrastive step.

    ``z`` holds the unit-norm projections of the correctly completed
    matrices, one row per batch element.  ``z_neg`` (optional) holds the
    projections of the incorrect completions as a [B*7, p] matrix in
    element-major order: row k*7+l is completion l of element k.
    """

    z: Tensor
    labelsets: tuple
    temperature: float
    z_neg: Tensor | None = None

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ValueError("z must be [batch, projection] shaped")
        b = self.z.shape[0]
        if b < 2:
            raise ValueError("a contrastive batch needs at least 2 elements")
        if len(self.labelsets) != b:
            raise ValueError("one label set per batch element required")
        self.labelsets = tuple(frozenset(s) for s in self.labelsets)
        if any(not s for s in self.labelsets):
            raise ValueError("every batch element needs a nonempty label set")
        if self.temperature <= 0:
            raise ValueError(f"temperature must be positive, got {self.temperature}")
        norms = np.linalg.norm(self.z.data, axis=1)
        if np.max(np.abs(norms - 1.0)) > UNIT_NORM_TOL:
            raise ValueError("z rows must be unit-norm")
        if self.z_neg is not None:
            if self.z_neg.shape != (b * NEGATIVES_PER_INSTANCE, self.z.shape[1]):
                raise ValueError(
                    f"z_neg must be [{b * NEGATIVES_PER_INSTANCE}, {self.z.shape[1]}], "
                    f"got {self.z_neg.shape}")
            neg_norms = np.linalg.norm(self.z_neg.data, axis=1)
            if np.max(np.abs(neg_norms - 1.0)) > UNIT_NORM_TOL:
                raise ValueError("z_neg rows must be unit-norm")

    @property
    def batch_size(self) -> int:
        return self.z.shape[0]


def _anchor_weights(mask: np.ndarray, labelsets, normalization: str) -> np.ndarray:
    """Per-pair weights W[i, j]; rows of anchors without positives are zero."""
    counts = mask.sum(axis=1)
    if normalization == "positives":
        denom = np.maximum(counts, 1)
    elif normalization == "batch":
        sharing = mask.sum(axis=1) + 1  # anchor always shares with itself
        denom = 2 * sharing - 1
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    return np.where(mask, 1.0, 0.0) / denom[:, None]


def _contrastive_core(batch: ContrastBatch, mask: np.ndarray, normalization: str,
                      use_negatives: bool, anchor_negatives: bool) -> Tensor:
    z = batch.z
    b = batch.batch_size
    inv_t = 1.0 / batch.temperature
    sims = ad.matmul(z, z.T) * inv_t
    off_diag = 1.0 - np.eye(b)
    denom = ad.tsum(ad.exp(sims) * off_diag, axis=1, keepdims=True)
    if use_negatives:
        if batch.z_neg is None:
            raise ValueError("batch has no incorrect-completion projections")
        neg_sims = ad.matmul(z, batch.z_neg.T) * inv_t
        if anchor_negatives:
            neg_mask = np.ones((b, b * NEGATIVES_PER_INSTANCE))
        else:
            neg_mask = np.ones((b, b * NEGATIVES_PER_INSTANCE))
            for i in range(b):
                neg_mask[i, i * NEGATIVES_PER_INSTANCE : (i + 1) * NEGATIVES_PER_INSTANCE] = 0.0
        denom = denom + ad.tsum(ad.exp(neg_sims) * neg_mask, axis=1, keepdims=True)
    log_denom = ad.log(denom)  # [b, 1]
    per_pair = log_denom - sims  # -log(exp(s_ij)/D_i), broadcast over rows
    weights = _anchor_weights(mask, batch.labelsets, normalization)
    return ad.tsum(per_pair * weights)


def supcon_loss(batch: ContrastBatch, normalization: str = "positives") -> Tensor:
    """Single-label contrastive loss; positives are exact label matches."""
    if any(len(s) != 1 for s in batch.labelsets):
        raise ValueError("supcon_loss requires singleton label sets")
    labels = [next(iter(s)) for s in batch.labelsets]
    n = len(labels)
    mask = np.array([[i != j and labels[i] == labels[j] for j in range(n)]
                     for i in range(n)])
    return _contrastive_core(batch, mask, normalization,
                             use_negatives=False, anchor_negatives=True)


def mlc_loss(batch: ContrastBatch, normalization: str = "positives") -> Tensor:
    """Multi-label contrastive loss; positives share at least one label."""
    mask = build_positive_mask(batch.labelsets).mask
    return _contrastive_core(batch, mask, normalization,
                             use_negatives=False, anchor_negatives=True)


def mlc_loss_with_negatives(batch: ContrastBatch, normalization: str = "positives",
                            anchor_negatives: bool = True) -> Tensor:
    """Multi-label loss with every incorrect completion added as a negative."""
    mask = build_positive_mask(batch.labelsets).mask
    return _contrastive_core(batch, mask, normalization,
                             use_negatives=True, anchor_negatives=anchor_negatives)


def aux_loss(logits: Tensor, target: MetaTarget) -> Tensor:
    """Mean sigmoid binary cross-entropy of d logits against d target bits."""
    bits = np.asarray(target.bits, dtype=np.float64)
    return aux_loss_bits(logits, bits)


def aux_loss_bits(logits: Tensor, bits: np.ndarray) -> Tensor:
    bits = np.asarray(bits, dtype=np.float64)
    if logits.shape != bits.shape:
        raise ValueError(f"logits shape {logits.shape} != target shape {bits.shape}")
    # -t*log(sigmoid(x)) - (1-t)*log(1-sigmoid(x)) == softplus(x) - t*x
    return ad.tmean(ad.softplus(logits) - logits * bits)


def combined_loss(gamma: float, beta: float, contrastive: Tensor, aux: Tensor) -> Tensor:
    """gamma * contrastive + beta * aux."""
    if gamma < 0 or beta < 0:
        raise ValueError("loss weights must be non-negative")
    return contrastive * gamma + aux * beta


def ce_answer_loss(scores: Tensor, correct_index: int) -> Tensor:
    """Cross-entropy of softmax over 8 candidate scores; index is 1-based."""
    if scores.shape != (8,):
        raise ValueError(f"expected 8 scores, got shape {scores.shape}")
    if not 1 <= correct_index <= 8:
        raise ValueError(f"correct_index must be in 1..8, got {correct_index}")
    one_hot = np.zeros(8)
    one_hot[correct_index - 1] = 1.0
    return ad.logsumexp(scores) - ad.tsum(scores * one_hot)


def ce_answer_loss_batch(scores: Tensor, correct_indices) -> Tensor:
    """Mean answer cross-entropy over a [B, 8] score matrix."""
    correct_indices = np.asarray(correct_indices)
    if scores.ndim != 2 or scores.shape[1] != 8:
        raise ValueError(f"expected [batch, 8] scores, got {scores.shape}")
    if np.any(correct_indices < 1) or np.any(correct_indices > 8):
        raise ValueError("correct indices must be in 1..8")
    one_hot = np.zeros(scores.shape)
    one_hot[np.arange(scores.shape[0]), correct_indices - 1] = 1.0
    lse = ad.logsumexp_rows(scores)
    picked = ad.tsum(scores * one_hot, axis=1, keepdims=True)
    return ad.tmean(lse - picked)


# --------------------------------------------------------------------------
# brute-force oracles: plain floats, explicit loops, no numpy, no sharing
# with the vectorized implementations above

def _oracle_weight(positives: int, sharing_incl_anchor: int, normalization: str) -> float:
    if normalization == "positives":
        return 1.0 / positives
    if normalization == "batch":
        return 1.0 / (2 * sharing_incl_anchor - 1)
    raise ValueError(f"unknown normalization {normalization!r}")


def brute_force_supcon_oracle(z_rows, labels, temperature: float,
                              normalization: str = "positives") -> float:
    labelsets = [{label} for label in labels]
    return brute_force_mlc_oracle(z_rows, labelsets, temperature,
                                  normalization=normalization)


def brute_force_mlc_oracle(z_rows, labelsets, temperature: float,
                           z_neg_rows=None, normalization: str = "positives",
                           anchor_negatives: bool = True) -> float:
    """Loop-by-loop reference for the contrastive losses.

    ``z_rows`` is a list of B lists of floats; ``z_neg_rows``, when present,
    is a list of B lists of 7 lists of floats (element-major, completion
    minor).  Returns the scalar loss as a Python float.
    """
    b = len(z_rows)
    total = 0.0
    for i in range(b):
        positives = [j for j in range(b)
                     if j != i and set(labelsets[i]) & set(labelsets[j])]
        if not positives:
            continue
        denominator = 0.0
        for k in range(b):
            if k != i:
                denominator += math.exp(_dot(z_rows[i], z_rows[k]) / temperature)
        if z_neg_rows is not None:
            for k in range(b):
                if not anchor_negatives and k == i:
                    continue
                for l in range(NEGATIVES_PER_INSTANCE):
                    denominator += math.exp(
                        _dot(z_rows[i], z_neg_rows[k][l]) / temperature)
        sharing = sum(1 for j in range(b) if set(labelsets[i]) & set(labelsets[j]))
        weight = _oracle_weight(len(positives), sharing, normalization)
        for j in positives:
            numerator = math.exp(_dot(z_rows[i], z_rows[j]) / temperature)
            total += weight * (-math.log(numerator / denominator))
    return total


def _dot(u, v) -> float:
    acc = 0.0
    for a, b in zip(u, v):
        acc += a * b
    return acc


def brute_force_aux_oracle(logit_values, bit_values) -> float:
    total = 0.0
    for x, t in zip(logit_values, bit_values):
        p = 1.0 / (1.0 + math.exp(-x))
        total += -t * math.log(p) - (1.0 - t) * math.log(1.0 - p)
    return total / len(logit_values)


def brute_force_ce_oracle(score_values, correct_index: int) -> float:
    shifted = [s - max(score_values) for s in score_values]
    denom = sum(math.exp(s) for s in shifted)
    return -math.log(math.exp(shifted[correct_index - 1]) / denom)
