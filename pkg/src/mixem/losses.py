"""Loss terms for mixture-gated contrastive training.

Five differentiable scalars over a batch of paired augmented views:

* the temperature-scaled contrastive loss over view pairs,
* negative entropy of the marginal mixing-coefficient distribution
  (minimizing it spreads mass across components),
* the per-sample confidence gap ``1 - max_m p_m`` summed over the batch
  (minimizing it sharpens each sample's gate),
* pull/push terms that tighten embeddings around their dominant
  component's mean and separate the component means from each other,
* and their weighted combination.

All terms are plain sums, as scale is absorbed by the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import numcore as nc
from .errors import ContractError
from .model import MixtureOutput
from .numcore import Tensor


@dataclass(frozen=True)
class LossWeights:
    """Term weights and the similarity temperature."""

    component_entropy: float = 1.0
    instance_entropy: float = 1.0
    push: float = 0.1
    pull: float = 0.1
    temperature: float = 0.5

    def __post_init__(self):
        if self.temperature <= 0.0:
            raise ContractError("temperature must be > 0")
        for name in ("component_entropy", "instance_entropy", "push", "pull"):
            if getattr(self, name) < 0.0:
                raise ContractError(f"weight {name} must be >= 0")


@dataclass
class BatchEmbeddings:
    """Embeddings (and, for mixture heads, gate outputs) of 2N views.

    Views 2k and 2k+1 are the two augmentations of source sample k.
    `coefficients` and `component_embeddings` are None for single-head
    batches, which support only the contrastive term.
    """

    z: Tensor
    coefficients: Tensor | None = None
    component_embeddings: list[Tensor] | None = None

    def __post_init__(self):
        if self.z.ndim != 2:
            raise ContractError("z must be a (2N, embedding_dim) matrix")
        if self.z.shape[0] % 2 != 0 or self.z.shape[0] == 0:
            raise ContractError(f"view count must be even and positive, got {self.z.shape[0]}")
        if self.coefficients is not None and self.coefficients.shape[0] != self.z.shape[0]:
            raise ContractError("coefficients row count must match view count")
        if self.component_embeddings is not None:
            for e in self.component_embeddings:
                if e.shape != self.z.shape:
                    raise ContractError("component embeddings must match z's shape")

    @classmethod
    def from_mixture(cls, output: MixtureOutput) -> "BatchEmbeddings":
        return cls(output.combined, output.coefficients, output.component_embeddings)

    @property
    def num_views(self) -> int:
        return self.z.shape[0]


@dataclass
class AssociativeStats:
    """Diagnostics from the pull/push computation."""

    component_sizes: np.ndarray
    nonempty: int

    @property
    def collapsed(self) -> bool:
        # All views in one component: push has no pairs and is zero.
        return self.nonempty < 2


@dataclass
class LossBreakdown:
    """Weighted per-term contributions; they sum to `total`."""

    total: float
    contrast: float
    comp_ent: float
    inst_ent: float
    push: float
    pull: float
    assoc_stats: AssociativeStats | None = None

    def parts_sum(self) -> float:
        return self.contrast + self.comp_ent + self.inst_ent + self.push + self.pull


def _check_rows_normalized(p: Tensor, tol: float = 1e-9) -> None:
    sums = p.data.sum(axis=1)
    worst = float(np.max(np.abs(sums - 1.0)))
    if worst > tol:
        raise ContractError(f"coefficient rows must sum to 1 (off by {worst:.3e})")


def _offdiag_indices(n: int) -> np.ndarray:
    """Flat indices of every off-diagonal entry of an (n, n) matrix, by row."""
    cols = np.arange(n)
    grid = np.broadcast_to(cols, (n, n))
    keep = grid[~np.eye(n, dtype=bool)].reshape(n, n - 1)
    return np.arange(n)[:, None] * n + keep


def _scaled_similarities(z: Tensor, temperature: float) -> Tensor:
    zn = nc.normalize(z)
    return nc.scale(nc.matmul(zn, nc.transpose(zn)), 1.0 / temperature)


def nt_xent_pair(views, j1: int, j2: int, temperature: float) -> Tensor:
    """Directed contrastive loss for the positive pair (j1, j2).

    ``-log( exp(sim(j1,j2)/t) / sum_{k != j1} exp(sim(j1,k)/t) )`` over
    all 2N views; asymmetric in its arguments.
    """
    z = nc.as_tensor(views)
    if z.ndim != 2:
        raise ContractError("views must be a (2N, embedding_dim) matrix")
    n = z.shape[0]
    j1, j2 = int(j1), int(j2)
    if j1 == j2 or not (0 <= j1 < n and 0 <= j2 < n):
        raise ContractError(f"invalid view pair ({j1}, {j2}) for {n} views")
    s = _scaled_similarities(z, temperature)
    row = np.arange(n) != j1
    others = nc.take_flat(s, j1 * n + np.flatnonzero(row))
    positive = nc.take_flat(s, np.array([j1 * n + j2]))
    return nc.sub(nc.logsumexp(others), nc.sum(positive))


def contrastive_loss(batch: BatchEmbeddings, temperature: float) -> Tensor:
    """Average directed pair loss over both directions of every pair."""
    if temperature <= 0.0:
        raise ContractError("temperature must be > 0")
    z = batch.z
    n = batch.num_views
    s = _scaled_similarities(z, temperature)
    lse = nc.logsumexp(nc.take_flat(s, _offdiag_indices(n)))
    partner = np.arange(n) ^ 1
    positives = nc.take_flat(s, np.arange(n) * n + partner)
    return nc.scale(nc.sum(nc.sub(lse, positives)), 1.0 / n)


def component_entropy_loss(p) -> Tensor:
    """Negative entropy of the marginal coefficient distribution.

    Ranges over [-log M, 0]; the minimum is attained exactly at the
    uniform marginal, zero at a one-hot marginal.
    """
    p = nc.as_tensor(p)
    if p.ndim != 2:
        raise ContractError("coefficients must be a (views, M) matrix")
    _check_rows_normalized(p)
    return nc.sum(nc.xlogx(nc.colmean(p)))


def instance_entropy_loss(p) -> Tensor:
    """Sum over views of 1 - max_m p_m; zero iff every row is one-hot."""
    p = nc.as_tensor(p)
    if p.ndim != 2:
        raise ContractError("coefficients must be a (views, M) matrix")
    _check_rows_normalized(p)
    n = p.shape[0]
    return nc.add_const(nc.neg(nc.sum(nc.rowmax(p))), float(n))


def associative_embedding_loss(
    component_embeddings, p
) -> tuple[Tensor, Tensor, AssociativeStats]:
    """Pull/push terms over dominant-component groups.

    Views are grouped by their dominant (argmax) coefficient; groups are
    a fixed discrete assignment, so no gradient flows through the
    grouping itself.  Pull sums each member's distance to its group's
    mean embedding (scaled by 1/M); push is minus the sum of pairwise
    distances between the non-empty group means (both directions,
    scaled by 1/M).  Empty components contribute to neither term.
    """
    embeddings = list(component_embeddings)
    num_components = len(embeddings)
    if num_components < 2:
        raise ContractError("associative loss needs at least 2 components")
    p = nc.as_tensor(p)
    _check_rows_normalized(p)
    if p.shape[1] != num_components:
        raise ContractError("coefficient width must equal the number of components")
    dominant = np.argmax(p.data, axis=1)
    sizes = np.bincount(dominant, minlength=num_components)

    pull_acc = Tensor(0.0)
    means: list[Tensor] = []
    for m in range(num_components):
        members = np.flatnonzero(dominant == m)
        if members.size == 0:
            continue
        group = nc.take_rows(embeddings[m], members)
        mu = nc.colmean(group)
        means.append(mu)
        pull_acc = nc.add(pull_acc, nc.sum(nc.rownorm(nc.sub_rowvec(group, mu))))
    pull = nc.scale(pull_acc, 1.0 / num_components)

    stats = AssociativeStats(component_sizes=sizes, nonempty=len(means))
    if len(means) < 2:
        return pull, Tensor(0.0), stats

    dim = means[0].size
    push_acc = Tensor(0.0)
    for i in range(len(means)):
        for j in range(len(means)):
            if i == j:
                continue
            diff = nc.reshape(nc.sub(means[i], means[j]), (1, dim))
            push_acc = nc.add(push_acc, nc.sum(nc.rownorm(diff)))
    push = nc.scale(nc.neg(push_acc), 1.0 / num_components)
    return pull, push, stats


def total_loss(batch: BatchEmbeddings, weights: LossWeights) -> tuple[Tensor, LossBreakdown]:
    """Weighted combination of all active terms.

    Terms with zero weight are skipped entirely, so with all weights
    zero the returned tensor is exactly the contrastive loss.  Mixture
    fields are required only for active terms.
    """
    contrast = contrastive_loss(batch, weights.temperature)
    total = contrast
    comp_val = inst_val = push_val = pull_val = 0.0
    stats = None

    needs_p = weights.component_entropy > 0 or weights.instance_entropy > 0
    needs_assoc = weights.push > 0 or weights.pull > 0
    if (needs_p or needs_assoc) and batch.coefficients is None:
        raise ContractError("entropy/associative weights require mixture coefficients")
    if needs_assoc and batch.component_embeddings is None:
        raise ContractError("push/pull weights require component embeddings")

    if weights.component_entropy > 0:
        term = nc.scale(component_entropy_loss(batch.coefficients), weights.component_entropy)
        comp_val = term.item()
        total = nc.add(total, term)
    if weights.instance_entropy > 0:
        term = nc.scale(instance_entropy_loss(batch.coefficients), weights.instance_entropy)
        inst_val = term.item()
        total = nc.add(total, term)
    if needs_assoc:
        pull, push, stats = associative_embedding_loss(
            batch.component_embeddings, batch.coefficients
        )
        if weights.push > 0:
            term = nc.scale(push, weights.push)
            push_val = term.item()
            total = nc.add(total, term)
        if weights.pull > 0:
            term = nc.scale(pull, weights.pull)
            pull_val = term.item()
            total = nc.add(total, term)

    breakdown = LossBreakdown(
        total=total.item(),
        contrast=contrast.item(),
        comp_ent=comp_val,
        inst_ent=inst_val,
        push=push_val,
        pull=pull_val,
        assoc_stats=stats,
    )
    return total, breakdown
