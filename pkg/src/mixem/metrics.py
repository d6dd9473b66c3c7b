"""Unsupervised-classification evaluation.

Clustering accuracy under the optimal one-to-one cluster-to-class
assignment (solved as a linear assignment problem on the contingency
table), normalized mutual information, the adjusted Rand index, and the
mapped confusion matrix.  All metrics are invariant to relabeling of
either side.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ContractError


@dataclass
class EvalReport:
    """One evaluation outcome: metrics, mapping, and confusion counts."""

    acc: float
    nmi: float
    ari: float
    mapping: dict[int, int]
    confusion: np.ndarray
    n: int
    k: int

    def to_record(self, extra: dict | None = None) -> str:
        """Flat key=value text record for machine parsing."""
        lines = []
        for key, value in (extra or {}).items():
            lines.append(f"{key}={value}")
        lines.append(f"acc={self.acc:.17g}")
        lines.append(f"nmi={self.nmi:.17g}")
        lines.append(f"ari={self.ari:.17g}")
        lines.append(f"n={self.n}")
        lines.append(f"k={self.k}")
        return "\n".join(lines) + "\n"


def parse_record(text: str) -> dict[str, str]:
    out: dict[str, str] = {}
    for line in text.strip().splitlines():
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        key, _, value = line.partition("=")
        out[key.strip()] = value.strip()
    return out


def _validate_pair(pred, truth) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if p.size == 0 or t.size == 0:
        raise ContractError("labelings must be non-empty")
    if p.size != t.size:
        raise ContractError(f"label lengths differ: {p.size} vs {t.size}")
    return p, t


def contingency_table(pred, truth) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts indexed by (unique pred value, unique truth value)."""
    p, t = _validate_pair(pred, truth)
    clusters, p_idx = np.unique(p, return_inverse=True)
    classes, t_idx = np.unique(t, return_inverse=True)
    table = np.zeros((clusters.size, classes.size), dtype=np.int64)
    np.add.at(table, (p_idx, t_idx), 1)
    return table, clusters, classes


def hungarian_accuracy(pred, truth) -> tuple[float, dict[int, int]]:
    """Accuracy maximized over one-to-one cluster-to-class mappings.

    The contingency table is padded to square with zeros so unmatched
    clusters (or classes) cost nothing; the returned mapping covers
    only clusters matched to a real class.
    """
    table, clusters, classes = contingency_table(pred, truth)
    size = max(table.shape)
    padded = np.zeros((size, size), dtype=np.int64)
    padded[: table.shape[0], : table.shape[1]] = table
    rows, cols = linear_sum_assignment(-padded)
    matched = 0
    mapping: dict[int, int] = {}
    for r, c in zip(rows, cols):
        if r < table.shape[0] and c < table.shape[1]:
            matched += int(table[r, c])
            mapping[int(clusters[r])] = int(classes[c])
    n = int(table.sum())
    return matched / n, mapping


def _entropy(counts: np.ndarray, n: int) -> float:
    probs = counts[counts > 0] / n
    return float(-(probs * np.log(probs)).sum())


def nmi(pred, truth, normalizer: str = "geometric") -> float:
    """Normalized mutual information from the contingency table.

    Normalized by the geometric mean of the two label entropies by
    default (``normalizer="arithmetic"`` selects the other common
    convention).  Both partitions trivial (single cluster each) is
    defined as 1.0; exactly one trivial partition carries no mutual
    information and is defined as 0.0.
    """
    if normalizer not in ("geometric", "arithmetic"):
        raise ContractError(f"unknown normalizer {normalizer!r}")
    table, _, _ = contingency_table(pred, truth)
    n = int(table.sum())
    a = table.sum(axis=1)
    b = table.sum(axis=0)
    h_pred = _entropy(a, n)
    h_truth = _entropy(b, n)
    if h_pred == 0.0 and h_truth == 0.0:
        return 1.0
    if h_pred == 0.0 or h_truth == 0.0:
        return 0.0
    nz = table > 0
    nij = table[nz].astype(np.float64)
    outer = (a[:, None] * b[None, :])[nz].astype(np.float64)
    mi = float((nij / n * np.log(nij * n / outer)).sum())
    denom = np.sqrt(h_pred * h_truth) if normalizer == "geometric" else 0.5 * (h_pred + h_truth)
    return float(min(1.0, max(0.0, mi / denom)))


def ari(pred, truth) -> float:
    """Adjusted Rand index via pair counting on the contingency table.

    1.0 for identical partitions; expectation approximately 0 under
    independent random labelings.  A zero adjustment denominator only
    occurs when both partitions are trivial in the same way, which
    counts as identical (1.0).
    """
    table, _, _ = contingency_table(pred, truth)
    n = int(table.sum())

    def comb2(v):
        v = v.astype(np.float64)
        return (v * (v - 1.0) / 2.0).sum()

    index = comb2(table.reshape(-1))
    sum_a = comb2(table.sum(axis=1))
    sum_b = comb2(table.sum(axis=0))
    total = n * (n - 1.0) / 2.0
    expected = sum_a * sum_b / total
    max_index = 0.5 * (sum_a + sum_b)
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def confusion_matrix(pred, truth, mapping: dict[int, int]) -> np.ndarray:
    """Counts of mapped predictions (rows) against true labels (columns).

    Rows follow the sorted class labels; clusters left unmapped by the
    assignment (possible only when there are more clusters than
    classes) get extra rows at the bottom.
    """
    p, t = _validate_pair(pred, truth)
    classes = np.unique(t)
    class_pos = {int(c): i for i, c in enumerate(classes)}
    clusters = np.unique(p)
    for cluster, label in mapping.items():
        if label not in class_pos:
            raise ContractError(f"mapping targets unknown label {label}")
        if cluster not in set(int(c) for c in clusters):
            raise ContractError(f"mapping covers unknown cluster {cluster}")
    unmapped = [int(c) for c in clusters if int(c) not in mapping]
    rows = classes.size + len(unmapped)
    out = np.zeros((rows, classes.size), dtype=np.int64)
    unmapped_pos = {c: classes.size + i for i, c in enumerate(unmapped)}
    for pi, ti in zip(p, t):
        pi = int(pi)
        r = class_pos[mapping[pi]] if pi in mapping else unmapped_pos[pi]
        out[r, class_pos[int(ti)]] += 1
    return out


def evaluate_clustering(pred, truth, normalizer: str = "geometric") -> EvalReport:
    """Full report: Hungarian accuracy, NMI, ARI, and confusion counts."""
    p, t = _validate_pair(pred, truth)
    acc, mapping = hungarian_accuracy(p, t)
    confusion = confusion_matrix(p, t, mapping)
    return EvalReport(
        acc=acc,
        nmi=nmi(p, t, normalizer=normalizer),
        ari=ari(p, t),
        mapping=mapping,
        confusion=confusion,
        n=p.size,
        k=int(np.unique(p).size),
    )
