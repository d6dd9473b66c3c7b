"""Lloyd's K-means with pluggable initialization.

Three entry points mirror the evaluation pipeline: plain K-means from
given centroids, best-of-many random restarts (Forgy sampling of K
distinct data points), and seeding from the per-component means of the
dominant mixture assignment, which makes the clustering deterministic.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractError


@dataclass
class ClusterResult:
    """Assignment vector, centroids, and provenance of one clustering run.

    For K-means results every point is assigned to its nearest centroid
    and `inertia` is the sum of squared point-to-centroid distances.
    The ``max-component`` passthrough keeps the dominant-component
    assignment instead, so only the inertia recomputation invariant
    applies there.
    """

    assignments: np.ndarray
    centroids: np.ndarray
    inertia: float
    init_kind: str
    iterations: int
    restarts_used: int
    inertia_history: list[float] = field(default_factory=list)


def _validate_points(points) -> np.ndarray:
    x = np.asarray(points, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] == 0:
        raise ContractError(f"points must be a non-empty (N, d) matrix, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ContractError("points must be finite")
    return x


def _squared_distances(x: np.ndarray, centroids: np.ndarray) -> np.ndarray:
    return ((x[:, None, :] - centroids[None, :, :]) ** 2).sum(axis=2)


def _inertia(x, centroids, assign) -> float:
    return float(((x - centroids[assign]) ** 2).sum())


def kmeans(
    points,
    k: int,
    init_centroids,
    max_iter: int = 300,
    tol: float = 1e-6,
    init_kind: str = "custom",
) -> ClusterResult:
    """Lloyd iterations from explicit starting centroids.

    Runs until the largest centroid displacement drops below `tol` or
    `max_iter` is reached.  An empty cluster is repaired by seizing the
    point currently farthest from its assigned centroid (relocating the
    empty centroid onto it), which keeps inertia non-increasing.  Ties
    in the assignment step go to the lowest cluster index.
    """
    x = _validate_points(points)
    n = x.shape[0]
    if not 1 <= k <= n:
        raise ContractError(f"need 1 <= K <= N, got K={k}, N={n}")
    centroids = np.array(init_centroids, dtype=np.float64, copy=True)
    if centroids.shape != (k, x.shape[1]):
        raise ContractError(f"init_centroids must be ({k}, {x.shape[1]}), got {centroids.shape}")

    history: list[float] = []
    iterations = 0
    for _ in range(max_iter):
        iterations += 1
        d2 = _squared_distances(x, centroids)
        assign = np.argmin(d2, axis=1)
        point_d2 = d2[np.arange(n), assign]

        seized: list[int] = []
        for _ in range(k):  # seizures can empty a singleton donor; re-scan
            counts = np.bincount(assign, minlength=k)
            empties = np.flatnonzero(counts == 0)
            if empties.size == 0:
                break
            for empty in empties:
                order = np.argsort(-point_d2, kind="stable")
                for cand in order:
                    if cand not in seized:
                        break
                centroids[empty] = x[cand]
                assign[cand] = empty
                point_d2[cand] = 0.0
                seized.append(int(cand))

        inertia = float(point_d2.sum())
        assert not history or inertia <= history[-1] + 1e-9, "inertia increased"
        history.append(inertia)

        new_centroids = centroids.copy()
        for c in range(k):
            members = np.flatnonzero(assign == c)
            if members.size:
                new_centroids[c] = x[members].mean(axis=0)
        movement = float(np.sqrt(((new_centroids - centroids) ** 2).sum(axis=1)).max())
        centroids = new_centroids
        if movement < tol:
            break

    d2 = _squared_distances(x, centroids)
    assign = np.argmin(d2, axis=1)
    return ClusterResult(
        assignments=assign,
        centroids=centroids,
        inertia=_inertia(x, centroids, assign),
        init_kind=init_kind,
        iterations=iterations,
        restarts_used=1,
        inertia_history=history,
    )


def random_restart_kmeans(
    points,
    k: int,
    restarts: int = 50,
    seed: int = 0,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterResult:
    """Best of `restarts` runs seeded from K distinct sampled points.

    The minimum-inertia run wins; exact ties keep the earliest restart,
    so results are fully reproducible from the seed.
    """
    x = _validate_points(points)
    if restarts < 1:
        raise ContractError("restarts must be >= 1")
    rng = np.random.default_rng(seed)
    best: ClusterResult | None = None
    for _ in range(restarts):
        idx = rng.choice(x.shape[0], size=k, replace=False)
        result = kmeans(x, k, x[idx], max_iter=max_iter, tol=tol, init_kind="random-restart")
        if best is None or result.inertia < best.inertia:
            best = result
    best.restarts_used = restarts
    return best


def mixem_init(
    representations,
    dominant,
    k: int,
    num_components: int | None = None,
) -> np.ndarray:
    """Centroids from per-component means of the dominant assignment.

    When there are more components than clusters, the K most frequent
    components are kept (frequency ties to the lower component index).
    A selected component with no members falls back to the point
    farthest from the centroids chosen so far.
    """
    x = _validate_points(representations)
    dom = np.asarray(dominant)
    if dom.shape != (x.shape[0],):
        raise ContractError("dominant must assign one component per representation row")
    dom = dom.astype(np.int64)
    if dom.size and dom.min() < 0:
        raise ContractError("dominant indices must be non-negative")
    m = int(num_components) if num_components is not None else int(dom.max()) + 1
    if dom.max() >= m:
        raise ContractError(f"dominant index {int(dom.max())} out of range for M={m}")
    if m < k:
        raise ContractError(f"need at least K={k} components, got M={m}")
    if x.shape[0] < k:
        raise ContractError(f"cannot seed {k} centroids from {x.shape[0]} points")

    counts = np.bincount(dom, minlength=m)
    chosen = np.argsort(-counts, kind="stable")[:k]
    centroids = np.zeros((k, x.shape[1]))
    pending: list[int] = []
    used_points: list[int] = []
    for slot, comp in enumerate(chosen):
        members = np.flatnonzero(dom == comp)
        if members.size:
            centroids[slot] = x[members].mean(axis=0)
        else:
            pending.append(slot)
    filled = [i for i in range(k) if i not in pending]
    for slot in pending:
        if filled:
            d2 = _squared_distances(x, centroids[filled]).min(axis=1)
        else:
            d2 = (x**2).sum(axis=1)
        d2[used_points] = -np.inf
        cand = int(np.argmax(d2))
        centroids[slot] = x[cand]
        used_points.append(cand)
        filled.append(slot)
    return centroids


def cluster_pipeline(
    representations,
    dominant=None,
    *,
    k: int,
    mode: str,
    normalize: bool = False,
    restarts: int = 50,
    seed: int = 0,
    num_components: int | None = None,
    max_iter: int = 300,
    tol: float = 1e-6,
) -> ClusterResult:
    """Cluster representations in one of three modes.

    ``random-restart`` runs best-of-`restarts` K-means; ``mixem-init``
    seeds a single K-means run from the dominant-component means;
    ``max-component`` skips K-means and returns the dominant indices as
    the assignment.  With `normalize`, rows are scaled to unit norm
    first (zero rows stay zero).
    """
    x = _validate_points(representations)
    if normalize:
        norms = np.sqrt((x**2).sum(axis=1))
        x = x / np.where(norms > 1e-12, norms, 1.0)[:, None]

    if mode == "random-restart":
        return random_restart_kmeans(x, k, restarts=restarts, seed=seed, max_iter=max_iter, tol=tol)

    if dominant is None:
        raise ContractError(f"mode {mode!r} requires dominant component indices")
    dom = np.asarray(dominant, dtype=np.int64)

    if mode == "mixem-init":
        init = mixem_init(x, dom, k, num_components=num_components)
        return kmeans(x, k, init, max_iter=max_iter, tol=tol, init_kind="mixem")

    if mode == "max-component":
        m = int(num_components) if num_components is not None else int(dom.max()) + 1
        centroids = np.zeros((m, x.shape[1]))
        for c in range(m):
            members = np.flatnonzero(dom == c)
            if members.size:
                centroids[c] = x[members].mean(axis=0)
        return ClusterResult(
            assignments=dom.copy(),
            centroids=centroids,
            inertia=_inertia(x, centroids, dom),
            init_kind="max-component",
            iterations=0,
            restarts_used=0,
        )

    raise ContractError(f"unknown clustering mode {mode!r}")
