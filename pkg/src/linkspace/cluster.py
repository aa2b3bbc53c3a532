"""Distances, agglomerative clustering with nested cuts, and cluster summaries.

The agglomeration is a Lance-Williams update loop over the four monotone
linkages (single, complete, average, ward.D2).  Ward follows the ward.D2
convention: updates run on squared distances, merge heights are reported on
the original distance scale.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .data import CoordinateMatrix, GroupAssignment

LINKAGES = ("single", "complete", "average", "ward")
METRICS = ("euclidean", "manhattan", "maximum")

_SCIPY_METRIC = {"euclidean": "euclidean", "manhattan": "cityblock", "maximum": "chebyshev"}


class ClusterError(ValueError):
    """Raised for invalid clustering inputs or settings."""


@dataclass(frozen=True)
class DistanceMatrix:
    n: int
    d: np.ndarray
    metric_id: str

    @staticmethod
    def from_square(d: np.ndarray, metric_id: str = "precomputed") -> "DistanceMatrix":
        d = np.asarray(d, dtype=float)
        if d.ndim != 2 or d.shape[0] != d.shape[1]:
            raise ClusterError("distance matrix must be square")
        if not np.allclose(d, d.T, atol=1e-9):
            raise ClusterError("distance matrix must be symmetric")
        if np.abs(np.diag(d)).max() > 1e-12:
            raise ClusterError("distance matrix diagonal must be zero")
        if not np.all(np.isfinite(d)) or d.min() < 0:
            raise ClusterError("distances must be finite and non-negative")
        sym = (d + d.T) / 2
        np.fill_diagonal(sym, 0.0)
        return DistanceMatrix(n=d.shape[0], d=sym, metric_id=metric_id)


@dataclass(frozen=True)
class MergeTree:
    """Agglomeration history: leaves are 1..n, merge i creates node n+i+1."""

    n: int
    merges: tuple[tuple[int, int, float], ...]   # (left id, right id, height)
    settings: tuple[str, str] = ("", "")         # (metric_id, linkage_id)


@dataclass(frozen=True)
class ClusterSolution:
    k: int
    cluster_of: np.ndarray                        # 1-based labels, ordered by first occurrence
    settings: tuple = ()

    @property
    def n(self) -> int:
        return self.cluster_of.shape[0]

    def members(self, c: int) -> np.ndarray:
        return np.where(self.cluster_of == c)[0]


@dataclass(frozen=True)
class ContingencyTable:
    counts: np.ndarray


def pairwise_distances(coords: CoordinateMatrix | np.ndarray, metric: str = "euclidean") -> DistanceMatrix:
    """Full pairwise distance matrix on coordinate rows."""
    values = coords.values if isinstance(coords, CoordinateMatrix) else np.asarray(coords, dtype=float)
    if metric not in METRICS:
        raise ClusterError(f"unknown metric {metric!r}; choose from {METRICS}")
    if values.shape[0] < 2:
        raise ClusterError("need at least 2 observations")
    if not np.all(np.isfinite(values)):
        raise ClusterError("coordinates contain non-finite values")
    d = squareform(pdist(values, metric=_SCIPY_METRIC[metric]))
    return DistanceMatrix(n=values.shape[0], d=d, metric_id=metric)


def _lw_update(linkage: str, d_ak, d_bk, d_ab, n_a, n_b, n_k):
    if linkage == "single":
        return np.minimum(d_ak, d_bk)
    if linkage == "complete":
        return np.maximum(d_ak, d_bk)
    if linkage == "average":
        return (n_a * d_ak + n_b * d_bk) / (n_a + n_b)
    # ward.D2 on squared distances
    tot = n_a + n_b + n_k
    return ((n_a + n_k) * d_ak + (n_b + n_k) * d_bk - n_k * d_ab) / tot


def hclust(d: DistanceMatrix, linkage: str = "ward") -> MergeTree:
    """Agglomerative clustering via Lance-Williams updates.

    Ties go to the candidate pair with the lexicographically smallest
    (min id, max id); exact ties are common after standardization.
    """
    if linkage not in LINKAGES:
        raise ClusterError(f"unknown linkage {linkage!r}; choose from {LINKAGES}")
    n = d.n
    if n < 2:
        raise ClusterError("need at least 2 observations")

    work = d.d.copy()
    if linkage == "ward":
        work = work**2
    np.fill_diagonal(work, np.inf)

    ids = list(range(1, n + 1))          # current node id per active cluster
    sizes = np.ones(n)
    active = np.ones(n, dtype=bool)
    merges: list[tuple[int, int, float]] = []

    for step in range(n - 1):
        best = None
        act = np.where(active)[0]
        for ai in range(len(act)):
            a = act[ai]
            row = work[a, act[ai + 1:]]
            if row.size == 0:
                continue
            j = int(np.argmin(row))
            b = act[ai + 1 + j]
            val = work[a, b]
            key = (val, min(ids[a], ids[b]), max(ids[a], ids[b]))
            if best is None or key < best[0]:
                best = (key, a, b)
        _, a, b = best
        height = best[0][0] ** 0.5 if linkage == "ward" else best[0][0]
        merges.append((min(ids[a], ids[b]), max(ids[a], ids[b]), float(height)))

        others = active.copy()
        others[a] = others[b] = False
        idx = np.where(others)[0]
        work[a, idx] = _lw_update(linkage, work[a, idx], work[b, idx], work[a, b], sizes[a], sizes[b], sizes[idx])
        work[idx, a] = work[a, idx]
        sizes[a] += sizes[b]
        ids[a] = n + step + 1
        active[b] = False
        work[b, :] = np.inf
        work[:, b] = np.inf

    return MergeTree(n=n, merges=tuple(merges), settings=(d.metric_id, linkage))


def cut_tree(t: MergeTree, k: int, settings: tuple = ()) -> ClusterSolution:
    """Partition from the first n-k merges; cuts are nested across k."""
    n = t.n
    if not 1 <= k <= n:
        raise ClusterError(f"k={k} out of range 1..{n}")
    parent = {}  # node id -> merged-into node id
    for step in range(n - k):
        left, right, _ = t.merges[step]
        new = n + step + 1
        parent[left] = new
        parent[right] = new

    def root(x: int) -> int:
        while x in parent:
            x = parent[x]
        return x

    roots = [root(i) for i in range(1, n + 1)]
    label: dict[int, int] = {}
    cluster_of = np.empty(n, dtype=int)
    for i, r in enumerate(roots):
        if r not in label:
            label[r] = len(label) + 1
        cluster_of[i] = label[r]
    return ClusterSolution(k=k, cluster_of=cluster_of, settings=settings)


def benchmark_points(sol: ClusterSolution, d: DistanceMatrix) -> np.ndarray:
    """Per-cluster member minimizing the sum of squared distances to the cluster.

    Ties resolve to the smallest observation index.  Returns 0-based indices.
    """
    out = np.empty(sol.k, dtype=int)
    for c in range(1, sol.k + 1):
        members = sol.members(c)
        cost = (d.d[np.ix_(members, members)] ** 2).sum(axis=1)
        out[c - 1] = members[int(np.argmin(cost))]
    return out


def cluster_radius(sol: ClusterSolution, d: DistanceMatrix, benchmarks: np.ndarray) -> np.ndarray:
    """Max distance from each cluster's benchmark to any of its members."""
    return np.array(
        [d.d[benchmarks[c - 1], sol.members(c)].max() for c in range(1, sol.k + 1)]
    )


def cluster_diameter(sol: ClusterSolution, d: DistanceMatrix) -> np.ndarray:
    """Max within-cluster pairwise distance per cluster."""
    out = np.empty(sol.k)
    for c in range(1, sol.k + 1):
        members = sol.members(c)
        out[c - 1] = d.d[np.ix_(members, members)].max() if members.size > 1 else 0.0
    return out


def ch_index(coords: CoordinateMatrix | np.ndarray, sol: ClusterSolution) -> float:
    """Calinski-Harabasz variance-ratio index (Euclidean geometry)."""
    x = coords.values if isinstance(coords, CoordinateMatrix) else np.asarray(coords, dtype=float)
    n, k = x.shape[0], sol.k
    if not 2 <= k <= n - 1:
        raise ClusterError(f"ch_index requires 2 <= k <= n-1, got k={k}, n={n}")
    grand = x.mean(axis=0)
    w = 0.0
    b = 0.0
    for c in range(1, k + 1):
        members = sol.members(c)
        mean_c = x[members].mean(axis=0)
        w += ((x[members] - mean_c) ** 2).sum()
        b += members.size * ((mean_c - grand) ** 2).sum()
    if w == 0.0:
        return float("inf")
    return (b / (k - 1)) / (w / (n - k))


def _pair_masks(sol: ClusterSolution):
    same = sol.cluster_of[:, None] == sol.cluster_of[None, :]
    upper = np.triu(np.ones_like(same, dtype=bool), 1)
    return same & upper, ~same & upper


def wb_ratio(d: DistanceMatrix, sol: ClusterSolution) -> float:
    """Mean within-cluster distance over mean between-cluster distance."""
    if sol.k < 2:
        raise ClusterError("wb_ratio requires k >= 2")
    within, between = _pair_masks(sol)
    if not within.any():
        raise ClusterError("no within-cluster pairs (all clusters are singletons)")
    if not between.any():
        raise ClusterError("no between-cluster pairs")
    return float(d.d[within].mean() / d.d[between].mean())


def silhouette(d: DistanceMatrix, sol: ClusterSolution) -> tuple[np.ndarray, float]:
    """Silhouette widths per observation plus the average; singletons get 0."""
    if sol.k < 2:
        raise ClusterError("silhouette requires k >= 2")
    n = sol.n
    widths = np.zeros(n)
    members = {c: sol.members(c) for c in range(1, sol.k + 1)}
    for i in range(n):
        own = sol.cluster_of[i]
        mine = members[own]
        if mine.size == 1:
            continue
        a = d.d[i, mine].sum() / (mine.size - 1)
        b = min(d.d[i, members[c]].mean() for c in members if c != own)
        widths[i] = (b - a) / max(a, b)
    return widths, float(widths.mean())


def min_benchmark_separation(d: DistanceMatrix, benchmarks: np.ndarray) -> float:
    """Minimum distance over unordered pairs of cluster benchmarks."""
    k = benchmarks.shape[0]
    if k < 2:
        return float("nan")
    sub = d.d[np.ix_(benchmarks, benchmarks)]
    return float(sub[np.triu_indices(k, 1)].min())


def stats_sweep(
    t: MergeTree,
    d: DistanceMatrix,
    coords: CoordinateMatrix | np.ndarray,
    k_max: int = 8,
) -> list[dict]:
    """Validity statistics for k = 2 .. min(k_max, n-1)."""
    k_hi = min(k_max, t.n - 1)
    rows = []
    for k in range(2, k_hi + 1):
        sol = cut_tree(t, k)
        bm = benchmark_points(sol, d)
        rows.append(
            {
                "k": k,
                "ch_index": ch_index(coords, sol),
                "wb_ratio": wb_ratio(d, sol),
                "avg_silhouette": silhouette(d, sol)[1],
                "max_radius": float(cluster_radius(sol, d, bm).max()),
                "min_benchmark_separation": min_benchmark_separation(d, bm),
            }
        )
    return rows


N_BREAKDOWN_BINS = 30


def distance_breakdown(d: DistanceMatrix, sol: ClusterSolution, cluster_id: int) -> dict:
    """Within/between/overall distance histograms on a shared binning.

    30 equal-width bins spanning [0, max overall pairwise distance].
    """
    if not 1 <= cluster_id <= sol.k:
        raise ClusterError(f"no cluster {cluster_id}")
    iu = np.triu_indices(d.n, 1)
    overall = d.d[iu]
    members = sol.members(cluster_id)
    inside = np.isin(np.arange(d.n), members)
    within = d.d[np.ix_(members, members)][np.triu_indices(members.size, 1)]
    between = d.d[np.ix_(members, np.where(~inside)[0])].ravel()
    hi = overall.max() if overall.size else 1.0
    edges = np.linspace(0.0, hi if hi > 0 else 1.0, N_BREAKDOWN_BINS + 1)
    return {
        "edges": edges,
        "within": np.histogram(within, bins=edges)[0],
        "between": np.histogram(between, bins=edges)[0],
        "overall": np.histogram(overall, bins=edges)[0],
    }


def compare_solutions(a: ClusterSolution, b: ClusterSolution) -> ContingencyTable:
    """Shared-observation counts between two clusterings of the same rows."""
    if a.n != b.n:
        raise ClusterError(f"solutions cover different n: {a.n} vs {b.n}")
    counts = np.zeros((a.k, b.k), dtype=int)
    np.add.at(counts, (a.cluster_of - 1, b.cluster_of - 1), 1)
    return ContingencyTable(counts=counts)


def dendrogram_order(t: MergeTree) -> np.ndarray:
    """Left-to-right leaf order by depth-first traversal, lower node id first.

    Returns 0-based observation indices.
    """
    children = {t.n + i + 1: (m[0], m[1]) for i, m in enumerate(t.merges)}
    root = t.n + len(t.merges)
    order: list[int] = []
    stack = [root if t.merges else 1]
    while stack:
        node = stack.pop()
        if node in children:
            left, right = children[node]
            lo, hi = min(left, right), max(left, right)
            stack.append(hi)
            stack.append(lo)
        else:
            order.append(node - 1)
    return np.array(order, dtype=int)


def convex_hull_2d(points: np.ndarray, mask: np.ndarray | None = None) -> np.ndarray:
    """Counter-clockwise convex hull of 2-D points (monotone chain).

    Collinear input degenerates to a segment, a single point to itself.
    """
    pts = np.asarray(points, dtype=float)
    if mask is not None:
        pts = pts[np.asarray(mask, dtype=bool)]
    uniq = sorted({(float(x), float(y)) for x, y in pts})
    if len(uniq) <= 2:
        return np.array(uniq)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in uniq:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(uniq):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    hull = lower[:-1] + upper[:-1]
    if len(hull) < 2:  # all collinear pruning collapsed the chain
        return np.array([uniq[0], uniq[-1]])
    return np.array(hull)


def group_hulls(points: np.ndarray, groups: np.ndarray | GroupAssignment) -> dict[int, np.ndarray]:
    """Convex hull per group label over n x 2 display coordinates."""
    labels = groups.group_of if isinstance(groups, GroupAssignment) else np.asarray(groups)
    return {int(g): convex_hull_2d(points, labels == g) for g in np.unique(labels)}
