"""Satisfaction and clusterization metrics over opinion populations.

Satisfaction is the negative time-averaged Euclidean distance between a
user's opinion and the content it consumed, so 0 is the best possible value.
Clusterization is the mean silhouette coefficient of the user opinions under
the silhouette-maximizing k-means clustering; values near 1 indicate a
polarized, tightly clustered opinion landscape.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


class MetricsError(ValueError):
    pass


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray  # (k, n)
    labels: np.ndarray     # (N,)
    inertia: float         # sum of squared distances to assigned centroid


@dataclass
class SatisfactionSummary:
    value: float            # mean over users
    variance: float         # population variance over users
    per_user: np.ndarray


@dataclass
class ClusterizationResult:
    value: float            # mean silhouette at the best k
    chosen_k: int
    model: ClusterModel
    silhouettes: np.ndarray
    variance: float         # population variance of per-user silhouettes


@dataclass
class MetricsRow:
    t: int
    sat_running: float
    sat_instant: float
    sat_variance: float
    clusterization: float
    chosen_k: int
    sil_variance: float

    def __post_init__(self):
        if self.sat_running > 1e-12 or self.sat_instant > 1e-12:
            raise MetricsError("satisfaction must be nonpositive")
        if not -1.0 - 1e-9 <= self.clusterization <= 1.0 + 1e-9:
            raise MetricsError("clusterization must lie in [-1, 1]")


@dataclass
class MetricsSeries:
    rows: list = field(default_factory=list)

    def append(self, row):
        self.rows.append(row)

    def __iter__(self):
        return iter(self.rows)

    def __len__(self):
        return len(self.rows)


def user_satisfaction(user_points, consumed_points):
    """Negative mean distance between a user's opinions and consumed content.

    Both arguments are (T, n) matrices aligned per step.
    """
    user_points = np.atleast_2d(np.asarray(user_points, dtype=np.float64))
    consumed_points = np.atleast_2d(np.asarray(consumed_points, dtype=np.float64))
    if user_points.shape != consumed_points.shape:
        raise MetricsError("consumption log arrays must have matching shapes")
    if user_points.shape[0] == 0:
        raise MetricsError("consumption log is empty")
    return float(-np.linalg.norm(user_points - consumed_points, axis=1).mean())


def global_satisfaction(user_points, consumed_points):
    """Mean and across-user variance of per-user satisfaction.

    Arguments are (T, N, n) stacks aligned per step and user.
    """
    user_points = np.asarray(user_points, dtype=np.float64)
    consumed_points = np.asarray(consumed_points, dtype=np.float64)
    if user_points.shape != consumed_points.shape or user_points.ndim != 3:
        raise MetricsError("expected matching (T, N, n) consumption stacks")
    if user_points.shape[0] == 0:
        raise MetricsError("consumption log is empty")
    per_user = -np.linalg.norm(user_points - consumed_points, axis=2).mean(axis=0)
    return SatisfactionSummary(
        value=float(per_user.mean()), variance=float(per_user.var()), per_user=per_user
    )


def _plus_plus_init(points, k, rng):
    n = points.shape[0]
    centroids = np.empty((k, points.shape[1]))
    centroids[0] = points[rng.integers(n)]
    closest_sq = np.sum((points - centroids[0]) ** 2, axis=1)
    for c in range(1, k):
        total = closest_sq.sum()
        if total <= 0.0:
            centroids[c:] = centroids[0]  # all points coincide
            break
        probs = closest_sq / total
        centroids[c] = points[rng.choice(n, p=probs)]
        closest_sq = np.minimum(closest_sq, np.sum((points - centroids[c]) ** 2, axis=1))
    return centroids


def kmeans(points, k, rng, max_iter=300, tol=1e-6):
    """Lloyd's algorithm with k-means++ seeding.

    Deterministic given the generator. Empty clusters are re-seeded from the
    point farthest from its assigned centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if not 1 <= k <= n:
        raise MetricsError(f"k must satisfy 1 <= k <= {n}")
    if isinstance(rng, (int, np.integer)):
        rng = np.random.default_rng(rng)

    centroids = _plus_plus_init(points, k, rng)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(max_iter):
        sq = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
        labels = np.argmin(sq, axis=1)
        new_centroids = centroids.copy()
        for c in range(k):
            mask = labels == c
            if mask.any():
                new_centroids[c] = points[mask].mean(axis=0)
            else:
                farthest = int(np.argmax(sq[np.arange(n), labels]))
                new_centroids[c] = points[farthest]
                labels[farthest] = c
                sq[farthest, :] = 0.0  # keep later reseeds from picking it again
        shift = np.linalg.norm(new_centroids - centroids, axis=1).max()
        centroids = new_centroids
        if shift < tol:
            break
    sq = np.sum((points[:, None, :] - centroids[None, :, :]) ** 2, axis=2)
    labels = np.argmin(sq, axis=1)
    inertia = float(sq[np.arange(n), labels].sum())
    return ClusterModel(k=k, centroids=centroids, labels=labels, inertia=inertia)


def pairwise_distances(points):
    diff = points[:, None, :] - points[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def silhouette_values(points, labels, dist=None):
    """Silhouette coefficient per point.

    a = mean distance to own cluster (excluding self), b = smallest mean
    distance to another cluster; s = (b - a) / max(a, b). Members of
    singleton clusters score 0 by convention.
    """
    points = np.asarray(points, dtype=np.float64)
    labels = np.asarray(labels)
    n = points.shape[0]
    uniq = np.unique(labels)
    if uniq.size < 2:
        raise MetricsError("silhouette requires at least two clusters")
    if dist is None:
        dist = pairwise_distances(points)

    onehot = labels[:, None] == uniq[None, :]          # (N, K)
    counts = onehot.sum(axis=0)                        # (K,)
    sums = dist @ onehot                               # (N, K) distance mass per cluster
    own_col = np.searchsorted(uniq, labels)

    own_count = counts[own_col]
    own_sum = sums[np.arange(n), own_col]              # self-distance is 0, already excluded
    with np.errstate(invalid="ignore", divide="ignore"):
        a = np.where(own_count > 1, own_sum / np.maximum(own_count - 1, 1), 0.0)

    means_other = sums / counts[None, :]
    means_other[np.arange(n), own_col] = np.inf
    b = means_other.min(axis=1)

    denom = np.maximum(a, b)
    s = np.where(denom > 0, (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    s[own_count == 1] = 0.0                            # singleton convention
    return s


def silhouette(i, points, labels):
    """Silhouette coefficient of a single point."""
    return float(silhouette_values(points, labels)[i])


def default_k_range(n_points):
    """2 .. min(10, N-1), widened to always include k = 2 when N >= 2."""
    upper = min(10, max(2, n_points - 1))
    upper = min(upper, n_points)
    return range(2, upper + 1)


def global_clusterization(points, rng, k_range=None, restarts=3):
    """Mean silhouette under the silhouette-maximizing k-means clustering.

    For each candidate k the best of `restarts` k-means runs (by inertia) is
    scored; the k with the highest mean silhouette wins. Seeds for each
    (k, restart) cell are derived from `rng`, so runs are reproducible and
    independent of evaluation order.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if n < 2:
        raise MetricsError("clusterization needs at least two points")
    if k_range is None:
        k_range = default_k_range(n)
    if isinstance(rng, np.random.Generator):
        base = int(rng.integers(0, 2**63 - 1))
    elif isinstance(rng, np.random.SeedSequence):
        base = int(rng.generate_state(1)[0])
    else:
        base = int(rng)

    # canonical point order: seeding then depends on the point set only,
    # making the result invariant under permutation of the input rows
    order = np.lexsort(points.T)
    canon = points[order]

    dist = pairwise_distances(canon)
    best = None
    for k in k_range:
        if k > n:
            continue
        model = None
        for r in range(restarts):
            seed = np.random.SeedSequence((base, k, r))
            candidate = kmeans(canon, k, np.random.default_rng(seed))
            if model is None or candidate.inertia < model.inertia:
                model = candidate
        sil = silhouette_values(canon, model.labels, dist=dist)
        score = float(sil.mean())
        if best is None or score > best[0]:
            best = (score, k, model, sil)
    if best is None:
        raise MetricsError("k_range produced no feasible clustering")
    score, k, model, sil = best

    labels = np.empty(n, dtype=np.int64)
    labels[order] = model.labels
    silhouettes = np.empty(n)
    silhouettes[order] = sil
    model = ClusterModel(k=model.k, centroids=model.centroids,
                         labels=labels, inertia=model.inertia)
    return ClusterizationResult(
        value=score,
        chosen_k=k,
        model=model,
        silhouettes=silhouettes,
        variance=float(silhouettes.var()),
    )
