"""Taxonomy extraction: k representative controllers from an archive.

Three methods over unweighted Euclidean distance on behavior vectors:
PAM-style k-medoids, average-linkage agglomerative clustering, and spectral
clustering on the symmetric normalized Laplacian. Every representative is a
real archive entry (never a synthetic centroid) so it can be replayed from
its stored (genome, seed).
"""
from __future__ import annotations

from dataclasses import dataclass, asdict
from typing import Optional

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.linalg import eigh
from scipy.spatial.distance import pdist, squareform

from .plugin import featurizer_from_dict
from .search import Archive, ArchiveEntry
from .sim import SimConfig, simulate

KMEDOIDS = "kmedoids"
HIERARCHICAL = "hierarchical"
SPECTRAL = "spectral"
METHODS = (KMEDOIDS, HIERARCHICAL, SPECTRAL)

PAM_MAX_PASSES = 200


class ClusterError(ValueError):
    pass


class DegenerateDataError(ClusterError):
    """All points identical: one cluster is the only honest answer."""


class ReplayIntegrityError(RuntimeError):
    """A representative's stored behavior no longer matches its replay."""


@dataclass(frozen=True)
class ClusterConfig:
    method: str = KMEDOIDS
    k: int = 20
    seed: int = 0
    linkage: str = "average"
    affinity_sigma: Optional[float] = None
    # independent seeded inits; single-init PAM can stall in a local optimum
    # even on tiny instances
    n_init: int = 4

    def __post_init__(self):
        if self.method not in METHODS:
            raise ClusterError(f"method must be one of {METHODS}, got {self.method!r}")
        if self.k < 2:
            raise ClusterError("k must be >= 2")
        if self.affinity_sigma is not None and self.affinity_sigma <= 0:
            raise ClusterError("affinity_sigma must be positive")
        if self.n_init < 1:
            raise ClusterError("n_init must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ClusterConfig":
        return cls(**d)


@dataclass
class TaxonomyCandidate:
    representative: ArchiveEntry
    cluster_id: int
    cluster_size: int
    label: Optional[str] = None
    thumbnail: Optional[np.ndarray] = None


# ---------------------------------------------------------------------------
# low-level clustering on plain point arrays


def _kmedoids_plus_plus(dist: np.ndarray, k: int, rng: np.random.Generator) -> list:
    """Seeded medoid init: first uniform, then proportional to squared distance."""
    n = dist.shape[0]
    medoids = [int(rng.integers(0, n))]
    for _ in range(1, k):
        d2 = np.min(dist[:, medoids], axis=1) ** 2
        total = d2.sum()
        if total <= 0.0:
            remaining = [i for i in range(n) if i not in medoids]
            medoids.append(int(remaining[rng.integers(0, len(remaining))]))
        else:
            medoids.append(int(rng.choice(n, p=d2 / total)))
    return medoids


def _nearest_two(dist: np.ndarray, medoids: list):
    cols = dist[:, medoids]  # (n, k)
    order = np.argsort(cols, axis=1, kind="stable")
    near_m = order[:, 0]
    near_d = cols[np.arange(len(cols)), near_m]
    if cols.shape[1] > 1:
        sec_d = cols[np.arange(len(cols)), order[:, 1]]
    else:
        sec_d = np.full(len(cols), np.inf)
    return near_m, near_d, sec_d


def pam_kmedoids(points: np.ndarray, k: int, rng: np.random.Generator):
    """PAM: seeded init then best-improvement swaps until none improves.

    Returns (medoid indices, labels, cost history); total point-to-medoid
    cost is non-increasing across the history.
    """
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ClusterError(f"k={k} exceeds {n} points")
    dist = squareform(pdist(points)) if n > 1 else np.zeros((1, 1))
    medoids = _kmedoids_plus_plus(dist, k, rng)
    near_m, near_d, sec_d = _nearest_two(dist, medoids)
    cost = float(near_d.sum())
    history = [cost]
    is_medoid = np.zeros(n, dtype=bool)
    is_medoid[medoids] = True
    for _ in range(PAM_MAX_PASSES):
        best_cost = cost
        best_swap = None
        for m_pos in range(k):
            base = np.where(near_m == m_pos, sec_d, near_d)
            swap_costs = np.minimum(base[:, None], dist).sum(axis=0)
            swap_costs[is_medoid] = np.inf
            o = int(np.argmin(swap_costs))
            if swap_costs[o] < best_cost:
                best_cost = float(swap_costs[o])
                best_swap = (m_pos, o)
        if best_swap is None:
            break
        m_pos, o = best_swap
        is_medoid[medoids[m_pos]] = False
        medoids[m_pos] = o
        is_medoid[o] = True
        near_m, near_d, sec_d = _nearest_two(dist, medoids)
        cost = float(near_d.sum())
        history.append(cost)
    return list(medoids), near_m.astype(int), history


def pam_best_of(points: np.ndarray, k: int, seed: int, n_init: int = 4):
    """Best of ``n_init`` independently seeded PAM runs (lowest final cost)."""
    best = None
    for restart in range(n_init):
        rng = np.random.Generator(np.random.PCG64([int(seed), restart]))
        result = pam_kmedoids(points, k, rng)
        if best is None or result[2][-1] < best[2][-1]:
            best = result
    return best


def average_linkage_labels(points: np.ndarray, k: int):
    """Agglomerative average-linkage labels in 0..k-1 plus merge heights."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ClusterError(f"k={k} exceeds {n} points")
    if k == n:
        return np.arange(n), np.array([])
    tree = linkage(points, method="average", metric="euclidean")
    labels = fcluster(tree, t=k, criterion="maxclust") - 1
    if len(np.unique(labels)) != k:
        raise ClusterError(
            f"average linkage produced {len(np.unique(labels))} clusters instead of {k}; data too degenerate"
        )
    return labels, tree[:, 2]


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, max_iter: int = 300):
    n = points.shape[0]
    centers = [points[int(rng.integers(0, n))]]
    for _ in range(1, k):
        d2 = np.min(
            np.sum((points[:, None, :] - np.array(centers)[None, :, :]) ** 2, axis=2), axis=1
        )
        total = d2.sum()
        if total <= 0.0:
            centers.append(points[int(rng.integers(0, n))])
        else:
            centers.append(points[int(rng.choice(n, p=d2 / total))])
    centers = np.array(centers)
    labels = None
    for _ in range(max_iter):
        d2 = np.sum((points[:, None, :] - centers[None, :, :]) ** 2, axis=2)
        new_labels = np.argmin(d2, axis=1)
        for c in range(k):
            if not np.any(new_labels == c):
                # revive an empty cluster with the worst-fit point
                worst = int(np.argmax(d2[np.arange(n), new_labels]))
                new_labels[worst] = c
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        for c in range(k):
            centers[c] = points[labels == c].mean(axis=0)
    return labels


def gaussian_affinity(points: np.ndarray, sigma: float) -> np.ndarray:
    d2 = squareform(pdist(points)) ** 2
    return np.exp(-d2 / (2.0 * sigma * sigma))


def median_distance_sigma(points: np.ndarray, rng: np.random.Generator, subsample: int = 500) -> float:
    """Scale-adaptive kernel width: median pairwise distance of a subsample."""
    n = points.shape[0]
    if n > subsample:
        idx = rng.choice(n, size=subsample, replace=False)
        points = points[idx]
    dists = pdist(points)
    if dists.size == 0:
        raise DegenerateDataError("not enough points to estimate a kernel width")
    sigma = float(np.median(dists))
    if sigma > 0.0:
        return sigma
    positive = dists[dists > 0.0]
    if positive.size == 0:
        raise DegenerateDataError("all points identical; clustering is a single cluster")
    return float(positive.min())


def normalized_laplacian(affinity: np.ndarray) -> np.ndarray:
    degree = affinity.sum(axis=1)
    inv_sqrt = 1.0 / np.sqrt(degree)
    lap = -affinity * inv_sqrt[:, None] * inv_sqrt[None, :]
    np.fill_diagonal(lap, 1.0 + np.diag(lap))
    return lap


def spectral_labels(points: np.ndarray, k: int, rng: np.random.Generator, sigma: Optional[float] = None):
    """Row-normalized smallest-k Laplacian eigenvectors clustered by k-means."""
    points = np.asarray(points, dtype=np.float64)
    n = points.shape[0]
    if k > n:
        raise ClusterError(f"k={k} exceeds {n} points")
    if sigma is None:
        sigma = median_distance_sigma(points, rng)
    affinity = gaussian_affinity(points, sigma)
    lap = normalized_laplacian(affinity)
    _, vectors = eigh(lap, subset_by_index=[0, k - 1])
    norms = np.linalg.norm(vectors, axis=1)
    rows = vectors / np.where(norms > 0.0, norms, 1.0)[:, None]
    return _kmeans(rows, k, rng)


# ---------------------------------------------------------------------------
# archive-level operations


def _representative_indices(points: np.ndarray, labels: np.ndarray, k: int) -> list:
    """Per cluster, the member closest to the cluster mean in feature space."""
    reps = []
    for c in range(k):
        members = np.nonzero(labels == c)[0]
        if members.size == 0:
            raise ClusterError(f"cluster {c} is empty")
        mean = points[members].mean(axis=0)
        reps.append(int(members[np.argmin(np.linalg.norm(points[members] - mean, axis=1))]))
    return reps


def _check_archive(archive: Archive, config: ClusterConfig) -> None:
    if len(archive) < config.k:
        raise ClusterError(f"archive holds {len(archive)} entries, fewer than k={config.k}")


def k_medoids(archive: Archive, config: ClusterConfig) -> list:
    _check_archive(archive, config)
    medoids, labels, _ = pam_best_of(archive.matrix(), config.k, config.seed, config.n_init)
    return _candidates(archive, labels, medoids, config.k)


def hierarchical_cluster(archive: Archive, config: ClusterConfig) -> list:
    _check_archive(archive, config)
    points = archive.matrix()
    labels, _ = average_linkage_labels(points, config.k)
    reps = _representative_indices(points, labels, config.k)
    return _candidates(archive, labels, reps, config.k)


def spectral_cluster(archive: Archive, config: ClusterConfig) -> list:
    _check_archive(archive, config)
    points = archive.matrix()
    rng = np.random.Generator(np.random.PCG64(config.seed))
    labels = spectral_labels(points, config.k, rng, config.affinity_sigma)
    # representatives live in the original feature space, not spectral space
    reps = _representative_indices(points, labels, config.k)
    return _candidates(archive, labels, reps, config.k)


def _candidates(archive: Archive, labels: np.ndarray, rep_indices: list, k: int) -> list:
    sizes = [int(np.sum(labels == c)) for c in range(k)]
    if sum(sizes) != len(archive):
        raise ClusterError("cluster sizes do not partition the archive")
    order = sorted(range(k), key=lambda c: (-sizes[c], c))
    return [
        TaxonomyCandidate(
            representative=archive[rep_indices[c]],
            cluster_id=rank,
            cluster_size=sizes[c],
        )
        for rank, c in enumerate(order)
    ]


def replay_entry(entry: ArchiveEntry, sim_config: SimConfig, featurizer):
    """Re-simulate an archive entry; returns (trajectory, behavior values)."""
    traj = simulate(entry.genome, sim_config, entry.seed)
    behavior = featurizer(traj)
    return traj, np.asarray(behavior.values, dtype=np.float64)


def extract_taxonomy(
    archive: Archive,
    config: ClusterConfig,
    verify_replay: bool = True,
    with_thumbnails: bool = False,
    thumbnail_resolution: int = 128,
) -> list:
    """Cluster the archive and surface k representative controllers.

    Candidates are ordered by descending cluster size. When the archive's
    config snapshot is replayable, each representative is re-simulated and
    its stored behavior vector checked to 1e-9; thumbnails come from the
    same replay.
    """
    dispatch = {KMEDOIDS: k_medoids, HIERARCHICAL: hierarchical_cluster, SPECTRAL: spectral_cluster}
    candidates = dispatch[config.method](archive, config)
    if verify_replay or with_thumbnails:
        snapshot = archive.config_snapshot
        if "sim_config" not in snapshot or "featurizer" not in snapshot:
            raise ClusterError("archive snapshot lacks sim/featurizer configs needed for replay")
        sim_config = SimConfig.from_dict(snapshot["sim_config"])
        featurizer = featurizer_from_dict(snapshot["featurizer"])
        from .render import render_trajectory

        for cand in candidates:
            traj, recomputed = replay_entry(cand.representative, sim_config, featurizer)
            if verify_replay and not np.allclose(
                recomputed, cand.representative.behavior, rtol=0.0, atol=1e-9
            ):
                raise ReplayIntegrityError(
                    f"entry {cand.representative.eval_id}: stored behavior differs from replay"
                )
            if with_thumbnails:
                cand.thumbnail = render_trajectory(traj, "aware", thumbnail_resolution)
    return candidates
