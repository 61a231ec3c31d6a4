"""Discovery workbench for emergent behaviors in two-type heterogeneous swarms."""

from .genome import ETA_GRID, VELOCITY_GRID, Genome, GenomeError, search_space_cardinality
from .sim import SimConfig, Trajectory, simulate, simulate_batch
from .features import (
    AGNOSTIC,
    AWARE,
    BehaviorVector,
    HandCraftedFeaturizer,
    MetricWindow,
    featurize,
)
from .search import (
    Archive,
    ArchiveEntry,
    SearchConfig,
    novelty_score,
    run_novelty_search,
    run_random_search,
)
from .clustering import ClusterConfig, TaxonomyCandidate, extract_taxonomy

__version__ = "0.1.0"

__all__ = [
    "AGNOSTIC",
    "AWARE",
    "Archive",
    "ArchiveEntry",
    "BehaviorVector",
    "ClusterConfig",
    "ETA_GRID",
    "Genome",
    "GenomeError",
    "HandCraftedFeaturizer",
    "MetricWindow",
    "SearchConfig",
    "SimConfig",
    "TaxonomyCandidate",
    "Trajectory",
    "VELOCITY_GRID",
    "extract_taxonomy",
    "featurize",
    "novelty_score",
    "run_novelty_search",
    "run_random_search",
    "search_space_cardinality",
    "simulate",
    "simulate_batch",
]
