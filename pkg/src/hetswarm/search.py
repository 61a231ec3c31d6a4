"""Exploration of the controller space: random archives and novelty search.

A search produces an append-only archive of (genome, behavior, provenance)
records. Novelty of a behavior is its mean Euclidean distance to the p
nearest archive entries; each generation is appended to the archive as it
is evaluated, then scored against the archive including itself, so the
whole run is a pure function of the configuration.
"""
from __future__ import annotations

from dataclasses import dataclass, field, asdict
from typing import Callable, Optional, Sequence

import numpy as np

from .features import HandCraftedFeaturizer
from .genome import ETA_GRID, N_SLOTS, VELOCITY_GRID, Genome
from .sim import SimConfig, simulate

RANDOM_GENERATION = -1


class SearchError(ValueError):
    pass


@dataclass(frozen=True)
class SearchConfig:
    generations: int = 50
    population: int = 100
    p_neighbors: int = 14
    mutation_rate: float = 0.15
    crossover_rate: float = 0.7
    velocity_grid: tuple = VELOCITY_GRID
    eta_grid: tuple = ETA_GRID
    rng_seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.mutation_rate <= 1.0 and 0.0 <= self.crossover_rate <= 1.0):
            raise SearchError("rates must lie in [0, 1]")
        if self.p_neighbors < 1:
            raise SearchError("p_neighbors must be >= 1")
        if not self.velocity_grid or not self.eta_grid:
            raise SearchError("grids must be nonempty")
        if self.generations < 1 or self.population < 1:
            raise SearchError("generations and population must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "SearchConfig":
        d = dict(d)
        d["velocity_grid"] = tuple(d["velocity_grid"])
        d["eta_grid"] = tuple(d["eta_grid"])
        return cls(**d)


@dataclass(frozen=True)
class ArchiveEntry:
    eval_id: int
    generation: int
    seed: int
    genome: Genome
    behavior: np.ndarray


class Archive:
    """Append-only log of evaluated behaviors, all sharing one dimension."""

    def __init__(self, dim: int, config_snapshot: Optional[dict] = None):
        if dim < 1:
            raise SearchError("behavior dimension must be >= 1")
        self.dim = dim
        self.config_snapshot = config_snapshot or {}
        self._entries: list[ArchiveEntry] = []
        self._matrix: Optional[np.ndarray] = None

    @property
    def entries(self) -> tuple:
        return tuple(self._entries)

    def __len__(self) -> int:
        return len(self._entries)

    def __iter__(self):
        return iter(self._entries)

    def __getitem__(self, i: int) -> ArchiveEntry:
        return self._entries[i]

    @property
    def next_eval_id(self) -> int:
        return len(self._entries)

    def append(self, entry: ArchiveEntry) -> None:
        if entry.behavior.shape != (self.dim,):
            raise SearchError(
                f"entry dim {entry.behavior.shape} does not match archive dim {self.dim}"
            )
        if entry.eval_id != self.next_eval_id:
            raise SearchError(
                f"entries are append-only: expected eval_id {self.next_eval_id}, got {entry.eval_id}"
            )
        self._entries.append(entry)
        self._matrix = None

    def matrix(self) -> np.ndarray:
        if self._matrix is None:
            self._matrix = np.array([e.behavior for e in self._entries], dtype=np.float64)
        return self._matrix

    def generation_entries(self, generation: int) -> list[ArchiveEntry]:
        return [e for e in self._entries if e.generation == generation]


def sample_genome(rng: np.random.Generator, config: SearchConfig = SearchConfig()) -> Genome:
    """Uniform draw from the velocity and ratio grids."""
    v_idx = rng.integers(0, len(config.velocity_grid), size=8)
    eta_idx = rng.integers(0, len(config.eta_grid))
    values = [config.velocity_grid[i] for i in v_idx] + [config.eta_grid[eta_idx]]
    return Genome.from_values(values)


def mutate(genome: Genome, rate: float, rng: np.random.Generator, config: SearchConfig = SearchConfig()) -> Genome:
    """Independently resample each of the 9 slots from its grid with probability ``rate``."""
    values = list(genome.as_values())
    for slot in range(N_SLOTS):
        if rng.random() < rate:
            if slot < 8:
                values[slot] = config.velocity_grid[rng.integers(0, len(config.velocity_grid))]
            else:
                values[slot] = config.eta_grid[rng.integers(0, len(config.eta_grid))]
    return Genome.from_values(values)


def crossover(g1: Genome, g2: Genome, rng: np.random.Generator) -> Genome:
    """Uniform crossover: each slot from either parent with equal probability."""
    a = g1.as_values()
    b = g2.as_values()
    picks = rng.integers(0, 2, size=N_SLOTS)
    return Genome.from_values([a[i] if picks[i] == 0 else b[i] for i in range(N_SLOTS)])


def _as_vector(v) -> np.ndarray:
    values = getattr(v, "values", v)
    return np.asarray(values, dtype=np.float64)


def novelty_score(v, archive: Archive, p: int) -> float:
    """Mean Euclidean distance to the p nearest archive entries.

    Uses every entry when the archive holds fewer than p.
    """
    vec = _as_vector(v)
    if len(archive) == 0:
        raise SearchError("novelty is undefined against an empty archive")
    if vec.shape != (archive.dim,):
        raise SearchError(f"query dim {vec.shape} does not match archive dim {archive.dim}")
    dists = np.linalg.norm(archive.matrix() - vec, axis=1)
    if len(dists) <= p:
        return float(dists.mean())
    nearest = np.partition(dists, p - 1)[:p]
    return float(nearest.mean())


def novelty_scores(vectors: np.ndarray, archive: Archive, p: int, chunk: int = 256) -> np.ndarray:
    """Vectorized ``novelty_score`` for a stack of query vectors."""
    if len(archive) == 0:
        raise SearchError("novelty is undefined against an empty archive")
    queries = np.asarray(vectors, dtype=np.float64)
    matrix = archive.matrix()
    out = np.empty(queries.shape[0], dtype=np.float64)
    for lo in range(0, queries.shape[0], chunk):
        block = queries[lo : lo + chunk]
        diff = block[:, None, :] - matrix[None, :, :]
        dists = np.sqrt(np.sum(diff * diff, axis=2))
        if dists.shape[1] <= p:
            out[lo : lo + chunk] = dists.mean(axis=1)
        else:
            out[lo : lo + chunk] = np.partition(dists, p - 1, axis=1)[:, :p].mean(axis=1)
    return out


@dataclass
class EvaluatedGenome:
    genome: Genome
    behavior: np.ndarray
    eval_id: int
    seed: int


def derive_seed(root_seed: int, *components: int) -> int:
    """Simulation seed derived from a root seed plus stream components.

    Keeps simulation randomness decoupled from the evolution stream so
    archives replay exactly; e.g. (rng_seed, eval_id) per evaluation.
    """
    ss = np.random.SeedSequence((int(root_seed) & 0xFFFFFFFF, *[int(c) for c in components]))
    return int(ss.generate_state(1)[0])


@dataclass
class Evaluator:
    """Simulates genomes with derived seeds and featurizes the trajectories."""

    sim_config: SimConfig
    featurizer: Callable
    rng_seed: int

    def evaluate(self, genomes: Sequence[Genome], first_eval_id: int) -> list[EvaluatedGenome]:
        out = []
        for offset, genome in enumerate(genomes):
            eval_id = first_eval_id + offset
            seed = derive_seed(self.rng_seed, eval_id)
            try:
                traj = simulate(genome, self.sim_config, seed)
                behavior = self.featurizer(traj)
            except Exception as exc:
                raise SearchError(f"evaluation {eval_id} failed: {exc}") from exc
            out.append(
                EvaluatedGenome(
                    genome=genome, behavior=_as_vector(behavior), eval_id=eval_id, seed=seed
                )
            )
        return out


def _binary_tournament(scores: np.ndarray, rng: np.random.Generator) -> int:
    a, b = rng.integers(0, len(scores), size=2)
    return int(a) if scores[a] >= scores[b] else int(b)


def evolve_generation(
    population: Sequence[EvaluatedGenome],
    archive: Archive,
    config: SearchConfig,
    evaluator: Evaluator,
    rng: np.random.Generator,
    generation: int,
) -> list[EvaluatedGenome]:
    """One novelty-search generation.

    Scores the current population against the archive, selects parents by
    binary tournament on novelty, applies crossover then mutation, evaluates
    the offspring, and appends them to the archive as ``generation``.
    """
    scores = novelty_scores(np.array([m.behavior for m in population]), archive, config.p_neighbors)
    offspring: list[Genome] = []
    for _ in range(config.population):
        parent = population[_binary_tournament(scores, rng)].genome
        if rng.random() < config.crossover_rate:
            other = population[_binary_tournament(scores, rng)].genome
            child = crossover(parent, other, rng)
        else:
            child = parent
        offspring.append(mutate(child, config.mutation_rate, rng, config))
    evaluated = evaluator.evaluate(offspring, archive.next_eval_id)
    for member in evaluated:
        archive.append(
            ArchiveEntry(
                eval_id=member.eval_id,
                generation=generation,
                seed=member.seed,
                genome=member.genome,
                behavior=member.behavior,
            )
        )
    return evaluated


@dataclass
class GenerationProgress:
    """Per-generation report emitted to progress sinks (and the HIL session)."""

    generation: int
    eval_ids: list
    novelty: np.ndarray  # novelty of this generation's members, eval order
    archive_size: int

    def top_indices(self, k: int = 3) -> list:
        """Indices of the k most novel members; ties fall to lower eval_id."""
        order = sorted(range(len(self.eval_ids)), key=lambda i: (-self.novelty[i], self.eval_ids[i]))
        return order[:k]


def check_grid_compatibility(search_config: SearchConfig, sim_config: SimConfig) -> None:
    """Every sampleable ratio must leave both behavior types nonempty."""
    n = sim_config.n_agents
    for eta in search_config.eta_grid:
        k = int(np.floor(eta * n + 0.5))
        if k < 1 or n - k < 1:
            raise SearchError(
                f"eta grid value {eta} leaves an empty behavior type for {n} agents; "
                "restrict eta_grid or raise n_agents"
            )


class NoveltySearchRun:
    """Stepwise novelty search; one ``step()`` evaluates one generation."""

    def __init__(self, search_config: SearchConfig, sim_config: SimConfig, featurizer):
        check_grid_compatibility(search_config, sim_config)
        self.search_config = search_config
        self.sim_config = sim_config
        self.featurizer = featurizer
        self.rng = np.random.Generator(np.random.PCG64(search_config.rng_seed))
        self.evaluator = Evaluator(sim_config, featurizer, search_config.rng_seed)
        self.archive = Archive(
            dim=featurizer.dim,
            config_snapshot={
                "kind": "novelty",
                "search_config": search_config.to_dict(),
                "sim_config": sim_config.to_dict(),
                "featurizer": featurizer.to_dict(),
            },
        )
        self.generation = -1
        self.population: list[EvaluatedGenome] = []

    @property
    def done(self) -> bool:
        return self.generation + 1 >= self.search_config.generations

    def step(self) -> GenerationProgress:
        if self.done:
            raise SearchError("search already ran its configured generations")
        gen = self.generation + 1
        if gen == 0:
            genomes = [sample_genome(self.rng, self.search_config) for _ in range(self.search_config.population)]
            evaluated = self.evaluator.evaluate(genomes, self.archive.next_eval_id)
            for member in evaluated:
                self.archive.append(
                    ArchiveEntry(
                        eval_id=member.eval_id,
                        generation=gen,
                        seed=member.seed,
                        genome=member.genome,
                        behavior=member.behavior,
                    )
                )
        else:
            evaluated = evolve_generation(
                self.population, self.archive, self.search_config, self.evaluator, self.rng, gen
            )
        scores = novelty_scores(
            np.array([m.behavior for m in evaluated]), self.archive, self.search_config.p_neighbors
        )
        self.population = evaluated
        self.generation = gen
        return GenerationProgress(
            generation=gen,
            eval_ids=[m.eval_id for m in evaluated],
            novelty=scores,
            archive_size=len(self.archive),
        )


def run_novelty_search(
    search_config: SearchConfig,
    sim_config: SimConfig,
    featurizer,
    progress_sink: Optional[Callable[[GenerationProgress], None]] = None,
) -> Archive:
    """Full novelty search: generations x population evaluations."""
    run = NoveltySearchRun(search_config, sim_config, featurizer)
    while not run.done:
        progress = run.step()
        if progress_sink is not None:
            progress_sink(progress)
    return run.archive


def run_random_search(n: int, sim_config: SimConfig, featurizer, rng_seed: int) -> Archive:
    """Archive of n independent uniform samples (generation tagged -1)."""
    if n < 0:
        raise SearchError("sample count must be >= 0")
    config = SearchConfig(rng_seed=rng_seed)
    check_grid_compatibility(config, sim_config)
    rng = np.random.Generator(np.random.PCG64(rng_seed))
    archive = Archive(
        dim=featurizer.dim,
        config_snapshot={
            "kind": "random",
            "n": n,
            "rng_seed": rng_seed,
            "sim_config": sim_config.to_dict(),
            "featurizer": featurizer.to_dict(),
        },
    )
    evaluator = Evaluator(sim_config, featurizer, rng_seed)
    genomes = [sample_genome(rng, config) for _ in range(n)]
    for member in evaluator.evaluate(genomes, 0):
        archive.append(
            ArchiveEntry(
                eval_id=member.eval_id,
                generation=RANDOM_GENERATION,
                seed=member.seed,
                genome=member.genome,
                behavior=member.behavior,
            )
        )
    return archive
