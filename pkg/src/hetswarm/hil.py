"""Human-in-the-loop discovery sessions.

Two protocols share one session shape:

- the novelty-query protocol embeds a novelty search and, after each
  generation, surfaces that generation's 3 most novel behaviors; the human
  saves any subset into a growing taxonomy (saving never feeds back into
  selection pressure);
- the alchemy protocol shows a grid of 8 swarms; the human saves any and
  selects 1 or 2 parents, and the next grid is composed by fixed rules
  (copy + 6 mutants + 1 random for one parent; both parents + 5 offspring
  + 1 random for two).

Sessions are event-sourced: every state change is an input event, and a
session is fully reconstructible by replaying its log.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .features import HandCraftedFeaturizer
from .fileio import TaxonomyFile, TaxonomyRecord
from .genome import Genome
from .plugin import featurizer_from_dict
from .search import (
    NoveltySearchRun,
    SearchConfig,
    crossover,
    derive_seed,
    mutate,
    sample_genome,
)
from .sim import SimConfig, simulate

HILNS = "hilns"
CHEMISTRY = "chemistry"

AWAITING_HUMAN = "awaiting_human"
EVOLVING = "evolving"
FINISHED = "finished"

GRID_SIZE = 8
QUERY_COUNT = 3


class ProtocolError(ValueError):
    pass


@dataclass
class SavedBehavior:
    genome: Genome
    seed: int
    generation: int
    novelty: Optional[float] = None
    behavior: Optional[np.ndarray] = None
    label: Optional[str] = None


@dataclass(frozen=True)
class QueryRecord:
    slot: int
    eval_id: int
    genome: Genome
    seed: int
    novelty: float


@dataclass(frozen=True)
class GridCell:
    slot: int
    genome: Genome
    seed: int
    provenance: str  # random | copy | mutant | parent | offspring


@dataclass(frozen=True)
class ChemistrySelection:
    selected: tuple
    saved_this_round: tuple = ()

    def __post_init__(self):
        picks = tuple(sorted(set(int(i) for i in self.selected)))
        object.__setattr__(self, "selected", picks)
        object.__setattr__(
            self, "saved_this_round", tuple(sorted(set(int(i) for i in self.saved_this_round)))
        )
        if not (1 <= len(picks) <= 2):
            raise ProtocolError(
                f"select 1 or 2 swarms to evolve (got {len(picks)}); saving alone does not advance"
            )
        for i in (*picks, *self.saved_this_round):
            if not (0 <= i < GRID_SIZE):
                raise ProtocolError(f"grid slot {i} outside [0, {GRID_SIZE})")


def chemistry_init(seed: int, config: SearchConfig = SearchConfig()) -> list:
    """The deterministic initial grid: 8 uniform controller samples."""
    rng = np.random.Generator(np.random.PCG64(seed))
    return [sample_genome(rng, config) for _ in range(GRID_SIZE)]


class HilNsSession:
    """Top-3 novelty queries per generation; human saves into a taxonomy."""

    protocol = HILNS

    def __init__(
        self,
        session_id: str,
        seed: int,
        search_config: SearchConfig = SearchConfig(),
        sim_config: SimConfig = SimConfig(),
        featurizer=None,
    ):
        self.session_id = session_id
        self.seed = int(seed)
        self.search_config = replace(search_config, rng_seed=self.seed)
        self.sim_config = sim_config
        self.featurizer = featurizer if featurizer is not None else HandCraftedFeaturizer()
        self.saved: list[SavedBehavior] = []
        self.events: list[dict] = [
            {
                "type": "created",
                "payload": {
                    "protocol": self.protocol,
                    "session_id": session_id,
                    "seed": self.seed,
                    "search_config": self.search_config.to_dict(),
                    "sim_config": sim_config.to_dict(),
                    "featurizer": self.featurizer.to_dict(),
                },
            }
        ]
        self.status = EVOLVING
        self.run = NoveltySearchRun(self.search_config, sim_config, self.featurizer)
        self._queries: list[QueryRecord] = []
        self._advance()

    @property
    def generation(self) -> int:
        return self.run.generation

    @property
    def archive(self):
        return self.run.archive

    def _advance(self) -> None:
        progress = self.run.step()
        members = {m.eval_id: m for m in self.run.population}
        queries = []
        for slot, idx in enumerate(progress.top_indices(QUERY_COUNT)):
            member = members[progress.eval_ids[idx]]
            queries.append(
                QueryRecord(
                    slot=slot,
                    eval_id=member.eval_id,
                    genome=member.genome,
                    seed=member.seed,
                    novelty=float(progress.novelty[idx]),
                )
            )
        self._queries = queries
        self.status = AWAITING_HUMAN

    def pending_queries(self) -> list:
        if self.status != AWAITING_HUMAN:
            raise ProtocolError(f"no pending queries while {self.status}")
        return list(self._queries)

    def respond(self, saved_indices: Sequence[int]) -> None:
        """Save any subset of the pending queries, then evolve one generation."""
        if self.status != AWAITING_HUMAN:
            raise ProtocolError(f"cannot respond while {self.status}")
        picks = sorted(set(int(i) for i in saved_indices))
        for i in picks:
            if not (0 <= i < len(self._queries)):
                raise ProtocolError(f"query slot {i} outside [0, {len(self._queries)})")
        generation = self.generation
        self.events.append(
            {"type": "respond", "payload": {"generation": generation, "saved": picks}}
        )
        for i in picks:
            q = self._queries[i]
            entry = self.run.archive[q.eval_id]
            self.saved.append(
                SavedBehavior(
                    genome=q.genome,
                    seed=q.seed,
                    generation=generation,
                    novelty=q.novelty,
                    behavior=entry.behavior,
                )
            )
        if self.run.done:
            self.status = FINISHED
            self._queries = []
        else:
            self.status = EVOLVING
            self._advance()

    def label_saved(self, saved_index: int, label: str) -> None:
        if not (0 <= saved_index < len(self.saved)):
            raise ProtocolError(f"no saved behavior at index {saved_index}")
        self.events.append(
            {"type": "label", "payload": {"saved_index": int(saved_index), "label": label}}
        )
        self.saved[saved_index].label = label


class ChemistrySession:
    """Human-selected evolution over a grid of 8 swarms."""

    protocol = CHEMISTRY

    def __init__(
        self,
        session_id: str,
        seed: int,
        search_config: SearchConfig = SearchConfig(),
        sim_config: SimConfig = SimConfig(),
        featurizer=None,
        max_generations: int = 50,
        mutate_offspring: bool = False,
    ):
        self.session_id = session_id
        self.seed = int(seed)
        self.search_config = search_config
        self.sim_config = sim_config
        self.featurizer = featurizer if featurizer is not None else HandCraftedFeaturizer()
        self.max_generations = int(max_generations)
        self.mutate_offspring = bool(mutate_offspring)
        self.saved: list[SavedBehavior] = []
        self.generation = 0
        self.rng = np.random.Generator(np.random.PCG64(self.seed))
        self.events: list[dict] = [
            {
                "type": "created",
                "payload": {
                    "protocol": self.protocol,
                    "session_id": session_id,
                    "seed": self.seed,
                    "search_config": search_config.to_dict(),
                    "sim_config": sim_config.to_dict(),
                    "featurizer": self.featurizer.to_dict(),
                    "max_generations": self.max_generations,
                    "mutate_offspring": self.mutate_offspring,
                },
            }
        ]
        genomes = [sample_genome(self.rng, search_config) for _ in range(GRID_SIZE)]
        self.grid = self._cells(genomes, ["random"] * GRID_SIZE)
        self.status = AWAITING_HUMAN

    def _cells(self, genomes: Sequence[Genome], provenance: Sequence[str]) -> list:
        return [
            GridCell(
                slot=slot,
                genome=g,
                seed=derive_seed(self.seed, self.generation, slot),
                provenance=p,
            )
            for slot, (g, p) in enumerate(zip(genomes, provenance))
        ]

    def pending_grid(self) -> list:
        if self.status != AWAITING_HUMAN:
            raise ProtocolError(f"no pending grid while {self.status}")
        return list(self.grid)

    def advance(self, selection: ChemistrySelection) -> list:
        """Save marked swarms, then compose the next grid from the selection."""
        if self.status != AWAITING_HUMAN:
            raise ProtocolError(f"cannot advance while {self.status}")
        self.events.append(
            {
                "type": "advance",
                "payload": {
                    "generation": self.generation,
                    "selected": list(selection.selected),
                    "saved": list(selection.saved_this_round),
                },
            }
        )
        for i in selection.saved_this_round:
            cell = self.grid[i]
            self.saved.append(
                SavedBehavior(genome=cell.genome, seed=cell.seed, generation=self.generation)
            )
        parents = [self.grid[i].genome for i in selection.selected]
        rate = self.search_config.mutation_rate
        if len(parents) == 1:
            genomes = [parents[0]]
            provenance = ["copy"]
            for _ in range(6):
                genomes.append(mutate(parents[0], rate, self.rng, self.search_config))
                provenance.append("mutant")
        else:
            genomes = [parents[0], parents[1]]
            provenance = ["parent", "parent"]
            for _ in range(5):
                child = crossover(parents[0], parents[1], self.rng)
                if self.mutate_offspring:
                    child = mutate(child, rate, self.rng, self.search_config)
                genomes.append(child)
                provenance.append("offspring")
        genomes.append(sample_genome(self.rng, self.search_config))
        provenance.append("random")
        self.generation += 1
        self.grid = self._cells(genomes, provenance)
        if self.generation >= self.max_generations:
            self.status = FINISHED
        return list(self.grid)

    def label_saved(self, saved_index: int, label: str) -> None:
        if not (0 <= saved_index < len(self.saved)):
            raise ProtocolError(f"no saved behavior at index {saved_index}")
        self.events.append(
            {"type": "label", "payload": {"saved_index": int(saved_index), "label": label}}
        )
        self.saved[saved_index].label = label


def create_session(
    protocol: str,
    seed: int,
    session_id: str,
    search_config: SearchConfig = SearchConfig(),
    sim_config: SimConfig = SimConfig(),
    featurizer=None,
    **kwargs,
):
    if protocol == HILNS:
        return HilNsSession(session_id, seed, search_config, sim_config, featurizer)
    if protocol == CHEMISTRY:
        return ChemistrySession(session_id, seed, search_config, sim_config, featurizer, **kwargs)
    raise ProtocolError(f"unknown protocol {protocol!r}")


def restore_session(events: Sequence[dict]):
    """Rebuild a session by replaying its input-event log."""
    if not events or events[0].get("type") != "created":
        raise ProtocolError("event log must start with a 'created' event")
    payload = events[0]["payload"]
    protocol = payload["protocol"]
    kwargs = {}
    if protocol == CHEMISTRY:
        kwargs = {
            "max_generations": payload.get("max_generations", 50),
            "mutate_offspring": payload.get("mutate_offspring", False),
        }
    session = create_session(
        protocol,
        payload["seed"],
        payload["session_id"],
        search_config=SearchConfig.from_dict(payload["search_config"]),
        sim_config=SimConfig.from_dict(payload["sim_config"]),
        featurizer=featurizer_from_dict(payload["featurizer"]),
        **kwargs,
    )
    for event in events[1:]:
        kind = event.get("type")
        body = event.get("payload", {})
        if kind == "respond":
            session.respond(body["saved"])
        elif kind == "advance":
            session.advance(
                ChemistrySelection(selected=tuple(body["selected"]), saved_this_round=tuple(body["saved"]))
            )
        elif kind == "label":
            session.label_saved(body["saved_index"], body["label"])
        else:
            raise ProtocolError(f"unknown event type {kind!r}")
    return session


def export_taxonomy(session) -> TaxonomyFile:
    """The aggregated human taxonomy of a session, in the taxonomy file format.

    Behaviors saved without a feature vector (grid selections) are replayed
    and featurized so every record is verifiable from (genome, seed).
    """
    records = []
    for idx, saved in enumerate(session.saved):
        behavior = saved.behavior
        if behavior is None:
            traj = simulate(saved.genome, session.sim_config, saved.seed)
            behavior = np.asarray(session.featurizer(traj).values, dtype=np.float64)
        records.append(
            TaxonomyRecord(
                cluster_id=idx,
                size=1,
                genome=saved.genome,
                seed=saved.seed,
                behavior=behavior,
                label=saved.label,
                generation=saved.generation,
            )
        )
    return TaxonomyFile(
        source="human",
        config={
            "protocol": session.protocol,
            "session_id": session.session_id,
            "seed": session.seed,
            "sim_config": session.sim_config.to_dict(),
            "featurizer": session.featurizer.to_dict(),
        },
        records=records,
    )
