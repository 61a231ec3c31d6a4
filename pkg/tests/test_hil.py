import numpy as np
import pytest

from hetswarm.features import BehaviorVector, HandCraftedFeaturizer, MetricWindow
from hetswarm.hil import (
    AWAITING_HUMAN,
    FINISHED,
    ChemistrySelection,
    ChemistrySession,
    HilNsSession,
    ProtocolError,
    chemistry_init,
    create_session,
    export_taxonomy,
    restore_session,
)
from hetswarm.search import Archive, SearchConfig, novelty_score, sample_genome
from hetswarm.sim import SimConfig, simulate

SIM = SimConfig(n_agents=12, world_width=150.0, world_height=150.0, horizon=40)
SEARCH = SearchConfig(generations=4, population=10, rng_seed=0)
FEATURIZER = HandCraftedFeaturizer(mode="aware", window=MetricWindow(20, 40))


def hilns_session(seed=0, generations=4, population=10):
    return HilNsSession(
        "s-test",
        seed,
        SearchConfig(generations=generations, population=population, rng_seed=0),
        SIM,
        FEATURIZER,
    )


class ConstantFeaturizer(HandCraftedFeaturizer):
    """Maps every trajectory to the same point: all novelty scores tie."""

    def __call__(self, traj):
        return BehaviorVector(values=np.zeros(3), mode="agnostic")

    @property
    def dim(self):
        return 3


class TestHilNsQueries:
    def test_three_queries_descending_novelty(self):
        session = hilns_session()
        queries = session.pending_queries()
        assert len(queries) == 3
        scores = [q.novelty for q in queries]
        assert scores == sorted(scores, reverse=True)
        assert session.status == AWAITING_HUMAN

    def test_queries_are_top3_of_generation_recomputed_from_archive(self):
        session = hilns_session()
        for _ in range(SEARCH.generations):
            queries = session.pending_queries()
            generation = session.generation
            entries = session.archive.generation_entries(generation)
            prefix = Archive(dim=session.archive.dim)
            for e in list(session.archive)[: (generation + 1) * SEARCH.population]:
                prefix.append(e)
            recomputed = sorted(
                (
                    (-novelty_score(e.behavior, prefix, SEARCH.p_neighbors), e.eval_id)
                    for e in entries
                ),
            )[:3]
            assert [q.eval_id for q in queries] == [eval_id for _, eval_id in recomputed]
            session.respond([])
            if session.status == FINISHED:
                break

    def test_all_scores_equal_ties_break_to_lowest_eval_ids(self):
        session = HilNsSession(
            "s-tie", 0, SearchConfig(generations=2, population=8, rng_seed=0), SIM, ConstantFeaturizer()
        )
        queries = session.pending_queries()
        assert [q.eval_id for q in queries] == [0, 1, 2]

    def test_save_nothing_leaves_archive_full_and_taxonomy_empty(self):
        session = hilns_session()
        while session.status == AWAITING_HUMAN:
            session.respond([])
        assert session.status == FINISHED
        assert session.saved == []
        assert len(session.archive) == SEARCH.generations * SEARCH.population
        assert len(export_taxonomy(session).records) == 0

    def test_save_everything_yields_three_per_generation(self):
        session = hilns_session()
        while session.status == AWAITING_HUMAN:
            session.respond([0, 1, 2])
        assert len(session.saved) == 3 * SEARCH.generations
        taxonomy = export_taxonomy(session)
        assert len(taxonomy.records) == 3 * SEARCH.generations
        assert taxonomy.source == "human"

    def test_saved_entries_replay_to_displayed_behavior(self):
        session = hilns_session()
        session.respond([0, 2])
        for saved in session.saved:
            traj = simulate(saved.genome, SIM, saved.seed)
            assert np.array_equal(np.asarray(FEATURIZER(traj).values), saved.behavior)

    def test_respond_validates_state_and_indices(self):
        session = hilns_session()
        with pytest.raises(ProtocolError):
            session.respond([5])
        while session.status == AWAITING_HUMAN:
            session.respond([])
        with pytest.raises(ProtocolError):
            session.respond([0])
        with pytest.raises(ProtocolError):
            session.pending_queries()

    def test_human_input_does_not_alter_search_trajectory(self):
        # same seed, different saving patterns: identical archives
        a = hilns_session()
        b = hilns_session()
        while a.status == AWAITING_HUMAN:
            a.respond([0, 1, 2])
        while b.status == AWAITING_HUMAN:
            b.respond([])
        for e1, e2 in zip(a.archive, b.archive):
            assert e1.genome == e2.genome
            assert np.array_equal(e1.behavior, e2.behavior)


class TestChemistry:
    def test_init_deterministic(self):
        assert chemistry_init(7) == chemistry_init(7)
        g1 = ChemistrySession("c1", 7, SEARCH, SIM, FEATURIZER).pending_grid()
        g2 = ChemistrySession("c2", 7, SEARCH, SIM, FEATURIZER).pending_grid()
        assert [c.genome for c in g1] == [c.genome for c in g2]
        assert [c.seed for c in g1] == [c.seed for c in g2]

    def test_init_genomes_on_grid(self):
        for g in chemistry_init(3):
            assert g.on_grid()

    def test_different_seeds_differ(self):
        distinct = 0
        for seed in range(100):
            if chemistry_init(seed) != chemistry_init(seed + 1000):
                distinct += 1
        assert distinct == 100

    def test_single_selection_composition(self):
        session = ChemistrySession("c", 1, SEARCH, SIM, FEATURIZER)
        parent = session.pending_grid()[4].genome
        grid = session.advance(ChemistrySelection(selected=(4,)))
        provenance = [c.provenance for c in grid]
        assert provenance == ["copy"] + ["mutant"] * 6 + ["random"]
        assert grid[0].genome == parent
        assert session.generation == 1

    def test_double_selection_composition(self):
        session = ChemistrySession("c", 2, SEARCH, SIM, FEATURIZER)
        p0 = session.pending_grid()[0].genome
        p5 = session.pending_grid()[5].genome
        grid = session.advance(ChemistrySelection(selected=(0, 5)))
        provenance = [c.provenance for c in grid]
        assert provenance == ["parent"] * 2 + ["offspring"] * 5 + ["random"]
        assert grid[0].genome == p0 and grid[1].genome == p5
        for cell in grid[2:7]:
            for slot, value in enumerate(cell.genome.as_values()):
                assert value in (p0.as_values()[slot], p5.as_values()[slot])

    def test_selection_validation(self):
        with pytest.raises(ProtocolError):
            ChemistrySelection(selected=())
        with pytest.raises(ProtocolError):
            ChemistrySelection(selected=(0, 1, 2))
        with pytest.raises(ProtocolError):
            ChemistrySelection(selected=(9,))

    def test_saving_appends_with_generation(self):
        session = ChemistrySession("c", 3, SEARCH, SIM, FEATURIZER)
        cell = session.pending_grid()[2]
        session.advance(ChemistrySelection(selected=(0,), saved_this_round=(2,)))
        assert len(session.saved) == 1
        assert session.saved[0].genome == cell.genome
        assert session.saved[0].seed == cell.seed
        assert session.saved[0].generation == 0

    def test_scripted_always_first_slot_is_deterministic(self):
        def run():
            session = ChemistrySession("c", 11, SEARCH, SIM, FEATURIZER, max_generations=6)
            while session.status == AWAITING_HUMAN:
                session.advance(ChemistrySelection(selected=(0,), saved_this_round=(1,)))
            return session

        a, b = run(), run()
        assert a.generation == b.generation == 6
        assert [s.genome for s in a.saved] == [s.genome for s in b.saved]
        assert [c.genome for c in a.grid] == [c.genome for c in b.grid]

    def test_finishes_at_max_generations(self):
        session = ChemistrySession("c", 0, SEARCH, SIM, FEATURIZER, max_generations=2)
        session.advance(ChemistrySelection(selected=(0,)))
        session.advance(ChemistrySelection(selected=(0,)))
        assert session.status == FINISHED
        with pytest.raises(ProtocolError):
            session.advance(ChemistrySelection(selected=(0,)))

    def test_export_replays_saved_grid_cells(self):
        session = ChemistrySession("c", 5, SEARCH, SIM, FEATURIZER, max_generations=3)
        session.advance(ChemistrySelection(selected=(1,), saved_this_round=(0, 3)))
        taxonomy = export_taxonomy(session)
        assert len(taxonomy.records) == 2
        for record in taxonomy.records:
            traj = simulate(record.genome, SIM, record.seed)
            assert np.allclose(np.asarray(FEATURIZER(traj).values), record.behavior, atol=1e-12)


class TestEventSourcing:
    def test_hilns_reconstruction_from_event_log(self):
        session = hilns_session(seed=3)
        session.respond([0])
        session.respond([1, 2])
        session.label_saved(0, "spinner")
        restored = restore_session(session.events)
        assert restored.generation == session.generation
        assert restored.status == session.status
        assert len(restored.saved) == len(session.saved)
        for s1, s2 in zip(restored.saved, session.saved):
            assert s1.genome == s2.genome and s1.seed == s2.seed and s1.label == s2.label
        assert [q.eval_id for q in restored.pending_queries()] == [
            q.eval_id for q in session.pending_queries()
        ]

    def test_chemistry_reconstruction_from_event_log(self):
        session = ChemistrySession("c", 9, SEARCH, SIM, FEATURIZER, max_generations=10)
        session.advance(ChemistrySelection(selected=(2,), saved_this_round=(0,)))
        session.advance(ChemistrySelection(selected=(0, 7), saved_this_round=(5,)))
        session.label_saved(1, "chaser")
        restored = restore_session(session.events)
        assert restored.generation == session.generation
        assert [c.genome for c in restored.grid] == [c.genome for c in session.grid]
        assert [s.label for s in restored.saved] == [s.label for s in session.saved]

    def test_relabel_overwrites_but_log_retains_history(self):
        session = ChemistrySession("c", 4, SEARCH, SIM, FEATURIZER)
        session.advance(ChemistrySelection(selected=(0,), saved_this_round=(0,)))
        session.label_saved(0, "tourbillon serré")  # non-ascii survives the log
        session.label_saved(0, "second")
        assert session.saved[0].label == "second"
        labels = [e["payload"]["label"] for e in session.events if e["type"] == "label"]
        assert labels == ["tourbillon serré", "second"]

    def test_create_session_validates_protocol(self):
        with pytest.raises(ProtocolError):
            create_session("alchemy", 0, "x", SEARCH, SIM, FEATURIZER)
