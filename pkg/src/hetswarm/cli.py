"""Batch CLI: automated searches, clustering, scripted HIL runs, replays.

Every run is described by a RunManifest (assembled from flags or loaded
with ``run --manifest``), validated before any compute, and leaves a
machine-readable ``summary.json`` embedding the manifest, so any artifact
can be reproduced from its own directory. Validation failures print one
JSON diagnostic line to stderr and exit nonzero.
"""
from __future__ import annotations

import argparse
import json
import os
import shlex
import sys
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .clustering import ClusterConfig, extract_taxonomy
from .controllers import PRESETS, preset
from .features import AGNOSTIC, AWARE, HandCraftedFeaturizer, MetricWindow, featurize
from .fileio import (
    load_archive,
    save_archive,
    save_trajectory_csv,
    save_trajectory_npz,
    taxonomy_from_candidates,
    append_event,
)
from .genome import ETA_GRID, Genome, GenomeError
from .hil import (
    AWAITING_HUMAN,
    CHEMISTRY,
    HILNS,
    ChemistrySelection,
    ChemistrySession,
    HilNsSession,
    export_taxonomy,
)
from .plugin import PluginFeaturizer, featurizer_from_dict
from .render import render_trajectory, save_png
from .search import SearchConfig, SearchError, check_grid_compatibility, run_novelty_search, run_random_search
from .service import stream_replay
from .sim import SimConfig, simulate

DATA_DIR_ENV = "HETSWARM_DATA_DIR"

MODES = ("novelty", "random", "cluster", "hilns", "chemistry", "replay", "sweep", "render")


class ManifestError(ValueError):
    pass


@dataclass
class RunManifest:
    mode: str
    out_dir: Path
    run_id: str = field(default_factory=lambda: uuid.uuid4().hex[:12])
    created_at: str = field(default_factory=lambda: time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()))
    seeds: list = field(default_factory=lambda: [0])
    sim_config: SimConfig = field(default_factory=SimConfig)
    search_config: SearchConfig = field(default_factory=SearchConfig)
    cluster_config: Optional[ClusterConfig] = None
    featurizer_spec: dict = field(default_factory=lambda: HandCraftedFeaturizer().to_dict())
    n: int = 5000
    archive: Optional[Path] = None
    verify_replay: bool = True
    thumbnails: bool = False
    respond: str = "none"  # hilns scripted human: all | none | first | @file
    select: str = "first"  # chemistry scripted human: first | last | @file
    steps: int = 50
    genome: Optional[list] = None
    stride: int = 1
    trajectory_format: str = "csv"  # csv | npz | frames
    resolution: int = 256
    trail: int = 100

    def to_dict(self) -> dict:
        return {
            "run_id": self.run_id,
            "mode": self.mode,
            "created_at": self.created_at,
            "out_dir": str(self.out_dir),
            "seeds": list(self.seeds),
            "sim_config": self.sim_config.to_dict(),
            "search_config": self.search_config.to_dict(),
            "cluster_config": None if self.cluster_config is None else self.cluster_config.to_dict(),
            "featurizer": self.featurizer_spec,
            "n": self.n,
            "archive": None if self.archive is None else str(self.archive),
            "verify_replay": self.verify_replay,
            "thumbnails": self.thumbnails,
            "respond": self.respond,
            "select": self.select,
            "steps": self.steps,
            "genome": self.genome,
            "stride": self.stride,
            "trajectory_format": self.trajectory_format,
            "resolution": self.resolution,
            "trail": self.trail,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunManifest":
        known = {}
        known["mode"] = d["mode"]
        known["out_dir"] = Path(d["out_dir"])
        for key in ("run_id", "created_at", "respond", "select", "trajectory_format"):
            if key in d and d[key] is not None:
                known[key] = d[key]
        for key in ("n", "steps", "stride", "resolution", "trail"):
            if key in d and d[key] is not None:
                known[key] = int(d[key])
        if d.get("seeds") is not None:
            known["seeds"] = [int(s) for s in d["seeds"]]
        if d.get("sim_config"):
            known["sim_config"] = SimConfig.from_dict(d["sim_config"])
        if d.get("search_config"):
            known["search_config"] = SearchConfig.from_dict(d["search_config"])
        if d.get("cluster_config"):
            known["cluster_config"] = ClusterConfig.from_dict(d["cluster_config"])
        if d.get("featurizer"):
            known["featurizer_spec"] = d["featurizer"]
        if d.get("archive"):
            known["archive"] = Path(d["archive"])
        for key in ("verify_replay", "thumbnails"):
            if key in d and d[key] is not None:
                known[key] = bool(d[key])
        if d.get("genome") is not None:
            known["genome"] = [float(v) for v in d["genome"]]
        return cls(**known)

    # -- validation (before any compute) -----------------------------------

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ManifestError(f"mode must be one of {MODES}, got {self.mode!r}")
        if not self.seeds:
            raise ManifestError("at least one seed is required")
        if self.mode in ("novelty", "random", "hilns", "chemistry", "sweep"):
            check_grid_compatibility(self.search_config, self.sim_config)
        if self.mode == "random" and self.n < 0:
            raise ManifestError("--n must be >= 0")
        if self.mode == "cluster":
            if self.archive is None:
                raise ManifestError("cluster mode requires --archive")
            if not Path(self.archive).exists():
                raise ManifestError(f"archive file not found: {self.archive}")
            header = self._archive_header()
            if self.cluster_config is None:
                raise ManifestError("cluster mode requires a cluster config")
            entries = int(header.get("entries", 0))
            if entries < self.cluster_config.k:
                raise ManifestError(
                    f"archive holds {entries} entries, fewer than k={self.cluster_config.k}"
                )
        if self.mode in ("replay", "render", "sweep") and self.genome is None:
            raise ManifestError(f"{self.mode} mode requires a controller (--genome or --preset)")
        if self.mode == "sweep" and self.genome is not None and len(self.genome) != 8:
            raise ManifestError("sweep takes exactly 8 wheel velocities; eta comes from the grid")
        if self.mode in ("replay", "render") and self.genome is not None:
            Genome.from_values(self.genome)  # raises GenomeError on bad values
        if self.respond.startswith("@") and not Path(self.respond[1:]).exists():
            raise ManifestError(f"respond script not found: {self.respond[1:]}")
        if self.select.startswith("@") and not Path(self.select[1:]).exists():
            raise ManifestError(f"select script not found: {self.select[1:]}")
        if self.trajectory_format not in ("csv", "npz", "frames"):
            raise ManifestError("trajectory format must be csv, npz or frames")

    def _archive_header(self) -> dict:
        with Path(self.archive).open("r", encoding="utf-8") as fh:
            first = fh.readline()
        try:
            header = json.loads(first)
        except json.JSONDecodeError as exc:
            raise ManifestError(f"archive header is not valid JSON: {exc}")
        if header.get("kind") != "archive":
            raise ManifestError(f"{self.archive} is not an archive file")
        return header

    def featurizer(self):
        return featurizer_from_dict(self.featurizer_spec)


# ---------------------------------------------------------------------------
# mode runners


def _write_summary(manifest: RunManifest, artifacts: dict, counts: dict, timings: dict) -> Path:
    summary = {
        "run_id": manifest.run_id,
        "mode": manifest.mode,
        "created_at": manifest.created_at,
        "manifest": manifest.to_dict(),
        "artifacts": artifacts,
        "counts": counts,
        "timings_s": timings,
    }
    path = manifest.out_dir / "summary.json"
    path.write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return path


def _run_search(manifest: RunManifest) -> dict:
    artifacts, counts, timings = {}, {}, {}
    for seed in manifest.seeds:
        started = time.perf_counter()
        featurizer = manifest.featurizer()
        if manifest.mode == "novelty":
            config = SearchConfig.from_dict({**manifest.search_config.to_dict(), "rng_seed": seed})
            progress_path = manifest.out_dir / f"progress_seed{seed}.jsonl"
            if progress_path.exists():
                progress_path.unlink()

            def sink(report, path=progress_path):
                order = report.top_indices(3)
                append_event(
                    path,
                    {
                        "generation": report.generation,
                        "archive_size": report.archive_size,
                        "top": [
                            {"eval_id": report.eval_ids[i], "novelty": float(report.novelty[i])}
                            for i in order
                        ],
                    },
                )

            archive = run_novelty_search(config, manifest.sim_config, featurizer, progress_sink=sink)
            artifacts[f"progress_seed{seed}"] = str(progress_path)
        else:
            archive = run_random_search(manifest.n, manifest.sim_config, featurizer, rng_seed=seed)
        path = manifest.out_dir / f"archive_seed{seed}.jsonl"
        save_archive(archive, path)
        artifacts[f"archive_seed{seed}"] = str(path)
        counts[f"entries_seed{seed}"] = len(archive)
        timings[f"seed{seed}"] = round(time.perf_counter() - started, 3)
    return {"artifacts": artifacts, "counts": counts, "timings": timings}


def _run_cluster(manifest: RunManifest) -> dict:
    started = time.perf_counter()
    archive = load_archive(manifest.archive)
    candidates = extract_taxonomy(
        archive,
        manifest.cluster_config,
        verify_replay=manifest.verify_replay,
        with_thumbnails=manifest.thumbnails,
        thumbnail_resolution=manifest.resolution,
    )
    taxonomy = taxonomy_from_candidates(
        candidates,
        {"cluster_config": manifest.cluster_config.to_dict(), "archive": str(manifest.archive)},
    )
    path = manifest.out_dir / "taxonomy.jsonl"
    taxonomy.save(path)
    artifacts = {"taxonomy": str(path)}
    if manifest.thumbnails:
        thumb_dir = manifest.out_dir / "thumbnails"
        thumb_dir.mkdir(exist_ok=True)
        for cand in candidates:
            thumb = thumb_dir / f"cluster_{cand.cluster_id}.png"
            save_png(cand.thumbnail, thumb)
            artifacts[f"thumbnail_{cand.cluster_id}"] = str(thumb)
    return {
        "artifacts": artifacts,
        "counts": {"clusters": len(candidates), "entries": len(archive)},
        "timings": {"cluster": round(time.perf_counter() - started, 3)},
    }


def _hilns_script(manifest: RunManifest):
    if manifest.respond.startswith("@"):
        script = json.loads(Path(manifest.respond[1:]).read_text(encoding="utf-8"))
        return lambda generation, queries: script[generation % len(script)]
    fixed = {"all": [0, 1, 2], "none": [], "first": [0]}
    if manifest.respond not in fixed:
        raise ManifestError(f"unknown respond policy {manifest.respond!r}")
    return lambda generation, queries: fixed[manifest.respond]


def _chemistry_script(manifest: RunManifest):
    if manifest.select.startswith("@"):
        script = json.loads(Path(manifest.select[1:]).read_text(encoding="utf-8"))
        return lambda generation, grid: ChemistrySelection(
            selected=tuple(script[generation % len(script)].get("selected", (0,))),
            saved_this_round=tuple(script[generation % len(script)].get("saved", ())),
        )
    if manifest.select == "first":
        return lambda generation, grid: ChemistrySelection(selected=(0,))
    if manifest.select == "last":
        return lambda generation, grid: ChemistrySelection(selected=(len(grid) - 1,))
    raise ManifestError(f"unknown select policy {manifest.select!r}")


def _run_hil(manifest: RunManifest) -> dict:
    artifacts, counts, timings = {}, {}, {}
    for seed in manifest.seeds:
        started = time.perf_counter()
        featurizer = manifest.featurizer()
        if manifest.mode == "hilns":
            respond = _hilns_script(manifest)
            session = HilNsSession(
                f"hilns-cli-{manifest.run_id}-{seed}",
                seed,
                manifest.search_config,
                manifest.sim_config,
                featurizer,
            )
            while session.status == AWAITING_HUMAN:
                session.respond(respond(session.generation, session.pending_queries()))
            archive_path = manifest.out_dir / f"archive_seed{seed}.jsonl"
            save_archive(session.archive, archive_path)
            artifacts[f"archive_seed{seed}"] = str(archive_path)
        else:
            select = _chemistry_script(manifest)
            session = ChemistrySession(
                f"chemistry-cli-{manifest.run_id}-{seed}",
                seed,
                manifest.search_config,
                manifest.sim_config,
                featurizer,
                max_generations=manifest.steps,
            )
            while session.status == AWAITING_HUMAN:
                session.advance(select(session.generation, session.pending_grid()))
        events_path = manifest.out_dir / f"events_seed{seed}.jsonl"
        if events_path.exists():
            events_path.unlink()
        for event in session.events:
            append_event(events_path, event)
        taxonomy_path = manifest.out_dir / f"taxonomy_seed{seed}.jsonl"
        export_taxonomy(session).save(taxonomy_path)
        artifacts[f"events_seed{seed}"] = str(events_path)
        artifacts[f"taxonomy_seed{seed}"] = str(taxonomy_path)
        counts[f"saved_seed{seed}"] = len(session.saved)
        # chemistry generation counts advances performed; hilns is a 0-based index
        counts[f"generations_seed{seed}"] = (
            session.generation if manifest.mode == "chemistry" else session.generation + 1
        )
        timings[f"seed{seed}"] = round(time.perf_counter() - started, 3)
    return {"artifacts": artifacts, "counts": counts, "timings": timings}


def _run_replay(manifest: RunManifest) -> dict:
    artifacts, counts = {}, {}
    started = time.perf_counter()
    genome = Genome.from_values(manifest.genome)
    for seed in manifest.seeds:
        if manifest.trajectory_format == "frames":
            path = manifest.out_dir / f"frames_seed{seed}.jsonl"
            if path.exists():
                path.unlink()
            n_frames = 0
            for frame in stream_replay(genome, seed, manifest.sim_config, manifest.stride):
                append_event(path, frame)
                n_frames += 1
            counts[f"frames_seed{seed}"] = n_frames
        else:
            traj = simulate(genome, manifest.sim_config, seed)
            if manifest.trajectory_format == "csv":
                path = manifest.out_dir / f"trajectory_seed{seed}.csv"
                save_trajectory_csv(traj, path)
            else:
                path = manifest.out_dir / f"trajectory_seed{seed}.npz"
                save_trajectory_npz(traj, path)
            counts[f"steps_seed{seed}"] = traj.horizon
        artifacts[f"trajectory_seed{seed}"] = str(path)
    return {
        "artifacts": artifacts,
        "counts": counts,
        "timings": {"replay": round(time.perf_counter() - started, 3)},
    }


def _run_sweep(manifest: RunManifest) -> dict:
    """The population-ratio sweep: one run per grid eta, fixed velocities."""
    artifacts, counts = {}, {}
    started = time.perf_counter()
    etas = list(manifest.search_config.eta_grid)
    features = {}
    for seed in manifest.seeds:
        for i, eta in enumerate(etas):
            genome = Genome.from_values(list(manifest.genome) + [eta])
            traj = simulate(genome, manifest.sim_config, seed)
            path = manifest.out_dir / f"sweep_seed{seed}_eta{i}.npz"
            save_trajectory_npz(traj, path)
            image = render_trajectory(traj, AWARE, manifest.resolution, manifest.trail)
            png = manifest.out_dir / f"sweep_seed{seed}_eta{i}.png"
            save_png(image, png)
            artifacts[f"trajectory_seed{seed}_eta{i}"] = str(path)
            artifacts[f"render_seed{seed}_eta{i}"] = str(png)
            vec = featurize(traj, AWARE)
            features[f"seed{seed}_eta{i}"] = {
                "eta": eta,
                "behavior": [float(v) for v in vec.values],
            }
        counts[f"trajectories_seed{seed}"] = len(etas)
    features_path = manifest.out_dir / "sweep_features.json"
    features_path.write_text(json.dumps(features, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    artifacts["features"] = str(features_path)
    return {
        "artifacts": artifacts,
        "counts": counts,
        "timings": {"sweep": round(time.perf_counter() - started, 3)},
    }


def _run_render(manifest: RunManifest) -> dict:
    started = time.perf_counter()
    genome = Genome.from_values(manifest.genome)
    artifacts = {}
    mode = manifest.featurizer_spec.get("mode", AWARE)
    for seed in manifest.seeds:
        traj = simulate(genome, manifest.sim_config, seed)
        image = render_trajectory(traj, mode, manifest.resolution, manifest.trail)
        path = manifest.out_dir / f"render_seed{seed}.png"
        save_png(image, path)
        artifacts[f"render_seed{seed}"] = str(path)
    return {
        "artifacts": artifacts,
        "counts": {"renders": len(manifest.seeds)},
        "timings": {"render": round(time.perf_counter() - started, 3)},
    }


def cli_run(manifest: RunManifest) -> Path:
    """Validate and execute a manifest; returns the summary path."""
    manifest.validate()
    manifest.out_dir.mkdir(parents=True, exist_ok=True)
    runners = {
        "novelty": _run_search,
        "random": _run_search,
        "cluster": _run_cluster,
        "hilns": _run_hil,
        "chemistry": _run_hil,
        "replay": _run_replay,
        "sweep": _run_sweep,
        "render": _run_render,
    }
    result = runners[manifest.mode](manifest)
    return _write_summary(manifest, result["artifacts"], result["counts"], result["timings"])


# ---------------------------------------------------------------------------
# argument parsing


def _parse_seeds(text: str) -> list:
    return [int(s) for s in text.split(",") if s.strip() != ""]


def _add_sim_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("simulation")
    group.add_argument("--n-agents", type=int, default=None)
    group.add_argument("--world-width", type=float, default=None)
    group.add_argument("--world-height", type=float, default=None)
    group.add_argument("--horizon", type=int, default=None)
    group.add_argument("--agent-radius", type=float, default=None)
    group.add_argument("--wheel-base", type=float, default=None)
    group.add_argument("--speed-scale", type=float, default=None)
    group.add_argument("--collision-passes", type=int, default=None)


def _add_search_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("search")
    group.add_argument("--generations", type=int, default=None)
    group.add_argument("--population", type=int, default=None)
    group.add_argument("--p-neighbors", type=int, default=None)
    group.add_argument("--mutation-rate", type=float, default=None)
    group.add_argument("--crossover-rate", type=float, default=None)


def _add_featurizer_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("featurizer")
    group.add_argument("--mode", choices=[AGNOSTIC, AWARE], default=AWARE)
    group.add_argument("--window-start", type=int, default=None)
    group.add_argument("--window-end", type=int, default=None)
    group.add_argument(
        "--plugin",
        default=None,
        help="external embedder command (overrides the hand-crafted featurizer)",
    )
    group.add_argument("--plugin-resolution", type=int, default=50)


def _sim_config_from(args) -> SimConfig:
    base = SimConfig().to_dict()
    for flag, key in [
        ("n_agents", "n_agents"),
        ("world_width", "world_width"),
        ("world_height", "world_height"),
        ("horizon", "horizon"),
        ("agent_radius", "agent_radius"),
        ("wheel_base", "wheel_base"),
        ("speed_scale", "speed_scale"),
        ("collision_passes", "collision_passes"),
    ]:
        value = getattr(args, flag, None)
        if value is not None:
            base[key] = value
    return SimConfig.from_dict(base)


def _search_config_from(args) -> SearchConfig:
    base = SearchConfig().to_dict()
    for key in ("generations", "population", "p_neighbors", "mutation_rate", "crossover_rate"):
        value = getattr(args, key, None)
        if value is not None:
            base[key] = value
    return SearchConfig.from_dict(base)


def _featurizer_spec_from(args) -> dict:
    if getattr(args, "plugin", None):
        return PluginFeaturizer(
            command=tuple(shlex.split(args.plugin)),
            resolution=getattr(args, "plugin_resolution", 50),
        ).to_dict()
    window = None
    if getattr(args, "window_start", None) is not None and getattr(args, "window_end", None) is not None:
        window = MetricWindow(args.window_start, args.window_end)
    return HandCraftedFeaturizer(mode=getattr(args, "mode", AWARE), window=window).to_dict()


def _controller_from(args) -> Optional[list]:
    if getattr(args, "preset", None):
        return list(preset(args.preset).as_values())
    if getattr(args, "genome", None):
        return [float(v) for v in args.genome.split(",")]
    return None


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hetswarm", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    common = dict(seed="--seed accepts a single value or a comma list, e.g. 0,1,2")

    p_novelty = sub.add_parser("novelty", help="novelty search producing an archive")
    p_random = sub.add_parser("random", help="random-sampling archive baseline")
    for p in (p_novelty, p_random):
        p.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
        p.add_argument("--out", type=Path, required=True)
        _add_sim_flags(p)
        _add_search_flags(p)
        _add_featurizer_flags(p)
    p_random.add_argument("--n", type=int, default=5000)

    p_cluster = sub.add_parser("cluster", help="extract a k-representative taxonomy")
    p_cluster.add_argument("--archive", type=Path, required=True)
    p_cluster.add_argument("--method", choices=["kmedoids", "hierarchical", "spectral"], default="kmedoids")
    p_cluster.add_argument("--k", type=int, default=20)
    p_cluster.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
    p_cluster.add_argument("--sigma", type=float, default=None)
    p_cluster.add_argument("--n-init", type=int, default=4)
    p_cluster.add_argument("--no-verify", action="store_true")
    p_cluster.add_argument("--thumbnails", action="store_true")
    p_cluster.add_argument("--resolution", type=int, default=128)
    p_cluster.add_argument("--out", type=Path, required=True)

    p_hilns = sub.add_parser("hilns", help="scripted human-in-the-loop novelty search")
    p_hilns.add_argument("--respond", default="none", help="all | none | first | @script.json")
    p_chem = sub.add_parser("chemistry", help="scripted human-selected evolution")
    p_chem.add_argument("--select", default="first", help="first | last | @script.json")
    p_chem.add_argument("--steps", type=int, default=50)
    for p in (p_hilns, p_chem):
        p.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
        p.add_argument("--out", type=Path, required=True)
        _add_sim_flags(p)
        _add_search_flags(p)
        _add_featurizer_flags(p)

    p_replay = sub.add_parser("replay", help="re-simulate a controller and export the trajectory")
    p_replay.add_argument("--genome", default=None, help="9 comma-separated values")
    p_replay.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p_replay.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
    p_replay.add_argument("--format", dest="trajectory_format", choices=["csv", "npz", "frames"], default="csv")
    p_replay.add_argument("--stride", type=int, default=1)
    p_replay.add_argument("--out", type=Path, required=True)
    _add_sim_flags(p_replay)

    p_sweep = sub.add_parser("sweep", help="simulate a fixed controller across the ratio grid")
    p_sweep.add_argument("--velocities", required=True, help="8 comma-separated wheel velocities")
    p_sweep.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
    p_sweep.add_argument("--resolution", type=int, default=256)
    p_sweep.add_argument("--trail", type=int, default=100)
    p_sweep.add_argument("--out", type=Path, required=True)
    _add_sim_flags(p_sweep)

    p_render = sub.add_parser("render", help="render a controller's trajectory to PNG")
    p_render.add_argument("--genome", default=None)
    p_render.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p_render.add_argument("--seed", type=_parse_seeds, default=[0], help=common["seed"])
    p_render.add_argument("--mode", choices=[AGNOSTIC, AWARE], default=AWARE)
    p_render.add_argument("--resolution", type=int, default=256)
    p_render.add_argument("--trail", type=int, default=100)
    p_render.add_argument("--out", type=Path, required=True)
    _add_sim_flags(p_render)

    p_run = sub.add_parser("run", help="execute a manifest file")
    p_run.add_argument("--manifest", type=Path, required=True)

    p_serve = sub.add_parser("serve", help="start the HTTP session service")
    p_serve.add_argument("--bind", default="127.0.0.1:8000")
    p_serve.add_argument(
        "--data-dir",
        type=Path,
        default=None,
        help=f"defaults to ${DATA_DIR_ENV} or ./hetswarm-data",
    )
    p_serve.add_argument("--ui", type=Path, default=None, help="static frontend directory to mount")

    return parser


def manifest_from_args(args) -> RunManifest:
    mode = args.command
    base = dict(mode=mode, out_dir=args.out, seeds=args.seed)
    if mode in ("novelty", "random", "hilns", "chemistry"):
        base["sim_config"] = _sim_config_from(args)
        base["search_config"] = _search_config_from(args)
        base["featurizer_spec"] = _featurizer_spec_from(args)
    if mode == "random":
        base["n"] = args.n
    if mode == "cluster":
        base["archive"] = args.archive
        base["cluster_config"] = ClusterConfig(
            method=args.method,
            k=args.k,
            seed=args.seed[0],
            affinity_sigma=args.sigma,
            n_init=args.n_init,
        )
        base["verify_replay"] = not args.no_verify
        base["thumbnails"] = args.thumbnails
        base["resolution"] = args.resolution
    if mode == "hilns":
        base["respond"] = args.respond
    if mode == "chemistry":
        base["select"] = args.select
        base["steps"] = args.steps
    if mode in ("replay", "render"):
        base["sim_config"] = _sim_config_from(args)
        base["genome"] = _controller_from(args)
        if base["genome"] is None:
            raise ManifestError(f"{mode} requires --genome or --preset")
    if mode == "replay":
        base["trajectory_format"] = args.trajectory_format
        base["stride"] = args.stride
    if mode == "render":
        base["featurizer_spec"] = HandCraftedFeaturizer(mode=args.mode).to_dict()
        base["resolution"] = args.resolution
        base["trail"] = args.trail
    if mode == "sweep":
        base["sim_config"] = _sim_config_from(args)
        base["genome"] = [float(v) for v in args.velocities.split(",")]
        base["resolution"] = args.resolution
        base["trail"] = args.trail
    return RunManifest(**base)


def _fail(kind: str, detail: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "detail": detail}) + "\n")
    return 2


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.command == "serve":
        import uvicorn

        from .service import create_app

        data_dir = args.data_dir or Path(os.environ.get(DATA_DIR_ENV, "hetswarm-data"))
        host, _, port = args.bind.rpartition(":")
        app = create_app(data_dir, ui_dir=args.ui)
        uvicorn.run(app, host=host or "127.0.0.1", port=int(port))
        return 0
    try:
        if args.command == "run":
            manifest = RunManifest.from_dict(
                json.loads(Path(args.manifest).read_text(encoding="utf-8")).get("manifest")
                or json.loads(Path(args.manifest).read_text(encoding="utf-8"))
            )
        else:
            manifest = manifest_from_args(args)
        summary = cli_run(manifest)
    except (ManifestError, GenomeError, SearchError) as exc:
        return _fail(type(exc).__name__, str(exc))
    except FileNotFoundError as exc:
        return _fail("FileNotFoundError", str(exc))
    sys.stdout.write(str(summary) + "\n")
    return 0


if __name__ == "__main__":
    sys.exit(main())
