"""On-disk formats: archives, taxonomies, trajectories, event logs.

Archives and taxonomies are line-delimited JSON with a self-describing
header record followed by one record per entry. Floats serialize via
``repr`` (shortest round-trip form), so write -> read -> write is
byte-identical. Trajectories additionally get a columnar CSV and a compact
``.npz`` binary variant.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Optional

import numpy as np

from .genome import Genome
from .search import Archive, ArchiveEntry
from .sim import SimConfig, Trajectory

ARCHIVE_VERSION = 1
TAXONOMY_VERSION = 1


class FormatError(ValueError):
    pass


def _dumps(obj: dict) -> str:
    return json.dumps(obj, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# archives


def save_archive(archive: Archive, path) -> None:
    path = Path(path)
    header = {
        "kind": "archive",
        "version": ARCHIVE_VERSION,
        "dim": archive.dim,
        "entries": len(archive),
        "config": archive.config_snapshot,
    }
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(header) + "\n")
        for e in archive:
            record = {
                "eval_id": e.eval_id,
                "generation": e.generation,
                "seed": e.seed,
                "genome": list(e.genome.as_values()),
                "behavior": [float(v) for v in e.behavior],
            }
            fh.write(_dumps(record) + "\n")


def load_archive(path) -> Archive:
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise FormatError(f"{path}: empty file")
    header = json.loads(lines[0])
    if header.get("kind") != "archive":
        raise FormatError(f"{path}: not an archive file")
    if header.get("version") != ARCHIVE_VERSION:
        raise FormatError(f"{path}: unsupported archive version {header.get('version')}")
    archive = Archive(dim=int(header["dim"]), config_snapshot=header.get("config", {}))
    for line in lines[1:]:
        rec = json.loads(line)
        archive.append(
            ArchiveEntry(
                eval_id=int(rec["eval_id"]),
                generation=int(rec["generation"]),
                seed=int(rec["seed"]),
                genome=Genome.from_values(rec["genome"]),
                behavior=np.asarray(rec["behavior"], dtype=np.float64),
            )
        )
    if header.get("entries") != len(archive):
        raise FormatError(
            f"{path}: header claims {header.get('entries')} entries, found {len(archive)}"
        )
    return archive


# ---------------------------------------------------------------------------
# taxonomies


@dataclass
class TaxonomyRecord:
    cluster_id: int
    size: int
    genome: Genome
    seed: int
    behavior: np.ndarray
    label: Optional[str] = None
    eval_id: Optional[int] = None
    generation: Optional[int] = None


@dataclass
class TaxonomyFile:
    source: str  # "clustering" | "human"
    config: dict
    records: list

    def to_text(self) -> str:
        header = {
            "kind": "taxonomy",
            "version": TAXONOMY_VERSION,
            "source": self.source,
            "k": len(self.records),
            "config": self.config,
        }
        lines = [_dumps(header)]
        for r in self.records:
            lines.append(
                _dumps(
                    {
                        "cluster_id": r.cluster_id,
                        "size": r.size,
                        "genome": list(r.genome.as_values()),
                        "seed": r.seed,
                        "behavior": [float(v) for v in r.behavior],
                        "label": r.label,
                        "eval_id": r.eval_id,
                        "generation": r.generation,
                    }
                )
            )
        return "\n".join(lines) + "\n"

    def save(self, path) -> None:
        Path(path).write_text(self.to_text(), encoding="utf-8", newline="\n")

    @classmethod
    def load(cls, path) -> "TaxonomyFile":
        return cls.from_text(Path(path).read_text(encoding="utf-8"), origin=str(path))

    @classmethod
    def from_text(cls, text: str, origin: str = "<text>") -> "TaxonomyFile":
        path = origin
        lines = text.splitlines()
        if not lines:
            raise FormatError(f"{path}: empty file")
        header = json.loads(lines[0])
        if header.get("kind") != "taxonomy":
            raise FormatError(f"{path}: not a taxonomy file")
        if header.get("version") != TAXONOMY_VERSION:
            raise FormatError(f"{path}: unsupported taxonomy version {header.get('version')}")
        records = []
        for line in lines[1:]:
            rec = json.loads(line)
            records.append(
                TaxonomyRecord(
                    cluster_id=int(rec["cluster_id"]),
                    size=int(rec["size"]),
                    genome=Genome.from_values(rec["genome"]),
                    seed=int(rec["seed"]),
                    behavior=np.asarray(rec["behavior"], dtype=np.float64),
                    label=rec.get("label"),
                    eval_id=rec.get("eval_id"),
                    generation=rec.get("generation"),
                )
            )
        if header.get("k") != len(records):
            raise FormatError(f"{path}: header claims k={header.get('k')}, found {len(records)}")
        return cls(source=header["source"], config=header.get("config", {}), records=records)


def taxonomy_from_candidates(candidates: Iterable, config: dict) -> TaxonomyFile:
    records = [
        TaxonomyRecord(
            cluster_id=c.cluster_id,
            size=c.cluster_size,
            genome=c.representative.genome,
            seed=c.representative.seed,
            behavior=np.asarray(c.representative.behavior, dtype=np.float64),
            label=c.label,
            eval_id=c.representative.eval_id,
            generation=c.representative.generation,
        )
        for c in candidates
    ]
    return TaxonomyFile(source="clustering", config=config, records=records)


# ---------------------------------------------------------------------------
# trajectories

TRAJECTORY_CSV_HEADER = "t,agent_id,type,x,y,theta"


def save_trajectory_csv(traj: Trajectory, path) -> None:
    """One record per (t, agent): t, agent_id, type, x, y, theta."""
    path = Path(path)
    with path.open("w", encoding="utf-8", newline="\n") as fh:
        fh.write(TRAJECTORY_CSV_HEADER + "\n")
        for t in range(traj.horizon):
            for i in range(traj.n_agents):
                x, y, theta = (float(v) for v in traj.poses[t, i])
                fh.write(f"{t},{i},{int(traj.types[i])},{x!r},{y!r},{theta!r}\n")


def load_trajectory_csv(path):
    """Returns (poses, types) parsed back from the columnar text format."""
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != TRAJECTORY_CSV_HEADER:
        raise FormatError(f"{path}: not a trajectory CSV")
    rows = [line.split(",") for line in lines[1:]]
    if not rows:
        raise FormatError(f"{path}: no records")
    horizon = int(rows[-1][0]) + 1
    n_agents = int(rows[-1][1]) + 1
    if len(rows) != horizon * n_agents:
        raise FormatError(f"{path}: expected {horizon * n_agents} records, found {len(rows)}")
    poses = np.empty((horizon, n_agents, 3), dtype=np.float64)
    types = np.zeros(n_agents, dtype=np.uint8)
    for t_s, i_s, type_s, x_s, y_s, theta_s in rows:
        t, i = int(t_s), int(i_s)
        poses[t, i] = (float(x_s), float(y_s), float(theta_s))
        types[i] = int(type_s)
    return poses, types


def save_trajectory_npz(traj: Trajectory, path) -> None:
    np.savez_compressed(
        path,
        poses=traj.poses,
        types=traj.types,
        genome=np.asarray(traj.genome.as_values(), dtype=np.float64),
        seed=np.int64(traj.seed),
        sim_config=json.dumps(traj.config.to_dict()),
    )


def load_trajectory_npz(path) -> Trajectory:
    with np.load(path, allow_pickle=False) as data:
        config = SimConfig.from_dict(json.loads(str(data["sim_config"])))
        return Trajectory(
            poses=np.asarray(data["poses"], dtype=np.float64),
            types=np.asarray(data["types"], dtype=np.uint8),
            genome=Genome.from_values([float(v) for v in data["genome"]]),
            seed=int(data["seed"]),
            config=config,
        )


# ---------------------------------------------------------------------------
# event logs


def append_event(path, event: dict) -> None:
    with Path(path).open("a", encoding="utf-8", newline="\n") as fh:
        fh.write(_dumps(event) + "\n")


def read_events(path) -> list:
    path = Path(path)
    if not path.exists():
        return []
    with path.open("r", encoding="utf-8") as fh:
        return [json.loads(line) for line in fh.read().splitlines() if line]
