"""HTTP session service: HIL protocols, replay streaming, archive access.

Sessions are persisted as append-only event logs under the data directory;
restarting the service restores every session by replay, so the process
holds no authoritative state. Mutating endpoints carry the client's view of
the session generation and get a 409 when it is stale, which serializes
concurrent humans per session. Replay frames stream over server-sent
events at a client-chosen stride. All responses carry ``version``; clients
must ignore unknown fields.
"""
from __future__ import annotations

import json
import threading
import time
import uuid
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from fastapi import FastAPI, HTTPException, Query, Request
from fastapi.responses import PlainTextResponse, Response, StreamingResponse

from .features import HandCraftedFeaturizer
from .fileio import append_event, read_events
from .genome import Genome, GenomeError
from .hil import (
    AWAITING_HUMAN,
    CHEMISTRY,
    HILNS,
    ChemistrySelection,
    ProtocolError,
    create_session,
    export_taxonomy,
    restore_session,
)
from .plugin import featurizer_from_dict
from .render import image_to_png_bytes, render_trajectory
from .search import SearchConfig
from .sim import SimConfig, Trajectory, simulate

API_VERSION = 1


def stream_replay(genome: Genome, seed: int, sim_config: SimConfig, stride: int = 1):
    """Re-simulate and yield (t, poses, types) frames at the given stride.

    The initial frame is always first and the final frame always last;
    frame content is identical to the stored trajectory for these inputs.
    """
    if stride < 1:
        raise ValueError("stride must be >= 1")
    traj = simulate(genome, sim_config, seed)
    return trajectory_frames(traj, stride)


def trajectory_frames(traj: Trajectory, stride: int = 1):
    if stride < 1:
        raise ValueError("stride must be >= 1")
    types = [int(t) for t in traj.types]
    steps = list(range(0, traj.horizon, stride))
    if steps[-1] != traj.horizon - 1:
        steps.append(traj.horizon - 1)
    for t in steps:
        yield {
            "t": t,
            "poses": [[float(v) for v in pose] for pose in traj.poses[t]],
            "types": types,
        }


class SessionStore:
    """Event-log-backed session registry; one writer lock per session."""

    def __init__(self, data_dir: Path):
        self.data_dir = Path(data_dir)
        self.sessions_dir = self.data_dir / "sessions"
        self.sessions_dir.mkdir(parents=True, exist_ok=True)
        self._sessions: dict = {}
        self._locks: dict = {}
        self._persisted: dict = {}
        self._restore_all()

    def _log_path(self, session_id: str) -> Path:
        return self.sessions_dir / session_id / "events.jsonl"

    def _restore_all(self) -> None:
        for log in sorted(self.sessions_dir.glob("*/events.jsonl")):
            events = [{k: v for k, v in e.items() if k != "ts"} for e in read_events(log)]
            if not events:
                continue
            session = restore_session(events)
            self._sessions[session.session_id] = session
            self._locks[session.session_id] = threading.Lock()
            self._persisted[session.session_id] = len(session.events)

    def _persist_new_events(self, session) -> None:
        done = self._persisted.get(session.session_id, 0)
        path = self._log_path(session.session_id)
        path.parent.mkdir(parents=True, exist_ok=True)
        for event in session.events[done:]:
            append_event(path, {"ts": time.strftime("%Y-%m-%dT%H:%M:%SZ", time.gmtime()), **event})
        self._persisted[session.session_id] = len(session.events)

    def create(self, protocol: str, seed: int, **kwargs) -> str:
        session_id = f"{protocol}-{uuid.uuid4().hex[:12]}"
        session = create_session(protocol, seed, session_id, **kwargs)
        self._sessions[session_id] = session
        self._locks[session_id] = threading.Lock()
        self._persist_new_events(session)
        return session_id

    def get(self, session_id: str):
        try:
            return self._sessions[session_id]
        except KeyError:
            raise HTTPException(status_code=404, detail=f"unknown session {session_id}")

    def ids(self) -> list:
        return sorted(self._sessions)

    def mutate(self, session_id: str, expected_generation: int, action) -> None:
        session = self.get(session_id)
        with self._locks[session_id]:
            if session.generation != expected_generation:
                raise HTTPException(
                    status_code=409,
                    detail=f"stale generation {expected_generation}, session is at {session.generation}",
                )
            try:
                action(session)
            except ProtocolError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            self._persist_new_events(session)

    def label(self, session_id: str, saved_index: int, label: str) -> None:
        session = self.get(session_id)
        with self._locks[session_id]:
            try:
                session.label_saved(saved_index, label)
            except ProtocolError as exc:
                raise HTTPException(status_code=422, detail=str(exc))
            self._persist_new_events(session)


def _genome_json(genome: Genome) -> list:
    return [float(v) for v in genome.as_values()]


def _session_json(session) -> dict:
    out = {
        "session_id": session.session_id,
        "protocol": session.protocol,
        "seed": session.seed,
        "status": session.status,
        "generation": session.generation,
        "saved": [
            {
                "index": i,
                "genome": _genome_json(s.genome),
                "seed": s.seed,
                "generation": s.generation,
                "novelty": s.novelty,
                "label": s.label,
            }
            for i, s in enumerate(session.saved)
        ],
    }
    if session.protocol == HILNS:
        out["generations_total"] = session.search_config.generations
    else:
        out["generations_total"] = session.max_generations
    return out


@lru_cache(maxsize=256)
def _thumbnail_png(genome_values: tuple, seed: int, sim_json: str, resolution: int) -> bytes:
    config = SimConfig.from_dict(json.loads(sim_json))
    traj = simulate(Genome.from_values(list(genome_values)), config, seed)
    return image_to_png_bytes(render_trajectory(traj, "aware", resolution))


def _provenance_of(session, kind: str, index: int):
    """(genome, seed) provenance of a displayed card or saved behavior."""
    if kind == "query":
        records = session.pending_queries()
    elif kind == "grid":
        records = session.pending_grid()
    elif kind == "saved":
        records = session.saved
    else:
        raise HTTPException(status_code=404, detail=f"unknown thumbnail kind {kind!r}")
    if not (0 <= index < len(records)):
        raise HTTPException(status_code=404, detail=f"no {kind} entry {index}")
    record = records[index]
    return record.genome, record.seed


def _sse(payload: dict, event: Optional[str] = None) -> str:
    head = f"event: {event}\n" if event else ""
    return head + f"data: {json.dumps(payload, separators=(',', ':'))}\n\n"


def create_app(data_dir: Path, ui_dir: Optional[Path] = None) -> FastAPI:
    app = FastAPI(title="hetswarm session service", version=str(API_VERSION))
    store = SessionStore(Path(data_dir))
    app.state.store = store

    @app.exception_handler(ProtocolError)
    async def protocol_error(request: Request, exc: ProtocolError):
        raise HTTPException(status_code=422, detail=str(exc))

    def envelope(**fields) -> dict:
        return {"version": API_VERSION, **fields}

    @app.post("/api/sessions", status_code=201)
    async def create_session_endpoint(body: dict):
        protocol = body.get("protocol")
        if protocol not in (HILNS, CHEMISTRY):
            raise HTTPException(status_code=422, detail=f"protocol must be {HILNS!r} or {CHEMISTRY!r}")
        seed = int(body.get("seed", 0))
        kwargs = {}
        if "search_config" in body:
            kwargs["search_config"] = SearchConfig.from_dict(body["search_config"])
        if "sim_config" in body:
            kwargs["sim_config"] = SimConfig.from_dict(body["sim_config"])
        if "featurizer" in body:
            kwargs["featurizer"] = featurizer_from_dict(body["featurizer"])
        if protocol == CHEMISTRY:
            if "max_generations" in body:
                kwargs["max_generations"] = int(body["max_generations"])
            if "mutate_offspring" in body:
                kwargs["mutate_offspring"] = bool(body["mutate_offspring"])
        try:
            session_id = store.create(protocol, seed, **kwargs)
        except (ProtocolError, GenomeError, ValueError) as exc:
            raise HTTPException(status_code=422, detail=str(exc))
        return envelope(session=_session_json(store.get(session_id)))

    @app.get("/api/sessions")
    async def list_sessions():
        return envelope(sessions=[_session_json(store.get(i)) for i in store.ids()])

    @app.get("/api/sessions/{session_id}")
    async def get_session(session_id: str):
        return envelope(session=_session_json(store.get(session_id)))

    @app.get("/api/sessions/{session_id}/queries")
    async def get_queries(session_id: str):
        session = store.get(session_id)
        if session.protocol != HILNS:
            raise HTTPException(status_code=422, detail="queries exist only for hilns sessions")
        queries = session.pending_queries()
        return envelope(
            generation=session.generation,
            status=session.status,
            queries=[
                {
                    "slot": q.slot,
                    "eval_id": q.eval_id,
                    "novelty": q.novelty,
                    "genome": _genome_json(q.genome),
                    "seed": q.seed,
                    "thumbnail_url": f"/api/sessions/{session_id}/thumbnail/query/{q.slot}.png",
                }
                for q in queries
            ],
        )

    @app.get("/api/sessions/{session_id}/grid")
    async def get_grid(session_id: str):
        session = store.get(session_id)
        if session.protocol != CHEMISTRY:
            raise HTTPException(status_code=422, detail="grids exist only for chemistry sessions")
        cells = session.pending_grid()
        return envelope(
            generation=session.generation,
            status=session.status,
            cells=[
                {
                    "slot": c.slot,
                    "genome": _genome_json(c.genome),
                    "seed": c.seed,
                    "provenance": c.provenance,
                    "thumbnail_url": f"/api/sessions/{session_id}/thumbnail/grid/{c.slot}.png",
                }
                for c in cells
            ],
        )

    @app.post("/api/sessions/{session_id}/respond")
    async def respond(session_id: str, body: dict):
        store.mutate(
            session_id,
            int(body.get("generation", -1)),
            lambda session: session.respond(body.get("saved", [])),
        )
        return envelope(session=_session_json(store.get(session_id)))

    @app.post("/api/sessions/{session_id}/select")
    async def select(session_id: str, body: dict):
        selection = ChemistrySelection(
            selected=tuple(body.get("selected", ())),
            saved_this_round=tuple(body.get("saved", ())),
        )
        store.mutate(
            session_id,
            int(body.get("generation", -1)),
            lambda session: session.advance(selection),
        )
        return envelope(session=_session_json(store.get(session_id)))

    @app.post("/api/sessions/{session_id}/label")
    async def label(session_id: str, body: dict):
        if "saved_index" not in body or "label" not in body:
            raise HTTPException(status_code=422, detail="label requires saved_index and label")
        store.label(session_id, int(body["saved_index"]), str(body["label"]))
        return envelope(session=_session_json(store.get(session_id)))

    @app.get("/api/sessions/{session_id}/taxonomy", response_class=PlainTextResponse)
    async def taxonomy(session_id: str):
        session = store.get(session_id)
        return PlainTextResponse(export_taxonomy(session).to_text(), media_type="application/x-ndjson")

    @app.get("/api/sessions/{session_id}/thumbnail/{kind}/{index}.png")
    async def thumbnail(session_id: str, kind: str, index: int, resolution: int = Query(128, ge=16, le=512)):
        session = store.get(session_id)
        genome, seed = _provenance_of(session, kind, index)
        png = _thumbnail_png(
            tuple(genome.as_values()), seed, json.dumps(session.sim_config.to_dict()), resolution
        )
        return Response(content=png, media_type="image/png")

    @app.get("/api/sessions/{session_id}/replay/{kind}/{index}")
    async def session_replay(session_id: str, kind: str, index: int, stride: int = Query(1, ge=1)):
        session = store.get(session_id)
        genome, seed = _provenance_of(session, kind, index)
        frames = stream_replay(genome, seed, session.sim_config, stride)

        def generate():
            count = 0
            for frame in frames:
                count += 1
                yield _sse(frame, event="frame")
            yield _sse({"frames": count}, event="done")

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/replay")
    async def replay(
        genome: str,
        seed: int = 0,
        stride: int = Query(1, ge=1),
        horizon: Optional[int] = Query(None, ge=1),
    ):
        try:
            values = [float(v) for v in genome.split(",")]
            g = Genome.from_values(values)
        except (ValueError, GenomeError) as exc:
            raise HTTPException(status_code=422, detail=f"bad genome: {exc}")
        config = SimConfig() if horizon is None else SimConfig(horizon=horizon)
        frames = stream_replay(g, seed, config, stride)

        def generate():
            count = 0
            for frame in frames:
                count += 1
                yield _sse(frame, event="frame")
            yield _sse({"frames": count}, event="done")

        return StreamingResponse(generate(), media_type="text/event-stream")

    @app.get("/api/archives")
    async def list_archives():
        archive_dir = store.data_dir / "archives"
        names = sorted(p.name for p in archive_dir.glob("*.jsonl")) if archive_dir.exists() else []
        return envelope(archives=names)

    @app.get("/api/archives/{name}", response_class=PlainTextResponse)
    async def download_archive(name: str):
        path = store.data_dir / "archives" / name
        if "/" in name or not path.exists():
            raise HTTPException(status_code=404, detail=f"unknown archive {name}")
        return PlainTextResponse(path.read_text(encoding="utf-8"), media_type="application/x-ndjson")

    if ui_dir is not None and Path(ui_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
