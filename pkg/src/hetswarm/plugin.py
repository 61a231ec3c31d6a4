"""External embedder boundary.

Learned trajectory embedders (CNNs, pretrained vision backbones) live
outside this package, behind a child-process protocol on standard streams:

- every message is a 4-byte big-endian length prefix plus payload;
- on startup the plugin sends a handshake payload, UTF-8 JSON
  ``{"name": str, "mode": "agnostic"|"aware", "dim": int}``;
- each request payload is a 4-byte big-endian JSON-header length, the UTF-8
  JSON header ``{"width": w, "height": h, "channels": c}``, then w*h*c raw
  uint8 pixels (row-major, channel-last);
- each response payload is exactly ``dim`` little-endian float64 values.

The parent closes the plugin's stdin to shut it down. ``plugins/echo_embedder.py``
is a stdlib-only reference implementation used by the tests.
"""
from __future__ import annotations

import json
import select
import struct
import subprocess
import threading
import time
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .features import AGNOSTIC, AWARE, BehaviorVector, MetricWindow
from .render import render_trajectory
from .sim import Trajectory


class PluginError(RuntimeError):
    pass


class PluginTimeoutError(PluginError):
    pass


class PluginProtocolError(PluginError):
    pass


class PluginDimensionError(PluginError):
    pass


class PluginValueError(PluginError):
    pass


def _read_exact(fd: int, n: int, deadline: float) -> bytes:
    chunks = []
    remaining = n
    while remaining > 0:
        timeout = deadline - time.monotonic()
        if timeout <= 0:
            raise PluginTimeoutError(f"plugin read timed out with {remaining} bytes pending")
        ready, _, _ = select.select([fd], [], [], timeout)
        if not ready:
            raise PluginTimeoutError(f"plugin read timed out with {remaining} bytes pending")
        import os

        chunk = os.read(fd, remaining)
        if not chunk:
            raise PluginProtocolError("plugin closed its output stream mid-message")
        chunks.append(chunk)
        remaining -= len(chunk)
    return b"".join(chunks)


def _read_frame(fd: int, timeout: float) -> bytes:
    deadline = time.monotonic() + timeout
    (length,) = struct.unpack(">I", _read_exact(fd, 4, deadline))
    return _read_exact(fd, length, deadline)


class PluginHandle:
    """A running embedder plugin; requests are serialized per handle."""

    def __init__(self, command: Sequence[str], timeout: float = 10.0):
        self.command = list(command)
        self.timeout = timeout
        self._lock = threading.Lock()
        self._proc = subprocess.Popen(
            self.command, stdin=subprocess.PIPE, stdout=subprocess.PIPE
        )
        try:
            handshake = json.loads(_read_frame(self._proc.stdout.fileno(), timeout).decode("utf-8"))
        except PluginError:
            self.close()
            raise
        for key in ("name", "mode", "dim"):
            if key not in handshake:
                self.close()
                raise PluginProtocolError(f"handshake missing {key!r}: {handshake!r}")
        self.name: str = str(handshake["name"])
        self.mode: str = str(handshake["mode"])
        self.dim: int = int(handshake["dim"])
        if self.mode not in (AGNOSTIC, AWARE) or self.dim < 1:
            self.close()
            raise PluginProtocolError(f"bad handshake: {handshake!r}")

    def embed_image(self, image: np.ndarray) -> np.ndarray:
        """Send one image; returns the plugin's declared-dim vector."""
        image = np.ascontiguousarray(image, dtype=np.uint8)
        if image.ndim == 2:
            height, width = image.shape
            channels = 1
        elif image.ndim == 3:
            height, width, channels = image.shape
        else:
            raise ValueError("image must be HxW or HxWxC uint8")
        header = json.dumps({"width": width, "height": height, "channels": channels}).encode("utf-8")
        payload = struct.pack(">I", len(header)) + header + image.tobytes()
        with self._lock:
            if self._proc.poll() is not None:
                raise PluginProtocolError("plugin process has exited")
            try:
                self._proc.stdin.write(struct.pack(">I", len(payload)) + payload)
                self._proc.stdin.flush()
            except BrokenPipeError as exc:
                raise PluginProtocolError("plugin closed its input stream") from exc
            reply = _read_frame(self._proc.stdout.fileno(), self.timeout)
        if len(reply) != 8 * self.dim:
            raise PluginDimensionError(
                f"plugin {self.name!r} declared dim {self.dim} but returned {len(reply) / 8:g} values"
            )
        values = np.frombuffer(reply, dtype="<f8").astype(np.float64)
        if not np.all(np.isfinite(values)):
            raise PluginValueError(f"plugin {self.name!r} returned non-finite values")
        return values

    def close(self) -> None:
        if self._proc.stdin and not self._proc.stdin.closed:
            try:
                self._proc.stdin.close()
            except BrokenPipeError:
                pass
        try:
            self._proc.wait(timeout=2.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()

    def __enter__(self) -> "PluginHandle":
        return self

    def __exit__(self, *exc) -> None:
        self.close()


def embed_external(image: np.ndarray, plugin: PluginHandle) -> BehaviorVector:
    """Embed a rendered trajectory image through an external plugin.

    Agnostic mode embeds the single-channel image. Aware mode embeds the
    channel union plus each type channel separately and concatenates
    [whole | type A | type B], tripling the declared dimension.
    """
    source = f"plugin:{plugin.name}"
    if plugin.mode == AGNOSTIC:
        if image.ndim != 2:
            raise ValueError("agnostic plugin expects a single-channel image")
        return BehaviorVector(values=plugin.embed_image(image), mode=AGNOSTIC, source=source)
    if image.ndim != 3 or image.shape[2] < 2:
        raise ValueError("aware plugin expects a type-colored image")
    union = np.maximum(image[:, :, 0], image[:, :, 1])
    parts = [plugin.embed_image(union), plugin.embed_image(image[:, :, 0]), plugin.embed_image(image[:, :, 1])]
    return BehaviorVector(values=np.concatenate(parts), mode=AWARE, source=source)


@dataclass(frozen=True)
class PluginFeaturizer:
    """Featurizer that renders trajectories and defers to an external embedder."""

    command: tuple
    resolution: int = 50
    trail_steps: int = 100
    timeout: float = 10.0
    _handle: Optional[PluginHandle] = field(default=None, compare=False, repr=False)

    def _ensure_handle(self) -> PluginHandle:
        if self._handle is None:
            object.__setattr__(self, "_handle", PluginHandle(list(self.command), timeout=self.timeout))
        return self._handle

    @property
    def mode(self) -> str:
        return self._ensure_handle().mode

    @property
    def source(self) -> str:
        return f"plugin:{self._ensure_handle().name}"

    @property
    def dim(self) -> int:
        handle = self._ensure_handle()
        return handle.dim if handle.mode == AGNOSTIC else 3 * handle.dim

    def __call__(self, traj: Trajectory) -> BehaviorVector:
        handle = self._ensure_handle()
        image = render_trajectory(traj, handle.mode, self.resolution, self.trail_steps)
        return embed_external(image, handle)

    def close(self) -> None:
        if self._handle is not None:
            self._handle.close()
            object.__setattr__(self, "_handle", None)

    def to_dict(self) -> dict:
        return {
            "kind": "plugin",
            "command": list(self.command),
            "resolution": self.resolution,
            "trail_steps": self.trail_steps,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PluginFeaturizer":
        if d.get("kind") != "plugin":
            raise ValueError(f"not a plugin featurizer spec: {d!r}")
        return cls(
            command=tuple(d["command"]),
            resolution=int(d.get("resolution", 50)),
            trail_steps=int(d.get("trail_steps", 100)),
        )


def featurizer_from_dict(d: dict):
    from .features import HandCraftedFeaturizer

    kind = d.get("kind")
    if kind == "hand_crafted":
        return HandCraftedFeaturizer.from_dict(d)
    if kind == "plugin":
        return PluginFeaturizer.from_dict(d)
    raise ValueError(f"unknown featurizer kind {kind!r}")
