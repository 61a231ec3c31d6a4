"""Named controller presets that produce distinctive collective behaviors.

Each value is the 9-slot controller [vA_l0, vA_r0, vA_l1, vA_r1, vB_l0,
vB_r0, vB_l1, vB_r1, eta]. They serve as a qualitative regression corpus
(signature tests assert their characteristic feature profiles) and as handy
CLI presets for replay. Some ratios fall off the sampling grid and replay
in non-strict mode only.
"""
from __future__ import annotations

from .genome import Genome

_RAW = {
    "nested_cycles": [0.0, 0.5, 0.6, -0.1, 0.3, 0.7, 0.6, 0.0, 8 / 24],
    "eye": [0.9, 1.0, 0.7, 0.7, 0.9, -0.7, 1.0, 0.8, 8 / 24],
    "flower": [0.7, 1.0, 0.4, 0.5, -0.9, -0.4, -0.3, 0.6, 12 / 24],
    "spiral": [0.1, 0.5, 0.6, -0.1, 0.3, 0.7, 0.4, -0.4, 8 / 24],
    "nucleus": [0.5, -0.7, 0.9, -0.5, 0.7, 1.0, 1.0, 0.5, 8 / 24],
    "flail": [-0.6, 1.0, 1.0, 0.4, 0.7, -0.6, 0.7, 1.0, 3 / 24],
    "containment": [0.2, 0.7, -0.3, -0.1, 0.1, 0.9, 1.0, 0.8, 4 / 24],
    "dipole": [1.0, -1.0, 0.7, 0.5, 0.9, 0.7, -1.0, -0.2, 12 / 24],
    "snake": [-0.7, 0.7, -0.4, -0.8, 0.8, 0.1, 0.2, 0.5, 1 / 24],
    "hurricane": [-0.1, -0.2, 1.0, -1.0, 0.8, 0.9, 0.9, 1.0, 6 / 24],
    "geometric_warp": [-0.4, -1.0, -0.2, 0.9, -0.6, 0.7, 0.9, 1.0, 3 / 24],
    "perimeter": [-0.9, -0.8, -0.8, -1.0, -0.6, -1.0, 0.9, -0.7, 6 / 24],
    "milling_dispersal": [0.7, 1.0, 0.3, 0.4, 0.2, 0.7, -0.5, -0.1, 12 / 24],
    "aggregation_dispersal": [0.1, 1.0, 0.3, 0.7, 0.2, 0.7, -0.5, -0.1, 12 / 24],
    "cyclic_dispersal": [0.6, 1.0, 0.4, 0.5, 0.2, 0.7, -0.5, -0.1, 12 / 24],
    "segments": [-0.9, 0.6, 0.9, 0.7, -0.4, 0.1, 0.6, 0.2, 12 / 24],
    "site_traversal": [-0.9, 1.0, 1.0, 1.0, 0.1, -0.1, 0.0, 0.0, 12 / 24],
    "mill_following": [1.0, 0.9, 0.9, 0.5, 0.7, 0.5, 1.0, 1.0, 12 / 24],
    "aggregation": [0.4, -0.7, 0.9, -0.5, 0.9, -0.4, 1.0, 0.4, 8 / 24],
    "dispersal": [-0.3, 0.1, -0.4, -0.3, -0.3, 0.0, -0.2, -0.1, 8 / 24],
    "cyclic_pursuit": [-0.7, 0.3, 1.0, 1.0, -0.7, 0.3, 1.0, 1.0, 12 / 24],
    "wall_following": [1.0, -0.1, -0.9, -1.0, 1.0, 0.6, -0.3, 0.9, 1 / 24],
    "milling": [0.7, 1.0, 0.4, 0.5, 0.7, 0.9, 0.4, 0.5, 8 / 24],
}

PRESETS: dict[str, Genome] = {name: Genome.from_values(values) for name, values in _RAW.items()}


def preset(name: str) -> Genome:
    try:
        return PRESETS[name]
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; known: {', '.join(sorted(PRESETS))}") from None
