"""Counter-based per-path random streams.

Each path owns a Philox stream keyed by (path index | domain << 56, master
seed), so a path's noise does not depend on how paths are batched or on the
number of workers.
"""

from __future__ import annotations

import numpy as np

STEP_DOMAIN = 0
BRIDGE_DOMAIN = 1
_PATH_MASK = (1 << 56) - 1


def path_key(seed: int, path: int, domain: int = STEP_DOMAIN) -> np.ndarray:
    if not 0 <= path <= _PATH_MASK:
        raise ValueError("path index out of range")
    return np.array([path | (domain << 56), seed & 0xFFFFFFFFFFFFFFFF], dtype=np.uint64)


def path_generator(seed: int, path: int, domain: int = STEP_DOMAIN) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=path_key(seed, path, domain)))


def stream_id(seed: int, path: int, domain: int = STEP_DOMAIN) -> str:
    k = path_key(seed, path, domain)
    return f"philox:{int(k[0]):016x}:{int(k[1]):016x}"


def step_normals(seed: int, paths: range | np.ndarray, steps: int, d: int) -> np.ndarray:
    """Standard normals of shape (len(paths), steps, d), one stream per path."""
    out = np.empty((len(paths), steps, d))
    for i, p in enumerate(paths):
        out[i] = path_generator(seed, int(p), STEP_DOMAIN).standard_normal((steps, d))
    return out


def bridge_normals(seed: int, paths: range | np.ndarray, steps: int, substeps: int, d: int) -> np.ndarray:
    """Micro-step normals of shape (len(paths), steps, substeps, d) from the bridge streams."""
    out = np.empty((len(paths), steps, substeps, d))
    for i, p in enumerate(paths):
        out[i] = path_generator(seed, int(p), BRIDGE_DOMAIN).standard_normal((steps, substeps, d))
    return out
