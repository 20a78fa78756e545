"""Counter-based Gaussian streams.

Every variate is a pure function of ``(seed, stream, path, step, component)``,
so ensembles can be generated in any batch order or on any number of workers
and still agree bit for bit.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TWO_M53 = 2.0**-53

# stream tags; distinct tags give statistically independent families
WIENER = 0
EXACT = 1
GAMMA = 2
CLOUD = 3
TEST = 4


def _mix(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _as_u64(a) -> np.ndarray:
    return np.atleast_1d(np.asarray(a, dtype=np.int64)).astype(np.uint64)


def keyed_uniforms(seed: int, stream: int, paths, steps, components) -> np.ndarray:
    """Uniforms on (0, 1) of shape ``(len(paths), len(steps), len(components))``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    p = _as_u64(paths)[:, None, None]
    s = _as_u64(steps)[None, :, None]
    c = _as_u64(components)[None, None, :]
    with np.errstate(over="ignore"):
        base = _mix(np.array([seed], dtype=np.uint64) + _GOLDEN * np.uint64(stream + 1))
        h = _mix(base + (p + np.uint64(1)) * _GOLDEN)
        h = _mix(h + (s + np.uint64(1)) * _GOLDEN)
        h = _mix(h + (c + np.uint64(1)) * _GOLDEN)
    return ((h >> np.uint64(11)).astype(np.float64) + 0.5) * _TWO_M53


def keyed_normals(seed: int, stream: int, paths, steps, components) -> np.ndarray:
    """Standard normals keyed like :func:`keyed_uniforms` (inverse-CDF transform)."""
    return ndtri(keyed_uniforms(seed, stream, paths, steps, components))


def normals(seed: int, stream: int, shape: tuple[int, ...], offset: int = 0) -> np.ndarray:
    """Convenience block of normals indexed by a flat counter starting at ``offset``."""
    n = int(np.prod(shape))
    z = keyed_normals(seed, stream, [offset], [0], np.arange(n))
    return z.reshape(shape)
