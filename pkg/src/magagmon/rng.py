"""Counter-based Gaussian streams.

Every normal variate is addressed by a global value index and produced by a
fixed function of (seed, index): Philox generates the uint64 at that counter
position and the inverse normal CDF maps it to a variate. Disjoint index
ranges therefore yield bit-identical values no matter how generation is
chunked or parallelized.
"""

from __future__ import annotations

import numpy as np
from scipy.special import ndtri

_INV_2_53 = 2.0 ** -53
_UINTS_PER_BLOCK = 4  # Philox-4x64 emits four uint64 per counter block


def raw_uint64(seed: int, first_index: int, count: int) -> np.ndarray:
    """uint64 stream values at global indices [first_index, first_index + count)."""
    block, offset = divmod(int(first_index), _UINTS_PER_BLOCK)
    bg = np.random.Philox(key=np.uint64(seed), counter=block)
    return bg.random_raw(offset + int(count))[offset:]


def normal_stream(seed: int, first_index: int, count: int) -> np.ndarray:
    """Standard normals at global value indices [first_index, first_index + count)."""
    raw = raw_uint64(seed, first_index, count)
    u = ((raw >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    return ndtri(u)


def path_increments(seed: int, path_offset: int, n_paths: int, n_steps: int,
                    step_std: float) -> np.ndarray:
    """Gaussian step increments for paths [path_offset, path_offset + n_paths).

    Path k (global index) owns value indices [k*n_steps*2, (k+1)*n_steps*2),
    so each path is a pure function of (seed, k).
    """
    first = path_offset * n_steps * 2
    z = normal_stream(seed, first, n_paths * n_steps * 2)
    return (z * step_std).reshape(n_paths, n_steps, 2)


def substream_generator(seed: int, stream: int) -> np.random.Generator:
    """Independent auxiliary generator for stream index `stream` (jitter, restarts)."""
    return np.random.Generator(np.random.Philox(key=np.uint64(seed),
                                                counter=(int(stream) + 1) << 64))
