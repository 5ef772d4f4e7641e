"""Reproducible Brownian paths on dyadic grids.

Randomness is counter-based: a splitmix64-style mixer turns (seed,
replicate, draw index) into 64 uniform bits, so any draw can be
regenerated at random access without storing state.  Normals come from
applying the inverse normal CDF to the mixed uniforms.  Everything
downstream is a pure function of (seed, replicate), independent of
chunking or thread count.

Paths are built by midpoint displacement from the coarsest level down,
and each level consumes a contiguous block of draw indices.  Refining a
path replays the same draws, so values on the coarse grid are preserved
bit-exactly and a refined path equals a directly sampled deep path.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import ndtri

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_MIX_M1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX_M2 = np.uint64(0x94D049BB133111EB)
_U64_MASK = 0xFFFFFFFFFFFFFFFF

# Random initial values draw from this reserved counter position so
# that no path refinement depth can ever collide with it.
XI_DRAW_INDEX = 2**62


def _mix64(z: np.ndarray) -> np.ndarray:
    # splitmix64 finalizer; uint64 arithmetic wraps mod 2**64.
    z = (z ^ (z >> np.uint64(30))) * _MIX_M1
    z = (z ^ (z >> np.uint64(27))) * _MIX_M2
    return z ^ (z >> np.uint64(31))


def _stream_key(seed: int, replicate: int) -> np.uint64:
    out = stream_keys(seed, np.asarray([int(replicate) & _U64_MASK]))
    return np.uint64(out[0])


def stream_keys(seed: int, replicates: np.ndarray) -> np.ndarray:
    """Vectorized per-replicate keys.

    Kept in 1-d uint64 arrays throughout: numpy array arithmetic wraps
    mod 2**64 silently, while scalar (and 0-d-decayed) operations would
    raise RuntimeWarnings on every wrap.
    """
    s = np.asarray([int(seed) & _U64_MASK], dtype=np.uint64)
    m = np.asarray(replicates, dtype=np.uint64)
    a = _mix64(s + _GAMMA)
    b = _mix64(m * _GAMMA + np.uint64(1))
    return _mix64(a ^ b)


def _uniforms_from_keys(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    """(len(keys), count) uniforms in the open interval (0, 1).

    Draw i of stream k is mix64(key_k + (start+i+1) * GAMMA).  The top
    53 bits are centered on the 2**-53 lattice, so 0 and 1 are never
    produced and the inverse CDF below stays finite.
    """
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    bits = _mix64(keys.reshape(-1, 1) + idx.reshape(1, -1) * _GAMMA)
    return ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53


def normals_from_keys(keys: np.ndarray, start: int, count: int) -> np.ndarray:
    return ndtri(_uniforms_from_keys(keys, start, count))


@dataclass
class RandomStream:
    """One reproducible stream identified by (seed, replicate).

    Offers both sequential draws and random access at explicit counter
    positions; the two views agree (normals(k) after construction
    equals normals_at(0, k)).
    """

    seed: int
    replicate: int
    _key: np.ndarray = field(init=False, repr=False)
    _next: int = field(default=0, init=False, repr=False)

    def __post_init__(self):
        self._key = np.asarray(_stream_key(self.seed, self.replicate)).reshape(1)

    def uniforms_at(self, start: int, count: int) -> np.ndarray:
        return _uniforms_from_keys(self._key, start, count)[0]

    def normals_at(self, start: int, count: int) -> np.ndarray:
        return normals_from_keys(self._key, start, count)[0]

    def normals(self, count: int) -> np.ndarray:
        out = self.normals_at(self._next, count)
        self._next += count
        return out


def values_from_draws(draws: np.ndarray, horizon_T: float) -> np.ndarray:
    """Midpoint-displacement construction, batched over rows.

    draws: (R, 2**depth) standard normals laid out coarsest level
    first: index 0 is the terminal draw, level l >= 1 midpoints occupy
    indices 2**(l-1) .. 2**l - 1 left to right.  Returns (R, 2**depth+1)
    path values on the uniform dyadic grid, column 0 identically 0.

    Level l arithmetic only reads draws of levels <= l, which is what
    makes refinement reproduce coarse values bit-exactly.
    """
    draws = np.asarray(draws, dtype=np.float64)
    if draws.ndim != 2:
        raise ValueError("draws must be 2-d (replicates, 2**depth)")
    n = draws.shape[1]
    depth = n.bit_length() - 1
    if n != 2**depth:
        raise ValueError("draw count per row must be a power of two, got %d" % n)
    nrep = draws.shape[0]
    values = np.zeros((nrep, 2), dtype=np.float64)
    values[:, 1] = math.sqrt(horizon_T) * draws[:, 0]
    for level in range(1, depth + 1):
        half = 2 ** (level - 1)
        z = draws[:, half : 2 * half]
        scale = math.sqrt(horizon_T / 2 ** (level + 1))
        mids = 0.5 * (values[:, :-1] + values[:, 1:]) + scale * z
        merged = np.empty((nrep, 2 * half + 1), dtype=np.float64)
        merged[:, 0::2] = values
        merged[:, 1::2] = mids
        values = merged
    return values


@dataclass(frozen=True)
class BrownianPath:
    """A Brownian path tabulated on the dyadic grid of one depth.

    values has 2**depth + 1 entries over [0, horizon_T], values[0] = 0.
    The identifying pair (seed, replicate) plus depth fully determines
    values, so equality of ids means equality of paths.
    """

    seed: int
    replicate: int
    depth: int
    horizon_T: float
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        n = 2**self.depth
        return np.arange(n + 1) * (self.horizon_T / n)

    @property
    def terminal(self) -> float:
        return float(self.values[-1])


def sample_path(
    seed: int, replicate: int, depth: int, horizon_T: float = 1.0
) -> BrownianPath:
    """Build the (seed, replicate) path at the requested depth."""
    if depth < 0:
        raise ValueError("depth must be nonnegative")
    if not horizon_T > 0.0:
        raise ValueError("horizon_T must be positive")
    keys = np.asarray(_stream_key(seed, replicate)).reshape(1)
    draws = normals_from_keys(keys, 0, 2**depth)
    vals = values_from_draws(draws, horizon_T)[0]
    return BrownianPath(
        seed=int(seed),
        replicate=int(replicate),
        depth=int(depth),
        horizon_T=float(horizon_T),
        values=vals,
    )


def refine(path: BrownianPath, depth: int) -> BrownianPath:
    """Return the same path tabulated at a deeper grid.

    Replays the deterministic construction with additional levels; the
    result equals sample_path at the target depth, and restricting it
    to the old grid reproduces path.values bit-exactly.
    """
    if depth < path.depth:
        raise ValueError(
            "target depth %d is shallower than current depth %d" % (depth, path.depth)
        )
    if depth == path.depth:
        return path
    return sample_path(path.seed, path.replicate, depth, path.horizon_T)


def increments(path: BrownianPath, n_steps: int) -> np.ndarray:
    """Brownian increments over the uniform n_steps-grid of [0, T].

    n_steps must be a power of two no larger than 2**depth.  Computed
    by pairwise folding of the finest-grid differences, so the halving
    identity inc_{N/2}[j] == inc_N[2j] + inc_N[2j+1] holds exactly in
    floating point, not just up to rounding.
    """
    k = int(n_steps).bit_length() - 1
    if n_steps <= 0 or 2**k != n_steps:
        raise ValueError("n_steps must be a positive power of two, got %r" % n_steps)
    if k > path.depth:
        raise ValueError(
            "n_steps 2**%d exceeds path resolution 2**%d" % (k, path.depth)
        )
    inc = np.diff(path.values)
    for _ in range(path.depth - k):
        inc = inc[0::2] + inc[1::2]
    return inc


def fold_increments(inc: np.ndarray) -> np.ndarray:
    """One pairwise halving step, batched over the last axis."""
    if inc.shape[-1] % 2 != 0:
        raise ValueError("increment count must be even to fold")
    return inc[..., 0::2] + inc[..., 1::2]


def sup_abs(path: BrownianPath) -> float:
    """Max of |W| over the tabulated grid points.

    This is a grid approximation to the continuous running maximum; it
    only sees the path at resolution 2**-depth * T.    Callers that
    compare against analytic sup-functionals should record the depth.
    """
    return float(np.abs(path.values).max())


def grid_index(path: BrownianPath, t: float) -> int:
    """Index of time t on the path's grid, or raise if t is off-grid."""
    n = 2**path.depth
    j = int(round(t * n / path.horizon_T))
    if not 0 <= j <= n or j * path.horizon_T / n != t:
        raise ValueError("t=%r is not a grid time at depth %d" % (t, path.depth))
    return j


def path_values_batch(
    seed: int,
    first_replicate: int,
    count: int,
    depth: int,
    horizon_T: float,
) -> np.ndarray:
    """(count, 2**depth + 1) path values for consecutive replicates.

    Row r is bit-identical to sample_path(seed, first_replicate + r,
    depth, horizon_T).values; batching is purely a speed matter.
    """
    reps = np.arange(first_replicate, first_replicate + count, dtype=np.uint64)
    keys = stream_keys(seed, reps)
    draws = normals_from_keys(keys, 0, 2**depth)
    return values_from_draws(draws, horizon_T)


def initial_draws_batch(seed: int, first_replicate: int, count: int) -> np.ndarray:
    """Standard normals for random initial values, one per replicate."""
    reps = np.arange(first_replicate, first_replicate + count, dtype=np.uint64)
    keys = stream_keys(seed, reps)
    return normals_from_keys(keys, XI_DRAW_INDEX, 1)[:, 0]
