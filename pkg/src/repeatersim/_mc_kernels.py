"""Trial-sampling kernels for the timing Monte Carlo.

Hot loops are compiled with numba when available; setting the environment
variable ``REPEATERSIM_NO_NUMBA`` (to any non-empty value) forces the pure
NumPy/Python fallback.  Both paths consume the same counter-based random
stream (splitmix64 keyed by ``(seed, trial index)``), so results are
bit-identical across backends, thread counts, and chunkings.
"""

from __future__ import annotations

import math
import os

import numpy as np

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
_INV_2_53 = 1.0 / 9007199254740992.0


# ---------------------------------------------------------------------------
# scalar reference implementation (plain Python integers, exact wrapping)


def mix64(z: int) -> int:
    z &= _MASK
    z = ((z ^ (z >> 30)) * _MIX1) & _MASK
    z = ((z ^ (z >> 27)) * _MIX2) & _MASK
    return z ^ (z >> 31)


def stream_state(seed: int, index: int) -> int:
    """Initial splitmix64 state of trial ``index`` under ``seed``."""
    return mix64((seed + _GOLDEN * (index + 1)) & _MASK)


def next_uniform(state: int):
    """Advance the stream; returns ``(state, u)`` with u in (0, 1)."""
    state = (state + _GOLDEN) & _MASK
    z = mix64(state)
    return state, ((z >> 11) + 0.5) * _INV_2_53


def geometric(state: int, q: float):
    """Attempts-to-first-success count; one uniform consumed either way."""
    state, u = next_uniform(state)
    if q >= 1.0:
        return state, 1
    return state, 1 + int(math.floor(math.log(u) / math.log1p(-q)))


def chain_sample(n: int, p_levels, q: float, t_delta: float, parallel: bool,
                 state: int):
    """One hierarchical generate-and-swap trial; returns (state, seconds).

    Iterative form of the recursion: a level-l attempt consumes two fresh
    level-(l-1) pairs, costs their max (parallel) or sum (serial), and
    succeeds with probability p_levels[l]; failure regenerates both pairs.
    """
    if n == 0:
        state, k = geometric(state, q)
        return state, k * t_delta
    tot = [0.0] * (n + 1)
    first = [0.0] * (n + 1)
    phase = [0] * (n + 1)
    lvl = n
    while True:
        if lvl - 1 == 0:
            state, k = geometric(state, q)
            child = k * t_delta
            have = True
        else:
            lvl -= 1
            tot[lvl] = 0.0
            phase[lvl] = 0
            continue
        while have:
            if phase[lvl] == 0:
                first[lvl] = child
                phase[lvl] = 1
                have = False
            else:
                attempt = max(first[lvl], child) if parallel else first[lvl] + child
                tot[lvl] += attempt
                phase[lvl] = 0
                state, u = next_uniform(state)
                if u < p_levels[lvl]:
                    if lvl == n:
                        return state, tot[n]
                    child = tot[lvl]
                    lvl += 1
                    have = True
                else:
                    have = False


# ---------------------------------------------------------------------------
# fallback bulk drivers


def _generation_times_numpy(seed: int, start: int, count: int, q: float,
                            t_delta: float, out: np.ndarray):
    """Vectorized one-draw-per-trial geometric sampler."""
    idx = np.arange(start, start + count, dtype=np.uint64)
    golden = np.uint64(_GOLDEN)
    z = np.uint64(seed) + golden * (idx + np.uint64(1))
    for step in range(2):   # stream-init mix, then one stream advance
        z = (z ^ (z >> np.uint64(30))) * np.uint64(_MIX1)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(_MIX2)
        z = z ^ (z >> np.uint64(31))
        if step == 0:
            z = z + golden
    u = ((z >> np.uint64(11)).astype(np.float64) + 0.5) * _INV_2_53
    if q >= 1.0:
        out[:] = t_delta
    else:
        out[:] = (1.0 + np.floor(np.log(u) / math.log1p(-q))) * t_delta


def _chain_times_python(seed: int, start: int, count: int, n: int, p_levels,
                        q: float, t_delta: float, parallel: bool, out: np.ndarray):
    levels = list(p_levels)
    for k in range(count):
        state = stream_state(seed, start + k)
        _, t = chain_sample(n, levels, q, t_delta, parallel, state)
        out[k] = t


BACKEND = "numpy"

if not os.environ.get("REPEATERSIM_NO_NUMBA"):
    try:
        import numba as _nb

        _U = np.uint64

        @_nb.njit(cache=True, nogil=True)
        def _nb_mix(z):
            z = (z ^ (z >> _U(30))) * _U(_MIX1)
            z = (z ^ (z >> _U(27))) * _U(_MIX2)
            return z ^ (z >> _U(31))

        @_nb.njit(cache=True, nogil=True)
        def _nb_next(state):
            state = state + _U(_GOLDEN)
            z = _nb_mix(state)
            return state, (np.float64(z >> _U(11)) + 0.5) * _INV_2_53

        @_nb.njit(cache=True, nogil=True)
        def _nb_geometric(state, q):
            state, u = _nb_next(state)
            if q >= 1.0:
                return state, 1
            return state, 1 + int(math.floor(math.log(u) / math.log1p(-q)))

        @_nb.njit(cache=True, nogil=True)
        def _nb_chain_sample(n, p_levels, q, t_delta, parallel, state):
            if n == 0:
                state, k = _nb_geometric(state, q)
                return state, k * t_delta
            tot = np.zeros(n + 1)
            first = np.zeros(n + 1)
            phase = np.zeros(n + 1, dtype=np.int64)
            lvl = n
            while True:
                if lvl - 1 == 0:
                    state, k = _nb_geometric(state, q)
                    child = k * t_delta
                    have = True
                else:
                    lvl -= 1
                    tot[lvl] = 0.0
                    phase[lvl] = 0
                    continue
                while have:
                    if phase[lvl] == 0:
                        first[lvl] = child
                        phase[lvl] = 1
                        have = False
                    else:
                        attempt = max(first[lvl], child) if parallel else first[lvl] + child
                        tot[lvl] += attempt
                        phase[lvl] = 0
                        state, u = _nb_next(state)
                        if u < p_levels[lvl]:
                            if lvl == n:
                                return state, tot[n]
                            child = tot[lvl]
                            lvl += 1
                            have = True
                        else:
                            have = False

        @_nb.njit(cache=True, nogil=True)
        def _nb_generation_times(seed, start, count, q, t_delta, out):
            for k in range(count):
                # keep the index arithmetic in uint64 end to end
                state = _nb_mix(seed + _U(_GOLDEN) * (_U(start + k) + _U(1)))
                _, kk = _nb_geometric(state, q)
                out[k] = kk * t_delta

        @_nb.njit(cache=True, nogil=True)
        def _nb_chain_times(seed, start, count, n, p_levels, q, t_delta, parallel, out):
            for k in range(count):
                state = _nb_mix(seed + _U(_GOLDEN) * (_U(start + k) + _U(1)))
                _, t = _nb_chain_sample(n, p_levels, q, t_delta, parallel, state)
                out[k] = t

        def generation_times_bulk(seed, start, count, q, t_delta, out):
            _nb_generation_times(np.uint64(seed), int(start), count, q,
                                 t_delta, out)

        def chain_times_bulk(seed, start, count, n, p_levels, q, t_delta, parallel, out):
            _nb_chain_times(np.uint64(seed), int(start), count, n,
                            np.asarray(p_levels, dtype=np.float64), q, t_delta,
                            parallel, out)

        BACKEND = "numba"
    except ImportError:
        pass

if BACKEND == "numpy":
    def generation_times_bulk(seed, start, count, q, t_delta, out):
        _generation_times_numpy(seed, start, count, q, t_delta, out)

    def chain_times_bulk(seed, start, count, n, p_levels, q, t_delta, parallel, out):
        _chain_times_python(seed, start, count, n, p_levels, q, t_delta, parallel, out)
