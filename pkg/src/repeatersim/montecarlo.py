"""Trial-level stochastic simulation of the hierarchical generate-and-swap
process, quantifying how the multiplicative mean-time formula compares to
the exact waiting-time distribution.

Reproducibility contract: every trial draws from its own counter-based
substream keyed by ``(seed, trial index)``, so results are bit-identical
for any thread count or chunking and for both compute backends.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import _mc_kernels as kernels
from .protocol import RepeaterParams, chain

BACKEND = kernels.BACKEND

POLICIES = ("serial_redo", "parallel_max")

MAX_LEVEL = 30   # recursion depth guard; expected work grows like prod(1/p_i)


@dataclass(frozen=True)
class TrialConfig:
    seed: int
    n_trials: int
    policy: str = "parallel_max"
    threads: int = 1

    def __post_init__(self):
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.policy not in POLICIES:
            raise ValueError(f"policy must be one of {POLICIES}")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


class SplitMix:
    """Scalar view of one trial substream; used by the single-sample API."""

    def __init__(self, seed: int, trial_index: int = 0):
        self.state = kernels.stream_state(seed, trial_index)

    def uniform(self) -> float:
        self.state, u = kernels.next_uniform(self.state)
        return u

    def geometric(self, q: float) -> int:
        self.state, k = kernels.geometric(self.state, q)
        return k


def click_probability(params: RepeaterParams) -> float:
    """Per-attempt herald probability, dark counts included."""
    q = params.eta_p * params.excitation_prob + params.dark_prob
    if not 0.0 < q <= 1.0:
        raise ValueError(f"click probability {q} outside (0, 1]")
    return q


def sample_generation_time(params: RepeaterParams, rng: SplitMix) -> float:
    """One segment-generation waiting time: geometric attempts times the
    pulse interval."""
    return rng.geometric(click_probability(params)) * params.pulse_time


def _level_probs(params: RepeaterParams, n: int) -> np.ndarray:
    if n > MAX_LEVEL:
        raise ValueError(f"level {n} beyond supported depth {MAX_LEVEL}")
    rows = chain(params.with_(levels=n))
    return np.array([0.0] + [row.success_prob for row in rows[1:]])


def sample_chain_time(params: RepeaterParams, n: int, rng: SplitMix,
                      policy: str = "parallel_max") -> float:
    """One full waiting time for a level-``n`` link.

    Both sub-pairs are regenerated after a failed swap (retrieval is
    destructive, nothing survives to reuse).
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    probs = _level_probs(params, n)
    q = click_probability(params)
    rng.state, t = kernels.chain_sample(n, list(probs), q, params.pulse_time,
                                        policy == "parallel_max", rng.state)
    return t


def _run_chunked(run_chunk, n_trials: int, threads: int, out: np.ndarray):
    if threads == 1:
        run_chunk(0, n_trials, out)
        return
    bounds = np.linspace(0, n_trials, threads + 1, dtype=int)
    with ThreadPoolExecutor(max_workers=threads) as pool:
        futures = [
            pool.submit(run_chunk, int(lo), int(hi - lo), out[lo:hi])
            for lo, hi in zip(bounds[:-1], bounds[1:]) if hi > lo
        ]
        for f in futures:
            f.result()


def generation_times(params: RepeaterParams, cfg: TrialConfig) -> np.ndarray:
    """Sampled segment-generation times, one per trial."""
    q = click_probability(params)
    out = np.empty(cfg.n_trials)

    def run_chunk(start, count, sink):
        kernels.generation_times_bulk(cfg.seed, start, count, q,
                                      params.pulse_time, sink)

    _run_chunked(run_chunk, cfg.n_trials, cfg.threads, out)
    return out


def chain_times(params: RepeaterParams, n: int, cfg: TrialConfig) -> np.ndarray:
    """Sampled level-``n`` waiting times, one per trial."""
    probs = _level_probs(params, n)
    q = click_probability(params)
    parallel = cfg.policy == "parallel_max"
    out = np.empty(cfg.n_trials)

    def run_chunk(start, count, sink):
        kernels.chain_times_bulk(cfg.seed, start, count, n, probs, q,
                                 params.pulse_time, parallel, sink)

    _run_chunked(run_chunk, cfg.n_trials, cfg.threads, out)
    return out


@dataclass(frozen=True)
class McEstimate:
    mean: float
    stddev: float
    ci95: float
    analytic_t_n: float
    vs_analytic_ratio: float
    n_trials: int
    seed: int
    policy: str
    backend: str


def analytic_chain_time(params: RepeaterParams, n: int) -> float:
    """Multiplicative mean-time formula T_n = T_0 prod(1/p_i)."""
    return chain(params.with_(levels=n))[-1].elapsed_time


def estimate(params: RepeaterParams, n: int, cfg: TrialConfig) -> McEstimate:
    """Sampled waiting-time statistics against the analytic chain time."""
    times = chain_times(params, n, cfg)
    mean = float(times.mean())
    stddev = float(times.std(ddof=1)) if cfg.n_trials > 1 else 0.0
    t_n = analytic_chain_time(params, n)
    return McEstimate(
        mean=mean,
        stddev=stddev,
        ci95=1.96 * stddev / math.sqrt(cfg.n_trials),
        analytic_t_n=t_n,
        vs_analytic_ratio=mean / t_n,
        n_trials=cfg.n_trials,
        seed=cfg.seed,
        policy=cfg.policy,
        backend=BACKEND,
    )
