"""Monte Carlo engine for the walk.

Each trajectory owns a xoshiro256** generator seeded from a 128-bit stream
seed, itself derived from (master_seed, trajectory index) with
numpy's SeedSequence.  The walk only needs the running count of +1 steps,
so a trajectory costs O(1) memory unless the step record is requested.

The kernel advances a block of trajectories together, one n at a time,
which keeps the per-n parameters in registers.  Results never depend on
block size or thread count because every trajectory draws from its own
stream.
"""

from __future__ import annotations

import csv
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from numba import njit, uint64

from . import families as fam

__all__ = [
    "WalkState",
    "Trajectory",
    "EnsembleStats",
    "step_probability",
    "step_arrays",
    "derive_stream_seed",
    "simulate_trajectory",
    "simulate_ensemble",
    "read_binary",
    "BINARY_MAGIC",
]

BINARY_MAGIC = b"GERWENS1"
BLOCK = 64


@dataclass(frozen=True)
class WalkState:
    n: int
    plus_count: int

    def __post_init__(self):
        if self.n < 0 or not 0 <= self.plus_count <= self.n:
            raise ValueError("need n >= 0 and 0 <= plus_count <= n")

    @property
    def S(self) -> int:
        return 2 * self.plus_count - self.n


def step_probability(state: WalkState, alpha_n: float, eps_n: float) -> float:
    """P(X_{n+1} = 1 | past) = alpha_n * plus_count / n + (1 - alpha_n)(1 + eps_n)/2."""
    if state.n < 1:
        raise ValueError("the first step is drawn with probability q, not from the memory rule")
    return alpha_n * (state.plus_count / state.n) + (1.0 - alpha_n) * (1.0 + eps_n) / 2.0


def step_arrays(alpha, eps, N: int):
    """coef[n] = alpha_n / n and base[n] = (1 - alpha_n)(1 + eps_n)/2, index n = 1..N-1."""
    # slot n drives step n + 1, which uses alpha_n and eps_n (array index n - 1)
    av = fam.alpha_values(alpha, N).values
    ev = fam.eps_values(eps, N).values
    coef = np.full(N, np.nan)  # slot 0 unused: the first step uses q
    base = np.full(N, np.nan)
    n = np.arange(1, N, dtype=float)
    coef[1:] = av[:-1] / n
    base[1:] = (1.0 - av[:-1]) * (1.0 + ev[:-1]) / 2.0
    return coef, base


def derive_stream_seed(master_seed: int, index: int) -> int:
    """128-bit stream seed for trajectory ``index``."""
    lo, hi = np.random.SeedSequence(entropy=int(master_seed), spawn_key=(int(index),)).generate_state(2, np.uint64)
    return int(lo) | (int(hi) << 64)


def _generator_state(stream_seed: int) -> np.ndarray:
    st = np.random.SeedSequence(entropy=int(stream_seed)).generate_state(4, np.uint64)
    if not st.any():  # the all-zero state is a fixed point of xoshiro
        st[0] = 1
    return st


@njit(inline="always")
def _rotl(x, k):
    return (x << uint64(k)) | (x >> uint64(64 - k))


@njit(nogil=True, cache=True)
def _run_block(coef, base, q, cps, state, out, steps):
    """Advance B trajectories to n = len(coef); fill out[b, j] = S at cps[j].

    ``steps`` is either (B, N) int8 to record every step or a (0, 0) dummy.
    """
    B = state.shape[1]
    N = coef.shape[0]
    record = steps.shape[0] > 0
    s0 = state[0].copy()
    s1 = state[1].copy()
    s2 = state[2].copy()
    s3 = state[3].copy()
    plus = np.zeros(B, np.int64)
    scale = 1.0 / 9007199254740992.0
    ci = 0
    for n in range(N):
        # step n + 1
        c = coef[n] if n > 0 else 0.0
        bb = base[n] if n > 0 else q
        for b in range(B):
            x0 = s0[b]
            x1 = s1[b]
            x2 = s2[b]
            x3 = s3[b]
            r = _rotl(x1 * uint64(5), 7) * uint64(9)
            t = x1 << uint64(17)
            x2 ^= x0
            x3 ^= x1
            x1 ^= x2
            x0 ^= x3
            x2 ^= t
            x3 = _rotl(x3, 45)
            s0[b] = x0
            s1[b] = x1
            s2[b] = x2
            s3[b] = x3
            u = (r >> uint64(11)) * scale
            if u < c * plus[b] + bb:
                plus[b] += 1
                if record:
                    steps[b, n] = 1
            elif record:
                steps[b, n] = -1
        if ci < cps.shape[0] and cps[ci] == n + 1:
            for b in range(B):
                out[b, ci] = 2 * plus[b] - (n + 1)
            ci += 1


def _check_checkpoints(checkpoints, N):
    cps = np.asarray(checkpoints, dtype=np.int64)
    if cps.ndim != 1 or cps.size == 0:
        raise ValueError("checkpoint list must be non-empty")
    if np.any(np.diff(cps) <= 0) or cps[0] < 1 or cps[-1] > N:
        raise ValueError("checkpoints must be strictly increasing within [1, N]")
    return cps


def _check_q(q):
    if not 0.0 <= q <= 1.0:
        raise ValueError(f"q must lie in [0, 1], got {q}")


@dataclass(frozen=True)
class Trajectory:
    stream_seed: int
    checkpoints: np.ndarray
    values: np.ndarray  # S_n at the checkpoints, int64
    steps: Optional[np.ndarray] = field(default=None, repr=False)  # X_1..X_N as int8

    def path(self) -> np.ndarray:
        """S_1..S_N from the step record."""
        if self.steps is None:
            raise ValueError("trajectory was simulated without a step record")
        return np.cumsum(self.steps, dtype=np.int64)


def simulate_trajectory(alpha, eps, q: float, N: int, checkpoints: Sequence[int], stream_seed: int,
                        record_steps: bool = False, arrays=None) -> Trajectory:
    """One trajectory; ``arrays`` may pass precomputed step_arrays(alpha, eps, N)."""
    _check_q(q)
    cps = _check_checkpoints(checkpoints, N)
    coef, base = arrays if arrays is not None else step_arrays(alpha, eps, N)
    state = _generator_state(stream_seed).reshape(4, 1)
    out = np.zeros((1, cps.size), np.int64)
    steps = np.zeros((1, N), np.int8) if record_steps else np.zeros((0, 0), np.int8)
    _run_block(coef[:N], base[:N], float(q), cps, state, out, steps)
    return Trajectory(stream_seed=stream_seed, checkpoints=cps, values=out[0], steps=steps[0] if record_steps else None)


@dataclass(frozen=True)
class EnsembleStats:
    m: int
    master_seed: int
    checkpoints: np.ndarray
    samples: np.ndarray = field(repr=False)  # (m, len(checkpoints)) int64, row = trajectory index
    mean: np.ndarray = field(repr=False)
    variance: np.ndarray = field(repr=False)

    def at(self, n: int) -> np.ndarray:
        """Raw S_n over all trajectories."""
        j = np.flatnonzero(self.checkpoints == n)
        if j.size == 0:
            raise KeyError(f"{n} is not a checkpoint")
        return self.samples[:, j[0]]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["trajectory_id", "n", "S"])
            for i in range(self.m):
                for j, n in enumerate(self.checkpoints):
                    wr.writerow([i, int(n), int(self.samples[i, j])])

    def to_binary(self, path) -> None:
        """Little-endian: magic, uint64 m, uint64 c, c int64 checkpoints, m*c int64 row-major."""
        with open(path, "wb") as fh:
            fh.write(BINARY_MAGIC)
            fh.write(struct.pack("<QQ", self.m, self.checkpoints.size))
            fh.write(self.checkpoints.astype("<i8").tobytes())
            fh.write(np.ascontiguousarray(self.samples, dtype="<i8").tobytes())


def read_binary(path):
    """(checkpoints, samples) from a file written by EnsembleStats.to_binary."""
    with open(path, "rb") as fh:
        if fh.read(8) != BINARY_MAGIC:
            raise ValueError("not an ensemble block")
        m, c = struct.unpack("<QQ", fh.read(16))
        cps = np.frombuffer(fh.read(8 * c), dtype="<i8").astype(np.int64)
        samples = np.frombuffer(fh.read(8 * m * c), dtype="<i8").astype(np.int64).reshape(m, c)
    return cps, samples


def _stats(cps, samples, m, master_seed):
    x = samples.astype(float)
    mean = x.mean(axis=0)
    var = x.var(axis=0, ddof=1) if m > 1 else np.zeros(cps.size)
    return EnsembleStats(m=m, master_seed=master_seed, checkpoints=cps, samples=samples, mean=mean, variance=var)


def simulate_ensemble(alpha, eps, q: float, N: int, checkpoints: Sequence[int], m: int, master_seed: int,
                      thread_budget: int = 1) -> EnsembleStats:
    """m independent trajectories; row i is identical to simulate_trajectory with derive_stream_seed(master_seed, i)."""
    _check_q(q)
    if m < 1:
        raise ValueError("m must be >= 1")
    if thread_budget < 1:
        raise ValueError("thread_budget must be >= 1")
    cps = _check_checkpoints(checkpoints, N)
    coef, base = step_arrays(alpha, eps, N)
    samples = np.zeros((m, cps.size), np.int64)
    dummy = np.zeros((0, 0), np.int8)

    def work(start):
        stop = min(start + BLOCK, m)
        state = np.stack([_generator_state(derive_stream_seed(master_seed, i)) for i in range(start, stop)], axis=1)
        out = np.zeros((stop - start, cps.size), np.int64)
        _run_block(coef, base, float(q), cps, state, out, dummy)
        samples[start:stop] = out

    starts = range(0, m, BLOCK)
    if thread_budget == 1:
        for s in starts:
            work(s)
    else:
        with ThreadPoolExecutor(max_workers=thread_budget) as pool:
            for fut in [pool.submit(work, s) for s in starts]:
                fut.result()
    return _stats(cps, samples, m, master_seed)
