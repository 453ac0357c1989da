"""Shared fixtures and independent oracles used across test modules."""

from __future__ import annotations

import numpy as np

from chainlab import Sentence, TransitionMatrix, Trajectory
from chainlab.chain_runner import TrajectoryStep
from chainlab.kernels import KernelStep


def labels(m: int) -> tuple[str, ...]:
    return tuple(f"x{i}" for i in range(m))


def random_stochastic(rng: np.random.Generator, m: int, sparsity: float = 0.0) -> np.ndarray:
    """Random row-stochastic matrix; ``sparsity`` is the chance an entry is zeroed."""
    raw = rng.uniform(0.0, 1.0, (m, m))
    if sparsity > 0.0:
        raw = raw * (rng.uniform(size=(m, m)) >= sparsity)
    for i in range(m):
        if raw[i].sum() == 0.0:
            raw[i, rng.integers(m)] = 1.0
    return raw / raw.sum(axis=1, keepdims=True)


def random_positive_stochastic(rng: np.random.Generator, m: int) -> np.ndarray:
    raw = rng.uniform(0.1, 1.0, (m, m))
    return raw / raw.sum(axis=1, keepdims=True)


def random_distribution(rng: np.random.Generator, m: int, strictly_positive: bool = False) -> np.ndarray:
    raw = rng.uniform(0.1, 1.0, m) if strictly_positive else rng.uniform(0.0, 1.0, m)
    if raw.sum() == 0.0:
        raw[0] = 1.0
    return raw / raw.sum()


def sinkhorn_doubly_stochastic(rng: np.random.Generator, m: int, iters: int = 500) -> np.ndarray:
    """Doubly stochastic matrix by alternate row/column balancing."""
    a = rng.uniform(0.1, 1.0, (m, m))
    for _ in range(iters):
        a = a / a.sum(axis=1, keepdims=True)
        a = a / a.sum(axis=0, keepdims=True)
    return a / a.sum(axis=1, keepdims=True)


def reachability_oracle(probs: np.ndarray, threshold: float = 0.0):
    """Brute-force recurrent/transient classification.

    A state is recurrent iff every state reachable from it reaches back.
    Classes are the mutual-reachability equivalence classes of recurrent
    states.  Returns (recurrent classes as sorted index tuples, sorted
    transient indices).
    """
    m = probs.shape[0]
    reach = probs > threshold
    reach = reach | np.eye(m, dtype=bool)
    for _ in range(m):
        reach = reach | (reach @ reach)
    recurrent = [
        i for i in range(m)
        if all((not reach[i, k]) or reach[k, i] for k in range(m))
    ]
    classes = {}
    for i in recurrent:
        key = tuple(sorted(j for j in recurrent if reach[i, j] and reach[j, i]))
        classes[key] = True
    transients = sorted(set(range(m)) - set(recurrent))
    return sorted(classes), transients


def trajectory_from_keys(keys: list[str], deterministic: bool = False,
                         run_id: str = "chain-0000") -> Trajectory:
    """Build a trajectory whose states carry the given canonical keys."""
    seed = Sentence.from_raw(keys[0])
    steps = []
    for t, key in enumerate(keys[1:], start=1):
        sentence = Sentence.from_raw(key)
        steps.append(TrajectoryStep(t=t, sentence=sentence, meta=KernelStep(output=sentence)))
    return Trajectory(
        seed=seed, steps=steps, horizon=len(keys) - 1, run_id=run_id,
        config={"deterministic": deterministic},
    )


def quadratic_tau_oracle(keys: list[str]) -> tuple[int, int | None]:
    """O(T^2) pairwise first-recurrence scan; returns (tau, partner)."""
    horizon = len(keys) - 1
    for t in range(1, len(keys)):
        for j in range(t):
            if keys[t] == keys[j]:
                return t, j
    return horizon + 1, None


def square_matrix(rows, names=None) -> TransitionMatrix:
    rows = np.asarray(rows, dtype=float)
    names = tuple(names) if names is not None else labels(rows.shape[0])
    return TransitionMatrix.square(names, rows)
