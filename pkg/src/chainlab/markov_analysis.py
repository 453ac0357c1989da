"""Finite-state Markov chain machinery over labeled sentence states.

Conventions
-----------
Distributions are row vectors and matrices are row-stochastic, so one
step of the chain is ``x @ P`` and ``P[i, j]`` is the probability of
moving from state ``i`` to state ``j``.  Entropy and KL divergence are
in nats; multiply by :data:`NATS_TO_BITS` for bits.

Matrices carry row labels and column labels.  Within one language the
two coincide (square case); a translation kernel A -> B has row labels
from A and column labels from B, and composing A -> B with B -> A is the
ordinary matrix product.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DataError,
    DimensionError,
    InvalidInputError,
    InvariantViolationError,
    NonConvergenceError,
)

NATS_TO_BITS = 1.0 / math.log(2.0)

ROW_SUM_TOL = 1e-9


def _as_readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic matrix with labeled rows and columns."""

    row_labels: tuple[str, ...]
    col_labels: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _as_readonly(self.probs))
        p = self.probs
        if p.ndim != 2 or p.shape != (len(self.row_labels), len(self.col_labels)):
            raise DimensionError(
                f"matrix shape {p.shape} does not match labels "
                f"({len(self.row_labels)} x {len(self.col_labels)})"
            )
        if not np.all(np.isfinite(p)):
            raise InvalidInputError("transition matrix entries must be finite")
        if np.any(p < 0):
            raise InvalidInputError("transition matrix entries must be non-negative")
        rowsum = p.sum(axis=1)
        if np.any(np.abs(rowsum - 1.0) > ROW_SUM_TOL):
            worst = float(np.max(np.abs(rowsum - 1.0)))
            raise InvalidInputError(f"rows must sum to 1 (worst deviation {worst:.3e})")

    @classmethod
    def square(cls, labels, rows) -> "TransitionMatrix":
        labels = tuple(labels)
        return cls(labels, labels, np.asarray(rows, dtype=float))

    @classmethod
    def rectangular(cls, row_labels, col_labels, rows) -> "TransitionMatrix":
        return cls(tuple(row_labels), tuple(col_labels), np.asarray(rows, dtype=float))

    @property
    def labels(self) -> tuple[str, ...]:
        return self.row_labels

    @property
    def is_square(self) -> bool:
        return self.row_labels == self.col_labels

    def _require_square(self, op: str):
        if not self.is_square:
            raise DimensionError(f"{op} needs a square matrix (row labels == column labels)")


@dataclass(frozen=True)
class Distribution:
    """Probability row vector over labeled states."""

    labels: tuple[str, ...]
    weights: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "labels", tuple(self.labels))
        object.__setattr__(self, "weights", _as_readonly(self.weights))
        w = self.weights
        if w.ndim != 1 or w.size != len(self.labels):
            raise DimensionError(f"weight vector length {w.size} does not match {len(self.labels)} labels")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise InvalidInputError("weights must be finite and non-negative")
        if abs(float(w.sum()) - 1.0) > ROW_SUM_TOL:
            raise InvalidInputError(f"weights must sum to 1 (got {float(w.sum())!r})")

    @classmethod
    def uniform(cls, labels) -> "Distribution":
        labels = tuple(labels)
        m = len(labels)
        return cls(labels, np.full(m, 1.0 / m))

    @classmethod
    def point_mass(cls, labels, index: int) -> "Distribution":
        labels = tuple(labels)
        w = np.zeros(len(labels))
        w[index] = 1.0
        return cls(labels, w)


def compose_matrices(p_ab: TransitionMatrix, p_ba: TransitionMatrix) -> TransitionMatrix:
    """Matrix product of two chained kernels (shared middle state space)."""
    if p_ab.col_labels != p_ba.row_labels:
        raise DimensionError(
            f"cannot compose: first matrix columns {list(p_ab.col_labels)[:4]}... "
            f"do not match second matrix rows {list(p_ba.row_labels)[:4]}..."
        )
    return TransitionMatrix(p_ab.row_labels, p_ba.col_labels, p_ab.probs @ p_ba.probs)


def evolve(x: Distribution, p: TransitionMatrix, n: int) -> Distribution:
    """Distribution after ``n`` applications of ``p`` (``n = 0`` returns ``x``).

    Uses repeated vector-matrix products, never an explicit matrix power.
    """
    if n < 0:
        raise InvalidInputError("step count must be non-negative")
    if x.labels != p.row_labels:
        raise DimensionError("distribution labels do not match matrix row labels")
    if n == 0:
        return x
    if n > 1:
        p._require_square("evolve with n > 1")
    v = np.array(x.weights)
    for _ in range(n):
        v = v @ p.probs
    v = v / v.sum()
    return Distribution(p.col_labels, v)


def entropy(x: Distribution) -> float:
    """Shannon entropy in nats, with 0 * log 0 = 0."""
    w = x.weights[x.weights > 0]
    return float(-(w * np.log(w)).sum())


def binary_entropy(b: float) -> float:
    if b <= 0.0 or b >= 1.0:
        return 0.0
    return float(-b * math.log(b) - (1.0 - b) * math.log(1.0 - b))


def kl_divergence(x: Distribution, y: Distribution) -> float:
    """KL(x || y) in nats; +inf when x puts mass where y has none."""
    if x.labels != y.labels:
        raise DimensionError("KL divergence needs identical label sets")
    mask = x.weights > 0
    if np.any(y.weights[mask] == 0):
        return math.inf
    xs = x.weights[mask]
    ys = y.weights[mask]
    return float((xs * (np.log(xs) - np.log(ys))).sum())


def stationary(p: TransitionMatrix, tol: float = 1e-10, max_iters: int = 10000) -> Distribution:
    """Stationary distribution by power iteration from the uniform start.

    Periodic chains never settle pointwise, so when the iteration fails
    to converge the last detected cycle of iterates is averaged and that
    average is verified instead.  The returned pi always satisfies
    ``max|pi P - pi| < 10 * tol``.
    """
    p._require_square("stationary")
    m = len(p.row_labels)
    x = np.full(m, 1.0 / m)
    window = 64
    history = [x]
    for _ in range(max_iters):
        x_next = x @ p.probs
        x_next = x_next / x_next.sum()
        if float(np.max(np.abs(x_next - x))) < tol:
            residual = float(np.max(np.abs(x_next @ p.probs - x_next)))
            if residual < 10.0 * tol:
                return Distribution(p.row_labels, x_next)
        history.append(x_next)
        if len(history) > window:
            history.pop(0)
        x = x_next

    # Cesaro fallback: average over the best-matching cycle of iterates.
    last = history[-1]
    best_period, best_gap = 1, math.inf
    for period in range(1, len(history)):
        gap = float(np.max(np.abs(last - history[-1 - period])))
        if gap < best_gap - 1e-15:
            best_gap, best_period = gap, period
    avg = np.mean(history[-best_period:], axis=0)
    avg = avg / avg.sum()
    residual = float(np.max(np.abs(avg @ p.probs - avg)))
    if residual < 10.0 * tol:
        return Distribution(p.row_labels, avg)
    raise NonConvergenceError(
        f"power iteration did not converge (residual {residual:.3e} after Cesaro fallback)",
        residual=residual,
    )


def mixture_entropy_bounds(x: Distribution, p: TransitionMatrix, b: float) -> tuple[float, float, float]:
    """Entropy sandwich for the mixture ``b*x + (1-b)*(x P)``.

    Returns ``(lower, H(mixture), upper)`` where ``lower`` is the convex
    combination of the component entropies and ``upper = lower + h(b)``
    with ``h`` the binary entropy.  The sandwich is re-checked
    numerically; a violation indicates an arithmetic bug and raises.
    """
    if not 0.0 <= b <= 1.0:
        raise InvalidInputError("mixture weight must lie in [0, 1]")
    p._require_square("mixture_entropy_bounds")
    xp = evolve(x, p, 1)
    y = Distribution(x.labels, b * x.weights + (1.0 - b) * xp.weights)
    lower = b * entropy(x) + (1.0 - b) * entropy(xp)
    h_y = entropy(y)
    upper = lower + binary_entropy(b)
    if not (lower - 1e-9 <= h_y <= upper + 1e-9):
        raise InvariantViolationError(
            f"mixture entropy {h_y!r} escaped its bounds [{lower!r}, {upper!r}]"
        )
    return lower, h_y, upper


# --- recurrent / transient structure -----------------------------------------


@dataclass(frozen=True)
class BlockDecomposition:
    """Canonical block ordering: closed recurrent classes first, transients last."""

    recurrent_classes: tuple[tuple[str, ...], ...]
    transient_states: tuple[str, ...]
    permutation: tuple[int, ...]
    recurrent_blocks: tuple[np.ndarray, ...]
    entry_blocks: tuple[np.ndarray, ...]
    transient_block: np.ndarray
    permuted: np.ndarray = field(repr=False)

    @property
    def class_count(self) -> int:
        return len(self.recurrent_classes)


def _tarjan_sccs(adjacency: list[list[int]]) -> list[list[int]]:
    """Iterative Tarjan; components come out in reverse topological order."""
    n = len(adjacency)
    index = [-1] * n
    lowlink = [0] * n
    on_stack = [False] * n
    stack: list[int] = []
    counter = 0
    components: list[list[int]] = []

    for root in range(n):
        if index[root] != -1:
            continue
        work = [(root, 0)]
        while work:
            v, ptr = work[-1]
            if ptr == 0:
                index[v] = lowlink[v] = counter
                counter += 1
                stack.append(v)
                on_stack[v] = True
            advanced = False
            for i in range(ptr, len(adjacency[v])):
                w = adjacency[v][i]
                if index[w] == -1:
                    work[-1] = (v, i + 1)
                    work.append((w, 0))
                    advanced = True
                    break
                if on_stack[w]:
                    lowlink[v] = min(lowlink[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[v])
            if lowlink[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack[w] = False
                    comp.append(w)
                    if w == v:
                        break
                components.append(comp)
    return components


def recurrent_classes(p: TransitionMatrix, edge_threshold: float = 0.0) -> BlockDecomposition:
    """Classify states into closed recurrent classes and transients.

    The transition graph keeps an edge ``i -> j`` whenever
    ``P[i, j] > edge_threshold`` (raise the threshold to ignore Monte
    Carlo noise in estimated kernels).  A strongly connected component
    is recurrent iff no kept edge leaves it.
    """
    if edge_threshold < 0:
        raise InvalidInputError("edge threshold must be non-negative")
    p._require_square("recurrent_classes")
    m = len(p.row_labels)
    adjacency = [list(np.flatnonzero(p.probs[i] > edge_threshold)) for i in range(m)]
    sccs = _tarjan_sccs(adjacency)

    comp_of = [0] * m
    for ci, comp in enumerate(sccs):
        for v in comp:
            comp_of[v] = ci
    closed = []
    for ci, comp in enumerate(sccs):
        members = set(comp)
        leaves = any(w not in members for v in comp for w in adjacency[v])
        closed.append(not leaves)

    rec = sorted(
        (sorted(comp) for ci, comp in enumerate(sccs) if closed[ci]),
        key=lambda c: c[0],
    )
    transient = sorted(v for ci, comp in enumerate(sccs) if not closed[ci] for v in comp)

    perm = [v for comp in rec for v in comp] + transient
    pp = p.probs[np.ix_(perm, perm)]
    sizes = [len(c) for c in rec]
    offsets = np.concatenate([[0], np.cumsum(sizes)]).astype(int)
    r_total = int(offsets[-1])
    rec_blocks = tuple(pp[offsets[i]:offsets[i + 1], offsets[i]:offsets[i + 1]] for i in range(len(rec)))
    entry_blocks = tuple(pp[r_total:, offsets[i]:offsets[i + 1]] for i in range(len(rec)))
    transient_block = pp[r_total:, r_total:]

    labels = p.row_labels
    return BlockDecomposition(
        recurrent_classes=tuple(tuple(labels[v] for v in comp) for comp in rec),
        transient_states=tuple(labels[v] for v in transient),
        permutation=tuple(perm),
        recurrent_blocks=rec_blocks,
        entry_blocks=entry_blocks,
        transient_block=transient_block,
        permuted=pp,
    )


def estimate_kernel(samples, labels) -> tuple[TransitionMatrix, tuple[str, ...]]:
    """Row-normalized transition counts from ``(state, next_state)`` pairs.

    Rows that were never observed become identity rows and their labels
    are returned as the second element.
    """
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    m = len(labels)
    counts = np.zeros((m, m))
    for a, b in samples:
        if a not in index or b not in index:
            unknown = a if a not in index else b
            raise DataError(f"observed label {unknown!r} is not in the state space")
        counts[index[a], index[b]] += 1.0
    rows = np.zeros((m, m))
    flagged = []
    for i in range(m):
        total = counts[i].sum()
        if total > 0:
            rows[i] = counts[i] / total
        else:
            rows[i, i] = 1.0
            flagged.append(labels[i])
    return TransitionMatrix.square(labels, rows), tuple(flagged)


# --- interchange formats ------------------------------------------------------


def matrix_to_json(p: TransitionMatrix) -> str:
    payload = {"labels": list(p.row_labels), "rows": p.probs.tolist()}
    if not p.is_square:
        payload["col_labels"] = list(p.col_labels)
    return json.dumps(payload, sort_keys=True)


def matrix_from_json(text: str) -> TransitionMatrix:
    data = json.loads(text)
    row_labels = tuple(data["labels"])
    col_labels = tuple(data.get("col_labels", row_labels))
    return TransitionMatrix(row_labels, col_labels, np.asarray(data["rows"], dtype=float))


def distribution_to_json(x: Distribution) -> str:
    return json.dumps({"labels": list(x.labels), "weights": x.weights.tolist()}, sort_keys=True)


def distribution_from_json(text: str) -> Distribution:
    data = json.loads(text)
    return Distribution(tuple(data["labels"]), np.asarray(data["weights"], dtype=float))


def matrix_to_csv(p: TransitionMatrix, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["state", *p.col_labels])
        for label, row in zip(p.row_labels, p.probs):
            writer.writerow([label, *[repr(float(v)) for v in row]])
