"""Finite-state homogeneous Markov chain asymptotics.

Communication structure, periods, first-passage statistics, subsequence
limits of matrix powers, and the Cesàro (time-average) limit matrix, for
arbitrary finite row-stochastic kernels including reducible and periodic
ones.  Periods come from graph structure (BFS level coloring per strongly
connected component), so no tolerance is involved; limit matrices come from
fixed-point iteration, which avoids complex arithmetic and treats reducible
chains uniformly.

Convention: ``probs[i, j]`` is the probability of moving from state ``i``
to state ``j``; rows sum to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, DimensionError, DomainError

ROW_SUM_TOL = 1e-12


def _validated_probs(probs, *, name: str) -> np.ndarray:
    arr = np.array(probs, dtype=float)
    if arr.ndim != 2:
        raise DimensionError(f"{name}: expected a 2-D table, got shape {arr.shape}")
    if arr.size == 0:
        raise DimensionError(f"{name}: empty table")
    if np.any(arr < -ROW_SUM_TOL) or np.any(arr > 1.0 + ROW_SUM_TOL):
        raise DomainError(f"{name}: entries must lie in [0, 1]")
    row_sums = arr.sum(axis=1)
    bad = np.flatnonzero(np.abs(row_sums - 1.0) > ROW_SUM_TOL)
    if bad.size:
        raise DomainError(
            f"{name}: row {int(bad[0])} sums to {float(row_sums[bad[0]])!r}, expected 1"
        )
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class TransitionKernel:
    """A conditional probability table over finite input/output index sets."""

    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "probs", _validated_probs(self.probs, name="kernel"))

    @property
    def n_in(self) -> int:
        return self.probs.shape[0]

    @property
    def n_out(self) -> int:
        return self.probs.shape[1]

    @property
    def is_square(self) -> bool:
        return self.n_in == self.n_out

    def require_square(self) -> np.ndarray:
        if not self.is_square:
            raise DimensionError(
                f"operation needs a square kernel, got {self.n_in}x{self.n_out}"
            )
        return self.probs

    def power(self, n: int) -> np.ndarray:
        """n-step transition probabilities (square kernels only)."""
        return np.linalg.matrix_power(self.require_square(), n)


@dataclass(frozen=True)
class Distribution:
    """A probability vector over a finite index set."""

    probs: np.ndarray

    def __post_init__(self):
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"distribution: expected a nonempty vector, got shape {arr.shape}")
        if np.any(arr < -ROW_SUM_TOL):
            raise DomainError("distribution: negative entry")
        if abs(arr.sum() - 1.0) > ROW_SUM_TOL:
            raise DomainError(f"distribution: sums to {float(arr.sum())!r}, expected 1")
        arr.setflags(write=False)
        object.__setattr__(self, "probs", arr)

    def __len__(self) -> int:
        return self.probs.size


@dataclass(frozen=True)
class StateClassification:
    """Communicating classes plus a per-state recurrent/transient verdict."""

    classes: tuple[tuple[int, ...], ...]
    class_recurrent: tuple[bool, ...]
    recurrent: np.ndarray  # bool per state

    def class_of(self, state: int) -> tuple[int, ...]:
        for cls in self.classes:
            if state in cls:
                return cls
        raise DomainError(f"state {state} out of range")


def classify_states(kernel: TransitionKernel) -> StateClassification:
    """Partition states into communicating classes and mark the recurrent ones.

    Classes are the strongly connected components of the positive-probability
    digraph; a class is recurrent iff it is closed (no edge leaves it).
    """
    P = kernel.require_square()
    n = P.shape[0]
    support = P > 0.0
    n_comp, labels = connected_components(csr_matrix(support), directed=True,
                                          connection="strong")
    classes = [tuple(int(s) for s in np.flatnonzero(labels == c)) for c in range(n_comp)]
    classes.sort(key=lambda cls: cls[0])
    class_recurrent = []
    recurrent = np.zeros(n, dtype=bool)
    for cls in classes:
        members = np.asarray(cls)
        outside = np.ones(n, dtype=bool)
        outside[members] = False
        closed = not support[np.ix_(members, np.flatnonzero(outside))].any()
        class_recurrent.append(closed)
        recurrent[members] = closed
    return StateClassification(tuple(classes), tuple(class_recurrent), recurrent)


def _class_period(support: np.ndarray, members: tuple[int, ...]) -> int | None:
    """gcd of cycle lengths within one strongly connected component.

    Returns None when the component contains no cycle at all (a transient
    singleton without a self-loop, i.e. not a return state).
    """
    members_arr = np.asarray(members)
    sub = support[np.ix_(members_arr, members_arr)]
    m = len(members)
    if not sub.any():
        return None
    # BFS level coloring from an arbitrary root; each internal edge (u, v)
    # contributes gcd term level[u] + 1 - level[v].
    level = np.full(m, -1, dtype=int)
    level[0] = 0
    queue = [0]
    g = 0
    while queue:
        u = queue.pop()
        for v in np.flatnonzero(sub[u]):
            if level[v] < 0:
                level[v] = level[u] + 1
                queue.append(v)
            g = math.gcd(g, level[u] + 1 - level[v])
    return g


def state_period(kernel: TransitionKernel, state: int) -> int:
    """Period of a return state: gcd of all return-path lengths."""
    P = kernel.require_square()
    if not 0 <= state < P.shape[0]:
        raise DomainError(f"state {state} out of range")
    cls = classify_states(kernel).class_of(state)
    period = _class_period(P > 0.0, cls)
    if period is None:
        raise DomainError(f"state {state} is not a return state (no return path exists)")
    return period


@dataclass(frozen=True)
class AsymptoticProfile:
    """Subsequence limits of kernel powers and their Cesàro mean.

    ``subsequence_limits[r - 1]`` is the limit of the powers ``n*d + r`` for
    r = 1..d, where d is the lcm of the recurrent-state periods;
    ``cesaro_matrix`` is their arithmetic mean, the time-average limit.
    """

    period_lcm: int
    subsequence_limits: tuple[np.ndarray, ...]
    cesaro_matrix: np.ndarray
    recurrent: np.ndarray
    state_period: dict[int, int]
    residual: float


def asymptotic_profile(kernel: TransitionKernel, tol: float = 1e-10,
                       max_iter: int = 10 ** 6) -> AsymptoticProfile:
    """Compute the d subsequence limit matrices and the Cesàro matrix.

    Each limit is obtained by iterating multiplication with the d-th kernel
    power until successive iterates differ by less than ``tol`` in max-norm.
    Raises ConvergenceError (carrying the last residual) if ``max_iter`` is
    exhausted.
    """
    P = kernel.require_square()
    support = P > 0.0
    cls = classify_states(kernel)
    periods: dict[int, int] = {}
    d = 1
    for members, is_rec in zip(cls.classes, cls.class_recurrent):
        if not is_rec:
            continue
        p = _class_period(support, members)
        # a closed class always contains a cycle
        assert p is not None and p >= 1
        for s in members:
            periods[s] = p
        d = d * p // math.gcd(d, p)

    Pd = np.linalg.matrix_power(P, d)
    limits = []
    worst = 0.0
    for r in range(1, d + 1):
        X = np.linalg.matrix_power(P, r)
        residual = np.inf
        for _ in range(max_iter):
            X_next = X @ Pd
            residual = float(np.max(np.abs(X_next - X)))
            X = X_next
            if residual < tol:
                break
        else:
            raise ConvergenceError(
                f"subsequence limit r={r} did not converge within {max_iter} iterations",
                residual=residual,
            )
        X.setflags(write=False)
        limits.append(X)
        worst = max(worst, residual)

    cesaro = sum(limits) / d
    cesaro.setflags(write=False)
    return AsymptoticProfile(
        period_lcm=d,
        subsequence_limits=tuple(limits),
        cesaro_matrix=cesaro,
        recurrent=cls.recurrent,
        state_period=periods,
        residual=worst,
    )


@dataclass(frozen=True)
class FirstPassageStats:
    """Truncated first-passage aggregates.

    ``hit_prob[i, j]`` is the probability of reaching j from i within
    ``horizon`` steps (a partial sum of the first-visit distribution);
    ``residual[i, j]`` is the mass not yet absorbed, so the exact hitting
    probability lies in ``[hit_prob, hit_prob + residual]``.  ``mean_return[j]``
    is the truncated mean recurrence time for recurrent j and ``inf`` for
    transient j (recurrence decided exactly from the graph, not the numbers).
    """

    hit_prob: np.ndarray
    mean_return: np.ndarray
    residual: np.ndarray
    horizon: int


def first_passage(kernel: TransitionKernel, horizon: int) -> FirstPassageStats:
    """First-visit dynamic programming (taboo recursion) up to ``horizon``."""
    P = kernel.require_square()
    if horizon < 1:
        raise DomainError("horizon must be >= 1")
    n = P.shape[0]
    recurrent = classify_states(kernel).recurrent

    hit = np.zeros((n, n))
    mean_return = np.full(n, np.inf)
    for j in range(n):
        taboo = P.copy()
        taboo[:, j] = 0.0  # forbid passing through j before the first visit
        v = P[:, j].copy()
        hit[:, j] = v
        m_partial = v[j]
        for step in range(2, horizon + 1):
            v = taboo @ v
            hit[:, j] += v
            m_partial += step * v[j]
        if recurrent[j]:
            mean_return[j] = m_partial
    residual = np.clip(1.0 - hit, 0.0, 1.0)
    for arr in (hit, mean_return, residual):
        arr.setflags(write=False)
    return FirstPassageStats(hit, mean_return, residual, horizon)
