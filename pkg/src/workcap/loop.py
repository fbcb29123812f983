"""Percept-action loops: the global Markov chain and its analysis.

Composing an agent model with an environment model yields a homogeneous
Markov chain over tuples (memory, action, percept, hidden state).  This
module builds that chain, computes exact finite-horizon trajectory joint
tables, per-round work terms and the asymptotic work rate, and the
predictiveness scores that decide membership in the predictive agent class.

Index convention throughout: a range subscript l:m includes l and excludes m,
so the action block relevant at round t is A_0..A_t and the percept past is
S_0..S_{t-1}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .channels import AgentModel, EnvironmentModel
from .errors import BudgetError, DimensionError
from .info import (BITS, JointTable, _base_factor, _clamp_nonneg,
                   _entropy_nats, conditional_mutual_information)
from .markov import Distribution, TransitionKernel, asymptotic_profile

TRAJECTORY_BUDGET = 10 ** 7


@dataclass(frozen=True)
class PerceptActionLoop:
    """An agent model paired with an alphabet-compatible environment model."""

    agent: AgentModel
    env: EnvironmentModel

    def __post_init__(self):
        if self.agent.alphabet != self.env.alphabet:
            raise DimensionError(
                f"agent alphabet {self.agent.alphabet} does not match "
                f"environment alphabet {self.env.alphabet}"
            )

    @property
    def shape(self) -> tuple[int, int, int, int]:
        n = len(self.env.alphabet)
        return (self.agent.n_memory, n, n, self.env.n_hidden)


@dataclass(frozen=True)
class GlobalChain:
    """The homogeneous chain over u = (memory, action, percept, hidden state).

    States are indexed row-major in that order.  Rows whose percept cannot be
    emitted from the (action, hidden state) pair carry a uniform placeholder
    and are flagged infeasible; such states are never entered, and asymptotic
    analysis is restricted to ``reachable`` (the closure of the initial
    support).
    """

    shape: tuple[int, int, int, int]
    kernel: TransitionKernel
    initial: Distribution
    feasible: np.ndarray
    reachable: np.ndarray

    @property
    def n_states(self) -> int:
        return int(np.prod(self.shape))

    def state_label(self, index: int) -> tuple[int, int, int, int]:
        return tuple(np.unravel_index(index, self.shape))  # type: ignore[return-value]


def build_global_chain(loop: PerceptActionLoop) -> GlobalChain:
    """Assemble the one-step kernel and the round-0 distribution.

    With e(s | a, z) the emission marginal, the transition probability from
    (m, a, s, z) to (m2, a2, s2, z2) factors as

        e(s2 | a2, z2) * theta(a2, m2 | s, m) * phi(s, z2 | a, z) / e(s | a, z)

    and the round-0 distribution is agent_init(a, m) * env_init(z) * e(s|a, z).
    """
    theta = loop.agent.theta
    phi = loop.env.phi
    n_m, n_a, n_s, n_z = loop.shape
    emission = phi.sum(axis=3)  # [a, z, s]
    den = emission.transpose(0, 2, 1)  # [a, s, z]
    feasible4 = den > 0.0
    den_safe = np.where(feasible4, den, 1.0)

    # X[a, z, s, z2] = phi / den; Y[s, m, a2, m2] = theta; E[a2, z2, s2] = emission
    X = phi / den_safe.transpose(0, 2, 1)[:, :, :, None]
    K8 = np.einsum("azsw,smbn,bwt->masznbtw", X, theta, emission)

    n = n_m * n_a * n_s * n_z
    K = K8.reshape(n, n)
    feasible = np.broadcast_to(feasible4[None, :, :, :], loop.shape).reshape(n)
    K[~feasible] = 1.0 / n  # uniform placeholder; never entered

    init4 = np.einsum("am,z,azs->masz", loop.agent.initial_joint,
                      loop.env.initial, emission)
    init = init4.reshape(n)

    reachable = init > 0.0
    support = K > 0.0
    while True:
        new = reachable | (reachable.astype(float) @ support > 0.0)
        if np.array_equal(new, reachable):
            break
        reachable = new

    return GlobalChain(loop.shape, TransitionKernel(K), Distribution(init),
                       feasible, reachable)


@dataclass(frozen=True)
class TrajectoryDistribution:
    """Exact joint over M_0, A_0, S_0, Z_0, ..., M_{T-1}, A_{T-1}, S_{T-1}, Z_{T-1}."""

    horizon: int
    joint: JointTable


def _axis_placed(x: np.ndarray, axes: tuple[int, ...], ndim: int) -> np.ndarray:
    """View of x broadcast into an ndim-dimensional tensor at ``axes``."""
    order = np.argsort(axes)
    xt = np.transpose(x, order)
    shape = [1] * ndim
    for pos, size in zip(sorted(axes), xt.shape):
        shape[pos] = size
    return xt.reshape(shape)


def trajectory_distribution(loop: PerceptActionLoop, horizon: int,
                            budget: int = TRAJECTORY_BUDGET) -> TrajectoryDistribution:
    """Exact product-form joint table for ``horizon`` rounds."""
    if horizon < 1:
        raise DimensionError("horizon must be >= 1")
    n_m, n_a, n_s, n_z = loop.shape
    per_round = n_m * n_a * n_s * n_z
    required = per_round ** horizon
    if required > budget:
        raise BudgetError(
            f"trajectory table would need {required} entries (budget {budget})",
            required=required, budget=budget,
        )

    T = horizon
    dims = (n_m, n_a, n_s, n_z) * T
    ndim = 4 * T

    def pos(var: str, t: int) -> int:
        return 4 * t + {"M": 0, "A": 1, "S": 2, "Z": 3}[var]

    emission = loop.env.phi.sum(axis=3)
    factors = [
        (loop.agent.initial_joint, (pos("A", 0), pos("M", 0))),
        (loop.env.initial, (pos("Z", 0),)),
        (emission, (pos("A", T - 1), pos("Z", T - 1), pos("S", T - 1))),
    ]
    for t in range(T - 1):
        factors.append((loop.agent.theta,
                        (pos("S", t), pos("M", t), pos("A", t + 1), pos("M", t + 1))))
        factors.append((loop.env.phi,
                        (pos("A", t), pos("Z", t), pos("S", t), pos("Z", t + 1))))

    table = np.ones(dims)
    for x, axes in factors:
        table *= _axis_placed(x, axes, ndim)

    names = tuple(f"{v}{t}" for t in range(T) for v in ("M", "A", "S", "Z"))
    return TrajectoryDistribution(T, JointTable(names, table))


# ---------------------------------------------------------------------------
# Work rate and entropy functionals of the asymptotic profile
# ---------------------------------------------------------------------------

def _cond_entropy_of_state(p4: np.ndarray, keep_axis: int) -> float:
    """H(X | M) in nats from p(m, a, s, z), X the variable on ``keep_axis``."""
    axes = tuple(ax for ax in (1, 2, 3) if ax != keep_axis)
    pm_x = p4.sum(axis=axes)  # [m, x]
    pm = pm_x.sum(axis=1)
    return _entropy_nats(pm_x) - _entropy_nats(pm)


def _work_term_nats(p4: np.ndarray) -> float:
    return _cond_entropy_of_state(p4, 1) - _cond_entropy_of_state(p4, 2)


@dataclass(frozen=True)
class WorkReport:
    """Per-round work terms and the asymptotic rate.

    Values are in units of k_B T ln 2 when ``units`` is "bits".  ``residual``
    is the worst max-norm gap between the final subsequence-limit iterates.
    """

    per_round: tuple[float, ...]
    rate: float
    period_used: int
    residual: float
    units: str


class _ReachableAsymptotics:
    """Cesàro averaging of entropy functionals over the reachable subchain."""

    def __init__(self, chain: GlobalChain, tol: float, max_iter: int):
        self.chain = chain
        reach = np.flatnonzero(chain.reachable)
        self.reach = reach
        sub = chain.kernel.probs[np.ix_(reach, reach)]
        self.profile = asymptotic_profile(TransitionKernel(sub), tol, max_iter)
        self.init_sub = chain.initial.probs[reach]

    def limit_state_tables(self) -> list[np.ndarray]:
        """Full-shape p(m, a, s, z) under each subsequence limit."""
        tables = []
        full = np.zeros(self.chain.n_states)
        for limit in self.profile.subsequence_limits:
            p_sub = self.init_sub @ limit
            full[:] = 0.0
            full[self.reach] = p_sub
            tables.append(full.reshape(self.chain.shape).copy())
        return tables

    def cesaro_mean(self, functional) -> float:
        values = [functional(p4) for p4 in self.limit_state_tables()]
        return float(sum(values) / len(values))


def work_rate(loop: PerceptActionLoop, tol: float = 1e-10, max_iter: int = 10 ** 6,
              rounds: int = 8, base: str = BITS) -> WorkReport:
    """Asymptotic expected work per round, H(A_t|M_t) - H(S_t|M_t) averaged.

    The rate is the exact Cesàro limit obtained from the subsequence limits
    of the reachable global subchain; ``per_round`` lists the first ``rounds``
    finite-t work terms from propagating the initial distribution.
    """
    factor = _base_factor(base)
    chain = build_global_chain(loop)
    per_round = []
    p = chain.initial.probs.copy()
    for _ in range(rounds):
        per_round.append(_work_term_nats(p.reshape(chain.shape)) * factor)
        p = p @ chain.kernel.probs
    asym = _ReachableAsymptotics(chain, tol, max_iter)
    rate = asym.cesaro_mean(_work_term_nats) * factor
    return WorkReport(tuple(per_round), rate, asym.profile.period_lcm,
                      asym.profile.residual, base)


def mean_action_entropy(loop: PerceptActionLoop, tol: float = 1e-10,
                        max_iter: int = 10 ** 6, base: str = BITS) -> float:
    """Exact Cesàro limit of H(A_t | M_t)."""
    chain = build_global_chain(loop)
    asym = _ReachableAsymptotics(chain, tol, max_iter)
    value = asym.cesaro_mean(lambda p4: _cond_entropy_of_state(p4, 1))
    return _clamp_nonneg(value, "mean action entropy") * _base_factor(base)


def has_max_entropy_actions(loop: PerceptActionLoop, tol: float = 1e-9,
                            iter_tol: float = 1e-12,
                            max_iter: int = 10 ** 6) -> tuple[bool, float]:
    """Whether the Cesàro limit of H(A_t|M_t) attains log |A| within ``tol``.

    Returns (verdict, estimate) with the estimate in nats.  The limit is
    computed exactly from the asymptotic profile, not by truncation.
    """
    value = mean_action_entropy(loop, tol=iter_tol, max_iter=max_iter, base="nats")
    target = math.log(len(loop.env.alphabet))
    return bool(abs(value - target) <= tol), value


# ---------------------------------------------------------------------------
# Predictiveness
# ---------------------------------------------------------------------------

def _past_vars(t: int) -> list[str]:
    # A_{0:t+1} = A_0..A_t together with S_{0:t} = S_0..S_{t-1}
    return [f"A{i}" for i in range(t + 1)] + [f"S{i}" for i in range(t)]


def predictiveness_score(loop: PerceptActionLoop, t: int,
                         budget: int = TRAJECTORY_BUDGET, base: str = BITS) -> float:
    """Exact I[A_0..A_t, S_0..S_{t-1}; S_t | M_t]; zero iff the memory is a
    sufficient statistic of the past for the current percept."""
    if t < 0:
        raise DimensionError("round index must be >= 0")
    traj = trajectory_distribution(loop, t + 1, budget=budget)
    keep = set(_past_vars(t)) | {f"S{t}", f"M{t}"}
    joint = traj.joint.marginal(keep)
    return conditional_mutual_information(
        joint, _past_vars(t), (f"S{t}",), (f"M{t}",), base=base)


@dataclass(frozen=True)
class PredictivenessEstimate:
    """Truncated Cesàro mean of per-round predictiveness scores.

    This is an estimator of the asymptotic mean, not the exact limit; the
    horizon, the last per-round score, and a settledness verdict (last score
    below the requested tolerance) are carried so callers cannot mistake the
    truncation for the limit.
    """

    mean: float
    horizon: int
    last_score: float
    settled: bool
    units: str

    def __float__(self) -> float:
        return self.mean


def am_predictiveness(loop: PerceptActionLoop, horizon: int, tol: float = 1e-9,
                      budget: int = TRAJECTORY_BUDGET,
                      base: str = BITS) -> PredictivenessEstimate:
    """Arithmetic mean of predictiveness scores over rounds t < horizon."""
    if horizon < 1:
        raise DimensionError("horizon must be >= 1")
    scores = [predictiveness_score(loop, t, budget=budget, base=base)
              for t in range(horizon)]
    return PredictivenessEstimate(float(np.mean(scores)), horizon, scores[-1],
                                  bool(scores[-1] <= tol), base)


def future_predictiveness(loop: PerceptActionLoop, t: int, future_len: int,
                          budget: int = TRAJECTORY_BUDGET, base: str = BITS) -> float:
    """Truncated I[A_0..A_t, S_0..S_{t-1}; S_t..S_{t+k-1} | M_t] with k =
    ``future_len``; nondecreasing in k by the chain rule."""
    if t < 0 or future_len < 1:
        raise DimensionError("need t >= 0 and future_len >= 1")
    traj = trajectory_distribution(loop, t + future_len, budget=budget)
    future = [f"S{i}" for i in range(t, t + future_len)]
    keep = set(_past_vars(t)) | set(future) | {f"M{t}"}
    joint = traj.joint.marginal(keep)
    return conditional_mutual_information(
        joint, _past_vars(t), future, (f"M{t}",), base=base)
