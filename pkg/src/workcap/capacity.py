"""Work capacity: closed forms, numeric lower bounds, and property checks.

Closed forms cover the three special channel classes (noiseless, memoryless
invariant, unifilar product).  For everything else a derivative-free
optimizer over bounded-memory agent kernels yields an explicitly labeled
lower bound; the true capacity maximizes over all finite agent models and no
general algorithm for it is known, so the numeric value is never presented
as exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import agents, channels, info, loop
from .errors import ChannelClassError, DomainError
from .info import BITS, LN2, _base_factor, _entropy_nats

CLOSED_FORM_NOISELESS = "closed_form_noiseless"
CLOSED_FORM_MEMORYLESS = "closed_form_memoryless"
CLOSED_FORM_UNIFILAR_PRODUCT = "closed_form_unifilar_product"
NUMERIC_LOWER_BOUND = "numeric_lower_bound"


@dataclass(frozen=True)
class CapacityResult:
    """A work-capacity value (nats) plus how it was obtained.

    ``witness`` is an agent model whose work rate attains the value within the
    method's reported tolerance; ``optimizer_trace`` records (restart, value)
    pairs for the numeric method.  ``exact`` distinguishes closed forms from
    the numeric lower bound.
    """

    value_nats: float
    method: str
    witness: agents.AgentModel | None = None
    witness_params: dict | None = None
    optimizer_trace: tuple[tuple[int, float], ...] = ()
    exact: bool = True
    stalled: bool = False

    @property
    def value_bits(self) -> float:
        return self.value_nats / LN2

    def value(self, base: str = BITS) -> float:
        return self.value_nats * _base_factor(base)


def capacity_noiseless(env: channels.EnvironmentModel) -> CapacityResult:
    """Noiseless channels echo actions back, so no work can be extracted."""
    if not channels.is_noiseless(env):
        raise ChannelClassError("capacity_noiseless needs a noiseless environment")
    witness = agents.build_identity(env.alphabet)
    return CapacityResult(0.0, CLOSED_FORM_NOISELESS, witness=witness)


def _memoryless_objective(reduced: np.ndarray, p: np.ndarray) -> float:
    """One-shot work term H(action) - H(induced percept), in nats.

    This is the work rate of the memoryless agent that plays ``p`` every
    round, so its maximum over the simplex is the capacity of a memoryless
    invariant channel.
    """
    q = p @ reduced
    return _entropy_nats(p) - _entropy_nats(q)


def _project_simplex(v: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u * np.arange(1, v.size + 1) > css)[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(v - theta, 0.0)


def _ascend(reduced: np.ndarray, p0: np.ndarray, iters: int = 2000) -> np.ndarray:
    """Projected gradient ascent from one start (backtracking step size)."""
    p = p0.copy()
    lr = 0.5
    value = _memoryless_objective(reduced, p)
    for _ in range(iters):
        with np.errstate(divide="ignore"):
            log_q = np.log(np.maximum(p @ reduced, 1e-300))
            log_p = np.log(np.maximum(p, 1e-300))
        grad = -(log_p + 1.0) + reduced @ (log_q + 1.0)
        cand = _project_simplex(p + lr * grad)
        cand_value = _memoryless_objective(reduced, cand)
        if cand_value > value + 1e-16:
            p, value = cand, cand_value
            lr = min(lr * 1.5, 10.0)
        else:
            lr *= 0.5
            if lr < 1e-13:
                break
    return p


def _refine_binary(reduced: np.ndarray, p_best: float) -> float:
    """Dense grid plus golden-section polish on the 1-D simplex."""
    def f(p0):
        return _memoryless_objective(reduced, np.array([p0, 1.0 - p0]))

    grid = np.linspace(0.0, 1.0, 4097)
    values = [f(g) for g in grid]
    candidates = [p_best, float(grid[int(np.argmax(values))])]
    best = max(candidates, key=f)
    lo, hi = max(0.0, best - 5e-3), min(1.0, best + 5e-3)
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > 1e-13:
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    interior = 0.5 * (a + b)
    return max([interior, 0.0, 1.0, best], key=f)


def stationarity_bisection(reduced: np.ndarray, lo: float, hi: float,
                           tol: float = 1e-14) -> float | None:
    """Independent cross-check for binary alphabets: bisect the first-order
    stationarity condition of H(A) - H(S) on [lo, hi].  Returns None when the
    derivative does not change sign on the bracket."""
    if reduced.shape != (2, 2):
        raise DomainError("stationarity bisection is for binary alphabets")

    def deriv(p0):
        p = np.array([p0, 1.0 - p0])
        q = p @ reduced
        dq = reduced[0] - reduced[1]
        dHq = float(-(dq * (np.log(np.maximum(q, 1e-300)) + 1.0)).sum())
        dHp = float(math.log((1.0 - p0) / p0))
        return dHp - dHq

    f_lo, f_hi = deriv(lo), deriv(hi)
    if f_lo * f_hi > 0:
        return None
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        if deriv(lo) * deriv(mid) <= 0:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def capacity_memoryless(env: channels.EnvironmentModel, tol: float = 1e-9,
                        seed: int = 0, restarts: int = 8) -> CapacityResult:
    """Maximize the one-shot work term over action distributions.

    Multi-start projected ascent on the simplex followed by a dense grid
    refinement (golden-section for binary alphabets).  The witness is the
    memoryless agent playing the argmax distribution, whose work rate equals
    the value by construction.
    """
    reduced = channels.is_memoryless_invariant(env)
    if reduced is None:
        raise ChannelClassError("capacity_memoryless needs a memoryless invariant environment")
    n = reduced.shape[0]
    rng = np.random.default_rng(seed)
    starts = [np.full(n, 1.0 / n)]
    starts += [np.eye(n)[i] * (1 - 1e-6) + 1e-6 / n for i in range(n)]
    starts += [rng.dirichlet(np.ones(n)) for _ in range(restarts)]

    best = max((_ascend(reduced, p0) for p0 in starts),
               key=lambda p: _memoryless_objective(reduced, p))
    stalled = False
    if n == 2:
        p0 = _refine_binary(reduced, float(best[0]))
        best = np.array([p0, 1.0 - p0])
    else:
        res = minimize(lambda x: -_memoryless_objective(reduced, _softmax(x)),
                       np.log(np.maximum(best, 1e-12)), method="Nelder-Mead",
                       options={"fatol": tol * 1e-3, "xatol": 1e-10, "maxiter": 4000})
        cand = _softmax(res.x)
        if _memoryless_objective(reduced, cand) > _memoryless_objective(reduced, best):
            best = cand
        stalled = not res.success

    value = _memoryless_objective(reduced, best)
    witness = agents.build_memoryless(env.alphabet, best)
    return CapacityResult(float(value), CLOSED_FORM_MEMORYLESS, witness=witness,
                          witness_params={"action_distribution": tuple(float(x) for x in best)},
                          stalled=stalled)


def capacity_unifilar_product(env: channels.EnvironmentModel, tol: float = 1e-9,
                              product_horizon: int = channels.DEFAULT_PRODUCT_HORIZON
                              ) -> CapacityResult:
    """log |A| minus the percept entropy rate, attained by the predictive
    extension of the uniform memoryless agent."""
    if channels.is_unifilar(env) is None:
        raise ChannelClassError("capacity_unifilar_product needs a unifilar model")
    if not channels.is_product(env, horizon=product_horizon):
        raise ChannelClassError(
            f"capacity_unifilar_product needs a product channel "
            f"(certificate horizon {product_horizon})"
        )
    h = info.entropy_rate(env, tol=tol, base="nats", product_horizon=product_horizon)
    value = math.log(len(env.alphabet)) - h
    witness = agents.build_predictive(agents.build_uniform(env.alphabet), env)
    return CapacityResult(float(value), CLOSED_FORM_UNIFILAR_PRODUCT, witness=witness)


def _softmax(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max())
    return e / e.sum()


def _softmax_rows(x: np.ndarray) -> np.ndarray:
    e = np.exp(x - x.max(axis=-1, keepdims=True))
    return e / e.sum(axis=-1, keepdims=True)


def _agent_from_params(x: np.ndarray, alphabet: tuple[str, ...],
                       memory: tuple[str, ...]) -> agents.AgentModel:
    n_a, n_m = len(alphabet), len(memory)
    rows = n_a * n_m
    theta = _softmax_rows(x[: rows * rows].reshape(n_a, n_m, rows)).reshape(
        n_a, n_m, n_a, n_m)
    init = _softmax(x[rows * rows:]).reshape(n_a, n_m)
    return agents.AgentModel(alphabet, memory, theta, init)


def _snap_vertices(model: agents.AgentModel, eps: float = 1e-6) -> agents.AgentModel:
    """Round near-deterministic rows to exact 0/1 kernels."""
    theta = model.theta.reshape(model.n_symbols * model.n_memory, -1).copy()
    for row in theta:
        j = int(np.argmax(row))
        if row[j] >= 1.0 - eps:
            row[:] = 0.0
            row[j] = 1.0
    init = model.initial_joint.copy()
    j = int(np.argmax(init))
    if init.flat[j] >= 1.0 - eps:
        init[:] = 0.0
        init.flat[j] = 1.0
    return agents.AgentModel(
        model.alphabet, model.memory_states,
        theta.reshape(model.theta.shape), init)


def _params_from_agent(model: agents.AgentModel, memory_size: int) -> np.ndarray:
    """Logits reproducing ``model``, padded with inert extra memory states.

    Rows of the padded states mirror the original rows (modulo the original
    memory count), and nothing ever transitions into them, so the padded
    agent realizes the same loop behavior.
    """
    n_a, n_m = model.n_symbols, model.n_memory
    if n_m > memory_size:
        raise DomainError("warm start has more memory states than the search space")
    rows = n_a * memory_size
    theta = np.zeros((n_a, memory_size, n_a, memory_size))
    for m in range(memory_size):
        theta[:, m, :, :n_m] = model.theta[:, m % n_m]
    init = np.zeros((n_a, memory_size))
    init[:, :n_m] = model.initial_joint
    flat = np.concatenate([
        theta.reshape(n_a * memory_size, rows).reshape(-1), init.reshape(-1)])
    return np.log(np.maximum(flat, 1e-12))


class _TrackedObjective:
    """Remembers the best point seen across all evaluations of one run."""

    def __init__(self, func):
        self.func = func
        self.best = math.inf
        self.best_x: np.ndarray | None = None
        self.evals = 0

    def __call__(self, x):
        value = self.func(x)
        self.evals += 1
        if value < self.best:
            self.best = value
            self.best_x = np.array(x)
        return value


def _nelder_mead_run(objective, x0: np.ndarray, window: int = 50,
                     min_gain: float = 1e-9, max_iter: int = 4000):
    """One local search; stops when ``window`` iterations improve the best
    objective by less than ``min_gain``."""
    tracked = _TrackedObjective(objective)
    history: list[float] = []

    def stop_when_flat(xk):
        history.append(tracked.best)
        if len(history) > window and history[-window - 1] - history[-1] < min_gain:
            raise StopIteration  # scipy terminates the run cleanly

    res = minimize(tracked, x0, method="Nelder-Mead", callback=stop_when_flat,
                   options={"maxiter": max_iter, "xatol": 1e-10, "fatol": 1e-12})
    x = tracked.best_x if tracked.best_x is not None else res.x
    stalled = len(history) >= max_iter
    return x, tracked.best, stalled


def capacity_lower_bound(env: channels.EnvironmentModel, memory_size: int = 2,
                         restarts: int = 32, seed: int = 0, tol: float = 1e-9,
                         warm_starts: tuple[agents.AgentModel, ...] = ()
                         ) -> CapacityResult:
    """Best work rate over agents with ``memory_size`` memory states.

    Agent kernels are parameterized on the product of simplices through
    normalized exponentials of unconstrained coordinates, searched by
    restarted Nelder-Mead (stopping a run when 50 iterations improve the
    objective by less than 1e-9).  Deterministic rows exist only in the
    parameterization's limit, so a final vertex-snapping pass rounds
    near-deterministic rows and re-evaluates.  The result is a lower bound on
    the work capacity, which maximizes over unbounded memory; passing the
    witness of a smaller search as a warm start makes the bound monotone in
    ``memory_size`` by construction.
    """
    if memory_size < 1:
        raise DomainError("memory_size must be >= 1")
    alphabet = env.alphabet
    memory = tuple(f"m{i}" for i in range(memory_size))
    n_a, n_m = len(alphabet), memory_size
    rows = n_a * n_m
    dim = rows * rows + rows

    def rate_nats(model: agents.AgentModel) -> float:
        try:
            report = loop.work_rate(loop.PerceptActionLoop(model, env),
                                    tol=1e-11, max_iter=200_000, rounds=0,
                                    base="nats")
        except Exception:
            return -math.inf
        return report.rate

    def objective(x: np.ndarray) -> float:
        return -rate_nats(_agent_from_params(x, alphabet, memory))

    rng = np.random.default_rng(seed)
    starts = [np.zeros(dim)]
    starts += [_params_from_agent(w, memory_size) for w in warm_starts]
    starts += [rng.normal(scale=1.5, size=dim) for _ in range(max(restarts - 1, 0))]

    trace: list[tuple[int, float]] = []
    best_x, best_value = starts[0], -math.inf
    stalls = 0
    for restart, x0 in enumerate(starts):
        x, neg_value, stalled = _nelder_mead_run(objective, x0)
        value = -neg_value
        stalls += stalled
        trace.append((restart, float(value)))
        if value > best_value:  # strict: ties keep the lowest restart index
            best_x, best_value = x, value

    model = _agent_from_params(best_x, alphabet, memory)
    snapped = _snap_vertices(model)
    snapped_value = rate_nats(snapped)
    if snapped_value >= best_value - 1e-12:
        model, best_value = snapped, max(best_value, snapped_value)
    return CapacityResult(float(best_value), NUMERIC_LOWER_BOUND, witness=model,
                          optimizer_trace=tuple(trace), exact=False,
                          stalled=bool(stalls))


def compute_capacity(env: channels.EnvironmentModel, tol: float = 1e-9,
                     memory_size: int = 2, restarts: int = 32,
                     seed: int = 0) -> CapacityResult:
    """Dispatch: noiseless > memoryless invariant > unifilar product > numeric."""
    if channels.is_noiseless(env):
        return capacity_noiseless(env)
    if channels.is_memoryless_invariant(env) is not None:
        return capacity_memoryless(env, tol=tol, seed=seed)
    if channels.is_unifilar(env) is not None and channels.is_product(env):
        return capacity_unifilar_product(env, tol=tol)
    return capacity_lower_bound(env, memory_size=memory_size, restarts=restarts,
                                seed=seed, tol=tol)


def check_capacity_bounds(result: CapacityResult,
                          env: channels.EnvironmentModel,
                          slack: float = 1e-9) -> bool:
    """0 <= capacity <= ln |percept alphabet| (nats)."""
    upper = math.log(len(env.alphabet))
    return bool(-slack <= result.value_nats <= upper + slack)


@dataclass(frozen=True)
class SubadditivityReport:
    value_first_nats: float
    value_second_nats: float
    value_cascade_nats: float
    slack: float
    holds: bool


def check_subadditivity(env1: channels.EnvironmentModel,
                        env2: channels.EnvironmentModel,
                        slack: float = 1e-8) -> SubadditivityReport:
    """C(second o first) <= C(first) + C(second) for memoryless invariant
    channels, where all three capacities are closed-form exact."""
    for which, env in (("first", env1), ("second", env2)):
        if channels.is_memoryless_invariant(env) is None:
            raise ChannelClassError(f"{which} channel is not memoryless invariant")
    c1 = capacity_memoryless(env1).value_nats
    c2 = capacity_memoryless(env2).value_nats
    composite = channels.cascade(env1, env2)
    cc = capacity_memoryless(composite).value_nats
    return SubadditivityReport(c1, c2, cc, slack, bool(cc <= c1 + c2 + slack))


@dataclass(frozen=True)
class AgentSetReport:
    """Membership evidence for the three agent classes of one loop."""

    in_mea: bool
    mean_action_entropy_nats: float
    pred_estimate: float
    pred_units: str
    pred_horizon: int
    work_rate: float
    rate_units: str
    is_efficient_vs: bool | None
    reference_capacity_nats: float | None


def classify_agent_sets(env: channels.EnvironmentModel, agent: agents.AgentModel,
                        horizon: int = 4, tol: float = 1e-9,
                        reference_capacity_nats: float | None = None,
                        base: str = BITS) -> AgentSetReport:
    """Bundle the mea test, the truncated predictiveness estimate, the work
    rate, and (optionally) a comparison against a supplied capacity value."""
    pal = loop.PerceptActionLoop(agent, env)
    in_mea, mea_nats = loop.has_max_entropy_actions(pal, tol=tol)
    pred = loop.am_predictiveness(pal, horizon=horizon, base=base)
    report = loop.work_rate(pal, base="nats", rounds=0)
    efficient = None
    if reference_capacity_nats is not None:
        efficient = bool(report.rate >= reference_capacity_nats - tol)
    return AgentSetReport(
        in_mea=in_mea,
        mean_action_entropy_nats=mea_nats,
        pred_estimate=pred.mean,
        pred_units=base,
        pred_horizon=horizon,
        work_rate=report.rate * _base_factor(base),
        rate_units=base,
        is_efficient_vs=efficient,
        reference_capacity_nats=reference_capacity_nats,
    )
