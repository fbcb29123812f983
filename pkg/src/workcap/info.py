"""Discrete information measures over exact joint tables.

Entropy, conditional entropy, (conditional) mutual information, interaction
information, and the entropy rate of product-channel sources.  All internal
arithmetic is in nats; the ``base`` argument ("bits" or "nats") only converts
the returned value.  Zero-probability outcomes are skipped in every sum
(0 log 0 = 0).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np
from scipy.special import xlogy

from . import channels
from .errors import (ChannelClassError, ConvergenceError, DimensionError,
                     DomainError, InternalConsistencyError)
from .markov import TransitionKernel, asymptotic_profile

BITS = "bits"
NATS = "nats"
LN2 = math.log(2.0)

JOINT_SUM_TOL = 1e-10
_CLAMP_RAISE = 1e-9


def _base_factor(base: str) -> float:
    if base == BITS:
        return 1.0 / LN2
    if base == NATS:
        return 1.0
    raise DomainError(f"base must be {BITS!r} or {NATS!r}, got {base!r}")


def _names(vars) -> tuple[str, ...]:
    if isinstance(vars, str):
        return (vars,)
    return tuple(vars)


def _entropy_nats(p: np.ndarray) -> float:
    return float(-xlogy(p, p).sum())


def _clamp_nonneg(value: float, what: str) -> float:
    """Snap rounding-level negatives to zero; larger negatives are bugs."""
    if value >= 0.0:
        return value
    if value > -_CLAMP_RAISE:
        return 0.0
    raise InternalConsistencyError(f"{what} = {value!r} is negative beyond rounding")


@dataclass(frozen=True)
class JointTable:
    """An exact joint distribution over named finite variables."""

    variables: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        variables = _names(self.variables)
        if len(set(variables)) != len(variables):
            raise DimensionError("duplicate variable names")
        arr = np.array(self.probs, dtype=float)
        if arr.ndim != len(variables):
            raise DimensionError(
                f"table has {arr.ndim} axes for {len(variables)} variables"
            )
        if np.any(arr < -JOINT_SUM_TOL):
            raise DomainError("joint table has a negative entry")
        if abs(arr.sum() - 1.0) > JOINT_SUM_TOL:
            raise DomainError(f"joint table sums to {float(arr.sum())!r}, expected 1")
        arr.setflags(write=False)
        object.__setattr__(self, "variables", variables)
        object.__setattr__(self, "probs", arr)

    def axes_of(self, vars: Iterable[str]) -> tuple[int, ...]:
        index = {name: i for i, name in enumerate(self.variables)}
        axes = []
        for name in _names(vars):
            if name not in index:
                raise KeyError(f"unknown variable {name!r}")
            axes.append(index[name])
        return tuple(axes)

    def marginal(self, keep: Iterable[str]) -> "JointTable":
        """Marginal over ``keep`` (result variables in this table's order)."""
        keep_set = set(_names(keep))
        axes = tuple(i for i, name in enumerate(self.variables)
                     if name not in keep_set)
        unknown = keep_set - set(self.variables)
        if unknown:
            raise KeyError(f"unknown variable {sorted(unknown)[0]!r}")
        kept = tuple(n for n in self.variables if n in keep_set)
        return JointTable(kept, self.probs.sum(axis=axes) if axes else self.probs)


def _marginal_entropy_nats(joint: JointTable, vars: tuple[str, ...]) -> float:
    keep = set(vars)
    axes = tuple(i for i, name in enumerate(joint.variables) if name not in keep)
    p = joint.probs.sum(axis=axes) if axes else joint.probs
    return _entropy_nats(p)


def entropy(joint: JointTable, vars=None, base: str = BITS) -> float:
    """Shannon entropy of the marginal over ``vars`` (all variables if None)."""
    vars = joint.variables if vars is None else _names(vars)
    if len(vars) == 0:
        raise DomainError("entropy needs at least one variable")
    joint.axes_of(vars)  # raises KeyError on unknown names
    h = _entropy_nats(joint.marginal(vars).probs)
    return _clamp_nonneg(h, "entropy") * _base_factor(base)


def conditional_entropy(joint: JointTable, target_vars, given_vars,
                        base: str = BITS) -> float:
    """H(target | given) = H(target, given) - H(given).

    Zero-probability conditioning events contribute zero.  An empty ``given``
    set reduces to plain entropy.
    """
    target = _names(target_vars)
    given = _names(given_vars)
    if set(target) & set(given):
        raise DomainError("target and given variable sets overlap")
    joint.axes_of(target + given)
    if not target:
        raise DomainError("conditional entropy needs a nonempty target set")
    h_joint = _marginal_entropy_nats(joint, target + given)
    h_given = _marginal_entropy_nats(joint, given) if given else 0.0
    return _clamp_nonneg(h_joint - h_given, "conditional entropy") * _base_factor(base)


def _cmi_nats(joint: JointTable, a, b, c) -> float:
    a, b, c = _names(a), _names(b), _names(c)
    if (set(a) & set(b)) or (set(a) & set(c)) or (set(b) & set(c)):
        raise DomainError("the three variable sets must be pairwise disjoint")
    if not a or not b:
        raise DomainError("both primary variable sets must be nonempty")
    joint.axes_of(a + b + c)
    # I[A;B|C] = H(AC) + H(BC) - H(ABC) - H(C)
    h_ac = _marginal_entropy_nats(joint, a + c)
    h_bc = _marginal_entropy_nats(joint, b + c)
    h_abc = _marginal_entropy_nats(joint, a + b + c)
    h_c = _marginal_entropy_nats(joint, c) if c else 0.0
    return h_ac + h_bc - h_abc - h_c


def conditional_mutual_information(joint: JointTable, set_a, set_b, set_c=(),
                                   base: str = BITS) -> float:
    """I[A; B | C]; ``set_c`` may be empty, giving plain mutual information."""
    v = _cmi_nats(joint, set_a, set_b, set_c)
    return _clamp_nonneg(v, "conditional mutual information") * _base_factor(base)


def interaction_information(joint: JointTable, set_a, set_b, set_c,
                            base: str = BITS) -> float:
    """I[A; B; C] = I[A; B] - I[A; B | C].  May legitimately be negative."""
    c = _names(set_c)
    if not c:
        raise DomainError("interaction information needs a nonempty third set")
    plain = _cmi_nats(joint, set_a, set_b, ())
    conditioned = _cmi_nats(joint, set_a, set_b, c)
    return (plain - conditioned) * _base_factor(base)


# ---------------------------------------------------------------------------
# Entropy rate of product-channel sources
# ---------------------------------------------------------------------------

def _percept_block_entropies(env, max_len: int, budget: int):
    """Yields H(S_{0:n}) in nats for n = 1, 2, ... under the fixed all-zeros
    action sequence (the percept law of a product channel does not depend on
    it).  Stops raising once the prefix table would exceed the budget."""
    phi0 = env.phi[0]
    alpha = env.initial.copy()  # joint of the percept prefix and hidden state
    for _ in range(max_len):
        if alpha.size * env.n_symbols > budget:
            raise ConvergenceError(
                "block-entropy table exceeded the enumeration budget before converging"
            )
        alpha = np.tensordot(alpha, phi0, axes=([-1], [0]))
        yield _entropy_nats(alpha.sum(axis=-1))


def entropy_rate(env, tol: float = 1e-9, max_horizon: int = 48,
                 base: str = BITS, product_horizon: int = channels.DEFAULT_PRODUCT_HORIZON,
                 budget: int = channels.ENUMERATION_BUDGET) -> float:
    """Per-symbol entropy of the percept process of a product channel.

    For unifilar models the Cesàro chain rule collapses to the closed form
    sum_z pi(z) H(emission | z) with pi the time-averaged hidden-state
    distribution.  Otherwise increasing-horizon conditional block entropies
    H(S_{0:n+1}) - H(S_{0:n}) are used until two successive estimates differ
    by less than ``tol``.
    """
    factor = _base_factor(base)
    if not channels.is_product(env, horizon=product_horizon, budget=budget):
        raise ChannelClassError(
            f"entropy rate needs a product channel (certificate horizon {product_horizon})"
        )
    if channels.is_unifilar(env) is not None:
        # hidden-state chain under the fixed action; unifilarity makes the
        # state a function of the percept past, so H(S_t | S_{0:t}) = H(S_t | Z_t)
        hidden_step = env.phi[0].sum(axis=1)  # [z, z']
        profile = asymptotic_profile(TransitionKernel(hidden_step),
                                     tol=min(tol, 1e-10))
        pi = env.initial @ profile.cesaro_matrix
        emission = env.phi[0].sum(axis=2)  # [z, s]
        h = float(sum(pi[z] * _entropy_nats(emission[z]) for z in range(env.n_hidden)))
        return _clamp_nonneg(h, "entropy rate") * factor

    prev_block = 0.0
    prev_estimate = None
    estimate = None
    for block in _percept_block_entropies(env, max_horizon, budget):
        prev_estimate, estimate = estimate, block - prev_block
        prev_block = block
        if prev_estimate is not None and abs(estimate - prev_estimate) < tol:
            return _clamp_nonneg(estimate, "entropy rate") * factor
    raise ConvergenceError(
        f"entropy rate estimates did not settle within horizon {max_horizon}",
        estimates=(prev_estimate, estimate),
    )
