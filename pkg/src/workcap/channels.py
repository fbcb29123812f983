"""Hidden Markov environment and agent models.

An environment model is a transition table phi(s, z' | a, z) over a shared
action/percept alphabet plus an initial hidden-state distribution; an agent
model is theta(a', m' | s, m) plus a joint initial distribution over
(first action, initial memory).  This module provides construction and
validation, the channel-class predicates (noiseless, memoryless invariant,
product, unifilar), channel cascade, finite-horizon channel laws, and the
JSON model file format shared with the CLI.

State labels are strings; file I/O assigns indices by sorted label order so
serialized models round-trip bit-exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import BudgetError, DimensionError, ModelFormatError
from .markov import ROW_SUM_TOL, Distribution, TransitionKernel

DEFAULT_PRODUCT_HORIZON = 4
ENUMERATION_BUDGET = 20_000_000


def _check_labels(labels, what: str) -> tuple[str, ...]:
    labels = tuple(str(x) for x in labels)
    if len(labels) == 0:
        raise DimensionError(f"{what}: must be nonempty")
    if len(set(labels)) != len(labels):
        raise DimensionError(f"{what}: duplicate labels")
    return labels


@dataclass(frozen=True)
class EnvironmentModel:
    """Hidden Markov model of an environment channel.

    ``phi[a, z, s, z2]`` is the probability of emitting percept s and moving
    to hidden state z2 when receiving action a in hidden state z.  The action
    and percept alphabets coincide (embed the smaller one first if they do
    not; see :func:`embed_alphabets`).
    """

    alphabet: tuple[str, ...]
    hidden_states: tuple[str, ...]
    phi: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        alphabet = _check_labels(self.alphabet, "alphabet")
        hidden = _check_labels(self.hidden_states, "hidden_states")
        phi = np.array(self.phi, dtype=float)
        init = np.array(self.initial, dtype=float)
        n_sym, n_hid = len(alphabet), len(hidden)
        if phi.shape != (n_sym, n_hid, n_sym, n_hid):
            raise DimensionError(
                f"phi: expected shape {(n_sym, n_hid, n_sym, n_hid)}, got {phi.shape}"
            )
        if init.shape != (n_hid,):
            raise DimensionError(f"initial: expected shape ({n_hid},), got {init.shape}")
        phi.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "hidden_states", hidden)
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "initial", init)

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    @property
    def n_hidden(self) -> int:
        return len(self.hidden_states)

    def kernel(self) -> TransitionKernel:
        """The flat (|A|*|Z|) x (|S|*|Z|) stochastic matrix."""
        n = self.n_symbols * self.n_hidden
        return TransitionKernel(self.phi.reshape(n, n))

    def initial_distribution(self) -> Distribution:
        return Distribution(self.initial)

    def emission(self) -> np.ndarray:
        """emission[a, z, s]: probability of percept s given action a, state z."""
        return self.phi.sum(axis=3)


@dataclass(frozen=True)
class AgentModel:
    """Hidden Markov model of an agent channel.

    ``theta[s, m, a2, m2]`` is the probability of taking action a2 and moving
    to memory m2 after receiving percept s in memory m.  ``initial_joint[a, m]``
    is the joint distribution of the opening action and initial memory.
    """

    alphabet: tuple[str, ...]
    memory_states: tuple[str, ...]
    theta: np.ndarray
    initial_joint: np.ndarray

    def __post_init__(self):
        alphabet = _check_labels(self.alphabet, "alphabet")
        memory = _check_labels(self.memory_states, "memory_states")
        theta = np.array(self.theta, dtype=float)
        init = np.array(self.initial_joint, dtype=float)
        n_sym, n_mem = len(alphabet), len(memory)
        if theta.shape != (n_sym, n_mem, n_sym, n_mem):
            raise DimensionError(
                f"theta: expected shape {(n_sym, n_mem, n_sym, n_mem)}, got {theta.shape}"
            )
        if init.shape != (n_sym, n_mem):
            raise DimensionError(
                f"initial_joint: expected shape {(n_sym, n_mem)}, got {init.shape}"
            )
        theta.setflags(write=False)
        init.setflags(write=False)
        object.__setattr__(self, "alphabet", alphabet)
        object.__setattr__(self, "memory_states", memory)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "initial_joint", init)

    @property
    def n_symbols(self) -> int:
        return len(self.alphabet)

    @property
    def n_memory(self) -> int:
        return len(self.memory_states)

    def kernel(self) -> TransitionKernel:
        n = self.n_symbols * self.n_memory
        return TransitionKernel(self.theta.reshape(n, n))


Model = EnvironmentModel | AgentModel


def validate(model: Model) -> list[str]:
    """Check the stochasticity invariants; return violations (empty = ok).

    Violations name the offending row rather than raising, so a loader can
    report all problems at once.
    """
    violations: list[str] = []
    if isinstance(model, EnvironmentModel):
        table, init = model.phi, model.initial
        in_labels = [(a, z) for a in model.alphabet for z in model.hidden_states]
        rows = table.reshape(model.n_symbols * model.n_hidden, -1)
        init_what = "initial hidden-state distribution"
    else:
        table, init = model.theta, model.initial_joint
        in_labels = [(s, m) for s in model.alphabet for m in model.memory_states]
        rows = table.reshape(model.n_symbols * model.n_memory, -1)
        init_what = "initial (action, memory) distribution"

    for idx, label in enumerate(in_labels):
        row = rows[idx]
        if np.any(row < -ROW_SUM_TOL):
            violations.append(f"row {label}: negative entry {row.min()!r}")
        if np.any(row > 1.0 + ROW_SUM_TOL):
            violations.append(f"row {label}: entry above 1 ({row.max()!r})")
        s = row.sum()
        if abs(s - 1.0) > ROW_SUM_TOL:
            violations.append(f"row {label}: sums to {float(s)!r}, expected 1")
    if np.any(init < -ROW_SUM_TOL):
        violations.append(f"{init_what}: negative entry")
    if abs(init.sum() - 1.0) > ROW_SUM_TOL:
        violations.append(f"{init_what}: sums to {float(init.sum())!r}, expected 1")
    return violations


def require_valid(model: Model) -> Model:
    violations = validate(model)
    if violations:
        raise ModelFormatError("; ".join(violations))
    return model


def reachable_hidden(env: EnvironmentModel) -> np.ndarray:
    """Boolean mask of hidden states reachable from the initial distribution
    under arbitrary action sequences."""
    reach = env.initial > 0.0
    # step[z, z2]: some action/percept pair moves z to z2
    step = (env.phi.sum(axis=(0, 2)) > 0.0).astype(float)
    while True:
        new = reach | (reach.astype(float) @ step > 0.0)
        if np.array_equal(new, reach):
            return reach
        reach = new


def is_noiseless(env: EnvironmentModel) -> bool:
    """True iff every reachable state echoes the action back as the percept."""
    e = env.emission()
    reach = reachable_hidden(env)
    eye = np.eye(env.n_symbols)
    for z in np.flatnonzero(reach):
        if np.max(np.abs(e[:, z, :] - eye)) > ROW_SUM_TOL:
            return False
    return True


def is_memoryless_invariant(env: EnvironmentModel) -> np.ndarray | None:
    """The reduced |A| x |S| kernel phi(s|a), when the marginal output law is
    the same for every reachable hidden state; None otherwise."""
    e = env.emission()
    reach = np.flatnonzero(reachable_hidden(env))
    ref = e[:, reach[0], :]
    for z in reach[1:]:
        if np.max(np.abs(e[:, z, :] - ref)) > ROW_SUM_TOL:
            return None
    reduced = ref.copy()
    reduced.setflags(write=False)
    return reduced


def channel_law(env: EnvironmentModel, actions: tuple[int, ...],
                budget: int = ENUMERATION_BUDGET) -> np.ndarray:
    """Exact nu(s_{0:T} | a_{0:T}) for one action sequence.

    Returns an array of shape (|S|,) * T; entry [s_0, ..., s_{T-1}] is the
    probability of that percept sequence.
    """
    n_s, n_z = env.n_symbols, env.n_hidden
    required = n_s ** len(actions) * n_z
    if required > budget:
        raise BudgetError(
            f"channel law would need a table of {required} entries (budget {budget})",
            required=required, budget=budget,
        )
    # alpha[s_0, ..., s_{t-1}, z]: joint of the percept prefix and the hidden state
    alpha = env.initial.copy()
    for a in actions:
        alpha = np.tensordot(alpha, env.phi[a], axes=([-1], [0]))
    return alpha.sum(axis=-1)


def is_product(env: EnvironmentModel, horizon: int = DEFAULT_PRODUCT_HORIZON,
               budget: int = ENUMERATION_BUDGET) -> bool:
    """Finite-horizon product-channel certificate.

    True iff the channel law nu(s_{0:T} | a_{0:T}) is identical across all
    |A|^T action sequences with T = ``horizon`` (which implies equality at all
    shorter horizons too).  This is a certificate for the given horizon, not a
    proof for all T; the default horizon matches the CLI default.
    """
    if horizon < 1:
        raise DimensionError("horizon must be >= 1")
    n_a = env.n_symbols
    required = (n_a * env.n_symbols) ** horizon * env.n_hidden
    if required > budget:
        raise BudgetError(
            f"product check would enumerate {required} entries (budget {budget})",
            required=required, budget=budget,
        )
    reference = None
    for flat in range(n_a ** horizon):
        actions, rest = [], flat
        for _ in range(horizon):
            actions.append(rest % n_a)
            rest //= n_a
        law = channel_law(env, tuple(actions), budget=budget)
        if reference is None:
            reference = law
        elif np.max(np.abs(law - reference)) > ROW_SUM_TOL:
            return False
    return True


def has_action_invariant_kernel(env: EnvironmentModel) -> bool:
    """Strong (kernel-level) product witness: phi does not depend on the
    action at any reachable hidden state."""
    reach = np.flatnonzero(reachable_hidden(env))
    ref = env.phi[0]
    for a in range(1, env.n_symbols):
        if np.max(np.abs(env.phi[a][reach] - ref[reach])) > ROW_SUM_TOL:
            return False
    return True


@dataclass(frozen=True)
class UnifilarityMap:
    """Deterministic next-state map (a, z, s) -> z' of a unifilar model.

    ``next_state[a, z, s]`` is the unique successor wherever the triple has
    positive probability; for zero-probability triples the entry is an
    arbitrary placeholder (the current state) so the map stays total.
    """

    next_state: np.ndarray

    def __call__(self, a: int, z: int, s: int) -> int:
        return int(self.next_state[a, z, s])


def is_unifilar(env: EnvironmentModel) -> UnifilarityMap | None:
    """The unifilarity map if the model qualifies, else None.

    Requires a delta initial distribution and, for every reachable hidden
    state, at most one positive successor per (action, state, percept).
    """
    if np.max(env.initial) < 1.0 - ROW_SUM_TOL:
        return None
    reach = reachable_hidden(env)
    n_a, n_z = env.n_symbols, env.n_hidden
    nxt = np.zeros((n_a, n_z, n_a), dtype=int)
    for z in range(n_z):
        nxt[:, z, :] = z
        if not reach[z]:
            continue
        for a in range(n_a):
            for s in range(n_a):
                succ = np.flatnonzero(env.phi[a, z, s] > 0.0)
                if succ.size > 1:
                    return None
                if succ.size == 1:
                    nxt[a, z, s] = succ[0]
    nxt.setflags(write=False)
    return UnifilarityMap(nxt)


def cascade(first: EnvironmentModel, second: EnvironmentModel) -> EnvironmentModel:
    """Feed ``first``'s percepts into ``second`` as actions.

    Hidden states are pairs (z1, z2); the composite kernel marginalizes the
    intermediate symbol.
    """
    if first.alphabet != second.alphabet:
        raise DimensionError(
            f"cascade: percept alphabet {first.alphabet} of the first channel must "
            f"equal the action alphabet {second.alphabet} of the second"
        )
    # out[a, z1, z2, s, w1, w2] = sum_i phi1[a, z1, i, w1] * phi2[i, z2, s, w2]
    comp = np.einsum("axiu,iysv->axysuv", first.phi, second.phi)
    n1, n2 = first.n_hidden, second.n_hidden
    n = n1 * n2
    phi = comp.reshape(first.n_symbols, n, first.n_symbols, n)
    labels = tuple(
        f"({l1},{l2})" for l1 in first.hidden_states for l2 in second.hidden_states
    )
    initial = np.outer(first.initial, second.initial).reshape(n)
    return EnvironmentModel(first.alphabet, labels, phi, initial)


def embed_alphabets(action_symbols, percept_symbols, phi, initial,
                    hidden_states, pad_action: str | None = None) -> EnvironmentModel:
    """Build an EnvironmentModel from distinct action/percept alphabets.

    The common alphabet is the sorted union.  Percept symbols that the
    original channel never emits keep probability zero; new action symbols
    get an explicit padding row copied from ``pad_action`` (default: the
    first original action), never an implicit one.
    """
    action_symbols = _check_labels(action_symbols, "action alphabet")
    percept_symbols = _check_labels(percept_symbols, "percept alphabet")
    hidden_states = _check_labels(hidden_states, "hidden_states")
    union = tuple(sorted(set(action_symbols) | set(percept_symbols)))
    phi = np.asarray(phi, dtype=float)
    n_a, n_s, n_z = len(action_symbols), len(percept_symbols), len(hidden_states)
    if phi.shape != (n_a, n_z, n_s, n_z):
        raise DimensionError(
            f"phi: expected shape {(n_a, n_z, n_s, n_z)}, got {phi.shape}"
        )
    if pad_action is None:
        pad_action = action_symbols[0]
    if pad_action not in action_symbols:
        raise DimensionError(f"pad_action {pad_action!r} is not an original action")

    n_u = len(union)
    out = np.zeros((n_u, n_z, n_u, n_z))
    a_index = {sym: i for i, sym in enumerate(action_symbols)}
    s_index = {sym: i for i, sym in enumerate(percept_symbols)}
    for ui, sym in enumerate(union):
        src = a_index.get(sym, a_index[pad_action])
        for sj, sym_out in enumerate(percept_symbols):
            out[ui, :, union.index(sym_out), :] = phi[src, :, sj, :]
    return EnvironmentModel(union, hidden_states, out, initial)


# ---------------------------------------------------------------------------
# Model file format (shared with the CLI)
# ---------------------------------------------------------------------------
#
# JSON document:
#   alphabet       list of symbol strings
#   hidden_states  (environment) or memory_states (agent): list of labels
#   initial        map state -> prob for environments,
#                  map "action,memory" -> prob for agents
#   transitions    map "input_symbol,state" -> map "output_symbol,next_state" -> prob
#
# Probabilities are decimal strings parsed to binary floating point.  Rows are
# normalized only when they deviate from 1 by less than 1e-9 (and by more than
# 1e-12, so canonical files reload without drift); larger deviations reject.

_NORMALIZE_BELOW = 1e-9


def _parse_prob(value, where: str) -> float:
    if isinstance(value, str):
        try:
            x = float(value)
        except ValueError:
            raise ModelFormatError(f"{where}: {value!r} is not a decimal number") from None
    elif isinstance(value, (int, float)):
        x = float(value)
    else:
        raise ModelFormatError(f"{where}: probability must be a decimal string")
    if not 0.0 <= x <= 1.0:
        raise ModelFormatError(f"{where}: probability {x!r} outside [0, 1]")
    return x


def _split_key(key: str, where: str) -> tuple[str, str]:
    if "," not in key:
        raise ModelFormatError(f"{where}: key {key!r} is not 'symbol,state'")
    sym, state = key.split(",", 1)
    return sym, state


def _row_from_map(mapping, sym_index, state_index, where: str) -> np.ndarray:
    row = np.zeros((len(sym_index), len(state_index)))
    for key, value in mapping.items():
        sym, state = _split_key(key, where)
        if sym not in sym_index:
            raise ModelFormatError(f"{where}: unknown symbol {sym!r}")
        if state not in state_index:
            raise ModelFormatError(f"{where}: unknown state {state!r}")
        row[sym_index[sym], state_index[state]] = _parse_prob(value, f"{where}[{key}]")
    s = row.sum()
    if abs(s - 1.0) >= _NORMALIZE_BELOW:
        raise ModelFormatError(f"{where}: row sums to {float(s)!r} (deviation >= {_NORMALIZE_BELOW})")
    if abs(s - 1.0) > ROW_SUM_TOL:
        row /= s
    return row


def loads_model(text: str) -> Model:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("model file must be a JSON object")
    if "hidden_states" in doc:
        kind = "environment"
    elif "memory_states" in doc:
        kind = "agent"
    else:
        raise ModelFormatError("model file needs 'hidden_states' or 'memory_states'")
    for field in ("alphabet", "initial", "transitions"):
        if field not in doc:
            raise ModelFormatError(f"missing field {field!r}")
    if not isinstance(doc["alphabet"], list):
        raise ModelFormatError("'alphabet' must be a list of symbol strings")
    state_key = "hidden_states" if kind == "environment" else "memory_states"
    if not isinstance(doc[state_key], list):
        raise ModelFormatError(f"{state_key!r} must be a list of labels")
    if not isinstance(doc["initial"], dict) or not isinstance(doc["transitions"], dict):
        raise ModelFormatError("'initial' and 'transitions' must be objects")

    alphabet = tuple(sorted(str(x) for x in doc["alphabet"]))
    if len(set(alphabet)) != len(alphabet):
        raise ModelFormatError("alphabet has duplicate symbols")
    state_field = "hidden_states" if kind == "environment" else "memory_states"
    states = tuple(sorted(str(x) for x in doc[state_field]))
    if len(set(states)) != len(states):
        raise ModelFormatError(f"{state_field} has duplicate labels")
    sym_index = {s: i for i, s in enumerate(alphabet)}
    state_index = {s: i for i, s in enumerate(states)}

    n_sym, n_state = len(alphabet), len(states)
    table = np.zeros((n_sym, n_state, n_sym, n_state))
    seen = set()
    for key, row_map in doc["transitions"].items():
        sym, state = _split_key(key, "transitions")
        if sym not in sym_index or state not in state_index:
            raise ModelFormatError(f"transitions: unknown input key {key!r}")
        if not isinstance(row_map, dict):
            raise ModelFormatError(f"transitions[{key!r}]: expected an object")
        table[sym_index[sym], state_index[state]] = _row_from_map(
            row_map, sym_index, state_index, f"transitions[{key!r}]"
        )
        seen.add((sym, state))
    missing = [(s, st) for s in alphabet for st in states if (s, st) not in seen]
    if missing:
        raise ModelFormatError(f"transitions: missing row for {missing[0]!r}")

    if kind == "environment":
        init = np.zeros(n_state)
        for key, value in doc["initial"].items():
            if key not in state_index:
                raise ModelFormatError(f"initial: unknown state {key!r}")
            init[state_index[key]] = _parse_prob(value, f"initial[{key}]")
        s = init.sum()
        if abs(s - 1.0) >= _NORMALIZE_BELOW:
            raise ModelFormatError(f"initial: sums to {float(s)!r}")
        if abs(s - 1.0) > ROW_SUM_TOL:
            init /= s
        model: Model = EnvironmentModel(alphabet, states, table, init)
    else:
        init = np.zeros((n_sym, n_state))
        for key, value in doc["initial"].items():
            sym, state = _split_key(key, "initial")
            if sym not in sym_index or state not in state_index:
                raise ModelFormatError(f"initial: unknown key {key!r}")
            init[sym_index[sym], state_index[state]] = _parse_prob(value, f"initial[{key}]")
        s = init.sum()
        if abs(s - 1.0) >= _NORMALIZE_BELOW:
            raise ModelFormatError(f"initial: sums to {float(s)!r}")
        if abs(s - 1.0) > ROW_SUM_TOL:
            init /= s
        model = AgentModel(alphabet, states, table, init)
    require_valid(model)
    return model


def load_model(path) -> Model:
    return loads_model(Path(path).read_text())


def dumps_model(model: Model) -> str:
    """Canonical serialization: sorted keys, shortest-round-trip decimal
    strings, zero entries omitted."""
    if isinstance(model, EnvironmentModel):
        state_field, states = "hidden_states", model.hidden_states
        table = model.phi
        initial = {
            states[z]: repr(float(p))
            for z, p in enumerate(model.initial) if p != 0.0
        }
    else:
        state_field, states = "memory_states", model.memory_states
        table = model.theta
        initial = {
            f"{model.alphabet[a]},{states[m]}": repr(float(p))
            for (a, m), p in np.ndenumerate(model.initial_joint) if p != 0.0
        }
    transitions = {}
    for i, sym in enumerate(model.alphabet):
        for k, state in enumerate(states):
            row = {
                f"{model.alphabet[j]},{states[l]}": repr(float(p))
                for (j, l), p in np.ndenumerate(table[i, k]) if p != 0.0
            }
            transitions[f"{sym},{state}"] = row
    doc = {
        "alphabet": sorted(model.alphabet),
        state_field: sorted(states),
        "initial": initial,
        "transitions": transitions,
    }
    return json.dumps(doc, indent=2, sort_keys=True) + "\n"


def save_model(model: Model, path) -> None:
    Path(path).write_text(dumps_model(model))
