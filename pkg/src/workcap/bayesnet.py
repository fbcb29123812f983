"""Finite-horizon Bayesian networks of percept-action loops.

Three DAG templates are provided: the general loop (with the auxiliary
joint-output nodes V_t = (A_t, M_t) and W_t = (S_t, Z_{t+1}) that make the
channel factorization graphical), the memoryless-environment reduction
(direct A_t -> S_t wiring, no hidden chain), and the product-environment
variant (no action input into the W chain).  d-separation uses the standard
active-trail reachability with collider logic, and separations can be
cross-validated against exact conditional mutual information on trajectory
tables.

Truncation at a finite horizon is sound for queries whose conditioning set
contains no node beyond the horizon: any path escaping into the future must
pass a collider whose descendants all lie in the future too, hence blocked.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import channels, info, loop
from .errors import DimensionError, DomainError

AUX_PREFIXES = ("V", "W")
CMI_SOUNDNESS_TOL = 1e-9


@dataclass(frozen=True)
class Dag:
    """A directed acyclic graph over named nodes."""

    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]

    def __post_init__(self):
        nodes = tuple(self.nodes)
        node_set = set(nodes)
        if len(node_set) != len(nodes):
            raise DimensionError("duplicate node names")
        for u, v in self.edges:
            if u not in node_set or v not in node_set:
                raise DomainError(f"edge ({u!r}, {v!r}) mentions an unknown node")
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "edges", frozenset(self.edges))
        self._check_acyclic()

    def _check_acyclic(self):
        indeg = {n: 0 for n in self.nodes}
        for _, v in self.edges:
            indeg[v] += 1
        frontier = [n for n, d in indeg.items() if d == 0]
        seen = 0
        children = self.children_map()
        while frontier:
            u = frontier.pop()
            seen += 1
            for v in children[u]:
                indeg[v] -= 1
                if indeg[v] == 0:
                    frontier.append(v)
        if seen != len(self.nodes):
            raise DomainError("graph has a directed cycle")

    def parents_map(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.edges:
            out[v].add(u)
        return out

    def children_map(self) -> dict[str, set[str]]:
        out: dict[str, set[str]] = {n: set() for n in self.nodes}
        for u, v in self.edges:
            out[u].add(v)
        return out


def build_loop_dag(horizon: int, variant: str = "general") -> Dag:
    """DAG template for a ``horizon``-round loop.

    general:        V_t -> {M_t, A_t}, (A_t, Z_t) -> W_t -> {S_t, Z_{t+1}},
                    (M_t, S_t) -> V_{t+1}
    memoryless_env: V_t -> {M_t, A_t}, A_t -> S_t, (M_t, S_t) -> V_{t+1}
    product_env:    like general but Z_t alone feeds W_t
    """
    if horizon < 1:
        raise DimensionError("horizon must be >= 1")
    if variant not in ("general", "memoryless_env", "product_env"):
        raise DomainError(f"unknown variant {variant!r}")

    nodes: list[str] = []
    edges: set[tuple[str, str]] = set()
    with_hidden = variant != "memoryless_env"

    for t in range(horizon):
        nodes += [f"V{t}", f"M{t}", f"A{t}", f"S{t}"]
        if with_hidden:
            nodes += [f"Z{t}", f"W{t}"]
        edges.add((f"V{t}", f"M{t}"))
        edges.add((f"V{t}", f"A{t}"))
        if variant == "general":
            edges.add((f"A{t}", f"W{t}"))
            edges.add((f"Z{t}", f"W{t}"))
            edges.add((f"W{t}", f"S{t}"))
        elif variant == "product_env":
            edges.add((f"Z{t}", f"W{t}"))
            edges.add((f"W{t}", f"S{t}"))
        else:
            edges.add((f"A{t}", f"S{t}"))
        if t + 1 < horizon:
            edges.add((f"M{t}", f"V{t + 1}"))
            edges.add((f"S{t}", f"V{t + 1}"))
    if with_hidden:
        nodes.append(f"Z{horizon}")
        for t in range(horizon):
            edges.add((f"W{t}", f"Z{t + 1}"))
    return Dag(tuple(nodes), frozenset(edges))


def d_separated(dag: Dag, set_a, set_b, set_c) -> bool:
    """True iff every path between the two sets is blocked by the third.

    Standard rules: a chain or fork is blocked when its middle node is in the
    conditioning set; a collider is blocked when neither it nor any of its
    descendants is.  Implemented as the textbook active-trail reachability
    walk over (node, travel-direction) pairs.
    """
    a = frozenset(_node_names(dag, set_a))
    b = frozenset(_node_names(dag, set_b))
    c = frozenset(_node_names(dag, set_c))
    if (a & b) or (a & c) or (b & c):
        raise DomainError("node sets must be pairwise disjoint")
    if not a or not b:
        raise DomainError("both endpoint sets must be nonempty")

    parents = dag.parents_map()
    children = dag.children_map()

    # ancestors of the conditioning set (inclusive), for collider activation
    anc_c: set[str] = set()
    stack = list(c)
    while stack:
        n = stack.pop()
        if n in anc_c:
            continue
        anc_c.add(n)
        stack.extend(parents[n])

    # walk states: (node, "up") entered against edge direction (from a child),
    # (node, "down") entered along edge direction (from a parent)
    visited: set[tuple[str, str]] = set()
    frontier = [(n, "up") for n in a]
    while frontier:
        node, direction = frontier.pop()
        if (node, direction) in visited:
            continue
        visited.add((node, direction))
        if node in b and node not in c:
            return False
        if direction == "up":
            if node not in c:
                frontier += [(p, "up") for p in parents[node]]
                frontier += [(ch, "down") for ch in children[node]]
        else:
            if node not in c:
                frontier += [(ch, "down") for ch in children[node]]
            if node in anc_c:  # collider at this node can be active
                frontier += [(p, "up") for p in parents[node]]
    return True


def _node_names(dag: Dag, names) -> tuple[str, ...]:
    names = (names,) if isinstance(names, str) else tuple(names)
    known = set(dag.nodes)
    for n in names:
        if n not in known:
            raise KeyError(f"unknown node {n!r}")
    return names


@dataclass(frozen=True)
class CompatibilityReport:
    """Outcome of sampling d-separated triples and checking exact CMI."""

    variant: str
    horizon: int
    n_checked: int
    violations: tuple[tuple[tuple[str, ...], tuple[str, ...], tuple[str, ...], float], ...]

    @property
    def ok(self) -> bool:
        return not self.violations


def sample_separated_triples(dag: Dag, pool: list[str], n_triples: int,
                             rng: np.random.Generator,
                             max_attempts: int | None = None):
    """Randomly sampled (A, B, C) subsets of ``pool`` that are d-separated."""
    if max_attempts is None:
        max_attempts = 400 * n_triples
    found = []
    for _ in range(max_attempts):
        if len(found) >= n_triples:
            break
        k_a = int(rng.integers(1, 3))
        k_b = int(rng.integers(1, 3))
        k_c = int(rng.integers(0, 3))
        picks = rng.permutation(len(pool))[: k_a + k_b + k_c]
        names = [pool[i] for i in picks]
        trip = (tuple(names[:k_a]), tuple(names[k_a:k_a + k_b]),
                tuple(names[k_a + k_b:]))
        if d_separated(dag, *trip):
            found.append(trip)
    return found


def validate_compatibility(pal: loop.PerceptActionLoop, horizon: int,
                           n_triples: int = 50, seed: int = 0,
                           variant: str = "general",
                           budget: int = loop.TRAJECTORY_BUDGET) -> CompatibilityReport:
    """Check that sampled d-separations hold as exact independences.

    Samples ``n_triples`` d-separated triples over the non-auxiliary nodes of
    the chosen template and asserts CMI below 1e-9 nats on the exact
    trajectory table.  The memoryless and product templates additionally
    require the environment to be of the matching class.
    """
    if variant == "memoryless_env":
        if channels.is_memoryless_invariant(pal.env) is None:
            raise DomainError("memoryless_env template needs a memoryless environment")
        pool_vars = ("M", "A", "S")
    elif variant == "product_env":
        # the template's hidden chain is the action-stripped re-model, which
        # matches the trajectory's Z only for action-invariant kernels
        if not channels.has_action_invariant_kernel(pal.env):
            raise DomainError("product_env template needs an action-invariant kernel")
        pool_vars = ("M", "A", "S", "Z")
    elif variant == "general":
        pool_vars = ("M", "A", "S", "Z")
    else:
        raise DomainError(f"unknown variant {variant!r}")

    dag = build_loop_dag(horizon, variant)
    pool = [f"{v}{t}" for t in range(horizon) for v in pool_vars]
    rng = np.random.default_rng(seed)
    triples = sample_separated_triples(dag, pool, n_triples, rng)

    joint = loop.trajectory_distribution(pal, horizon, budget=budget).joint
    violations = []
    for trip in triples:
        cmi = info.conditional_mutual_information(joint, *trip, base="nats")
        if cmi >= CMI_SOUNDNESS_TOL:
            violations.append((*trip, cmi))
    return CompatibilityReport(variant, horizon, len(triples), tuple(violations))
