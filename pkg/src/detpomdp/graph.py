"""Belief-space AND/OR graph: reachable beliefs, compilation, solutions, policies.

OR nodes are canonical beliefs; AND nodes are (belief, action) progressions.
Every OR node choosing an action must account for all observations the AND
node can emit, which is exactly the contingent-planning branching structure.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from .beliefs import (
    Belief,
    DistBelief,
    SetBelief,
    applicable_actions,
    filter_belief,
    is_target,
    progress,
)
from .errors import (
    BudgetExceededError,
    ClosureError,
    PreconditionError,
    SolutionInvalidError,
)
from .model import MINEXP, MINMAX, DetPomdp, initial_belief

DEFAULT_BUDGET = 10**6

Cost = Union[Fraction, float]


@dataclass(frozen=True)
class Branch:
    """One observation outcome of an applied action."""

    obs: int
    belief: Belief
    prob: Optional[float]


@dataclass(frozen=True)
class Transition:
    """An applicable action at a belief: its belief-level cost and outcomes."""

    action: int
    cost: Cost
    branches: tuple[Branch, ...]


def action_cost(model: DetPomdp, belief: Belief, action: int, criterion: str) -> Cost:
    """Belief-level cost: worst case over the support, or its expectation."""
    costs = model.actions[action].costs
    if criterion == MINMAX:
        return max(costs[s] for s in belief.support())
    return float(sum(float(costs[s]) * p for s, p in belief.items()))


def belief_transitions(model: DetPomdp, belief: Belief, criterion: str) -> list[Transition]:
    """All (action, cost, observation branches) transitions out of a belief."""
    out = []
    row_for = model.obs_fn
    for a in applicable_actions(model, belief):
        after = progress(model, belief, a)
        row = row_for[a]
        branches = []
        if isinstance(after, SetBelief):
            groups: dict[int, list[int]] = {}
            for s in after.support():
                groups.setdefault(row[s], []).append(s)
            for o in sorted(groups):
                branches.append(Branch(o, SetBelief.of(groups[o]), None))
        else:
            dgroups: dict[int, dict[int, float]] = {}
            for s, p in after.items():
                dgroups.setdefault(row[s], {})[s] = p
            for o in sorted(dgroups):
                cell = dgroups[o]
                mass = sum(cell.values())
                child = DistBelief({s: p / mass for s, p in cell.items()})
                branches.append(Branch(o, child, mass))
        out.append(Transition(a, action_cost(model, belief, a, criterion), tuple(branches)))
    return out


def reachable_beliefs(
    model: DetPomdp, criterion: str = MINMAX, budget: int = DEFAULT_BUDGET
) -> list[Belief]:
    """Closure of the initial belief under progression and filtering, BFS order.

    Target beliefs and dead ends are kept but not expanded.  Termination is
    guaranteed because there are finitely many hypothesis tables; the budget
    guards against exhausting memory first.
    """
    root = initial_belief(model, criterion)
    seen = {root: 0}
    order = [root]
    frontier = 0
    while frontier < len(order):
        b = order[frontier]
        frontier += 1
        if is_target(model, b):
            continue
        for tr in belief_transitions(model, b, criterion):
            for br in tr.branches:
                if br.belief not in seen:
                    seen[br.belief] = len(order)
                    order.append(br.belief)
                    if len(order) > budget:
                        raise BudgetExceededError(len(order), "beliefs")
    return order


@dataclass(frozen=True)
class OrEdge:
    action: int
    and_id: int
    cost: Cost


@dataclass(frozen=True)
class AndEdge:
    obs: int
    or_id: int
    prob: Optional[float]


@dataclass
class AndOrGraph:
    """Compiled belief-space graph.

    ``or_edges[i]`` lists the action edges of OR node ``i`` (empty for
    terminals and dead ends); ``and_edges[j]`` lists the observation edges of
    AND node ``j``, each with cost zero and, under the expected-cost
    criterion, an observation probability.
    """

    criterion: str
    beliefs: list[Belief]
    root: int
    terminals: frozenset[int]
    or_edges: list[tuple[OrEdge, ...]]
    and_nodes: list[tuple[int, int]]
    and_edges: list[tuple[AndEdge, ...]]

    def index(self) -> dict[Belief, int]:
        return {b: i for i, b in enumerate(self.beliefs)}

    def and_index(self) -> dict[tuple[int, int], int]:
        return {key: j for j, key in enumerate(self.and_nodes)}

    def export_text(self) -> str:
        """Deterministic one-node-per-line dump for debugging and golden tests."""
        lines = []
        for i, b in enumerate(self.beliefs):
            tags = []
            if i == self.root:
                tags.append("root")
            if i in self.terminals:
                tags.append("terminal")
            sup = ",".join(map(str, b.support()))
            edges = " ".join(
                f"[act{e.action}->and{e.and_id} cost={e.cost}]" for e in self.or_edges[i]
            )
            head = f"or{i} support={{{sup}}}"
            if tags:
                head += " " + ",".join(tags)
            lines.append((head + " " + edges).rstrip())
        for j, (or_id, action) in enumerate(self.and_nodes):
            edges = " ".join(
                f"[obs{e.obs}->or{e.or_id}"
                + (f" p={e.prob:.12g}" if e.prob is not None else "")
                + "]"
                for e in self.and_edges[j]
            )
            lines.append(f"and{j} belief=or{or_id} action={action} {edges}".rstrip())
        return "\n".join(lines) + "\n"


def build_graph(
    model: DetPomdp, criterion: str = MINMAX, budget: int = DEFAULT_BUDGET
) -> AndOrGraph:
    """Compile the model into its belief-space AND/OR graph, breadth-first."""
    root = initial_belief(model, criterion)
    index: dict[Belief, int] = {root: 0}
    beliefs: list[Belief] = [root]
    or_edges: list[tuple[OrEdge, ...]] = []
    and_nodes: list[tuple[int, int]] = []
    and_edges: list[tuple[AndEdge, ...]] = []
    terminals = set()

    frontier = 0
    while frontier < len(beliefs):
        b = beliefs[frontier]
        i = frontier
        frontier += 1
        if is_target(model, b):
            terminals.add(i)
            or_edges.append(())
            continue
        edges = []
        for tr in belief_transitions(model, b, criterion):
            child_edges = []
            for br in tr.branches:
                k = index.get(br.belief)
                if k is None:
                    k = len(beliefs)
                    index[br.belief] = k
                    beliefs.append(br.belief)
                    if len(beliefs) > budget:
                        raise BudgetExceededError(len(beliefs), "beliefs")
                child_edges.append(AndEdge(br.obs, k, br.prob))
            j = len(and_nodes)
            and_nodes.append((i, tr.action))
            and_edges.append(tuple(child_edges))
            edges.append(OrEdge(tr.action, j, tr.cost))
        or_edges.append(tuple(edges))

    return AndOrGraph(
        criterion=criterion,
        beliefs=beliefs,
        root=0,
        terminals=frozenset(terminals),
        or_edges=or_edges,
        and_nodes=and_nodes,
        and_edges=and_edges,
    )


@dataclass(frozen=True)
class Solution:
    """A candidate solution subgraph: retained edges plus the nodes they span."""

    or_nodes: frozenset[int]
    and_nodes: frozenset[int]
    or_edges: frozenset[tuple[int, int]]
    and_edges: frozenset[tuple[int, int]]


def validate_solution(graph: AndOrGraph, sol: Solution) -> None:
    """Check the three structural conditions; raise naming the first violated one."""
    if graph.root not in sol.or_nodes:
        raise SolutionInvalidError(1, f"root or{graph.root} not in the solution")
    for j in sorted(sol.and_nodes):
        required = {(j, e.or_id) for e in graph.and_edges[j]}
        kept = {e for e in sol.and_edges if e[0] == j}
        if kept != required:
            raise SolutionInvalidError(
                2, f"and{j} must keep all {len(required)} outgoing edges"
            )
        if any(e.or_id not in sol.or_nodes for e in graph.and_edges[j]):
            raise SolutionInvalidError(2, f"and{j} has an endpoint outside the solution")
    for i in sorted(sol.or_nodes):
        if i in graph.terminals:
            continue
        kept = {e for e in sol.or_edges if e[0] == i}
        if len(kept) != 1:
            raise SolutionInvalidError(
                3, f"or{i} keeps {len(kept)} outgoing edges, needs exactly 1"
            )
        (_, j) = next(iter(kept))
        if j >= len(graph.and_nodes) or graph.and_nodes[j][0] != i or j not in sol.and_nodes:
            raise SolutionInvalidError(3, f"or{i} keeps an edge to a foreign and-node")


def solution_cost(graph: AndOrGraph, sol: Solution, criterion: Optional[str] = None) -> Cost:
    """Value of the solution at the root; infinite when the subgraph is cyclic."""
    if criterion is not None and criterion != graph.criterion:
        raise ValueError(
            f"graph was built for {graph.criterion}, cannot cost under {criterion}"
        )
    validate_solution(graph, sol)
    choice = {i: j for i, j in sol.or_edges}

    values: dict[int, Cost] = {}
    ON_PATH, DONE = 0, 1
    state: dict[int, int] = {}
    stack: list[tuple[int, bool]] = [(graph.root, False)]
    cyclic = False
    while stack and not cyclic:
        i, post = stack.pop()
        if post:
            state[i] = DONE
            if i in graph.terminals:
                values[i] = Fraction(0) if graph.criterion == MINMAX else 0.0
                continue
            j = choice[i]
            edge = next(e for e in graph.or_edges[i] if e.and_id == j)
            children = graph.and_edges[j]
            if graph.criterion == MINMAX:
                values[i] = edge.cost + max(values[e.or_id] for e in children)
            else:
                values[i] = edge.cost + sum(
                    e.prob * values[e.or_id] for e in children
                )
            continue
        if state.get(i) == DONE:
            continue
        if state.get(i) == ON_PATH:
            cyclic = True
            break
        state[i] = ON_PATH
        stack.append((i, True))
        if i in graph.terminals:
            continue
        j = choice[i]
        for e in graph.and_edges[j]:
            k = e.or_id
            if state.get(k) == ON_PATH:
                cyclic = True
            elif state.get(k) != DONE:
                stack.append((k, False))
    if cyclic:
        return float("inf")
    return values[graph.root]


@dataclass(frozen=True)
class Policy:
    """Finite map from canonical beliefs to action indices."""

    actions: dict[Belief, int]

    def __contains__(self, belief):
        return belief in self.actions

    def __getitem__(self, belief):
        return self.actions[belief]

    def __len__(self):
        return len(self.actions)

    def items(self):
        return self.actions.items()


def policy_to_solution(graph: AndOrGraph, policy: Policy) -> Solution:
    """Solution subgraph traced by a policy from the root; fails if not closed."""
    and_index = graph.and_index()
    or_nodes, and_nodes = set(), set()
    or_edges, and_edges = set(), set()
    stack = [graph.root]
    while stack:
        i = stack.pop()
        if i in or_nodes:
            continue
        or_nodes.add(i)
        if i in graph.terminals:
            continue
        b = graph.beliefs[i]
        if b not in policy:
            raise ClosureError(b)
        a = policy[b]
        j = and_index.get((i, a))
        if j is None:
            raise PreconditionError(a, b.support()[0])
        and_nodes.add(j)
        or_edges.add((i, j))
        for e in graph.and_edges[j]:
            and_edges.add((j, e.or_id))
            stack.append(e.or_id)
    return Solution(
        or_nodes=frozenset(or_nodes),
        and_nodes=frozenset(and_nodes),
        or_edges=frozenset(or_edges),
        and_edges=frozenset(and_edges),
    )


def solution_to_policy(graph: AndOrGraph, sol: Solution) -> Policy:
    """Minimal policy choosing each solution OR node's retained action."""
    validate_solution(graph, sol)
    choice = {i: j for i, j in sol.or_edges}
    actions: dict[Belief, int] = {}
    seen = set()
    stack = [graph.root]
    while stack:
        i = stack.pop()
        if i in seen:
            continue
        seen.add(i)
        if i in graph.terminals:
            continue
        j = choice[i]
        actions[graph.beliefs[i]] = graph.and_nodes[j][1]
        for e in graph.and_edges[j]:
            stack.append(e.or_id)
    return Policy(actions)
