"""Optimal policy computation and policy evaluation.

Three solvers cover the variants: explicit enumeration with label setting
(plus a policy-iteration refinement for expected cost, where plain label
setting can lock in a suboptimal merge action), best-first AND/OR search
with admissible heuristics, and uniform-cost search for unobservable models
whose plans are plain action sequences.
"""

from __future__ import annotations

import heapq
import json
import random
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Union

from .beliefs import (
    Belief,
    DistBelief,
    SetBelief,
    applicable_actions,
    bits_of,
    filter_belief,
    is_target,
    progress,
)
from .errors import (
    BudgetExceededError,
    ClosureError,
    ModelFormatError,
    WrongVariantError,
)
from .graph import (
    DEFAULT_BUDGET,
    AndOrGraph,
    Policy,
    Transition,
    belief_transitions,
    build_graph,
)
from .model import MINEXP, MINMAX, DetPomdp, initial_belief, model_hash

INF = float("inf")

SOLVED = "solved"
NO_FINITE_POLICY = "no_finite_policy"
BUDGET_EXCEEDED = "budget_exceeded"

Value = Union[Fraction, float]


@dataclass
class SolveStats:
    expanded: int = 0
    beliefs: int = 0
    seconds: float = 0.0


@dataclass
class SolveResult:
    """Outcome of a solve call.

    ``status == SOLVED`` iff ``policy`` is present and ``value`` is finite.
    ``plan`` is filled by the unobservable solver only.
    """

    status: str
    policy: Optional[Policy]
    value: Value
    stats: SolveStats = field(default_factory=SolveStats)
    plan: Optional[list[int]] = None


def _zero(criterion: str) -> Value:
    return Fraction(0) if criterion == MINMAX else 0.0


def evaluate_policy(model: DetPomdp, policy: Policy, criterion: str = MINMAX) -> Value:
    """Value of a closed policy at the initial belief.

    Infinite when the policy graph has a cycle or runs into a dead end;
    raises ClosureError when a reachable belief has no assigned action.
    """
    root = initial_belief(model, criterion)
    GRAY, BLACK = 0, 1
    state: dict[Belief, int] = {}
    values: dict[Belief, Value] = {}
    moves: dict[Belief, Transition] = {}
    stack: list[tuple[Belief, bool]] = [(root, False)]
    while stack:
        b, post = stack.pop()
        if post:
            state[b] = BLACK
            tr = moves[b]
            kids = [values[br.belief] for br in tr.branches]
            if any(v == INF for v in kids):
                values[b] = INF
            elif criterion == MINMAX:
                values[b] = tr.cost + max(kids)
            else:
                values[b] = tr.cost + sum(
                    br.prob * values[br.belief] for br in tr.branches
                )
            continue
        if state.get(b) == BLACK:
            continue
        if state.get(b) == GRAY:
            return INF  # cycle reachable from the initial belief
        if is_target(model, b):
            state[b] = BLACK
            values[b] = _zero(criterion)
            continue
        if b not in policy:
            if applicable_actions(model, b):
                raise ClosureError(b)
            state[b] = BLACK
            values[b] = INF  # dead end
            continue
        a = policy[b]
        if a not in applicable_actions(model, b):
            state[b] = BLACK
            values[b] = INF  # policy walks into a precondition violation
            continue
        tr = next(t for t in belief_transitions(model, b, criterion) if t.action == a)
        moves[b] = tr
        state[b] = GRAY
        stack.append((b, True))
        for br in tr.branches:
            if state.get(br.belief) == GRAY:
                return INF
            if state.get(br.belief) != BLACK:
                stack.append((br.belief, False))
    return values[root]


def _label_setting(graph: AndOrGraph):
    """Finalize beliefs by cheapest available one-step backup.

    Exact for worst case (backups dominate their children there).  For
    expected cost the finalized values are upper bounds reaching the target,
    and the recorded choices form a proper acyclic policy used to seed
    policy iteration.
    """
    minmax = graph.criterion == MINMAX
    nor = len(graph.beliefs)
    values: list[Optional[Value]] = [None] * nor
    choice: list[Optional[int]] = [None] * nor

    cost_of: dict[int, Value] = {}
    for edges in graph.or_edges:
        for e in edges:
            cost_of[e.and_id] = e.cost
    remaining = [len(graph.and_edges[j]) for j in range(len(graph.and_nodes))]
    dependents: dict[int, list[int]] = {}
    for j, edges in enumerate(graph.and_edges):
        for e in edges:
            dependents.setdefault(e.or_id, []).append(j)

    heap: list[tuple[Value, int, int, int]] = []

    def offer(j: int) -> None:
        or_id, action = graph.and_nodes[j]
        if values[or_id] is not None:
            return
        kids = graph.and_edges[j]
        if minmax:
            agg = max(values[e.or_id] for e in kids)
        else:
            agg = sum(e.prob * values[e.or_id] for e in kids)
        heapq.heappush(heap, (cost_of[j] + agg, action, or_id, j))

    def settle(i: int) -> None:
        for j in dependents.get(i, ()):
            remaining[j] -= 1
            if remaining[j] == 0:
                offer(j)

    for t in sorted(graph.terminals):
        values[t] = _zero(graph.criterion)
    for t in sorted(graph.terminals):
        settle(t)

    finalized = 0
    last = _zero(graph.criterion)
    while heap:
        v, action, i, j = heapq.heappop(heap)
        if values[i] is not None:
            continue
        if minmax:
            # positive costs make finalized values non-decreasing
            assert v >= last
            last = v
        values[i] = v
        choice[i] = j
        finalized += 1
        settle(i)
    return values, choice, finalized


def _evaluate_choice(graph: AndOrGraph, choice):
    """Exact value of a choice vector at every node, by DFS over its DAG."""
    nor = len(graph.beliefs)
    values: list[Optional[Value]] = [None] * nor
    for t in graph.terminals:
        values[t] = _zero(graph.criterion)
    for start in range(nor):
        if values[start] is not None or choice[start] is None:
            continue
        stack = [(start, False)]
        on_path = set()
        while stack:
            i, post = stack.pop()
            if post:
                on_path.discard(i)
                j = choice[i]
                kids = graph.and_edges[j]
                vals = [values[e.or_id] for e in kids]
                if any(v is None or v == INF for v in vals):
                    values[i] = INF
                elif graph.criterion == MINMAX:
                    values[i] = cost_of_edge(graph, i, j) + max(vals)
                else:
                    values[i] = cost_of_edge(graph, i, j) + sum(
                        e.prob * values[e.or_id] for e in kids
                    )
                continue
            if values[i] is not None:
                continue
            if choice[i] is None:
                values[i] = INF
                continue
            assert i not in on_path, "policy iteration produced a cyclic policy"
            on_path.add(i)
            stack.append((i, True))
            for e in graph.and_edges[choice[i]]:
                if values[e.or_id] is None:
                    stack.append((e.or_id, False))
    return [INF if v is None else v for v in values]


def cost_of_edge(graph: AndOrGraph, or_id: int, and_id: int) -> Value:
    for e in graph.or_edges[or_id]:
        if e.and_id == and_id:
            return e.cost
    raise KeyError((or_id, and_id))


def _policy_iteration(graph: AndOrGraph, choice):
    """Refine a proper choice vector to optimality under expected cost."""
    for _ in range(100_000):
        values = _evaluate_choice(graph, choice)
        changed = False
        for i in range(len(graph.beliefs)):
            if i in graph.terminals or choice[i] is None:
                continue
            best_j, best_q = choice[i], values[i]
            for e in graph.or_edges[i]:
                kids = graph.and_edges[e.and_id]
                if any(values[k.or_id] == INF for k in kids):
                    continue
                q = e.cost + sum(k.prob * values[k.or_id] for k in kids)
                if q < best_q - 1e-12:
                    best_q, best_j = q, e.and_id
            if best_j != choice[i]:
                choice[i] = best_j
                changed = True
        if not changed:
            return values, choice
    raise AssertionError("policy iteration failed to converge")


def _extract_policy(graph: AndOrGraph, choice) -> Policy:
    actions: dict[Belief, int] = {}
    stack = [graph.root]
    seen = set()
    while stack:
        i = stack.pop()
        if i in seen or i in graph.terminals:
            continue
        seen.add(i)
        j = choice[i]
        actions[graph.beliefs[i]] = graph.and_nodes[j][1]
        for e in graph.and_edges[j]:
            stack.append(e.or_id)
    return Policy(actions)


def solve_explicit(
    model: DetPomdp, criterion: str = MINMAX, budget: int = DEFAULT_BUDGET
) -> SolveResult:
    """Enumerate all reachable beliefs, then label-set optimal values over them."""
    t0 = time.perf_counter()
    try:
        graph = build_graph(model, criterion, budget)
    except BudgetExceededError as exc:
        stats = SolveStats(expanded=0, beliefs=exc.count, seconds=time.perf_counter() - t0)
        return SolveResult(BUDGET_EXCEEDED, None, INF, stats)
    values, choice, finalized = _label_setting(graph)
    if graph.criterion == MINEXP and values[graph.root] is not None:
        values, choice = _policy_iteration(graph, choice)
    stats = SolveStats(
        expanded=finalized,
        beliefs=len(graph.beliefs),
        seconds=time.perf_counter() - t0,
    )
    root_value = values[graph.root]
    if root_value is None or root_value == INF:
        return SolveResult(NO_FINITE_POLICY, None, INF, stats)
    return SolveResult(SOLVED, _extract_policy(graph, choice), root_value, stats)


def fullobs_distances(model: DetPomdp) -> list[Value]:
    """Shortest goal distance of each state when the state is fully known."""
    n = model.num_states
    rev: list[list[tuple[int, Fraction]]] = [[] for _ in range(n)]
    for spec in model.actions:
        for s, t in spec.effects.items():
            if s != t:
                rev[t].append((s, spec.costs[s]))
    dist: list[Value] = [INF] * n
    heap: list[tuple[Fraction, int]] = []
    for t in bits_of(model.goal):
        dist[t] = Fraction(0)
        heapq.heappush(heap, (Fraction(0), t))
    while heap:
        d, u = heapq.heappop(heap)
        if d > dist[u]:
            continue
        for s, c in rev[u]:
            nd = d + c
            if dist[s] == INF or nd < dist[s]:
                dist[s] = nd
                heapq.heappush(heap, (nd, s))
    return dist


def make_heuristic(model: DetPomdp, criterion: str, name: str) -> Callable[[Belief], Value]:
    """Admissible belief heuristics: trivial zero, or the known-state relaxation."""
    if name == "zero":
        zero = _zero(criterion)
        return lambda b: zero
    if name != "fullobs":
        raise ValueError(f"unknown heuristic {name!r}")
    dist = fullobs_distances(model)
    if criterion == MINMAX:

        def h_max(b: Belief) -> Value:
            return max(dist[s] for s in b.support())

        return h_max

    def h_exp(b: Belief) -> Value:
        total = 0.0
        for s, p in b.items():
            if dist[s] == INF:
                return INF
            total += p * float(dist[s])
        return total

    return h_exp


class _Search:
    """Best-first AND/OR search over the implicit belief graph.

    Node values start at an admissible heuristic and only ever rise; cycles
    only occur along deterministic belief edges, so every value revision
    around a cycle gains at least the cycle's (positive) cost and the
    revision loop terminates.  Beliefs that cannot possibly reach a target
    belief are priced infinite by a solvability fixpoint after each
    expansion.
    """

    def __init__(self, model: DetPomdp, criterion: str, h: Callable[[Belief], Value]):
        self.model = model
        self.criterion = criterion
        self.h = h
        self.beliefs: list[Belief] = []
        self.index: dict[Belief, int] = {}
        self.values: list[Value] = []
        self.expanded: list[bool] = []
        self.terminal: list[bool] = []
        self.arcs: list[Optional[list[Transition]]] = []
        self.arc_children: list[Optional[list[list[int]]]] = []
        self.best: list[Optional[int]] = []
        self.parents: list[set[int]] = []
        self.expansions = 0

    def node(self, belief: Belief) -> int:
        i = self.index.get(belief)
        if i is not None:
            return i
        i = len(self.beliefs)
        self.index[belief] = i
        self.beliefs.append(belief)
        term = is_target(self.model, belief)
        self.terminal.append(term)
        self.values.append(_zero(self.criterion) if term else self.h(belief))
        self.expanded.append(False)
        self.arcs.append(None)
        self.arc_children.append(None)
        self.best.append(None)
        self.parents.append(set())
        return i

    def expand(self, i: int) -> None:
        assert not self.expanded[i] and not self.terminal[i]
        trs = belief_transitions(self.model, self.beliefs[i], self.criterion)
        self.expanded[i] = True
        self.arcs[i] = trs
        kids_per_arc = []
        for tr in trs:
            kids = [self.node(br.belief) for br in tr.branches]
            for k in kids:
                self.parents[k].add(i)
            kids_per_arc.append(kids)
        self.arc_children[i] = kids_per_arc
        self.expansions += 1

    def arc_value(self, i: int, a: int) -> Value:
        tr = self.arcs[i][a]
        kids = self.arc_children[i][a]
        if i in kids:
            return INF  # stationary self-loop can never terminate
        vals = [self.values[k] for k in kids]
        if any(v == INF for v in vals):
            return INF
        if self.criterion == MINMAX:
            return tr.cost + max(vals)
        return tr.cost + sum(br.prob * self.values[k] for br, k in zip(tr.branches, kids))

    def local_value(self, i: int) -> tuple[Value, Optional[int]]:
        if self.terminal[i]:
            return _zero(self.criterion), None
        if not self.expanded[i]:
            return self.values[i], None
        best_v: Value = INF
        best_a: Optional[int] = None
        for a in range(len(self.arcs[i])):
            v = self.arc_value(i, a)
            if v < best_v:
                best_v, best_a = v, a
        return best_v, best_a

    def revise(self, dirty: set[int]) -> None:
        work = sorted(dirty)
        in_work = set(work)
        while work:
            i = work.pop()
            in_work.discard(i)
            v, a = self.local_value(i)
            if self.terminal[i] or not self.expanded[i]:
                continue
            self.best[i] = a
            if v != self.values[i]:
                # admissible start plus monotone backups: values only rise
                assert v > self.values[i] or v == INF
                self.values[i] = v
                for p in self.parents[i]:
                    if p not in in_work:
                        work.append(p)
                        in_work.add(p)

    def mark_unsolvable(self) -> set[int]:
        """Least fixpoint of 'some action keeps every outcome solvable'."""
        n = len(self.beliefs)
        solvable = [False] * n
        for i in range(n):
            if self.terminal[i]:
                solvable[i] = True
            elif not self.expanded[i] and self.values[i] != INF:
                solvable[i] = True
        changed = True
        while changed:
            changed = False
            for i in range(n):
                if solvable[i] or not self.expanded[i] or self.terminal[i]:
                    continue
                for kids in self.arc_children[i]:
                    if all(solvable[k] for k in kids):
                        solvable[i] = True
                        changed = True
                        break
        newly = set()
        for i in range(n):
            if not solvable[i] and self.values[i] != INF:
                self.values[i] = INF
                newly.add(i)
        return newly

    def trace_psg(self, root: int):
        """Best partial solution graph: (tips with depth, nodes with actions)."""
        tips: list[tuple[int, int]] = []
        chosen: dict[int, int] = {}
        seen: dict[int, int] = {}
        stack = [(root, 0)]
        guard = 0
        while stack:
            guard += 1
            assert guard < 10**7, "partial solution graph traversal ran away"
            i, depth = stack.pop()
            if seen.get(i, -1) >= depth:
                continue
            seen[i] = depth
            if self.terminal[i]:
                continue
            if not self.expanded[i]:
                tips.append((depth, i))
                continue
            a = self.best[i]
            if a is None:
                continue
            chosen[i] = a
            for k in self.arc_children[i][a]:
                stack.append((k, depth + 1))
        return tips, chosen


def solve_heuristic(
    model: DetPomdp,
    criterion: str = MINMAX,
    heuristic: str = "zero",
    budget: int = DEFAULT_BUDGET,
) -> SolveResult:
    """AO*-style incremental search guided by an admissible heuristic."""
    t0 = time.perf_counter()
    search = _Search(model, criterion, make_heuristic(model, criterion, heuristic))
    root = search.node(initial_belief(model, criterion))
    while True:
        if search.values[root] == INF:
            stats = SolveStats(search.expansions, len(search.beliefs), time.perf_counter() - t0)
            return SolveResult(NO_FINITE_POLICY, None, INF, stats)
        tips, chosen = search.trace_psg(root)
        if not tips:
            actions = {
                search.beliefs[i]: search.arcs[i][a].action for i, a in chosen.items()
            }
            stats = SolveStats(search.expansions, len(search.beliefs), time.perf_counter() - t0)
            return SolveResult(SOLVED, Policy(actions), search.values[root], stats)
        _, tip = max(tips)  # deepest first, ties to the latest traced
        search.expand(tip)
        if len(search.beliefs) > budget:
            stats = SolveStats(search.expansions, len(search.beliefs), time.perf_counter() - t0)
            return SolveResult(BUDGET_EXCEEDED, None, INF, stats)
        work = {tip}
        for i in search.mark_unsolvable():
            work.add(i)
            work.update(search.parents[i])
        search.revise(work)


def solve_unobservable(
    model: DetPomdp, criterion: str = MINMAX, budget: int = DEFAULT_BUDGET
) -> SolveResult:
    """Uniform-cost search for a cheapest linear plan of an unobservable model."""
    if model.num_observations != 1:
        raise WrongVariantError(
            f"model has {model.num_observations} observations, expected 1"
        )
    t0 = time.perf_counter()
    root = initial_belief(model, criterion)
    dist: dict[Belief, Value] = {root: _zero(criterion)}
    parent: dict[Belief, tuple[Belief, int]] = {}
    heap: list[tuple[Value, int, Belief]] = [(dist[root], 0, root)]
    counter = 1
    popped = 0
    closed: set[Belief] = set()
    while heap:
        d, _, b = heapq.heappop(heap)
        if b in closed:
            continue
        closed.add(b)
        popped += 1
        if is_target(model, b):
            plan: list[int] = []
            actions: dict[Belief, int] = {}
            cur = b
            while cur in parent:
                prev, a = parent[cur]
                plan.append(a)
                actions[prev] = a
                cur = prev
            plan.reverse()
            stats = SolveStats(popped, len(dist), time.perf_counter() - t0)
            return SolveResult(SOLVED, Policy(actions), d, stats, plan=plan)
        for tr in belief_transitions(model, b, criterion):
            assert len(tr.branches) == 1
            nb = tr.branches[0].belief
            nd = d + tr.cost
            if nb not in dist or nd < dist[nb]:
                dist[nb] = nd
                parent[nb] = (b, tr.action)
                heapq.heappush(heap, (nd, counter, nb))
                counter += 1
                if len(dist) > budget:
                    stats = SolveStats(popped, len(dist), time.perf_counter() - t0)
                    return SolveResult(BUDGET_EXCEEDED, None, INF, stats)
    stats = SolveStats(popped, len(dist), time.perf_counter() - t0)
    return SolveResult(NO_FINITE_POLICY, None, INF, stats)


@dataclass(frozen=True)
class SimStep:
    belief: Belief
    action: int
    cost: Fraction
    obs: int
    next_belief: Belief


@dataclass
class SimTrace:
    steps: list[SimStep]
    total_cost: Fraction
    final_belief: Belief
    reached: bool


def simulate(
    model: DetPomdp,
    policy: Policy,
    true_state: int,
    criterion: str = MINMAX,
    max_steps: int = 10_000,
) -> SimTrace:
    """Execute a policy against one concrete initial state, recording each step."""
    b = initial_belief(model, criterion)
    if true_state not in b.support():
        raise ValueError(f"state {true_state} is outside the initial belief")
    s = true_state
    total = Fraction(0)
    steps: list[SimStep] = []
    while not is_target(model, b) and len(steps) < max_steps:
        if b not in policy:
            raise ClosureError(b)
        a = policy[b]
        cost = model.actions[a].costs[s]
        after = progress(model, b, a)
        s_next = model.actions[a].effects[s]
        obs = model.observation(s_next, a)
        b_next = filter_belief(model, after, a, obs)
        steps.append(SimStep(b, a, cost, obs, b_next))
        total += cost
        b, s = b_next, s_next
    return SimTrace(steps, total, b, reached=is_target(model, b))


def mc_policy_value(
    model: DetPomdp,
    policy: Policy,
    criterion: str = MINEXP,
    runs: int = 100_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte-Carlo estimate of a policy's value: (mean, standard error)."""
    rng = random.Random(seed)
    b0 = initial_belief(model, criterion)
    if isinstance(b0, DistBelief):
        starts = list(b0.states)
        weights = list(b0.probs)
    else:
        starts = list(b0.support())
        weights = [1.0] * len(starts)

    # Flatten the policy-reachable fragment for a fast inner loop.
    table: dict[Belief, tuple[int, dict[int, Belief]]] = {}
    stack = [b0]
    while stack:
        b = stack.pop()
        if b in table or is_target(model, b):
            continue
        if b not in policy:
            raise ClosureError(b)
        a = policy[b]
        after = progress(model, b, a)
        succ: dict[int, Belief] = {}
        row = model.obs_fn[a]
        for o in sorted({row[s] for s in after.support()}):
            child = filter_belief(model, after, a, o)
            succ[o] = child
            stack.append(child)
        table[b] = (a, succ)

    eff = [spec.effects for spec in model.actions]
    cost = [{s: float(c) for s, c in spec.costs.items()} for spec in model.actions]
    obs = model.obs_fn

    total = 0.0
    total_sq = 0.0
    for _ in range(runs):
        s = rng.choices(starts, weights)[0]
        b = b0
        acc = 0.0
        hops = 0
        while b in table:
            a, succ = table[b]
            acc += cost[a][s]
            s = eff[a][s]
            b = succ[obs[a][s]]
            hops += 1
            assert hops <= 100_000, "simulation did not terminate"
        total += acc
        total_sq += acc * acc
    mean = total / runs
    var = max(0.0, total_sq / runs - mean * mean)
    stderr = (var / runs) ** 0.5
    return mean, stderr


def format_value(value: Value, criterion: str) -> str:
    """Canonical value text: exact rationals for worst case, 9 digits otherwise."""
    if value == INF:
        return "inf"
    if criterion == MINMAX:
        f = Fraction(value)
        return str(f.numerator) if f.denominator == 1 else f"{f.numerator}/{f.denominator}"
    return format(float(value), ".9g")


def save_policy(model: DetPomdp, policy: Policy, criterion: str, value: Value) -> str:
    """Serialize a policy with a header tying it to its model."""
    entries = []
    for belief, action in sorted(policy.items(), key=lambda kv: kv[0].support()):
        entry: dict = {"support": list(belief.support())}
        if isinstance(belief, DistBelief):
            entry["probs"] = list(belief.probs)
        entry["action"] = model.actions[action].name
        entries.append(entry)
    doc = {
        "criterion": criterion,
        "value": format_value(value, criterion),
        "model_hash": model_hash(model),
        "entries": entries,
    }
    return json.dumps(doc, indent=1) + "\n"


def load_policy(model: DetPomdp, text: str) -> tuple[Policy, str, str]:
    """Parse a policy file; returns (policy, criterion, stored value text)."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"policy parse error at line {exc.lineno}: {exc.msg}")
    criterion = doc.get("criterion")
    if criterion not in (MINMAX, MINEXP):
        raise ModelFormatError(f"policy.criterion: {criterion!r}")
    if doc.get("model_hash") != model_hash(model):
        raise ModelFormatError("policy.model_hash: does not match the model")
    actions: dict[Belief, int] = {}
    for k, entry in enumerate(doc.get("entries", [])):
        support = entry.get("support")
        name = entry.get("action")
        if not isinstance(support, list) or not support:
            raise ModelFormatError(f"policy.entries[{k}].support: non-empty list required")
        try:
            action = model.action_index(name)
        except KeyError:
            raise ModelFormatError(f"policy.entries[{k}].action: unknown action {name!r}")
        if "probs" in entry:
            probs = entry["probs"]
            if len(probs) != len(support):
                raise ModelFormatError(f"policy.entries[{k}].probs: length mismatch")
            belief: Belief = DistBelief(dict(zip(support, probs)))
        else:
            belief = SetBelief.of(support)
        actions[belief] = action
    return Policy(actions), criterion, doc.get("value", "")
