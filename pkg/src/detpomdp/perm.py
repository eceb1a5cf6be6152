"""Structural analysis: permutation actions, group membership, model diameter.

Actions that permute the whole state space make belief supports cycle instead
of shrink, which is what blows up plan lengths.  This module classifies
actions as permutations, decides membership in the group they generate via a
deterministic stabilizer chain, checks policy-existence certificates for the
all-permutation unobservable class, and measures or bounds model diameters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

from .beliefs import SetBelief, bits_of, is_target
from .errors import BudgetExceededError, WrongClassError
from .graph import DEFAULT_BUDGET, belief_transitions, reachable_beliefs
from .model import MINMAX, ActionSpec, DetPomdp, transition_graph


@dataclass(frozen=True)
class Permutation:
    """A bijection on 0..n-1 stored as its image tuple."""

    mapping: tuple[int, ...]

    def __post_init__(self):
        if sorted(self.mapping) != list(range(len(self.mapping))):
            raise ValueError("mapping is not a permutation")

    @staticmethod
    def identity(n: int) -> "Permutation":
        return Permutation(tuple(range(n)))

    @staticmethod
    def from_cycles(n: int, cycles: Sequence[Sequence[int]]) -> "Permutation":
        img = list(range(n))
        for cyc in cycles:
            for a, b in zip(cyc, cyc[1:]):
                img[a] = b
            if cyc:
                img[cyc[-1]] = cyc[0]
        return Permutation(tuple(img))

    def degree(self) -> int:
        return len(self.mapping)

    def __call__(self, point: int) -> int:
        return self.mapping[point]

    def then(self, other: "Permutation") -> "Permutation":
        """Apply self first, then other."""
        return Permutation(tuple(other.mapping[i] for i in self.mapping))

    def inverse(self) -> "Permutation":
        inv = [0] * len(self.mapping)
        for i, j in enumerate(self.mapping):
            inv[j] = i
        return Permutation(tuple(inv))

    def power(self, k: int) -> "Permutation":
        if k < 0:
            return self.inverse().power(-k)
        out = Permutation.identity(len(self.mapping))
        base = self
        while k:
            if k & 1:
                out = out.then(base)
            base = base.then(base)
            k >>= 1
        return out

    def is_identity(self) -> bool:
        return all(i == j for i, j in enumerate(self.mapping))

    def moved(self) -> tuple[int, ...]:
        return tuple(i for i, j in enumerate(self.mapping) if i != j)


def cycle_decomposition(perm: Permutation) -> tuple[tuple[int, ...], ...]:
    """Disjoint cycles covering all points, fixed points included as 1-cycles."""
    seen = set()
    cycles = []
    for start in range(perm.degree()):
        if start in seen:
            continue
        cyc = [start]
        seen.add(start)
        j = perm(start)
        while j != start:
            cyc.append(j)
            seen.add(j)
            j = perm(j)
        cycles.append(tuple(cyc))
    return tuple(cycles)


def perm_order(perm: Permutation) -> int:
    """Least positive power giving the identity: lcm of the cycle lengths."""
    return math.lcm(*(len(c) for c in cycle_decomposition(perm)))


@dataclass(frozen=True)
class PermutationFailure:
    """Why an action is not a permutation with empty precondition."""

    kind: str  # "partial" or "not_injective"
    witnesses: tuple[int, ...]


def action_as_permutation(model: DetPomdp, action: int) -> Union[Permutation, PermutationFailure]:
    """The action's transition function as a permutation, or the reason it is not one."""
    spec = model.actions[action]
    missing = ~spec.applicable & model.all_states_mask()
    if missing:
        return PermutationFailure("partial", bits_of(missing))
    images: dict[int, list[int]] = {}
    for s in range(model.num_states):
        images.setdefault(spec.effects[s], []).append(s)
    for t, sources in sorted(images.items()):
        if len(sources) > 1:
            return PermutationFailure("not_injective", tuple(sources))
    return Permutation(tuple(spec.effects[s] for s in range(model.num_states)))


class StabilizerChain:
    """Deterministic Schreier-Sims chain with base points tried in order 0..n-1.

    ``strong`` is the strong generating set; level i uses the strong
    generators fixing the first i base points, and stores the transversal of
    the i-th basepoint's orbit under them.  After every addition the chain is
    rebuilt and re-closed under Schreier generators until sifting them all
    yields the identity, which certifies the set is strong.  Membership
    testing sifts through the chain level by level.
    """

    def __init__(self, degree: int):
        self.degree = degree
        self.bases: list[int] = []
        self.strong: list[Permutation] = []
        self.transversals: list[dict[int, Permutation]] = []

    def order(self) -> int:
        total = 1
        for tv in self.transversals:
            total *= len(tv)
        return total

    def _level_gens(self, level: int) -> list[Permutation]:
        prefix = self.bases[:level]
        return [g for g in self.strong if all(g(b) == b for b in prefix)]

    def _ensure_base(self, perm: Permutation) -> None:
        if all(perm(b) == b for b in self.bases):
            self.bases.append(next(i for i in range(self.degree) if perm(i) != i))

    def _rebuild(self) -> None:
        self.transversals = []
        for level, base in enumerate(self.bases):
            gens = self._level_gens(level)
            tv = {base: Permutation.identity(self.degree)}
            frontier = [base]
            while frontier:
                point = frontier.pop(0)
                for g in gens:
                    nxt = g(point)
                    if nxt not in tv:
                        tv[nxt] = tv[point].then(g)
                        frontier.append(nxt)
            self.transversals.append(tv)

    def _failing_schreier(self) -> Optional[Permutation]:
        for level in range(len(self.bases)):
            tv = self.transversals[level]
            gens = self._level_gens(level)
            for point in sorted(tv):
                rep = tv[point]
                for g in gens:
                    schreier = rep.then(g).then(tv[g(point)].inverse())
                    residue, _ = self.sift(schreier)
                    if not residue.is_identity():
                        return residue
        return None

    def sift(self, perm: Permutation) -> tuple[Permutation, int]:
        """Strip through the chain; returns the residue and the stopping level."""
        g = perm
        for level, base in enumerate(self.bases):
            img = g(base)
            rep = self.transversals[level].get(img)
            if rep is None:
                return g, level
            g = g.then(rep.inverse())
        return g, len(self.bases)

    def extend(self, perm: Permutation) -> None:
        residue, _ = self.sift(perm) if self.bases else (perm, 0)
        if residue.is_identity():
            return
        self.strong.append(residue)
        self._ensure_base(residue)
        self._rebuild()
        while True:
            bad = self._failing_schreier()
            if bad is None:
                return
            self.strong.append(bad)
            self._ensure_base(bad)
            self._rebuild()

    def contains(self, perm: Permutation) -> bool:
        residue, _ = self.sift(perm)
        return residue.is_identity()


def build_chain(generators: Sequence[Permutation]) -> StabilizerChain:
    degrees = {g.degree() for g in generators}
    if len(degrees) > 1:
        raise ValueError("generators act on different point counts")
    degree = degrees.pop() if degrees else 0
    chain = StabilizerChain(degree)
    for g in generators:
        chain.extend(g)
    return chain


def group_membership(generators: Sequence[Permutation], sigma: Permutation) -> bool:
    """Is sigma a composition of the generators?  Polynomial via sifting."""
    if not generators:
        return sigma.is_identity()
    if sigma.degree() != generators[0].degree():
        raise ValueError("sigma acts on a different point count than the generators")
    return build_chain(generators).contains(sigma)


def pef_certificate_check(model: DetPomdp, sigma: Permutation) -> bool:
    """Certify a finite-cost plan exists for an all-permutation unobservable model.

    True iff sigma maps the initial support into the goal set and is generated
    by the actions; any generated permutation is realizable as an action
    sequence, so a true answer certifies a plan.
    """
    if model.num_observations != 1:
        raise WrongClassError("certificate check requires an unobservable model")
    perms = []
    for a in range(len(model.actions)):
        p = action_as_permutation(model, a)
        if isinstance(p, PermutationFailure):
            raise WrongClassError(
                f"action {a} is not a permutation with empty precondition ({p.kind})"
            )
        perms.append(p)
    if sigma.degree() != model.num_states:
        raise ValueError("sigma acts on the wrong number of states")
    if any(not model.is_goal_state(sigma(s)) for s in model.initial.support()):
        return False
    return group_membership(perms, sigma)


CONSTANT_SUPPORT = "polynomial_by_constant_support"
ACYCLIC_TM = "polynomial_by_acyclic_tm"
BOUNDED_CYCLES = "bounded_cycle_lengths"
BOUNDED_MOVES = "bounded_support_moves"
UNKNOWN = "unknown"


@dataclass
class DiameterReport:
    """Verdict of the polynomial-diameter sufficient conditions, with witness data."""

    verdict: str
    support_size: int
    support_bound: int
    cycle_bound: int
    move_bound: int
    topo_order: Optional[tuple[int, ...]] = None
    tm_cycle: Optional[tuple[int, ...]] = None
    max_cycle_len: Optional[int] = None
    max_moved: Optional[int] = None

    def to_text(self) -> str:
        lines = [f"diameter verdict: {self.verdict}"]
        lines.append(f"initial support size: {self.support_size} (bound {self.support_bound})")
        if self.topo_order is not None:
            lines.append(
                "transition graph acyclic modulo self-loops; topological order: "
                + ",".join(map(str, self.topo_order))
            )
        if self.tm_cycle is not None:
            lines.append(
                "transition graph cycle: " + "->".join(map(str, self.tm_cycle))
            )
        if self.max_cycle_len is not None:
            lines.append(
                f"max action cycle length: {self.max_cycle_len} (bound {self.cycle_bound})"
            )
        if self.max_moved is not None:
            lines.append(f"max states moved: {self.max_moved} (bound {self.move_bound})")
        return "\n".join(lines) + "\n"


def _topological_order(succ: Sequence[frozenset[int]]):
    """Kahn's algorithm ignoring self-loops; returns (order, None) or (None, cycle)."""
    n = len(succ)
    indeg = [0] * n
    for i, outs in enumerate(succ):
        for j in outs:
            if j != i:
                indeg[j] += 1
    ready = [i for i in range(n) if indeg[i] == 0]
    order = []
    while ready:
        ready.sort()
        i = ready.pop(0)
        order.append(i)
        for j in succ[i]:
            if j != i:
                indeg[j] -= 1
                if indeg[j] == 0:
                    ready.append(j)
    if len(order) == n:
        return tuple(order), None
    # every leftover node keeps an unprocessed predecessor, so walking
    # backwards inside the leftover set must close a cycle
    leftover = {i for i in range(n) if indeg[i] > 0}
    pred: dict[int, list[int]] = {i: [] for i in leftover}
    for i in leftover:
        for j in succ[i]:
            if j != i and j in leftover:
                pred[j].append(i)
    start = min(leftover)
    path, seen = [start], {start: 0}
    while True:
        cur = path[-1]
        prv = min(pred[cur])
        if prv in seen:
            cycle = path[seen[prv]:]
            cycle.reverse()
            return None, tuple([prv] + cycle)
        seen[prv] = len(path)
        path.append(prv)


def diameter_conditions(
    model: DetPomdp,
    support_bound: int = 3,
    cycle_bound: int = 3,
    move_bound: int = 3,
) -> DiameterReport:
    """Check the polynomial-diameter sufficient conditions, first hit wins."""
    support_size = model.initial.support_mask().bit_count()
    report = DiameterReport(
        verdict=UNKNOWN,
        support_size=support_size,
        support_bound=support_bound,
        cycle_bound=cycle_bound,
        move_bound=move_bound,
    )
    if support_size <= support_bound:
        report.verdict = CONSTANT_SUPPORT
        return report
    order, cycle = _topological_order(transition_graph(model))
    if order is not None:
        report.verdict = ACYCLIC_TM
        report.topo_order = order
        return report
    report.tm_cycle = cycle
    perms = []
    for a in range(len(model.actions)):
        p = action_as_permutation(model, a)
        if isinstance(p, PermutationFailure):
            return report
        perms.append(p)
    report.max_cycle_len = max(
        len(c) for p in perms for c in cycle_decomposition(p)
    )
    if report.max_cycle_len <= cycle_bound:
        report.verdict = BOUNDED_CYCLES
        return report
    report.max_moved = max(len(p.moved()) for p in perms)
    if report.max_moved <= move_bound:
        report.verdict = BOUNDED_MOVES
    return report


def measure_diameter(model: DetPomdp, budget: int = DEFAULT_BUDGET) -> int:
    """Exact diameter by per-belief BFS over equal-support-size reachable beliefs.

    Oracle-grade and exponential in the worst case; the budget caps total BFS
    visits.
    """
    beliefs = reachable_beliefs(model, MINMAX, budget)
    visits = 0
    diameter = 0
    for src in beliefs:
        size = src.size()
        dist = {src: 0}
        frontier = [src]
        ecc = 0
        while frontier:
            nxt = []
            for b in frontier:
                visits += 1
                if visits > budget:
                    raise BudgetExceededError(visits, "bfs visits")
                if is_target(model, b):
                    continue
                for tr in belief_transitions(model, b, MINMAX):
                    for br in tr.branches:
                        if br.belief.size() == size and br.belief not in dist:
                            dist[br.belief] = dist[b] + 1
                            ecc = max(ecc, dist[br.belief])
                            nxt.append(br.belief)
            frontier = nxt
        diameter = max(diameter, ecc)
    return diameter


def chunk_profile(beliefs: Sequence) -> list[tuple[int, int]]:
    """Segment a belief sequence into maximal equal-support-size chunks.

    Returns (support size, chunk length) pairs; the number of jumps is one
    less than the number of chunks and can never exceed the initial support.
    """
    sizes = [b.size() for b in beliefs]
    if any(a < b for a, b in zip(sizes, sizes[1:])):
        raise ValueError("support sizes must be non-increasing along an execution")
    chunks: list[tuple[int, int]] = []
    for size in sizes:
        if chunks and chunks[-1][0] == size:
            chunks[-1] = (size, chunks[-1][1] + 1)
        else:
            chunks.append((size, 1))
    if chunks:
        assert len(chunks) - 1 <= max(sizes)
    return chunks


def sieve_primes(limit: int) -> list[int]:
    if limit < 2:
        return []
    flags = bytearray([1]) * (limit + 1)
    flags[0] = flags[1] = 0
    for i in range(2, int(limit**0.5) + 1):
        if flags[i]:
            flags[i * i :: i] = bytearray(len(flags[i * i :: i]))
    return [i for i, f in enumerate(flags) if f]


def pack_primes(n: int) -> list[int]:
    """Largest set of distinct primes with sum at most n (ascending greedy)."""
    out, total = [], 0
    for p in sieve_primes(max(n, 2)):
        if total + p <= n:
            out.append(p)
            total += p
        else:
            break
    return out


def build_cycle_instance(cycle_lengths: Sequence[int], pad_to: int = 0) -> DetPomdp:
    """Unobservable model whose cheapest plan cycles through all phases.

    One action advances every cycle simultaneously; a finish action, applicable
    only when every possible state sits at its cycle's end, maps those ends to
    the single goal state.  The initial belief holds each cycle's start, so the
    cheapest plan advances lcm(lengths) - 1 times and then finishes.
    """
    if not cycle_lengths or any(length < 1 for length in cycle_lengths):
        raise ValueError("cycle lengths must be positive")
    layout = []
    pos = 0
    for length in cycle_lengths:
        layout.append(list(range(pos, pos + length)))
        pos += length
    base = max(pos, pad_to)  # extra states are fixed points of the advance action
    goal = base
    n = base + 1

    advance = {goal: goal}
    for states in layout:
        for k, s in enumerate(states):
            advance[s] = states[(k + 1) % len(states)]
    for s in range(pos, base):
        advance[s] = s

    ends = [states[-1] for states in layout]
    finish_app = sorted(ends) + [goal]
    finish_eff = {s: goal for s in ends}
    finish_eff[goal] = goal

    actions = (
        ActionSpec(
            name="advance",
            applicable=(1 << n) - 1,
            effects=dict(sorted(advance.items())),
            costs={s: Fraction(0 if s == goal else 1) for s in range(n)},
        ),
        ActionSpec(
            name="finish",
            applicable=sum(1 << s for s in finish_app),
            effects=dict(sorted(finish_eff.items())),
            costs={s: Fraction(0 if s == goal else 1) for s in finish_app},
        ),
    )
    return DetPomdp(
        num_states=n,
        num_observations=1,
        actions=actions,
        obs_fn=((0,) * n, (0,) * n),
        goal=1 << goal,
        initial=SetBelief.of(states[0] for states in layout),
    )


def build_rotation_model(cycle_lengths: Sequence[int], goal_at_end: bool = True) -> DetPomdp:
    """All-permutation unobservable model: one rotation action, goals at cycle ends.

    Goals are not absorbing here; this is the certificate-check class, where
    reaching a goal support ends execution but permutations keep moving states.
    """
    if not cycle_lengths or any(length < 1 for length in cycle_lengths):
        raise ValueError("cycle lengths must be positive")
    layout = []
    pos = 0
    for length in cycle_lengths:
        layout.append(list(range(pos, pos + length)))
        pos += length
    n = pos
    advance = {}
    for states in layout:
        for k, s in enumerate(states):
            advance[s] = states[(k + 1) % len(states)]
    action = ActionSpec(
        name="rotate",
        applicable=(1 << n) - 1,
        effects=dict(sorted(advance.items())),
        costs={s: Fraction(1) for s in range(n)},
    )
    goal = sum(1 << states[-1] for states in layout) if goal_at_end else 0
    return DetPomdp(
        num_states=n,
        num_observations=1,
        actions=(action,),
        obs_fn=((0,) * n,),
        goal=goal,
        initial=SetBelief.of(states[0] for states in layout),
    )


def build_large_order_instance(n: int) -> DetPomdp:
    """Cycle instance over at most n+1 states with cycle lengths packed for large order.

    Distinct primes maximize the lcm relative to their sum; greedily packing
    as many as fit below n makes the optimal plan length grow faster than any
    fixed power of n.
    """
    if n < 2:
        raise ValueError("need at least 2 states to fit a cycle")
    primes = pack_primes(n)
    if not primes:
        primes = [2]
    return build_cycle_instance(primes, pad_to=n)
