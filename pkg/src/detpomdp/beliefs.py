"""Belief representations and belief dynamics.

A belief is the agent's knowledge about the current state: a set of states
for worst-case reasoning, a sparse distribution for expected-cost reasoning,
or a hypothesis table mapping each possible initial state to the state it
would have evolved into by now.  All three are immutable values; set supports
are stored as int bitsets.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import TYPE_CHECKING, Iterable, Optional, Union

from .errors import ImpossibleObservationError, PreconditionError

if TYPE_CHECKING:
    from .model import DetPomdp

PROB_SUM_TOL = 1e-9
_PROB_KEY_DIGITS = 12


def bits_of(mask: int) -> tuple[int, ...]:
    """Indices of the set bits of ``mask``, ascending."""
    out = []
    i = 0
    while mask:
        if mask & 1:
            out.append(i)
        mask >>= 1
        i += 1
    return tuple(out)


def mask_of(states: Iterable[int]) -> int:
    mask = 0
    for s in states:
        mask |= 1 << s
    return mask


@dataclass(frozen=True)
class SetBelief:
    """Non-empty set of possible states, stored as a bitset."""

    mask: int

    def __post_init__(self):
        if self.mask <= 0:
            raise ValueError("set belief must be a non-empty state set")

    @staticmethod
    def of(states: Iterable[int]) -> "SetBelief":
        return SetBelief(mask_of(states))

    def support(self) -> tuple[int, ...]:
        return bits_of(self.mask)

    def support_mask(self) -> int:
        return self.mask

    def size(self) -> int:
        return self.mask.bit_count()

    def __repr__(self):
        return "SetBelief{%s}" % ",".join(map(str, self.support()))


class DistBelief:
    """Sparse probability distribution over states.

    Stored entries all have positive probability and sum to one (within
    1e-9).  Equality and hashing use the support plus probabilities rounded
    to 12 decimal digits, so beliefs reached along different arithmetic
    paths collapse to one canonical node.
    """

    __slots__ = ("states", "probs", "_key")

    def __init__(self, items):
        pairs = sorted(dict(items).items())
        if not pairs:
            raise ValueError("distribution belief must have non-empty support")
        if any(p <= 0.0 for _, p in pairs):
            raise ValueError("distribution belief stores only positive entries")
        total = sum(p for _, p in pairs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        self.states = tuple(s for s, _ in pairs)
        self.probs = tuple(p for _, p in pairs)
        self._key = (self.states, tuple(round(p, _PROB_KEY_DIGITS) for p in self.probs))

    def items(self) -> tuple[tuple[int, float], ...]:
        return tuple(zip(self.states, self.probs))

    def prob(self, state: int) -> float:
        try:
            return self.probs[self.states.index(state)]
        except ValueError:
            return 0.0

    def support(self) -> tuple[int, ...]:
        return self.states

    def support_mask(self) -> int:
        return mask_of(self.states)

    def size(self) -> int:
        return len(self.states)

    def __eq__(self, other):
        return isinstance(other, DistBelief) and self._key == other._key

    def __hash__(self):
        return hash(self._key)

    def __repr__(self):
        body = ",".join(f"{s}:{p:.6g}" for s, p in self.items())
        return "DistBelief{%s}" % body


Belief = Union[SetBelief, DistBelief]


@dataclass(frozen=True)
class LittmanTable:
    """Hypothesis table: entry i is the current state had the initial state been i.

    ``None`` marks initial states already ruled out by observations.
    """

    entries: tuple[Optional[int], ...]

    def __post_init__(self):
        if all(e is None for e in self.entries):
            raise ValueError("hypothesis table must keep at least one entry")

    def support_mask(self) -> int:
        return mask_of(e for e in self.entries if e is not None)


def applicable_actions(model: "DetPomdp", belief: Belief) -> tuple[int, ...]:
    """Actions applicable at every state of the belief's support, ascending."""
    mask = belief.support_mask()
    return tuple(
        a for a, spec in enumerate(model.actions) if mask & ~spec.applicable == 0
    )


def _check_applicable(model, belief, action):
    bad = belief.support_mask() & ~model.actions[action].applicable
    if bad:
        raise PreconditionError(action, bits_of(bad)[0])


def progress(model: "DetPomdp", belief: Belief, action: int) -> Belief:
    """Image of the belief under the action's transition function."""
    _check_applicable(model, belief, action)
    effects = model.actions[action].effects
    if isinstance(belief, SetBelief):
        return SetBelief(mask_of(effects[s] for s in belief.support()))
    acc: dict[int, float] = {}
    for s, p in belief.items():
        t = effects[s]
        acc[t] = acc.get(t, 0.0) + p
    return DistBelief(acc)


def observation_set(model: "DetPomdp", belief: Belief, action: int) -> tuple[int, ...]:
    """Observations that can be received when applying the action at the belief."""
    after = progress(model, belief, action)
    row = model.obs_fn[action]
    return tuple(sorted({row[s] for s in after.support()}))


def observation_probs(model: "DetPomdp", belief: DistBelief, action: int) -> dict[int, float]:
    """Probability of each observation after applying the action at the belief."""
    after = progress(model, belief, action)
    row = model.obs_fn[action]
    out: dict[int, float] = {}
    for s, p in after.items():
        o = row[s]
        out[o] = out.get(o, 0.0) + p
    return dict(sorted(out.items()))


def filter_belief(model: "DetPomdp", progressed: Belief, action: int, obs: int) -> Belief:
    """Restrict a progressed belief to the states consistent with an observation."""
    row = model.obs_fn[action]
    if isinstance(progressed, SetBelief):
        mask = mask_of(s for s in progressed.support() if row[s] == obs)
        if mask == 0:
            raise ImpossibleObservationError(
                f"observation {obs} inconsistent with every state after action {action}"
            )
        return SetBelief(mask)
    kept = [(s, p) for s, p in progressed.items() if row[s] == obs]
    if not kept:
        raise ImpossibleObservationError(
            f"observation {obs} inconsistent with every state after action {action}"
        )
    total = sum(p for _, p in kept)
    return DistBelief({s: p / total for s, p in kept})


def is_target(model: "DetPomdp", belief: Belief) -> bool:
    """True when every possible state is a goal state."""
    return belief.support_mask() & ~model.goal == 0


def table_init(model: "DetPomdp") -> LittmanTable:
    """Table for the initial belief: each possible initial state maps to itself."""
    sup = model.initial.support_mask()
    return LittmanTable(
        tuple(i if sup >> i & 1 else None for i in range(model.num_states))
    )


def table_step(model: "DetPomdp", table: LittmanTable, action: int, obs: int) -> LittmanTable:
    """Advance every surviving hypothesis by one (action, observation) step."""
    effects = model.actions[action].effects
    row = model.obs_fn[action]
    out = []
    for cur in table.entries:
        if cur is None:
            out.append(None)
            continue
        nxt = effects[cur]
        out.append(nxt if row[nxt] == obs else None)
    if all(e is None for e in out):
        raise ImpossibleObservationError(
            f"observation {obs} rules out every hypothesis under action {action}"
        )
    return LittmanTable(tuple(out))


def table_to_belief(model: "DetPomdp", table: LittmanTable) -> DistBelief:
    """Distribution the table represents: initial-state mass pushed onto current states.

    A set-valued initial belief is treated as uniform over its support.
    """
    initial = model.initial
    if isinstance(initial, DistBelief):
        weight = dict(initial.items())
    else:
        sup = initial.support()
        weight = {s: 1.0 / len(sup) for s in sup}
    acc: dict[int, float] = {}
    for i, cur in enumerate(table.entries):
        if cur is None or i not in weight:
            continue
        acc[cur] = acc.get(cur, 0.0) + weight[i]
    total = sum(acc.values())
    return DistBelief({s: p / total for s, p in acc.items()})
