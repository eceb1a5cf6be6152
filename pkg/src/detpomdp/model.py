"""Flat deterministic-POMDP models: construction, validation, serialization.

A model is the tuple (states, actions with preconditions, observations,
initial belief, goal set, transition function, observation function, costs).
States, actions and observations are dense integer indices; state sets are
int bitsets.  Worst-case arithmetic uses exact rationals, so costs are stored
as ``Fraction``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

from .beliefs import (
    PROB_SUM_TOL,
    Belief,
    DistBelief,
    SetBelief,
    bits_of,
    mask_of,
)
from .errors import ModelFormatError

MINMAX = "minmax"
MINEXP = "minexp"
CRITERIA = (MINMAX, MINEXP)


@dataclass(frozen=True)
class ActionSpec:
    """One action: name, precondition bitset, and per-state effect and cost.

    ``effects`` and ``costs`` are defined exactly on the states of
    ``applicable``.
    """

    name: str
    applicable: int
    effects: Mapping[int, int]
    costs: Mapping[int, Fraction]


@dataclass(frozen=True)
class DetPomdp:
    """A deterministic POMDP.  Immutable after construction; validation is separate.

    ``obs_fn[a][s]`` is the observation received when entering state ``s``
    after applying action ``a``; it is total on states x actions.
    ``goal`` is the bitset of goal states, assumed absorbing by ``validate``.
    """

    num_states: int
    num_observations: int
    actions: tuple[ActionSpec, ...]
    obs_fn: tuple[tuple[int, ...], ...]
    goal: int
    initial: Belief

    def observation(self, state: int, action: int) -> int:
        return self.obs_fn[action][state]

    def is_goal_state(self, state: int) -> bool:
        return bool(self.goal >> state & 1)

    def all_states_mask(self) -> int:
        return (1 << self.num_states) - 1

    def action_index(self, name: str) -> int:
        for a, spec in enumerate(self.actions):
            if spec.name == name:
                return a
        raise KeyError(name)


def make_action(
    name: str,
    applicable: Iterable[int],
    effects: Mapping[int, int],
    costs: Mapping[int, Union[int, Fraction]],
) -> ActionSpec:
    """Build an ActionSpec from plain collections, normalizing cost values."""
    return ActionSpec(
        name=name,
        applicable=mask_of(applicable),
        effects={int(s): int(t) for s, t in sorted(effects.items())},
        costs={int(s): Fraction(c) for s, c in sorted(costs.items())},
    )


def initial_belief(model: DetPomdp, criterion: str) -> Belief:
    """Initial belief in the representation the criterion calls for.

    Worst-case solving uses the support as a set; expected-cost solving uses
    the stored distribution, or uniform over the support when the model only
    declares a set.
    """
    if criterion == MINMAX:
        return SetBelief(model.initial.support_mask())
    if criterion == MINEXP:
        if isinstance(model.initial, DistBelief):
            return model.initial
        sup = model.initial.support()
        return DistBelief({s: 1.0 / len(sup) for s in sup})
    raise ValueError(f"unknown criterion {criterion!r}")


def validate(model: DetPomdp) -> list[str]:
    """Return every invariant violation, with indices; an empty list means valid."""
    out: list[str] = []
    n = model.num_states
    if n < 1:
        out.append("num_states: must be at least 1")
        return out
    if model.num_observations < 1:
        out.append("num_observations: must be at least 1")
    all_mask = model.all_states_mask()

    if model.goal & ~all_mask:
        out.append(f"goal: states {bits_of(model.goal & ~all_mask)} out of range")
    goal = model.goal & all_mask

    ini = model.initial
    if ini.support_mask() & ~all_mask:
        out.append(
            f"initial: states {bits_of(ini.support_mask() & ~all_mask)} out of range"
        )
    if isinstance(ini, DistBelief):
        total = sum(ini.probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            out.append(f"initial.dist sum: {total!r} is not 1")

    if len(model.obs_fn) != len(model.actions):
        out.append("obs_fn: one row per action required")
    for a, row in enumerate(model.obs_fn):
        if len(row) != n:
            out.append(f"obs_fn[{a}]: expected {n} entries, got {len(row)}")
            continue
        for s, o in enumerate(row):
            if not 0 <= o < model.num_observations:
                out.append(f"obs_fn[{a}][{s}]: observation {o} out of range")

    for a, spec in enumerate(model.actions):
        if spec.applicable & ~all_mask:
            out.append(f"action {a}: applicable states out of range")
        app = spec.applicable & all_mask
        eff_keys = mask_of(spec.effects.keys())
        cost_keys = mask_of(spec.costs.keys())
        if eff_keys != app:
            missing = bits_of(app & ~eff_keys)
            extra = bits_of(eff_keys & ~app)
            if missing:
                out.append(f"action {a}: effects missing at states {missing}")
            if extra:
                out.append(f"action {a}: effects defined at inapplicable states {extra}")
        if cost_keys != app:
            missing = bits_of(app & ~cost_keys)
            extra = bits_of(cost_keys & ~app)
            if missing:
                out.append(f"action {a}: costs missing at states {missing}")
            if extra:
                out.append(f"action {a}: costs defined at inapplicable states {extra}")
        for s, t in spec.effects.items():
            if not 0 <= t < n:
                out.append(f"action {a}: effect {s}->{t} leaves the state space")
        for s, c in spec.costs.items():
            if goal >> s & 1:
                continue
            if c <= 0:
                out.append(f"action {a}: cost at non-goal state {s} must be positive")
        for t in bits_of(goal):
            if not app >> t & 1:
                out.append(f"action {a}: not applicable at goal state {t}")
                continue
            if spec.effects.get(t) != t:
                out.append(f"action {a}: goal state {t} not absorbing")
            if spec.costs.get(t) != 0:
                out.append(f"action {a}: nonzero cost on goal state {t}")
    return out


def transition_graph(model: DetPomdp) -> tuple[frozenset[int], ...]:
    """Global transition graph: successors[i] is every f(i, a) over applicable a."""
    succ: list[set[int]] = [set() for _ in range(model.num_states)]
    for spec in model.actions:
        for s, t in spec.effects.items():
            succ[s].add(t)
    return tuple(frozenset(s) for s in succ)


def permute_states(model: DetPomdp, perm: Sequence[int]) -> DetPomdp:
    """Relabel states by a permutation (old index i becomes perm[i])."""
    n = model.num_states
    actions = []
    for spec in model.actions:
        actions.append(
            ActionSpec(
                name=spec.name,
                applicable=mask_of(perm[s] for s in bits_of(spec.applicable)),
                effects={perm[s]: perm[t] for s, t in sorted(spec.effects.items())},
                costs={perm[s]: c for s, c in sorted(spec.costs.items())},
            )
        )
    obs_fn = []
    for row in model.obs_fn:
        new_row = [0] * n
        for s in range(n):
            new_row[perm[s]] = row[s]
        obs_fn.append(tuple(new_row))
    if isinstance(model.initial, DistBelief):
        initial: Belief = DistBelief({perm[s]: p for s, p in model.initial.items()})
    else:
        initial = SetBelief(mask_of(perm[s] for s in model.initial.support()))
    return DetPomdp(
        num_states=n,
        num_observations=model.num_observations,
        actions=tuple(actions),
        obs_fn=tuple(obs_fn),
        goal=mask_of(perm[s] for s in bits_of(model.goal)),
        initial=initial,
    )


def _cost_to_json(c: Fraction):
    if c.denominator == 1:
        return int(c)
    return f"{c.numerator}/{c.denominator}"


def _cost_from_json(value, where: str, problems: list[str]) -> Fraction:
    try:
        if isinstance(value, bool):
            raise ValueError
        if isinstance(value, int):
            return Fraction(value)
        if isinstance(value, float):
            return Fraction(str(value))
        if isinstance(value, str):
            return Fraction(value)
        raise ValueError
    except (ValueError, ZeroDivisionError):
        problems.append(f"{where}: {value!r} is not a cost")
        return Fraction(0)


def save_model(model: DetPomdp) -> str:
    """Serialize a model to its canonical JSON document."""
    doc: dict = {
        "num_states": model.num_states,
        "num_observations": model.num_observations,
        "goal": list(bits_of(model.goal)),
    }
    if isinstance(model.initial, DistBelief):
        doc["initial"] = {
            "kind": "dist",
            "probs": [[s, p] for s, p in model.initial.items()],
        }
    else:
        doc["initial"] = {"kind": "set", "states": list(model.initial.support())}
    doc["actions"] = [
        {
            "name": spec.name,
            "applicable": list(bits_of(spec.applicable)),
            "effects": [[s, t] for s, t in sorted(spec.effects.items())],
            "costs": [[s, _cost_to_json(c)] for s, c in sorted(spec.costs.items())],
        }
        for spec in model.actions
    ]
    if model.num_observations > 1:
        doc["obs_fn"] = [
            [s, a, model.obs_fn[a][s]]
            for s in range(model.num_states)
            for a in range(len(model.actions))
        ]
    return json.dumps(doc, indent=1) + "\n"


def load_model(text: str) -> DetPomdp:
    """Parse and validate a model document; raises ModelFormatError on any problem."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"parse error at line {exc.lineno}: {exc.msg}") from exc
    if not isinstance(doc, dict):
        raise ModelFormatError("top level: expected an object")

    problems: list[str] = []

    def need(key, kind, where="document"):
        value = doc.get(key)
        if not isinstance(value, kind) or isinstance(value, bool):
            problems.append(f"{where}.{key}: missing or wrong type")
            return None
        return value

    n = need("num_states", int)
    num_obs = need("num_observations", int)
    goal_list = need("goal", list)
    initial_doc = need("initial", dict)
    actions_doc = need("actions", list)
    if problems:
        raise ModelFormatError(problems)

    def check_state(value, where):
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < n:
            problems.append(f"{where}: {value!r} is not a state index")
            return 0
        return value

    goal = mask_of(check_state(s, "goal") for s in goal_list)

    initial: Belief
    kind = initial_doc.get("kind")
    if kind == "set":
        states = initial_doc.get("states")
        if not isinstance(states, list) or not states:
            problems.append("initial.states: non-empty list required")
            initial = SetBelief(1)
        else:
            initial = SetBelief(mask_of(check_state(s, "initial.states") for s in states))
    elif kind == "dist":
        pairs = initial_doc.get("probs")
        if not isinstance(pairs, list) or not pairs:
            problems.append("initial.probs: non-empty list required")
            initial = SetBelief(1)
        else:
            items = {}
            total = 0.0
            for entry in pairs:
                if not isinstance(entry, list) or len(entry) != 2:
                    problems.append(f"initial.probs: bad entry {entry!r}")
                    continue
                s = check_state(entry[0], "initial.probs")
                p = entry[1]
                if not isinstance(p, (int, float)) or isinstance(p, bool) or p <= 0:
                    problems.append(f"initial.probs[{s}]: {p!r} is not a probability")
                    continue
                items[s] = items.get(s, 0.0) + float(p)
                total += float(p)
            if abs(total - 1.0) > PROB_SUM_TOL:
                problems.append(f"initial.dist sum: {total!r} is not 1")
            if problems:
                initial = SetBelief(1)
            else:
                initial = DistBelief(items)
    else:
        problems.append(f"initial.kind: {kind!r} is not 'set' or 'dist'")
        initial = SetBelief(1)

    actions = []
    for a, entry in enumerate(actions_doc):
        where = f"actions[{a}]"
        if not isinstance(entry, dict):
            problems.append(f"{where}: expected an object")
            continue
        name = entry.get("name")
        if not isinstance(name, str):
            problems.append(f"{where}.name: string required")
            name = f"a{a}"
        app_list = entry.get("applicable")
        if not isinstance(app_list, list):
            problems.append(f"{where}.applicable: list required")
            app_list = []
        applicable = mask_of(check_state(s, f"{where}.applicable") for s in app_list)
        effects = {}
        for pair in entry.get("effects", []) or []:
            if not isinstance(pair, list) or len(pair) != 2:
                problems.append(f"{where}.effects: bad entry {pair!r}")
                continue
            s = check_state(pair[0], f"{where}.effects")
            t = check_state(pair[1], f"{where}.effects")
            effects[s] = t
        costs = {}
        for pair in entry.get("costs", []) or []:
            if not isinstance(pair, list) or len(pair) != 2:
                problems.append(f"{where}.costs: bad entry {pair!r}")
                continue
            s = check_state(pair[0], f"{where}.costs")
            costs[s] = _cost_from_json(pair[1], f"{where}.costs[{s}]", problems)
        actions.append(
            ActionSpec(name=name, applicable=applicable, effects=effects, costs=costs)
        )

    obs_rows = [[0] * n for _ in actions]
    obs_doc = doc.get("obs_fn")
    if obs_doc is None:
        if num_obs != 1:
            problems.append("obs_fn: required when num_observations > 1")
    else:
        if not isinstance(obs_doc, list):
            problems.append("obs_fn: list required")
            obs_doc = []
        seen = set()
        for entry in obs_doc:
            if not isinstance(entry, list) or len(entry) != 3:
                problems.append(f"obs_fn: bad triple {entry!r}")
                continue
            s = check_state(entry[0], "obs_fn")
            a, o = entry[1], entry[2]
            if not isinstance(a, int) or not 0 <= a < len(actions):
                problems.append(f"obs_fn: action index {a!r} out of range")
                continue
            if not isinstance(o, int) or not 0 <= o < num_obs:
                problems.append(f"obs_fn: observation {o!r} out of range")
                continue
            obs_rows[a][s] = o
            seen.add((s, a))
        for s in range(n):
            for a in range(len(actions)):
                if (s, a) not in seen:
                    problems.append(f"obs_fn: missing entry for state {s}, action {a}")

    if problems:
        raise ModelFormatError(problems)

    model = DetPomdp(
        num_states=n,
        num_observations=num_obs,
        actions=tuple(actions),
        obs_fn=tuple(tuple(row) for row in obs_rows),
        goal=goal,
        initial=initial,
    )
    violations = validate(model)
    if violations:
        raise ModelFormatError(violations)
    return model


def model_hash(model: DetPomdp) -> str:
    """Stable digest of the canonical document, used to tie policy files to models."""
    return hashlib.sha256(save_model(model).encode()).hexdigest()
