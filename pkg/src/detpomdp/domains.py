"""Generators producing flat deterministic-POMDP models for classic problems.

Every generator emits a model that passes validation: goal states absorb
every action at zero cost, all other applicable pairs cost at least one
unit.  Problems whose objective is to *identify* the hidden state (coins,
diagnosis) get explicit declare actions that jump to the goal from the right
state and to a non-goal sink from any other, so declaring costs one unit and
reported optimal values include that final step.
"""

from __future__ import annotations

from fractions import Fraction
from itertools import combinations, product
from typing import Sequence

from .beliefs import SetBelief
from .errors import BudgetExceededError
from .model import ActionSpec, DetPomdp


def _unit_costs(n: int, goal_states: set[int]) -> dict[int, Fraction]:
    return {s: Fraction(0 if s in goal_states else 1) for s in range(n)}


def gen_mastermind(word_length: int, alphabet: int, budget: int = 10**6) -> DetPomdp:
    """Secret-word guessing with exact/near match feedback.

    States are the candidate secrets plus one solved state; every guess is an
    action that solves the game when it equals the secret and otherwise
    leaves it unchanged.  The observation is the (exact, near) feedback pair,
    encoded as exact*(word_length+1) + near.
    """
    if word_length < 1 or alphabet < 1:
        raise ValueError("word length and alphabet size must be positive")
    if alphabet**word_length > budget:
        raise BudgetExceededError(alphabet**word_length, "candidate secrets")
    words = list(product(range(alphabet), repeat=word_length))
    n = len(words) + 1
    solved = len(words)
    goal_states = {solved}

    def feedback(guess, secret):
        exact = sum(g == s for g, s in zip(guess, secret))
        common = sum(
            min(guess.count(c), secret.count(c)) for c in range(alphabet)
        )
        return exact * (word_length + 1) + (common - exact)

    perfect = word_length * (word_length + 1)
    actions = []
    obs_rows = []
    for guess in words:
        effects = {s: (solved if words[s] == guess else s) for s in range(len(words))}
        effects[solved] = solved
        actions.append(
            ActionSpec(
                name="guess " + "".join(map(str, guess)),
                applicable=(1 << n) - 1,
                effects=effects,
                costs=_unit_costs(n, goal_states),
            )
        )
        row = [feedback(guess, words[s]) for s in range(len(words))]
        row.append(perfect)
        obs_rows.append(tuple(row))

    return DetPomdp(
        num_states=n,
        num_observations=(word_length + 1) ** 2,
        actions=tuple(actions),
        obs_fn=tuple(obs_rows),
        goal=1 << solved,
        initial=SetBelief.of(range(len(words))),
    )


BALANCED, LEFT_HEAVY, RIGHT_HEAVY = 0, 1, 2


def gen_coins(n: int) -> DetPomdp:
    """Counterfeit coin search with a two-pan balance.

    State 2i is "coin i is heavy", 2i+1 is "coin i is light"; the last two
    states are the identified goal and a sink for wrong declarations.
    Weighings put equal-size disjoint pans on the scale (left pan
    lexicographically first, which halves the symmetric duplicates) and leave
    the state unchanged; declare actions name a coin and a direction.
    """
    if n < 3:
        raise ValueError("need at least 3 coins")
    num_states = 2 * n + 2
    goal = 2 * n
    sink = 2 * n + 1
    goal_states = {goal}
    everywhere = (1 << num_states) - 1
    identity = {s: s for s in range(num_states)}

    actions = []
    obs_rows = []
    for k in range(1, n // 2 + 1):
        for left in combinations(range(n), k):
            rest = [c for c in range(n) if c not in left]
            for right in combinations(rest, k):
                if right < left:
                    continue
                row = []
                for s in range(2 * n):
                    coin, heavy = s // 2, s % 2 == 0
                    if coin in left:
                        row.append(LEFT_HEAVY if heavy else RIGHT_HEAVY)
                    elif coin in right:
                        row.append(RIGHT_HEAVY if heavy else LEFT_HEAVY)
                    else:
                        row.append(BALANCED)
                row += [BALANCED, BALANCED]
                name = "weigh {}v{}".format(
                    "+".join(map(str, left)), "+".join(map(str, right))
                )
                actions.append(
                    ActionSpec(
                        name=name,
                        applicable=everywhere,
                        effects=dict(identity),
                        costs=_unit_costs(num_states, goal_states),
                    )
                )
                obs_rows.append(tuple(row))

    for s in range(2 * n):
        coin, direction = s // 2, "heavy" if s % 2 == 0 else "light"
        effects = {t: (goal if t == s else sink) for t in range(2 * n)}
        effects[goal] = goal
        effects[sink] = sink
        actions.append(
            ActionSpec(
                name=f"declare {coin} {direction}",
                applicable=everywhere,
                effects=effects,
                costs=_unit_costs(num_states, goal_states),
            )
        )
        obs_rows.append((BALANCED,) * num_states)

    return DetPomdp(
        num_states=num_states,
        num_observations=3,
        actions=tuple(actions),
        obs_fn=tuple(obs_rows),
        goal=1 << goal,
        initial=SetBelief.of(range(2 * n)),
    )


def gen_diagnosis(matrix: Sequence[Sequence[int]]) -> DetPomdp:
    """Sequential fault diagnosis from a binary test outcome matrix.

    Row i gives the outcomes of every test when the system is in state i.
    Tests do not change the state; declare actions finish the episode.
    """
    m = len(matrix)
    if m < 1:
        raise ValueError("need at least one system state")
    width = len(matrix[0])
    if any(len(row) != width for row in matrix):
        raise ValueError("matrix rows must have equal length")
    if any(v not in (0, 1) for row in matrix for v in row):
        raise ValueError("matrix entries must be 0 or 1")
    num_states = m + 2
    goal = m
    sink = m + 1
    goal_states = {goal}
    everywhere = (1 << num_states) - 1
    identity = {s: s for s in range(num_states)}

    actions = []
    obs_rows = []
    for j in range(width):
        actions.append(
            ActionSpec(
                name=f"test {j}",
                applicable=everywhere,
                effects=dict(identity),
                costs=_unit_costs(num_states, goal_states),
            )
        )
        obs_rows.append(tuple(matrix[i][j] for i in range(m)) + (0, 0))
    for i in range(m):
        effects = {t: (goal if t == i else sink) for t in range(m)}
        effects[goal] = goal
        effects[sink] = sink
        actions.append(
            ActionSpec(
                name=f"declare {i}",
                applicable=everywhere,
                effects=effects,
                costs=_unit_costs(num_states, goal_states),
            )
        )
        obs_rows.append((0,) * num_states)

    return DetPomdp(
        num_states=num_states,
        num_observations=2,
        actions=tuple(actions),
        obs_fn=tuple(obs_rows),
        goal=1 << goal,
        initial=SetBelief.of(range(m)),
    )


_DIRS = (("north", 0, -1), ("east", 1, 0), ("south", 0, 1), ("west", -1, 0))


def gen_gridnav(rows: Sequence[str]) -> DetPomdp:
    """Navigation on a grid whose '?' cells have unknown traversability.

    Map characters: '.' open, '#' wall, '?' unknown, 'S' start, 'G' goal.
    A state is (cell, assignment of the unknown cells); moving into a wall or
    an unknown-blocked cell leaves the robot in place.  After each move the
    robot senses which of the four adjacent cells are traversable, encoded as
    a 4-bit observation in north/east/south/west order.
    """
    height = len(rows)
    if height == 0 or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("grid rows must be non-empty and rectangular")
    width = len(rows[0])
    cells = {}
    unknown = []
    start = goal_cell = None
    for y, line in enumerate(rows):
        for x, ch in enumerate(line):
            if ch not in ".#?SG":
                raise ValueError(f"bad map character {ch!r}")
            if ch == "S":
                start = (x, y)
            if ch == "G":
                goal_cell = (x, y)
            if ch == "?":
                unknown.append((x, y))
            cells[(x, y)] = ch
    if start is None or goal_cell is None:
        raise ValueError("grid needs exactly one S and one G")
    if cells[start] == "?" or cells[goal_cell] == "?":
        raise ValueError("start and goal cells must be known traversable")

    free = [xy for xy, ch in sorted(cells.items()) if ch != "#"]
    cell_id = {xy: i for i, xy in enumerate(free)}
    n_cells = len(free)
    n_assign = 1 << len(unknown)
    num_states = n_cells * n_assign
    unknown_bit = {xy: k for k, xy in enumerate(unknown)}

    def passable(xy, assign):
        ch = cells.get(xy)
        if ch is None or ch == "#":
            return False
        if ch == "?":
            return bool(assign >> unknown_bit[xy] & 1)
        return True

    def state_id(xy, assign):
        return assign * n_cells + cell_id[xy]

    goal_mask = 0
    for assign in range(n_assign):
        goal_mask |= 1 << state_id(goal_cell, assign)

    obs_of = {}
    for assign in range(n_assign):
        for xy in free:
            code = 0
            for bit, (_, dx, dy) in enumerate(_DIRS):
                if passable((xy[0] + dx, xy[1] + dy), assign):
                    code |= 1 << bit
            obs_of[(xy, assign)] = code

    everywhere = (1 << num_states) - 1
    actions = []
    obs_rows = []
    for name, dx, dy in _DIRS:
        effects = {}
        costs = {}
        for assign in range(n_assign):
            for xy in free:
                s = state_id(xy, assign)
                if xy == goal_cell:
                    effects[s] = s
                    costs[s] = Fraction(0)
                    continue
                dest = (xy[0] + dx, xy[1] + dy)
                effects[s] = state_id(dest, assign) if passable(dest, assign) else s
                costs[s] = Fraction(1)
        actions.append(
            ActionSpec(
                name=f"move {name}",
                applicable=everywhere,
                effects=dict(sorted(effects.items())),
                costs=dict(sorted(costs.items())),
            )
        )
        row = [0] * num_states
        for assign in range(n_assign):
            for xy in free:
                row[state_id(xy, assign)] = obs_of[(xy, assign)]
        obs_rows.append(tuple(row))

    return DetPomdp(
        num_states=num_states,
        num_observations=16,
        actions=tuple(actions),
        obs_fn=tuple(obs_rows),
        goal=goal_mask,
        initial=SetBelief.of(
            state_id(start, assign) for assign in range(n_assign)
        ),
    )


def gen_sat(clauses: Sequence[Sequence[int]], num_vars: int = 0) -> DetPomdp:
    """Unobservable assignment model that has a finite-cost plan iff the CNF is satisfiable.

    Literals are nonzero ints, DIMACS style.  State (i, j) tracks clause j
    while variable i is the next to assign; setting x_i kills the clause into
    the accepting state when the literal matches, otherwise the clause
    advances (or falls into the rejecting sink after the last variable).
    """
    if not clauses:
        raise ValueError("need at least one clause")
    seen_vars = {abs(lit) for clause in clauses for lit in clause}
    if 0 in seen_vars:
        raise ValueError("literal 0 is invalid")
    n = max(num_vars, max(seen_vars, default=1))
    m = len(clauses)
    for clause in clauses:
        if len(clause) > 3:
            raise ValueError("clauses are limited to 3 literals")
        if any(-lit in clause for lit in clause):
            raise ValueError("tautological clause")

    def cell(i, j):  # variable i (1-based), clause j (0-based)
        return (i - 1) * m + j

    accept = n * m
    reject = n * m + 1
    num_states = n * m + 2
    goal_states = {accept}

    actions = []
    for i in range(1, n + 1):
        column = [cell(i, j) for j in range(m)]
        app = sum(1 << s for s in column) | 1 << accept | 1 << reject
        for v in (0, 1):
            effects = {accept: accept, reject: reject}
            for j, s in enumerate(column):
                lit = i if v else -i
                if lit in clauses[j]:
                    effects[s] = accept
                elif i < n:
                    effects[s] = cell(i + 1, j)
                else:
                    effects[s] = reject
            costs = {s: Fraction(1) for s in column}
            costs[accept] = Fraction(0)
            costs[reject] = Fraction(1)
            actions.append(
                ActionSpec(
                    name=f"set x{i}={v}",
                    applicable=app,
                    effects=dict(sorted(effects.items())),
                    costs=dict(sorted(costs.items())),
                )
            )

    return DetPomdp(
        num_states=num_states,
        num_observations=1,
        actions=tuple(actions),
        obs_fn=tuple((0,) * num_states for _ in actions),
        goal=1 << accept,
        initial=SetBelief.of(cell(1, j) for j in range(m)),
    )
