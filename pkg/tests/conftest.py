"""Shared fixtures, random model generators, and independent oracles."""

from __future__ import annotations

import random
from fractions import Fraction
from itertools import product

import pytest
from hypothesis import settings

from detpomdp import (
    DetPomdp,
    Policy,
    SetBelief,
    DistBelief,
    belief_transitions,
    initial_belief,
    is_target,
    make_action,
)

settings.register_profile("suite", max_examples=60, derandomize=True)
settings.load_profile("suite")


def make_m3() -> DetPomdp:
    """Three-state chain: 0 -> 1 -> 2 with absorbing goal 2, one observation."""
    return DetPomdp(
        num_states=3,
        num_observations=1,
        actions=(make_action("right", [0, 1, 2], {0: 1, 1: 2, 2: 2}, {0: 1, 1: 1, 2: 0}),),
        obs_fn=((0, 0, 0),),
        goal=0b100,
        initial=SetBelief.of([0, 1]),
    )


@pytest.fixture
def m3() -> DetPomdp:
    return make_m3()


def random_model(
    rng: random.Random,
    max_states: int = 6,
    max_actions: int = 3,
    max_obs: int = 3,
    dist_initial: bool = False,
) -> DetPomdp:
    """A random valid model: absorbing goals, positive costs, total obs function."""
    n = rng.randint(2, max_states)
    num_goals = rng.randint(1, n - 1)
    goals = set(rng.sample(range(n), num_goals))
    non_goals = [s for s in range(n) if s not in goals]
    num_obs = rng.randint(1, max_obs)

    actions = []
    for a in range(rng.randint(1, max_actions)):
        applicable = set(goals)
        for s in non_goals:
            if rng.random() < 0.85:
                applicable.add(s)
        effects = {}
        costs = {}
        for s in sorted(applicable):
            if s in goals:
                effects[s] = s
                costs[s] = Fraction(0)
            else:
                effects[s] = rng.randrange(n)
                costs[s] = Fraction(rng.randint(1, 4), rng.choice((1, 2)))
        actions.append(make_action(f"a{a}", applicable, effects, costs))

    obs_fn = tuple(
        tuple(rng.randrange(num_obs) for _ in range(n)) for _ in actions
    )
    support = rng.sample(range(n), rng.randint(1, n))
    if dist_initial:
        weights = [rng.uniform(0.2, 1.0) for _ in support]
        total = sum(weights)
        initial = DistBelief({s: w / total for s, w in zip(support, weights)})
    else:
        initial = SetBelief.of(support)
    return DetPomdp(
        num_states=n,
        num_observations=num_obs,
        actions=tuple(actions),
        obs_fn=obs_fn,
        goal=sum(1 << g for g in goals),
        initial=initial,
    )


def truth_table_sat(clauses, num_vars: int) -> bool:
    """Brute-force satisfiability over all assignments."""
    for bits in product((False, True), repeat=num_vars):
        ok = True
        for clause in clauses:
            if not any(bits[abs(lit) - 1] == (lit > 0) for lit in clause):
                ok = False
                break
        if ok:
            return True
    return False


def random_cnf(rng: random.Random, max_vars: int = 6, max_clauses: int = 6):
    n = rng.randint(1, max_vars)
    m = rng.randint(1, max_clauses)
    clauses = []
    for _ in range(m):
        width = rng.randint(1, 3)
        vars_ = rng.sample(range(1, n + 1), min(width, n))
        clauses.append([v if rng.random() < 0.5 else -v for v in vars_])
    return clauses, n


class PolicySpaceTooLarge(Exception):
    pass


def enumerate_minimal_policies(model: DetPomdp, criterion: str, cap: int = 50_000):
    """Every closed minimal policy, by backtracking over per-belief choices."""
    root = initial_belief(model, criterion)
    out: list[Policy] = []

    def sort_key(b):
        return (b.support(), getattr(b, "probs", ()))

    def rec(assigned: dict, pending: frozenset):
        if len(out) >= cap:
            raise PolicySpaceTooLarge(cap)
        if not pending:
            out.append(Policy(dict(assigned)))
            return
        b = min(pending, key=sort_key)
        rest = pending - {b}
        for tr in belief_transitions(model, b, criterion):
            assigned[b] = tr.action
            grown = rest | {
                br.belief
                for br in tr.branches
                if br.belief not in assigned and not is_target(model, br.belief)
            }
            rec(assigned, grown)
            del assigned[b]

    if is_target(model, root):
        return [Policy({})]
    rec({}, frozenset([root]))
    return out


def coins_min_weighings(n: int) -> int:
    """Exhaustive minimax over the weighing decision structure.

    A belief is abstracted to counts (heavy-only, light-only, undetermined)
    of suspect coins; that abstraction is exact because relabeling coins is a
    symmetry of the problem.  Genuine coins fill pans to equal size.
    """
    from functools import lru_cache

    def splits3(k):
        return [
            (i, j, k - i - j) for i in range(k + 1) for j in range(k + 1 - i)
        ]

    @lru_cache(maxsize=None)
    def value(h, l, b):
        total = h + l + b
        assert total >= 1
        if total == 1 and b == 0:
            return 0
        genuine = n - total
        best = None
        for hL, hR, _hO in splits3(h):
            for lL, lR, _lO in splits3(l):
                for bL, bR, _bO in splits3(b):
                    left = hL + lL + bL
                    right = hR + lR + bR
                    diff = left - right
                    if diff > 0:
                        gL, gR = 0, diff
                    else:
                        gL, gR = -diff, 0
                    if gL + gR > genuine:
                        continue
                    if left + gL == 0:
                        continue
                    outcomes = [
                        (hL + bL, lR + bR, 0),
                        (hR + bR, lL + bL, 0),
                        (h - hL - hR, l - lL - lR, b - bL - bR),
                    ]
                    if (h, l, b) in outcomes:
                        continue  # an outcome learns nothing; never optimal
                    worst = 0
                    for oh, ol, ob in outcomes:
                        if oh + ol + ob == 0:
                            continue
                        worst = max(worst, value(oh, ol, ob))
                    if best is None or worst < best:
                        best = worst
        assert best is not None
        return 1 + best

    return value(0, 0, n)


def mastermind_min_guesses(m: int, n: int) -> int:
    """Exhaustive minimax guess count over candidate secret sets."""
    from functools import lru_cache

    words = list(product(range(n), repeat=m))

    def feedback(guess, secret):
        exact = sum(g == s for g, s in zip(guess, secret))
        common = sum(min(guess.count(c), secret.count(c)) for c in range(n))
        return exact, common - exact

    @lru_cache(maxsize=None)
    def value(candidates: frozenset) -> int:
        if not candidates:
            return 0
        best = None
        for guess in words:
            classes: dict = {}
            for secret in candidates:
                if secret == guess:
                    continue
                classes.setdefault(feedback(guess, secret), []).append(secret)
            if any(len(group) == len(candidates) for group in classes.values()):
                continue  # guess makes no progress; never optimal
            worst = 0
            for group in classes.values():
                worst = max(worst, value(frozenset(group)))
            score = 1 + worst
            if best is None or score < best:
                best = score
        return best

    return value(frozenset(words))
