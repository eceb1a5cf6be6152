"""Domain generators: validity, optimal values against independent oracles."""

import random

import pytest

from detpomdp import (
    NO_FINITE_POLICY,
    SOLVED,
    permute_states,
    solve_explicit,
    validate,
)
from detpomdp.perm import ACYCLIC_TM, diameter_conditions
from detpomdp import domains

from conftest import (
    coins_min_weighings,
    mastermind_min_guesses,
    random_cnf,
    truth_table_sat,
)


def test_generators_emit_valid_models():
    emitted = [
        domains.gen_mastermind(1, 2),
        domains.gen_mastermind(2, 2),
        domains.gen_coins(3),
        domains.gen_coins(4),
        domains.gen_diagnosis([[1, 0], [0, 1]]),
        domains.gen_diagnosis([[0, 0], [0, 0]]),
        domains.gen_gridnav(["S?G", "..."]),
        domains.gen_sat([[1, -2], [2, 3]]),
    ]
    for model in emitted:
        assert validate(model) == []


def test_mastermind_one_letter_two_symbols():
    model = domains.gen_mastermind(1, 2)
    result = solve_explicit(model, "minmax")
    assert result.status == SOLVED
    assert result.value == 2  # guess one word, then the other


def test_mastermind_two_by_two_matches_game_tree():
    model = domains.gen_mastermind(2, 2)
    result = solve_explicit(model, "minmax")
    assert result.value == mastermind_min_guesses(2, 2)


def test_mastermind_is_knowledge_gathering():
    report = diameter_conditions(domains.gen_mastermind(2, 2))
    assert report.verdict == ACYCLIC_TM


def test_diagnosis_is_knowledge_gathering():
    report = diameter_conditions(domains.gen_diagnosis([[1, 0], [0, 1], [1, 1], [0, 0]]))
    assert report.verdict == ACYCLIC_TM


def test_coins_three_needs_two_weighings():
    assert coins_min_weighings(3) == 2
    result = solve_explicit(domains.gen_coins(3), "minmax")
    assert result.value == coins_min_weighings(3) + 1  # plus the declare step


def test_coins_balanced_all_but_one_collapses_belief():
    from detpomdp import SetBelief, filter_belief, progress

    model = domains.gen_coins(3)
    weigh = model.action_index("weigh 0v1")
    belief = SetBelief.of([0, 1, 2, 3, 4, 5])  # anyone heavy or light
    after = progress(model, belief, weigh)
    balanced = filter_belief(model, after, weigh, domains.BALANCED)
    assert balanced == SetBelief.of([4, 5])  # only coin 2 remains suspect


def test_diagnosis_identity_matrix():
    model = domains.gen_diagnosis([[1, 0], [0, 1]])
    result = solve_explicit(model, "minmax")
    assert result.value == 2  # one test plus the declare


def test_diagnosis_uninformative_matrix_unsolvable():
    model = domains.gen_diagnosis([[0, 0], [0, 0]])
    assert solve_explicit(model, "minmax").status == NO_FINITE_POLICY


def test_diagnosis_orthogonal_tests():
    matrix = [[0, 0], [0, 1], [1, 0], [1, 1]]
    result = solve_explicit(domains.gen_diagnosis(matrix), "minmax")
    assert result.value == 3  # two tests plus the declare


def test_gridnav_detour():
    # blocked middle forces the 4-move detour; peeking from below costs
    # nothing extra, so the worst case equals the blocked shortest path
    model = domains.gen_gridnav(["S?G", "..."])
    assert validate(model) == []
    result = solve_explicit(model, "minmax")
    assert result.status == SOLVED
    assert result.value == 4


def test_gridnav_no_unknown_is_shortest_path():
    model = domains.gen_gridnav(["S.G"])
    result = solve_explicit(model, "minmax")
    assert result.value == 2


def test_gridnav_blocked_everywhere_unsolvable():
    model = domains.gen_gridnav(["S#G"])
    assert solve_explicit(model, "minmax").status == NO_FINITE_POLICY


def test_gridnav_rejects_missing_start():
    with pytest.raises(ValueError):
        domains.gen_gridnav(["..G"])


def test_sat_forced_assignment():
    model = domains.gen_sat([[1]])
    result = solve_explicit(model, "minmax")
    assert result.status == SOLVED
    from detpomdp import solve_unobservable

    plan = solve_unobservable(model)
    assert [model.actions[a].name for a in plan.plan] == ["set x1=1"]


def test_sat_contradiction():
    assert solve_explicit(domains.gen_sat([[1], [-1]])).status == NO_FINITE_POLICY


def test_sat_matches_truth_tables():
    rng = random.Random(77)
    for _ in range(25):
        clauses, n = random_cnf(rng)
        model = domains.gen_sat(clauses, n)
        verdict = solve_explicit(model, "minmax").status == SOLVED
        assert verdict == truth_table_sat(clauses, n)


def test_sat_rejects_tautology_and_wide_clauses():
    with pytest.raises(ValueError):
        domains.gen_sat([[1, -1]])
    with pytest.raises(ValueError):
        domains.gen_sat([[1, 2, 3, 4]])


def test_values_invariant_under_state_relabeling():
    rng = random.Random(5)
    for model in (domains.gen_coins(3), domains.gen_diagnosis([[1, 0], [0, 1]])):
        base = solve_explicit(model, "minmax").value
        perm = list(range(model.num_states))
        rng.shuffle(perm)
        shuffled = permute_states(model, perm)
        assert validate(shuffled) == []
        assert solve_explicit(shuffled, "minmax").value == base
