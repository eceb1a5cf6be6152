"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v -s`` to see the per-criterion
lines.  Criterion 9's coins(12) explicit-enumeration leg is expected to fail:
the model has ~37k actions and a reachable belief space in the hundreds of
thousands, so exhaustive enumeration cannot finish inside any practical
budget; the decision-structure oracle pins the true value instead.
"""

import math
import random
import subprocess
import sys
import time

from detpomdp import (
    NO_FINITE_POLICY,
    SOLVED,
    DistBelief,
    Permutation,
    SetBelief,
    applicable_actions,
    build_cycle_instance,
    build_graph,
    build_large_order_instance,
    evaluate_policy,
    filter_belief,
    initial_belief,
    is_target,
    mc_policy_value,
    pack_primes,
    perm_order,
    progress,
    reachable_beliefs,
    save_model,
    solve_explicit,
    solve_heuristic,
    solve_unobservable,
    table_init,
    table_step,
    table_to_belief,
)
from detpomdp import domains
from detpomdp.perm import ACYCLIC_TM, diameter_conditions, measure_diameter, build_chain
from detpomdp.graph import DEFAULT_BUDGET

from conftest import (
    coins_min_weighings,
    random_cnf,
    random_model,
    truth_table_sat,
)


def report(number, ok, text):
    print(f"\nACCEPTANCE {number} {'PASS' if ok else 'FAIL'}: {text}")
    assert ok, f"criterion {number} failed: {text}"


def corpus_models():
    return [
        domains.gen_mastermind(1, 2),
        domains.gen_mastermind(2, 2),
        domains.gen_mastermind(2, 3),
        domains.gen_coins(3),
        domains.gen_coins(4),
        domains.gen_coins(5),
        domains.gen_diagnosis([[1, 0], [0, 1]]),
        domains.gen_diagnosis([[0, 0], [0, 1], [1, 0], [1, 1]]),
        domains.gen_gridnav(["S?G", "..."]),
        domains.gen_gridnav(["S?.G", ".?.."]),
        domains.gen_sat([[1, 2], [-1, 3]]),
        domains.gen_sat([[1], [2], [3], [-1, 2]]),
        domains.gen_sat([[1], [-1]]),
        build_cycle_instance([2, 3]),
        build_cycle_instance([2, 3, 5]),
        build_large_order_instance(10),
    ]


def test_acceptance_01_sat_reduction_equivalence():
    start = time.time()
    rng = random.Random(101)
    agree = 0
    total = 50
    for _ in range(total):
        clauses, n = random_cnf(rng, max_vars=6, max_clauses=6)
        model = domains.gen_sat(clauses, n)
        solved = solve_explicit(model, "minmax").status == SOLVED
        if solved == truth_table_sat(clauses, n):
            agree += 1
    elapsed = time.time() - start
    report(
        1,
        agree == total and elapsed < 10,
        f"{agree}/{total} formulas agree with the truth table in {elapsed:.1f}s",
    )


def test_acceptance_02_solver_cross_validation():
    start = time.time()
    rng = random.Random(202)
    models = corpus_models() + [
        random_model(rng, dist_initial=(k % 2 == 0)) for k in range(10)
    ]
    checked = 0
    for model in models:
        if len(reachable_beliefs(model, budget=4000)) > 2000:
            continue
        for criterion in ("minmax", "minexp"):
            exact = solve_explicit(model, criterion)
            for heuristic in ("zero", "fullobs"):
                found = solve_heuristic(model, criterion, heuristic)
                assert found.status == exact.status
                if exact.status == SOLVED:
                    if criterion == "minmax":
                        assert found.value == exact.value
                    else:
                        assert abs(found.value - exact.value) <= 1e-9
                checked += 1
    elapsed = time.time() - start
    report(
        2,
        elapsed < 60,
        f"{checked} solver runs agree (exact worst case, 1e-9 expected) in {elapsed:.1f}s",
    )


def test_acceptance_03_support_monotonicity_properties():
    rng = random.Random(303)
    edges = 0
    for _ in range(100):
        model = random_model(rng, max_states=6)
        graph = build_graph(model, "minmax", budget=5000)
        for j, (or_id, _a) in enumerate(graph.and_nodes):
            parent = graph.beliefs[or_id]
            children = graph.and_edges[j]
            for e in children:
                assert graph.beliefs[e.or_id].size() <= parent.size()
            if any(graph.beliefs[e.or_id].size() == parent.size() for e in children):
                assert len(children) == 1
            assert sum(graph.beliefs[e.or_id].size() for e in children) <= parent.size()
            union = 0
            for e in children:
                mask = graph.beliefs[e.or_id].support_mask()
                assert union & mask == 0
                union |= mask
            edges += len(children)
    report(3, True, f"support monotonicity and partition hold on {edges} graph edges")


def test_acceptance_04_finiteness_bounds():
    rng = random.Random(404)
    for _ in range(60):
        model = random_model(rng, max_states=5)
        beliefs = reachable_beliefs(model, budget=10**5)
        n = model.num_states
        assert len(beliefs) <= (1 + n) ** n
    from dataclasses import replace

    for _ in range(40):
        model = random_model(rng, max_states=6)
        singleton = replace(
            model, initial=SetBelief.of([model.initial.support()[0]])
        )
        beliefs = reachable_beliefs(singleton, budget=10**5)
        assert len(beliefs) <= singleton.num_states
    report(4, True, "enumeration terminates within the table bound; singleton starts stay <= |S|")


def test_acceptance_05_hypothesis_table_equivalence():
    rng = random.Random(505)
    pairs = 0
    while pairs < 100:
        model = random_model(rng, dist_initial=True)
        belief = initial_belief(model, "minexp")
        table = table_init(model)
        steps = 0
        for _ in range(rng.randint(1, 8)):
            acts = applicable_actions(model, belief)
            if not acts or is_target(model, belief):
                break
            a = rng.choice(acts)
            after = progress(model, belief, a)
            row = model.obs_fn[a]
            o = rng.choice(sorted({row[s] for s in after.support()}))
            belief = filter_belief(model, after, a, o)
            table = table_step(model, table, a, o)
            recovered = table_to_belief(model, table)
            assert recovered.support() == belief.support()
            assert all(
                abs(recovered.prob(s) - p) <= 1e-9 for s, p in belief.items()
            )
            steps += 1
        if steps:
            pairs += 1
    report(5, True, f"table and direct belief trajectories agree on {pairs} sequences")


def test_acceptance_06_permutation_order():
    sigma = Permutation((2, 3, 4, 6, 7, 5, 1, 0))  # the eight-point worked example
    ok = perm_order(sigma) == 12
    rng = random.Random(606)
    for _ in range(30):
        n = rng.randint(2, 10)
        images = list(range(n))
        rng.shuffle(images)
        p = Permutation(tuple(images))
        k = perm_order(p)
        ok = ok and p.power(k).is_identity()
        ok = ok and all(not p.power(i).is_identity() for i in range(1, k))
    report(6, ok, "worked example has order 12; random orders are least identity powers")


def test_acceptance_07_group_membership_vs_closure():
    start = time.time()
    rng = random.Random(707)

    def closure(gens):
        seen = {Permutation.identity(gens[0].degree())}
        frontier = list(seen)
        while frontier:
            p = frontier.pop()
            for g in gens:
                q = p.then(g)
                if q not in seen:
                    seen.add(q)
                    frontier.append(q)
        return seen

    queries = 0
    agree = 0
    while queries < 200:
        n = rng.randint(2, 7)
        gens = []
        for _ in range(rng.randint(1, 3)):
            images = list(range(n))
            rng.shuffle(images)
            gens.append(Permutation(tuple(images)))
        group = closure(gens)
        chain = build_chain(gens)
        assert chain.order() == len(group)
        for _ in range(10):
            images = list(range(n))
            rng.shuffle(images)
            sigma = Permutation(tuple(images))
            if chain.contains(sigma) == (sigma in group):
                agree += 1
            queries += 1
    elapsed = time.time() - start
    report(
        7,
        agree == queries and elapsed < 30,
        f"{agree}/{queries} membership queries match closure in {elapsed:.1f}s",
    )


def test_acceptance_08_large_order_instances():
    lines = []
    ok = True
    for lengths in ([2, 3], [2, 3, 5]):
        model = build_cycle_instance(lengths)
        result = solve_unobservable(model)
        order = math.lcm(*lengths)
        advance = model.action_index("advance")
        finish = model.action_index("finish")
        expected = [advance] * (order - 1) + [finish]
        ok = ok and result.status == SOLVED and result.plan == expected
        lines.append(f"cycles {lengths}: plan length {len(result.plan)} = lcm {order}")
    crossing = None
    print("\n  n  packed primes          lcm      n^2")
    for n in range(2, 60):
        primes = pack_primes(n)
        value = math.lcm(*primes) if primes else 1
        if crossing is None and value > n * n:
            crossing = n
        if n in (5, 10, 17, 28, 41, 58) or (crossing == n):
            print(f"  {n:3d}  {str(primes):22s} {value:8d} {n*n:8d}")
    ok = ok and crossing is not None
    lines.append(f"packed-prime lcm first exceeds n^2 at n={crossing}")
    report(8, ok, "; ".join(lines))


def test_acceptance_09a_coins_three():
    oracle = coins_min_weighings(3)
    result = solve_explicit(domains.gen_coins(3), "minmax")
    ok = oracle == 2 and result.status == SOLVED and result.value == oracle + 1
    report(9, ok, f"coins(3): oracle {oracle} weighings; solver value {result.value} (weighings + declare)")


def test_acceptance_09b_coins_twelve_oracle():
    oracle = coins_min_weighings(12)
    report(9, oracle == 3, f"coins(12): decision-structure oracle proves {oracle} weighings")


def test_acceptance_09c_coins_twelve_explicit_regression():
    # Faithful attempt: coins(12) has 36918 actions and a reachable belief
    # space extrapolating to ~5e5 nodes (3.2x per coin from n=3..6), i.e.
    # ~2e10 action applications to enumerate.  A 200k-node budget already
    # costs ~65s, so no budget that fits the runtime allowance can finish.
    model = domains.gen_coins(12)
    result = solve_explicit(model, "minmax", budget=50_000)
    expected = coins_min_weighings(12) + 1
    ok = result.status == SOLVED and result.value == expected
    report(
        9,
        ok,
        "coins(12) via exhaustive enumeration: status "
        f"{result.status} after {result.stats.beliefs} beliefs; "
        f"cannot reproduce the oracle value {expected} within any feasible budget",
    )


def test_acceptance_10_monte_carlo_consistency():
    rng = random.Random(1010)
    done = 0
    while done < 20:
        model = random_model(rng, dist_initial=True)
        result = solve_explicit(model, "minexp")
        if result.status != SOLVED:
            continue
        exact = evaluate_policy(model, result.policy, "minexp")
        mean, stderr = mc_policy_value(
            model, result.policy, "minexp", runs=100_000, seed=done
        )
        assert abs(mean - exact) <= 3 * stderr + 1e-9, (mean, exact, stderr)
        done += 1
    report(10, True, f"{done} policies: simulated mean within 3 standard errors")


def test_acceptance_11_diameter_soundness():
    checked = []
    for model in corpus_models():
        if diameter_conditions(model).verdict != ACYCLIC_TM:
            continue
        diameter = measure_diameter(model, budget=200_000)
        assert diameter <= model.num_states, (diameter, model.num_states)
        checked.append(diameter)
    report(
        11,
        len(checked) >= 3,
        f"acyclic-transition models have measured diameters {checked}, all <= |S|",
    )


def test_acceptance_12_cli_determinism(tmp_path):
    model_path = tmp_path / "model.json"
    model_path.write_text(save_model(domains.gen_diagnosis([[1, 0], [0, 1], [1, 1], [0, 0]])))

    def run(*args):
        return subprocess.run(
            [sys.executable, "-m", "detpomdp.cli", *args],
            capture_output=True,
            text=True,
        )

    ok = True
    for args in (
        ("solve", str(model_path), "--out", str(tmp_path / "p.json")),
        ("solve", str(model_path), "--criterion", "minexp", "--algorithm", "aostar"),
        ("analyze", str(model_path)),
        ("gen", "coins", "--coins", "3"),
    ):
        first = run(*args)
        policy_one = (tmp_path / "p.json").read_text() if "p.json" in " ".join(args) else None
        second = run(*args)
        policy_two = (tmp_path / "p.json").read_text() if "p.json" in " ".join(args) else None
        ok = ok and first.stdout == second.stdout and first.returncode == second.returncode
        ok = ok and policy_one == policy_two
    report(12, ok, "repeated identical invocations produce byte-identical reports")
