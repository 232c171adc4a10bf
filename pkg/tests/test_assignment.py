"""Tests for assignment instances, solvers, and candidate scoring."""

from __future__ import annotations

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from allocsim.assignment import (
    Assignment,
    Candidate,
    CostMatrix,
    DuplicateAgent,
    FabricatedCost,
    InstanceTooLarge,
    MalformedCandidate,
    UnassignedTask,
    brute_force_solve,
    dump_candidates,
    dump_instances,
    generate_instance,
    hungarian_solve,
    load_candidates,
    load_instances,
    parse_candidate_text,
    score_batch,
    validate,
)


def reference_optimum(matrix: CostMatrix) -> Assignment:
    """Plain-Python oracle: scan permutations in lexicographic order."""
    best_mapping = None
    best_cost = None
    for perm in itertools.permutations(range(matrix.n)):
        cost = matrix.cost_of(perm)
        if best_cost is None or cost < best_cost:
            best_cost, best_mapping = cost, perm
    return Assignment(tuple(best_mapping), best_cost)


class TestGenerateInstance:
    def test_degenerate_range(self):
        m = generate_instance(1, seed=123, lo=7, hi=7)
        assert m.values == ((7,),)

    def test_deterministic(self):
        a = generate_instance(5, seed=99, lo=0, hi=50)
        b = generate_instance(5, seed=99, lo=0, hi=50)
        assert a == b

    def test_entries_in_range(self):
        m = generate_instance(4, seed=42, lo=0, hi=99)
        flat = [v for row in m.values for v in row]
        assert len(flat) == 16
        assert all(0 <= v <= 99 for v in flat)

    def test_bad_bounds_rejected(self):
        with pytest.raises(ValueError):
            generate_instance(3, seed=0, lo=5, hi=1)
        with pytest.raises(ValueError):
            generate_instance(0, seed=0, lo=0, hi=1)
        with pytest.raises(ValueError):
            generate_instance(3, seed=0, lo=-1, hi=1)


class TestSolvers:
    def test_one_by_one(self):
        m = CostMatrix.from_rows([[5]])
        for solve in (hungarian_solve, brute_force_solve):
            result = solve(m)
            assert result.mapping == (0,)
            assert result.total_cost == 5

    def test_zero_diagonal(self):
        m = CostMatrix.from_rows([[0, 9], [9, 0]])
        assert hungarian_solve(m).mapping == (0, 1)
        assert hungarian_solve(m).total_cost == 0

    def test_three_by_three_known_optimum(self):
        m = CostMatrix.from_rows([[4, 1, 3], [2, 0, 5], [3, 2, 2]])
        expected = reference_optimum(m)
        assert expected.mapping == (1, 0, 2) and expected.total_cost == 5
        for solve in (hungarian_solve, brute_force_solve):
            result = solve(m)
            assert result.mapping == (1, 0, 2)
            assert result.total_cost == 5

    def test_all_equal_ties_break_lexicographically(self):
        m = CostMatrix.from_rows([[1, 1], [1, 1]])
        assert brute_force_solve(m).mapping == (0, 1)
        assert hungarian_solve(m).mapping == (0, 1)

    def test_cross_oracle_on_seeded_matrices(self):
        for seed in range(50):
            n = 2 + seed % 7
            m = generate_instance(n, seed=seed, lo=0, hi=30)
            h = hungarian_solve(m)
            b = brute_force_solve(m)
            assert h.total_cost == b.total_cost
            assert h.mapping == b.mapping

    def test_hungarian_matches_plain_reference(self):
        for seed in range(20):
            m = generate_instance(2 + seed % 5, seed=1000 + seed, lo=0, hi=12)
            assert hungarian_solve(m) == reference_optimum(m)

    def test_brute_force_bound(self):
        m = generate_instance(10, seed=1, lo=0, hi=5)
        with pytest.raises(InstanceTooLarge):
            brute_force_solve(m)

    def test_solver_output_validates_clean(self):
        for seed in range(10):
            m = generate_instance(4, seed=seed, lo=0, hi=20)
            solved = hungarian_solve(m)
            report = validate(m, Candidate(solved.mapping, solved.total_cost))
            assert report.is_valid

    @given(st.integers(min_value=-20, max_value=20), st.integers(min_value=0, max_value=100))
    @settings(max_examples=40, deadline=None)
    def test_row_shift_invariance(self, k, seed):
        m = generate_instance(4, seed=seed, lo=30, hi=60)
        base_h = hungarian_solve(m)
        shifted_rows = [list(row) for row in m.values]
        shifted_rows[2] = [v + k for v in shifted_rows[2]]
        shifted = CostMatrix.from_rows(shifted_rows)
        for solve in (hungarian_solve, brute_force_solve):
            result = solve(shifted)
            assert result.total_cost == base_h.total_cost + k
            assert result.mapping == base_h.mapping


class TestValidate:
    def test_duplicate_agent_also_leaves_a_slot_unserved(self):
        m = generate_instance(2, seed=0, lo=0, hi=9)
        report = validate(m, Candidate((0, 0)))
        assert report.kinds() == {"DuplicateAgent", "UnassignedTask"}
        assert DuplicateAgent(0, (0, 1)) in report.violations
        assert UnassignedTask(1) in report.violations

    def test_fabricated_cost(self):
        m = CostMatrix.from_rows([[0, 9], [9, 0]])
        report = validate(m, Candidate((1, 0), claimed_cost=0))
        assert report.violations == (FabricatedCost(0, 18.0),)

    def test_honest_optimum_is_valid(self):
        m = CostMatrix.from_rows([[0, 9], [9, 0]])
        assert validate(m, Candidate((0, 1), claimed_cost=0)).is_valid

    def test_explicitly_unassigned_task(self):
        m = generate_instance(2, seed=0, lo=0, hi=9)
        report = validate(m, Candidate((0, None)))
        assert report.violations == (UnassignedTask(1),)

    def test_garbage_never_raises(self):
        m = generate_instance(3, seed=0, lo=0, hi=9)
        for mapping in (None, (), ("x", "y", "z"), (9, 9, 9), (0,), (0, 1, 2, 0)):
            report = validate(m, Candidate(mapping))
            assert not report.is_valid
        report = validate(m, Candidate((0, "zebra", 2)))
        assert any(isinstance(v, MalformedCandidate) for v in report.violations)

    def test_no_claimed_cost_skips_fabrication_check(self):
        m = CostMatrix.from_rows([[0, 9], [9, 0]])
        assert validate(m, Candidate((0, 1))).is_valid

    def test_valid_permutations_produce_no_false_positives(self):
        m = generate_instance(4, seed=5, lo=0, hi=9)
        for perm in itertools.permutations(range(4)):
            report = validate(m, Candidate(perm, claimed_cost=m.cost_of(perm)))
            assert report.is_valid, perm


class TestScoreBatch:
    def test_oracle_replay_scores_perfectly(self):
        instances = [generate_instance(3, seed=s, lo=0, hi=20) for s in range(8)]
        candidates = []
        for m in instances:
            solved = hungarian_solve(m)
            candidates.append(Candidate(solved.mapping, solved.total_cost))
        score = score_batch(instances, candidates)
        assert score.accuracy == 1.0
        assert score.validity_rate == 1.0

    def test_all_invalid(self):
        instances = [generate_instance(2, seed=s, lo=0, hi=9) for s in range(4)]
        candidates = [Candidate((0, 0))] * 4
        score = score_batch(instances, candidates)
        assert score.accuracy == 0.0
        assert score.validity_rate == 0.0

    def test_constructed_seven_valid_four_optimal(self):
        # 10 instances: 3 invalid, 3 valid-but-suboptimal, 4 optimal
        instances = [generate_instance(3, seed=100 + s, lo=0, hi=20) for s in range(10)]
        candidates: list[Candidate] = []
        for i, m in enumerate(instances):
            optimal = brute_force_solve(m)
            if i < 3:
                candidates.append(Candidate((0, 0, 0)))  # duplicate agent: invalid
            elif i < 6:
                worse = None
                for perm in itertools.permutations(range(3)):
                    if m.cost_of(perm) > optimal.total_cost:
                        worse = perm
                        break
                assert worse is not None, "needs a suboptimal permutation; reseed"
                candidates.append(Candidate(worse, m.cost_of(worse)))
            else:
                candidates.append(Candidate(optimal.mapping, optimal.total_cost))
        score = score_batch(instances, candidates)
        assert score.validity_rate == pytest.approx(0.7)
        assert score.accuracy == pytest.approx(0.4)
        assert score.accuracy <= score.validity_rate

    def test_cost_equality_beats_mapping_equality(self):
        # two optimal mappings; the non-canonical one still counts unless strict
        m = CostMatrix.from_rows([[1, 1], [1, 1]])
        other = Candidate((1, 0), 2)
        assert score_batch([m], [other]).accuracy == 1.0
        assert score_batch([m], [other], strict_mapping=True).accuracy == 0.0

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            score_batch([generate_instance(2, 0, 0, 9)], [])

    def test_accuracy_never_exceeds_validity_on_random_batches(self):
        rng = np.random.default_rng(7)
        instances = [generate_instance(3, seed=int(s), lo=0, hi=9) for s in rng.integers(0, 1000, 30)]
        candidates = []
        for m in instances:
            roll = rng.random()
            if roll < 0.3:
                candidates.append(Candidate((0, 0, 1)))
            elif roll < 0.6:
                perm = tuple(int(x) for x in rng.permutation(3))
                candidates.append(Candidate(perm, m.cost_of(perm)))
            else:
                solved = hungarian_solve(m)
                candidates.append(Candidate(solved.mapping, solved.total_cost))
        score = score_batch(instances, candidates)
        assert score.accuracy <= score.validity_rate


class TestParsingAndSerialization:
    def test_parse_json_blob(self):
        candidate = parse_candidate_text(
            'Sure! {"mapping": [1, 0], "claimed_cost": 7} is my answer.', 2
        )
        assert candidate.mapping == (1, 0)
        assert candidate.claimed_cost == 7

    def test_parse_task_arrow_pairs(self):
        candidate = parse_candidate_text(
            "Task 0 -> agent 2, task 1 -> agent 0, task 2 -> agent 1. Total cost: 14", 3
        )
        assert candidate.mapping == (2, 0, 1)
        assert candidate.claimed_cost == 14.0

    def test_unparseable_text(self):
        candidate = parse_candidate_text("no assignments here at all", 3)
        assert candidate.mapping is None

    @given(st.text(max_size=200))
    @settings(max_examples=60, deadline=None)
    def test_parser_never_raises(self, text):
        parse_candidate_text(text, 4)

    def test_instances_round_trip(self):
        instances = [generate_instance(3, seed=s, lo=0, hi=9) for s in range(3)]
        text = dump_instances(instances)
        assert load_instances(text) == instances
        assert dump_instances(load_instances(text)) == text

    def test_candidates_round_trip(self):
        candidates = [
            Candidate((0, 1), 3.0, "raw"),
            Candidate(None, None, "garbage"),
        ]
        text = dump_candidates(candidates)
        assert load_candidates(text) == candidates
