"""Assignment problems: optimal solving and allocator scoring.

Walks through the square-assignment toolkit: generating random cost
matrices, solving them optimally, grading imperfect allocators, and
seeing how invalid answers are classified.

Run:  python demos/01_assignment_scoring.py
"""

from allocsim.assignment import (
    Candidate,
    brute_force_solve,
    generate_instance,
    hungarian_solve,
    parse_candidate_text,
    score_batch,
    validate,
)

# --- 1. one instance, solved two ways ---------------------------------------

matrix = generate_instance(n=4, seed=42, lo=0, hi=99)
print("cost matrix (agents across, tasks down):")
for row in matrix.values:
    print("   ", row)

fast = hungarian_solve(matrix)
oracle = brute_force_solve(matrix)
print(f"\noptimal mapping {list(fast.mapping)} at total cost {fast.total_cost}")
assert fast == oracle, "the polynomial solver and the enumeration oracle agree"

# --- 2. grading candidate answers -------------------------------------------

# a duplicate agent (and therefore an effectively unassigned slot)
report = validate(matrix, Candidate((0, 0, 1, 2)))
print("\nduplicate-agent candidate ->", sorted(report.kinds()))

# an honest but suboptimal permutation
suboptimal = Candidate((3, 2, 1, 0), matrix.cost_of((3, 2, 1, 0)))
print("suboptimal candidate is valid:", validate(matrix, suboptimal).is_valid)

# a claimed cost that does not match recomputation
fabricated = Candidate(fast.mapping, claimed_cost=1.0)
print("fabricated-cost candidate ->", sorted(validate(matrix, fabricated).kinds()))

# free-text answers are parsed, never trusted
candidate = parse_candidate_text(
    'The best assignment is {"mapping": [1, 0, 3, 2], "claimed_cost": 90}', matrix.n
)
print("parsed from prose:", candidate.mapping, "claimed", candidate.claimed_cost)

# --- 3. batch scoring of a cheap baseline ------------------------------------

def greedy(m):
    taken, mapping = set(), []
    for task in range(m.n):
        agent = min((a for a in range(m.n) if a not in taken),
                    key=lambda a: (m.values[task][a], a))
        taken.add(agent)
        mapping.append(agent)
    return Candidate(tuple(mapping), m.cost_of(mapping))

instances = [generate_instance(n=2 + s % 7, seed=s, lo=0, hi=99) for s in range(200)]
candidates = [greedy(m) for m in instances]
score = score_batch(instances, candidates)
print(f"\ngreedy baseline over {len(instances)} instances: "
      f"validity {score.validity_rate:.2f}, accuracy {score.accuracy:.2f}")
print("(greedy answers are always valid, rarely optimal)")
