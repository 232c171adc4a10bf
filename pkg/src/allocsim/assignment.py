"""Square assignment problems: instance generation, solvers, and scoring.

The core object is a square cost matrix where entry ``(i, j)`` is the cost
of agent ``j`` doing task ``i``. Two solvers are provided with identical
contracts:

* :func:`hungarian_solve` -- polynomial-time, backed by
  ``scipy.optimize.linear_sum_assignment`` plus a canonicalization pass
  that selects the lexicographically smallest optimal mapping;
* :func:`brute_force_solve` -- exhaustive permutation enumeration, usable
  as an independent oracle for small ``n``.

Both return the lexicographically smallest mapping among cost-equal
optima, so cross-checking can compare mappings and not just costs.

:func:`validate` and :func:`score_batch` grade arbitrary candidate
assignments (e.g. parsed from model output) for validity and optimality.
A candidate is never an error: malformed input turns into violations.
"""

from __future__ import annotations

import itertools
import json
import re
from dataclasses import dataclass
from typing import Any, Iterable, Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

BRUTE_FORCE_MAX_N = 9


class InstanceTooLarge(ValueError):
    """Raised when a matrix exceeds the enumeration bound of an oracle."""


@dataclass(frozen=True)
class CostMatrix:
    """Square matrix of non-negative task-agent costs.

    ``values[i][j]`` is the cost of assigning agent ``j`` to task ``i``.
    """

    values: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.values)
        if n == 0:
            raise ValueError("cost matrix must be non-empty")
        for row in self.values:
            if len(row) != n:
                raise ValueError("cost matrix must be square")
            for v in row:
                if not np.isfinite(v) or v < 0:
                    raise ValueError(f"cost entries must be finite and >= 0, got {v!r}")

    @property
    def n(self) -> int:
        return len(self.values)

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[float]]) -> "CostMatrix":
        return cls(tuple(tuple(row) for row in rows))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)

    def cost_of(self, mapping: Sequence[int]) -> float:
        """Total cost of a permutation mapping (task i -> agent mapping[i])."""
        total = 0.0
        for task, agent in enumerate(mapping):
            total += self.values[task][agent]
        return total

    def to_json_dict(self) -> dict[str, Any]:
        return {"n": self.n, "values": [list(row) for row in self.values]}

    @classmethod
    def from_json_dict(cls, payload: dict[str, Any]) -> "CostMatrix":
        m = cls.from_rows(payload["values"])
        if "n" in payload and payload["n"] != m.n:
            raise ValueError(f"declared n={payload['n']} does not match values ({m.n})")
        return m


@dataclass(frozen=True)
class Assignment:
    """A task->agent bijection together with its total cost."""

    mapping: tuple[int, ...]
    total_cost: float

    def to_json_dict(self) -> dict[str, Any]:
        return {"mapping": list(self.mapping), "total_cost": self.total_cost}


# --- violations -------------------------------------------------------------


@dataclass(frozen=True)
class DuplicateAgent:
    """One agent was assigned to more than one task."""

    agent: int
    tasks: tuple[int, ...]


@dataclass(frozen=True)
class UnassignedTask:
    """A task ended up without a dedicated agent.

    Fires for tasks with a missing/unusable entry and for the later
    occurrences of a duplicated agent (the agent can only actually serve
    the first task it was given).
    """

    task: int


@dataclass(frozen=True)
class FabricatedCost:
    """The claimed total cost disagrees with the recomputed one."""

    claimed: float
    actual: float


@dataclass(frozen=True)
class MalformedCandidate:
    """The candidate is structurally unusable (wrong length, bad entries)."""

    reason: str


Violation = DuplicateAgent | UnassignedTask | FabricatedCost | MalformedCandidate


@dataclass(frozen=True)
class ValidityReport:
    violations: tuple[Violation, ...]

    @property
    def is_valid(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {type(v).__name__ for v in self.violations}


@dataclass(frozen=True)
class Candidate:
    """A raw candidate assignment, typically parsed from model output.

    ``mapping`` entries may be anything; ``None`` marks an explicitly
    unassigned task. ``claimed_cost`` is the cost the candidate stated for
    itself, if any; ``raw_text`` preserves the unparsed source.
    """

    mapping: tuple[Any, ...] | None
    claimed_cost: float | None = None
    raw_text: str | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "mapping": None if self.mapping is None else list(self.mapping),
            "claimed_cost": self.claimed_cost,
            "raw_text": self.raw_text,
        }

    @classmethod
    def from_json_dict(cls, payload: dict[str, Any]) -> "Candidate":
        mapping = payload.get("mapping")
        return cls(
            mapping=None if mapping is None else tuple(mapping),
            claimed_cost=payload.get("claimed_cost"),
            raw_text=payload.get("raw_text"),
        )


@dataclass(frozen=True)
class InstanceScore:
    valid: bool
    optimal: bool
    candidate_cost: float | None
    optimal_cost: float
    violations: tuple[Violation, ...] = ()


@dataclass(frozen=True)
class BatchScore:
    accuracy: float
    validity_rate: float
    per_instance: tuple[InstanceScore, ...]

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "accuracy": self.accuracy,
            "validity_rate": self.validity_rate,
            "per_instance": [
                {
                    "valid": s.valid,
                    "optimal": s.optimal,
                    "candidate_cost": s.candidate_cost,
                    "optimal_cost": s.optimal_cost,
                    "violations": [type(v).__name__ for v in s.violations],
                }
                for s in self.per_instance
            ],
        }


# --- operations -------------------------------------------------------------


def generate_instance(n: int, seed: int, lo: int = 0, hi: int = 99) -> CostMatrix:
    """Generate an n x n matrix of uniform integer costs in [lo, hi].

    Deterministic for a fixed ``(n, seed, lo, hi)`` tuple.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    if lo < 0:
        raise ValueError("lo must be >= 0")
    if lo > hi:
        raise ValueError("need lo <= hi")
    rng = np.random.default_rng(seed)
    values = rng.integers(lo, hi + 1, size=(n, n))
    return CostMatrix.from_rows(values.tolist())


def _scipy_optimum(values: np.ndarray) -> float:
    rows, cols = linear_sum_assignment(values)
    return float(values[rows, cols].sum())


def hungarian_solve(matrix: CostMatrix) -> Assignment:
    """Minimum-cost assignment; lexicographically smallest among optima.

    The optimum itself comes from ``scipy.optimize.linear_sum_assignment``.
    Canonicalization then fixes each task in turn to the smallest agent
    that still admits an optimal completion of the remaining sub-problem,
    which selects the lexicographically smallest optimal mapping.
    """
    values = matrix.as_array()
    n = matrix.n
    optimum = _scipy_optimum(values)

    mapping: list[int] = []
    free_agents = list(range(n))
    prefix_cost = 0.0
    for task in range(n):
        rest_tasks = np.arange(task + 1, n)
        for idx, agent in enumerate(free_agents):
            candidate_cost = prefix_cost + values[task, agent]
            if rest_tasks.size:
                rest_agents = free_agents[:idx] + free_agents[idx + 1 :]
                sub = values[np.ix_(rest_tasks, rest_agents)]
                candidate_cost += _scipy_optimum(sub)
            # integer matrices make this equality exact; float inputs get
            # a tolerance to absorb summation order
            if abs(candidate_cost - optimum) <= 1e-9 * max(1.0, abs(optimum)):
                mapping.append(agent)
                prefix_cost += values[task, agent]
                free_agents.pop(idx)
                break
        else:  # pragma: no cover - would indicate a solver bug
            raise RuntimeError("no agent preserves the optimum; inconsistent solver state")
    return Assignment(tuple(mapping), matrix.cost_of(mapping))


_PERM_CACHE: dict[int, np.ndarray] = {}


def _permutations(n: int) -> np.ndarray:
    """All permutations of range(n) in lexicographic order, shape (n!, n)."""
    if n not in _PERM_CACHE:
        _PERM_CACHE[n] = np.array(list(itertools.permutations(range(n))), dtype=np.intp)
    return _PERM_CACHE[n]


def brute_force_solve(matrix: CostMatrix) -> Assignment:
    """Exhaustive oracle with the same contract as :func:`hungarian_solve`.

    Enumerates all n! permutations (n <= 9). Lexicographic tie-breaking
    falls out of enumerating permutations in lexicographic order and
    keeping the first minimum.
    """
    n = matrix.n
    if n > BRUTE_FORCE_MAX_N:
        raise InstanceTooLarge(f"n={n} exceeds brute-force bound {BRUTE_FORCE_MAX_N}")
    values = matrix.as_array()
    perms = _permutations(n)
    costs = values[np.arange(n), perms].sum(axis=1)
    best = int(np.argmin(costs))  # argmin returns the first (lex-smallest) minimum
    mapping = tuple(int(a) for a in perms[best])
    return Assignment(mapping, matrix.cost_of(mapping))


def validate(matrix: CostMatrix, candidate: Candidate) -> ValidityReport:
    """Grade a candidate against the matrix; garbage yields violations.

    Checks the three failure classes of interest: an agent assigned to
    several tasks, tasks left without an agent, and a claimed total cost
    that does not match recomputation. Structural garbage (missing
    mapping, wrong length, non-integer or out-of-range entries) is
    additionally flagged as :class:`MalformedCandidate`.
    """
    n = matrix.n
    violations: list[Violation] = []

    mapping = candidate.mapping
    if mapping is None:
        violations.append(MalformedCandidate("no mapping"))
        violations.extend(UnassignedTask(t) for t in range(n))
        return ValidityReport(tuple(violations))

    if len(mapping) != n:
        violations.append(
            MalformedCandidate(f"mapping has length {len(mapping)}, expected {n}")
        )

    seen: dict[int, int] = {}  # agent -> first task
    duplicate_tasks: dict[int, list[int]] = {}
    for task in range(n):
        entry = mapping[task] if task < len(mapping) else None
        if entry is None:
            violations.append(UnassignedTask(task))
            continue
        if isinstance(entry, bool) or not isinstance(entry, (int, np.integer)):
            violations.append(MalformedCandidate(f"task {task}: entry {entry!r} is not an agent index"))
            violations.append(UnassignedTask(task))
            continue
        agent = int(entry)
        if not 0 <= agent < n:
            violations.append(MalformedCandidate(f"task {task}: agent {agent} out of range"))
            violations.append(UnassignedTask(task))
            continue
        if agent in seen:
            duplicate_tasks.setdefault(agent, [seen[agent]]).append(task)
            # the agent can only actually serve its first task
            violations.append(UnassignedTask(task))
        else:
            seen[agent] = task
    for agent, tasks in duplicate_tasks.items():
        violations.append(DuplicateAgent(agent, tuple(tasks)))

    if not violations and candidate.claimed_cost is not None:
        actual = matrix.cost_of([int(a) for a in mapping])
        if abs(candidate.claimed_cost - actual) > 1e-9:
            violations.append(FabricatedCost(candidate.claimed_cost, actual))

    return ValidityReport(tuple(violations))


def score_batch(
    instances: Sequence[CostMatrix],
    candidates: Sequence[Candidate],
    strict_mapping: bool = False,
) -> BatchScore:
    """Score candidates for validity and optimality, instance by instance.

    A candidate is optimal when it is valid and its recomputed cost equals
    the Hungarian optimum. With ``strict_mapping`` the mapping must equal
    the canonical optimal mapping exactly, which treats non-unique optima
    as wrong (a stricter, ground-truth-replay criterion).
    """
    if len(instances) != len(candidates):
        raise ValueError(
            f"got {len(instances)} instances but {len(candidates)} candidates"
        )
    rows: list[InstanceScore] = []
    n_valid = 0
    n_optimal = 0
    for matrix, candidate in zip(instances, candidates):
        reference = hungarian_solve(matrix)
        report = validate(matrix, candidate)
        if report.is_valid:
            assert candidate.mapping is not None
            mapping = [int(a) for a in candidate.mapping]
            cost = matrix.cost_of(mapping)
            if strict_mapping:
                optimal = tuple(mapping) == reference.mapping
            else:
                optimal = abs(cost - reference.total_cost) <= 1e-9
            n_valid += 1
            n_optimal += int(optimal)
            rows.append(InstanceScore(True, optimal, cost, reference.total_cost))
        else:
            rows.append(
                InstanceScore(False, False, None, reference.total_cost, report.violations)
            )
    total = len(rows)
    return BatchScore(
        accuracy=n_optimal / total if total else 0.0,
        validity_rate=n_valid / total if total else 0.0,
        per_instance=tuple(rows),
    )


# --- candidate parsing ------------------------------------------------------

_JSON_OBJECT = re.compile(r"\{[^{}]*\}", re.DOTALL)
_PAIR = re.compile(r"task\s*(\d+)\s*(?:->|->|:|→|=)\s*(?:agent\s*)?(\d+)", re.IGNORECASE)
_COST = re.compile(r"(?:total\s+)?cost\s*(?:is|=|:)?\s*(\d+(?:\.\d+)?)", re.IGNORECASE)


def parse_candidate_text(text: str, n: int) -> Candidate:
    """Extract a candidate mapping and claimed cost from free-form text.

    Accepts either an embedded JSON object with a ``mapping`` list or
    ``task i -> agent j`` pairs; the last statement about a task wins.
    Anything unparseable yields a candidate with ``mapping=None``, which
    :func:`validate` then flags rather than raising.
    """
    for blob in _JSON_OBJECT.findall(text):
        try:
            payload = json.loads(blob)
        except json.JSONDecodeError:
            continue
        if isinstance(payload, dict) and isinstance(payload.get("mapping"), list):
            return Candidate(
                mapping=tuple(payload["mapping"]),
                claimed_cost=payload.get("claimed_cost", payload.get("total_cost")),
                raw_text=text,
            )

    pairs = _PAIR.findall(text)
    claimed = None
    cost_match = _COST.search(text)
    if cost_match:
        claimed = float(cost_match.group(1))
    if pairs:
        entries: list[Any] = [None] * n
        for task_s, agent_s in pairs:
            task = int(task_s)
            if 0 <= task < n:
                entries[task] = int(agent_s)
        return Candidate(tuple(entries), claimed, text)
    return Candidate(None, claimed, text)


# --- serialization ----------------------------------------------------------


def dump_instances(instances: Iterable[CostMatrix]) -> str:
    return json.dumps([m.to_json_dict() for m in instances], indent=2, sort_keys=True)


def load_instances(text: str) -> list[CostMatrix]:
    return [CostMatrix.from_json_dict(d) for d in json.loads(text)]


def dump_candidates(candidates: Iterable[Candidate]) -> str:
    return json.dumps([c.to_json_dict() for c in candidates], indent=2, sort_keys=True)


def load_candidates(text: str) -> list[Candidate]:
    return [Candidate.from_json_dict(d) for d in json.loads(text)]
