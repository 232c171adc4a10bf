"""Experiment runner CLI.

Subcommands:

* ``assign-eval`` -- generate assignment instances, run an allocator over
  them, and score validity/accuracy against the optimal solver;
* ``kitchen-run`` -- run kitchen episodes under one or all coordination
  modes and emit traces and reports;
* ``capability-sweep`` -- paired on-the-fly vs informed planner runs over
  a worker roster, sharing seeds;
* ``replay`` -- re-execute a trace file and verify it hashes identically.

Runs are configured by a JSON file (``--config``) with per-flag keys;
explicit flags win over the file. All randomness derives from the single
``--seed`` via labelled paths, so any sub-run is reproducible on its own.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import assignment as asg
from .accounting import capability_hint
from .coordination import ControllerMode, EpisodeReport, run_episode
from .gateway import ModelBinding, install_mock
from .kitchen import (
    EpisodeOver,
    KitchenState,
    LevelConfig,
    action_from_json_dict,
    load_level,
    observation_hash,
    step as kitchen_step,
)
from .levels import BUILTIN_LEVELS, get_level
from .policies import (
    FlakyWorker,
    GatewayOrchestrator,
    GatewayPlanner,
    GatewayWorker,
    ScriptedOrchestrator,
    ScriptedPlanner,
    ScriptedWorker,
)
from .seeding import derive_seed


class ConfigError(ValueError):
    pass


def _dump_json(path: Path, payload: Any) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _jsonl_line(payload: Any) -> str:
    return json.dumps(payload, sort_keys=True, separators=(",", ":"))


def _merge_config(args: argparse.Namespace, keys: Sequence[str]) -> dict[str, Any]:
    """File values fill in whatever the command line left unset."""
    merged: dict[str, Any] = {}
    file_conf: dict[str, Any] = {}
    if getattr(args, "config", None):
        path = Path(args.config)
        if not path.exists():
            raise ConfigError(f"config file not found: {path}")
        try:
            file_conf = json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file {path}: invalid JSON at line {exc.lineno}: {exc.msg}")
    for key in keys:
        flag_value = getattr(args, key, None)
        merged[key] = flag_value if flag_value is not None else file_conf.get(key)
    merged["bindings"] = file_conf.get("bindings", {})
    return merged


def _require(conf: Mapping[str, Any], key: str, kind: type, where: str) -> Any:
    value = conf.get(key)
    if value is None:
        raise ConfigError(f"{where}: missing required setting {key!r}")
    try:
        return kind(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{where}: setting {key!r} must be {kind.__name__}, got {value!r}")


def _int_or(conf: Mapping[str, Any], key: str, default: int) -> int:
    value = conf.get(key)
    return default if value is None else int(value)


def _load_level_config(spec: str) -> LevelConfig:
    if spec in BUILTIN_LEVELS:
        return get_level(spec)
    path = Path(spec)
    if not path.exists():
        raise ConfigError(
            f"level {spec!r} is neither a built-in ({sorted(BUILTIN_LEVELS)}) nor a file"
        )
    return LevelConfig.from_json(path.read_text(encoding="utf-8"))


# --- binding construction ----------------------------------------------------


def _worker_from_spec(spec: Any, seed: int, label: str):
    if spec is None or spec == "scripted":
        return ScriptedWorker()
    if isinstance(spec, str):
        if spec.startswith("scripted:"):
            rate = float(spec.split(":", 1)[1])
            return FlakyWorker(ScriptedWorker(), rate, derive_seed(seed, "flaky", label))
        raise ConfigError(f"unknown worker spec {spec!r}")
    if isinstance(spec, Mapping):
        kind = spec.get("kind", "scripted")
        if kind == "scripted":
            return ScriptedWorker()
        if kind == "flaky":
            rate = float(spec.get("failure_rate", 0.0))
            return FlakyWorker(ScriptedWorker(), rate, derive_seed(seed, "flaky", label))
        if kind in ("model", "mock"):
            binding = ModelBinding(
                model_id=spec["model_id"],
                endpoint_url=spec.get("endpoint_url", ""),
                auth_env_var=spec.get("auth_env_var", ""),
                max_retries=int(spec.get("max_retries", 2)),
            )
            transport = None
            if kind == "mock":
                script = json.loads(Path(spec["script"]).read_text(encoding="utf-8"))
                transport = install_mock(script)
            return GatewayWorker(binding, transport)
    raise ConfigError(f"unintelligible worker spec {spec!r}")


def _central_from_spec(spec: Any):
    if spec is None or spec == "scripted" or (isinstance(spec, Mapping) and spec.get("kind", "scripted") == "scripted"):
        return ScriptedOrchestrator()
    if isinstance(spec, Mapping) and spec.get("kind") in ("model", "mock"):
        binding = ModelBinding(
            model_id=spec["model_id"],
            endpoint_url=spec.get("endpoint_url", ""),
            auth_env_var=spec.get("auth_env_var", ""),
            max_retries=int(spec.get("max_retries", 2)),
        )
        transport = None
        if spec.get("kind") == "mock":
            script = json.loads(Path(spec["script"]).read_text(encoding="utf-8"))
            transport = install_mock(script)
        return GatewayOrchestrator(binding, transport)
    raise ConfigError(f"unintelligible orchestrator spec {spec!r}")


def _planner_from_spec(spec: Any):
    if spec is None or spec == "scripted" or (isinstance(spec, Mapping) and spec.get("kind", "scripted") == "scripted"):
        return ScriptedPlanner()
    if isinstance(spec, Mapping) and spec.get("kind") in ("model", "mock"):
        binding = ModelBinding(
            model_id=spec["model_id"],
            endpoint_url=spec.get("endpoint_url", ""),
            auth_env_var=spec.get("auth_env_var", ""),
            max_retries=int(spec.get("max_retries", 2)),
        )
        transport = None
        if spec.get("kind") == "mock":
            script = json.loads(Path(spec["script"]).read_text(encoding="utf-8"))
            transport = install_mock(script)
        return GatewayPlanner(binding, transport)
    raise ConfigError(f"unintelligible planner spec {spec!r}")


# --- assign-eval ---------------------------------------------------------------


def _greedy_candidate(matrix: asg.CostMatrix) -> asg.Candidate:
    """Row-by-row greedy: each task takes its cheapest still-free agent."""
    taken: set[int] = set()
    mapping: list[int] = []
    for task in range(matrix.n):
        best = min(
            (a for a in range(matrix.n) if a not in taken),
            key=lambda a: (matrix.values[task][a], a),
        )
        taken.add(best)
        mapping.append(best)
    cost = matrix.cost_of(mapping)
    return asg.Candidate(tuple(mapping), cost, raw_text=f"greedy mapping {mapping}, cost {cost}")


def _allocate(matrix: asg.CostMatrix, allocator: str, rng: np.random.Generator,
              mock_pool: list[Any] | None) -> asg.Candidate:
    if allocator == "hungarian":
        solved = asg.hungarian_solve(matrix)
        return asg.Candidate(
            solved.mapping, solved.total_cost,
            raw_text=f"mapping {list(solved.mapping)}, cost {solved.total_cost}",
        )
    if allocator == "greedy":
        return _greedy_candidate(matrix)
    if allocator == "random":
        mapping = tuple(int(x) for x in rng.permutation(matrix.n))
        return asg.Candidate(mapping, matrix.cost_of(mapping), raw_text=str(mapping))
    if allocator == "mock":
        if not mock_pool:
            raise ConfigError("mock allocator ran out of scripted candidates")
        entry = mock_pool.pop(0)
        if isinstance(entry, str):
            return asg.parse_candidate_text(entry, matrix.n)
        return asg.Candidate.from_json_dict(entry)
    raise ConfigError(f"unknown allocator {allocator!r}")


def cmd_assign_eval(args: argparse.Namespace) -> int:
    conf = _merge_config(
        args, ["seed", "instances", "n_min", "n_max", "lo", "hi", "allocator", "output", "strict_mapping", "mock_file"]
    )
    seed = _require(conf, "seed", int, "assign-eval")
    count = _require(conf, "instances", int, "assign-eval")
    n_min = _int_or(conf, "n_min", 2)
    n_max = _int_or(conf, "n_max", 8)
    lo = _int_or(conf, "lo", 0)
    hi = _int_or(conf, "hi", 99)
    allocator = conf.get("allocator") or "hungarian"
    strict = bool(conf.get("strict_mapping"))
    output = Path(_require(conf, "output", str, "assign-eval"))
    if count < 1:
        raise ConfigError("assign-eval: instances must be >= 1")
    if not 1 <= n_min <= n_max:
        raise ConfigError(f"assign-eval: bad n range [{n_min}, {n_max}]")

    mock_pool = None
    if allocator == "mock":
        mock_file = conf.get("mock_file")
        if not mock_file:
            raise ConfigError("assign-eval: allocator 'mock' needs --mock-file")
        mock_pool = json.loads(Path(mock_file).read_text(encoding="utf-8"))

    output.mkdir(parents=True, exist_ok=True)
    instances: list[asg.CostMatrix] = []
    candidates: list[asg.Candidate] = []
    for i in range(count):
        size_rng = np.random.default_rng(derive_seed(seed, "size", i))
        n = int(size_rng.integers(n_min, n_max + 1))
        matrix = asg.generate_instance(n, derive_seed(seed, "instance", i), lo, hi)
        alloc_rng = np.random.default_rng(derive_seed(seed, "allocator", i))
        instances.append(matrix)
        candidates.append(_allocate(matrix, allocator, alloc_rng, mock_pool))

    score = asg.score_batch(instances, candidates, strict_mapping=strict)
    (output / "instances.json").write_text(asg.dump_instances(instances) + "\n", encoding="utf-8")
    (output / "candidates.json").write_text(asg.dump_candidates(candidates) + "\n", encoding="utf-8")
    _dump_json(output / "score.json", score.to_json_dict())

    lines = ["instance,valid,optimal,candidate_cost,optimal_cost,violations"]
    for i, row in enumerate(score.per_instance):
        violations = ";".join(type(v).__name__ for v in row.violations)
        cand = "" if row.candidate_cost is None else row.candidate_cost
        lines.append(f"{i},{int(row.valid)},{int(row.optimal)},{cand},{row.optimal_cost},{violations}")
    (output / "score.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    print(f"assign-eval: {count} instances, allocator={allocator}, "
          f"validity={score.validity_rate:.3f}, accuracy={score.accuracy:.3f}")
    return 0


# --- kitchen-run -----------------------------------------------------------------


def _write_episode_artifacts(
    output: Path,
    report: EpisodeReport,
    level: LevelConfig,
    agent_count: int,
    seed: int,
    budget: int | None,
) -> None:
    output.mkdir(parents=True, exist_ok=True)
    header = {
        "kind": "trace_header",
        "level": level.to_json_dict(),
        "agent_count": agent_count,
        "seed": seed,
        "mode": report.mode.value,
        "budget": budget,
    }
    with (output / "trace.jsonl").open("w", encoding="utf-8") as fh:
        fh.write(_jsonl_line(header) + "\n")
        for record in report.trace:
            fh.write(_jsonl_line(record) + "\n")
    _dump_json(output / "report.json", report.to_json_dict())
    _dump_json(output / "efficiency.json", report.efficiency_report().to_json_dict())
    (output / "ledger.csv").write_text(report.ledger.to_csv(), encoding="utf-8")

    histogram = report.efficiency_report().action_histogram
    lines = ["action,count,fraction"]
    for kind, fraction in histogram.items():
        lines.append(f"{kind},{report.action_counts.get(kind, 0)},{fraction!r}")
    (output / "histogram.csv").write_text("\n".join(lines) + "\n", encoding="utf-8")


def _run_one_mode(
    mode: ControllerMode,
    level: LevelConfig,
    agent_count: int,
    seed: int,
    budget: int | None,
    bindings: Mapping[str, Any],
) -> EpisodeReport:
    state = load_level(level, agent_count, seed)
    worker_specs = bindings.get("workers")
    workers = {}
    for i, agent_id in enumerate(state.agent_ids()):
        spec = None
        if isinstance(worker_specs, list) and worker_specs:
            spec = worker_specs[i % len(worker_specs)]
        elif worker_specs is not None:
            spec = worker_specs
        workers[agent_id] = _worker_from_spec(spec, seed, agent_id)
    if mode is ControllerMode.ORCHESTRATOR:
        return run_episode(mode, state, central=_central_from_spec(bindings.get("orchestrator")), budget=budget)
    if mode is ControllerMode.PLANNER:
        return run_episode(
            mode, state, workers=workers,
            planner=_planner_from_spec(bindings.get("planner")), budget=budget,
        )
    return run_episode(mode, state, workers=workers, budget=budget)


def cmd_kitchen_run(args: argparse.Namespace) -> int:
    conf = _merge_config(args, ["seed", "level", "agents", "mode", "budget", "output", "jobs"])
    seed = _require(conf, "seed", int, "kitchen-run")
    agents = _require(conf, "agents", int, "kitchen-run")
    level = _load_level_config(conf.get("level") or "level_1")
    mode_arg = (conf.get("mode") or "individual").lower()
    budget = int(conf["budget"]) if conf.get("budget") is not None else None
    output = Path(_require(conf, "output", str, "kitchen-run"))
    jobs = _int_or(conf, "jobs", 1)
    bindings = conf.get("bindings", {})

    if mode_arg == "all":
        modes = [ControllerMode.INDIVIDUAL, ControllerMode.ORCHESTRATOR, ControllerMode.PLANNER]
    else:
        try:
            modes = [ControllerMode(mode_arg)]
        except ValueError:
            raise ConfigError(f"kitchen-run: unknown mode {mode_arg!r}")

    def run(mode: ControllerMode) -> tuple[ControllerMode, EpisodeReport]:
        episode_seed = derive_seed(seed, "episode", mode.value)
        return mode, _run_one_mode(mode, level, agents, episode_seed, budget, bindings)

    if jobs > 1 and len(modes) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(run, modes))
    else:
        results = [run(m) for m in modes]

    for mode, report in results:
        target = output / mode.value if len(modes) > 1 else output
        episode_seed = derive_seed(seed, "episode", mode.value)
        _write_episode_artifacts(target, report, level, agents, episode_seed, budget)
        planner_note = (
            f", planner replans={report.planner_invocations}"
            if mode is ControllerMode.PLANNER
            else ""
        )
        print(
            f"kitchen-run[{mode.value}]: completed={report.completed_orders} "
            f"steps={report.steps} fallbacks={len(report.fallbacks)}{planner_note}"
        )
    return 0


# --- replay ----------------------------------------------------------------------


def cmd_replay(args: argparse.Namespace) -> int:
    trace_path = Path(args.trace)
    if not trace_path.exists():
        raise ConfigError(f"trace file not found: {trace_path}")
    with trace_path.open(encoding="utf-8") as fh:
        lines = [json.loads(line) for line in fh if line.strip()]
    if not lines or lines[0].get("kind") != "trace_header":
        raise ConfigError("trace file lacks a header record")
    header = lines[0]
    level = LevelConfig.from_json_dict(header["level"])
    state = load_level(level, int(header["agent_count"]), int(header["seed"]))

    mismatches = 0
    for record in lines[1:]:
        actions = {
            agent: action_from_json_dict(
                _action_payload(agent, text)
            )
            for agent, text in record["actions"].items()
        }
        try:
            outcome = kitchen_step(state, actions)
        except EpisodeOver:
            print(f"replay: step {record['step']} exceeds the episode length")
            return 1
        state = outcome.next_state
        got_events = [e.to_json_dict() for e in outcome.events]
        got_hash = observation_hash(state)
        if got_events != record["events"] or got_hash != record["observation_hash"]:
            mismatches += 1
            print(f"replay: mismatch at step {record['step']}")
    if mismatches:
        print(f"replay: FAILED with {mismatches} mismatching steps")
        return 1
    print(f"replay: OK, {len(lines) - 1} steps verified")
    return 0


def _action_payload(agent: str, text: str) -> dict[str, Any]:
    """Parse the canonical action text stored in traces back to a payload."""
    verb, _, rest = text.partition("(")
    parts = [p.strip() for p in rest.rstrip(")").split(",")]
    payload: dict[str, Any] = {"kind": verb.strip(), "agent": parts[0]}
    if verb in ("goto", "put", "activate", "get"):
        payload["location"] = parts[1]
    if verb == "get":
        payload["item"] = parts[2]
    return payload


# --- capability-sweep --------------------------------------------------------------


def cmd_capability_sweep(args: argparse.Namespace) -> int:
    conf = _merge_config(args, ["seed", "level", "workers", "budget", "output", "jobs"])
    seed = _require(conf, "seed", int, "capability-sweep")
    level = _load_level_config(conf.get("level") or "level_1")
    budget = int(conf["budget"]) if conf.get("budget") is not None else None
    output = Path(_require(conf, "output", str, "capability-sweep"))
    workers_arg = conf.get("workers")
    if workers_arg is None:
        raise ConfigError("capability-sweep: needs --workers (comma-separated specs)")
    specs = workers_arg.split(",") if isinstance(workers_arg, str) else list(workers_arg)
    if not 1 <= len(specs) <= 6:
        raise ConfigError("capability-sweep: roster must have 1..6 workers")

    episode_seed = derive_seed(seed, "sweep")
    planner_spec = conf.get("bindings", {}).get("planner")

    def build_workers(state: KitchenState) -> dict[str, Any]:
        return {
            agent_id: _worker_from_spec(specs[i], seed, agent_id)
            for i, agent_id in enumerate(state.agent_ids())
        }

    # pass 1: on-the-fly -- the planner knows nothing about its workers
    state = load_level(level, len(specs), episode_seed)
    workers = build_workers(state)
    onthefly = run_episode(
        ControllerMode.PLANNER, state, workers=workers,
        planner=_planner_from_spec(planner_spec), budget=budget,
    )

    # pass 2: informed -- same seed, hints measured from pass 1
    roster_models = [
        (agent_id, workers[agent_id].model_id) for agent_id in sorted(workers)
    ]
    hint = capability_hint(onthefly.capability, roster_models)
    state = load_level(level, len(specs), episode_seed)
    informed = run_episode(
        ControllerMode.PLANNER, state, workers=build_workers(state),
        planner=_planner_from_spec(planner_spec), budget=budget,
        capability_block=hint,
    )

    output.mkdir(parents=True, exist_ok=True)
    _write_episode_artifacts(output / "onthefly", onthefly, level, len(specs), episode_seed, budget)
    _write_episode_artifacts(output / "informed", informed, level, len(specs), episode_seed, budget)

    eff_on = onthefly.efficiency_report()
    eff_in = informed.efficiency_report()
    comparison = {
        "workers": specs,
        "capability_hint": hint,
        "onthefly": {
            "completed_orders": onthefly.completed_orders,
            "efficiency": None if eff_on.efficiency is None else float(eff_on.efficiency),
        },
        "informed": {
            "completed_orders": informed.completed_orders,
            "efficiency": None if eff_in.efficiency is None else float(eff_in.efficiency),
        },
        "completed_delta": informed.completed_orders - onthefly.completed_orders,
        "efficiency_delta": (
            float(eff_in.efficiency - eff_on.efficiency)
            if eff_in.efficiency is not None and eff_on.efficiency is not None
            else None
        ),
    }
    _dump_json(output / "comparison.json", comparison)
    print(
        f"capability-sweep: onthefly={onthefly.completed_orders} "
        f"informed={informed.completed_orders} "
        f"delta={comparison['completed_delta']}"
    )
    return 0


# --- entry point -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="allocsim", description="Multi-agent task allocation experiments"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON config file; flags override it")
    common.add_argument("--seed", type=int, help="root seed for all randomness")
    common.add_argument("--output", help="output directory")
    common.add_argument("--jobs", type=int, help="parallel episodes (sweeps)")

    p = sub.add_parser("assign-eval", parents=[common], help="score an allocator on assignment instances")
    p.add_argument("--instances", type=int, help="number of instances")
    p.add_argument("--n-min", dest="n_min", type=int, help="smallest matrix size")
    p.add_argument("--n-max", dest="n_max", type=int, help="largest matrix size")
    p.add_argument("--lo", type=int, help="minimum cost entry")
    p.add_argument("--hi", type=int, help="maximum cost entry")
    p.add_argument("--allocator", choices=["hungarian", "greedy", "random", "mock"])
    p.add_argument("--mock-file", dest="mock_file", help="JSON list of canned candidates for --allocator mock")
    p.add_argument("--strict-mapping", dest="strict_mapping", action="store_const", const=True,
                   help="score optimality by exact mapping equality")
    p.set_defaults(func=cmd_assign_eval)

    p = sub.add_parser("kitchen-run", parents=[common], help="run kitchen episodes")
    p.add_argument("--level", help="built-in level id or level JSON path")
    p.add_argument("--agents", type=int, help="number of agents (1..6)")
    p.add_argument("--mode", help="individual | orchestrator | planner | all")
    p.add_argument("--budget", type=int, help="step budget (default: level max)")
    p.set_defaults(func=cmd_kitchen_run)

    p = sub.add_parser("capability-sweep", parents=[common],
                       help="paired on-the-fly vs informed planner runs")
    p.add_argument("--level", help="built-in level id or level JSON path")
    p.add_argument("--workers", help="comma-separated worker specs, e.g. scripted:0.0,scripted:0.3")
    p.add_argument("--budget", type=int, help="step budget")
    p.set_defaults(func=cmd_capability_sweep)

    p = sub.add_parser("replay", help="re-execute a trace and verify hashes")
    p.add_argument("--trace", required=True, help="trace.jsonl produced by kitchen-run")
    p.set_defaults(func=cmd_replay)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
