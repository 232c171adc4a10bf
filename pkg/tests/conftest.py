"""Shared test helpers: randomized level generation and episode running."""

from __future__ import annotations

import random

import pytest

from allocsim.coordination import ControllerMode, run_episode
from allocsim.kitchen import LevelConfig, load_level
from allocsim.policies import ScriptedPlanner, ScriptedWorker


def random_level(seed: int) -> LevelConfig:
    """Small structurally valid level with generous stock.

    Cook times are kept >= 2 so a tool finishing a cook is always
    distinguishable (busy before, free after), which the conservation
    checks rely on.
    """
    rng = random.Random(seed)
    ingredients = [f"ing{i}" for i in range(rng.randint(1, 3))]
    tool_kinds = [f"tk{i}" for i in range(rng.randint(1, 2))]

    locations = [
        {"id": "storage0", "kind": "storage", "stock": {ing: 12 for ing in ingredients}},
        {"id": "servingtable0", "kind": "servingtable"},
    ]
    for kind in tool_kinds:
        for instance in range(rng.randint(1, 2)):
            locations.append(
                {"id": f"{kind}_{instance}", "kind": "tool", "tool_kind": kind}
            )

    recipes = []
    for d in range(rng.randint(1, 2)):
        dish = f"dish{d}"
        steps = []
        available = list(ingredients)
        n_steps = rng.randint(1, 2)
        for s in range(n_steps):
            inputs: dict[str, int] = {}
            for item in rng.sample(available, rng.randint(1, min(2, len(available)))):
                inputs[item] = 1
            output = dish if s == n_steps - 1 else f"{dish}_mid{s}"
            steps.append(
                {
                    "tool_kind": rng.choice(tool_kinds),
                    "inputs": inputs,
                    "output": output,
                    "cook_steps": rng.randint(2, 4),
                }
            )
            available = [output] + ingredients
        recipes.append({"dish": dish, "steps": steps})

    payload = {
        "level_id": f"random_{seed}",
        "max_steps": rng.randint(20, 60),
        "locations": locations,
        "recipes": recipes,
        "order_schedule": {
            "spawn_interval": rng.randint(4, 15),
            "lifetime": rng.randint(6, 20),
            "dish_pool": [r["dish"] for r in recipes],
        },
    }
    return LevelConfig.from_json_dict(payload)


def scripted_individual_episode(level: LevelConfig, agents: int, seed: int, budget: int | None = None):
    state = load_level(level, agents, seed)
    return run_episode(
        ControllerMode.INDIVIDUAL,
        state,
        workers={a: ScriptedWorker() for a in state.agent_ids()},
        budget=budget,
    )


def scripted_planner_episode(level: LevelConfig, agents: int, seed: int, budget: int | None = None):
    state = load_level(level, agents, seed)
    return run_episode(
        ControllerMode.PLANNER,
        state,
        workers={a: ScriptedWorker() for a in state.agent_ids()},
        planner=ScriptedPlanner(),
        budget=budget,
    )


@pytest.fixture
def level_1():
    from allocsim.levels import get_level

    return get_level("level_1")
