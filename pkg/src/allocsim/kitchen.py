"""Deterministic kitchen simulator with timed dish orders.

Agents move between locations (ingredient storages, cooking tools, a
serving table), carry one item at a time, load tools and activate them to
transform ingredients, and deliver finished dishes to the serving table
before the corresponding order expires. The action space is
``goto/get/put/activate/noop``; the observation is a fixed text rendering
of the full state.

Step pipeline, in order:

1. actions resolve sequentially by ascending agent id -- an action that
   fails only because an earlier agent's action beat it to a resource is
   reported as contention;
2. every busy tool's cook counter decrements (including tools activated
   this step); at zero the tool's contents are replaced by the step
   output;
3. live order lifetimes decrement; orders reaching zero expire;
4. if the next step index is a spawn step, the next scheduled order is
   introduced, so policies can see it before acting on that step.

The entire order schedule is drawn up-front from the level seed, so state
carries no live RNG and identical inputs replay byte-identically.
"""

from __future__ import annotations

import copy
import hashlib
import json
import random
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Mapping

MIN_AGENTS = 1
MAX_AGENTS = 6


class UnknownAgent(KeyError):
    """An action or query referenced an agent that does not exist."""


class UnknownLocation(KeyError):
    """An action referenced a location that does not exist."""


class EpisodeOver(RuntimeError):
    """step() was called on a state already at the step limit."""


class MalformedLevel(ValueError):
    """A level config violates its own structural rules."""


# --- level configuration ----------------------------------------------------


class LocationKind(str, Enum):
    STORAGE = "storage"
    SERVING_TABLE = "servingtable"
    TOOL = "tool"


@dataclass(frozen=True)
class LocationSpec:
    id: str
    kind: LocationKind
    tool_kind: str | None = None
    stock: Mapping[str, int] = field(default_factory=dict)


@dataclass(frozen=True)
class RecipeStep:
    tool_kind: str
    inputs: Mapping[str, int]
    output: str
    cook_steps: int

    def __post_init__(self) -> None:
        if self.cook_steps < 1:
            raise MalformedLevel("cook_steps must be >= 1")
        if not self.inputs:
            raise MalformedLevel("a recipe step needs at least one input")


@dataclass(frozen=True)
class Recipe:
    dish: str
    steps: tuple[RecipeStep, ...]

    def __post_init__(self) -> None:
        if not self.steps:
            raise MalformedLevel(f"recipe for {self.dish} has no steps")
        if self.steps[-1].output != self.dish:
            raise MalformedLevel(
                f"recipe for {self.dish}: final step produces {self.steps[-1].output!r}"
            )


@dataclass(frozen=True)
class OrderSchedule:
    spawn_interval: int
    lifetime: int
    dish_pool: tuple[str, ...]

    def __post_init__(self) -> None:
        if self.spawn_interval < 1 or self.lifetime < 1:
            raise MalformedLevel("spawn_interval and lifetime must be >= 1")
        if not self.dish_pool:
            raise MalformedLevel("dish_pool must not be empty")


@dataclass(frozen=True)
class LevelConfig:
    level_id: str
    locations: tuple[LocationSpec, ...]
    recipes: tuple[Recipe, ...]
    order_schedule: OrderSchedule
    max_steps: int

    def __post_init__(self) -> None:
        if self.max_steps < 1:
            raise MalformedLevel("max_steps must be >= 1")
        ids = [loc.id for loc in self.locations]
        if len(set(ids)) != len(ids):
            raise MalformedLevel("duplicate location ids")
        if not any(loc.kind is LocationKind.SERVING_TABLE for loc in self.locations):
            raise MalformedLevel("a level needs at least one serving table")
        for loc in self.locations:
            if loc.kind is LocationKind.TOOL and not loc.tool_kind:
                raise MalformedLevel(f"tool location {loc.id} lacks a tool_kind")
            if loc.kind is not LocationKind.STORAGE and loc.stock:
                raise MalformedLevel(f"only storages may carry stock ({loc.id})")
        dishes = {r.dish for r in self.recipes}
        for dish in self.order_schedule.dish_pool:
            if dish not in dishes:
                raise MalformedLevel(f"dish_pool entry {dish!r} has no recipe")
        storage_items = set()
        for loc in self.locations:
            storage_items.update(loc.stock)
        tool_kinds = {loc.tool_kind for loc in self.locations if loc.kind is LocationKind.TOOL}
        for recipe in self.recipes:
            known = set(storage_items)
            for step in recipe.steps:
                if step.tool_kind not in tool_kinds:
                    raise MalformedLevel(
                        f"recipe {recipe.dish}: no {step.tool_kind!r} tool in level"
                    )
                for item in step.inputs:
                    if item not in known:
                        raise MalformedLevel(
                            f"recipe {recipe.dish}: input {item!r} is neither stocked nor a prior output"
                        )
                known.add(step.output)

    def recipe_for(self, dish: str) -> Recipe:
        for recipe in self.recipes:
            if recipe.dish == dish:
                return recipe
        raise KeyError(dish)

    def spawn_steps(self) -> list[int]:
        return list(range(0, self.max_steps, self.order_schedule.spawn_interval))

    def to_json_dict(self) -> dict[str, Any]:
        return {
            "level_id": self.level_id,
            "max_steps": self.max_steps,
            "locations": [
                {
                    "id": loc.id,
                    "kind": loc.kind.value,
                    **({"tool_kind": loc.tool_kind} if loc.tool_kind else {}),
                    **({"stock": dict(loc.stock)} if loc.stock else {}),
                }
                for loc in self.locations
            ],
            "recipes": [
                {
                    "dish": r.dish,
                    "steps": [
                        {
                            "tool_kind": s.tool_kind,
                            "inputs": dict(s.inputs),
                            "output": s.output,
                            "cook_steps": s.cook_steps,
                        }
                        for s in r.steps
                    ],
                }
                for r in self.recipes
            ],
            "order_schedule": {
                "spawn_interval": self.order_schedule.spawn_interval,
                "lifetime": self.order_schedule.lifetime,
                "dish_pool": list(self.order_schedule.dish_pool),
            },
        }

    @classmethod
    def from_json_dict(cls, payload: Mapping[str, Any]) -> "LevelConfig":
        try:
            locations = tuple(
                LocationSpec(
                    id=loc["id"],
                    kind=LocationKind(loc["kind"]),
                    tool_kind=loc.get("tool_kind"),
                    stock=dict(loc.get("stock", {})),
                )
                for loc in payload["locations"]
            )
            recipes = tuple(
                Recipe(
                    dish=r["dish"],
                    steps=tuple(
                        RecipeStep(
                            tool_kind=s["tool_kind"],
                            inputs=dict(s["inputs"]),
                            output=s["output"],
                            cook_steps=int(s["cook_steps"]),
                        )
                        for s in r["steps"]
                    ),
                )
                for r in payload["recipes"]
            )
            schedule = OrderSchedule(
                spawn_interval=int(payload["order_schedule"]["spawn_interval"]),
                lifetime=int(payload["order_schedule"]["lifetime"]),
                dish_pool=tuple(payload["order_schedule"]["dish_pool"]),
            )
            return cls(
                level_id=payload["level_id"],
                locations=locations,
                recipes=recipes,
                order_schedule=schedule,
                max_steps=int(payload["max_steps"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, MalformedLevel):
                raise
            raise MalformedLevel(f"bad level config: {exc}") from exc

    @classmethod
    def from_json(cls, text: str) -> "LevelConfig":
        return cls.from_json_dict(json.loads(text))


# --- runtime state ----------------------------------------------------------


@dataclass
class Processing:
    remaining_steps: int
    output_item: str


@dataclass
class LocationState:
    id: str
    kind: LocationKind
    tool_kind: str | None = None
    contents: Counter = field(default_factory=Counter)
    occupied_by: str | None = None
    processing: Processing | None = None

    @property
    def busy(self) -> bool:
        return self.processing is not None


@dataclass
class AgentState:
    id: str
    at: str
    holding: str | None = None


@dataclass
class DishOrder:
    dish: str
    lifetime: int
    issued_at: int
    ordinal: int


# --- actions and events -----------------------------------------------------


@dataclass(frozen=True)
class Goto:
    agent: str
    location: str

    def to_text(self) -> str:
        return f"goto({self.agent}, {self.location})"


@dataclass(frozen=True)
class Get:
    agent: str
    location: str
    item: str

    def to_text(self) -> str:
        return f"get({self.agent}, {self.location}, {self.item})"


@dataclass(frozen=True)
class Put:
    agent: str
    location: str

    def to_text(self) -> str:
        return f"put({self.agent}, {self.location})"


@dataclass(frozen=True)
class Activate:
    agent: str
    location: str

    def to_text(self) -> str:
        return f"activate({self.agent}, {self.location})"


@dataclass(frozen=True)
class Noop:
    agent: str

    def to_text(self) -> str:
        return f"noop({self.agent})"


KitchenAction = Goto | Get | Put | Activate | Noop

ACTION_KINDS = ("goto", "get", "put", "activate", "noop")


def action_kind(action: KitchenAction) -> str:
    return type(action).__name__.lower()


class EventKind(str, Enum):
    ORDER_INTRODUCED = "order_introduced"
    ORDER_COMPLETED = "order_completed"
    ORDER_EXPIRED = "order_expired"


@dataclass(frozen=True)
class KitchenEvent:
    kind: EventKind
    dish: str
    step: int

    def to_json_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "dish": self.dish, "step": self.step}


class FailReason(str, Enum):
    NOT_AT_LOCATION = "not_at_location"
    HANDS_FULL = "hands_full"
    ITEM_ABSENT = "item_absent"
    TOOL_BUSY = "tool_busy"
    NOTHING_HELD = "nothing_held"
    NOT_A_TOOL = "not_a_tool"
    NO_MATCHING_RECIPE = "no_matching_recipe"
    CONTENTION = "contention"


@dataclass(frozen=True)
class ActionResult:
    ok: bool
    reason: FailReason | None = None

    def to_json_dict(self) -> dict[str, Any]:
        return {"ok": self.ok, "reason": self.reason.value if self.reason else None}


@dataclass
class KitchenState:
    config: LevelConfig
    agents: dict[str, AgentState]
    locations: dict[str, LocationState]
    orders: list[DishOrder]
    step: int
    dish_schedule: tuple[str, ...]  # dish per spawn step, drawn at load
    next_spawn_index: int
    introduced_count: int
    expired_count: int
    completed_dishes: list[str]
    event_log: list[KitchenEvent]

    def copy(self) -> "KitchenState":
        return copy.deepcopy(self)

    @property
    def completed_count(self) -> int:
        return len(self.completed_dishes)

    def agent_ids(self) -> list[str]:
        return sorted(self.agents)

    def serving_table_id(self) -> str:
        for loc in self.config.locations:
            if loc.kind is LocationKind.SERVING_TABLE:
                return loc.id
        raise MalformedLevel("no serving table")  # unreachable after validation


@dataclass(frozen=True)
class StepOutcome:
    next_state: KitchenState
    events: tuple[KitchenEvent, ...]
    per_agent_result: dict[str, ActionResult]


# --- operations -------------------------------------------------------------


def load_level(config: LevelConfig, agent_count: int, seed: int) -> KitchenState:
    """Build the initial state: agents at the serving table, first order live."""
    if not MIN_AGENTS <= agent_count <= MAX_AGENTS:
        raise ValueError(f"agent_count must be in [{MIN_AGENTS}, {MAX_AGENTS}]")

    rng = random.Random(seed)
    pool = config.order_schedule.dish_pool
    schedule = tuple(pool[rng.randrange(len(pool))] for _ in config.spawn_steps())

    locations = {}
    for spec in config.locations:
        locations[spec.id] = LocationState(
            id=spec.id,
            kind=spec.kind,
            tool_kind=spec.tool_kind,
            contents=Counter(dict(spec.stock)),
        )
    table = next(l.id for l in config.locations if l.kind is LocationKind.SERVING_TABLE)
    agents = {
        f"agent{i}": AgentState(id=f"agent{i}", at=table) for i in range(agent_count)
    }

    first = DishOrder(
        dish=schedule[0],
        lifetime=config.order_schedule.lifetime,
        issued_at=0,
        ordinal=0,
    )
    return KitchenState(
        config=config,
        agents=agents,
        locations=locations,
        orders=[first],
        step=0,
        dish_schedule=schedule,
        next_spawn_index=1,
        introduced_count=1,
        expired_count=0,
        completed_dishes=[],
        event_log=[KitchenEvent(EventKind.ORDER_INTRODUCED, first.dish, 0)],
    )


def _match_recipe_step(config: LevelConfig, tool_kind: str, contents: Counter) -> RecipeStep | None:
    """First recipe step (config order) whose tool and exact inputs match."""
    for recipe in config.recipes:
        for step in recipe.steps:
            if step.tool_kind == tool_kind and Counter(dict(step.inputs)) == contents:
                return step
    return None


def _check_action(state: KitchenState, action: KitchenAction) -> FailReason | None:
    """Failure reason the action would get right now, or None if it succeeds."""
    agent = state.agents[action.agent]
    if isinstance(action, Noop):
        return None
    loc = state.locations[action.location]
    if isinstance(action, Goto):
        return None
    if agent.at != loc.id:
        return FailReason.NOT_AT_LOCATION
    if isinstance(action, Get):
        if agent.holding is not None:
            return FailReason.HANDS_FULL
        if loc.busy:
            return FailReason.TOOL_BUSY
        if loc.contents[action.item] < 1:
            return FailReason.ITEM_ABSENT
        return None
    if isinstance(action, Put):
        if agent.holding is None:
            return FailReason.NOTHING_HELD
        if loc.busy:
            return FailReason.TOOL_BUSY
        return None
    if isinstance(action, Activate):
        if loc.kind is not LocationKind.TOOL:
            return FailReason.NOT_A_TOOL
        if loc.busy:
            return FailReason.TOOL_BUSY
        if _match_recipe_step(state.config, loc.tool_kind or "", loc.contents) is None:
            return FailReason.NO_MATCHING_RECIPE
        return None
    raise TypeError(f"unknown action {action!r}")  # pragma: no cover


def _apply_action(state: KitchenState, action: KitchenAction) -> list[KitchenEvent]:
    """Mutate state for an action already known to succeed."""
    events: list[KitchenEvent] = []
    agent = state.agents[action.agent]
    if isinstance(action, Noop):
        return events
    loc = state.locations[action.location]
    if isinstance(action, Goto):
        agent.at = loc.id
        return events
    if isinstance(action, Get):
        loc.contents[action.item] -= 1
        if loc.contents[action.item] == 0:
            del loc.contents[action.item]
        agent.holding = action.item
        return events
    if isinstance(action, Put):
        item = agent.holding
        assert item is not None
        agent.holding = None
        if loc.kind is LocationKind.SERVING_TABLE:
            matching = [o for o in state.orders if o.dish == item]
            if matching:
                # serve the order closest to expiry; item leaves the world
                order = min(matching, key=lambda o: (o.lifetime, o.issued_at, o.ordinal))
                state.orders.remove(order)
                state.completed_dishes.append(item)
                events.append(KitchenEvent(EventKind.ORDER_COMPLETED, item, state.step))
                return events
        loc.contents[item] += 1
        return events
    if isinstance(action, Activate):
        step = _match_recipe_step(state.config, loc.tool_kind or "", loc.contents)
        assert step is not None
        loc.processing = Processing(step.cook_steps, step.output)
        loc.occupied_by = action.agent
        return events
    raise TypeError(f"unknown action {action!r}")  # pragma: no cover


def _validate_joint(state: KitchenState, joint: Mapping[str, KitchenAction]) -> None:
    if set(joint) != set(state.agents):
        missing = set(state.agents) - set(joint)
        extra = set(joint) - set(state.agents)
        if extra:
            raise UnknownAgent(f"actions for unknown agents: {sorted(extra)}")
        raise ValueError(f"missing actions for agents: {sorted(missing)}")
    for agent_id, action in joint.items():
        if action.agent != agent_id:
            raise ValueError(
                f"action for {agent_id} names agent {action.agent}"
            )
        if not isinstance(action, Noop):
            if action.location not in state.locations:
                raise UnknownLocation(action.location)


def step(state: KitchenState, joint: Mapping[str, KitchenAction]) -> StepOutcome:
    """Advance the simulation one step under a joint action.

    In-world impossibilities become per-agent failures; only unknown
    agent/location ids raise. The input state is left untouched.
    """
    if state.step >= state.config.max_steps:
        raise EpisodeOver(f"episode already ran its {state.config.max_steps} steps")
    _validate_joint(state, joint)

    t = state.step
    nxt = state.copy()
    events: list[KitchenEvent] = []
    results: dict[str, ActionResult] = {}

    for agent_id in sorted(joint):
        action = joint[agent_id]
        reason = _check_action(nxt, action)
        if reason is None:
            events.extend(_apply_action(nxt, action))
            results[agent_id] = ActionResult(True)
        else:
            # an action that was fine against the pre-step state lost a
            # race to an earlier agent this step
            if _check_action(state, action) is None:
                reason = FailReason.CONTENTION
            results[agent_id] = ActionResult(False, reason)

    for loc_id in sorted(nxt.locations):
        loc = nxt.locations[loc_id]
        if loc.processing is not None:
            loc.processing.remaining_steps -= 1
            if loc.processing.remaining_steps == 0:
                loc.contents = Counter({loc.processing.output_item: 1})
                loc.processing = None
                loc.occupied_by = None

    still_live: list[DishOrder] = []
    for order in nxt.orders:
        if order.issued_at <= t:
            order.lifetime -= 1
            if order.lifetime == 0:
                nxt.expired_count += 1
                events.append(KitchenEvent(EventKind.ORDER_EXPIRED, order.dish, t))
                continue
        still_live.append(order)
    nxt.orders = still_live

    upcoming = t + 1
    schedule = nxt.config.order_schedule
    if (
        upcoming < nxt.config.max_steps
        and upcoming % schedule.spawn_interval == 0
        and nxt.next_spawn_index < len(nxt.dish_schedule)
    ):
        dish = nxt.dish_schedule[nxt.next_spawn_index]
        nxt.orders.append(
            DishOrder(
                dish=dish,
                lifetime=schedule.lifetime,
                issued_at=upcoming,
                ordinal=nxt.next_spawn_index,
            )
        )
        nxt.next_spawn_index += 1
        nxt.introduced_count += 1
        events.append(KitchenEvent(EventKind.ORDER_INTRODUCED, dish, t))

    nxt.step = upcoming
    nxt.event_log.extend(events)
    return StepOutcome(nxt, tuple(events), results)


def legal_actions(state: KitchenState, agent_id: str) -> list[KitchenAction]:
    """Every action that would succeed for this agent right now, plus noop."""
    if agent_id not in state.agents:
        raise UnknownAgent(agent_id)
    agent = state.agents[agent_id]
    actions: list[KitchenAction] = []
    for loc_id in sorted(state.locations):
        actions.append(Goto(agent_id, loc_id))
    here = state.locations[agent.at]
    if agent.holding is None and not here.busy:
        for item in sorted(here.contents):
            if here.contents[item] > 0:
                actions.append(Get(agent_id, here.id, item))
    if agent.holding is not None and not here.busy:
        actions.append(Put(agent_id, here.id))
    if (
        here.kind is LocationKind.TOOL
        and not here.busy
        and _match_recipe_step(state.config, here.tool_kind or "", here.contents) is not None
    ):
        actions.append(Activate(agent_id, here.id))
    actions.append(Noop(agent_id))
    return actions


# --- observation rendering ---------------------------------------------------


def _format_contents(contents: Counter) -> str:
    if not contents:
        return "None"
    parts = []
    for item in sorted(contents):
        count = contents[item]
        parts.append(item if count == 1 else f"{item}*{count}")
    return ", ".join(parts)


def render_observation(state: KitchenState) -> str:
    """Fixed text rendering of the full state; byte-stable per state."""
    lines: list[str] = []
    lines.append("Game Configuration")
    lines.append(f"Current Game Level: {state.config.level_id}")
    lines.append("Current Dishes")
    if state.orders:
        for order in sorted(state.orders, key=lambda o: o.ordinal):
            lines.append(f"  Name: {order.dish}")
            lines.append(f"  Lifetime: {order.lifetime}")
    else:
        lines.append("  None")
    lines.append(f"Current Game Step: {state.step}")
    lines.append(f"Maximum Game Steps: {state.config.max_steps}")
    lines.append("")
    lines.append("Agent State")
    for agent_id in state.agent_ids():
        agent = state.agents[agent_id]
        lines.append(f"at({agent.id}, {agent.at})")
        lines.append(f"hold({agent.id}, {agent.holding if agent.holding else 'None'})")
    lines.append("")
    lines.append("Kitchen State")
    for spec in state.config.locations:
        loc = state.locations[spec.id]
        lines.append(f"inside({loc.id}, {_format_contents(loc.contents)})")
    lines.append("")
    lines.append("Accomplished Tasks")
    if state.completed_dishes:
        for dish in state.completed_dishes:
            lines.append(dish)
    else:
        lines.append("None")
    return "\n".join(lines) + "\n"


def observation_hash(state: KitchenState) -> str:
    return hashlib.sha256(render_observation(state).encode("utf-8")).hexdigest()


# --- bookkeeping helpers ------------------------------------------------------


def item_census(state: KitchenState) -> Counter:
    """Multiset of every item at a location or in an agent's hands."""
    census: Counter = Counter()
    for loc in state.locations.values():
        census.update(loc.contents)
    for agent in state.agents.values():
        if agent.holding is not None:
            census[agent.holding] += 1
    return census


def order_accounting_ok(state: KitchenState) -> bool:
    """introduced == completed + expired + live, at any point in time."""
    return state.introduced_count == (
        len(state.completed_dishes) + state.expired_count + len(state.orders)
    )


def action_from_json_dict(payload: Mapping[str, Any]) -> KitchenAction:
    kind = payload["kind"]
    if kind == "goto":
        return Goto(payload["agent"], payload["location"])
    if kind == "get":
        return Get(payload["agent"], payload["location"], payload["item"])
    if kind == "put":
        return Put(payload["agent"], payload["location"])
    if kind == "activate":
        return Activate(payload["agent"], payload["location"])
    if kind == "noop":
        return Noop(payload["agent"])
    raise ValueError(f"unknown action kind {kind!r}")


def action_to_json_dict(action: KitchenAction) -> dict[str, Any]:
    payload: dict[str, Any] = {"kind": action_kind(action), "agent": action.agent}
    if isinstance(action, (Goto, Get, Put, Activate)):
        payload["location"] = action.location
    if isinstance(action, Get):
        payload["item"] = action.item
    return payload
