"""Prompt templates for model-backed controllers.

These are artifact conventions, not anything a worker or planner model is
required to follow; the parsers on the receiving side tolerate prose and
only extract the final grammar match.
"""

from __future__ import annotations

from typing import Sequence

WORKER_SYSTEM = (
    "You control one kitchen agent. Respond with exactly one action in the "
    "grammar goto(agent, location), get(agent, location, item), "
    "put(agent, location), activate(agent, location), or noop(agent)."
)

ORCHESTRATOR_SYSTEM = (
    "You control every kitchen agent. Respond with one action per agent, "
    "one per line, in the grammar goto/get/put/activate/noop."
)

PLANNER_SYSTEM = (
    "You are the planner. Produce one directive line per agent in the form "
    "'agentN: <task>'. Directives should divide the live orders' recipe "
    "steps and deliveries among the agents."
)


def worker_prompt(observation: str, directive_text: str | None, agent_id: str) -> str:
    parts = [f"You are {agent_id}.", "", observation]
    if directive_text:
        parts += ["", "Your directive from the planner:", directive_text]
    parts += ["", f"Reply with one action for {agent_id}."]
    return "\n".join(parts)


def orchestrator_prompt(observation: str, roster: Sequence[str]) -> str:
    return "\n".join(
        [
            observation,
            "",
            f"Agents under your control: {', '.join(roster)}.",
            "Reply with one action per agent, one per line.",
        ]
    )


def planner_prompt(
    observation: str,
    event_lines: Sequence[str],
    prior_plan_text: str | None,
    roster: Sequence[str],
    capability_block: str | None,
) -> str:
    parts = [observation, ""]
    if event_lines:
        parts.append("Events since the last plan:")
        parts.extend(f"- {line}" for line in event_lines)
    else:
        parts.append("Initial planning step.")
    if prior_plan_text:
        parts += ["", "Previous plan:", prior_plan_text]
    if capability_block:
        parts += ["", capability_block]
    parts += ["", f"Write one directive line per agent for: {', '.join(roster)}."]
    return "\n".join(parts)
