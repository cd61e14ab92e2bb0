"""Task execution under the obedience threshold, with the correction
feedback protocol used by the task experiments and live sessions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dsl import ANY, FORBID, Rule
from .evaluation import eval_rule, eval_rule_set
from .inference import OwnershipSystem
from .world import Claim, Instruction, Permission, WorldState

ACT = "act"
REFUSE = "refuse"

TASK_ACTIONS = {"collectAll": "collect", "trashAll": "trash"}
DONE_STATUS = {"collect": "collected", "trash": "trashed"}


@dataclass
class Decision:
    action: str
    object_id: str
    choice: str  # act | refuse
    forbiddenness: dict[str, float]  # per action in the prerequisite chain
    violated_rules: list[Rule]

    @property
    def predicted(self) -> float:
        return max(self.forbiddenness.values())


@dataclass
class TaskRun:
    task: str
    obedience_threshold: float
    visit_order: list[str] = field(default_factory=list)
    mistakes: int = 0
    log: list[dict] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "task": self.task,
            "obedienceThreshold": self.obedience_threshold,
            "visitOrder": self.visit_order,
            "mistakes": self.mistakes,
            "log": self.log,
        }


def action_chain(world: WorldState, action: str) -> list[str]:
    """The action plus its transitive prerequisites."""
    return [action] + world.vocab.prerequisite_chain(action)


def decide_action(world: WorldState, ruleset, action: str, object_id: str,
                  threshold: float = 0.5) -> Decision:
    """Refuse iff any action in the prerequisite chain is forbidden at or
    above the obedience threshold, database permissions included."""
    forbiddenness = {}
    violated: list[Rule] = []
    for step in action_chain(world, action):
        value = eval_rule_set(ruleset, step, object_id, world)
        forbiddenness[step] = value
        if value >= threshold:
            for rule in ruleset.rules_for(step):
                if eval_rule(rule, object_id, world) >= threshold and rule not in violated:
                    violated.append(rule)
    choice = REFUSE if max(forbiddenness.values()) >= threshold else ACT
    return Decision(action, object_id, choice, forbiddenness, violated)


def ownership_relevant_agents(truth, chain: list[str], agents: list[str]) -> list[str]:
    """Agents whose ownership the oracle reveals on a mistake: those named
    by ownedBy conditions of the true rules applicable to the chain."""
    relevant: list[str] = []
    for action in chain:
        for rule in truth.rules_for(action):
            for atom in rule.conditions:
                if atom.schema.name != "ownedBy" or atom.negated:
                    continue
                names = agents if atom.argument == ANY else [atom.argument]
                for name in names:
                    if name not in relevant:
                        relevant.append(name)
    return relevant


def true_permission(truth, action: str, object_id: str) -> Permission:
    if truth.forbids(action, object_id):
        return Permission.forbid(action, object_id)
    return Permission.allow(action, object_id)


def run_task_with_feedback(system: OwnershipSystem, task: str, truth,
                           rng: np.random.Generator, threshold: float = 0.5,
                           learning: bool = True) -> TaskRun:
    """Visit every object in random order, act or refuse, and learn from
    oracle corrections.

    A wrong act and a wrong refusal both count as mistakes. On a mistake
    the oracle supplies the true permission for every action in the chain,
    plus the true ownership of the agents relevant to the applicable rules.
    On a correct decision the agent assumes its per-action predictions were
    accurate and records them as examples.
    """
    world = system.world
    action = TASK_ACTIONS[task]
    chain = action_chain(world, action)
    relevant_agents = ownership_relevant_agents(truth, chain, world.agents)
    run = TaskRun(task=task, obedience_threshold=threshold)
    order = [str(o) for o in rng.permutation(sorted(world.objects))]
    run.visit_order = order

    for object_id in order:
        decision = decide_action(world, system.rule_set, action, object_id, threshold)
        truly_forbidden = any(truth.forbids(step, object_id) for step in chain)
        correct = (decision.choice == REFUSE) == truly_forbidden
        entry = {
            "objectId": object_id,
            "predicted": dict(decision.forbiddenness),
            "choice": decision.choice,
            "trulyForbidden": truly_forbidden,
            "corrected": not correct,
        }
        if not correct:
            run.mistakes += 1
        if learning:
            if correct:
                # physical order: prerequisites execute before the action
                for step in reversed(chain):
                    certainty = decision.forbiddenness[step]
                    polarity = FORBID if certainty >= 0.5 else "allow"
                    perm = Permission(step, object_id, polarity, certainty)
                    system.handle_instruction(Instruction(permission=perm, source="self"))
                if decision.choice == ACT:
                    world.objects[object_id].status = DONE_STATUS[action]
            else:
                claims = [Claim(object_id, agent,
                                1.0 if truth.owner_of(object_id) == agent else 0.0)
                          for agent in relevant_agents]
                system.handle_instruction(Instruction(
                    permission=true_permission(truth, action, object_id),
                    claims=claims, source="oracle"))
                for step in chain[1:]:
                    system.handle_instruction(Instruction(
                        permission=true_permission(truth, step, object_id),
                        source="oracle"))
        run.log.append(entry)
    return run
