"""Simulated cleanup world and the three experiments: norm learning from
streamed permissions, ownership prediction/inference, and task-based
evaluation with corrective feedback."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .agent import TASK_ACTIONS, action_chain, run_task_with_feedback
from .dsl import FORBID, Rule, Vocabulary, parse_rule
from .evaluation import eval_rule_set
from .induction import LearnerState, cover_example, uncover_example
from .inference import OwnershipSystem
from .rules import RuleSet
from .world import Instruction, Claim, ObjectState, Permission, WorldState

COLORS = ("red", "green", "blue", "yellow")

TRUE_RULE_TEXT = (
    "forbid trash if ownedBy any",
    "forbid pickUp if ownedBy agent2",
    "forbid collect if isColored red",
)


@dataclass
class SimConfig:
    n_objects_per_category: int = 5
    n_agents: int = 3
    cluster_radius_range: tuple[float, float] = (0.4, 0.8)
    block_scatter: float = 0.3
    owner_interaction_rate: float = 0.1
    nonowner_interaction_rate: float = 0.001
    n_trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.n_objects_per_category <= 0 or self.n_agents <= 0 or self.n_trials <= 0:
            raise ValueError("counts must be positive")
        if self.owner_interaction_rate <= self.nonowner_interaction_rate:
            raise ValueError("owners must interact more often than non-owners")

    @property
    def agents(self) -> list[str]:
        return [f"agent{i + 1}" for i in range(self.n_agents)]

    @property
    def n_objects(self) -> int:
        return self.n_objects_per_category * (self.n_agents + 1)


class GroundTruth:
    """True owners and the true rule set; true permissions derive from them."""

    def __init__(self, owner_of: dict[str, str | None], colors: dict[str, str],
                 rules: list[Rule]):
        self.owner_map = owner_of
        self.colors = colors
        self.rules = rules

    def owner_of(self, object_id: str) -> str | None:
        return self.owner_map[object_id]

    def rules_for(self, action: str) -> list[Rule]:
        return [r for r in self.rules if r.action == action]

    def forbids(self, action: str, object_id: str) -> bool:
        owner = self.owner_map[object_id]
        color = self.colors[object_id]
        for rule in self.rules_for(action):
            if all(self._atom_holds(atom, owner, color) for atom in rule.conditions):
                return True
        return False

    @staticmethod
    def _atom_holds(atom, owner: str | None, color: str) -> bool:
        if atom.schema.name == "ownedBy":
            value = owner is not None if atom.argument == "any" else owner == atom.argument
        elif atom.schema.name == "isColored":
            value = color == atom.argument
        else:
            value = False
        return not value if atom.negated else value


def generate_world(config: SimConfig, seed) -> tuple[WorldState, GroundTruth]:
    """One simulated workspace: an unowned cluster at the origin plus one
    cluster per agent at 0.4-0.8 m, each in its own angular sector; blocks
    scatter uniformly in a 0.3 m disc; interaction gaps are exponential
    with the owner/non-owner rates; colors are a uniform distractor."""
    rng = np.random.default_rng(seed)
    vocab = Vocabulary.standard()
    world = WorldState(vocab)
    for agent in config.agents:
        world.add_agent(agent)

    sector = 2.0 * math.pi / config.n_agents
    centers: dict[str | None, np.ndarray] = {None: np.zeros(2)}
    for i, agent in enumerate(config.agents):
        radius = rng.uniform(*config.cluster_radius_range)
        angle = rng.uniform(i * sector, (i + 1) * sector)
        centers[agent] = radius * np.array([math.cos(angle), math.sin(angle)])

    owner_of: dict[str, str | None] = {}
    colors: dict[str, str] = {}
    gaps: dict[str, dict[str, float]] = {}
    index = 0
    for owner in [None] + config.agents:
        for _ in range(config.n_objects_per_category):
            index += 1
            object_id = f"o{index:02d}"
            rho = config.block_scatter * math.sqrt(rng.uniform())
            phi = rng.uniform(0.0, 2.0 * math.pi)
            position = centers[owner] + rho * np.array([math.cos(phi), math.sin(phi)])
            owner_of[object_id] = owner
            colors[object_id] = COLORS[rng.integers(len(COLORS))]
            gaps[object_id] = {
                agent: rng.exponential(
                    1.0 / (config.owner_interaction_rate if owner == agent
                           else config.nonowner_interaction_rate))
                for agent in config.agents
            }
            world.add_object(ObjectState(
                id=object_id,
                position=(float(position[0]), float(position[1]), 0.0),
                color=colors[object_id],
            ))

    # session clock starts late enough that every timestamp is non-negative
    clock = max(gap for per_object in gaps.values() for gap in per_object.values())
    world.clock = clock
    for object_id, per_object in gaps.items():
        world.objects[object_id].last_interaction = {
            agent: clock - gap for agent, gap in per_object.items()
        }

    true_rules = [parse_rule(text, vocab) for text in TRUE_RULE_TEXT]
    return world, GroundTruth(owner_of, colors, true_rules)


def metrics_accuracy_f1(predicted: dict, truth: dict, threshold: float = 0.5
                        ) -> tuple[float, float]:
    """Accuracy and F1 with the forbidden/owned class as positive.

    F1 is 0 when nothing is predicted positive (including the degenerate
    no-positives case, which keeps a never-predicting baseline at exactly 0).
    """
    if set(predicted) != set(truth):
        raise ValueError("predicted and truth keys differ")
    tp = fp = fn = tn = 0
    for key, p in predicted.items():
        positive = p >= threshold
        if positive and truth[key]:
            tp += 1
        elif positive:
            fp += 1
        elif truth[key]:
            fn += 1
        else:
            tn += 1
    total = tp + fp + fn + tn
    accuracy = (tp + tn) / total if total else 0.0
    f1 = 2.0 * tp / (2.0 * tp + fp + fn) if tp else 0.0
    return accuracy, f1


def rule_metrics(ruleset: RuleSet, world: WorldState, truth: GroundTruth,
                 actions, threshold: float = 0.5) -> tuple[float, float]:
    """Per-action accuracy/F1 of the rule set against the true permissions,
    averaged across the given actions."""
    accs, f1s = [], []
    for action in actions:
        predicted = {o: eval_rule_set(ruleset, action, o, world,
                                      permission_override=False)
                     for o in world.objects}
        actual = {o: truth.forbids(action, o) for o in world.objects}
        acc, f1 = metrics_accuracy_f1(predicted, actual, threshold)
        accs.append(acc)
        f1s.append(f1)
    return float(np.mean(accs)), float(np.mean(f1s))


def _trial_seed(config: SimConfig, trial: int, stream: int) -> list[int]:
    return [config.seed, trial, stream]


# -- experiment 1: norm learning -------------------------------------------


def run_norm_learning(config: SimConfig, fraction: float = 1.0,
                      noise: str = "off") -> dict:
    """Stream true permissions for a fraction of objects through the
    incremental learner; noise == 'baseline' skips learning entirely."""
    if noise not in ("off", "on", "baseline"):
        raise ValueError(f"unknown noise condition {noise!r}")
    rows = []
    for trial in range(config.n_trials):
        world, truth = generate_world(config, _trial_seed(config, trial, 0))
        rng = np.random.default_rng(_trial_seed(config, trial, 1))
        _assign_ownership_beliefs(world, truth, noise, rng)

        learner = LearnerState()
        if noise != "baseline":
            n_selected = round(fraction * len(world.objects))
            selected = list(rng.choice(sorted(world.objects), size=n_selected,
                                       replace=False))
            stream = [(action, object_id)
                      for object_id in selected
                      for action in sorted(world.vocab.actions)]
            rng.shuffle(stream)
            seen: list[Permission] = []
            for action, object_id in stream:
                if truth.forbids(action, object_id):
                    perm = Permission.forbid(action, object_id)
                    learner = cover_example(learner, seen, perm, world)
                else:
                    perm = Permission.allow(action, object_id)
                    learner = uncover_example(learner, seen, perm, world)
                seen.append(perm)

        acc, f1 = rule_metrics(learner.rule_set, world, truth,
                               sorted(world.vocab.actions))
        rows.append({"trial": trial, "accuracy": acc, "f1": f1})
    return {
        "experiment": "norm",
        "noise": noise,
        "fraction": fraction,
        "trials": config.n_trials,
        "seed": config.seed,
        "rows": rows,
        "summary": _summarize(rows, ("accuracy", "f1")),
    }


def _assign_ownership_beliefs(world: WorldState, truth: GroundTruth, noise: str,
                              rng: np.random.Generator) -> None:
    # noisy condition: true relations known at 40-80% certainty; non-owner
    # noise spread up to 0.3 so spurious ownership mass suppresses rule
    # merges the way the reference results imply
    for object_id in sorted(world.objects):
        for agent in world.agents:
            is_owner = truth.owner_of(object_id) == agent
            if noise == "on":
                p = rng.uniform(0.4, 0.8) if is_owner else rng.uniform(0.0, 0.3)
            else:
                p = 1.0 if is_owner else 0.0
            world.record_claim(object_id, agent, float(p))


# -- experiment 2: ownership prediction and inference -----------------------


def run_prediction_inference(config: SimConfig, condition: str = "noneOff") -> dict:
    """Reveal true relations and permissions for half the objects, then
    score ownership prediction on the hidden half."""
    if condition not in ("noneOff", "learnOn", "givenOn"):
        raise ValueError(f"unknown condition {condition!r}")
    rows = []
    for trial in range(config.n_trials):
        world, truth = generate_world(config, _trial_seed(config, trial, 0))
        rng = np.random.default_rng(_trial_seed(config, trial, 1))
        enabled = condition != "noneOff"
        system = OwnershipSystem(world, inference_enabled=enabled,
                                 induction_enabled=enabled)
        if condition == "givenOn":
            for rule in truth.rules:
                system.handle_instruction(Instruction(rule=rule, source="user"))

        revealed = list(rng.choice(sorted(world.objects),
                                   size=len(world.objects) // 2, replace=False))
        for object_id in revealed:
            claims = [Claim(object_id, agent,
                            1.0 if truth.owner_of(object_id) == agent else 0.0)
                      for agent in world.agents]
            system.handle_instruction(Instruction(claims=claims, source="user"))
            for action in sorted(world.vocab.actions):
                if truth.forbids(action, object_id):
                    perm = Permission.forbid(action, object_id)
                else:
                    perm = Permission.allow(action, object_id)
                system.handle_instruction(Instruction(permission=perm, source="user"))

        held_out = [o for o in sorted(world.objects) if o not in revealed]
        predicted = {(o, a): system.ownership_posterior(o, a)
                     for o in held_out for a in world.agents}
        actual = {(o, a): truth.owner_of(o) == a
                  for o in held_out for a in world.agents}
        acc, f1 = metrics_accuracy_f1(predicted, actual)
        rows.append({"trial": trial, "accuracy": acc, "f1": f1})
    return {
        "experiment": "predict",
        "condition": condition,
        "trials": config.n_trials,
        "seed": config.seed,
        "rows": rows,
        "summary": _summarize(rows, ("accuracy", "f1")),
    }


# -- experiment 3: task-based evaluation ------------------------------------


def run_task_experiment(config: SimConfig, task: str = "trashAll",
                        learning: bool = True, obedience: float = 0.3) -> dict:
    """Fresh world and empty learner per trial; run the task under the
    feedback protocol and score mistakes plus final rule and ownership
    quality. Rule metrics cover the actions the task exercises.

    The obedience level is the experimenter's choice; 0.3 keeps the agent
    cautious while its percept models are still fitting mid-task.
    """
    if task not in TASK_ACTIONS:
        raise ValueError(f"unknown task {task!r}")
    rows = []
    for trial in range(config.n_trials):
        world, truth = generate_world(config, _trial_seed(config, trial, 0))
        rng = np.random.default_rng(_trial_seed(config, trial, 2))
        system = OwnershipSystem(world)
        run = run_task_with_feedback(system, task, truth, rng,
                                     threshold=obedience, learning=learning)

        chain = action_chain(world, TASK_ACTIONS[task])
        rule_acc, rule_f1 = rule_metrics(system.rule_set, world, truth, sorted(chain))
        own_predicted = {(o, a): system.ownership_posterior(o, a)
                         for o in sorted(world.objects) for a in world.agents}
        own_actual = {(o, a): truth.owner_of(o) == a
                      for o in sorted(world.objects) for a in world.agents}
        own_acc, own_f1 = metrics_accuracy_f1(own_predicted, own_actual)
        rows.append({
            "trial": trial,
            "mistakes": run.mistakes,
            "rule_accuracy": rule_acc,
            "rule_f1": rule_f1,
            "ownership_accuracy": own_acc,
            "ownership_f1": own_f1,
        })
    return {
        "experiment": "task",
        "task": task,
        "learning": learning,
        "trials": config.n_trials,
        "seed": config.seed,
        "rows": rows,
        "summary": _summarize(rows, ("mistakes", "rule_accuracy", "rule_f1",
                                     "ownership_accuracy", "ownership_f1")),
    }


def _summarize(rows: list[dict], fields: tuple[str, ...]) -> dict:
    return {name: float(np.mean([row[name] for row in rows])) for name in fields}
