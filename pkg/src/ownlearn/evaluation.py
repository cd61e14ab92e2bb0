"""Probabilistic evaluation of atoms, rules and rule sets.

All predicate uncertainty lives in the ownership graph; color and area
atoms are crisp. Atoms within a rule and rules within a set are treated
as independent events (product / noisy-or), ProbLog-style.
"""

from __future__ import annotations

from dataclasses import dataclass

from .dsl import ALLOW, ANY, FORBID, Atom, Rule
from .rules import RuleSet
from .world import Permission, UnknownEntityError, WorldState

COVERAGE_TAU = 0.5

# permission certainties this close to 0/1 override rule evaluation outright
OVERRIDE_MARGIN = 0.05


@dataclass(frozen=True)
class Coverage:
    """Certainty-weighted coverage of one example by one rule."""

    true_positive: float
    false_positive: float


def eval_atom(atom: Atom, object_id: str, world: WorldState,
              ownership: dict[tuple[str, str], float] | None = None) -> float:
    """Probability that the atom holds for the object.

    `ownership` optionally overrides the world's ownership priors for
    specific (object, agent) pairs, which is how Bayesian inference clamps
    and re-marginalizes without touching world state.
    """
    obj = world.objects.get(object_id)
    if obj is None:
        raise UnknownEntityError(f"unknown object {object_id!r}")
    schema = atom.schema

    if schema.sort == "agent":
        def prior(agent):
            if ownership is not None and (object_id, agent) in ownership:
                return ownership[(object_id, agent)]
            return world.ownership_prior(object_id, agent)

        if atom.argument == ANY:
            miss = 1.0
            for agent in world.agents:
                miss *= 1.0 - prior(agent)
            value = 1.0 - miss
        else:
            if atom.argument not in world.agents:
                raise UnknownEntityError(f"unknown agent {atom.argument!r}")
            value = prior(atom.argument)
    elif schema.name == "isColored":
        if atom.argument not in world.vocab.constants("color"):
            raise UnknownEntityError(f"unknown color {atom.argument!r}")
        value = 1.0 if obj.color == atom.argument else 0.0
    elif schema.name == "inArea":
        value = 1.0 if obj.area == atom.argument else 0.0
    else:
        raise UnknownEntityError(f"no evaluation for predicate {schema.name!r}")

    return 1.0 - value if atom.negated else value


def eval_rule(rule: Rule, object_id: str, world: WorldState,
              ownership: dict[tuple[str, str], float] | None = None) -> float:
    value = 1.0
    for atom in rule.conditions:
        value *= eval_atom(atom, object_id, world, ownership)
        if value == 0.0:
            break
    return value


def eval_rule_set(ruleset: RuleSet, action: str, object_id: str, world: WorldState,
                  ownership: dict[tuple[str, str], float] | None = None,
                  permission_override: bool = True) -> float:
    """Forbiddenness of an action on an object: noisy-or across the
    action's rules, overridden by a near-certain database permission.

    Bayesian inference and rule-quality metrics evaluate with
    permission_override=False so the database entry being reasoned about
    does not short-circuit its own evidence.
    """
    if permission_override:
        perm = world.permission_for(action, object_id)
        if perm is not None:
            if perm.certainty >= 1.0 - OVERRIDE_MARGIN:
                return 1.0
            if perm.certainty <= OVERRIDE_MARGIN:
                return 0.0
    miss = 1.0
    for rule in ruleset.rules_for(action):
        miss *= 1.0 - eval_rule(rule, object_id, world, ownership)
    return 1.0 - miss


def coverage_of(rule: Rule, example: Permission, world: WorldState) -> Coverage:
    p = eval_rule(rule, example.object_id, world)
    return Coverage(true_positive=example.certainty * p,
                    false_positive=(1.0 - example.certainty) * p)


def true_positive_val(rule: Rule, examples: list[Permission], world: WorldState) -> float:
    """Mean certainty-weighted coverage of forbidden mass."""
    if not examples:
        return 0.0
    total = sum(e.certainty * eval_rule(rule, e.object_id, world) for e in examples)
    return total / len(examples)


def false_positive_val(rule: Rule, examples: list[Permission], world: WorldState) -> float:
    """Mean coverage of allowed mass."""
    if not examples:
        return 0.0
    total = sum((1.0 - e.certainty) * eval_rule(rule, e.object_id, world) for e in examples)
    return total / len(examples)


def find_cover_rules(ruleset: RuleSet, example: Permission, world: WorldState,
                     tau: float = COVERAGE_TAU) -> list[Rule]:
    return [r for r in ruleset.rules_for(example.action)
            if eval_rule(r, example.object_id, world) >= tau]


def find_covered_examples(rule: Rule, examples: list[Permission], world: WorldState,
                          tau: float = COVERAGE_TAU) -> list[Permission]:
    return [e for e in examples
            if e.action == rule.action
            and eval_rule(rule, e.object_id, world) >= tau]
