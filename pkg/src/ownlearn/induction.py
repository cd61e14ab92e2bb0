"""Incremental rule learning: beam-search refinement plus the four
dual-mode update operations (cover/uncover an example, cover/subtract an
instructed rule) and batch re-induction.

The learner only ever specializes: search adds conditions to its seed rule
and never drops them, so a directly instructed rule keeps at least its
stated conditions (people under-specify, they rarely over-specify).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .dsl import ALLOW, FORBID, Rule, make_rule
from .evaluation import (eval_atom, eval_rule, eval_rule_set, find_cover_rules,
                         find_covered_examples)
from .rules import RuleSet, preference_key, refinements, rule_diff, is_covered
from .world import Permission, WorldState

WORST_SCORE = math.inf


@dataclass(frozen=True)
class LearnerState:
    rule_set: RuleSet = field(default_factory=RuleSet)
    score_thresh: float = 0.09
    beam_width: int = 3
    max_conditions: int = 3
    tau: float = 0.5
    # refined forms of directly-instructed rules; re-induction re-seeds from these
    instructed: tuple[Rule, ...] = ()


class ExampleScore:
    """Weighted mean rule coverage over a fixed example list.

    Caches per-atom evaluation vectors so beam search scores each candidate
    with a handful of vector products instead of re-walking the world.
    """

    def __init__(self, examples: list[Permission], world: WorldState, weights):
        self.examples = examples
        self.world = world
        self.weights = np.asarray(weights, dtype=float)
        self._atom_vecs: dict = {}

    def _atom_vec(self, atom):
        vec = self._atom_vecs.get(atom)
        if vec is None:
            vec = np.array([eval_atom(atom, e.object_id, self.world)
                            for e in self.examples])
            self._atom_vecs[atom] = vec
        return vec

    def __call__(self, rule: Rule) -> float:
        if not self.examples:
            return 0.0
        vec = np.ones(len(self.examples))
        for atom in rule.conditions:
            vec = vec * self._atom_vec(atom)
        return float(self.weights @ vec) / len(self.examples)


def fp_score(examples: list[Permission], world: WorldState) -> ExampleScore:
    """falsePositiveVal as a search objective."""
    return ExampleScore(examples, world, [1.0 - e.certainty for e in examples])


def tp_score(examples: list[Permission], world: WorldState) -> ExampleScore:
    """truePositiveVal as a search objective."""
    return ExampleScore(examples, world, [e.certainty for e in examples])


def rule_search(init_rule: Rule, must_cover: Permission | None, score_fn,
                state: LearnerState, world: WorldState,
                allow_init: bool = True) -> tuple[Rule, float]:
    """Beam search over refinements of init_rule minimizing score_fn.

    Candidates that fail to cover `must_cover` at tau are pruned; rule
    evaluation is monotone non-increasing under refinement, so an
    inadmissible seed makes the whole search inadmissible (sentinel score).
    Ties prefer earlier (more general) layers, then canonical rule order.
    """
    tau = state.tau
    if must_cover is not None:
        if eval_rule(init_rule, must_cover.object_id, world) < tau:
            return init_rule, WORST_SCORE

    if allow_init:
        best_rule, best_score = init_rule, score_fn(init_rule)
    else:
        best_rule, best_score = init_rule, WORST_SCORE
    if best_score <= 0.0:
        return best_rule, best_score

    beam = [init_rule]
    while beam:
        layer = []
        seen = set()
        for parent in beam:
            for candidate in refinements(parent, world.vocab, state.max_conditions):
                if candidate in seen:
                    continue
                seen.add(candidate)
                if must_cover is not None and \
                        eval_rule(candidate, must_cover.object_id, world) < tau:
                    continue
                layer.append((score_fn(candidate), preference_key(candidate), candidate))
        if not layer:
            break
        layer.sort(key=lambda entry: (entry[0], entry[1]))
        top_score, _, top_rule = layer[0]
        if top_score < best_score:
            best_rule, best_score = top_rule, top_score
            if best_score <= 0.0:
                break
        beam = [entry[2] for entry in layer[:state.beam_width]]
    return best_rule, best_score


def cover_example(state: LearnerState, examples: list[Permission],
                  new_example: Permission, world: WorldState) -> LearnerState:
    """Learn a rule covering a forbid-example, unless one already does."""
    if new_example.polarity != FORBID:
        raise ValueError("cover_example expects a forbid permission")
    already = eval_rule_set(state.rule_set, new_example.action, new_example.object_id,
                            world, permission_override=False)
    if already >= state.tau:
        return state
    relevant = [e for e in examples if e.action == new_example.action]
    # without at least one allowed example every candidate scores a vacuous
    # zero; defer generalization until there is contrastive evidence
    if not any(e.certainty < 0.5 for e in relevant):
        return state
    init = make_rule(FORBID, new_example.action, [])
    # the empty seed is only a starting point: an example never induces an
    # unconditional norm
    found, score = rule_search(init, new_example, fp_score(relevant, world), state, world,
                               allow_init=False)
    if score < state.score_thresh:
        return replace(state, rule_set=state.rule_set.merged(found))
    return state  # stays as a database exception


def uncover_example(state: LearnerState, examples: list[Permission],
                    new_example: Permission, world: WorldState) -> LearnerState:
    """Carve an allow-example out of every rule that covers it."""
    if new_example.polarity != ALLOW:
        raise ValueError("uncover_example expects an allow permission")
    relevant = [e for e in examples if e.action == new_example.action]
    cover_rules = find_cover_rules(state.rule_set, new_example, world, state.tau)
    ruleset = state.rule_set
    for cov_rule in cover_rules:
        if cov_rule not in ruleset:
            continue  # removed while processing an earlier covering rule
        covered = find_covered_examples(cov_rule, relevant, world, state.tau)
        pinned = ruleset.is_pinned(cov_rule)
        found, score = rule_search(cov_rule, new_example, tp_score(covered, world),
                                   state, world, allow_init=not pinned)
        if score < state.score_thresh:
            remainder = rule_diff(cov_rule, found)
            ruleset = ruleset.removed(cov_rule)
            for part in remainder:
                ruleset = ruleset.merged(part, pinned=pinned)
    return replace(state, rule_set=ruleset)


def cover_rule(state: LearnerState, examples: list[Permission],
               given_rule: Rule, world: WorldState) -> LearnerState:
    """Adopt a directly-instructed forbid rule, specializing it first if
    that avoids covering allowed examples."""
    if given_rule.polarity != FORBID:
        raise ValueError("cover_rule expects a forbid rule")
    if is_covered(given_rule, state.rule_set):
        return state
    relevant = [e for e in examples if e.action == given_rule.action]
    found, score = rule_search(given_rule, None, fp_score(relevant, world), state, world)
    if score < state.score_thresh:
        return replace(state,
                       rule_set=state.rule_set.merged(found, pinned=True),
                       instructed=state.instructed + (found,))
    return state


def uncover_rule(state: LearnerState, examples: list[Permission],
                 given_rule: Rule, world: WorldState) -> LearnerState:
    """Subtract a directly-instructed allow rule from same-action rules."""
    if given_rule.polarity != ALLOW:
        raise ValueError("uncover_rule expects an allow rule")
    relevant = [e for e in examples if e.action == given_rule.action]
    found, score = rule_search(given_rule, None, tp_score(relevant, world), state, world)
    if score >= state.score_thresh:
        return state
    ruleset = state.rule_set
    for active in ruleset.rules_for(given_rule.action):
        try:
            subtrahend = make_rule(active.polarity, active.action,
                                   active.conditions + found.conditions)
        except ValueError:
            continue  # contradictory conditions: nothing to subtract here
        remainder = rule_diff(active, subtrahend)
        pinned = ruleset.is_pinned(active)
        if pinned and not remainder:
            continue  # never delete an instructed rule outright
        ruleset = ruleset.removed(active)
        for part in remainder:
            ruleset = ruleset.merged(part, pinned=pinned)
    return replace(state, rule_set=ruleset)


def batch_reinduce(state: LearnerState, permission_db: list[Permission],
                   world: WorldState) -> LearnerState:
    """Rebuild the rule set: seed with the directly-instructed rules, then
    replay every stored permission in original instruction order."""
    ruleset = RuleSet()
    for rule in state.instructed:
        ruleset = ruleset.merged(rule, pinned=True)
    current = replace(state, rule_set=ruleset)
    seen: list[Permission] = []
    for perm in permission_db:
        if perm.polarity == FORBID:
            current = cover_example(current, seen, perm, world)
        else:
            current = uncover_example(current, seen, perm, world)
        seen.append(perm)
    # second pass over the examples the ordered replay left conflicting:
    # forbid examples that stayed uncovered (they preceded their contrastive
    # allow evidence) and allow examples that stayed covered (their carve
    # was attempted before the claims that make it scorable)
    for perm in permission_db:
        rest = [e for e in permission_db if e != perm]
        if perm.polarity == FORBID:
            current = cover_example(current, rest, perm, world)
        else:
            current = uncover_example(current, rest, perm, world)
    return current
