"""Rule-based Bayesian ownership inference and the policy that arbitrates
between inference and re-induction.

A permission observed on an object is evidence about who owns it, given
the current rules: P(owned | forbid) = P(forbid | owned) * P(owned) /
P(forbid), with both forbiddenness terms computed by rule evaluation
(clamping the agent's ownership to certain for the conditional). When the
stored permissions disagree with the rule set too often, the system stops
treating new permissions as evidence and re-induces the rules instead.

Percept predictions feed inference as priors; inference results never feed
back into percept training or induction, which read priors only.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .dsl import ALLOW, FORBID, Rule
from .evaluation import eval_rule_set
from .induction import (LearnerState, batch_reinduce, cover_rule, uncover_rule)
from .percepts import OwnershipPredictor
from .rules import RuleSet
from .world import Claim, Instruction, Permission, WorldState

REINDUCE_CONFLICT_FRACTION = 0.10


def bayes_update(world: WorldState, ruleset: RuleSet, action: str, object_id: str,
                 agent_id: str, observed_forbid: bool,
                 marginals: dict[tuple[str, str], float] | None = None
                 ) -> tuple[float, bool]:
    """Posterior ownership probability for one (object, agent) pair after
    observing that an action is forbidden (or allowed) on the object.

    Returns (posterior, consistent). An observation with zero probability
    under the rules is inconsistent: the prior is returned unchanged.
    """
    marginals = dict(marginals or {})
    prior = marginals.get((object_id, agent_id),
                          world.ownership_prior(object_id, agent_id))
    p_forbid = eval_rule_set(ruleset, action, object_id, world,
                             ownership=marginals, permission_override=False)
    clamped = dict(marginals)
    clamped[(object_id, agent_id)] = 1.0
    p_forbid_owned = eval_rule_set(ruleset, action, object_id, world,
                                   ownership=clamped, permission_override=False)
    if observed_forbid:
        if p_forbid <= 0.0:
            return prior, False
        posterior = p_forbid_owned * prior / p_forbid
    else:
        if p_forbid >= 1.0:
            return prior, False
        posterior = (1.0 - p_forbid_owned) * prior / (1.0 - p_forbid)
    return min(max(posterior, 0.0), 1.0), True


def conflict_fraction(ruleset: RuleSet, permissions: list[Permission],
                      world: WorldState, tau: float = 0.5) -> float:
    """Share of stored permissions the rule set mispredicts."""
    if not permissions:
        return 0.0
    wrong = 0
    for perm in permissions:
        predicted_forbid = eval_rule_set(ruleset, perm.action, perm.object_id, world,
                                         permission_override=False) >= tau
        instructed_forbid = perm.certainty >= 0.5
        if predicted_forbid != instructed_forbid:
            wrong += 1
    return wrong / len(permissions)


@dataclass
class InstructionEffects:
    """What one instruction changed; the session layer turns this into events."""

    claims: list[Claim] = field(default_factory=list)
    permission: Permission | None = None
    dispatched: str | None = None  # "inference" | "reinduce" | None
    rule: Rule | None = None
    rules_changed: bool = False
    posterior_updates: dict[tuple[str, str], float] = field(default_factory=dict)
    inconsistent: bool = False


class OwnershipSystem:
    """World + learner + percept models + posterior store, updated by
    dual-mode instructions."""

    def __init__(self, world: WorldState, learner: LearnerState | None = None,
                 predictor: OwnershipPredictor | None = None,
                 inference_enabled: bool = True, induction_enabled: bool = True,
                 reinduce_threshold: float = REINDUCE_CONFLICT_FRACTION):
        self.world = world
        self.learner = learner or LearnerState()
        self.predictor = predictor if predictor is not None else OwnershipPredictor()
        self.world.predictor = self.predictor
        self.inference_enabled = inference_enabled
        self.induction_enabled = induction_enabled
        self.reinduce_threshold = reinduce_threshold
        self.posteriors: dict[tuple[str, str], float] = {}
        # (action, object, observed_forbid) permissions dispatched to inference,
        # replayed against the rule set after any re-induction
        self.observations: list[tuple[str, str, bool]] = []
        self.inconsistent_count = 0
        # permissions stated by an instructor, as opposed to the agent's own
        # recorded assumptions; the re-induction heuristic watches these
        self.human_permission_keys: set[tuple[str, str]] = set()

    # -- reads ---------------------------------------------------------------

    @property
    def rule_set(self) -> RuleSet:
        return self.learner.rule_set

    def ownership_posterior(self, object_id: str, agent_id: str) -> float:
        key = (object_id, agent_id)
        if key in self.posteriors:
            return self.posteriors[key]
        return self.world.ownership_prior(object_id, agent_id)

    def conflict_fraction(self) -> float:
        return conflict_fraction(self.rule_set, self.world.permission_list(),
                                 self.world, self.learner.tau)

    def _instructed_conflict_fraction(self) -> float:
        instructed = [p for key, p in self.world.permissions.items()
                      if key in self.human_permission_keys]
        return conflict_fraction(self.rule_set, instructed, self.world,
                                 self.learner.tau)

    # -- the dual-mode dispatch ----------------------------------------------

    def handle_instruction(self, instr: Instruction) -> InstructionEffects:
        if instr.is_empty():
            raise ValueError("empty instruction")
        effects = InstructionEffects(rule=instr.rule)

        for claim in instr.claims:
            affected = self.world.record_claim(claim.object_id, claim.agent_id,
                                               claim.probability, claim.exclusive)
            for pair in affected:
                # a fresh claim supersedes anything previously inferred
                self.posteriors[pair] = self.world.claims[pair]
                effects.posterior_updates[pair] = self.posteriors[pair]
            if claim.exclusive:
                # ownership displaced: permissions and observations grounded
                # in the old ownership context no longer stand
                for key in [k for k in self.world.permissions
                            if k[1] == claim.object_id]:
                    del self.world.permissions[key]
                    self.human_permission_keys.discard(key)
                self.observations = [obs for obs in self.observations
                                     if obs[1] != claim.object_id]
            effects.claims.append(claim)

        if instr.permission is not None:
            perm = instr.permission
            self.world.record_permission(perm)
            effects.permission = perm
            if instr.source != "self":
                self.human_permission_keys.add((perm.action, perm.object_id))
            # conflicts are judged on instructor-stated permissions, the one
            # just received included; self-recorded assumptions don't count
            fraction = self._instructed_conflict_fraction()
            if fraction > self.reinduce_threshold and self.induction_enabled:
                before = self.learner.rule_set
                self.learner = batch_reinduce(self.learner,
                                              self.world.permission_list(), self.world)
                self._replay_observations()
                effects.dispatched = "reinduce"
                effects.rules_changed = before != self.learner.rule_set
            elif self.inference_enabled:
                updates, consistent = self._apply_bayes(perm.action, perm.object_id,
                                                        perm.certainty >= 0.5)
                self.observations.append((perm.action, perm.object_id,
                                          perm.certainty >= 0.5))
                effects.dispatched = "inference"
                effects.posterior_updates.update(updates)
                effects.inconsistent = not consistent

        if instr.rule is not None and self.induction_enabled:
            before = self.learner.rule_set
            examples = self.world.permission_list()
            if instr.rule.polarity == FORBID:
                self.learner = cover_rule(self.learner, examples, instr.rule, self.world)
            else:
                self.learner = uncover_rule(self.learner, examples, instr.rule, self.world)
            effects.rules_changed = effects.rules_changed or before != self.learner.rule_set

        return effects

    # -- inference internals ---------------------------------------------------

    def _apply_bayes(self, action: str, object_id: str, observed_forbid: bool
                     ) -> tuple[dict[tuple[str, str], float], bool]:
        marginals = {(object_id, a): self.ownership_posterior(object_id, a)
                     for a in self.world.agents}
        updates: dict[tuple[str, str], float] = {}
        all_consistent = True
        for agent in self.world.agents:
            posterior, consistent = bayes_update(self.world, self.rule_set, action,
                                                 object_id, agent, observed_forbid,
                                                 marginals)
            if consistent:
                updates[(object_id, agent)] = posterior
            else:
                all_consistent = False
                self.inconsistent_count += 1
        self.posteriors.update(updates)
        return updates, all_consistent

    def _replay_observations(self) -> None:
        self.posteriors = {}
        for pair, value in self.world.claims.items():
            self.posteriors[pair] = value
        for action, object_id, observed_forbid in self.observations:
            if object_id in self.world.objects:
                self._apply_bayes(action, object_id, observed_forbid)
