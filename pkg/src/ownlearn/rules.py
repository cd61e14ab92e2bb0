"""Logical operations on forbid-rules: subsumption, redundancy-removing
merge, rule subtraction and refinement generation.

Subsumption is syntactic and deliberately conservative: a ground positive
atom implies the matching wildcard atom, every atom implies itself, and
negated atoms imply only identical negated atoms. Conservative subsumption
keeps merge sound (removing a subsumed rule never changes the grounded
forbidden set) at the cost of missing some redundancies.
"""

from __future__ import annotations

from .dsl import ANY, Atom, Rule, Vocabulary, make_rule


class DiffError(ValueError):
    """rule_diff called with a subtrahend that does not refine the minuend."""


def atom_implies(premise: Atom, conclusion: Atom) -> bool:
    if premise == conclusion:
        return True
    return (not premise.negated and not conclusion.negated
            and premise.schema == conclusion.schema
            and conclusion.argument == ANY and premise.argument != ANY)


def atoms_contradict(a: Atom, b: Atom) -> bool:
    if a.schema != b.schema:
        return False
    if a.argument == b.argument and a.negated != b.negated:
        return True
    # one color/area per object: two distinct positive values never co-hold
    if a.schema.functional and not a.negated and not b.negated and a.argument != b.argument:
        return True
    # "not P any" (no witness) against any positive P atom
    if a.negated and a.argument == ANY and not b.negated:
        return True
    if b.negated and b.argument == ANY and not a.negated:
        return True
    return False


def subsumes(general: Rule, specific: Rule) -> bool:
    """True iff `general` fires on every grounded object `specific` fires on."""
    if general.action != specific.action or general.polarity != specific.polarity:
        return False
    return all(
        any(atom_implies(s, g) for s in specific.conditions)
        for g in general.conditions
    )


def preference_key(rule: Rule) -> tuple:
    """Total order used for deterministic tie-breaks in search: fewer
    conditions first, then positive atoms before negated ones."""
    atoms = sorted((a.schema.name, a.negated, a.argument) for a in rule.conditions)
    return (len(rule.conditions), tuple(atoms))


class RuleSet:
    """Canonical set of forbid-rules grouped by action; merge keeps the set
    free of internally-subsumed rules. Instances are immutable; mutating
    operations return a new set."""

    def __init__(self, rules=(), pinned=()):
        self._rules: tuple[Rule, ...] = tuple(sorted(set(rules), key=preference_key))
        self.pinned: frozenset[Rule] = frozenset(pinned) & set(self._rules)

    def __iter__(self):
        return iter(self._rules)

    def __len__(self):
        return len(self._rules)

    def __contains__(self, rule: Rule):
        return rule in self._rules

    def __eq__(self, other):
        return isinstance(other, RuleSet) and self._rules == other._rules

    def rules_for(self, action: str) -> list[Rule]:
        return [r for r in self._rules if r.action == action]

    def is_pinned(self, rule: Rule) -> bool:
        return rule in self.pinned

    def merged(self, rule: Rule, pinned: bool = False) -> "RuleSet":
        """Add a rule, then drop every rule subsumed by another in the set."""
        candidates = sorted(set(self._rules) | {rule}, key=preference_key)
        kept = [r for r in candidates if not _redundant(r, candidates)]
        pins = set(self.pinned)
        if pinned:
            pins.add(rule)
        return RuleSet(kept, pins)

    def removed(self, rule: Rule) -> "RuleSet":
        return RuleSet((r for r in self._rules if r != rule), self.pinned)


def _redundant(rule: Rule, candidates: list[Rule]) -> bool:
    key = preference_key(rule)
    for other in candidates:
        if other == rule or not subsumes(other, rule):
            continue
        # mutual subsumption (equivalent rules): keep the canonical least
        if subsumes(rule, other) and key < preference_key(other):
            continue
        return True
    return False


def merge_rule(ruleset: RuleSet, rule: Rule, pinned: bool = False) -> RuleSet:
    return ruleset.merged(rule, pinned)


def is_covered(rule: Rule, ruleset: RuleSet) -> bool:
    return any(subsumes(active, rule) for active in ruleset.rules_for(rule.action))


def rule_diff(minuend: Rule, subtrahend: Rule) -> list[Rule]:
    """Remainder rules whose grounded union equals minuend minus subtrahend.

    The subtrahend must refine the minuend (same action, superset of its
    conditions). With extra atoms d1..dk the remainder is
    {minuend & !d1, minuend & d1 & !d2, ..., minuend & d1..d(k-1) & !dk},
    which is pairwise disjoint by construction.
    """
    if minuend.action != subtrahend.action or minuend.polarity != subtrahend.polarity:
        raise DiffError("action/polarity mismatch")
    base = set(minuend.conditions)
    if not base <= set(subtrahend.conditions):
        raise DiffError("subtrahend does not refine minuend")
    extra = sorted(set(subtrahend.conditions) - base, key=Atom.sort_key)
    remainder = []
    for i, d in enumerate(extra):
        atoms = list(minuend.conditions) + list(extra[:i]) + [d.negate()]
        remainder.append(make_rule(minuend.polarity, minuend.action, atoms))
    return remainder


def refinements(rule: Rule, vocab: Vocabulary,
                max_conditions: int | None = None) -> list[Rule]:
    """All one-atom specializations of a rule, in deterministic order.

    Skips atoms already present, atoms contradicting an existing condition,
    and atoms already implied by an existing condition.
    """
    if max_conditions is not None and len(rule.conditions) >= max_conditions:
        return []
    existing = rule.conditions
    out = []
    for name in sorted(vocab.predicates):
        schema = vocab.predicates[name]
        arguments = vocab.constants(schema.sort)
        if schema.allows_any:
            arguments = arguments + [ANY]
        for argument in arguments:
            for negated in (False, True):
                atom = Atom(schema, argument, negated)
                if atom in existing:
                    continue
                if any(atoms_contradict(atom, e) for e in existing):
                    continue
                if any(atom_implies(e, atom) for e in existing):
                    continue
                out.append(make_rule(rule.polarity, rule.action, existing + (atom,)))
    return out
