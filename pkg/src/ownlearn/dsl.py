"""Typed predicate vocabulary and the concise rule syntax.

Rules are deontic statements over a single implicit target object:

    (forbid|allow) <action> [if <atom> (and <atom>)*]
    atom := [not] <predicate> <argument>

Predicate arguments are typed (agent / color / area) and ``any`` is an
existential wildcard over currently-known constants of the sort, legal
only where the predicate allows it.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

FORBID = "forbid"
ALLOW = "allow"

AGENT = "agent"
COLOR = "color"
AREA = "area"
SORTS = (AGENT, COLOR, AREA)

ANY = "any"

_IDENT = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")


class VocabularyError(ValueError):
    """Raised for invalid registrations (duplicate names, prerequisite cycles)."""


class RuleParseError(ValueError):
    """Parse failure with a machine-readable kind and character position.

    Kinds: syntax, unknown-action, unknown-predicate, sort-mismatch,
    wildcard-not-allowed, contradiction.
    """

    def __init__(self, kind: str, position: int, message: str):
        super().__init__(f"{message} (at position {position})")
        self.kind = kind
        self.position = position


@dataclass(frozen=True)
class ActionSymbol:
    name: str
    prerequisites: tuple[str, ...] = ()


@dataclass(frozen=True)
class PredicateSchema:
    name: str
    sort: str
    allows_any: bool = False
    # functional sorts admit exactly one value per object (a block has one
    # color), so two positive atoms with different arguments never co-hold
    functional: bool = False


@dataclass(frozen=True)
class Atom:
    schema: PredicateSchema
    argument: str
    negated: bool = False

    def negate(self) -> "Atom":
        return Atom(self.schema, self.argument, not self.negated)

    def sort_key(self) -> tuple:
        return (self.schema.name, self.argument, self.negated)

    def __str__(self) -> str:
        text = f"{self.schema.name} {self.argument}"
        return f"not {text}" if self.negated else text


@dataclass(frozen=True)
class Rule:
    polarity: str
    action: str
    conditions: tuple[Atom, ...] = ()

    def __str__(self) -> str:
        return format_rule(self)


def make_rule(polarity: str, action: str, atoms) -> Rule:
    """Build a canonical rule: dedupe atoms, sort them, reject contradictions."""
    if polarity not in (FORBID, ALLOW):
        raise ValueError(f"bad polarity {polarity!r}")
    unique = sorted(set(atoms), key=Atom.sort_key)
    seen = set(unique)
    for atom in unique:
        if atom.negate() in seen:
            raise ValueError(f"contradictory conditions: {atom} / {atom.negate()}")
    return Rule(polarity, action, tuple(unique))


def format_rule(rule: Rule) -> str:
    head = f"{rule.polarity} {rule.action}"
    if not rule.conditions:
        return head
    return head + " if " + " and ".join(str(a) for a in rule.conditions)


class Vocabulary:
    """Registry of actions, predicate schemas and known ground constants."""

    def __init__(self):
        self.actions: dict[str, ActionSymbol] = {}
        self.predicates: dict[str, PredicateSchema] = {}
        self._constants: dict[str, set[str]] = {s: set() for s in SORTS}

    @classmethod
    def standard(cls) -> "Vocabulary":
        """Built-in actions and predicates for the cleanup domain."""
        vocab = cls()
        vocab.register_action("pickUp")
        vocab.register_action("collect", ["pickUp"])
        vocab.register_action("trash", ["pickUp"])
        vocab.register_predicate("ownedBy", AGENT, allows_any=True)
        vocab.register_predicate("isColored", COLOR, functional=True)
        vocab.register_predicate("inArea", AREA, functional=True)
        for color in ("red", "green", "blue", "yellow"):
            vocab.add_constant(COLOR, color)
        return vocab

    # -- registration ------------------------------------------------------

    def register_action(self, name: str, prerequisites: list[str] | None = None) -> ActionSymbol:
        if not _IDENT.match(name):
            raise VocabularyError(f"invalid action name {name!r}")
        if name in self.actions:
            raise VocabularyError(f"duplicate action {name!r}")
        prereqs = tuple(prerequisites or ())
        if name in prereqs:
            raise VocabularyError(f"prerequisite cycle at {name!r}")
        for p in prereqs:
            if p not in self.actions:
                raise VocabularyError(f"unknown prerequisite {p!r}")
            if name in self.prerequisite_chain(p):
                raise VocabularyError(f"prerequisite cycle at {name!r}")
        action = ActionSymbol(name, prereqs)
        self.actions[name] = action
        return action

    def register_predicate(self, name: str, sort: str, allows_any: bool = False,
                           functional: bool = False) -> PredicateSchema:
        if not _IDENT.match(name):
            raise VocabularyError(f"invalid predicate name {name!r}")
        if name in self.predicates:
            raise VocabularyError(f"duplicate predicate {name!r}")
        if sort not in SORTS:
            raise VocabularyError(f"unknown sort {sort!r}")
        schema = PredicateSchema(name, sort, allows_any, functional)
        self.predicates[name] = schema
        return schema

    def add_constant(self, sort: str, name: str) -> None:
        if not _IDENT.match(name) or name == ANY:
            raise VocabularyError(f"invalid constant {name!r}")
        self._constants[sort].add(name)

    # -- lookups -----------------------------------------------------------

    def constants(self, sort: str) -> list[str]:
        return sorted(self._constants[sort])

    def sort_of_constant(self, name: str) -> str | None:
        for sort in SORTS:
            if name in self._constants[sort]:
                return sort
        return None

    def prerequisite_chain(self, action: str) -> list[str]:
        """Transitive prerequisites of an action, action itself excluded."""
        chain: list[str] = []
        stack = list(self.actions[action].prerequisites)
        while stack:
            current = stack.pop()
            if current not in chain:
                chain.append(current)
                stack.extend(self.actions[current].prerequisites)
        return chain


def parse_rule(text: str, vocab: Vocabulary) -> Rule:
    """Parse the concise rule syntax into a canonical Rule.

    Whitespace-insensitive; round-trips with format_rule.
    """
    if not vocab.actions or not vocab.predicates:
        raise VocabularyError("empty vocabulary")
    tokens = _tokenize(text)
    cursor = 0

    def peek():
        return tokens[cursor] if cursor < len(tokens) else None

    def take():
        nonlocal cursor
        token = peek()
        cursor += 1
        return token

    token = take()
    if token is None:
        raise RuleParseError("syntax", 0, "empty rule text")
    word, pos = token
    if word not in (FORBID, ALLOW):
        raise RuleParseError("syntax", pos, f"expected 'forbid' or 'allow', got {word!r}")
    polarity = word

    token = take()
    if token is None:
        raise RuleParseError("syntax", len(text), "missing action")
    word, pos = token
    if word in (FORBID, ALLOW, "if", "and", "not"):
        raise RuleParseError("syntax", pos, f"expected action name, got {word!r}")
    if word not in vocab.actions:
        raise RuleParseError("unknown-action", pos, f"unknown action {word!r}")
    action = word

    atoms: list[Atom] = []
    token = take()
    if token is not None:
        word, pos = token
        if word != "if":
            raise RuleParseError("syntax", pos, f"expected 'if', got {word!r}")
        while True:
            atoms.append(_parse_atom(take, text, vocab))
            token = take()
            if token is None:
                break
            word, pos = token
            if word != "and":
                raise RuleParseError("syntax", pos, f"expected 'and', got {word!r}")

    unique = sorted(set(atoms), key=Atom.sort_key)
    seen = set(unique)
    for atom in unique:
        if atom.negate() in seen:
            raise RuleParseError("contradiction", 0,
                                 f"contradictory conditions: {atom} / {atom.negate()}")
    return Rule(polarity, action, tuple(unique))


def _parse_atom(take, text: str, vocab: Vocabulary) -> Atom:
    token = take()
    if token is None:
        raise RuleParseError("syntax", len(text), "missing predicate")
    word, pos = token
    negated = False
    if word == "not":
        negated = True
        token = take()
        if token is None:
            raise RuleParseError("syntax", len(text), "missing predicate after 'not'")
        word, pos = token
    if word not in vocab.predicates:
        raise RuleParseError("unknown-predicate", pos, f"unknown predicate {word!r}")
    schema = vocab.predicates[word]

    token = take()
    if token is None:
        raise RuleParseError("syntax", len(text), f"missing argument for {schema.name!r}")
    arg, arg_pos = token
    if arg in (FORBID, ALLOW, "if", "and", "not"):
        raise RuleParseError("syntax", arg_pos, f"expected argument, got {arg!r}")
    if arg == ANY:
        if not schema.allows_any:
            raise RuleParseError("wildcard-not-allowed", arg_pos,
                                 f"{schema.name!r} does not accept 'any'")
    else:
        arg_sort = vocab.sort_of_constant(arg)
        if arg_sort != schema.sort:
            raise RuleParseError(
                "sort-mismatch", arg_pos,
                f"{arg!r} is not a known {schema.sort} (argument of {schema.name!r})")
    return Atom(schema, arg, negated)


def _tokenize(text: str) -> list[tuple[str, int]]:
    return [(m.group(0), m.start()) for m in re.finditer(r"\S+", text)]
