"""Tracked objects, agents, the probabilistic ownership graph and the
object-specific permission database."""

from __future__ import annotations

from dataclasses import dataclass, field

from .dsl import ALLOW, FORBID, AGENT, AREA, Rule, Vocabulary, format_rule

DEFAULT_PRIOR = 0.5


class UnknownEntityError(KeyError):
    """Referenced object, agent or action is not tracked."""


@dataclass
class ObjectState:
    id: str
    position: tuple[float, float, float]
    color: str
    last_interaction: dict[str, float] = field(default_factory=dict)
    area: str | None = None
    status: str = "present"  # present | collected | trashed

    def __post_init__(self):
        for agent, ts in self.last_interaction.items():
            if ts < 0:
                raise ValueError(f"negative interaction timestamp for {agent}")


@dataclass(frozen=True)
class Permission:
    action: str
    object_id: str
    polarity: str
    certainty: float  # probability that the action is forbidden

    def __post_init__(self):
        if self.polarity not in (FORBID, ALLOW):
            raise ValueError(f"bad polarity {self.polarity!r}")
        if not 0.0 <= self.certainty <= 1.0:
            raise ValueError(f"certainty {self.certainty} outside [0,1]")

    @classmethod
    def forbid(cls, action: str, object_id: str, certainty: float = 1.0) -> "Permission":
        return cls(action, object_id, FORBID, certainty)

    @classmethod
    def allow(cls, action: str, object_id: str, certainty: float = 0.0) -> "Permission":
        return cls(action, object_id, ALLOW, certainty)


@dataclass(frozen=True)
class Claim:
    object_id: str
    agent_id: str
    probability: float
    exclusive: bool = False


@dataclass
class Instruction:
    """Dual-mode teaching message: any subset of claim / permission / rule."""

    permission: Permission | None = None
    rule: Rule | None = None
    claims: list[Claim] = field(default_factory=list)
    source: str = "user"
    timestamp: float = 0.0

    def is_empty(self) -> bool:
        return self.permission is None and self.rule is None and not self.claims


class WorldState:
    """Single-writer world: objects, agents, claims and the permission DB.

    Ownership priors resolve as explicit claim, else percept prediction
    (when a predictor is attached and trained), else the default prior.
    """

    def __init__(self, vocab: Vocabulary | None = None, default_prior: float = DEFAULT_PRIOR):
        self.vocab = vocab or Vocabulary.standard()
        self.objects: dict[str, ObjectState] = {}
        self.agents: list[str] = []
        self.claims: dict[tuple[str, str], float] = {}
        self.permissions: dict[tuple[str, str], Permission] = {}
        self.default_prior = default_prior
        self.clock = 0.0
        self.predictor = None  # duck-typed: predict(world, object_id, agent_id) -> float|None

    # -- registration ------------------------------------------------------

    def add_object(self, obj: ObjectState) -> None:
        if obj.id in self.objects:
            raise ValueError(f"duplicate object {obj.id!r}")
        if obj.color not in self.vocab.constants("color"):
            raise ValueError(f"unregistered color {obj.color!r}")
        if obj.area is not None and obj.area not in self.vocab.constants(AREA):
            self.vocab.add_constant(AREA, obj.area)
        self.objects[obj.id] = obj

    def add_agent(self, agent_id: str) -> None:
        if agent_id in self.agents:
            return
        self.agents.append(agent_id)
        self.vocab.add_constant(AGENT, agent_id)

    # -- mutations ---------------------------------------------------------

    def record_claim(self, object_id: str, agent_id: str, probability: float,
                     exclusive: bool = False) -> list[tuple[str, str]]:
        """Store an explicit ownership claim; returns the affected pairs.

        An exclusive claim zeroes every other agent's claim on the object.
        """
        self._require_object(object_id)
        if agent_id not in self.agents:
            raise UnknownEntityError(f"unknown agent {agent_id!r}")
        if not 0.0 <= probability <= 1.0:
            raise ValueError(f"probability {probability} outside [0,1]")
        affected = [(object_id, agent_id)]
        self.claims[(object_id, agent_id)] = probability
        if exclusive:
            for other in self.agents:
                if other != agent_id:
                    self.claims[(object_id, other)] = 0.0
                    affected.append((object_id, other))
        if self.predictor is not None:
            self.predictor.refresh(self, [a for _, a in affected])
        return affected

    def record_permission(self, perm: Permission) -> None:
        self._require_object(perm.object_id)
        if perm.action not in self.vocab.actions:
            raise UnknownEntityError(f"unknown action {perm.action!r}")
        self.permissions[(perm.action, perm.object_id)] = perm

    # -- reads ---------------------------------------------------------------

    def ownership_prior(self, object_id: str, agent_id: str) -> float:
        self._require_object(object_id)
        key = (object_id, agent_id)
        if key in self.claims:
            return self.claims[key]
        if self.predictor is not None:
            predicted = self.predictor.predict(self, object_id, agent_id)
            if predicted is not None:
                return predicted
        return self.default_prior

    def permission_for(self, action: str, object_id: str) -> Permission | None:
        return self.permissions.get((action, object_id))

    def permission_list(self) -> list[Permission]:
        return list(self.permissions.values())

    def _require_object(self, object_id: str) -> ObjectState:
        try:
            return self.objects[object_id]
        except KeyError:
            raise UnknownEntityError(f"unknown object {object_id!r}") from None

    # -- serialization -------------------------------------------------------

    def snapshot(self) -> dict:
        """World part of the documented JSON snapshot shape."""
        return {
            "clock": self.clock,
            "agents": list(self.agents),
            "objects": [
                {
                    "id": o.id,
                    "position": list(o.position),
                    "color": o.color,
                    "area": o.area,
                    "status": o.status,
                    "lastInteraction": dict(sorted(o.last_interaction.items())),
                }
                for o in sorted(self.objects.values(), key=lambda o: o.id)
            ],
            "ownershipPriors": {
                o: {a: self.ownership_prior(o, a) for a in self.agents}
                for o in sorted(self.objects)
            },
            "permissions": [
                {
                    "action": p.action,
                    "objectId": p.object_id,
                    "polarity": p.polarity,
                    "certainty": p.certainty,
                }
                for p in sorted(self.permissions.values(),
                                key=lambda p: (p.object_id, p.action))
            ],
        }
