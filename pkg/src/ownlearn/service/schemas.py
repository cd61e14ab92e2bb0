"""Pydantic request/response models for the session service."""

from __future__ import annotations

from pydantic import BaseModel, Field


class ClaimSpec(BaseModel):
    objectId: str
    agentId: str
    probability: float = 1.0
    exclusive: bool = False


class PermissionSpec(BaseModel):
    action: str
    objectId: str
    polarity: str  # forbid | allow
    certainty: float | None = None


class InstructionSpec(BaseModel):
    claims: list[ClaimSpec] = Field(default_factory=list)
    permission: PermissionSpec | None = None
    rule: str | None = None
    source: str = "user"

    def to_payload(self) -> dict:
        payload: dict = {"claims": [c.model_dump() for c in self.claims],
                         "source": self.source}
        if self.permission is not None:
            perm = self.permission.model_dump()
            if perm.get("certainty") is None:
                perm["certainty"] = 1.0 if perm["polarity"] == "forbid" else 0.0
            payload["permission"] = perm
        if self.rule is not None:
            payload["rule"] = self.rule
        return payload


class ObjectSpec(BaseModel):
    id: str
    position: tuple[float, float, float] = (0.0, 0.0, 0.0)
    color: str
    area: str | None = None
    lastInteraction: dict[str, float] = Field(default_factory=dict)


class CreateSessionRequest(BaseModel):
    seed: int = 0
    nAgents: int = 3
    windowSeconds: float = 2.0
    obedienceThreshold: float = 0.5
    agents: list[str] | None = None
    objects: list[ObjectSpec] | None = None

    def to_config(self) -> dict:
        config: dict = {
            "seed": self.seed,
            "nAgents": self.nAgents,
            "windowSeconds": self.windowSeconds,
            "obedienceThreshold": self.obedienceThreshold,
        }
        if self.objects is not None:
            config["objects"] = [o.model_dump() for o in self.objects]
            config["agents"] = self.agents or []
        return config


class CreateSessionResponse(BaseModel):
    sessionId: str
    snapshot: dict


class CommandRequest(BaseModel):
    kind: str
    task: str | None = None
    action: str | None = None
    objectId: str | None = None
    requestedBy: str | None = None
    seconds: float | None = None
    instruction: InstructionSpec | None = None

    def to_payload(self) -> dict:
        payload: dict = {"kind": self.kind}
        for name in ("task", "action", "objectId", "requestedBy", "seconds"):
            value = getattr(self, name)
            if value is not None:
                payload[name] = value
        if self.instruction is not None:
            payload["instruction"] = self.instruction.to_payload()
        return payload


class CommandResponse(BaseModel):
    ok: bool
    result: dict


class ErrorResponse(BaseModel):
    ok: bool = False
    error: str
