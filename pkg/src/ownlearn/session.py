"""Live teaching sessions: a task streams announce events with an
interruption window before every irreversible action, instructions can
arrive at any time, and every mutation is published as a replayable event.

Time is simulated and client-driven: `advance` moves the session clock,
and a pending announced action executes when the clock passes its
deadline. Interrupting inside the window cancels the pending action and
applies the correction; an interrupt arriving just after execution is
recorded as a correction rather than a cancellation.
"""

from __future__ import annotations

import itertools
import threading
from dataclasses import dataclass, field

import numpy as np

from .agent import DONE_STATUS, TASK_ACTIONS, action_chain, decide_action
from .dsl import FORBID, RuleParseError, format_rule, parse_rule
from .inference import OwnershipSystem
from .simulation import SimConfig, generate_world
from .world import Claim, Instruction, ObjectState, Permission, WorldState

PROTOCOL_VERSION = 1

EVENT_KINDS = (
    "stateSnapshot", "actionAnnounced", "actionExecuted", "actionRefused",
    "ruleLearned", "ownershipUpdated", "mistakeCorrected", "taskDone",
)

COMMAND_KINDS = ("startTask", "requestAction", "instruct", "interrupt", "advance")


class SessionError(ValueError):
    """Rejected command: bad input or wrong session state."""


@dataclass
class SessionEvent:
    seq: int
    kind: str
    payload: dict
    # replacement values applied to the snapshot by replay
    delta: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        return {"protocol": PROTOCOL_VERSION, "seq": self.seq, "kind": self.kind,
                "payload": self.payload, "delta": self.delta}


def apply_event(snapshot: dict, event: dict) -> dict:
    """Fold one serialized event into a snapshot; replaying the whole stream
    over the initial snapshot reproduces the live state."""
    if event["kind"] == "stateSnapshot":
        return {key: value for key, value in event["payload"]["snapshot"].items()}
    out = dict(snapshot)
    out.update(event["delta"])
    return out


@dataclass
class PendingAction:
    action: str
    object_id: str
    deadline: float
    forbiddenness: dict[str, float]


@dataclass
class TaskState:
    name: str
    queue: list[str]
    visited: list[str] = field(default_factory=list)
    mistakes: int = 0


class Session:
    def __init__(self, session_id: str, config: dict):
        self.id = session_id
        self.config = dict(config)
        self.lock = threading.Lock()
        self.events: list[dict] = []
        self._seq = itertools.count(1)
        self.window_seconds = float(config.get("windowSeconds", 2.0))
        # strictly above one-half: a single ownership claim leaves the
        # claimant's model at sigma(0)=0.5 far from its one training point,
        # and a 0.5 threshold would read that as forbidden everywhere
        self.obedience = float(config.get("obedienceThreshold", 0.6))
        self.system = OwnershipSystem(self._build_world(config))
        self.rng = np.random.default_rng(int(config.get("seed", 0)))
        self.task: TaskState | None = None
        self.pending: PendingAction | None = None
        self.clock = 0.0
        self._emit("stateSnapshot", {"snapshot": self.snapshot()})

    # -- construction ---------------------------------------------------------

    @staticmethod
    def _build_world(config: dict) -> WorldState:
        if "objects" in config:
            world = WorldState()
            agents = config.get("agents", [])
            if not agents:
                raise SessionError("config needs at least one agent")
            for agent in agents:
                world.add_agent(agent)
            for spec in config["objects"]:
                world.add_object(ObjectState(
                    id=spec["id"],
                    position=tuple(spec.get("position", (0.0, 0.0, 0.0))),
                    color=spec["color"],
                    last_interaction=dict(spec.get("lastInteraction", {})),
                    area=spec.get("area"),
                ))
            return world
        sim = SimConfig(seed=int(config.get("seed", 0)),
                        n_agents=int(config.get("nAgents", 3)))
        world, _ = generate_world(sim, sim.seed)
        return world

    # -- events ----------------------------------------------------------------

    def _emit(self, kind: str, payload: dict, delta: dict | None = None) -> dict:
        event = SessionEvent(next(self._seq), kind, payload, delta or {}).to_json()
        self.events.append(event)
        return event

    def _core_delta(self) -> dict:
        """Replacement values for everything instructions can touch."""
        world = self.system.world.snapshot()
        return {
            "clock": self.clock,
            "objects": world["objects"],
            "ownershipPriors": world["ownershipPriors"],
            "ownershipPosteriors": self._posteriors(),
            "permissions": world["permissions"],
            "rules": [format_rule(r) for r in self.system.rule_set],
            "conflictFraction": self.system.conflict_fraction(),
            "task": self._task_json(),
        }

    def _posteriors(self) -> dict:
        return {o: {a: self.system.ownership_posterior(o, a)
                    for a in self.system.world.agents}
                for o in sorted(self.system.world.objects)}

    def _task_json(self) -> dict | None:
        if self.task is None:
            return None
        return {
            "name": self.task.name,
            "remaining": list(self.task.queue),
            "visited": list(self.task.visited),
            "mistakes": self.task.mistakes,
            "pending": None if self.pending is None else {
                "action": self.pending.action,
                "objectId": self.pending.object_id,
                "deadline": self.pending.deadline,
            },
        }

    def snapshot(self) -> dict:
        world = self.system.world.snapshot()
        return {
            "protocol": PROTOCOL_VERSION,
            "sessionId": self.id,
            "clock": self.clock,
            "windowSeconds": self.window_seconds,
            "agents": world["agents"],
            "objects": world["objects"],
            "ownershipPriors": world["ownershipPriors"],
            "ownershipPosteriors": self._posteriors(),
            "permissions": world["permissions"],
            "rules": [format_rule(r) for r in self.system.rule_set],
            "conflictFraction": self.system.conflict_fraction(),
            "task": self._task_json(),
        }

    # -- commands ---------------------------------------------------------------

    def submit(self, command: dict) -> dict:
        kind = command.get("kind")
        if kind not in COMMAND_KINDS:
            raise SessionError(f"unknown command kind {kind!r}")
        with self.lock:
            handler = getattr(self, f"_cmd_{kind}")
            return handler(command)

    def _cmd_startTask(self, command: dict) -> dict:
        task = command.get("task")
        if task not in TASK_ACTIONS:
            raise SessionError(f"unknown task {task!r}")
        if self.task is not None and self.task.queue:
            raise SessionError("a task is already running")
        order = [str(o) for o in self.rng.permutation(
            sorted(o for o, st in self.system.world.objects.items()
                   if st.status == "present"))]
        self.task = TaskState(name=task, queue=order)
        self._advance_task()
        return {"ok": True, "task": task, "order": order}

    def _cmd_advance(self, command: dict) -> dict:
        seconds = command.get("seconds")
        if seconds is None:
            seconds = self.window_seconds
        if seconds < 0:
            raise SessionError("cannot advance time backwards")
        self.clock += float(seconds)
        if self.pending is not None and self.clock >= self.pending.deadline:
            self._execute_pending()
            self._advance_task()
        return {"ok": True, "clock": self.clock}

    def _cmd_interrupt(self, command: dict) -> dict:
        instruction = self._parse_instruction(command.get("instruction") or {})
        if self.pending is not None and self.clock < self.pending.deadline:
            cancelled = self.pending
            self.pending = None
            if self.task is not None:
                self.task.mistakes += 1
                if self.task.queue and self.task.queue[0] == cancelled.object_id:
                    self.task.queue.pop(0)
                self.task.visited.append(cancelled.object_id)
            effects = self.system.handle_instruction(instruction)
            self._emit("mistakeCorrected", {
                "objectId": cancelled.object_id,
                "action": cancelled.action,
                "cancelled": True,
            }, self._core_delta())
            self._emit_effects(effects)
            self._advance_task()
            return {"ok": True, "cancelled": cancelled.object_id}
        last = self.events[-1] if self.events else None
        if last is not None and last["kind"] == "actionExecuted":
            effects = self.system.handle_instruction(instruction)
            if self.task is not None:
                self.task.mistakes += 1
            self._emit("mistakeCorrected", {
                "objectId": last["payload"]["objectId"],
                "action": last["payload"]["action"],
                "cancelled": False,
            }, self._core_delta())
            self._emit_effects(effects)
            return {"ok": True, "correctedAfterExecution": True}
        raise SessionError("no interruptible action: no announce window is open")

    def _cmd_instruct(self, command: dict) -> dict:
        instruction = self._parse_instruction(command.get("instruction") or {})
        effects = self.system.handle_instruction(instruction)
        self._emit_effects(effects, force_ownership_event=bool(instruction.claims))
        return {"ok": True}

    def _cmd_requestAction(self, command: dict) -> dict:
        action = command.get("action")
        object_id = command.get("objectId")
        requested_by = command.get("requestedBy", "user")
        if action not in self.system.world.vocab.actions:
            raise SessionError(f"unknown action {action!r}")
        if object_id not in self.system.world.objects:
            raise SessionError(f"unknown object {object_id!r}")
        decision = decide_action(self.system.world, self.system.rule_set,
                                 action, object_id, self.obedience)
        if decision.choice == "refuse":
            self._emit("actionRefused", {
                "action": action,
                "objectId": object_id,
                "forbiddenness": decision.forbiddenness,
                "violatedRules": [format_rule(r) for r in decision.violated_rules],
                "requestedBy": requested_by,
            }, self._core_delta())
            return {"ok": True, "decision": "refuse",
                    "violatedRules": [format_rule(r) for r in decision.violated_rules]}
        self._perform(action, object_id, decision.forbiddenness)
        return {"ok": True, "decision": "act"}

    # -- task internals -----------------------------------------------------------

    def _advance_task(self) -> None:
        """Walk the task queue, emitting refusals, until an action needs an
        announce window or the task completes."""
        if self.task is None or self.pending is not None:
            return
        action = TASK_ACTIONS[self.task.name]
        while self.task.queue:
            object_id = self.task.queue[0]
            decision = decide_action(self.system.world, self.system.rule_set,
                                     action, object_id, self.obedience)
            if decision.choice == "refuse":
                self.task.queue.pop(0)
                self.task.visited.append(object_id)
                self._emit("actionRefused", {
                    "action": action,
                    "objectId": object_id,
                    "forbiddenness": decision.forbiddenness,
                    "violatedRules": [format_rule(r) for r in decision.violated_rules],
                    "requestedBy": None,
                }, self._core_delta())
                continue
            self.pending = PendingAction(action, object_id,
                                         self.clock + self.window_seconds,
                                         decision.forbiddenness)
            self._emit("actionAnnounced", {
                "action": action,
                "objectId": object_id,
                "forbiddenness": decision.forbiddenness,
                "windowSeconds": self.window_seconds,
                "deadline": self.pending.deadline,
            }, {"clock": self.clock, "task": self._task_json()})
            return
        done = self.task
        self.task = None
        self._emit("taskDone", {
            "task": done.name,
            "mistakes": done.mistakes,
            "visited": done.visited,
        }, self._core_delta())

    def _execute_pending(self) -> None:
        pending = self.pending
        self.pending = None
        if self.task is not None and self.task.queue and \
                self.task.queue[0] == pending.object_id:
            self.task.queue.pop(0)
            self.task.visited.append(pending.object_id)
        self._perform(pending.action, pending.object_id, pending.forbiddenness)

    def _perform(self, action: str, object_id: str,
                 forbiddenness: dict[str, float]) -> None:
        """Execute an action: mark the object, then record the per-action
        predictions as assumed-accurate permission examples."""
        world = self.system.world
        status = DONE_STATUS.get(action)
        if status is not None:
            world.objects[object_id].status = status
        world.objects[object_id].last_interaction["robot"] = self.clock
        effects_list = []
        for step in reversed(action_chain(world, action)):
            certainty = forbiddenness.get(step)
            if certainty is None:
                from .evaluation import eval_rule_set
                certainty = eval_rule_set(self.system.rule_set, step, object_id, world)
            polarity = FORBID if certainty >= 0.5 else "allow"
            perm = Permission(step, object_id, polarity, certainty)
            effects_list.append(self.system.handle_instruction(
                Instruction(permission=perm, source="self")))
        self._emit("actionExecuted", {
            "action": action,
            "objectId": object_id,
            "status": status,
        }, self._core_delta())
        for effects in effects_list:
            self._emit_effects(effects, skip_core=True)

    # -- instruction plumbing --------------------------------------------------------

    def _parse_instruction(self, spec: dict) -> Instruction:
        world = self.system.world
        claims = []
        for entry in spec.get("claims", []):
            agent = entry["agentId"]
            if agent not in world.agents:
                world.add_agent(agent)  # new users become known agents
            claims.append(Claim(entry["objectId"], agent,
                                float(entry.get("probability", 1.0)),
                                bool(entry.get("exclusive", False))))
        permission = None
        if spec.get("permission"):
            p = spec["permission"]
            permission = Permission(p["action"], p["objectId"], p["polarity"],
                                    float(p.get("certainty",
                                                1.0 if p["polarity"] == FORBID else 0.0)))
        rule = None
        if spec.get("rule"):
            try:
                rule = parse_rule(spec["rule"], world.vocab)
            except RuleParseError as err:
                raise SessionError(f"bad rule text: {err}") from err
        instruction = Instruction(permission=permission, rule=rule, claims=claims,
                                  source=spec.get("source", "user"),
                                  timestamp=self.clock)
        if instruction.is_empty():
            raise SessionError("empty instruction")
        return instruction

    def _emit_effects(self, effects, skip_core: bool = False,
                      force_ownership_event: bool = False) -> None:
        delta = {} if skip_core else self._core_delta()
        if effects.rules_changed:
            self._emit("ruleLearned", {
                "rules": [format_rule(r) for r in self.system.rule_set],
                "dispatched": effects.dispatched,
            }, delta)
            delta = {}
        if effects.posterior_updates or force_ownership_event:
            self._emit("ownershipUpdated", {
                "entries": [
                    {"objectId": o, "agentId": a, "posterior": p}
                    for (o, a), p in sorted(effects.posterior_updates.items())
                ],
                "inconsistent": effects.inconsistent,
            }, delta)
            delta = {}
        if delta:
            # permission-only effect: keep the stream replayable anyway
            self._emit("ownershipUpdated", {"entries": [], "inconsistent": False},
                       delta)


class SessionManager:
    """Holds live sessions; one mutator at a time per session."""

    def __init__(self):
        self._sessions: dict[str, Session] = {}
        self._lock = threading.Lock()
        self._counter = itertools.count(1)

    def create(self, config: dict | None = None) -> Session:
        config = dict(config or {})
        if "objects" not in config and int(config.get("nAgents", 3)) <= 0:
            raise SessionError("config needs at least one agent")
        with self._lock:
            session_id = f"s{next(self._counter):04d}"
            session = Session(session_id, config)
            self._sessions[session_id] = session
        return session

    def get(self, session_id: str) -> Session:
        try:
            return self._sessions[session_id]
        except KeyError:
            raise SessionError(f"unknown session {session_id!r}") from None

    def submit(self, session_id: str, command: dict) -> dict:
        return self.get(session_id).submit(command)

    def query_state(self, session_id: str) -> dict:
        session = self.get(session_id)
        with session.lock:
            return session.snapshot()

    def events_since(self, session_id: str, after_seq: int = 0) -> list[dict]:
        session = self.get(session_id)
        with session.lock:
            return [e for e in session.events if e["seq"] > after_seq]
