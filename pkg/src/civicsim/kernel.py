"""Agent/group/role kernel.

Agents are opaque ids that play roles inside environments (the groups of the
organizational model). Communication is confined to shared environments and
message delivery is phase-buffered: a message sent during phase k becomes
visible at the next phase boundary, in an order that does not depend on the
iteration order of the sending phase.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any, NewType

from .errors import (
    BoundaryViolation,
    ConfigurationError,
    ConstraintError,
    UnknownEnvironmentError,
)

AgentId = NewType("AgentId", int)


class EnvironmentKind(Enum):
    SOCIETY = "society"
    ENGO = "engo"
    MUNICIPALITY = "municipality"


class RoleKind(Enum):
    BROADCASTER = "broadcaster"
    PROPOSAL_DEVELOPER = "proposal_developer"
    REPRESENTATIVE = "representative"
    RESIDENT = "resident"
    MEMBER_OF_ENGO = "member_of_engo"
    PROPOSAL_REVIEWER = "proposal_reviewer"
    ACTIVIST = "activist"
    URBAN_PLANNER = "urban_planner"


# Which environment kinds each role may be bound in. Developers appear in both
# Society and Municipality so proposal submission can travel the message bus.
ROLE_ENVIRONMENTS: dict[RoleKind, frozenset[EnvironmentKind]] = {
    RoleKind.BROADCASTER: frozenset({EnvironmentKind.SOCIETY}),
    RoleKind.PROPOSAL_DEVELOPER: frozenset(
        {EnvironmentKind.SOCIETY, EnvironmentKind.MUNICIPALITY}
    ),
    RoleKind.REPRESENTATIVE: frozenset({EnvironmentKind.SOCIETY}),
    RoleKind.RESIDENT: frozenset({EnvironmentKind.SOCIETY}),
    RoleKind.MEMBER_OF_ENGO: frozenset({EnvironmentKind.ENGO}),
    RoleKind.PROPOSAL_REVIEWER: frozenset({EnvironmentKind.SOCIETY}),
    RoleKind.ACTIVIST: frozenset({EnvironmentKind.ENGO}),
    RoleKind.URBAN_PLANNER: frozenset({EnvironmentKind.MUNICIPALITY}),
}


@dataclass
class Membership:
    agent: AgentId
    environment: str
    roles: frozenset[RoleKind]


@dataclass(frozen=True)
class Message:
    """One unit of communication, scoped to an agent or an environment.

    Exactly one of ``to_env`` / ``to_agent`` must be set.
    """

    sender: AgentId
    kind: str
    payload: Any
    tick: int
    to_env: str | None = None
    to_agent: AgentId | None = None

    def __post_init__(self):
        if (self.to_env is None) == (self.to_agent is None):
            raise ConstraintError("message scope must be exactly one agent or environment")


@dataclass
class Receipt:
    """Returned by send(); receivers are filled in at the phase boundary."""

    seq: int
    delivered_to: tuple[AgentId, ...] = ()


class EventLog:
    """Append-only run record: memberships, messages, artifact events.

    Each record carries tick, phase index and a monotonically increasing
    sequence number; serialization to JSON Lines is handled by the engine.
    """

    def __init__(self):
        self.records: list[dict[str, Any]] = []
        self._next_seq = 0

    def append(self, type_: str, tick: int, phase: int, **fields: Any) -> dict[str, Any]:
        record = {"seq": self._next_seq, "tick": tick, "phase": phase, "type": type_}
        record.update(fields)
        self._next_seq += 1
        self.records.append(record)
        return record

    def __len__(self) -> int:
        return len(self.records)


@dataclass
class _Environment:
    env_id: str
    kind: EnvironmentKind
    members: dict[AgentId, Membership] = field(default_factory=dict)


class Organization:
    """Holds agents, environments, memberships and the phase-buffered bus.

    Single-writer: one run mutates one Organization from one logical thread.
    """

    def __init__(self, log: EventLog | None = None):
        self.log = log if log is not None else EventLog()
        self.tick = 0
        self.phase = 0
        self._sealed = False
        self._next_agent = 0
        self._agents: set[AgentId] = set()
        self._environments: dict[str, _Environment] = {}
        self._memberships: dict[AgentId, dict[str, Membership]] = {}
        self._next_msg_seq = 0
        self._pending: list[tuple[int, Message, Receipt]] = []
        self._inboxes: dict[AgentId, list[Message]] = {}

    # -- setup ---------------------------------------------------------------

    def add_environment(self, kind: EnvironmentKind, env_id: str | None = None) -> str:
        if env_id is None:
            env_id = kind.value
        if env_id in self._environments:
            raise ConfigurationError(f"environment {env_id!r} already exists")
        if kind is not EnvironmentKind.ENGO:
            for env in self._environments.values():
                if env.kind is kind:
                    raise ConfigurationError(f"only one {kind.value} environment per scenario")
        self._environments[env_id] = _Environment(env_id, kind)
        return env_id

    def register_agent(self) -> AgentId:
        if self._sealed:
            raise ConfigurationError("agent registration after the run was sealed")
        agent = AgentId(self._next_agent)
        self._next_agent += 1
        self._agents.add(agent)
        self._memberships[agent] = {}
        self._inboxes[agent] = []
        return agent

    def seal(self) -> None:
        self._sealed = True

    # -- membership ----------------------------------------------------------

    def environment_kind(self, env_id: str) -> EnvironmentKind:
        return self._require_env(env_id).kind

    def environments(self) -> list[str]:
        return sorted(self._environments)

    def join(self, agent: AgentId, env_id: str, roles: set[RoleKind]) -> Membership:
        if agent not in self._agents:
            raise ConfigurationError(f"agent {agent} is not registered")
        env = self._require_env(env_id)
        if not roles:
            raise ConstraintError("an agent plays at least one role in an environment")
        for role in roles:
            if env.kind not in ROLE_ENVIRONMENTS[role]:
                raise ConstraintError(
                    f"role {role.value} is not compatible with a {env.kind.value} environment"
                )
        existing = env.members.get(agent)
        if existing is not None:
            merged = existing.roles | frozenset(roles)
            if merged == existing.roles:
                return existing
            existing.roles = merged
            membership = existing
        else:
            membership = Membership(agent, env_id, frozenset(roles))
            env.members[agent] = membership
            self._memberships[agent][env_id] = membership
        self.log.append(
            "membership",
            self.tick,
            self.phase,
            agent=int(agent),
            env=env_id,
            roles=sorted(r.value for r in membership.roles),
        )
        return membership

    def members_of(self, env_id: str) -> list[tuple[AgentId, frozenset[RoleKind]]]:
        env = self._require_env(env_id)
        return [(a, env.members[a].roles) for a in sorted(env.members)]

    def memberships_of(self, agent: AgentId) -> list[Membership]:
        return [self._memberships[agent][e] for e in sorted(self._memberships.get(agent, {}))]

    def shares_environment(self, a: AgentId, b: AgentId) -> bool:
        envs_a = self._memberships.get(a, {})
        envs_b = self._memberships.get(b, {})
        return not envs_a.keys().isdisjoint(envs_b.keys())

    def roles_in(self, agent: AgentId, env_id: str) -> frozenset[RoleKind]:
        membership = self._memberships.get(agent, {}).get(env_id)
        return membership.roles if membership else frozenset()

    def has_role(self, agent: AgentId, role: RoleKind) -> bool:
        return any(role in m.roles for m in self._memberships.get(agent, {}).values())

    # -- messaging -----------------------------------------------------------

    def send(self, msg: Message) -> Receipt:
        if msg.sender not in self._agents:
            raise ConfigurationError(f"sender {msg.sender} is not registered")
        if msg.to_env is not None:
            env = self._require_env(msg.to_env)
            if msg.sender not in env.members:
                raise BoundaryViolation(
                    f"sender {msg.sender} is not a member of {msg.to_env!r}"
                )
        else:
            target = msg.to_agent
            if target not in self._agents:
                raise ConfigurationError(f"receiver {target} is not registered")
            if not self.shares_environment(msg.sender, target):
                raise BoundaryViolation(
                    f"agents {msg.sender} and {target} share no environment"
                )
        receipt = Receipt(seq=self._next_msg_seq)
        self._next_msg_seq += 1
        self._pending.append((receipt.seq, msg, receipt))
        return receipt

    def flush_phase(self) -> list[tuple[AgentId, Message]]:
        """Deliver queued messages; called by the scheduler at phase boundaries.

        Returns the deliveries sorted by (receiver id, message sequence).
        """
        deliveries: list[tuple[AgentId, int, Message]] = []
        for seq, msg, receipt in self._pending:
            if msg.to_env is not None:
                env = self._environments[msg.to_env]
                receivers = [a for a in env.members if a != msg.sender]
            else:
                receivers = [msg.to_agent]
            receipt.delivered_to = tuple(sorted(receivers))
            scope = msg.to_env if msg.to_env is not None else f"agent:{msg.to_agent}"
            self.log.append(
                "message",
                self.tick,
                self.phase,
                kind=msg.kind,
                sender=int(msg.sender),
                scope=scope,
                receivers=len(receivers),
                payload=msg.payload,
            )
            for receiver in receivers:
                deliveries.append((receiver, seq, msg))
        self._pending.clear()
        deliveries.sort(key=lambda d: (d[0], d[1]))
        for receiver, _seq, msg in deliveries:
            self._inboxes[receiver].append(msg)
        return [(receiver, msg) for receiver, _seq, msg in deliveries]

    def drain_inbox(self, agent: AgentId) -> list[Message]:
        inbox = self._inboxes[agent]
        self._inboxes[agent] = []
        return inbox

    def clear_inboxes(self) -> None:
        for agent in self._inboxes:
            if self._inboxes[agent]:
                self._inboxes[agent] = []

    # -- internals -----------------------------------------------------------

    def _require_env(self, env_id: str) -> _Environment:
        env = self._environments.get(env_id)
        if env is None:
            raise UnknownEnvironmentError(f"unknown environment {env_id!r}")
        return env
