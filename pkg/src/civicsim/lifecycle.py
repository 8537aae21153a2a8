"""Proposal artifacts, the five-stage lifecycle machine, and the public repository.

A proposal moves Draft -> UnderConsultation -> UnderAssessment ->
UnderDeliberation -> Decided; a SentForRevision decision loops back into
consultation after developer rework, at most ``max_revision_rounds`` times.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .errors import IntegrityError, SchemaError, StageError
from .kernel import AgentId, RoleKind

AttributeValue = float | str


class ProposalStage(Enum):
    DRAFT = "draft"
    UNDER_CONSULTATION = "under_consultation"
    UNDER_ASSESSMENT = "under_assessment"
    UNDER_DELIBERATION = "under_deliberation"
    DECIDED = "decided"


class DecisionOutcome(Enum):
    APPROVED = "approved"
    REJECTED = "rejected"
    SENT_FOR_REVISION = "sent_for_revision"


class EventKind(Enum):
    SUBMIT = "submit"
    CONSULTATION_ELAPSED = "consultation_elapsed"
    ASSESSMENT_ATTACHED = "assessment_attached"
    COUNCIL_VOTE = "council_vote"
    REWORK_APPLIED = "rework_applied"


class RevisionOrigin(Enum):
    PUBLIC_CONSULTATION = "public_consultation"
    DEVELOPER_REWORK = "developer_rework"


@dataclass(frozen=True)
class LifecycleEvent:
    kind: EventKind
    outcome: DecisionOutcome | None = None

    def __post_init__(self):
        if (self.kind is EventKind.COUNCIL_VOTE) != (self.outcome is not None):
            raise StageError("exactly council-vote events carry a decision outcome")


@dataclass
class StageTransition:
    tick: int
    event: str
    from_stage: str
    to_stage: str
    coerced: bool = False


@dataclass
class Revision:
    proposal_id: str
    author: AgentId
    origin: RevisionOrigin
    changes: dict[str, AttributeValue]
    tick: int


@dataclass
class Assessment:
    proposal_id: str
    planner: AgentId
    compliance_score: float
    mandatory_mods: list[Any]
    optional_mods: list[Any]
    tick: int
    reject_trigger: bool = False

    def __post_init__(self):
        if not 0.0 <= self.compliance_score <= 1.0:
            raise ValueError("compliance_score outside [0, 1]")
        if self.compliance_score == 1.0 and self.mandatory_mods:
            raise ValueError("fully compliant assessment cannot carry mandatory mods")


def stage_label(stage: ProposalStage, outcome: DecisionOutcome | None) -> str:
    if stage is ProposalStage.DECIDED:
        return f"decided:{outcome.value}"
    return stage.value


@dataclass
class Proposal:
    id: str
    developer: AgentId
    attributes: dict[str, AttributeValue]
    max_revision_rounds: int = 3
    stage: ProposalStage = ProposalStage.DRAFT
    outcome: DecisionOutcome | None = None
    revision_round: int = 0
    history: list[StageTransition] = field(default_factory=list)
    revisions: list[Revision] = field(default_factory=list)

    def __post_init__(self):
        if not self.attributes:
            raise ValueError("proposal attributes must be non-empty")

    @property
    def terminal(self) -> bool:
        return self.stage is ProposalStage.DECIDED and self.outcome in (
            DecisionOutcome.APPROVED,
            DecisionOutcome.REJECTED,
        )

    def stage_entered_tick(self) -> int:
        return self.history[-1].tick if self.history else 0


# Legal edges of the stage machine, keyed by (stage, event kind). The
# Decided -> consultation edge additionally requires outcome SentForRevision.
_EDGES: dict[tuple[ProposalStage, EventKind], ProposalStage] = {
    (ProposalStage.DRAFT, EventKind.SUBMIT): ProposalStage.UNDER_CONSULTATION,
    (ProposalStage.UNDER_CONSULTATION, EventKind.CONSULTATION_ELAPSED): ProposalStage.UNDER_ASSESSMENT,
    (ProposalStage.UNDER_ASSESSMENT, EventKind.ASSESSMENT_ATTACHED): ProposalStage.UNDER_DELIBERATION,
    (ProposalStage.UNDER_DELIBERATION, EventKind.COUNCIL_VOTE): ProposalStage.DECIDED,
    (ProposalStage.DECIDED, EventKind.REWORK_APPLIED): ProposalStage.UNDER_CONSULTATION,
}


def transition_stage(p: Proposal, event: LifecycleEvent, tick: int) -> Proposal:
    """Apply one lifecycle event, recording it in the proposal history.

    A SentForRevision vote arriving when the proposal has exhausted its
    revision rounds is coerced to Rejected (termination guarantee); the
    recorded transition carries ``coerced=True``.
    """
    target = _EDGES.get((p.stage, event.kind))
    if target is None:
        raise StageError(
            f"event {event.kind.value} is illegal in stage "
            f"{stage_label(p.stage, p.outcome)} for proposal {p.id}"
        )
    if p.stage is ProposalStage.DECIDED and p.outcome is not DecisionOutcome.SENT_FOR_REVISION:
        raise StageError(f"decided:{p.outcome.value} is terminal for proposal {p.id}")
    if p.history and tick <= p.history[-1].tick:
        raise StageError(
            f"lifecycle history must be strictly ordered by tick (got {tick} "
            f"after {p.history[-1].tick})"
        )

    from_label = stage_label(p.stage, p.outcome)
    coerced = False
    outcome = event.outcome
    if event.kind is EventKind.COUNCIL_VOTE:
        if outcome is DecisionOutcome.SENT_FOR_REVISION and p.revision_round >= p.max_revision_rounds:
            outcome = DecisionOutcome.REJECTED
            coerced = True
        p.outcome = outcome
    elif event.kind is EventKind.REWORK_APPLIED:
        p.outcome = None
        p.revision_round += 1

    p.stage = target
    p.history.append(
        StageTransition(
            tick=tick,
            event=event.kind.value,
            from_stage=from_label,
            to_stage=stage_label(p.stage, p.outcome),
            coerced=coerced,
        )
    )
    return p


def submit_revision(p: Proposal, revision: Revision, author_roles: frozenset[RoleKind]) -> None:
    """Record a revision; developer-rework revisions mutate the attributes.

    Consultation revisions are advisory: they are stored for the assessment
    context but never edit the proposal (authorship stays with the developer).
    """
    if not revision.changes:
        raise SchemaError("revision changes must be non-empty")
    for name in revision.changes:
        if name not in p.attributes:
            raise SchemaError(f"revision references unknown attribute {name!r}")
    if revision.origin is RevisionOrigin.PUBLIC_CONSULTATION:
        if p.stage is not ProposalStage.UNDER_CONSULTATION:
            raise StageError(
                f"consultation revision rejected in stage {stage_label(p.stage, p.outcome)}"
            )
        if RoleKind.PROPOSAL_REVIEWER not in author_roles:
            raise StageError("consultation revision requires the proposal-reviewer role")
    else:
        if not (
            p.stage is ProposalStage.DECIDED
            and p.outcome is DecisionOutcome.SENT_FOR_REVISION
        ):
            raise StageError(
                f"rework revision rejected in stage {stage_label(p.stage, p.outcome)}"
            )
        if RoleKind.PROPOSAL_DEVELOPER not in author_roles:
            raise StageError("rework revision requires the proposal-developer role")
        p.attributes.update(revision.changes)
    p.revisions.append(revision)


class PublicPlansRepository:
    """Public, append-only store of proposals and their assessments."""

    def __init__(self):
        self._proposals: dict[str, Proposal] = {}
        self._assessments: dict[tuple[str, int], Assessment] = {}

    def add_proposal(self, p: Proposal) -> None:
        if p.id in self._proposals:
            raise IntegrityError(f"proposal {p.id} already registered")
        self._proposals[p.id] = p

    def proposal(self, proposal_id: str) -> Proposal:
        return self._proposals[proposal_id]

    def store_assessment(self, a: Assessment) -> None:
        p = self._proposals.get(a.proposal_id)
        if p is None:
            raise IntegrityError(f"assessment for unknown proposal {a.proposal_id}")
        if p.stage is not ProposalStage.UNDER_ASSESSMENT:
            raise StageError(
                f"assessment stored while proposal is {stage_label(p.stage, p.outcome)}"
            )
        key = (a.proposal_id, a.tick)
        if key in self._assessments:
            raise IntegrityError(f"duplicate assessment key {key}")
        for mod in list(a.mandatory_mods) + list(a.optional_mods):
            if mod.attribute not in p.attributes:
                raise SchemaError(f"modification references unknown attribute {mod.attribute!r}")
        self._assessments[key] = a

    def assessments(self, proposal_id: str | None = None) -> list[Assessment]:
        records = [
            a
            for (pid, _tick), a in self._assessments.items()
            if proposal_id is None or pid == proposal_id
        ]
        records.sort(key=lambda a: (a.tick, a.proposal_id))
        return records

    def latest_assessment(self, proposal_id: str) -> Assessment | None:
        records = self.assessments(proposal_id)
        return records[-1] if records else None

    def proposals_by_stage(self, stage: ProposalStage) -> list[Proposal]:
        return sorted(
            (p for p in self._proposals.values() if p.stage is stage),
            key=lambda p: p.id,
        )

    def assessment_count(self) -> int:
        return len(self._assessments)


def replay_stage_records(records: list[dict[str, Any]]) -> dict[str, str]:
    """Rebuild final stage labels per proposal from logged stage records.

    Validates continuity (each record's ``from`` equals the previous ``to``)
    and that every edge is one of the five legal ones; raises StageError on
    any violation. Used by log-replay checks.
    """
    legal = {
        ("draft", "submit"),
        ("under_consultation", "consultation_elapsed"),
        ("under_assessment", "assessment_attached"),
        ("under_deliberation", "council_vote"),
        ("decided:sent_for_revision", "rework_applied"),
    }
    current: dict[str, str] = {}
    for rec in records:
        pid = rec["proposal_id"]
        prev = current.get(pid, "draft")
        if rec["from"] != prev:
            raise StageError(f"replay discontinuity for {pid}: {prev} != {rec['from']}")
        if (rec["from"], rec["event"]) not in legal:
            raise StageError(f"replay hit illegal edge {rec['from']} + {rec['event']}")
        current[pid] = rec["to"]
    return current
