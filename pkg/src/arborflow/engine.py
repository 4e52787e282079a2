"""Per-actor execution of a process: peers, cases, develop/commit, routing.

Each actor runs a *peer* configured from the full process spec.  The peer
derives its local grammar once, then handles cases: it stores the last known
global artifact, edits a view-projected replica, lifts the replica back into
a new global artifact on commit, and computes where the case travels next.
`CaseRuntime` wires several peers together over an in-memory FIFO transport;
the simulator and the HTTP service are both thin shells around it.
"""

from __future__ import annotations

import enum
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional

from .enumeration import ensure_axiom_visibility
from .errors import (
    AddressError,
    GuideChoiceRequiredError,
    LockedBudError,
    NoReplicaError,
    NonConformingArtifactError,
    NotABudError,
    NotAccreditedError,
    SpecValidationError,
    StaleReplicaError,
    UnknownActorError,
    UnknownCaseError,
    UnknownProductionError,
)
from .expansion import (
    GuidePolicy,
    find_guides,
    normalize_bud_states,
    select_guide,
    three_way_merge,
)
from .model import (
    Address,
    Artifact,
    NodeState,
    ProcessSpec,
    Production,
    bud,
    conforms,
    developed,
    is_complete,
    is_update,
    production_key,
    replace_at,
    validate_spec,
)
from .projection import LocalGrammar, project_artifact_rooted, project_grammar
from .serialize import production_to_dict, to_compact

log = logging.getLogger(__name__)


def initiate_case(spec: ProcessSpec) -> Artifact:
    """A fresh case: one unlocked bud of the distinguished axiom."""
    if len(spec.grammar.axioms) != 1:
        raise ValueError(
            "case initiation requires a single distinguished axiom "
            "(normalize the spec with ensure_axiom_visibility first)"
        )
    return bud(spec.grammar.axioms[0], NodeState.UNLOCKED_BUD)


class RouteMode(str, enum.Enum):
    FORWARD = "forward"
    RETURN_TO_SENDER = "returnToSender"
    TERMINATE = "terminate"


@dataclass(frozen=True)
class RoutingDecision:
    mode: RouteMode
    destinations: frozenset[str]

    def to_dict(self) -> dict:
        return {"mode": self.mode.value, "destinations": sorted(self.destinations)}


def route(
    t_f: Artifact,
    spec: ProcessSpec,
    current: str,
    sender: Optional[str],
) -> RoutingDecision:
    """Decide where a freshly committed artifact travels.

    Complete artifacts terminate the case.  Otherwise the case is forwarded
    to every actor accredited in writing on some unlocked bud's sort; if the
    committing actor is the only such writer it simply keeps the case, and if
    there is no writer at all the artifact goes back to whoever sent it.
    """
    if is_complete(t_f):
        return RoutingDecision(RouteMode.TERMINATE, frozenset())
    unlocked = {
        node.label
        for _, node in t_f.walk()
        if node.state is NodeState.UNLOCKED_BUD
    }
    writers = {
        acc.actor for acc in spec.accreditations if acc.write & unlocked
    }
    distant = writers - {current}
    if distant:
        return RoutingDecision(RouteMode.FORWARD, frozenset(distant))
    if current in writers:
        return RoutingDecision(RouteMode.FORWARD, frozenset({current}))
    dest = frozenset({sender}) if sender else frozenset()
    return RoutingDecision(RouteMode.RETURN_TO_SENDER, dest)


@dataclass(frozen=True)
class ReadyTask:
    """An unlocked bud the actor may develop, with its applicable productions."""

    addr: Address
    sort: str
    productions: tuple[Production, ...]

    def to_dict(self) -> dict:
        return {
            "addr": list(self.addr),
            "sort": self.sort,
            "productions": [production_to_dict(p) for p in self.productions],
        }


@dataclass
class CaseState:
    """One case as a single peer sees it."""

    case_id: str
    global_artifact: Artifact
    replica: Optional[Artifact] = None
    replica_base: Optional[Artifact] = None
    sender: Optional[str] = None
    needs_ack: bool = False
    log: list = field(default_factory=list)

    @property
    def edited(self) -> bool:
        return self.replica is not None and self.replica != self.replica_base


class Peer:
    """One actor's engine: local grammar, cases and the operations on them.

    Instances assume an already validated and axiom-normalized spec; use
    `configure_peer` to build one from raw inputs.
    """

    def __init__(
        self,
        spec: ProcessSpec,
        actor: str,
        local: Optional[LocalGrammar] = None,
        clock: Optional[Callable[[], int]] = None,
        trace_sink: Optional[Callable[[dict], None]] = None,
    ) -> None:
        try:
            acc = spec.accreditation_for(actor)
        except KeyError:
            raise UnknownActorError(f"actor {actor!r} is not part of the process") from None
        self.spec = spec
        self.actor = actor
        self.accreditation = acc
        self.view = frozenset(acc.read)
        self.local = local if local is not None else project_grammar(spec.grammar, self.view)
        self.readable = self.view | self.local.structuring_sorts
        self.writable = frozenset(acc.write) | self.local.structuring_sorts
        self.cases: dict[str, CaseState] = {}
        self._clock = clock if clock is not None else itertools.count(1).__next__
        self._trace_sink = trace_sink
        self._ctx0 = self.local.context()
        self._production_keys = {
            production_key(p) for p in self.local.grammar.productions
        }

    # -- plumbing ----------------------------------------------------------

    def _case(self, case_id: str) -> CaseState:
        case = self.cases.get(case_id)
        if case is None:
            raise UnknownCaseError(f"peer {self.actor!r} holds no case {case_id!r}")
        return case

    def _emit(self, case: CaseState, op: str, **fields) -> dict:
        entry = {"ts": self._clock(), "caseId": case.case_id, "actor": self.actor, "op": op}
        entry.update(fields)
        case.log.append(entry)
        if self._trace_sink is not None:
            self._trace_sink(entry)
        return entry

    def _seed_replica(self, case: CaseState) -> None:
        replica = project_artifact_rooted(
            case.global_artifact, self.view, self._ctx0.clone()
        )
        case.replica = replica
        case.replica_base = replica

    # -- operations --------------------------------------------------------

    def open_case(self, case_id: str) -> CaseState:
        """Initiate a new case on this peer (initiator only)."""
        if self.actor != self.spec.initiator:
            raise NotAccreditedError(
                f"only the initiator ({self.spec.initiator!r}) may initiate a case"
            )
        artifact = initiate_case(self.spec)
        case = CaseState(case_id=case_id, global_artifact=artifact)
        self._seed_replica(case)
        self.cases[case_id] = case
        self._emit(case, "initiate")
        return case

    def on_receive(self, case_id: str, t: Artifact, sender: str) -> CaseState:
        """Accept a routed artifact: store it and refresh the replica.

        The incoming artifact always becomes the peer's latest global copy;
        the replica is recomputed unless the actor has unsent edits (those
        are preserved and checked for staleness at commit time).
        """
        if not conforms(t, self.spec.grammar):
            raise NonConformingArtifactError(
                "received artifact does not conform to the process grammar"
            )
        case = self.cases.get(case_id)
        if case is None:
            case = CaseState(case_id=case_id, global_artifact=t)
            self.cases[case_id] = case
        else:
            case.global_artifact = t
        if sender != self.actor:
            case.sender = sender
        if not case.edited:
            self._seed_replica(case)
        case.needs_ack = True
        self._emit(case, "receive", sender=sender)
        return case

    def acknowledge(self, case_id: str) -> CaseState:
        case = self._case(case_id)
        case.needs_ack = False
        self._emit(case, "ack")
        return case

    def discard(self, case_id: str) -> CaseState:
        """Throw away local edits and re-seed the replica from the global copy."""
        case = self._case(case_id)
        self._seed_replica(case)
        case.needs_ack = False
        self._emit(case, "discard")
        return case

    def list_ready_tasks(self, case_id: str) -> list[ReadyTask]:
        case = self._case(case_id)
        if case.replica is None:
            raise NoReplicaError(f"no replica held for case {case_id!r}")
        tasks = []
        for addr, node in case.replica.walk():
            if node.state is not NodeState.UNLOCKED_BUD:
                continue
            if node.label not in self.writable:
                continue
            prods = tuple(self.local.grammar.productions_for(node.label))
            if prods:
                tasks.append(ReadyTask(addr, node.label, prods))
        return tasks

    def develop_bud(
        self,
        case_id: str,
        addr: Address,
        p: Production,
        payload: Optional[bytes] = None,
    ) -> Artifact:
        """Develop an unlocked bud of the replica with a local production."""
        case = self._case(case_id)
        if case.replica is None:
            raise NoReplicaError(f"no replica held for case {case_id!r}")
        addr = tuple(addr)
        if any(i < 0 for i in addr):
            raise AddressError(f"address {list(addr)} contains negative steps")
        try:
            node = case.replica.node_at(addr)
        except (KeyError, IndexError):
            raise AddressError(f"address {list(addr)} does not resolve") from None
        if not node.is_bud:
            raise NotABudError(f"node at {list(addr)} is already developed")
        if node.state is NodeState.LOCKED_BUD:
            raise LockedBudError(f"bud at {list(addr)} is locked")
        if p.lhs not in self.writable:
            raise NotAccreditedError(
                f"actor {self.actor!r} holds no write accreditation on {p.lhs!r}"
            )
        if production_key(p) not in self._production_keys:
            raise UnknownProductionError(f"production {p} is not part of the local grammar")
        if p.lhs != node.label:
            raise UnknownProductionError(
                f"production {p} does not apply to a bud of sort {node.label!r}"
            )
        grown = developed(
            node.label,
            p,
            [bud(name, NodeState.LOCKED_BUD) for name in p.rhs],
            payload=payload if payload is not None else node.payload,
        )
        case.replica = normalize_bud_states(replace_at(case.replica, addr, grown))
        self._emit(case, "develop", addr=list(addr), production=production_to_dict(p))
        return case.replica

    def commit_case(
        self,
        case_id: str,
        policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST,
        *,
        seed: Optional[int] = None,
        guide_index: Optional[int] = None,
    ) -> tuple[Artifact, RoutingDecision]:
        """Lift the replica into a new global artifact and route it.

        An untouched replica commits as a pure hand-over: the global artifact
        is unchanged and, when there is a sender, the case travels back to
        them.  Edited replicas go through guide search and the three-way
        merge; a replica invalidated by a newer delivery is rejected as stale.
        """
        case = self._case(case_id)
        if case.replica is None:
            raise NoReplicaError(f"no replica held for case {case_id!r}")
        untouched = not case.edited
        guide_count = 0
        if untouched:
            t_f = case.global_artifact
        else:
            base = project_artifact_rooted(
                case.global_artifact, self.view, self._ctx0.clone()
            )
            if not is_update(base, case.replica):
                raise StaleReplicaError(
                    "the case moved on while the replica was being edited; "
                    "discard and re-apply the work"
                )
            guides = find_guides(
                case.global_artifact,
                case.replica,
                self.spec.grammar,
                self.view,
                local=self.local,
            )
            guide_count = len(guides)
            if policy is GuidePolicy.EXTERNAL and guide_index is None:
                # only an actual ambiguity needs an external decision
                if guide_count > 1:
                    raise GuideChoiceRequiredError(self.describe_guides(guides))
                guide_index = 0
            t_g = select_guide(guides, policy, seed=seed, index=guide_index)
            t_f = normalize_bud_states(
                three_way_merge(
                    case.global_artifact, case.replica, t_g, self.view, self._ctx0.clone()
                )
            )
        decision = route(t_f, self.spec, self.actor, case.sender)
        if (
            untouched
            and case.sender is not None
            and decision.mode is not RouteMode.TERMINATE
        ):
            decision = RoutingDecision(
                RouteMode.RETURN_TO_SENDER, frozenset({case.sender})
            )
        case.global_artifact = t_f
        case.replica = None
        case.replica_base = None
        case.needs_ack = False
        self._emit(
            case,
            "commit",
            guides=guide_count,
            mode=decision.mode.value,
            destinations=sorted(decision.destinations),
        )
        return t_f, decision

    def describe_guides(self, guides) -> list[dict]:
        """View-projected one-line summaries of a guide set (for choosing)."""
        summaries = []
        for i, t_g in enumerate(guides):
            projected = project_artifact_rooted(t_g, self.view, self._ctx0.clone())
            summaries.append({"index": i, "compact": to_compact(projected)})
        return summaries


def configure_peer(spec: ProcessSpec, actor: str) -> Peer:
    """Validate and normalize a spec, then build the actor's peer."""
    report = validate_spec(spec)
    if not report.ok:
        raise SpecValidationError(report)
    return Peer(ensure_axiom_visibility(spec), actor)


class CaseRuntime:
    """All peers of one process wired over an in-memory FIFO transport.

    Deliveries triggered by a commit are queued and drained in send order,
    which (with single-threaded use) makes every run fully deterministic.
    """

    def __init__(self, spec: ProcessSpec) -> None:
        report = validate_spec(spec)
        if not report.ok:
            raise SpecValidationError(report)
        self.spec = ensure_axiom_visibility(spec)
        self.trace: list[dict] = []
        self._clock = itertools.count(1).__next__
        self._next_case = 1
        self.peers: dict[str, Peer] = {}
        locals_cache: dict[frozenset[str], LocalGrammar] = {}
        for actor in self.spec.actors:
            view = self.spec.view_of(actor)
            local = locals_cache.get(view)
            if local is None:
                local = project_grammar(self.spec.grammar, view)
                locals_cache[view] = local
            self.peers[actor] = Peer(
                self.spec,
                actor,
                local=local,
                clock=self._clock,
                trace_sink=self.trace.append,
            )
        self.status: dict[str, str] = {}
        self.final: dict[str, Optional[Artifact]] = {}
        self._mailbox: list[tuple[str, str, str, Artifact]] = []

    def peer(self, actor: str) -> Peer:
        p = self.peers.get(actor)
        if p is None:
            raise UnknownActorError(f"actor {actor!r} is not part of the process")
        return p

    def case_ids(self) -> list[str]:
        ordered: dict[str, None] = {}
        for actor in self.spec.actors:
            for case_id in self.peers[actor].cases:
                ordered.setdefault(case_id)
        return list(ordered)

    def initiate(self, case_id: Optional[str] = None) -> str:
        if case_id is None:
            # skip over ids brought in by replaying a persisted command log
            while f"case-{self._next_case}" in self.status:
                self._next_case += 1
            case_id = f"case-{self._next_case}"
            self._next_case += 1
        elif case_id in self.status:
            raise ValueError(f"case {case_id!r} already exists")
        initiator = self.peer(self.spec.initiator)
        initiator.open_case(case_id)
        self.status[case_id] = "active"
        self.final[case_id] = None
        return case_id

    def develop(
        self,
        actor: str,
        case_id: str,
        addr: Address,
        p: Production,
        payload: Optional[bytes] = None,
    ) -> Artifact:
        return self.peer(actor).develop_bud(case_id, addr, p, payload)

    def discard(self, actor: str, case_id: str) -> CaseState:
        return self.peer(actor).discard(case_id)

    def acknowledge(self, actor: str, case_id: str) -> CaseState:
        return self.peer(actor).acknowledge(case_id)

    def commit(
        self,
        actor: str,
        case_id: str,
        policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST,
        *,
        seed: Optional[int] = None,
        guide_index: Optional[int] = None,
    ) -> tuple[Artifact, RoutingDecision]:
        peer = self.peer(actor)
        t_f, decision = peer.commit_case(
            case_id, policy, seed=seed, guide_index=guide_index
        )
        if decision.mode is RouteMode.TERMINATE:
            self.status[case_id] = "terminated"
            self.final[case_id] = t_f
        else:
            for dest in self._ordered(decision.destinations):
                self._mailbox.append((actor, dest, case_id, t_f))
            self._drain()
        return t_f, decision

    def _ordered(self, destinations: Iterable[str]) -> list[str]:
        destinations = set(destinations)
        return [a for a in self.spec.actors if a in destinations]

    def _drain(self) -> None:
        while self._mailbox:
            sender, dest, case_id, artifact = self._mailbox.pop(0)
            self.peer(dest).on_receive(case_id, artifact, sender)
