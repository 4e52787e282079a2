import pytest

from arborflow.engine import (
    CaseRuntime,
    Peer,
    RouteMode,
    configure_peer,
    initiate_case,
    route,
)
from arborflow.errors import (
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
from arborflow.expansion import GuidePolicy
from arborflow.model import (
    Accreditation,
    Annotation,
    Grammar,
    NodeState,
    ProcessSpec,
    Production,
    Sort,
    bud,
    developed,
    is_complete,
)
from arborflow.serialize import to_compact

SEQ = Annotation.SEQUENTIAL
PAR = Annotation.PARALLEL
P = Production

A_G_TO_A = P("A_G", ("A",))
A_TO_BD = P("A", ("B", "D"), SEQ)
A_TO_CD = P("A", ("C", "D"), SEQ)
C_TO_EF = P("C", ("E", "F"), SEQ)
E_SPLIT = P("E", ("#S1", "#S2"), PAR)


def drive_rejection(rt, case_id):
    rt.develop("EC", case_id, (), A_G_TO_A)
    rt.develop("EC", case_id, (0,), A_TO_BD)
    rt.develop("EC", case_id, (0, 0), P("B", ()), payload=b"desk reject")
    rt.commit("EC", case_id)
    rt.develop("EC", case_id, (0, 1), P("D", ()))
    return rt.commit("EC", case_id)


def drive_acceptance(rt, case_id):
    rt.develop("EC", case_id, (), A_G_TO_A)
    rt.develop("EC", case_id, (0,), A_TO_CD)
    rt.commit("EC", case_id)
    rt.develop("AE", case_id, (0, 0), C_TO_EF)
    rt.develop("AE", case_id, (0, 0, 0), E_SPLIT)
    rt.commit("AE", case_id)
    rt.develop("R1", case_id, (0, 0), P("G1", ("H1", "I1"), SEQ))
    rt.develop("R1", case_id, (0, 0, 0), P("H1", ()), payload=b"sound methods")
    rt.develop("R1", case_id, (0, 0, 1), P("I1", ()))
    rt.commit("R1", case_id)
    rt.develop("R2", case_id, (0, 0), P("G2", ("H2", "I2"), SEQ))
    rt.develop("R2", case_id, (0, 0, 0), P("H2", ()))
    rt.develop("R2", case_id, (0, 0, 1), P("I2", ()))
    rt.commit("R2", case_id)
    rt.develop("AE", case_id, (0, 0, 1), P("F", ()))
    rt.commit("AE", case_id)
    rt.develop("EC", case_id, (0, 1), P("D", ()))
    return rt.commit("EC", case_id)


# ---------------------------------------------------------------------------
# Initiation and configuration
# ---------------------------------------------------------------------------


def test_initiate_case_is_an_unlocked_axiom_bud(extended):
    t = initiate_case(extended)
    assert t == bud("A_G")
    assert t.state is NodeState.UNLOCKED_BUD


def test_initiate_case_needs_a_single_axiom():
    g = Grammar(
        sorts=(Sort("R"), Sort("S")),
        axioms=("R", "S"),
        productions=(P("R", ()), P("S", ())),
    )
    spec = ProcessSpec(
        grammar=g,
        actors=("a",),
        accreditations=(Accreditation("a", frozenset("RS"), frozenset("RS")),),
        initiator="a",
    )
    with pytest.raises(ValueError):
        initiate_case(spec)


def test_configure_peer_normalizes_and_validates(review_spec):
    peer = configure_peer(review_spec, "R1")
    assert peer.spec.grammar.axioms == ("A_G",)
    broken = ProcessSpec(
        grammar=review_spec.grammar,
        actors=review_spec.actors,
        accreditations=review_spec.accreditations,
        initiator="nobody",
    )
    with pytest.raises(SpecValidationError):
        configure_peer(broken, "R1")


def test_unknown_actor_is_rejected(extended):
    with pytest.raises(UnknownActorError):
        Peer(extended, "intruder")
    with pytest.raises(UnknownActorError):
        CaseRuntime(extended).peer("intruder")


def test_only_the_initiator_opens_cases(extended):
    with pytest.raises(NotAccreditedError):
        Peer(extended, "AE").open_case("c")


def test_unknown_case_is_rejected(extended):
    peer = Peer(extended, "EC")
    with pytest.raises(UnknownCaseError):
        peer.commit_case("ghost")


def test_case_ids_are_allocated_in_sequence(extended):
    rt = CaseRuntime(extended)
    assert rt.initiate() == "case-1"
    assert rt.initiate() == "case-2"
    assert rt.case_ids() == ["case-1", "case-2"]
    assert rt.status == {"case-1": "active", "case-2": "active"}


# ---------------------------------------------------------------------------
# Developing buds
# ---------------------------------------------------------------------------


def test_develop_walks_the_replica(extended):
    peer = Peer(extended, "EC")
    peer.open_case("c")
    peer.develop_bud("c", (), A_G_TO_A)
    r = peer.develop_bud("c", (0,), A_TO_CD)
    assert to_compact(r) == "A_G[A[C? ; D!]]"
    assert peer.cases["c"].edited


def test_develop_error_classes(extended):
    peer = Peer(extended, "EC")
    peer.open_case("c")
    with pytest.raises(AddressError):
        peer.develop_bud("c", (-1,), A_G_TO_A)
    with pytest.raises(AddressError):
        peer.develop_bud("c", (5,), A_G_TO_A)
    peer.develop_bud("c", (), A_G_TO_A)
    with pytest.raises(NotABudError):
        peer.develop_bud("c", (), A_G_TO_A)
    peer.develop_bud("c", (0,), A_TO_CD)
    with pytest.raises(LockedBudError):
        peer.develop_bud("c", (0, 1), P("D", ()))
    with pytest.raises(UnknownProductionError):
        peer.develop_bud("c", (0, 0), P("D", ("B",)))  # not a local production
    with pytest.raises(UnknownProductionError):
        peer.develop_bud("c", (0, 0), P("D", ()))  # wrong bud sort


def test_develop_requires_write_accreditation(extended):
    # R1 *sees* the manuscript task but may not claim it.
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    rt.commit("EC", cid)
    rt.peer("R1").on_receive(cid, rt.peer("EC").cases[cid].global_artifact, "EC")
    assert to_compact(rt.peer("R1").cases[cid].replica) == "A_G[C?]"
    assert rt.peer("R1").list_ready_tasks(cid) == []
    with pytest.raises(NotAccreditedError):
        rt.develop("R1", cid, (0,), P("C", ("G1",)))


def test_no_replica_after_commit(extended):
    peer = Peer(extended, "EC")
    peer.open_case("c")
    peer.develop_bud("c", (), A_G_TO_A)
    peer.commit_case("c")
    with pytest.raises(NoReplicaError):
        peer.develop_bud("c", (0,), A_TO_CD)
    with pytest.raises(NoReplicaError):
        peer.list_ready_tasks("c")


def test_ready_tasks_list_sorts_and_productions(extended):
    peer = Peer(extended, "EC")
    peer.open_case("c")
    tasks = peer.list_ready_tasks("c")
    assert [(t.addr, t.sort) for t in tasks] == [((), "A_G")]
    assert list(tasks[0].productions) == [A_G_TO_A]
    peer.develop_bud("c", (), A_G_TO_A)
    tasks = peer.list_ready_tasks("c")
    assert [(t.addr, t.sort) for t in tasks] == [((0,), "A")]
    assert set(tasks[0].productions) == {A_TO_BD, A_TO_CD}


def test_minted_structure_is_workable(extended):
    # AE opens the referee block: the minted parallel branches are ready
    # tasks on its own replica even though no referee sort is writable.
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    rt.commit("EC", cid)
    rt.develop("AE", cid, (0, 0), C_TO_EF)
    rt.develop("AE", cid, (0, 0, 0), E_SPLIT)
    tasks = rt.peer("AE").list_ready_tasks(cid)
    assert {(t.addr, t.sort) for t in tasks} == {
        ((0, 0, 0, 0), "#S1"),
        ((0, 0, 0, 1), "#S2"),
    }


# ---------------------------------------------------------------------------
# Routing
# ---------------------------------------------------------------------------


def test_route_terminates_on_complete_artifacts(extended, targets):
    d = route(targets[0], extended, "EC", None)
    assert d.mode is RouteMode.TERMINATE and d.destinations == frozenset()


def test_route_forwards_to_distant_writers(extended):
    t = developed("A_G", A_G_TO_A, [
        developed("A", A_TO_CD, [bud("C"), bud("D", NodeState.LOCKED_BUD)]),
    ])
    assert route(t, extended, "EC", None) == route(t, extended, "EC", "AE")
    d = route(t, extended, "EC", None)
    assert d.mode is RouteMode.FORWARD and d.destinations == frozenset({"AE"})
    # the sole writer of the open task keeps the case at its own commit
    d = route(t, extended, "AE", "EC")
    assert d.mode is RouteMode.FORWARD and d.destinations == frozenset({"AE"})


def test_route_keeps_case_when_committer_is_sole_writer(extended):
    t = developed("A_G", A_G_TO_A, [
        developed("A", A_TO_BD, [developed("B", P("B", ()), []), bud("D")]),
    ])
    d = route(t, extended, "EC", None)
    assert d.mode is RouteMode.FORWARD and d.destinations == frozenset({"EC"})


def test_route_returns_to_sender_when_nobody_can_write():
    g = Grammar(
        sorts=(Sort("R"), Sort("a"), Sort("b")),
        axioms=("R",),
        productions=(P("R", ("a", "b"), SEQ), P("a", ()), P("b", ())),
    )
    spec = ProcessSpec(
        grammar=g,
        actors=("alice", "bob"),
        accreditations=(
            Accreditation("alice", frozenset("Rab"), frozenset("Ra")),
            Accreditation("bob", frozenset("R"), frozenset()),
        ),
        initiator="alice",
    )
    t = developed("R", P("R", ("a", "b"), SEQ),
                  [developed("a", P("a", ()), []), bud("b")])
    d = route(t, spec, "alice", "bob")
    assert d.mode is RouteMode.RETURN_TO_SENDER and d.destinations == frozenset({"bob"})
    d = route(t, spec, "alice", None)
    assert d.mode is RouteMode.RETURN_TO_SENDER and d.destinations == frozenset()


# ---------------------------------------------------------------------------
# Commit
# ---------------------------------------------------------------------------


def test_untouched_commit_hands_the_case_back(extended):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    g1, _ = rt.commit("EC", cid)
    t_f, decision = rt.commit("AE", cid)  # AE looked but did nothing
    assert t_f == g1  # global unchanged
    assert decision.mode is RouteMode.RETURN_TO_SENDER
    assert decision.destinations == frozenset({"EC"})
    assert rt.peer("EC").cases[cid].needs_ack


def test_stale_replica_is_rejected(extended, targets):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    rt.commit("EC", cid)
    # AE starts working...
    rt.develop("AE", cid, (0, 0), C_TO_EF)
    # ...but a fresher artifact arrives before the commit
    rt.peer("AE").on_receive(cid, targets[1], "EC")
    with pytest.raises(StaleReplicaError):
        rt.commit("AE", cid)
    # discarding re-seeds from the newer global and unblocks the actor
    rt.discard("AE", cid)
    assert not rt.peer("AE").cases[cid].edited
    t_f, decision = rt.commit("AE", cid)
    assert t_f == targets[1]


def test_commit_with_payloads_publishes_them(extended):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    (t_f, decision) = drive_acceptance(rt, cid)
    assert t_f.node_at((0, 0, 0, 0, 0)).payload == b"sound methods"


def test_external_policy_demands_a_choice(choice_spec):
    rt = CaseRuntime(choice_spec)
    cid = rt.initiate()
    rt.develop("alice", cid, (), P("X", ("u",)))
    rt.develop("alice", cid, (0,), P("u", ()))
    with pytest.raises(GuideChoiceRequiredError) as err:
        rt.commit("alice", cid, GuidePolicy.EXTERNAL)
    # the guides differ only outside alice's view, so their summaries agree:
    # the choice is offered without leaking what it controls
    assert err.value.summaries == [
        {"index": 0, "compact": "X[u]"},
        {"index": 1, "compact": "X[u]"},
    ]
    t_f, _ = rt.commit("alice", cid, GuidePolicy.EXTERNAL, guide_index=0)
    assert to_compact(t_f) == "X[u ; W?]"


def test_guide_choice_does_not_leak_into_the_committed_prefix(choice_spec):
    outcomes = set()
    for index in (0, 1):
        rt = CaseRuntime(choice_spec)
        cid = rt.initiate()
        rt.develop("alice", cid, (), P("X", ("u",)))
        rt.develop("alice", cid, (0,), P("u", ()))
        t_f, _ = rt.commit("alice", cid, GuidePolicy.EXTERNAL, guide_index=index)
        outcomes.add(to_compact(t_f))
    assert outcomes == {"X[u ; W?]"}


def test_seeded_commit_is_reproducible(choice_spec):
    results = []
    for _ in range(2):
        rt = CaseRuntime(choice_spec)
        cid = rt.initiate()
        rt.develop("alice", cid, (), P("X", ("u",)))
        rt.develop("alice", cid, (0,), P("u", ()))
        t_f, _ = rt.commit("alice", cid, GuidePolicy.SEEDED_RANDOM, seed=7)
        results.append(t_f)
    assert results[0] == results[1]


def test_choice_spec_round_trip_to_termination(choice_spec):
    rt = CaseRuntime(choice_spec)
    cid = rt.initiate()
    rt.develop("alice", cid, (), P("X", ("u",)))
    rt.develop("alice", cid, (0,), P("u", ()))
    rt.commit("alice", cid)
    assert to_compact(rt.peer("bob").cases[cid].replica) == "X[W?]"
    rt.develop("bob", cid, (0,), P("W", ("n",)))
    rt.develop("bob", cid, (0, 0), P("n", ()))
    t_f, decision = rt.commit("bob", cid)
    assert decision.mode is RouteMode.TERMINATE
    assert to_compact(rt.final[cid]) == "X[u ; W[n]]"


# ---------------------------------------------------------------------------
# Receiving
# ---------------------------------------------------------------------------


def test_receive_rejects_nonconforming_artifacts(extended):
    peer = Peer(extended, "AE")
    with pytest.raises(NonConformingArtifactError):
        peer.on_receive("c", bud("Z"), "EC")
    with pytest.raises(NonConformingArtifactError):
        t = developed("A_G", P("A_G", ("B",)), [bud("B")])
        peer.on_receive("c", t, "EC")


def test_receive_reseeds_only_untouched_replicas(extended, targets):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    g1, _ = rt.commit("EC", cid)
    ae = rt.peer("AE")
    assert to_compact(ae.cases[cid].replica) == "A_G[A[C?]]"
    rt.develop("AE", cid, (0, 0), C_TO_EF)
    edited = ae.cases[cid].replica
    ae.on_receive(cid, targets[1], "EC")
    assert ae.cases[cid].replica == edited            # edits preserved
    assert ae.cases[cid].global_artifact == targets[1]  # global refreshed
    ae2 = rt.peer("R1")
    ae2.on_receive(cid, g1, "EC")
    ae2.on_receive(cid, targets[1], "EC")
    assert to_compact(ae2.cases[cid].replica) == "A_G[C[G1[H1 ; I1]]]"


def test_receive_tracks_sender_and_ack(extended):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    rt.develop("EC", cid, (), A_G_TO_A)
    rt.develop("EC", cid, (0,), A_TO_CD)
    rt.commit("EC", cid)
    ae = rt.peer("AE").cases[cid]
    assert ae.sender == "EC"
    assert ae.needs_ack
    rt.acknowledge("AE", cid)
    assert not ae.needs_ack
    # self-delivery never overwrites the recorded sender
    ec = Peer(rt.spec, "EC")
    ec.open_case("x")
    ec.on_receive("x", rt.peer("AE").cases[cid].global_artifact, "EC")
    assert ec.cases["x"].sender is None


# ---------------------------------------------------------------------------
# Full runs over the in-memory transport
# ---------------------------------------------------------------------------


def test_rejection_run(extended, targets):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    t_f, decision = drive_rejection(rt, cid)
    assert decision.mode is RouteMode.TERMINATE
    assert rt.status[cid] == "terminated"
    assert rt.final[cid] is not None
    assert rt.final[cid].node_at((0, 0)).payload == b"desk reject"
    assert to_compact(rt.final[cid]) == to_compact(targets[0])
    commits = [e for e in rt.trace if e["op"] == "commit"]
    assert [e["actor"] for e in commits] == ["EC", "EC"]
    # the desk rejection loops through the committee alone
    assert commits[0]["destinations"] == ["EC"]


def test_acceptance_run(extended, targets):
    rt = CaseRuntime(extended)
    cid = rt.initiate()
    t_f, decision = drive_acceptance(rt, cid)
    assert decision.mode is RouteMode.TERMINATE
    assert is_complete(t_f)
    assert to_compact(rt.final[cid]) == to_compact(targets[1])
    commits = [e for e in rt.trace if e["op"] == "commit"]
    assert [e["actor"] for e in commits] == ["EC", "AE", "R1", "R2", "AE", "EC"]
    # the hand-over to the referees fans out in one commit
    assert commits[1]["destinations"] == ["R1", "R2"]
    receives = [(e["actor"], e["sender"]) for e in rt.trace if e["op"] == "receive"]
    assert receives == [
        ("AE", "EC"),
        ("R1", "AE"), ("R2", "AE"),
        ("R2", "R1"),
        ("AE", "R2"),
        ("EC", "AE"),
    ]
    ts = [e["ts"] for e in rt.trace]
    assert ts == sorted(ts) and len(set(ts)) == len(ts)


def test_runs_are_deterministic(extended):
    def run():
        rt = CaseRuntime(extended)
        cid = rt.initiate()
        drive_acceptance(rt, cid)
        return [
            {k: v for k, v in e.items()} for e in rt.trace
        ], to_compact(rt.final[cid])

    assert run() == run()
