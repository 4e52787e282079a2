import base64

import pytest
from fastapi.testclient import TestClient

from arborflow.serialize import artifact_from_dict, spec_from_dict, to_compact
from arborflow.service import create_app

from conftest import load_json


def client_for(spec, **kwargs):
    return TestClient(create_app(spec, **kwargs))


@pytest.fixture()
def client(review_spec):
    return client_for(review_spec)


def prod(lhs, rhs, annotation="seq"):
    return {"lhs": lhs, "rhs": rhs, "annotation": annotation}


def develop(client, cid, actor, addr, p, payload=None):
    body = {"actor": actor, "addr": addr, "production": p}
    if payload is not None:
        body["payload"] = payload
    r = client.post(f"/api/cases/{cid}/develop", json=body)
    assert r.status_code == 200, r.text
    return r.json()


def commit(client, cid, actor, **extra):
    r = client.post(f"/api/cases/{cid}/commit", json={"actor": actor, **extra})
    assert r.status_code == 200, r.text
    return r.json()


def run_acceptance(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    develop(client, cid, "EC", [0], prod("A", ["C", "D"]))
    commit(client, cid, "EC")
    develop(client, cid, "AE", [0, 0], prod("C", ["E", "F"]))
    develop(client, cid, "AE", [0, 0, 0], prod("E", ["#S1", "#S2"], "par"))
    commit(client, cid, "AE")
    develop(client, cid, "R1", [0, 0], prod("G1", ["H1", "I1"]))
    develop(client, cid, "R1", [0, 0, 0], prod("H1", []),
            payload=base64.b64encode(b"strong accept").decode())
    develop(client, cid, "R1", [0, 0, 1], prod("I1", []))
    commit(client, cid, "R1")
    develop(client, cid, "R2", [0, 0], prod("G2", ["H2", "I2"]))
    develop(client, cid, "R2", [0, 0, 0], prod("H2", []))
    develop(client, cid, "R2", [0, 0, 1], prod("I2", []))
    commit(client, cid, "R2")
    develop(client, cid, "AE", [0, 0, 1], prod("F", []))
    commit(client, cid, "AE")
    develop(client, cid, "EC", [0, 1], prod("D", []))
    return cid, commit(client, cid, "EC")


# ---------------------------------------------------------------------------
# Spec endpoint
# ---------------------------------------------------------------------------


def test_get_spec_names_the_distinguished_axiom(client):
    doc = client.get("/api/spec").json()
    assert doc["distinguishedAxiom"] == "A_G"
    assert doc["initiator"] == "EC"
    assert {s["name"] for s in doc["sorts"]} >= {"A_G", "A", "B", "C", "D"}


def test_get_spec_for_an_actor_shows_only_its_world(client):
    doc = client.get("/api/spec", params={"actor": "R1"}).json()
    names = {s["name"] for s in doc["grammar"]["sorts"]}
    assert names == {"A_G", "C", "G1", "H1", "I1"}
    assert doc["grammar"]["axioms"] == ["A_G"]
    assert doc["write"] == ["G1", "H1", "I1"]
    # the associate editor additionally owns its minted structure
    ae = client.get("/api/spec", params={"actor": "AE"}).json()
    assert {"#S1", "#S2"} <= set(ae["write"])
    assert client.get("/api/spec", params={"actor": "zed"}).status_code == 404


# ---------------------------------------------------------------------------
# Case lifecycle over HTTP
# ---------------------------------------------------------------------------


def test_case_creation_and_listing(client):
    r = client.post("/api/cases", json={})
    assert r.status_code == 201
    assert r.json() == {"caseId": "case-1", "status": "active"}
    r = client.post("/api/cases", json={"actor": "AE"})
    assert r.status_code == 403
    assert r.json()["code"] == "not-accredited"
    rows = client.get("/api/cases").json()
    assert rows == [{"id": "case-1", "status": "active"}]
    rows = client.get("/api/cases", params={"actor": "EC"}).json()
    assert rows[0]["hasReplica"] and rows[0]["readyCount"] == 1
    assert not rows[0]["edited"] and not rows[0]["needsAck"]


def test_get_case_is_actor_scoped(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    doc = client.get(f"/api/cases/{cid}", params={"actor": "EC"}).json()
    assert doc["replica"] == {"label": "A_G", "state": "unlocked", "children": []}
    assert doc["readyTasks"][0]["sort"] == "A_G"
    # other peers have not even heard of the case yet
    doc = client.get(f"/api/cases/{cid}", params={"actor": "R1"}).json()
    assert doc["replica"] is None and doc["readyTasks"] == []
    assert client.get("/api/cases/nope", params={"actor": "EC"}).status_code == 404
    r = client.get(f"/api/cases/{cid}")
    assert r.status_code == 400  # actor is mandatory
    assert r.json()["error"] == "bad-request"


def test_develop_returns_replica_and_tasks(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    doc = develop(client, cid, "EC", [], prod("A_G", ["A"]))
    assert doc["replica"]["label"] == "A_G"
    assert [t["sort"] for t in doc["readyTasks"]] == ["A"]
    assert len(doc["readyTasks"][0]["productions"]) == 2


def test_acceptance_flow_over_http(client, targets):
    cid, last = run_acceptance(client)
    assert last["mode"] == "terminate"
    assert last["status"] == "terminated"
    # the final artifact is reported through the committer's view
    final = artifact_from_dict(last["final"])
    assert to_compact(final) == (
        "A_G[A[C[#S3[#S1[H1 ; I1] | #S2[H2 ; I2]] ; F] ; D]]"
    )
    # every actor sees the terminated case through its own lens
    r1 = client.get(f"/api/cases/{cid}", params={"actor": "R1"}).json()
    assert r1["status"] == "terminated"
    assert to_compact(artifact_from_dict(r1["final"])) == "A_G[C[G1[H1 ; I1]]]"
    trace = client.get(f"/api/cases/{cid}/trace").json()
    commits = [e for e in trace["events"] if e["op"] == "commit"]
    assert [e["actor"] for e in commits] == ["EC", "AE", "R1", "R2", "AE", "EC"]
    assert commits[1]["destinations"] == ["R1", "R2"]
    assert to_compact(artifact_from_dict(trace["final"])) == to_compact(targets[1])


def test_intermediate_routing_and_ack(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    develop(client, cid, "EC", [0], prod("A", ["C", "D"]))
    doc = commit(client, cid, "EC")
    assert doc == {
        "mode": "forward",
        "destinations": ["AE"],
        "status": "active",
        "replica": None,
    }
    ae = client.get(f"/api/cases/{cid}", params={"actor": "AE"}).json()
    assert ae["needsAck"] and not ae["edited"]
    assert [t["sort"] for t in ae["readyTasks"]] == ["C"]
    r = client.post(f"/api/cases/{cid}/route-ack", json={"actor": "AE"})
    assert r.json() == {"id": cid, "needsAck": False}


def test_untouched_commit_goes_back_to_sender(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    develop(client, cid, "EC", [0], prod("A", ["C", "D"]))
    commit(client, cid, "EC")
    doc = commit(client, cid, "AE")
    assert doc["mode"] == "returnToSender" and doc["destinations"] == ["EC"]


def test_discard_resets_the_replica(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    r = client.post(f"/api/cases/{cid}/discard", json={"actor": "EC"})
    assert r.status_code == 200
    doc = r.json()
    assert doc["replica"] == {"label": "A_G", "state": "unlocked", "children": []}
    assert [t["sort"] for t in doc["readyTasks"]] == ["A_G"]


# ---------------------------------------------------------------------------
# Error mapping
# ---------------------------------------------------------------------------


def test_domain_errors_map_to_statuses(client):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    def post_develop(body):
        return client.post(f"/api/cases/{cid}/develop", json=body)

    r = post_develop({"actor": "ghost", "addr": [], "production": prod("A_G", ["A"])})
    assert (r.status_code, r.json()["code"]) == (404, "unknown-actor")
    r = post_develop({"actor": "AE", "addr": [], "production": prod("A_G", ["A"])})
    assert (r.status_code, r.json()["code"]) == (404, "unknown-case")
    r = post_develop({"actor": "EC", "addr": [], "production": {"lhs": 5}})
    assert (r.status_code, r.json()["error"]) == (400, "bad-format")
    r = post_develop({"actor": "EC", "addr": []})
    assert (r.status_code, r.json()["error"]) == (400, "bad-request")
    r = post_develop({"actor": "EC", "addr": [], "production": prod("A_G", ["A"]),
                      "payload": "%%%"})
    assert (r.status_code, r.json()["error"]) == (400, "bad-format")
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    develop(client, cid, "EC", [0], prod("A", ["C", "D"]))
    r = post_develop({"actor": "EC", "addr": [0, 1], "production": prod("D", [])})
    assert (r.status_code, r.json()["code"]) == (400, "locked-bud")
    r = client.post(f"/api/cases/{cid}/commit",
                    json={"actor": "EC", "guidePolicy": "coinToss"})
    assert (r.status_code, r.json()["error"]) == (400, "bad-format")
    r = client.post("/api/cases/nope/commit", json={"actor": "EC"})
    assert (r.status_code, r.json()["code"]) == (404, "unknown-case")
    commit(client, cid, "EC")  # hands the case over; EC holds no replica now
    r = post_develop({"actor": "EC", "addr": [0, 1], "production": prod("D", [])})
    assert (r.status_code, r.json()["code"]) == (409, "no-replica")


def test_commit_conflict_asks_for_a_guide_choice(choice_spec):
    client = client_for(choice_spec)
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "alice", [], prod("X", ["u"]))
    develop(client, cid, "alice", [0], prod("u", []))
    r = client.post(f"/api/cases/{cid}/commit", json={"actor": "alice"})
    assert r.status_code == 409
    doc = r.json()
    assert doc["code"] == "guide-choice-required"
    assert doc["guides"] == [
        {"index": 0, "compact": "X[u]"},
        {"index": 1, "compact": "X[u]"},
    ]
    doc = commit(client, cid, "alice", guideIndex=0)
    assert doc["mode"] == "forward" and doc["destinations"] == ["bob"]
    develop(client, cid, "bob", [0], prod("W", ["n"]))
    develop(client, cid, "bob", [0, 0], prod("n", []))
    doc = commit(client, cid, "bob")
    assert doc["mode"] == "terminate"
    assert to_compact(artifact_from_dict(doc["final"])) == "X[W[n]]"


def test_stale_replica_maps_to_conflict(client, targets):
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "EC", [], prod("A_G", ["A"]))
    develop(client, cid, "EC", [0], prod("A", ["C", "D"]))
    commit(client, cid, "EC")
    develop(client, cid, "AE", [0, 0], prod("C", ["E", "F"]))
    # a fresher artifact lands while AE's edits are pending
    client.app.state.runtime.peer("AE").on_receive(cid, targets[1], "EC")
    r = client.post(f"/api/cases/{cid}/commit", json={"actor": "AE"})
    assert (r.status_code, r.json()["code"]) == (409, "stale-replica")


def test_empty_guides_map_to_conflict():
    # A half-executed invisible region reshapes the initiator's replica into
    # something no complete scenario projects to; the commit then has no
    # guide and the service reports the conflict instead of guessing.
    spec = spec_from_dict({
        "sorts": [{"name": n} for n in ("R", "W", "V", "b", "c", "d", "z")],
        "axioms": ["R"],
        "productions": [
            prod("R", ["W", "z"]),
            prod("W", ["b", "V", "c"], "par"),
            prod("V", ["d"]),
            prod("b", []), prod("c", []), prod("d", []), prod("z", []),
        ],
        "actors": ["alice", "bob"],
        "accreditations": [
            {"actor": "alice", "read": ["R", "b", "c", "d", "z"],
             "write": ["R", "b", "c", "d", "z"], "execute": []},
            {"actor": "bob", "read": ["R", "W", "V", "d"], "write": ["V"],
             "execute": []},
        ],
        "initiator": "alice",
    })
    client = client_for(spec)
    cid = client.post("/api/cases", json={}).json()["caseId"]
    develop(client, cid, "alice", [], prod("R", ["#S1", "z"]))
    develop(client, cid, "alice", [0], prod("#S1", ["b", "d", "c"], "par"))
    develop(client, cid, "alice", [0, 0], prod("b", []))
    assert commit(client, cid, "alice")["destinations"] == ["bob"]
    assert commit(client, cid, "bob")["mode"] == "returnToSender"
    doc = client.get(f"/api/cases/{cid}", params={"actor": "alice"}).json()
    labels = {t["sort"] for t in doc["readyTasks"]}
    assert labels == {"c"}  # d hides behind the still-open region
    develop(client, cid, "alice", [0, 1], prod("c", []))
    r = client.post(f"/api/cases/{cid}/commit", json={"actor": "alice"})
    assert (r.status_code, r.json()["code"]) == (409, "empty-guides")


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------


def test_commands_replay_across_restarts(review_spec, tmp_path):
    with client_for(review_spec, state_dir=tmp_path) as client:
        cid, last = run_acceptance(client)
        before = {
            a: client.get(f"/api/cases/{cid}", params={"actor": a}).json()
            for a in ("EC", "AE", "R1", "R2")
        }
        trace_before = client.get(f"/api/cases/{cid}/trace").json()
    assert (tmp_path / f"{cid}.jsonl").exists()
    with client_for(review_spec, state_dir=tmp_path) as client:
        for actor, doc in before.items():
            assert client.get(f"/api/cases/{cid}", params={"actor": actor}).json() == doc
        assert client.get(f"/api/cases/{cid}/trace").json() == trace_before
        # new ids keep counting past the replayed ones
        assert client.post("/api/cases", json={}).json()["caseId"] == "case-2"


def test_state_dir_env_var(review_spec, tmp_path, monkeypatch):
    monkeypatch.setenv("ARBORFLOW_STATE_DIR", str(tmp_path))
    with client_for(review_spec) as client:
        client.post("/api/cases", json={})
    with client_for(review_spec) as client:
        assert [row["id"] for row in client.get("/api/cases").json()] == ["case-1"]


def test_static_ui_is_served_when_present(review_spec, tmp_path):
    (tmp_path / "index.html").write_text("<h1>workbench</h1>")
    with client_for(review_spec, static_dir=tmp_path) as client:
        r = client.get("/")
        assert r.status_code == 200 and "workbench" in r.text
        assert client.get("/api/spec").status_code == 200
    with client_for(review_spec) as client:
        assert client.get("/").status_code == 404
