import json

import pytest

from arborflow.errors import LockedBudError, ScriptStepError
from arborflow.serialize import FormatError, to_compact
from arborflow.simulate import ScenarioScript, ScriptStep, script_from_dict, simulate

from conftest import load_json


def test_rejection_script_reaches_the_rejection_outcome(review_spec, rejection_script):
    trace = simulate(review_spec, rejection_script)
    assert trace.status == {"case-1": "terminated"}
    assert to_compact(trace.final["case-1"]) == "A_G[A[B ; D]]"


def test_acceptance_script_reaches_the_acceptance_outcome(review_spec, acceptance_script):
    trace = simulate(review_spec, acceptance_script)
    assert trace.status == {"case-1": "terminated"}
    assert (
        to_compact(trace.final["case-1"])
        == "A_G[A[C[E[G1[H1 ; I1] | G2[H2 ; I2]] ; F] ; D]]"
    )
    commits = [e["actor"] for e in trace.events if e["op"] == "commit"]
    assert commits == ["EC", "AE", "R1", "R2", "AE", "EC"]


def test_replays_are_byte_identical(review_spec, acceptance_script, rejection_script):
    for script in (acceptance_script, rejection_script):
        a = simulate(review_spec, script).dumps()
        b = simulate(review_spec, script).dumps()
        assert a == b
        json.loads(a)  # the trace is well-formed JSON


def test_empty_script_runs_nothing(review_spec):
    trace = simulate(review_spec, ScenarioScript(()))
    assert trace.events == [] and trace.status == {} and trace.final == {}
    assert json.loads(trace.dumps()) == {"events": [], "status": {}, "final": {}}


def test_failing_step_is_reported_with_its_index(review_spec):
    doc = load_json("acceptance.json")
    doc["steps"].insert(2, {
        "actor": "EC", "action": "develop", "addr": [0, 1],
        "production": {"lhs": "D", "rhs": []},
    })  # D is still gated behind C at this point
    with pytest.raises(ScriptStepError) as err:
        simulate(review_spec, script_from_dict(doc))
    assert err.value.index == 2
    assert isinstance(err.value.cause, LockedBudError)


def test_script_payloads_are_base64(review_spec):
    doc = load_json("rejection.json")
    step = dict(doc["steps"][2])
    assert step["action"] == "develop"
    step["payload"] = "ZGVzayByZWplY3Q="  # "desk reject"
    doc["steps"][2] = step
    trace = simulate(review_spec, script_from_dict(doc))
    assert trace.final["case-1"].node_at((0, 0)).payload == b"desk reject"
    step["payload"] = "%%% not base64 %%%"
    with pytest.raises(FormatError):
        script_from_dict(doc)


@pytest.mark.parametrize("doc", [
    [],
    {"steps": {}},
    {"steps": ["x"]},
    {"steps": [{"actor": "EC"}]},
    {"steps": [{"actor": "EC", "action": "teleport"}]},
    {"steps": [{"actor": "EC", "action": "develop", "addr": "root"}]},
    {"steps": [{"actor": "EC", "action": "develop", "addr": [0.5]}]},
    {"steps": [{"actor": "EC", "action": "commit", "guidePolicy": "coinToss"}]},
])
def test_malformed_scripts_are_rejected(doc):
    with pytest.raises(FormatError):
        script_from_dict(doc)


def test_script_steps_parse_options(review_spec):
    script = script_from_dict({"steps": [
        {"actor": "EC", "action": "develop", "addr": [],
         "production": {"lhs": "A_G", "rhs": ["A"]}},
        {"actor": "EC", "action": "commit", "guidePolicy": "seededRandom", "seed": 3},
    ]})
    assert script.steps[1] == ScriptStep(
        actor="EC", action="commit",
        guide_policy="seededRandom", seed=3,
    )
    trace = simulate(review_spec, script)
    assert trace.status["case-1"] == "active"


def test_develop_step_requires_addr_and_production(review_spec):
    script = script_from_dict({"steps": [{"actor": "EC", "action": "develop"}]})
    with pytest.raises(ScriptStepError) as err:
        simulate(review_spec, script)
    assert err.value.index == 0
    assert isinstance(err.value.cause, FormatError)
