import json
from pathlib import Path

import pytest

from arborflow.enumeration import ensure_axiom_visibility, generate_targets
from arborflow.serialize import spec_from_dict
from arborflow.simulate import script_from_dict

SAMPLES = Path(__file__).resolve().parent.parent / "samples"


def load_json(name):
    return json.loads((SAMPLES / name).read_text())


@pytest.fixture(scope="session")
def review_spec():
    """The running example: editorial peer review, 4 actors, 13 productions."""
    return spec_from_dict(load_json("peer-review.json"))


@pytest.fixture(scope="session")
def extended(review_spec):
    """Same spec after axiom-visibility normalization (adds A_G)."""
    return ensure_axiom_visibility(review_spec)


@pytest.fixture(scope="session")
def targets(extended):
    return generate_targets(extended.grammar)


@pytest.fixture(scope="session")
def choice_spec():
    """Tiny two-actor spec whose scenario choice is invisible to the initiator."""
    return spec_from_dict(load_json("choice.json"))


@pytest.fixture()
def rejection_script():
    return script_from_dict(load_json("rejection.json"))


@pytest.fixture()
def acceptance_script():
    return script_from_dict(load_json("acceptance.json"))


# ---------------------------------------------------------------------------
# Bridges into the oracle encoding (tests/oracles.py)
# ---------------------------------------------------------------------------


def to_oracle(t):
    """Artifact -> oracle tuple (state- and payload-blind)."""
    if t.production is None:
        return ("?", t.label)
    return (
        t.label,
        t.production.annotation.value,
        tuple(to_oracle(c) for c in t.children),
    )


def grammar_to_oracle(g):
    """Grammar -> (axiom, [(lhs, rhs, ann), ...])."""
    assert len(g.axioms) == 1
    return g.axioms[0], [(p.lhs, p.rhs, p.annotation.value) for p in g.productions]


def production_to_oracle(p):
    return (p.lhs, p.rhs, p.annotation.value)
