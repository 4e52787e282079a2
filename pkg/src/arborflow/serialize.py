"""Canonical JSON formats for specs, artifacts, scripts and traces.

Canonical form: UTF-8 JSON with sorted keys and no insignificant whitespace,
set-valued fields sorted, optional fields omitted when absent.  Two values are
structurally equal exactly when their canonical serializations are equal, and
printing is idempotent across a parse/print round-trip.
"""

from __future__ import annotations

import base64
import json
from typing import Any

from .model import (
    Accreditation,
    Annotation,
    Artifact,
    Grammar,
    NodeState,
    Production,
    ProcessSpec,
    Sort,
    SortKind,
    is_structuring,
)

_STATE_TO_JSON = {
    NodeState.LOCKED_BUD: "locked",
    NodeState.UNLOCKED_BUD: "unlocked",
    NodeState.DEVELOPED: "developed",
}
_STATE_FROM_JSON = {v: k for k, v in _STATE_TO_JSON.items()}


class FormatError(ValueError):
    """Raised on malformed documents (wrong shape, bad enum values, ...)."""


def canonical_dumps(value: Any) -> str:
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


# ---------------------------------------------------------------------------
# Productions / grammar / spec
# ---------------------------------------------------------------------------


def production_to_dict(p: Production) -> dict:
    return {"lhs": p.lhs, "rhs": list(p.rhs), "annotation": p.annotation.value}


def production_from_dict(doc: Any) -> Production:
    if not isinstance(doc, dict):
        raise FormatError(f"production must be an object, got {type(doc).__name__}")
    try:
        lhs = doc["lhs"]
        rhs = doc["rhs"]
    except KeyError as exc:
        raise FormatError(f"production is missing field {exc.args[0]!r}") from None
    ann = doc.get("annotation", "seq")
    # An explicit list of gap annotations is tolerated on input so that
    # malformed documents mixing the two schedulings can be *reported* rather
    # than rejected at parse time; uniform lists collapse to their value.
    if isinstance(ann, list):
        if len(set(ann)) > 1:
            raise MixedAnnotationError(lhs, rhs)
        ann = ann[0] if ann else "seq"
    try:
        annotation = Annotation(ann)
    except ValueError:
        raise FormatError(f"production {lhs!r}: unknown annotation {ann!r}") from None
    if not isinstance(rhs, list) or not all(isinstance(x, str) for x in rhs):
        raise FormatError(f"production {lhs!r}: rhs must be a list of sort names")
    return Production(lhs, tuple(rhs), annotation)


class MixedAnnotationError(FormatError):
    def __init__(self, lhs: str, rhs: Any):
        self.lhs = lhs
        super().__init__(f"production {lhs!r} mixes sequential and parallel scheduling")


def spec_to_dict(spec: ProcessSpec) -> dict:
    return {
        "sorts": [{"name": s.name} for s in spec.grammar.sorts],
        "axioms": list(spec.grammar.axioms),
        "productions": [production_to_dict(p) for p in spec.grammar.productions],
        "actors": list(spec.actors),
        "accreditations": [
            {
                "actor": a.actor,
                "read": sorted(a.read),
                "write": sorted(a.write),
                "execute": sorted(a.execute),
            }
            for a in spec.accreditations
        ],
        "initiator": spec.initiator,
    }


def spec_from_dict(doc: Any) -> ProcessSpec:
    if not isinstance(doc, dict):
        raise FormatError("spec document must be a JSON object")
    for key in ("sorts", "axioms", "productions", "actors", "accreditations", "initiator"):
        if key not in doc:
            raise FormatError(f"spec document is missing field {key!r}")
    sorts = []
    for s in doc["sorts"]:
        if isinstance(s, str):
            name = s
        elif isinstance(s, dict) and isinstance(s.get("name"), str):
            name = s["name"]
        else:
            raise FormatError(f"bad sort entry: {s!r}")
        kind = SortKind.STRUCTURING if is_structuring(name) else SortKind.PROCESS
        sorts.append(Sort(name, kind))
    productions = tuple(production_from_dict(p) for p in doc["productions"])
    grammar = Grammar(tuple(sorts), tuple(doc["axioms"]), productions)
    accs = []
    for a in doc["accreditations"]:
        if not isinstance(a, dict) or "actor" not in a:
            raise FormatError(f"bad accreditation entry: {a!r}")
        accs.append(
            Accreditation(
                actor=a["actor"],
                read=frozenset(a.get("read", ())),
                write=frozenset(a.get("write", ())),
                execute=frozenset(a.get("execute", ())),
            )
        )
    return ProcessSpec(
        grammar=grammar,
        actors=tuple(doc["actors"]),
        accreditations=tuple(accs),
        initiator=doc["initiator"],
    )


# ---------------------------------------------------------------------------
# Artifacts
# ---------------------------------------------------------------------------


def artifact_to_dict(t: Artifact) -> dict:
    doc: dict[str, Any] = {
        "label": t.label,
        "state": _STATE_TO_JSON[t.state],
        "children": [artifact_to_dict(c) for c in t.children],
    }
    if t.production is not None:
        doc["production"] = production_to_dict(t.production)
    if t.payload is not None:
        doc["payload"] = base64.b64encode(t.payload).decode("ascii")
    return doc


def artifact_from_dict(doc: Any) -> Artifact:
    if not isinstance(doc, dict):
        raise FormatError("artifact node must be a JSON object")
    try:
        label = doc["label"]
        state_name = doc["state"]
    except KeyError as exc:
        raise FormatError(f"artifact node is missing field {exc.args[0]!r}") from None
    try:
        state = _STATE_FROM_JSON[state_name]
    except KeyError:
        raise FormatError(f"node {label!r}: unknown state {state_name!r}") from None
    production = None
    if "production" in doc:
        production = production_from_dict(doc["production"])
    payload = None
    if "payload" in doc:
        try:
            payload = base64.b64decode(doc["payload"], validate=True)
        except Exception:
            raise FormatError(f"node {label!r}: payload is not valid base64") from None
    children = tuple(artifact_from_dict(c) for c in doc.get("children", ()))
    try:
        return Artifact(
            label=label,
            state=state,
            production=production,
            children=children,
            payload=payload,
        )
    except ValueError as exc:
        raise FormatError(str(exc)) from None


def artifact_dumps(t: Artifact) -> str:
    return canonical_dumps(artifact_to_dict(t))


def artifact_loads(text: str) -> Artifact:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    return artifact_from_dict(doc)


def spec_dumps(spec: ProcessSpec) -> str:
    return canonical_dumps(spec_to_dict(spec))


def spec_loads(text: str) -> ProcessSpec:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"invalid JSON: {exc}") from None
    return spec_from_dict(doc)


# ---------------------------------------------------------------------------
# Compact tree notation (debugging, goldens, CLI output)
# ---------------------------------------------------------------------------


def to_compact(t: Artifact) -> str:
    """One-line tree rendering: ``A[B ; C?]``.

    ``;`` separates sequential children, ``|`` parallel ones; ``X?`` is an
    unlocked bud, ``X!`` a locked one; a developed leaf prints as ``X``.
    """
    if t.state is NodeState.UNLOCKED_BUD:
        return f"{t.label}?"
    if t.state is NodeState.LOCKED_BUD:
        return f"{t.label}!"
    if not t.children:
        return t.label
    assert t.production is not None
    sep = " ; " if t.production.annotation is Annotation.SEQUENTIAL else " | "
    return f"{t.label}[{sep.join(to_compact(c) for c in t.children)}]"
