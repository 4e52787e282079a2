"""Deterministic scripted replay of a process across all its peers.

A scenario script drives a single case through the full peer network: the
initiator opens the case before the first step, every step develops, commits
or discards as some actor, and deliveries triggered by commits are drained
synchronously.  Two runs of the same (spec, script) pair produce
byte-identical traces.
"""

from __future__ import annotations

import base64
from dataclasses import dataclass, field
from typing import Optional

from .engine import CaseRuntime
from .errors import ArborflowError, ScriptStepError
from .expansion import GuidePolicy
from .model import Address, Artifact, ProcessSpec, Production
from .serialize import (
    FormatError,
    artifact_to_dict,
    canonical_dumps,
    production_from_dict,
)

ACTIONS = ("develop", "commit", "discard", "ack")


@dataclass(frozen=True)
class ScriptStep:
    actor: str
    action: str
    addr: Optional[Address] = None
    production: Optional[Production] = None
    payload: Optional[bytes] = None
    guide_policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST
    seed: Optional[int] = None
    guide_index: Optional[int] = None


@dataclass(frozen=True)
class ScenarioScript:
    steps: tuple[ScriptStep, ...]


@dataclass
class SimTrace:
    """Everything a replay produced: the event log and the case outcomes."""

    events: list[dict] = field(default_factory=list)
    status: dict[str, str] = field(default_factory=dict)
    final: dict[str, Optional[Artifact]] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "events": self.events,
            "status": dict(sorted(self.status.items())),
            "final": {
                cid: artifact_to_dict(t) if t is not None else None
                for cid, t in sorted(self.final.items())
            },
        }

    def dumps(self) -> str:
        return canonical_dumps(self.to_dict())


def script_from_dict(doc: dict) -> ScenarioScript:
    if not isinstance(doc, dict) or not isinstance(doc.get("steps"), list):
        raise FormatError("a scenario script is an object with a 'steps' list")
    steps = []
    for i, raw in enumerate(doc["steps"]):
        if not isinstance(raw, dict):
            raise FormatError(f"step {i}: expected an object")
        actor = raw.get("actor")
        action = raw.get("action")
        if not isinstance(actor, str) or action not in ACTIONS:
            raise FormatError(
                f"step {i}: requires 'actor' and an 'action' among {ACTIONS}"
            )
        addr = raw.get("addr")
        if addr is not None:
            if not isinstance(addr, list) or not all(isinstance(x, int) for x in addr):
                raise FormatError(f"step {i}: 'addr' must be a list of integers")
            addr = tuple(addr)
        production = raw.get("production")
        if production is not None:
            production = production_from_dict(production)
        policy = raw.get("guidePolicy", GuidePolicy.DETERMINISTIC_FIRST.value)
        try:
            policy = GuidePolicy(policy)
        except ValueError:
            raise FormatError(f"step {i}: unknown guide policy {policy!r}") from None
        payload = raw.get("payload")
        if payload is not None:
            try:
                payload = base64.b64decode(payload, validate=True)
            except Exception:
                raise FormatError(f"step {i}: 'payload' must be base64") from None
        steps.append(
            ScriptStep(
                actor=actor,
                action=action,
                addr=addr,
                production=production,
                payload=payload,
                guide_policy=policy,
                seed=raw.get("seed"),
                guide_index=raw.get("guideIndex"),
            )
        )
    return ScenarioScript(tuple(steps))


def simulate(spec: ProcessSpec, script: ScenarioScript) -> SimTrace:
    """Replay `script` over a fresh peer network; deterministic by design."""
    runtime = CaseRuntime(spec)
    trace = SimTrace()
    if not script.steps:
        return trace
    case_id = runtime.initiate()
    for i, step in enumerate(script.steps):
        try:
            if step.action == "develop":
                if step.addr is None or step.production is None:
                    raise FormatError("develop steps need 'addr' and 'production'")
                runtime.develop(
                    step.actor, case_id, step.addr, step.production, step.payload
                )
            elif step.action == "commit":
                runtime.commit(
                    step.actor,
                    case_id,
                    step.guide_policy,
                    seed=step.seed,
                    guide_index=step.guide_index,
                )
            elif step.action == "discard":
                runtime.discard(step.actor, case_id)
            else:
                runtime.acknowledge(step.actor, case_id)
        except (ArborflowError, FormatError) as exc:
            raise ScriptStepError(i, exc) from exc
    trace.events = list(runtime.trace)
    trace.status = dict(runtime.status)
    trace.final = dict(runtime.final)
    return trace
