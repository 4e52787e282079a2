"""Merging an edited partial replica back into the global artifact.

A committing actor only holds a projection, so the engine first looks for
*guides*: complete scenarios that extend both the last known global artifact
and (through the actor's view) the edited replica.  The chosen guide supplies
the global skeleton; a three-way merge then walks it, keeping what the global
artifact already contained, adopting the actor's new work, and pruning
everything the guide merely hypothesizes down to locked stand-in buds.
"""

from __future__ import annotations

import enum
import random
from dataclasses import dataclass
from typing import Iterable, Optional

from .enumeration import DEFAULT_TARGET_CAP, generate_targets
from .errors import EmptyGuidesError, GuideMismatchError
from .model import (
    Address,
    Annotation,
    Artifact,
    Grammar,
    NodeState,
    bud,
    developed,
    is_prefix,
    is_structuring,
)
from .projection import (
    LocalGrammar,
    ProjectedNode,
    StructuringContext,
    project_artifact_rooted,
    project_grammar,
    project_with_provenance,
)


class GuidePolicy(str, enum.Enum):
    DETERMINISTIC_FIRST = "deterministicFirst"
    SEEDED_RANDOM = "seededRandom"
    EXTERNAL = "external"


@dataclass(frozen=True)
class GuideSet:
    """Complete scenarios compatible with a (global, replica) pair."""

    guides: tuple[Artifact, ...]
    policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST

    def __len__(self) -> int:
        return len(self.guides)

    def __iter__(self):
        return iter(self.guides)


def find_guides(
    t: Artifact,
    t_maj: Artifact,
    g: Grammar,
    view: Iterable[str],
    *,
    local: Optional[LocalGrammar] = None,
    cap: int = DEFAULT_TARGET_CAP,
    policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST,
) -> GuideSet:
    """Select the complete scenarios that extend both `t` and `t_maj`.

    A guide must admit the global artifact as a prefix, and its projection
    onto the actor's view must admit the replica as a prefix.  Guide
    projections reuse the local grammar's structuring vocabulary so that
    the replica's structuring names compare equal.
    """
    view = frozenset(view)
    if local is None:
        local = project_grammar(g, view, cap)
    ctx = local.context()
    guides = []
    for t_g in generate_targets(g, cap):
        if not is_prefix(t, t_g):
            continue
        if is_prefix(t_maj, project_artifact_rooted(t_g, view, ctx.clone())):
            guides.append(t_g)
    if not guides:
        raise EmptyGuidesError(
            "no complete scenario extends both the global artifact and the replica"
        )
    return GuideSet(tuple(guides), policy)


def select_guide(
    gs: GuideSet,
    policy: Optional[GuidePolicy] = None,
    *,
    seed: Optional[int] = None,
    index: Optional[int] = None,
) -> Artifact:
    """Pick one guide: canonically least, seed-reproducible, or caller-chosen."""
    if not gs.guides:
        raise EmptyGuidesError("cannot select from an empty guide set")
    policy = policy if policy is not None else gs.policy
    if policy is GuidePolicy.DETERMINISTIC_FIRST:
        return gs.guides[0]
    if policy is GuidePolicy.SEEDED_RANDOM:
        return gs.guides[random.Random(seed).randrange(len(gs.guides))]
    if index is None:
        raise ValueError("guide policy 'external' requires an index")
    if not 0 <= index < len(gs.guides):
        raise ValueError(f"guide index {index} out of range (have {len(gs.guides)})")
    return gs.guides[index]


def _contains_developed(t: Artifact) -> bool:
    return any(n.state is NodeState.DEVELOPED for _, n in t.walk())


def _index_by_source(p: ProjectedNode, m: Optional[Artifact], out: dict) -> None:
    """Pair each projected guide node with its replica counterpart.

    The replica is a prefix of the guide's projection, so both trees agree
    node-for-node until the replica runs out; past that frontier (and below
    replica buds) the counterpart is absent.
    """
    if m is not None:
        expect_structuring = is_structuring(p.artifact.label)
        if expect_structuring != is_structuring(m.label):
            raise GuideMismatchError(
                f"replica node {m.label!r} does not align with projected guide "
                f"node {p.artifact.label!r}"
            )
        if not expect_structuring and m.label != p.artifact.label:
            raise GuideMismatchError(
                f"replica label {m.label!r} differs from projected guide label "
                f"{p.artifact.label!r}"
            )
    out[p.src] = (p, m)
    if m is None or m.is_bud:
        kids_m: list[Optional[Artifact]] = [None] * len(p.kids)
    else:
        if len(m.children) != len(p.kids):
            raise GuideMismatchError(
                f"replica node {m.label!r} has {len(m.children)} children, "
                f"projected guide node has {len(p.kids)}"
            )
        kids_m = list(m.children)
    for pk, mk in zip(p.kids, kids_m):
        _index_by_source(pk, mk, out)


def three_way_merge(
    t: Artifact,
    t_maj: Artifact,
    t_g: Artifact,
    view: Iterable[str],
    ctx: Optional[StructuringContext] = None,
) -> Artifact:
    """Merge replica `t_maj` and global `t` over the skeleton of guide `t_g`.

    The guide is walked top-down.  Wherever the actor's replica reaches (via
    the provenance of the guide's projection), the replica decides: developed
    replica nodes are adopted, replica buds prune the guide.  Wherever it does
    not, the previous global artifact decides; regions known to neither are
    emitted as locked stand-in buds awaiting their accredited actors.
    Structuring nodes never reach the result: a developed one hands control
    to its children, an undeveloped one hides the region like a bud.
    """
    view = frozenset(view)
    proj = project_with_provenance(t_g, view, ctx)
    by_src: dict[Address, tuple[ProjectedNode, Optional[Artifact]]] = {}
    _index_by_source(proj, t_maj, by_src)

    def check_t(g_node: Artifact, t_node: Optional[Artifact]) -> None:
        if t_node is None:
            return
        if t_node.label != g_node.label:
            raise GuideMismatchError(
                f"global label {t_node.label!r} differs from guide label {g_node.label!r}"
            )
        if not t_node.is_bud and t_node.production != g_node.production:
            raise GuideMismatchError(
                f"global node {t_node.label!r} developed with a production the "
                f"guide does not use"
            )

    def t_child(t_node: Optional[Artifact], i: int) -> Optional[Artifact]:
        if t_node is None or t_node.is_bud:
            return None
        return t_node.children[i]

    def from_global(g_node: Artifact, a: Address, t_node: Optional[Artifact]) -> Artifact:
        # The replica has no say here; keep what the global artifact had, or
        # stand in for the not-yet-executed guide region with a locked bud.
        if t_node is None:
            return bud(g_node.label, NodeState.LOCKED_BUD)
        if t_node.is_bud:
            return t_node
        children = [
            merge(g_node.children[i], a + (i,), t_node.children[i])
            for i in range(len(g_node.children))
        ]
        assert t_node.production is not None
        return developed(g_node.label, t_node.production, children, payload=t_node.payload)

    def merge(g_node: Artifact, a: Address, t_node: Optional[Artifact]) -> Artifact:
        check_t(g_node, t_node)
        entry = by_src.get(a)
        if entry is None:
            # Invisible to the view and erased without a wrapper: the replica
            # cannot talk about this node (though it may about descendants).
            return from_global(g_node, a, t_node)
        p, m = entry
        if not p.wrap:
            if m is None:
                return from_global(g_node, a, t_node)
            if m.is_bud:
                # The actor left this visible node unexecuted: prune the guide.
                return bud(g_node.label, m.state, payload=m.payload)
            assert g_node.production is not None
            payload = m.payload
            if payload is None and t_node is not None:
                payload = t_node.payload
            children = [
                merge(g_node.children[i], a + (i,), t_child(t_node, i))
                for i in range(len(g_node.children))
            ]
            return developed(g_node.label, g_node.production, children, payload=payload)
        # Structuring wrapper: the guide node itself is invisible.
        if m is None or m.is_bud:
            return from_global(g_node, a, t_node)
        assert g_node.production is not None
        children = [
            merge(g_node.children[i], a + (i,), t_child(t_node, i))
            for i in range(len(g_node.children))
        ]
        fresh = t_node is None or t_node.is_bud
        if fresh and not any(_contains_developed(c) for c in children):
            # The actor only unfolded local structure without executing
            # anything inside, and the global artifact never reached this
            # node either: committing it would fabricate work nobody did.
            return bud(g_node.label, NodeState.LOCKED_BUD)
        payload = t_node.payload if t_node is not None else None
        return developed(g_node.label, g_node.production, children, payload=payload)

    return merge(t_g, (), t)


def normalize_bud_states(t: Artifact, g: Optional[Grammar] = None) -> Artifact:
    """Recompute every bud's lock state from the scheduling annotations.

    Under a sequential production a bud is ready exactly when everything to
    its left is finished; under a parallel production all buds are ready.
    Developed nodes are untouched.  (`g` is accepted for interface symmetry;
    the annotations carried by the artifact itself suffice.)
    """

    def visit(node: Artifact, ready: bool) -> tuple[Artifact, bool]:
        if node.is_bud:
            state = NodeState.UNLOCKED_BUD if ready else NodeState.LOCKED_BUD
            if state is node.state:
                return node, False
            return bud(node.label, state, payload=node.payload), False
        assert node.production is not None
        complete = True
        children = []
        if node.production.annotation is Annotation.PARALLEL:
            for c in node.children:
                nc, comp = visit(c, True)
                children.append(nc)
                complete = complete and comp
        else:
            left_complete = True
            for c in node.children:
                nc, comp = visit(c, left_complete)
                children.append(nc)
                left_complete = left_complete and comp
            complete = left_complete
        return (
            developed(node.label, node.production, children, payload=node.payload),
            complete,
        )

    return visit(t, True)[0]


def expand(
    t: Artifact,
    t_maj: Artifact,
    g: Grammar,
    view: Iterable[str],
    *,
    policy: GuidePolicy = GuidePolicy.DETERMINISTIC_FIRST,
    seed: Optional[int] = None,
    index: Optional[int] = None,
    local: Optional[LocalGrammar] = None,
    cap: int = DEFAULT_TARGET_CAP,
) -> Artifact:
    """Expansion-pruning: lift the edited replica back to a global artifact."""
    view = frozenset(view)
    if local is None:
        local = project_grammar(g, view, cap)
    guides = find_guides(t, t_maj, g, view, local=local, cap=cap, policy=policy)
    t_g = select_guide(guides, policy, seed=seed, index=index)
    t_f = three_way_merge(t, t_maj, t_g, view, local.context())
    return normalize_bud_states(t_f, g)
