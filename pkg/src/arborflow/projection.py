"""View projection of artifacts and grammars.

An actor only ever sees the sorts in its read set (its *view*).  Projecting an
artifact erases invisible nodes; when erasing a node would lose the relative
scheduling of the surviving children, a fresh *structuring* node is minted to
hold them together.  Projecting a grammar projects every complete scenario and
reads a local grammar off the results, so each actor gets a self-contained
model of the process as it will ever appear on its own screen.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from typing import Iterable, Optional

from .enumeration import DEFAULT_TARGET_CAP, TargetSet, generate_targets
from .errors import NotSingletonError
from .model import (
    Address,
    Annotation,
    Artifact,
    Grammar,
    Production,
    Sort,
    SortKind,
    developed,
    is_structuring,
    production_key,
)
from .serialize import artifact_dumps, canonical_dumps


@dataclass
class StructuringContext:
    """Naming state for structuring sorts.

    Two structuring nodes receive the same name exactly when they induce the
    same local scheduling, which is encoded by `canonical_shape`.  Threading
    one context through several projections therefore merges duplicates.
    """

    counter: int = 0
    canon: dict[str, str] = field(default_factory=dict)

    def intern(self, shape: str) -> str:
        name = self.canon.get(shape)
        if name is None:
            self.counter += 1
            name = f"#S{self.counter}"
            self.canon[shape] = name
        return name

    def clone(self) -> "StructuringContext":
        return StructuringContext(self.counter, dict(self.canon))


_IDX = re.compile(r"#S(\d+)$")


def canonical_shape(t: Artifact) -> str:
    """Deterministic encoding of the scheduling a subtree induces.

    Structuring labels are replaced by a placeholder (their names are
    artefacts of minting order) and node states are ignored (a bud stands for
    the very subtree it will develop into), so a partially executed region
    gets the same shape as its completed form whenever their skeletons agree.
    """
    label = "*" if is_structuring(t.label) else t.label
    ann = t.production.annotation.value if t.production is not None else Annotation.SEQUENTIAL.value
    return canonical_dumps([label, ann, [canonical_shape(c) for c in t.children]])


def context_from_targets(targets: Iterable[Artifact]) -> StructuringContext:
    """Rebuild the naming context that produced `targets`.

    Seeding a projection with this context makes runtime replicas reuse the
    local grammar's structuring vocabulary instead of minting fresh names.
    """
    ctx = StructuringContext()
    for t in targets:
        for _, node in t.walk():
            if is_structuring(node.label):
                ctx.canon.setdefault(canonical_shape(node), node.label)
                m = _IDX.match(node.label)
                if m:
                    ctx.counter = max(ctx.counter, int(m.group(1)))
    return ctx


@dataclass(frozen=True)
class Forest:
    """An ordered list of artifacts (a projection may split a tree apart)."""

    artifacts: tuple[Artifact, ...]

    def __len__(self) -> int:
        return len(self.artifacts)

    def __iter__(self):
        return iter(self.artifacts)


@dataclass(frozen=True)
class ProjectedNode:
    """A projected artifact node plus where it came from.

    `src` is the address, in the source tree, of the node this one stands
    for: the node itself when it was kept, or the erased invisible node a
    structuring wrapper (`wrap=True`) was minted for.  The merge step uses
    this provenance to realign a partial replica with a complete scenario.
    """

    artifact: Artifact
    src: Address
    wrap: bool
    kids: tuple["ProjectedNode", ...]


def _project(node: Artifact, addr: Address, view: frozenset[str], ctx: StructuringContext) -> list[ProjectedNode]:
    visible = node.label in view
    if node.is_bud:
        # Buds need no special treatment: kept when visible, erased otherwise.
        return [ProjectedNode(node, addr, False, ())] if visible else []

    assert node.production is not None
    processed: list[ProjectedNode] = []
    for i, child in enumerate(node.children):
        forest = _project(child, addr + (i,), view, ctx)
        same_scheduling = (
            child.production is not None
            and child.production.annotation is node.production.annotation
        )
        if len(forest) <= 1 or same_scheduling:
            # Splicing the children in place cannot reorder anything the
            # parent's own annotation does not already express.
            processed.extend(forest)
        else:
            # The child scheduled its survivors differently from how the
            # parent schedules its slots: hold them together under a fresh
            # structuring node carrying the child's annotation.
            ann = child.production.annotation
            shapes = [canonical_shape(p.artifact) for p in forest]
            shape = canonical_dumps(["*", ann.value, shapes])
            name = ctx.intern(shape)
            prod = Production(name, tuple(p.artifact.label for p in forest), ann)
            wrap_art = developed(name, prod, [p.artifact for p in forest])
            processed.append(ProjectedNode(wrap_art, addr + (i,), True, tuple(forest)))

    if not visible:
        return processed

    if len(processed) == 1 and processed[0].wrap:
        # A kept node whose single child is a wrapper minted during this very
        # projection: the wrapper serves no purpose, dissolve it.
        sole = processed[0]
        assert sole.artifact.production is not None
        ann = sole.artifact.production.annotation
        kids = sole.kids
    else:
        ann = node.production.annotation
        kids = tuple(processed)
    labels = tuple(k.artifact.label for k in kids)
    prod = Production(node.label, labels, ann)
    art = developed(node.label, prod, [k.artifact for k in kids], payload=node.payload)
    return [ProjectedNode(art, addr, False, kids)]


def project_artifact(
    t: Artifact,
    view: Iterable[str],
    ctx: Optional[StructuringContext] = None,
) -> Forest:
    """Project `t` onto `view`; the result is a forest (possibly empty)."""
    ctx = ctx if ctx is not None else StructuringContext()
    nodes = _project(t, (), frozenset(view), ctx)
    return Forest(tuple(p.artifact for p in nodes))


def project_artifact_rooted(
    t: Artifact,
    view: Iterable[str],
    ctx: Optional[StructuringContext] = None,
) -> Artifact:
    """Project `t` onto `view`, requiring a single-tree result."""
    forest = project_artifact(t, view, ctx)
    if len(forest) != 1:
        raise NotSingletonError(len(forest))
    return forest.artifacts[0]


def project_with_provenance(
    t: Artifact,
    view: Iterable[str],
    ctx: Optional[StructuringContext] = None,
) -> ProjectedNode:
    """Rooted projection keeping the source-address bookkeeping (merge support)."""
    ctx = ctx if ctx is not None else StructuringContext()
    nodes = _project(t, (), frozenset(view), ctx)
    if len(nodes) != 1:
        raise NotSingletonError(len(nodes))
    return nodes[0]


@dataclass(frozen=True)
class LocalGrammar:
    """What one actor knows of the process: a grammar over its view plus the
    structuring sorts projection minted, and the projected scenarios."""

    grammar: Grammar
    local_targets: TargetSet

    @property
    def structuring_sorts(self) -> frozenset[str]:
        return frozenset(
            s.name for s in self.grammar.sorts if s.kind is SortKind.STRUCTURING
        )

    def context(self) -> StructuringContext:
        return context_from_targets(self.local_targets)


def project_grammar(
    g: Grammar,
    view: Iterable[str],
    cap: int = DEFAULT_TARGET_CAP,
) -> LocalGrammar:
    """Project a whole grammar onto a view.

    Every complete scenario is enumerated and projected under one shared
    naming context, duplicates are merged, and the local grammar is the set
    of productions occurring in the surviving local scenarios.
    """
    view = frozenset(view)
    missing = [a for a in g.axioms if a not in view]
    if missing:
        raise ValueError(
            f"grammar projection requires the axioms to be visible (missing {missing})"
        )
    targets = generate_targets(g, cap)
    ctx = StructuringContext()
    locals_by_key: dict[str, Artifact] = {}
    for t in targets:
        proj = project_artifact_rooted(t, view, ctx)
        locals_by_key.setdefault(artifact_dumps(proj), proj)
    local_targets = tuple(locals_by_key[k] for k in sorted(locals_by_key))

    prods: dict[tuple, Production] = {}
    minted: set[str] = set()
    for lt in local_targets:
        for _, node in lt.walk():
            if node.production is not None:
                prods.setdefault(production_key(node.production), node.production)
            if is_structuring(node.label):
                minted.add(node.label)

    def struct_index(name: str) -> tuple:
        m = _IDX.match(name)
        return (0, int(m.group(1))) if m else (1, name)

    sorts = tuple(
        Sort(s.name) for s in g.sorts if s.name in view
    ) + tuple(Sort(n, SortKind.STRUCTURING) for n in sorted(minted, key=struct_index))
    grammar = Grammar(
        sorts=sorts,
        axioms=g.axioms,
        productions=tuple(prods[k] for k in sorted(prods)),
    )
    return LocalGrammar(grammar=grammar, local_targets=TargetSet(local_targets))
