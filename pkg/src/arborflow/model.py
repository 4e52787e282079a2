"""Core data model: process grammars, accredited specs, and tree artifacts.

A process is modelled by an annotated context-free grammar.  Every production
has one of two shapes: ``X -> X1 ; ... ; Xn`` (sequential) or
``X -> X1 | ... | Xn`` (parallel); ``X -> ()`` terminates a branch.  A running
case is an ordered labelled tree (an artifact) whose leaves may be *buds*:
placeholders for tasks not yet executed.  A locked bud may not be edited yet;
an unlocked bud is ready.

Structuring sorts (names starting with ``#``) never appear in user-authored
specs; they are minted by view projection to preserve local task ordering.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Optional

STRUCTURING_PREFIX = "#"


class Annotation(str, enum.Enum):
    """Scheduling of a production's right-hand side."""

    SEQUENTIAL = "seq"
    PARALLEL = "par"


class SortKind(str, enum.Enum):
    PROCESS = "process"
    STRUCTURING = "structuring"


class NodeState(str, enum.Enum):
    """Execution state of an artifact node.

    States are totally ordered: a locked bud may become unlocked, an unlocked
    bud may be developed, never the other way around.
    """

    LOCKED_BUD = "lockedBud"
    UNLOCKED_BUD = "unlockedBud"
    DEVELOPED = "developed"

    @property
    def rank(self) -> int:
        return _STATE_RANK[self]


_STATE_RANK = {
    NodeState.LOCKED_BUD: 0,
    NodeState.UNLOCKED_BUD: 1,
    NodeState.DEVELOPED: 2,
}


@dataclass(frozen=True)
class Sort:
    name: str
    kind: SortKind = SortKind.PROCESS

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("sort name must be non-empty")
        expected = (
            SortKind.STRUCTURING
            if self.name.startswith(STRUCTURING_PREFIX)
            else SortKind.PROCESS
        )
        if self.kind is not expected:
            raise ValueError(
                f"sort {self.name!r}: the {STRUCTURING_PREFIX!r} prefix is reserved for "
                f"structuring sorts (got kind={self.kind.value})"
            )


def is_structuring(name: str) -> bool:
    return name.startswith(STRUCTURING_PREFIX)


@dataclass(frozen=True)
class Production:
    """``lhs -> rhs`` with a scheduling annotation.

    Productions with fewer than two right-hand symbols are scheduling-neutral;
    they are canonicalized to sequential so that equality is well-defined.
    """

    lhs: str
    rhs: tuple[str, ...]
    annotation: Annotation = Annotation.SEQUENTIAL

    def __post_init__(self) -> None:
        object.__setattr__(self, "rhs", tuple(self.rhs))
        if len(self.rhs) < 2:
            object.__setattr__(self, "annotation", Annotation.SEQUENTIAL)

    @property
    def is_epsilon(self) -> bool:
        return not self.rhs

    def __str__(self) -> str:
        if self.is_epsilon:
            return f"{self.lhs} -> ()"
        sep = " ; " if self.annotation is Annotation.SEQUENTIAL else " | "
        return f"{self.lhs} -> {sep.join(self.rhs)}"


def production_key(p: Production) -> tuple:
    return (p.lhs, p.rhs, p.annotation.value)


@dataclass(frozen=True)
class Grammar:
    """An annotated process grammar: sorts, productions, axioms."""

    sorts: tuple[Sort, ...]
    axioms: tuple[str, ...]
    productions: tuple[Production, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sorts", tuple(self.sorts))
        object.__setattr__(self, "axioms", tuple(self.axioms))
        object.__setattr__(self, "productions", tuple(self.productions))

    @property
    def sort_names(self) -> frozenset[str]:
        return frozenset(s.name for s in self.sorts)

    def productions_for(self, sort: str) -> tuple[Production, ...]:
        return tuple(p for p in self.productions if p.lhs == sort)

    def reachable_sorts(self) -> frozenset[str]:
        """Sorts reachable from an axiom through productions."""
        seen: set[str] = set()
        stack = [a for a in self.axioms]
        while stack:
            x = stack.pop()
            if x in seen:
                continue
            seen.add(x)
            for p in self.productions:
                if p.lhs == x:
                    stack.extend(y for y in p.rhs if y not in seen)
        return frozenset(seen)


@dataclass(frozen=True)
class Accreditation:
    """What one actor may see (read), edit (write) and delegate (execute)."""

    actor: str
    read: frozenset[str]
    write: frozenset[str]
    execute: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        object.__setattr__(self, "read", frozenset(self.read))
        object.__setattr__(self, "write", frozenset(self.write))
        object.__setattr__(self, "execute", frozenset(self.execute))


@dataclass(frozen=True)
class ProcessSpec:
    """A grammar plus the actors accredited on it.

    The `view` of an actor is its read set: the only sorts that may ever
    appear on that actor's copy of a case.
    """

    grammar: Grammar
    actors: tuple[str, ...]
    accreditations: tuple[Accreditation, ...]
    initiator: str

    def __post_init__(self) -> None:
        object.__setattr__(self, "actors", tuple(self.actors))
        object.__setattr__(self, "accreditations", tuple(self.accreditations))

    def accreditation_for(self, actor: str) -> Accreditation:
        for acc in self.accreditations:
            if acc.actor == actor:
                return acc
        raise KeyError(actor)

    def view_of(self, actor: str) -> frozenset[str]:
        return self.accreditation_for(actor).read


Address = tuple[int, ...]


@dataclass(frozen=True)
class Artifact:
    """An ordered labelled tree under execution.

    Invariants enforced at construction:
      * a developed node carries the production used to develop it, and its
        children match that production's right-hand side, in order;
      * a bud has no children and no production.
    """

    label: str
    state: NodeState
    production: Optional[Production] = None
    children: tuple["Artifact", ...] = ()
    payload: Optional[bytes] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "children", tuple(self.children))
        if self.state is NodeState.DEVELOPED:
            if self.production is None:
                raise ValueError(f"developed node {self.label!r} requires a production")
            if self.production.lhs != self.label:
                raise ValueError(
                    f"node {self.label!r} developed with a production for {self.production.lhs!r}"
                )
            got = tuple(c.label for c in self.children)
            if got != self.production.rhs:
                raise ValueError(
                    f"children of {self.label!r} are {got}, expected {self.production.rhs}"
                )
        else:
            if self.production is not None:
                raise ValueError(f"bud {self.label!r} must not carry a production")
            if self.children:
                raise ValueError(f"bud {self.label!r} must not have children")

    @property
    def is_bud(self) -> bool:
        return self.state is not NodeState.DEVELOPED

    def node_at(self, addr: Iterable[int]) -> "Artifact":
        node = self
        for i in addr:
            try:
                node = node.children[i]
            except IndexError:
                raise KeyError(tuple(addr))
        return node

    def walk(self, prefix: Address = ()) -> Iterator[tuple[Address, "Artifact"]]:
        """Depth-first, left-to-right traversal yielding (address, node)."""
        yield prefix, self
        for i, child in enumerate(self.children):
            yield from child.walk(prefix + (i,))

    def buds(self) -> Iterator[tuple[Address, "Artifact"]]:
        for addr, node in self.walk():
            if node.is_bud:
                yield addr, node


def bud(label: str, state: NodeState = NodeState.UNLOCKED_BUD, payload: bytes | None = None) -> Artifact:
    return Artifact(label=label, state=state, payload=payload)


def developed(
    label: str,
    production: Production,
    children: Iterable[Artifact],
    payload: bytes | None = None,
) -> Artifact:
    return Artifact(
        label=label,
        state=NodeState.DEVELOPED,
        production=production,
        children=tuple(children),
        payload=payload,
    )


def replace_at(root: Artifact, addr: Address, new_node: Artifact) -> Artifact:
    """Return a copy of `root` with the subtree at `addr` replaced."""
    if not addr:
        return new_node
    head, rest = addr[0], addr[1:]
    if head >= len(root.children):
        raise KeyError(addr)
    children = list(root.children)
    children[head] = replace_at(children[head], rest, new_node)
    return Artifact(
        label=root.label,
        state=root.state,
        production=root.production,
        children=tuple(children),
        payload=root.payload,
    )


# ---------------------------------------------------------------------------
# Orders and predicates on artifacts
# ---------------------------------------------------------------------------


def conforms(t: Artifact, g: Grammar) -> bool:
    """True iff `t` is an execution state of `g`.

    The root must be an axiom, every developed node must use a production of
    `g`, and every bud must be labelled by a sort of `g`.
    """
    if t.label not in g.axioms:
        return False
    names = g.sort_names
    prods = set(g.productions)
    for _, node in t.walk():
        if node.is_bud:
            if node.label not in names:
                return False
        elif node.production not in prods:
            return False
    return True


def is_complete(t: Artifact) -> bool:
    """True iff `t` contains no bud."""
    return all(not node.is_bud for _, node in t.walk())


def is_prefix(ta: Artifact, tb: Artifact) -> bool:
    """Tree prefix order: `ta` equals `tb` except that some subtrees of `tb`
    may be cut back to buds in `ta`.  Bud lock states are ignored.
    """
    if ta.label != tb.label:
        return False
    if ta.is_bud:
        return True
    if tb.is_bud:
        return False
    if ta.production != tb.production:
        return False
    return all(is_prefix(ca, cb) for ca, cb in zip(ta.children, tb.children))


def is_update(ta: Artifact, tb: Artifact) -> bool:
    """`tb` extends `ta` without undoing anything.

    Prefix order, plus monotone node states at matching positions:
    lockedBud <= unlockedBud <= developed.
    """
    if ta.label != tb.label:
        return False
    if ta.is_bud:
        return ta.state.rank <= tb.state.rank
    if tb.is_bud:
        return False
    if ta.production != tb.production:
        return False
    return all(is_update(ca, cb) for ca, cb in zip(ta.children, tb.children))


def strip_states(t: Artifact) -> Artifact:
    """Collapse both bud states to lockedBud, recursively (state-blind compare)."""
    if t.is_bud:
        return Artifact(label=t.label, state=NodeState.LOCKED_BUD, payload=t.payload)
    return Artifact(
        label=t.label,
        state=t.state,
        production=t.production,
        children=tuple(strip_states(c) for c in t.children),
        payload=t.payload,
    )


def strip_structuring(t: Artifact) -> Artifact | None:
    """Remove structuring-rooted subtrees.

    A structuring subtree stands for a region of the process the actor cannot
    see directly; nothing inside it is guaranteed to survive a merge verbatim,
    so comparisons of "what the actor contributed" drop those subtrees.
    Returns None when the root itself is structuring.
    """
    if is_structuring(t.label):
        return None
    if t.is_bud:
        return t
    kept = [strip_structuring(c) for c in t.children]
    children = tuple(c for c in kept if c is not None)
    labels = tuple(c.label for c in children)
    prod = t.production
    if prod is not None and labels != prod.rhs:
        prod = Production(t.label, labels, prod.annotation)
    return Artifact(
        label=t.label,
        state=t.state,
        production=prod,
        children=children,
        payload=t.payload,
    )


def dfs_labels(t: Artifact, *, include_structuring: bool = False) -> tuple[str, ...]:
    """Depth-first label sequence, structuring sorts skipped by default."""
    return tuple(
        node.label
        for _, node in t.walk()
        if include_structuring or not is_structuring(node.label)
    )


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    code: str
    message: str

    def to_dict(self) -> dict:
        return {"code": self.code, "message": self.message}


@dataclass
class ValidationReport:
    errors: list[Issue] = field(default_factory=list)
    warnings: list[Issue] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def error(self, code: str, message: str) -> None:
        self.errors.append(Issue(code, message))

    def warn(self, code: str, message: str) -> None:
        self.warnings.append(Issue(code, message))

    def to_dict(self) -> dict:
        return {
            "errors": [i.to_dict() for i in self.errors],
            "warnings": [i.to_dict() for i in self.warnings],
        }


def validate_spec(spec: ProcessSpec) -> ValidationReport:
    """Check every structural invariant of a process spec.

    Returns a report; never raises.  Ambiguity between execution scenarios is
    reported as a warning (it is legal, but guide selection then matters).
    """
    rep = ValidationReport()
    g = spec.grammar
    names = [s.name for s in g.sorts]
    name_set = set(names)

    seen: set[str] = set()
    for n in names:
        if n in seen:
            rep.error("duplicate-sort", f"sort {n!r} declared more than once")
        seen.add(n)
    for s in g.sorts:
        if s.kind is SortKind.STRUCTURING:
            rep.error(
                "reserved-sort-name",
                f"sort {s.name!r}: structuring sorts only ever arise from projection",
            )

    if not g.axioms:
        rep.error("no-axioms", "grammar declares no axiom")
    for a in g.axioms:
        if a not in name_set:
            rep.error("unknown-sort", f"axiom {a!r} is not a declared sort")

    seen_prods: set[tuple] = set()
    for p in g.productions:
        if p.lhs not in name_set:
            rep.error("unknown-sort", f"production {p}: unknown left-hand sort {p.lhs!r}")
        for y in p.rhs:
            if y not in name_set:
                rep.error("unknown-sort", f"production {p}: unknown right-hand sort {y!r}")
        key = production_key(p)
        if key in seen_prods:
            rep.error("duplicate-production", f"production {p} declared more than once")
        seen_prods.add(key)

    if not rep.errors:
        for x in sorted(g.reachable_sorts()):
            if not g.productions_for(x):
                rep.error(
                    "unproductive-sort",
                    f"sort {x!r} is reachable from an axiom but has no production",
                )

    actor_set = set(spec.actors)
    if len(actor_set) != len(spec.actors):
        rep.error("duplicate-actor", "actor list contains duplicates")
    if spec.initiator not in actor_set:
        rep.error("unknown-actor", f"initiator {spec.initiator!r} is not a declared actor")

    acc_actors: set[str] = set()
    for acc in spec.accreditations:
        if acc.actor not in actor_set:
            rep.error("unknown-actor", f"accreditation for undeclared actor {acc.actor!r}")
        if acc.actor in acc_actors:
            rep.error("duplicate-accreditation", f"actor {acc.actor!r} accredited twice")
        acc_actors.add(acc.actor)
        for label, sorts in (("read", acc.read), ("write", acc.write), ("execute", acc.execute)):
            unknown = sorted(sorts - name_set)
            if unknown:
                rep.error(
                    "unknown-sort",
                    f"{acc.actor}: {label} set references unknown sorts {unknown}",
                )
        if not acc.write <= acc.read:
            rep.error(
                "write-not-in-read",
                f"{acc.actor}: write set must be contained in the read set "
                f"(missing {sorted(acc.write - acc.read)})",
            )
    for a in sorted(actor_set - acc_actors):
        rep.error("missing-accreditation", f"actor {a!r} has no accreditation")

    if rep.errors:
        return rep

    # Semantic warnings need enumeration; import lazily to avoid a module cycle.
    from .enumeration import generate_targets, recursive_sorts

    rec = recursive_sorts(g)
    if rec:
        rep.warn(
            "recursive-sorts",
            f"grammar is recursive through {sorted(rec)}; scenario enumeration is impossible",
        )
        return rep

    from .errors import ExplosionLimitError

    try:
        targets = generate_targets(g)
    except ExplosionLimitError:
        rep.warn("explosion-limit", "too many scenarios to check for ambiguity")
        return rep
    seqs = [dfs_labels(t) for t in targets.artifacts]
    for i in range(len(seqs)):
        for j in range(len(seqs)):
            if i != j and len(seqs[i]) < len(seqs[j]) and seqs[j][: len(seqs[i])] == seqs[i]:
                rep.warn(
                    "prefix-comparable-targets",
                    "one execution scenario is contained in another "
                    f"(scenarios {i} and {j}); guide selection order matters",
                )
    return rep
