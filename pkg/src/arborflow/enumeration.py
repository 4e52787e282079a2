"""Enumeration of complete execution scenarios of a process grammar.

A grammar whose derivation relation is acyclic denotes finitely many complete
artifacts (its *targets*); everything downstream (view projection, merge guide
search) reasons over that finite set.
"""

from __future__ import annotations

from dataclasses import dataclass

from .errors import ExplosionLimitError, RecursiveGrammarError
from .model import (
    Accreditation,
    Artifact,
    Grammar,
    Production,
    ProcessSpec,
    Sort,
    developed,
)
from .serialize import artifact_dumps

DEFAULT_TARGET_CAP = 10_000

DISTINGUISHED_AXIOM = "A_G"


def recursive_sorts(g: Grammar) -> frozenset[str]:
    """Sorts lying on a cycle of the derives-to relation (including self-loops)."""
    edges: dict[str, set[str]] = {}
    for p in g.productions:
        edges.setdefault(p.lhs, set()).update(p.rhs)

    # Iterative Tarjan SCC; non-trivial components (or self-loops) are cycles.
    index: dict[str, int] = {}
    low: dict[str, int] = {}
    on_stack: set[str] = set()
    stack: list[str] = []
    counter = [0]
    result: set[str] = set()

    def strongconnect(v0: str) -> None:
        work = [(v0, iter(sorted(edges.get(v0, ()))))]
        index[v0] = low[v0] = counter[0]
        counter[0] += 1
        stack.append(v0)
        on_stack.add(v0)
        while work:
            v, it = work[-1]
            advanced = False
            for w in it:
                if w not in index:
                    index[w] = low[w] = counter[0]
                    counter[0] += 1
                    stack.append(w)
                    on_stack.add(w)
                    work.append((w, iter(sorted(edges.get(w, ())))))
                    advanced = True
                    break
                if w in on_stack:
                    low[v] = min(low[v], index[w])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                low[parent] = min(low[parent], low[v])
            if low[v] == index[v]:
                comp = []
                while True:
                    w = stack.pop()
                    on_stack.discard(w)
                    comp.append(w)
                    if w == v:
                        break
                if len(comp) > 1 or v in edges.get(v, ()):
                    result.update(comp)

    for v in sorted(set(edges) | {s.name for s in g.sorts}):
        if v not in index:
            strongconnect(v)
    return frozenset(result)


@dataclass(frozen=True)
class TargetSet:
    """The complete scenarios of a grammar, in canonical order, no duplicates."""

    artifacts: tuple[Artifact, ...]

    def __len__(self) -> int:
        return len(self.artifacts)

    def __iter__(self):
        return iter(self.artifacts)

    def __getitem__(self, index: int) -> Artifact:
        return self.artifacts[index]


def generate_targets(g: Grammar, cap: int = DEFAULT_TARGET_CAP) -> TargetSet:
    """Enumerate every complete artifact derivable from an axiom of `g`.

    Raises RecursiveGrammarError on cyclic grammars and ExplosionLimitError
    when more than `cap` artifacts would be produced.
    """
    rec = recursive_sorts(g)
    if rec:
        raise RecursiveGrammarError(rec)

    memo: dict[str, tuple[Artifact, ...]] = {}

    def arts_of(sort: str) -> tuple[Artifact, ...]:
        cached = memo.get(sort)
        if cached is not None:
            return cached
        out: list[Artifact] = []
        for p in g.productions_for(sort):
            combos: list[list[Artifact]] = [[]]
            for y in p.rhs:
                sub = arts_of(y)
                combos = [c + [t] for c in combos for t in sub]
                if len(combos) > cap:
                    raise ExplosionLimitError(cap)
            for combo in combos:
                out.append(developed(sort, p, combo))
            if len(out) > cap:
                raise ExplosionLimitError(cap)
        memo[sort] = tuple(out)
        return memo[sort]

    collected: list[Artifact] = []
    for axiom in g.axioms:
        collected.extend(arts_of(axiom))
        if len(collected) > cap:
            raise ExplosionLimitError(cap)
    # Canonical order (and defensive dedup) keyed by serialization.
    by_key = {artifact_dumps(t): t for t in collected}
    return TargetSet(tuple(by_key[k] for k in sorted(by_key)))


def ensure_axiom_visibility(spec: ProcessSpec) -> ProcessSpec:
    """Normalize a spec so that every actor can see the whole case skeleton.

    If some actor cannot read some axiom, or the grammar has several axioms,
    the grammar is re-rooted under a fresh distinguished axiom with one unit
    production per former axiom.  Every actor is granted read on the new
    axiom; only the initiator may write (and therefore initiate) it.
    Idempotent: a spec already satisfying the property is returned unchanged.
    """
    g = spec.grammar
    all_read = all(
        set(g.axioms) <= acc.read for acc in spec.accreditations
    )
    if all_read and len(g.axioms) == 1:
        return spec

    name = DISTINGUISHED_AXIOM
    taken = g.sort_names
    while name in taken:
        name += "'"

    new_sorts = (Sort(name),) + g.sorts
    unit_prods = tuple(Production(name, (axiom,)) for axiom in g.axioms)
    new_grammar = Grammar(
        sorts=new_sorts,
        axioms=(name,),
        productions=unit_prods + g.productions,
    )
    new_accs = []
    for acc in spec.accreditations:
        write = acc.write | {name} if acc.actor == spec.initiator else acc.write
        new_accs.append(
            Accreditation(
                actor=acc.actor,
                read=acc.read | {name},
                write=write,
                execute=acc.execute,
            )
        )
    return ProcessSpec(
        grammar=new_grammar,
        actors=spec.actors,
        accreditations=tuple(new_accs),
        initiator=spec.initiator,
    )
