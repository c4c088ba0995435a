"""Secondary structure: moral graph, triangulation, cliques, junction tree.

The triangulation heuristic is greedy min-fill with deterministic
tie-breaking (fewest fill-ins, then smallest resulting clique state
space, then lexicographic node name), so repeated runs over the same
model produce identical trees.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, replace
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

from .errors import ContractViolationError, DomainError, QueryError
from .potential import Variable

if TYPE_CHECKING:  # pragma: no cover
    from .estimation import Cpt
    from .model import BayesianNetwork

__all__ = [
    "Dag",
    "UndirectedGraph",
    "JunctionTree",
    "moralize",
    "triangulate",
    "max_cliques",
    "build_junction_tree",
    "assign_cpts",
    "choose_root",
    "compile_model",
    "format_tree",
]


@dataclass(frozen=True)
class Dag:
    """Directed acyclic graph over named nodes.

    `variables` carries the levelsets when they are known (always the
    case once a network is fitted or parsed); a structure-only DAG read
    from a file has `variables=None` until it meets data.
    """

    nodes: tuple[str, ...]
    parents: Mapping[str, tuple[str, ...]]
    variables: Mapping[str, Variable] | None = None

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        parents = {n: tuple(ps) for n, ps in self.parents.items()}
        object.__setattr__(self, "parents", parents)
        if len(set(self.nodes)) != len(self.nodes):
            raise DomainError("duplicate node names in DAG")
        known = set(self.nodes)
        for child, ps in parents.items():
            if child not in known:
                raise DomainError(f"parent list given for unknown node {child!r}")
            if len(set(ps)) != len(ps):
                raise DomainError(f"duplicate parents for {child!r}")
            missing = [p for p in ps if p not in known]
            if missing:
                raise DomainError(f"unknown parents {missing} for node {child!r}")
        for n in self.nodes:
            parents.setdefault(n, ())
        if self.variables is not None:
            vmap = dict(self.variables)
            missing = [n for n in self.nodes if n not in vmap]
            if missing:
                raise DomainError(f"no levelsets declared for {missing}")
            object.__setattr__(self, "variables", vmap)
        object.__setattr__(self, "_topo", self._topological_sort())

    def _topological_sort(self) -> tuple[str, ...]:
        indegree = {n: len(self.parents[n]) for n in self.nodes}
        children: dict[str, list[str]] = {n: [] for n in self.nodes}
        for child, ps in self.parents.items():
            for p in ps:
                children[p].append(child)
        ready = sorted(n for n, d in indegree.items() if d == 0)
        order: list[str] = []
        while ready:
            n = ready.pop(0)
            order.append(n)
            touched = False
            for c in children[n]:
                indegree[c] -= 1
                if indegree[c] == 0:
                    ready.append(c)
                    touched = True
            if touched:
                ready.sort()
        if len(order) != len(self.nodes):
            raise DomainError("graph contains a directed cycle")
        return tuple(order)

    @property
    def topological_order(self) -> tuple[str, ...]:
        return self._topo  # type: ignore[attr-defined]

    def family(self, name: str) -> frozenset[str]:
        return frozenset((name,) + self.parents[name])

    def with_variables(self, variables: Mapping[str, Variable]) -> "Dag":
        return Dag(self.nodes, self.parents, dict(variables))

    def variable(self, name: str) -> Variable:
        if self.variables is None:
            raise DomainError("this DAG carries no levelsets")
        return self.variables[name]


class UndirectedGraph:
    """Simple undirected graph with named nodes and attached variables."""

    def __init__(self, variables: Mapping[str, Variable], edges: Iterable[tuple[str, str]] = ()):
        self.variables = dict(variables)
        self.adj: dict[str, set[str]] = {n: set() for n in self.variables}
        for u, v in edges:
            self.add_edge(u, v)

    def add_edge(self, u: str, v: str) -> None:
        if u == v:
            raise DomainError(f"self-loop on {u!r}")
        if u not in self.adj or v not in self.adj:
            raise DomainError(f"unknown endpoint in edge ({u!r}, {v!r})")
        self.adj[u].add(v)
        self.adj[v].add(u)

    def has_edge(self, u: str, v: str) -> bool:
        return v in self.adj.get(u, ())

    def edge_set(self) -> frozenset[frozenset[str]]:
        return frozenset(frozenset((u, v)) for u, nbrs in self.adj.items() for v in nbrs)

    def copy(self) -> "UndirectedGraph":
        g = UndirectedGraph(self.variables)
        for n, nbrs in self.adj.items():
            g.adj[n] = set(nbrs)
        return g

    @property
    def nodes(self) -> tuple[str, ...]:
        return tuple(self.adj)

    def __repr__(self):
        return f"UndirectedGraph({len(self.adj)} nodes, {len(self.edge_set())} edges)"


def moralize(dag: Dag) -> UndirectedGraph:
    """Connect co-parents of every child and drop edge directions."""
    if dag.variables is None:
        raise DomainError("moralization needs levelsets attached to the DAG")
    g = UndirectedGraph(dag.variables)
    for child, ps in dag.parents.items():
        for p in ps:
            g.add_edge(child, p)
        for a, b in itertools.combinations(ps, 2):
            g.add_edge(a, b)
    return g


def _fill_in_count(adj: Mapping[str, set[str]], n: str) -> int:
    nbrs = list(adj[n])
    missing = 0
    for i in range(len(nbrs)):
        for j in range(i + 1, len(nbrs)):
            if nbrs[j] not in adj[nbrs[i]]:
                missing += 1
    return missing


def triangulate(g: UndirectedGraph) -> tuple[UndirectedGraph, tuple[str, ...]]:
    """Greedy min-fill triangulation.

    Returns the filled graph (original edges preserved) and the
    elimination order used, which is a perfect elimination order of the
    result.
    """
    work = {n: set(nbrs) for n, nbrs in g.adj.items()}
    out = g.copy()
    cards = {n: g.variables[n].cardinality for n in g.adj}
    remaining = set(work)
    order: list[str] = []
    while remaining:

        def cost(n: str):
            space = cards[n]
            for nb in work[n]:
                space *= cards[nb]
            return (_fill_in_count(work, n), space, n)

        best = min(remaining, key=cost)
        order.append(best)
        nbrs = list(work[best])
        for i in range(len(nbrs)):
            for j in range(i + 1, len(nbrs)):
                u, v = nbrs[i], nbrs[j]
                if v not in work[u]:
                    work[u].add(v)
                    work[v].add(u)
                    out.add_edge(u, v)
        for nb in nbrs:
            work[nb].discard(best)
        del work[best]
        remaining.discard(best)
    return out, tuple(order)


def max_cliques(gt: UndirectedGraph, order: Sequence[str]) -> tuple[frozenset[str], ...]:
    """Maximal cliques of a triangulated graph, extracted along its
    perfect elimination order.  The order must actually be a perfect
    elimination order of `gt`; this is verified and a violation raises,
    since it means a non-chordal graph slipped through."""
    pos = {n: i for i, n in enumerate(order)}
    if set(pos) != set(gt.adj):
        raise DomainError("elimination order does not cover the graph")
    candidates: list[frozenset[str]] = []
    for n in order:
        later = {nb for nb in gt.adj[n] if pos[nb] > pos[n]}
        for a, b in itertools.combinations(later, 2):
            if not gt.has_edge(a, b):
                raise ContractViolationError(
                    f"order is not a perfect elimination order: {a!r},{b!r} "
                    f"are non-adjacent later neighbors of {n!r}"
                )
        candidates.append(frozenset({n} | later))
    cliques: list[frozenset[str]] = []
    for c in candidates:
        if any(c < other for other in candidates):
            continue
        if c not in cliques:
            cliques.append(c)
    if len(cliques) > len(gt.adj):
        raise ContractViolationError("more maximal cliques than nodes in a chordal graph")
    return tuple(cliques)


@dataclass(frozen=True)
class JunctionTree:
    """Clique tree with separators; may be a forest for disconnected
    models, in which case each component is propagated independently."""

    cliques: tuple[frozenset[str], ...]
    variables: Mapping[str, Variable]
    edges: tuple[tuple[int, int, frozenset[str]], ...]
    root: int = 0
    assignments: tuple[tuple["Cpt", ...], ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "variables", dict(self.variables))

    def neighbors(self, i: int) -> list[tuple[int, frozenset[str]]]:
        out = []
        for a, b, sep in self.edges:
            if a == i:
                out.append((b, sep))
            elif b == i:
                out.append((a, sep))
        return sorted(out)

    def clique_index(self, names: Iterable[str]) -> int:
        target = frozenset(names)
        for i, c in enumerate(self.cliques):
            if c == target:
                return i
        raise QueryError(f"no clique {sorted(target)} in this tree")

    def clique_variables(self, i: int) -> tuple[Variable, ...]:
        return tuple(self.variables[n] for n in sorted(self.cliques[i]))

    def state_space(self, i: int) -> int:
        out = 1
        for n in self.cliques[i]:
            out *= self.variables[n].cardinality
        return out

    def containing_cliques(self, names: Iterable[str]) -> list[int]:
        target = set(names)
        return [i for i, c in enumerate(self.cliques) if target <= c]

    def unity_clique_indices(self) -> tuple[int, ...]:
        if self.assignments is None:
            raise DomainError("CPTs have not been assigned yet")
        return tuple(i for i, cpts in enumerate(self.assignments) if not cpts)

    def components(self) -> tuple[tuple[int, ...], ...]:
        """Connected components as sorted index tuples, sorted by first index."""
        seen: set[int] = set()
        comps: list[tuple[int, ...]] = []
        for start in range(len(self.cliques)):
            if start in seen:
                continue
            stack, comp = [start], []
            seen.add(start)
            while stack:
                i = stack.pop()
                comp.append(i)
                for j, _ in self.neighbors(i):
                    if j not in seen:
                        seen.add(j)
                        stack.append(j)
            comps.append(tuple(sorted(comp)))
        return tuple(comps)

    def with_root(self, root: int) -> "JunctionTree":
        if not 0 <= root < len(self.cliques):
            raise DomainError(f"root index {root} out of range")
        return replace(self, root=root)

    def with_assignments(self, assignments: Sequence[Sequence["Cpt"]]) -> "JunctionTree":
        if len(assignments) != len(self.cliques):
            raise DomainError("one CPT list per clique required")
        return replace(self, assignments=tuple(tuple(a) for a in assignments))


class _UnionFind:
    def __init__(self, n: int):
        self.parent = list(range(n))

    def find(self, i: int) -> int:
        while self.parent[i] != i:
            self.parent[i] = self.parent[self.parent[i]]
            i = self.parent[i]
        return i

    def union(self, a: int, b: int) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def _verify_running_intersection(jt: JunctionTree) -> None:
    for name in jt.variables:
        holders = [i for i, c in enumerate(jt.cliques) if name in c]
        if len(holders) <= 1:
            continue
        # the holders must be connected using only edges whose separator has the variable
        allowed = {(a, b) for a, b, sep in jt.edges if name in sep}
        allowed |= {(b, a) for a, b in allowed}
        seen = {holders[0]}
        stack = [holders[0]]
        while stack:
            i = stack.pop()
            for j, _ in jt.neighbors(i):
                if (i, j) in allowed and j not in seen:
                    seen.add(j)
                    stack.append(j)
        if not set(holders) <= seen:
            raise ContractViolationError(
                f"running intersection property violated for variable {name!r}"
            )


def build_junction_tree(
    cliques: Sequence[frozenset[str]], variables: Mapping[str, Variable]
) -> JunctionTree:
    """Maximum-weight spanning tree over the clique graph, weighting each
    candidate edge by separator size.  Disconnected clique graphs yield a
    forest.  The running intersection property is verified afterwards."""
    cliques = tuple(frozenset(c) for c in cliques)
    candidates = []
    for i in range(len(cliques)):
        for j in range(i + 1, len(cliques)):
            sep = cliques[i] & cliques[j]
            if sep:
                candidates.append((-len(sep), i, j, sep))
    candidates.sort()
    uf = _UnionFind(len(cliques))
    edges = []
    for negw, i, j, sep in candidates:
        if uf.union(i, j):
            edges.append((i, j, sep))
    jt = JunctionTree(cliques, variables, tuple(edges))
    _verify_running_intersection(jt)
    return jt


def assign_cpts(
    jt: JunctionTree,
    bn: "BayesianNetwork",
    rule: str = "smallest",
    overrides: Mapping[str, int] | None = None,
) -> JunctionTree:
    """Attach each CPT to exactly one clique containing its family.

    `rule` picks among candidate cliques: "smallest" prefers the one
    with the smallest state space (ties by index), "first" the lowest
    index.  `overrides` maps child-variable names to explicit clique
    indices and wins over the rule.  Cliques left without CPTs are unity
    cliques.
    """
    if rule not in ("smallest", "first"):
        raise DomainError(f"unknown assignment rule {rule!r}")
    overrides = dict(overrides or {})
    buckets: list[list[Cpt]] = [[] for _ in jt.cliques]
    for name in bn.dag.topological_order:
        cpt = bn.cpts[name]
        family = bn.dag.family(name)
        candidates = [i for i, c in enumerate(jt.cliques) if family <= c]
        if not candidates:
            raise ContractViolationError(
                f"family {sorted(family)} of {name!r} fits in no clique; "
                "moralization should have prevented this"
            )
        if name in overrides:
            target = overrides.pop(name)
            if target not in candidates:
                raise DomainError(
                    f"override places {name!r} in clique {target}, which does not "
                    f"contain its family {sorted(family)}"
                )
        elif rule == "first":
            target = min(candidates)
        else:
            target = min(candidates, key=lambda i: (jt.state_space(i), i))
        buckets[target].append(cpt)
    if overrides:
        raise DomainError(f"overrides for unknown variables: {sorted(overrides)}")
    return jt.with_assignments(buckets)


def choose_root(jt: JunctionTree, target: str | None = None) -> int:
    """Root clique index: one containing `target` when given, otherwise
    the largest clique by state space.  Ties break toward the largest
    state space and then the lowest index."""
    if target is not None:
        if target not in jt.variables:
            raise QueryError(f"unknown variable {target!r}")
        candidates = jt.containing_cliques([target])
        if not candidates:
            raise QueryError(f"variable {target!r} appears in no clique")
    else:
        candidates = list(range(len(jt.cliques)))
    return min(candidates, key=lambda i: (-jt.state_space(i), i))


def compile_model(
    bn: "BayesianNetwork",
    *,
    assign: str = "smallest",
    root_target: str | None = None,
    overrides: Mapping[str, int] | None = None,
) -> JunctionTree:
    """Full pipeline: moralize, triangulate, extract cliques, build the
    tree, assign CPTs and choose a root."""
    moral = moralize(bn.dag)
    gt, order = triangulate(moral)
    cliques = max_cliques(gt, order)
    jt = build_junction_tree(cliques, bn.dag.variables)
    jt = assign_cpts(jt, bn, rule=assign, overrides=overrides)
    return jt.with_root(choose_root(jt, root_target))


def format_tree(jt: JunctionTree) -> str:
    """Plain-text dump of cliques, assignments, separators and root."""
    lines = []
    for i, c in enumerate(jt.cliques):
        line = f"clique {i}: {' '.join(sorted(c))}"
        if jt.assignments is not None:
            names = [cpt.child.name for cpt in jt.assignments[i]]
            line += " | cpts: " + (" ".join(names) if names else "-")
        lines.append(line)
    for a, b, sep in jt.edges:
        lines.append(f"edge {a}-{b}: {' '.join(sorted(sep))}")
    lines.append(f"root: {jt.root}")
    return "\n".join(lines)
