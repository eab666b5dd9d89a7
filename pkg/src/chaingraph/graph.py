"""Chain graphs: representation, validation and structural queries."""

from __future__ import annotations

import itertools
import re
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import FrozenSet, Iterable

from .errors import CapExceededError, GraphError, ParseError, SemiDirectedCycleError

DEFAULT_COMPONENT_CAP = 16

VertexSet = FrozenSet[int]


def vset(vertices: Iterable[int] = ()) -> VertexSet:
    return frozenset(int(v) for v in vertices)


def sorted_tuple(vertices: Iterable[int]) -> tuple:
    return tuple(sorted(vertices))


@dataclass(frozen=True)
class ChainGraph:
    """Mixed graph without semi-directed cycles.

    ``directed`` holds ordered pairs ``(v, w)`` meaning ``v -> w``;
    ``undirected`` holds pairs ``(v, w)`` with ``v < w`` meaning ``v -- w``.
    Construction validates everything, so an instance is always a chain graph.
    """

    vertices: tuple
    directed: FrozenSet[tuple]
    undirected: FrozenSet[tuple]
    levels: dict = field(compare=False)

    def __init__(self, vertices, directed=(), undirected=(), levels=None):
        verts = set(int(v) for v in vertices)
        dir_edges = set()
        und_edges = set()
        for v, w in directed:
            verts.update((int(v), int(w)))
            dir_edges.add((int(v), int(w)))
        for v, w in undirected:
            v, w = int(v), int(w)
            verts.update((v, w))
            und_edges.add((min(v, w), max(v, w)))
        levels = {int(k): int(d) for k, d in (levels or {}).items()}
        for v in levels:
            verts.add(v)
        lv = {v: levels.get(v, 2) for v in sorted(verts)}
        object.__setattr__(self, "vertices", tuple(sorted(verts)))
        object.__setattr__(self, "directed", frozenset(dir_edges))
        object.__setattr__(self, "undirected", frozenset(und_edges))
        object.__setattr__(self, "levels", lv)
        self._validate()

    def _validate(self):
        for v in self.vertices:
            if v < 1:
                raise GraphError(f"vertex labels must be positive integers, got {v}")
            if self.levels[v] < 2:
                raise GraphError(f"vertex {v} has {self.levels[v]} levels; need at least 2",
                                 vertex=v)
        for v, w in self.directed | self.undirected:
            if v == w:
                raise GraphError(f"self-loop at vertex {v}", vertex=v)
        for v, w in self.directed:
            if (w, v) in self.directed:
                raise GraphError(f"edges {v} -> {w} and {w} -> {v} conflict; "
                                 f"write {min(v, w)} -- {max(v, w)}", edge=[v, w])
            if (min(v, w), max(v, w)) in self.undirected:
                raise GraphError(f"pair {v},{w} is both directed and undirected",
                                 edge=[v, w])
        cycle = self._find_semi_directed_cycle()
        if cycle is not None:
            raise SemiDirectedCycleError(cycle)

    # -- adjacency ---------------------------------------------------------

    @cached_property
    def _parents(self):
        pa = {v: set() for v in self.vertices}
        for v, w in self.directed:
            pa[w].add(v)
        return {v: frozenset(s) for v, s in pa.items()}

    @cached_property
    def _neighbors(self):
        nb = {v: set() for v in self.vertices}
        for v, w in self.undirected:
            nb[v].add(w)
            nb[w].add(v)
        return {v: frozenset(s) for v, s in nb.items()}

    def parents_of(self, v) -> VertexSet:
        return self._parents[v]

    def neighbors_of(self, v) -> VertexSet:
        return self._neighbors[v]

    def adjacent(self, v, w) -> bool:
        return (v, w) in self.directed or (w, v) in self.directed or w in self._neighbors[v]

    def d(self, v) -> int:
        return self.levels[v]

    # -- components --------------------------------------------------------

    @cached_property
    def _component_of(self):
        comp = {}
        for start in self.vertices:
            if start in comp:
                continue
            comp[start] = start
            queue = deque([start])
            while queue:
                u = queue.popleft()
                for x in self._neighbors[u]:
                    if x not in comp:
                        comp[x] = start
                        queue.append(x)
        return comp

    def _find_semi_directed_cycle(self):
        # A semi-directed cycle exists iff the graph of undirected components
        # (with directed edges between them) has a cycle, where a directed edge
        # inside one component counts as a self-loop.
        comp = self._component_of
        succ = {}
        witness = {}
        for v, w in sorted(self.directed):
            a, b = comp[v], comp[w]
            if a == b:
                return [v] + self._undirected_path(w, v)[:-1]
            succ.setdefault(a, set()).add(b)
            witness.setdefault((a, b), (v, w))
        color = {}
        for root in sorted(set(comp.values())):
            if root in color:
                continue
            stack = [(root, iter(sorted(succ.get(root, ()))))]
            color[root] = 1
            path = [root]
            while stack:
                node, it = stack[-1]
                nxt = next(it, None)
                if nxt is None:
                    color[node] = 2
                    stack.pop()
                    path.pop()
                    continue
                if color.get(nxt) == 1:
                    comp_cycle = path[path.index(nxt):] + [nxt]
                    return self._expand_component_cycle(comp_cycle, witness)
                if nxt not in color:
                    color[nxt] = 1
                    path.append(nxt)
                    stack.append((nxt, iter(sorted(succ.get(nxt, ())))))
        return None

    def _expand_component_cycle(self, comp_cycle, witness):
        edges = [witness[(a, b)] for a, b in zip(comp_cycle, comp_cycle[1:])]
        cycle = []
        for k, (v, w) in enumerate(edges):
            nv, _ = edges[(k + 1) % len(edges)]
            cycle.extend(self._undirected_path(w, nv)[:-1])
            cycle.append(nv)
        # rotate so that the cycle reads from a tail of a directed edge
        return cycle[-1:] + cycle[:-1]

    def _undirected_path(self, start, goal):
        prev = {start: None}
        queue = deque([start])
        while queue:
            u = queue.popleft()
            if u == goal:
                break
            for x in sorted(self._neighbors[u]):
                if x not in prev:
                    prev[x] = u
                    queue.append(x)
        path = [goal]
        while path[-1] != start:
            path.append(prev[path[-1]])
        return path[::-1]

    def components(self) -> "ComponentDag":
        return chain_components(self)

    def with_levels(self, levels) -> "ChainGraph":
        lv = dict(self.levels)
        lv.update(levels)
        return ChainGraph(self.vertices, self.directed, self.undirected, lv)

    def to_text(self) -> str:
        lines = ["states " + " ".join(f"{v}={d}" for v, d in self.levels.items())]
        lines += [f"{v} -> {w}" for v, w in sorted(self.directed)]
        lines += [f"{v} -- {w}" for v, w in sorted(self.undirected)]
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class ComponentDag:
    components: tuple          # tuple of frozensets, sorted by smallest member
    dag_edges: FrozenSet[tuple]
    topological_order: tuple

    def index(self, tau) -> int:
        tau = vset(tau)
        try:
            return self.components.index(tau)
        except ValueError:
            raise GraphError(f"{sorted(tau)} is not a chain component") from None

    def parent_indices(self, k) -> list:
        return sorted(a for a, b in self.dag_edges if b == k)

    def ancestors_indices(self, k) -> set:
        seen = set()
        stack = [k]
        while stack:
            for a in self.parent_indices(stack.pop()):
                if a not in seen:
                    seen.add(a)
                    stack.append(a)
        return seen

    def descendant_indices(self, k) -> set:
        seen = set()
        stack = [k]
        while stack:
            node = stack.pop()
            for a, b in self.dag_edges:
                if a == node and b not in seen:
                    seen.add(b)
                    stack.append(b)
        return seen


def chain_components(g: ChainGraph) -> ComponentDag:
    groups = {}
    for v, root in g._component_of.items():
        groups.setdefault(root, set()).add(v)
    comps = sorted((frozenset(s) for s in groups.values()), key=min)
    where = {v: k for k, c in enumerate(comps) for v in c}
    edges = frozenset((where[v], where[w]) for v, w in g.directed)
    # Kahn's algorithm; ties broken by component index
    indeg = {k: 0 for k in range(len(comps))}
    for _, b in edges:
        indeg[b] += 1
    ready = sorted(k for k, n in indeg.items() if n == 0)
    order = []
    while ready:
        k = ready.pop(0)
        order.append(k)
        for a, b in sorted(edges):
            if a == k:
                indeg[b] -= 1
                if indeg[b] == 0:
                    ready.append(b)
                    ready.sort()
    return ComponentDag(tuple(comps), edges, tuple(order))


def _check_vertices(g, sigma):
    unknown = set(sigma) - set(g.vertices)
    if unknown:
        raise GraphError(f"unknown vertices {sorted(unknown)}", vertices=sorted(unknown))


def neighborhoods(g: ChainGraph, sigma) -> tuple:
    """Return ``(pa_G(sigma), nb_G(sigma), Nb_G(sigma))``."""
    sigma = vset(sigma)
    _check_vertices(g, sigma)
    pa = set().union(*(g.parents_of(v) for v in sigma)) - sigma
    nb = set().union(*(g.neighbors_of(v) for v in sigma)) - sigma
    return frozenset(pa), frozenset(nb), frozenset(nb | sigma)


def parents(g: ChainGraph, sigma) -> VertexSet:
    return neighborhoods(g, sigma)[0]


def dag_relations(dag: ComponentDag, tau) -> tuple:
    """Return ``(pa_D(tau), nd_D(tau))`` as vertex sets."""
    k = dag.index(tau)
    pa = set()
    for a in dag.parent_indices(k):
        pa |= dag.components[a]
    desc = dag.descendant_indices(k)
    nd = set()
    for j, c in enumerate(dag.components):
        if j != k and j not in desc:
            nd |= c
    return frozenset(pa), frozenset(nd)


def component_of(g: ChainGraph, v) -> VertexSet:
    root = g._component_of[v]
    return frozenset(u for u, r in g._component_of.items() if r == root)


def is_connected(g: ChainGraph, sigma) -> bool:
    sigma = vset(sigma)
    if not sigma:
        return False
    start = min(sigma)
    seen = {start}
    stack = [start]
    while stack:
        for x in g.neighbors_of(stack.pop()):
            if x in sigma and x not in seen:
                seen.add(x)
                stack.append(x)
    return seen == sigma


def is_complete(g: ChainGraph, sigma) -> bool:
    return all(g.adjacent(v, w) for v, w in itertools.combinations(sorted(sigma), 2))


def subsets_in_order(tau, nonempty=True):
    """All subsets of ``tau`` ordered by size, then lexicographically."""
    items = sorted(tau)
    start = 1 if nonempty else 0
    for r in range(start, len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield frozenset(combo)


def _check_cap(tau, cap):
    if len(tau) > cap:
        raise CapExceededError(f"component of size {len(tau)} exceeds the enumeration cap {cap}",
                               size=len(tau), cap=cap)


def connected_sets(g: ChainGraph, tau, cap: int = DEFAULT_COMPONENT_CAP) -> list:
    tau = vset(tau)
    _check_vertices(g, tau)
    _check_cap(tau, cap)
    return [s for s in subsets_in_order(tau) if is_connected(g, s)]


def maximal_connected_partition(g: ChainGraph, delta) -> list:
    """Split ``delta`` into its inclusion-maximal connected subsets."""
    delta = vset(delta)
    if not delta:
        raise GraphError("cannot partition the empty set")
    _check_vertices(g, delta)
    roots = {g._component_of[v] for v in delta}
    if len(roots) > 1:
        raise GraphError(f"{sorted(delta)} spans several chain components")
    blocks = []
    left = set(delta)
    while left:
        start = min(left)
        block = {start}
        stack = [start]
        while stack:
            for x in g.neighbors_of(stack.pop()):
                if x in left and x not in block:
                    block.add(x)
                    stack.append(x)
        left -= block
        blocks.append(frozenset(block))
    return sorted(blocks, key=min)


# -- graph file format ------------------------------------------------------

_EDGE_RE = re.compile(r"^(\d+)\s*(->|--)\s*(\d+)$")


def parse_graph(text: str) -> ChainGraph:
    """Parse the line-oriented graph format.

    Lines hold ``v -> w``, ``v -- w`` or ``states v=d ...``; ``#`` starts a
    comment. A lone integer declares an isolated vertex.
    """
    levels = {}
    vertices = set()
    edges = {}  # unordered pair -> (op, line, tail)
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("states"):
            for tok in line[len("states"):].split():
                m = re.fullmatch(r"(\d+)=(\d+)", tok)
                if not m:
                    raise ParseError(f"bad state declaration {tok!r}", line=lineno)
                v, d = int(m.group(1)), int(m.group(2))
                if d < 2:
                    raise ParseError(f"vertex {v} declares {d} levels; need at least 2",
                                     line=lineno)
                levels[v] = d
            continue
        if re.fullmatch(r"\d+", line):
            vertices.add(int(line))
            continue
        m = _EDGE_RE.match(re.sub(r"\s+", " ", line))
        if not m:
            raise ParseError(f"cannot parse {raw.strip()!r}", line=lineno)
        v, op, w = int(m.group(1)), m.group(2), int(m.group(3))
        if v == w:
            raise ParseError(f"self-loop at vertex {v}", line=lineno)
        pair = (min(v, w), max(v, w))
        if pair in edges:
            prev_op, prev_line, prev_tail = edges[pair]
            if op == "->" and prev_op == "->" and prev_tail != v:
                raise ParseError(f"edges {w} -> {v} and {v} -> {w} conflict; an undirected "
                                 f"edge is written {pair[0]} -- {pair[1]}", line=lineno)
            raise ParseError(f"pair {v},{w} already declared on line {prev_line}", line=lineno)
        edges[pair] = (op, lineno, v)
    directed = [(t, pair[0] + pair[1] - t) for pair, (op, _, t) in edges.items() if op == "->"]
    undirected = [pair for pair, (op, _, _) in edges.items() if op == "--"]
    return ChainGraph(vertices | set(levels), directed, undirected, levels)


def read_graph(path) -> ChainGraph:
    with open(path, encoding="utf-8") as fh:
        return parse_graph(fh.read())
