"""Random fixtures and brute-force oracles shared by the test modules."""

import itertools
from pathlib import Path

import numpy as np

from chaingraph.graph import ChainGraph, read_graph

DATA = Path(__file__).resolve().parent.parent / "data"

# PASS/FAIL lines of the acceptance tests, echoed in the terminal summary
ACCEPTANCE = []


def load(name):
    return read_graph(DATA / f"{name}.graph")


def random_chain_graph(rng, n_vertices, p_undirected=0.5, p_directed=0.4, max_level=2):
    """Random chain graph: vertices are split into ordered layers; undirected
    edges only inside a layer, directed edges only from earlier to later layers."""
    verts = list(range(1, n_vertices + 1))
    rng.shuffle(verts)
    layer = {v: int(rng.integers(0, max(1, n_vertices // 2) + 1)) for v in verts}
    und, dire = [], []
    for v, w in itertools.combinations(sorted(verts), 2):
        if layer[v] == layer[w]:
            if rng.uniform() < p_undirected:
                und.append((v, w))
        elif rng.uniform() < p_directed:
            dire.append((v, w) if layer[v] < layer[w] else (w, v))
    levels = {v: int(rng.integers(2, max_level + 1)) for v in verts}
    return ChainGraph(verts, dire, und, levels)


def has_semi_directed_cycle_brute(vertices, directed, undirected):
    """Enumerate simple cycles through every step allowed by the edge set."""
    step = {v: set() for v in vertices}
    kind = {}
    for v, w in directed:
        step[v].add(w)
        kind[(v, w)] = "d"
    for v, w in undirected:
        step[v].add(w)
        step[w].add(v)
        kind[(v, w)] = kind[(w, v)] = "u"

    def extend(path, directed_seen):
        last = path[-1]
        for nxt in step[last]:
            d = directed_seen or kind[(last, nxt)] == "d"
            if nxt == path[0] and len(path) >= 2 and d:
                return True
            if nxt not in path and len(path) < len(vertices):
                if extend(path + [nxt], d):
                    return True
        return False

    return any(extend([v], False) for v in vertices)


def brute_force_inverse(entries, tau, levels):
    """Conditional table from saturated parameters by the literal inclusion-exclusion sum."""
    shape = [levels[v] for v in tau]
    out = np.zeros(shape)

    def q(assign):
        if not assign:
            return 1.0
        sigma = frozenset(assign)
        key = tuple(assign[v] - 1 for v in sorted(assign))
        return float(entries[sigma][key])

    for cell in itertools.product(*[range(1, d + 1) for d in shape]):
        state = dict(zip(tau, cell))
        sigma = [v for v in tau if state[v] < levels[v]]
        rest = [v for v in tau if v not in sigma]
        total = 0.0
        for r in range(len(rest) + 1):
            for extra in itertools.combinations(rest, r):
                for js in itertools.product(*[range(1, levels[v]) for v in extra]):
                    assign = {v: state[v] for v in sigma}
                    assign.update(dict(zip(extra, js)))
                    total += (-1) ** len(extra) * q(assign)
        out[tuple(c - 1 for c in cell)] = total
    return out


def perturb(p, rng, scale=0.3):
    from chaingraph.tables import JointTable

    raw = p.probs * np.exp(scale * rng.standard_normal(p.probs.shape))
    return JointTable(p.vertices, raw / raw.sum())
