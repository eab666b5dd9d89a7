import itertools

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from chaingraph.errors import CapExceededError, GraphError, ParseError, SemiDirectedCycleError
from chaingraph.graph import (
    ChainGraph,
    chain_components,
    connected_sets,
    dag_relations,
    is_complete,
    maximal_connected_partition,
    neighborhoods,
    parse_graph,
)
from helpers import DATA, has_semi_directed_cycle_brute, load, random_chain_graph


def test_parse_fig3_file():
    g = parse_graph("1 -> 3\n2 -- 3\n3 -- 4\n")
    assert [sorted(c) for c in chain_components(g).components] == [[1], [2, 3, 4]]
    assert g.levels == {1: 2, 2: 2, 3: 2, 4: 2}


def test_parse_states_comments_whitespace():
    g = parse_graph("# header\nstates 1=3  2=2\n  1->2   # trailing\n\n2 --3\n")
    assert g.levels == {1: 3, 2: 2, 3: 2}
    assert g.directed == {(1, 2)}
    assert g.undirected == {(2, 3)}


@pytest.mark.parametrize("text, fragment", [
    ("1 -> 2\n2 -> 1\n", "conflict"),
    ("1 -> 2\n1 -> 2\n", "already declared"),
    ("1 -- 2\n2 -> 1\n", "already declared"),
    ("1 => 2\n", "cannot parse"),
    ("states 1=1\n1 -- 2\n", "at least 2"),
    ("3 -> 3\n", "self-loop"),
])
def test_parse_errors_carry_line(text, fragment):
    with pytest.raises(ParseError) as exc:
        parse_graph(text)
    assert fragment in str(exc.value)
    assert exc.value.details["line"] is not None


def test_fig1b_rejected_with_cycle():
    with pytest.raises(SemiDirectedCycleError) as exc:
        load("fig1b")
    cyc = exc.value.cycle
    assert sorted(cyc) == [1, 2, 3]


def test_reported_cycle_is_semi_directed():
    g_text = "1 -> 2\n2 -- 3\n3 -> 4\n4 -- 5\n5 -> 1\n"
    with pytest.raises(SemiDirectedCycleError) as exc:
        parse_graph(g_text)
    cyc = exc.value.cycle
    directed = {(1, 2), (3, 4), (5, 1)}
    undirected = {frozenset(e) for e in [(2, 3), (4, 5)]}
    closed = cyc + cyc[:1]
    steps = list(zip(closed, closed[1:]))
    assert all((a, b) in directed or frozenset((a, b)) in undirected for a, b in steps)
    assert any((a, b) in directed for a, b in steps)


def test_directed_edge_inside_component_is_cycle():
    with pytest.raises(SemiDirectedCycleError):
        ChainGraph([1, 2, 3], [(1, 3)], [(1, 2), (2, 3)])


def test_fig1a_components_and_dag(fig1a):
    dag = chain_components(fig1a)
    assert [sorted(c) for c in dag.components] == [[1], [2], [3, 4], [5, 6, 7, 8]]
    assert dag.dag_edges == {(0, 2), (1, 2), (2, 3)}
    assert list(dag.topological_order) == [0, 1, 2, 3]


def test_single_undirected_component():
    g = ChainGraph([1, 2, 3], [], [(1, 2), (2, 3)])
    dag = chain_components(g)
    assert dag.components == (frozenset({1, 2, 3}),)
    assert not dag.dag_edges


def test_only_directed_edges_give_singletons():
    g = ChainGraph([1, 2, 3], [(1, 2), (2, 3), (1, 3)])
    assert all(len(c) == 1 for c in chain_components(g).components)


def test_neighborhoods(fig1a):
    assert neighborhoods(fig1a, {5, 7}) == ({3}, {6}, {5, 6, 7})
    assert neighborhoods(fig1a, set()) == (set(), set(), set())
    pa, nb, big = neighborhoods(fig1a, fig1a.vertices)
    assert pa == set() and nb == set() and big == set(fig1a.vertices)
    with pytest.raises(GraphError):
        neighborhoods(fig1a, {99})


def test_dag_relations(fig1a):
    dag = chain_components(fig1a)
    assert dag_relations(dag, {5, 6, 7, 8}) == ({3, 4}, {1, 2, 3, 4})
    assert dag_relations(dag, {1}) == (set(), {2})
    single = chain_components(ChainGraph([1, 2], [], [(1, 2)]))
    assert dag_relations(single, {1, 2}) == (set(), set())
    with pytest.raises(GraphError):
        dag_relations(dag, {5, 6})


def _connected_brute(g, tau):
    und = nx.Graph()
    und.add_nodes_from(tau)
    und.add_edges_from(e for e in g.undirected if set(e) <= set(tau))
    out = []
    for r in range(1, len(tau) + 1):
        for combo in itertools.combinations(sorted(tau), r):
            if nx.is_connected(und.subgraph(combo)):
                out.append(frozenset(combo))
    return out


def test_connected_sets_path():
    g = ChainGraph([2, 3, 4], [], [(2, 3), (3, 4)])
    sets = connected_sets(g, {2, 3, 4})
    assert sets == [frozenset(s) for s in ({2}, {3}, {4}, {2, 3}, {3, 4}, {2, 3, 4})]
    assert sets == _connected_brute(g, {2, 3, 4})


def test_connected_sets_triangle_and_singleton():
    g = ChainGraph([1, 2, 3], [], [(1, 2), (2, 3), (1, 3)])
    assert len(connected_sets(g, {1, 2, 3})) == 7
    assert connected_sets(ChainGraph([1]), {1}) == [frozenset({1})]


def test_connected_sets_cap():
    g = ChainGraph(range(1, 6), [], [(k, k + 1) for k in range(1, 5)])
    with pytest.raises(CapExceededError):
        connected_sets(g, set(range(1, 6)), cap=4)


def test_maximal_connected_partition(fig1a):
    g = ChainGraph([2, 3, 4], [], [(2, 3), (3, 4)])
    assert maximal_connected_partition(g, {2, 4}) == [{2}, {4}]
    assert maximal_connected_partition(g, {2, 3}) == [{2, 3}]
    assert not fig1a.adjacent(5, 8)
    assert maximal_connected_partition(fig1a, {5, 8}) == [{5}, {8}]
    assert maximal_connected_partition(fig1a, {5, 7, 8}) == [{5}, {7}, {8}]
    with pytest.raises(GraphError):
        maximal_connected_partition(fig1a, set())
    with pytest.raises(GraphError):
        maximal_connected_partition(fig1a, {3, 5})


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(1, 7))
def test_structural_invariants(seed, n):
    rng = np.random.default_rng(seed)
    g = random_chain_graph(rng, n)
    dag = chain_components(g)
    union = set().union(*dag.components)
    assert union == set(g.vertices)
    assert sum(len(c) for c in dag.components) == len(g.vertices)
    pos = {k: i for i, k in enumerate(dag.topological_order)}
    assert all(pos[a] < pos[b] for a, b in dag.dag_edges)
    for tau in dag.components:
        assert len(maximal_connected_partition(g, tau)) == 1
        sets = connected_sets(g, tau)
        assert sets == _connected_brute(g, tau)
        assert (len(sets) == 2 ** len(tau) - 1) == is_complete(g, tau)
        for sigma in itertools.chain.from_iterable(
                itertools.combinations(sorted(tau), r) for r in range(1, len(tau) + 1)):
            pa, nb, big = neighborhoods(g, sigma)
            s = set(sigma)
            assert not (pa & nb) and not (pa & s) and not (nb & s)
            assert big >= s
            blocks = maximal_connected_partition(g, sigma)
            assert set().union(*blocks) == s
            for b1, b2 in itertools.combinations(blocks, 2):
                assert not any(g.adjacent(v, w) for v in b1 for w in b2)
            assert all(len(maximal_connected_partition(g, b)) == 1 for b in blocks)


def test_validator_agrees_with_brute_force():
    rng = np.random.default_rng(2009)
    seen_cycles = 0
    for _ in range(200):
        n = int(rng.integers(2, 7))
        directed, undirected = [], []
        for v, w in itertools.combinations(range(1, n + 1), 2):
            r = rng.uniform()
            if r < 0.25:
                directed.append((v, w))
            elif r < 0.5:
                directed.append((w, v))
            elif r < 0.7:
                undirected.append((v, w))
        expected = has_semi_directed_cycle_brute(range(1, n + 1), directed, undirected)
        seen_cycles += expected
        try:
            ChainGraph(range(1, n + 1), directed, undirected)
            got = False
        except SemiDirectedCycleError:
            got = True
        assert got == expected
    assert 20 < seen_cycles < 180


def test_data_files_parse():
    for name in ("fig1a", "fig3", "gbar", "gsing"):
        load(name)
    assert (DATA / "fig1b.graph").exists()


def test_to_text_round_trip(fig1a):
    again = parse_graph(fig1a.to_text())
    assert again == fig1a and again.levels == fig1a.levels
