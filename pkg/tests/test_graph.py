import itertools
import json
from collections import Counter

import networkx as nx
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import has_clique_separator, to_nx
from gwishart import graph as gr
from gwishart.errors import NotChordal
from gwishart.graph import ChordalCompletion, Graph


@st.composite
def graphs(draw, min_n=1, max_n=9):
    n = draw(st.integers(min_n, max_n))
    pairs = list(itertools.combinations(range(n), 2))
    mask = draw(st.lists(st.booleans(), min_size=len(pairs), max_size=len(pairs)))
    return Graph.from_edges(n, [p for p, keep in zip(pairs, mask) if keep])


# --- Graph type -------------------------------------------------------------

def test_graph_rejects_self_loops_and_bad_edges():
    with pytest.raises(ValueError):
        Graph.from_edges(3, [(1, 1)])
    with pytest.raises(ValueError):
        Graph(3, frozenset({(0, 3)}))
    with pytest.raises(ValueError):
        Graph(3, frozenset({(2, 1)}))


def test_graph_deduplicates_unordered_pairs():
    g = Graph.from_edges(3, [(0, 1), (1, 0), (2, 1)])
    assert g.edges == frozenset({(0, 1), (1, 2)})


def test_graph_json_round_trip():
    g = gr.gear(3)
    back = json.loads(json.dumps(g.to_json()))
    assert Graph.from_edges(back["n"], back["edges"]) == g


@given(graphs())
def test_complement_and_non_edges_partition_pairs(g):
    assert g.edges | g.complement().edges == Graph.complete(g.n).edges
    assert not (g.edges & set(g.non_edges()))


# --- chordality ----------------------------------------------------------

def test_mcs_order_complete_graph_is_chordal():
    order, chordal = gr.mcs_order(Graph.complete(4))
    assert sorted(order) == [0, 1, 2, 3] and chordal


def test_mcs_order_four_cycle_is_not_chordal():
    assert not gr.mcs_order(gr.cycle(4))[1]


def test_mcs_order_c6_complement_is_not_chordal():
    assert not gr.mcs_order(gr.c6_complement())[1]


def test_mcs_order_empty_graph():
    assert gr.mcs_order(Graph.empty(0)) == ([], True)


@given(graphs())
def test_chordality_matches_networkx(g):
    assert gr.is_chordal(g) == nx.is_chordal(to_nx(g))


# --- completions ------------------------------------------------------------

@pytest.mark.parametrize("heuristic", ["greedy_min_fill", "mcs_fill"])
def test_completion_of_chordal_graph_adds_nothing(heuristic):
    g = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3), (0, 2)])
    assert gr.chordal_completion(g, heuristic).fill_edges == ()


def test_six_cycle_greedy_completion_is_a_fan():
    cc = gr.chordal_completion(gr.cycle(6), "greedy_min_fill")
    assert cc.tau == 3
    common = set.intersection(*(set(e) for e in cc.fill_edges))
    assert len(common) == 1


def test_four_cycle_needs_exactly_one_fill():
    # brute force: neither diagonal alone leaves a chordless 4-cycle
    c4 = gr.cycle(4)
    assert all(nx.is_chordal(to_nx(c4.with_edges([e]))) for e in c4.non_edges())
    assert gr.chordal_completion(c4).tau == 1


@given(graphs(), st.sampled_from(["greedy_min_fill", "mcs_fill"]))
def test_completion_is_chordal_and_disjoint(g, heuristic):
    cc = gr.chordal_completion(g, heuristic)
    assert gr.is_chordal(cc.completed)
    assert nx.is_chordal(to_nx(cc.completed))
    assert not (set(cc.fill_edges) & g.edges)
    assert cc.completed == g.with_edges(cc.fill_edges)


@given(graphs(max_n=8))
def test_mcs_fill_is_minimal(g):
    # no single fill edge of an MCS-M triangulation can be dropped
    cc = gr.chordal_completion(g, "mcs_fill")
    for e in cc.fill_edges:
        assert not gr.is_chordal(cc.completed.without_edges([e]))


# --- clique sequences -------------------------------------------------------

def test_clique_sequence_of_complete_graph():
    cs = gr.clique_sequence(Graph.complete(5))
    assert cs.cliques == (frozenset(range(5)),) and cs.separators == ()


def test_clique_sequence_of_two_clique_example():
    _, cc = gr.two_clique_example()
    cs = gr.clique_sequence(cc.completed)
    assert set(cs.cliques) == {frozenset({0, 1, 2, 6, 7}), frozenset(range(6))}
    assert cs.separators == (frozenset({0, 1, 2}),)


def test_clique_sequence_of_fan_completion():
    cc = gr.chordal_completion(gr.cycle(6))
    cs = gr.clique_sequence(cc.completed)
    assert len(cs.cliques) == 4 and all(len(c) == 3 for c in cs.cliques)
    assert len(cs.separators) == 3 and all(len(s) == 2 for s in cs.separators)


def test_clique_sequence_rejects_non_chordal():
    with pytest.raises(NotChordal):
        gr.clique_sequence(gr.cycle(5))


@given(graphs())
def test_clique_sequence_matches_networkx_cliques(g):
    h = gr.chordal_completion(g).completed
    cs = gr.clique_sequence(h)
    assert set(cs.cliques) == {frozenset(c) for c in nx.find_cliques(to_nx(h))}
    cs.check(h.n)
    assert all(h.is_clique(s) for s in cs.separators)
    assert cs.size_balance() == h.n


@given(graphs(), st.randoms(use_true_random=False))
def test_separator_multiset_independent_of_tie_break(g, rnd):
    h = gr.chordal_completion(g).completed
    order = list(range(h.n))
    rnd.shuffle(order)
    a = Counter(gr.clique_sequence(h).separators)
    b = Counter(gr.clique_sequence(h, tie_break=order).separators)
    assert a == b


# --- prime decomposition ---------------------------------------------------

@pytest.mark.parametrize("m", [2, 3, 5])
def test_ladder_splits_into_four_cycles(m):
    cs = gr.prime_decomposition(gr.grid(2, m))
    assert len(cs.cliques) == m - 1
    for comp in cs.cliques:
        sub, _ = gr.grid(2, m).induced(comp)
        assert nx.is_isomorphic(to_nx(sub), nx.cycle_graph(4))


def test_prime_graph_is_its_own_component():
    cs = gr.prime_decomposition(gr.cycle(5))
    assert cs.cliques == (frozenset(range(5)),)


def test_path_splits_at_middle_vertex():
    cs = gr.prime_decomposition(Graph.from_edges(3, [(0, 1), (1, 2)]))
    assert set(cs.cliques) == {frozenset({0, 1}), frozenset({1, 2})}
    assert cs.separators == (frozenset({1}),)


@given(graphs(max_n=8))
def test_prime_components_are_prime(g):
    cs = gr.prime_decomposition(g)
    cs.check(g.n)
    assert cs.size_balance() == g.n
    for s in cs.separators:
        assert g.is_clique(s)
    for comp in cs.cliques:
        sub, _ = g.induced(comp)
        assert not has_clique_separator(to_nx(sub))


def test_corpus_has_24_prime_graphs(corpus):
    assert len(corpus) == 24
    assert all(gr.is_prime(g) for g in corpus)


# --- missing-edge structure -------------------------------------------------

def _check_partition(cc, groups):
    assert sorted(e for grp in groups for e in grp) == sorted(cc.fill_edges)
    for a, b in itertools.combinations(groups, 2):
        va = {x for e in a for x in e}
        vb = {x for e in b for x in e}
        common = va & vb
        assert len(common) <= 1
        if common:
            assert not any(cc.completed.has_edge(x, y) for x in va - vb for y in vb - va)


def test_partition_of_two_clique_example():
    _, cc = gr.two_clique_example()
    groups = gr.partition_missing_edges(cc)
    assert sorted(map(sorted, groups)) == [[(0, 5), (4, 5)], [(0, 7), (6, 7)], [(1, 2), (2, 3)]]
    _check_partition(cc, groups)


def test_partition_fill_in_one():
    cc = gr.chordal_completion(gr.cycle(4))
    assert gr.partition_missing_edges(cc) == [list(cc.fill_edges)]


def test_partition_turan():
    # completion to K_6: every fill edge is its own group
    g = gr.turan(3)
    cc = ChordalCompletion.from_fill(g, g.non_edges())
    groups = gr.partition_missing_edges(cc)
    assert len(groups) == 3 and all(len(grp) == 1 for grp in groups)


@given(graphs(max_n=8))
def test_partition_is_valid(g):
    cc = gr.chordal_completion(g)
    _check_partition(cc, gr.partition_missing_edges(cc))


def test_star_families_complete_clique_is_empty():
    assert gr.star_families(Graph.complete(4), range(4)) == []


def test_star_families_rejects_path_complement():
    p4 = Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])
    assert gr.star_families(p4.complement(), range(4)) is None


def test_star_families_two_stars():
    g = Graph.complete(7).without_edges([(0, 1), (0, 2), (0, 3), (4, 5)])
    fams = gr.star_families(g, range(7))
    assert sorted(map(sorted, fams)) == [[0, 1, 2, 3], [4, 5]]


@given(graphs(max_n=7))
def test_star_families_agree_with_brute_force(g):
    comp = to_nx(g.complement())
    comp.remove_nodes_from([v for v in list(comp) if comp.degree(v) == 0])
    expect_star = all(
        nx.is_tree(comp.subgraph(c)) and max(d for _, d in comp.subgraph(c).degree()) == len(c) - 1
        for c in nx.connected_components(comp)
    )
    fams = gr.star_families(g, range(g.n))
    assert (fams is not None) == expect_star
    if fams is not None:
        assert {frozenset(c) for c in nx.connected_components(comp)} == set(fams)


# --- classification --------------------------------------------------------

def _common_in(g, u, v):
    return len(set(g.adj[u]) & set(g.adj[v]))


def test_five_cycle_two_fills():
    cc, p = gr.classify_graph(gr.cycle(5))
    assert isinstance(p, gr.TwoFillsTriangle)
    assert (p.w, p.w1, p.w2) == (0, 1, 1)
    # recount: w1 joins v1 with the shared vertex v3, w2 joins v2 with v3
    g = cc.base
    assert p.w == _common_in(g, p.v1, p.v2) and g.has_edge(p.v1, p.v2)


def test_turan_with_two_parts_is_a_four_cycle():
    _, p = gr.classify_graph(gr.turan(2))
    assert isinstance(p, gr.FillIn1) and p.w == 2


@pytest.mark.parametrize("k", [3, 4])
def test_turan_graph(k):
    cc, p = gr.classify_graph(gr.turan(k))
    assert isinstance(p, gr.Turan) and p.n == k
    for a, b in p.pairs:
        assert _common_in(cc.base, a, b) == 2 * k - 2


def test_gmk_recognised():
    _, p = gr.classify_graph(gr.gmk(4, (1, 1, 1)))
    assert isinstance(p, gr.Gmk) and p.m == 4 and p.ks == (1, 1, 1)


def test_gmk_with_two_blocks_is_two_fills():
    _, p = gr.classify_graph(gr.gmk(4, (1, 1)))
    assert isinstance(p, gr.TwoFillsTriangle)


def test_gear_recognised():
    _, p = gr.classify_graph(gr.gear(4))
    assert isinstance(p, gr.Gear) and p.m == 4


def test_three_three_bipartite_is_kpartite():
    _, p = gr.classify_graph(gr.complete_multipartite([3, 3]))
    assert isinstance(p, gr.KPartite) and sorted(p.sizes) == [3, 3]


def test_corpus_classification(corpus):
    names = Counter(gr.classify_graph(g)[1].name for g in corpus)
    b1 = names["FillIn1"] + names["DisjointFills"] + names["Chordal"] + names["Turan"]
    assert b1 == 14
    assert names["TwoFillsTriangle"] == 7
    assert names["KPartite"] == 1
    assert names["Starry"] + names["GeneralSmallTau"] == 2
    assert names["Intractable"] == 0


def test_corpus_witnesses_recomputed_from_adjacency(corpus):
    for g in corpus:
        cc, p = gr.classify_graph(g)
        assert gr.is_chordal(cc.completed)
        if isinstance(p, gr.FillIn1):
            assert p.w == _common_in(cc.completed, *p.edge)
        elif isinstance(p, gr.DisjointFills):
            assert dict(p.w) == {e: _common_in(cc.completed, *e) for e in cc.fill_edges}
        elif isinstance(p, gr.TwoFillsTriangle):
            assert {tuple(sorted((p.v1, p.v3))), tuple(sorted((p.v2, p.v3)))} == set(cc.fill_edges)
            assert cc.base.has_edge(p.v1, p.v2)


def test_corpus_cycle_and_complement_are_the_two_hard_graphs(corpus):
    hard = [g for g in corpus
            if gr.classify_graph(g)[1].name in ("Starry", "GeneralSmallTau")]
    assert len(hard) == 2
    shapes = {tuple(sorted(d for _, d in to_nx(g).degree())) for g in hard}
    assert shapes == {(2,) * 6, (3,) * 6}


def test_classify_chordal():
    g = Graph.from_edges(3, [(0, 1), (1, 2)])
    assert isinstance(gr.classify(ChordalCompletion(g, (), g)), gr.Chordal)


def test_six_cycle_is_starry():
    _, p = gr.classify_graph(gr.cycle(6))
    assert isinstance(p, gr.Starry)


def test_complement_of_six_cycle_is_small_tau():
    _, p = gr.classify_graph(gr.c6_complement())
    assert isinstance(p, gr.GeneralSmallTau) and p.tau == 3


@given(graphs(min_n=3, max_n=7))
def test_classify_is_total_and_completion_valid(g):
    cc, p = gr.classify_graph(g)
    assert gr.is_chordal(cc.completed)
    assert isinstance(p, gr.FillPattern)
