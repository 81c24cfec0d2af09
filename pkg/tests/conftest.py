import itertools
from functools import lru_cache

import networkx as nx
import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gwishart.graph import Graph

settings.register_profile(
    "repo", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def to_nx(g: Graph) -> nx.Graph:
    h = nx.Graph()
    h.add_nodes_from(range(g.n))
    h.add_edges_from(g.edges)
    return h


def has_clique_separator(h: nx.Graph) -> bool:
    """Brute force: some clique (possibly empty) whose removal disconnects h."""
    nodes = list(h.nodes)
    if not nx.is_connected(h):
        return True
    for k in range(0, len(nodes) - 1):
        for s in itertools.combinations(nodes, k):
            if any(not h.has_edge(u, v) for u, v in itertools.combinations(s, 2)):
                continue
            rest = h.subgraph(set(nodes) - set(s))
            if rest.number_of_nodes() >= 2 and not nx.is_connected(rest):
                return True
    return False


@lru_cache(maxsize=None)
def prime_corpus() -> tuple[Graph, ...]:
    """Connected six-vertex graphs without a clique separator, up to isomorphism."""
    out = []
    for h in nx.graph_atlas_g():
        if h.number_of_nodes() != 6 or not nx.is_connected(h):
            continue
        if not has_clique_separator(h):
            out.append(Graph.from_edges(6, h.edges()))
    return tuple(out)


@pytest.fixture(scope="session")
def corpus():
    return prime_corpus()


def random_spd(rng: np.random.Generator, n: int, ridge: float = 1.0) -> np.ndarray:
    a = rng.standard_normal((n, n))
    return a @ a.T / n + ridge * np.eye(n)


def random_graph(rng: np.random.Generator, n: int, p: float) -> Graph:
    return Graph.from_edges(n, [e for e in itertools.combinations(range(n), 2) if rng.random() < p])
