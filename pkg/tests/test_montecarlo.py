import math

import numpy as np
import pytest

from conftest import random_spd
from gwishart import graph as gr
from gwishart.errors import DegenerateWeights, DomainError
from gwishart.evaluators import WishartSpec, log_c_from_i, log_constant
from gwishart.graph import Graph
from gwishart.montecarlo import BLOCK, McConfig, mc_log_constant, mc_log_weights, mc_replicate_study


def exact_c(g, delta, d=None):
    return log_c_from_i(log_constant(g, WishartSpec.from_delta(delta, d)).log_value, g, delta)


def test_same_seed_same_estimate():
    g = gr.cycle(5)
    a = mc_log_constant(g, 3.0, np.eye(5), McConfig(5000, 42))
    b = mc_log_constant(g, 3.0, np.eye(5), McConfig(5000, 42))
    assert a == b


def test_different_seeds_differ():
    g = gr.cycle(5)
    a = mc_log_constant(g, 3.0, np.eye(5), McConfig(5000, 1))
    b = mc_log_constant(g, 3.0, np.eye(5), McConfig(5000, 2))
    assert a.log_value != b.log_value


def test_blocks_are_prefix_stable():
    # whole blocks do not depend on how many samples follow
    g = gr.cycle(4)
    short, _ = mc_log_weights(g, 3.0, np.eye(4), BLOCK, 9)
    long, _ = mc_log_weights(g, 3.0, np.eye(4), 2 * BLOCK + 7, 9)
    np.testing.assert_array_equal(short, long[:BLOCK])


def test_complete_graph_weights_are_constant():
    g = Graph.complete(4)
    est = mc_log_constant(g, 3.0, np.eye(4), McConfig(200, 0))
    assert est.se == 0.0
    assert est.log_value == pytest.approx(exact_c(g, 3.0), rel=1e-12)


def test_chordal_general_scale_within_three_se():
    rng = np.random.default_rng(4)
    g = gr.chordal_completion(gr.cycle(6)).completed
    perm = [3, 0, 5, 1, 4, 2]
    g = Graph.from_edges(6, [(perm[u], perm[v]) for u, v in g.edges])
    d = random_spd(rng, 6)
    est = mc_log_constant(g, 4.0, d, McConfig(20000, 5))
    assert abs(est.log_value - exact_c(g, 4.0, d)) <= 3 * est.se


@pytest.mark.parametrize("g", [gr.cycle(4), gr.cycle(5), gr.turan(3)])
def test_non_chordal_within_three_se(g):
    est = mc_log_constant(g, 5.0, np.eye(g.n), McConfig(40000, 7))
    assert abs(est.log_value - exact_c(g, 5.0)) <= 3 * est.se


def test_spread_shrinks_like_root_n():
    g = gr.cycle(5)
    small = mc_replicate_study(g, 3.0, np.eye(5), McConfig(500, 0, 60)).summary()["sd"]
    large = mc_replicate_study(g, 3.0, np.eye(5), McConfig(1000, 1000, 60)).summary()["sd"]
    assert 1.2 <= small / large <= 1.7


def test_reported_se_matches_spread():
    g = gr.cycle(5)
    study = mc_replicate_study(g, 3.0, np.eye(5), McConfig(2000, 0, 80))
    mean_se = np.mean([r[2] for r in study.rows])
    assert 0.6 <= study.summary()["sd"] / mean_se <= 1.6


def test_study_csv_layout():
    g = gr.cycle(4)
    study = mc_replicate_study(g, 3.0, np.eye(4), McConfig(300, 10, 4))
    text = study.to_csv(exact=1.5)
    lines = text.splitlines()
    assert lines[0] == "seed,log_estimate,se"
    assert [int(x.split(",")[0]) for x in lines[1:5]] == [10, 11, 12, 13]
    assert lines[5] == ""
    assert lines[6] == "min,max,sd,mean,exact"
    vals = [float(x) for x in lines[7].split(",")]
    assert vals[0] <= vals[3] <= vals[1] and vals[4] == 1.5


def test_single_seed_study():
    g = gr.cycle(4)
    study = mc_replicate_study(g, 3.0, np.eye(4), McConfig(300, 0, 1))
    assert study.summary()["sd"] == 0.0
    pooled, se = study.pooled()
    assert pooled == study.rows[0][1] and se == study.rows[0][2]
    assert "exact" not in study.to_csv()


def test_pooled_estimate_is_log_mean():
    g = gr.cycle(4)
    study = mc_replicate_study(g, 3.0, np.eye(4), McConfig(300, 0, 5))
    est = study.estimates
    assert study.pooled()[0] == pytest.approx(math.log(np.mean(np.exp(est))), abs=1e-12)


def test_degenerate_weights_warn():
    with pytest.warns(DegenerateWeights):
        mc_log_constant(gr.cycle(6), 3.0, np.eye(6), McConfig(5, 0))


def test_validation():
    with pytest.raises(ValueError):
        McConfig(0)
    with pytest.raises(ValueError):
        McConfig(10, 0, 0)
    with pytest.raises(DomainError):
        mc_log_constant(gr.cycle(4), 0.0, np.eye(4))
    with pytest.raises(DomainError):
        mc_log_constant(gr.cycle(4), 3.0, np.eye(5))
