"""
Unit tests for tree statistics
Degrees, profiles, PageRank, fringe shapes, tail fits
"""
import sys
from pathlib import Path

import numpy as np
import pytest

# Add parent directory to path
sys.path.insert(0, str(Path(__file__).parent.parent))

from coevotree.errors import DegenerateSample, MissingBirthTimes, ParamOutOfRange, PreconditionViolated
from coevotree.observables import (
    OVERFLOW,
    SMALL_TREE_CODES,
    FringeHistogram,
    canonical_code,
    ccdf_table,
    degree_histogram,
    degrees,
    depth_profile,
    fringe_histogram,
    height,
    hill_sweep,
    martingale_w,
    pagerank_bruteforce,
    pagerank_scores,
    root_degree,
    subtree_sizes,
    tail_exponent,
    to_networkx,
    vertex_degree,
    weighted_profile,
)
from coevotree.simulator import GrowthConfig, grow
from coevotree.streams import seeded_rng
from coevotree.tree import ROOT, TreeState


@pytest.fixture(scope="module")
def shapes():
    """Hand-built trees"""
    return {
        "single": TreeState.from_parents([ROOT]),
        "path": TreeState.from_parents([ROOT, 0, 1]),
        "star": TreeState.from_parents([ROOT, 0, 0, 0]),
        "grown": grow(GrowthConfig(pmf="geometric:0.5", n=300, seed=1), seeded_rng(1)),
    }


class TestDegrees:
    """Degrees and depth profiles"""

    def test_path(self, shapes):
        tree = shapes["path"]
        assert list(degrees(tree)) == [1, 2, 1]
        assert list(degree_histogram(tree)) == [0, 2, 1]
        assert root_degree(tree) == 1
        assert height(tree) == 2

    def test_star(self, shapes):
        tree = shapes["star"]
        assert root_degree(tree) == 3
        assert vertex_degree(tree, 0) == 3
        assert vertex_degree(tree, 2) == 1
        with pytest.raises(ParamOutOfRange):
            vertex_degree(tree, 4)

    def test_degree_sum(self, shapes):
        tree = shapes["grown"]
        assert int(degrees(tree).sum()) == 2 * (tree.n - 1), "each edge counted twice"

    def test_profile(self, shapes):
        profile = depth_profile(shapes["path"])
        assert list(profile.counts) == [1, 1, 1]
        assert profile.n == 3
        assert abs(weighted_profile(shapes["path"], 2.0) - 0.75) < 1e-15

    def test_networkx_export(self, shapes):
        graph = to_networkx(shapes["star"])
        assert sorted(graph.edges()) == [(0, 1), (0, 2), (0, 3)]
        assert graph.nodes[2]["depth"] == 1

    def test_single_vertex(self, shapes):
        tree = shapes["single"]
        assert height(tree) == 0
        assert root_degree(tree) == 0
        assert weighted_profile(tree, 0.5) == 0.0


class TestPageRank:
    """PageRank recursion against the path-counting oracle"""

    def test_path_values(self, shapes):
        pr = pagerank_scores(shapes["path"], 0.5)
        assert np.allclose(pr.scores, [0.875, 0.75, 0.5])
        assert abs(pr.adjusted_total() - 3.0) < 1e-12
        assert abs(pr.stationary().sum() - 1.0) < 1e-12

    @pytest.mark.parametrize("c", [0.2, 0.5, 0.85])
    def test_matches_bruteforce(self, shapes, c):
        tree = shapes["grown"]
        fast = pagerank_scores(tree, c).scores
        slow = pagerank_bruteforce(tree, c).scores
        assert np.max(np.abs(fast - slow)) < 1e-9

    def test_adjusted_total_is_n(self, shapes):
        tree = shapes["grown"]
        assert abs(pagerank_scores(tree, 0.7).adjusted_total() - tree.n) < 1e-9

    def test_damping_range(self, shapes):
        with pytest.raises(ParamOutOfRange):
            pagerank_scores(shapes["path"], 1.0)


class TestFringe:
    """AHU codes and fringe histograms"""

    def test_small_codes(self):
        assert SMALL_TREE_CODES["singleton"] == "()"
        assert canonical_code(TreeState.from_parents([ROOT, 0])) == SMALL_TREE_CODES["edge"]
        assert canonical_code(TreeState.from_parents([ROOT, 0, 1])) == SMALL_TREE_CODES["path"]
        assert canonical_code(TreeState.from_parents([ROOT, 0, 0])) == SMALL_TREE_CODES["cherry"]

    def test_code_ignores_child_order(self):
        a = TreeState.from_parents([ROOT, 0, 0, 1])
        b = TreeState.from_parents([ROOT, 0, 0, 2])
        assert canonical_code(a) == canonical_code(b)

    def test_subtree_sizes(self, shapes):
        assert list(subtree_sizes(shapes["path"])) == [3, 2, 1]
        assert subtree_sizes(shapes["grown"])[0] == shapes["grown"].n

    def test_star_histogram(self, shapes):
        histogram = fringe_histogram(shapes["star"], max_size=4)
        assert histogram.counts == {"()": 3, "(()()())": 1}
        assert histogram.overflow == 0
        assert fringe_histogram(shapes["star"], max_size=3).overflow == 1

    def test_histogram_covers_every_vertex(self, shapes):
        tree = shapes["grown"]
        histogram = fringe_histogram(tree, max_size=5)
        assert histogram.total == tree.n

    def test_extended_path(self, shapes):
        histogram = fringe_histogram(shapes["path"], max_size=4, extended_k=1)
        assert histogram.extended == {
            ("()", "()"): 1,
            ("(())", "()"): 1,
            ("((()))", ""): 1,
        }

    def test_extended_overflow_marker(self, shapes):
        histogram = fringe_histogram(shapes["star"], max_size=1, extended_k=1)
        assert histogram.extended[("()", OVERFLOW)] == 3

    def test_limits(self, shapes):
        with pytest.raises(ParamOutOfRange):
            fringe_histogram(shapes["path"], max_size=13)
        with pytest.raises(ParamOutOfRange):
            fringe_histogram(shapes["path"], extended_k=4)

    def test_from_samples_and_distance(self, shapes):
        samples = [shapes["single"], shapes["path"], shapes["star"]]
        histogram = FringeHistogram.from_samples(samples, max_size=3)
        assert histogram.overflow == 1
        assert histogram.proportion("()") == pytest.approx(1.0 / 3.0)
        assert histogram.total_variation(histogram) == 0.0


class TestTailFits:
    """Hill and log-log estimators on Pareto samples"""

    @pytest.fixture(scope="class")
    def pareto(self):
        return seeded_rng(31).pareto(2.0, 40_000) + 1.0

    def test_hill(self, pareto):
        fit = tail_exponent(pareto, "hill")
        assert fit.method == "Hill"
        assert fit.m == int(len(pareto) ** (2.0 / 3.0))
        assert abs(fit.estimate - 2.0) < 0.2, f"Hill estimate {fit.estimate}"

    def test_loglog(self, pareto):
        fit = tail_exponent(pareto, "loglog")
        assert fit.method == "LogLogLS"
        assert abs(fit.estimate - 2.0) < 0.2, f"LogLogLS estimate {fit.estimate}"

    def test_sweep(self, pareto):
        assert [fit.m for fit in hill_sweep(pareto, m=400)] == [200, 400, 800]

    def test_bad_samples(self):
        with pytest.raises(PreconditionViolated):
            tail_exponent(np.arange(1, 100), "hill")
        with pytest.raises(DegenerateSample):
            tail_exponent(np.ones(2000), "hill")
        with pytest.raises(PreconditionViolated):
            tail_exponent([1.0, -2.0, 3.0])
        with pytest.raises(ParamOutOfRange):
            tail_exponent(np.arange(1, 2000), "moments")

    def test_ccdf_table(self):
        assert ccdf_table([1, 1, 2, 3]) == [(1, 2, 1.0), (2, 1, 0.5), (3, 1, 0.25)]


class TestMartingale:
    """n e^{-T} on continuous trees"""

    def test_needs_birth_times(self, shapes):
        with pytest.raises(MissingBirthTimes):
            martingale_w(shapes["grown"])

    def test_value(self):
        tree = grow(GrowthConfig(pmf="geometric:0.5", horizon=4.0, variant="continuous", seed=2), seeded_rng(2))
        w = martingale_w(tree)
        assert w > 0
        assert abs(w - tree.n * np.exp(-tree.birth_time[-1])) < 1e-12


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
