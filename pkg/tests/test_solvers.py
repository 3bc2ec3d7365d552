import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import enumerate_min_energy, random_potts
from tubeseg.segmentation import PottsGraph, potts_energy
from tubeseg.solvers import (
    InstanceTooLarge,
    SOLVERS,
    expansion_move,
    solve_alpha_expansion,
    solve_bruteforce,
    solve_icm,
)


class TestBruteForce:
    def test_single_node(self):
        assert solve_bruteforce(PottsGraph(1, [], []), np.array([[3.0, 1.0, 2.0]])).tolist() == [1]

    def test_separable(self):
        u = np.random.default_rng(0).random((5, 3))
        g = PottsGraph(5, [(0, 1), (2, 3)], [0.0, 0.0])
        assert np.array_equal(solve_bruteforce(g, u), u.argmin(axis=1))

    def test_lexicographic_ties(self):
        g = PottsGraph(3, [(0, 1)], [1.0])
        assert solve_bruteforce(g, np.zeros((3, 2))).tolist() == [0, 0, 0]

    @given(st.integers(0, 2**32 - 1), st.integers(1, 6), st.integers(2, 3))
    def test_matches_enumeration(self, seed, n, k):
        g, u = random_potts(np.random.default_rng(seed), n, k)
        assert potts_energy(g, u, solve_bruteforce(g, u)) == pytest.approx(enumerate_min_energy(g, u), abs=1e-9)

    def test_too_large(self):
        with pytest.raises(InstanceTooLarge):
            solve_bruteforce(PottsGraph(13, [], []), np.zeros((13, 4)))


class TestIcm:
    def test_fixed_point_at_optimum(self):
        g, u = random_potts(np.random.default_rng(1), 7, 3)
        opt = solve_bruteforce(g, u)
        assert np.array_equal(solve_icm(g, u, opt), opt)

    def test_separable_one_sweep(self):
        u = np.random.default_rng(2).random((6, 4))
        hist = []
        out = solve_icm(PottsGraph(6, [], []), u, np.zeros(6, int), hist)
        assert np.array_equal(out, u.argmin(axis=1))

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(2, 4))
    def test_moves_never_increase_energy(self, seed, n, k):
        rng = np.random.default_rng(seed)
        g, u = random_potts(rng, n, k)
        init = rng.integers(0, k, n)
        hist = [potts_energy(g, u, init)]
        out = solve_icm(g, u, init, hist)
        assert all(b < a for a, b in zip(hist, hist[1:]))
        assert enumerate_min_energy(g, u) - 1e-9 <= potts_energy(g, u, out) <= hist[0]


class TestExpansion:
    @given(st.integers(0, 2**32 - 1), st.integers(1, 9))
    def test_binary_exact(self, seed, n):
        rng = np.random.default_rng(seed)
        g, u = random_potts(rng, n, 2)
        for warm in (True, False):
            lab = solve_alpha_expansion(g, u, rng.integers(0, 2, n), warm_start=warm)
            assert potts_energy(g, u, lab) == pytest.approx(potts_energy(g, u, solve_bruteforce(g, u)), abs=1e-12)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 8), st.integers(3, 4))
    def test_cold_start_two_approximation(self, seed, n, k):
        rng = np.random.default_rng(seed)
        g, u = random_potts(rng, n, k)
        init = rng.integers(0, k, n)
        hist = [potts_energy(g, u, init)]
        lab = solve_alpha_expansion(g, u, init, hist, warm_start=False)
        e, opt = potts_energy(g, u, lab), enumerate_min_energy(g, u)
        assert all(b < a for a, b in zip(hist, hist[1:]))
        assert opt - 1e-9 <= e <= min(2 * opt + 1e-9, hist[0])

    def test_init_at_optimum(self):
        g, u = random_potts(np.random.default_rng(4), 8, 3)
        opt = solve_bruteforce(g, u)
        lab = solve_alpha_expansion(g, u, opt, warm_start=False)
        assert potts_energy(g, u, lab) == potts_energy(g, u, opt)

    @given(st.integers(0, 2**32 - 1), st.integers(1, 7), st.integers(2, 4))
    def test_single_move_is_optimal_expansion(self, seed, n, k):
        """The min-cut move equals the best labelling reachable by one alpha-expansion."""
        import itertools

        rng = np.random.default_rng(seed)
        g, u = random_potts(rng, n, k)
        labels = rng.integers(0, k, n)
        alpha = int(rng.integers(0, k))
        best = min(
            potts_energy(g, u, np.where(np.array(mask, bool), alpha, labels))
            for mask in itertools.product([0, 1], repeat=n)
        )
        assert potts_energy(g, u, expansion_move(g, u, labels, alpha)) == pytest.approx(best, abs=1e-9)


def test_registry():
    assert set(SOLVERS) == {"expansion", "icm", "brute"}
