import itertools
import math

import numpy as np
import pytest

from conftest import set_partitions
from ssdbayes.clustering import (
    binder_loss,
    canonicalize,
    expected_loss,
    greedy_point_estimate,
    psm,
    vi_loss,
)


def random_partition(rng, n, max_k=None):
    k = int(rng.integers(1, (max_k or n) + 1))
    labels = rng.integers(0, k, size=n)
    return canonicalize(labels)


def binder_bruteforce(a, b):
    n = len(a)
    count = 0
    for i, j in itertools.combinations(range(n), 2):
        count += (a[i] == a[j]) != (b[i] == b[j])
    return float(count)


class TestCanonicalize:
    def test_first_appearance_order(self):
        assert canonicalize([5, 5, 2, 5, 9]).tolist() == [0, 0, 1, 0, 2]

    def test_idempotent(self, rng):
        for _ in range(30):
            labels = random_partition(rng, int(rng.integers(2, 12)))
            assert np.array_equal(canonicalize(labels), labels)


class TestVi:
    def test_identity(self, rng):
        for _ in range(20):
            a = random_partition(rng, 8)
            assert abs(vi_loss(a, a)) < 1e-12

    def test_crossed_pairs(self):
        # contingency table is uniform: H = ln 2 each, shared information 0
        assert vi_loss([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(2 * math.log(2), abs=1e-12)

    def test_one_cluster_vs_singletons(self):
        assert vi_loss([0, 0, 0, 0], [0, 1, 2, 3]) == pytest.approx(math.log(4), abs=1e-12)

    def test_metric_axioms(self, rng):
        for _ in range(300):
            n = int(rng.integers(2, 11))
            a, b, c = (random_partition(rng, n) for _ in range(3))
            assert abs(vi_loss(a, b) - vi_loss(b, a)) < 1e-12
            assert vi_loss(a, b) >= -1e-12
            assert vi_loss(a, c) <= vi_loss(a, b) + vi_loss(b, c) + 1e-12

    def test_label_permutation_invariance(self, rng):
        for _ in range(20):
            n = 9
            a = random_partition(rng, n)
            b = random_partition(rng, n)
            perm = rng.permutation(n)
            a2 = canonicalize([perm[l] for l in a])
            assert vi_loss(a2, b) == pytest.approx(vi_loss(a, b), abs=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ValueError, match="equal length"):
            vi_loss([0, 1], [0, 1, 2])


class TestBinder:
    def test_identity(self):
        assert binder_loss([0, 1, 1, 2], [0, 1, 1, 2]) == 0.0

    def test_crossed_pairs(self):
        assert binder_loss([1, 1, 2, 2], [1, 2, 1, 2]) == 4.0

    def test_symmetry_and_bruteforce(self, rng):
        for _ in range(40):
            n = int(rng.integers(2, 10))
            a = random_partition(rng, n)
            b = random_partition(rng, n)
            want = binder_bruteforce(a.tolist(), b.tolist())
            assert binder_loss(a, b) == want
            assert binder_loss(b, a) == want


class TestPsm:
    def test_two_draw_example(self):
        sim = psm([[1, 1, 2], [1, 2, 2]])
        assert sim[0, 1] == 0.5
        assert sim[0, 2] == 0.0
        assert sim[1, 2] == 0.5
        assert np.all(np.diag(sim) == 1.0)

    def test_degenerate_posterior_is_binary(self):
        sim = psm([[0, 0, 1, 1]] * 7)
        assert set(np.unique(sim)) <= {0.0, 1.0}

    def test_symmetric_unit_diagonal(self, rng):
        draws = [random_partition(rng, 8) for _ in range(25)]
        sim = psm(draws)
        assert np.array_equal(sim, sim.T)
        assert np.all(np.diag(sim) == 1.0)
        assert sim.min() >= 0.0 and sim.max() <= 1.0


class TestExpectedLoss:
    def test_binder_closed_form_equals_draw_average(self, rng):
        for _ in range(15):
            n = int(rng.integers(3, 9))
            t = int(rng.integers(2, 100))
            draws = [random_partition(rng, n) for _ in range(t)]
            cand = random_partition(rng, n)
            closed = expected_loss(cand, draws, "binder")
            avg = np.mean([binder_loss(cand, d) for d in draws])
            assert closed == pytest.approx(avg, abs=1e-12)

    def test_vi_expected_is_exact_sample_average(self, rng):
        draws = [random_partition(rng, 7) for _ in range(40)]
        cand = random_partition(rng, 7)
        want = np.mean([vi_loss(cand, d) for d in draws])
        assert expected_loss(cand, draws, "vi") == pytest.approx(want, abs=1e-12)

    def test_degenerate_posterior_zero_loss(self):
        target = [0, 0, 1, 2]
        draws = [target] * 9
        for loss in ("binder", "vi", "zero_one"):
            assert expected_loss(target, draws, loss) == pytest.approx(0.0, abs=1e-12)

    def test_zero_one_frequency(self):
        draws = [[0, 0, 1], [0, 1, 1]] * 5
        assert expected_loss([0, 0, 1], draws, "zero_one") == pytest.approx(0.5)
        # label names do not matter, only the induced partition
        assert expected_loss([3, 3, 7], draws, "zero_one") == pytest.approx(0.5)


def synthetic_chain(rng, n=6, t=50, noise=0.25):
    base = np.array([0] * (n // 2) + [1] * (n - n // 2))
    draws = []
    for _ in range(t):
        lab = base.copy()
        for i in range(n):
            if rng.random() < noise:
                lab[i] = rng.integers(0, 3)
        draws.append(canonicalize(lab))
    return draws


class TestGreedy:
    def test_degenerate_posterior_returns_it(self):
        target = canonicalize([0, 1, 0, 2, 1])
        draws = [target] * 12
        for loss in ("binder", "vi", "zero_one"):
            got = greedy_point_estimate(draws, loss=loss, restarts=4, seed=0)
            assert np.array_equal(got, target)

    def test_deterministic(self, rng):
        draws = synthetic_chain(rng)
        a = greedy_point_estimate(draws, loss="vi", restarts=8, seed=5)
        b = greedy_point_estimate(draws, loss="vi", restarts=8, seed=5)
        assert np.array_equal(a, b)

    def test_matches_bruteforce_small(self, rng):
        all_parts = [np.array(p, dtype=np.int64) for p in set_partitions(6)]
        assert len(all_parts) == 203
        for chain_seed in range(5):
            draws = synthetic_chain(np.random.default_rng(chain_seed))
            for loss in ("binder", "vi"):
                got = greedy_point_estimate(draws, loss=loss, restarts=16, seed=1)
                got_loss = expected_loss(got, draws, loss)
                best = min(expected_loss(p, draws, loss) for p in all_parts)
                assert got_loss == pytest.approx(best, abs=1e-12)

    def test_never_worse_than_visited_draws(self, rng):
        draws = [random_partition(rng, 10) for _ in range(30)]
        for loss in ("binder", "vi"):
            got = greedy_point_estimate(draws, loss=loss, restarts=2, seed=3)
            got_loss = expected_loss(got, draws, loss)
            for d in draws:
                assert got_loss <= expected_loss(d, draws, loss) + 1e-12

    def test_vi_count_at_most_binder_count(self):
        # two well-separated clusters with singleton label noise
        rng = np.random.default_rng(12)
        n = 12
        base = np.array([0] * 6 + [1] * 6)
        draws = []
        for _ in range(80):
            lab = base.copy()
            for i in range(n):
                if rng.random() < 0.18:
                    lab[i] = 2 + i  # break an item into its own cluster
            draws.append(canonicalize(lab))
        vi_est = greedy_point_estimate(draws, loss="vi", restarts=16, seed=0)
        bi_est = greedy_point_estimate(draws, loss="binder", restarts=16, seed=0)
        assert vi_est.max() + 1 <= bi_est.max() + 1

    def test_loss_validation(self):
        with pytest.raises(ValueError, match="unknown loss"):
            greedy_point_estimate([[0, 1]], loss="hamming")
