import numpy as np
import pytest

from ssdbayes.tensor import (
    AssociationTensor,
    build_tensor,
    cv_rank_select,
    kmeans2_threshold,
    nncp_decompose,
    reconstruct,
)


def synthetic_tensor(rank, n_s=10, n_c=6, seed=0, mask_fraction=0.0):
    """Noiseless non-negative low-rank tensor with optional symmetric masking."""
    rng = np.random.default_rng(seed)
    a = rng.uniform(0.2, 1.5, size=(n_s, rank))
    c = rng.uniform(0.2, 1.5, size=(n_c, rank))
    values = np.einsum("ir,jr,kr->ijk", a, a, c)
    mask = np.ones(values.shape, dtype=bool)
    if mask_fraction > 0:
        pairs = [(i, j, k) for k in range(n_c) for i in range(n_s) for j in range(i, n_s)]
        hide = rng.choice(len(pairs), size=int(mask_fraction * len(pairs)), replace=False)
        for t in hide:
            i, j, k = pairs[t]
            mask[i, j, k] = False
            mask[j, i, k] = False
    species = tuple(f"s{i}" for i in range(n_s))
    conts = tuple(f"c{k}" for k in range(n_c))
    return AssociationTensor(values, mask, species, conts)


class TestBuildTensor:
    def test_basic_slice(self):
        t = build_tensor({"A": {"s1": 0, "s2": 0}}, ["s1", "s2", "s3"])
        assert t.shape == (3, 3, 1)
        assert t.values[0, 1, 0] == 1.0 and t.values[1, 0, 0] == 1.0
        assert t.values[0, 0, 0] == 1.0 and t.values[1, 1, 0] == 1.0
        assert t.mask[0, 1, 0] and t.mask[0, 0, 0]
        assert not t.mask[0, 2, 0] and not t.mask[2, 2, 0]

    def test_singletons_give_zero_offdiagonal(self):
        t = build_tensor({"A": {"s1": 0, "s2": 1, "s3": 2}}, ["s1", "s2", "s3"])
        off = t.values[:, :, 0][~np.eye(3, dtype=bool)]
        assert np.all(off == 0.0)

    def test_label_permutation_invariance(self):
        t1 = build_tensor({"A": {"s1": 0, "s2": 0, "s3": 1}}, ["s1", "s2", "s3"])
        t2 = build_tensor({"A": {"s1": 7, "s2": 7, "s3": 3}}, ["s1", "s2", "s3"])
        assert np.array_equal(t1.values, t2.values)
        assert np.array_equal(t1.mask, t2.mask)

    def test_symmetry_invariants(self, rng):
        partitions = {}
        universe = [f"sp{i}" for i in range(9)]
        for k in range(5):
            tested = rng.choice(universe, size=rng.integers(3, 9), replace=False)
            partitions[f"c{k}"] = {s: int(rng.integers(0, 3)) for s in tested}
        t = build_tensor(partitions, universe)
        assert np.array_equal(t.values, t.values.transpose(1, 0, 2))
        assert np.array_equal(t.mask, t.mask.transpose(1, 0, 2))
        for k in range(5):
            d = np.diag(t.mask[:, :, k])
            assert np.all(np.diag(t.values[:, :, k])[d] == 1.0)

    def test_duplicate_species_rejected(self):
        with pytest.raises(ValueError, match="duplicate"):
            build_tensor({"A": [("s1", 0), ("s1", 1)]}, ["s1", "s2"])

    def test_unknown_species_rejected(self):
        with pytest.raises(ValueError, match="universe"):
            build_tensor({"A": {"zz": 0, "s1": 0}}, ["s1"])

    def test_paper_scale_dimensions(self, rng):
        universe = [f"sp{i}" for i in range(71)]
        partitions = {}
        for k in range(179):
            tested = rng.choice(universe, size=8, replace=False)
            partitions[f"c{k}"] = {s: int(rng.integers(0, 2)) for s in tested}
        t = build_tensor(partitions, universe)
        assert t.shape == (71, 71, 179)
        assert 0.0 < t.missing_fraction < 1.0


class TestDecompose:
    def test_rank1_exact_recovery(self):
        t = synthetic_tensor(rank=1, seed=1)
        fac = nncp_decompose(t, rank=1, seed=0, max_iters=3000, tol=1e-13)
        est = reconstruct(fac)
        rel = np.abs(est - t.values) / np.abs(t.values)
        assert rel.max() < 1e-6

    def test_rank1_masked_heldout_recovery(self):
        t = synthetic_tensor(rank=1, seed=2, mask_fraction=0.3)
        fac = nncp_decompose(t, rank=1, seed=0, max_iters=3000, tol=1e-13)
        est = reconstruct(fac)
        held = ~t.mask
        rel = np.abs(est[held] - t.values[held]) / np.abs(t.values[held])
        assert rel.max() < 1e-4

    def test_rank2_recovery(self):
        t = synthetic_tensor(rank=2, seed=3)
        fac = nncp_decompose(t, rank=2, seed=0, max_iters=3000, tol=1e-13)
        rel = np.abs(reconstruct(fac) - t.values) / np.abs(t.values)
        assert rel.max() < 1e-6

    def test_objective_monotone_and_factors_nonnegative(self):
        t = synthetic_tensor(rank=2, seed=4, mask_fraction=0.2)
        fac = nncp_decompose(t, rank=3, seed=1, n_starts=2)
        diffs = np.diff(fac.objective_trace)
        assert np.all(diffs <= 1e-12)
        assert np.all(fac.species_factors >= 0)
        assert np.all(fac.contaminant_factors >= 0)

    def test_masked_objective_equals_unmasked_when_fully_observed(self):
        t = synthetic_tensor(rank=2, seed=5)
        fac = nncp_decompose(t, rank=1, seed=0, max_iters=40)
        est = reconstruct(fac)
        masked = float(np.sum(np.where(t.mask, t.values - est, 0.0) ** 2))
        unmasked = float(np.sum((t.values - est) ** 2))
        assert masked == pytest.approx(unmasked, rel=1e-12)

    def test_reconstruction_is_symmetric(self):
        t = synthetic_tensor(rank=2, seed=6, mask_fraction=0.4)
        fac = nncp_decompose(t, rank=2, seed=0, max_iters=60)
        est = reconstruct(fac)
        assert np.array_equal(est, est.transpose(1, 0, 2))

    def test_rank_validation(self):
        t = synthetic_tensor(rank=1)
        with pytest.raises(ValueError, match="rank"):
            nncp_decompose(t, rank=0)

    def test_empty_observed_set(self):
        t = synthetic_tensor(rank=1)
        empty = AssociationTensor(t.values, np.zeros_like(t.mask), t.species, t.contaminants)
        with pytest.raises(ValueError, match="no observed"):
            nncp_decompose(empty, rank=1)

    def test_deterministic(self):
        t = synthetic_tensor(rank=2, seed=7, mask_fraction=0.2)
        f1 = nncp_decompose(t, rank=2, seed=11, max_iters=60)
        f2 = nncp_decompose(t, rank=2, seed=11, max_iters=60)
        assert np.array_equal(f1.species_factors, f2.species_factors)
        assert np.array_equal(f1.contaminant_factors, f2.contaminant_factors)


class TestRankSelection:
    def test_noiseless_rank2_selected(self):
        t = synthetic_tensor(rank=2, n_s=10, n_c=6, seed=8)
        sel = cv_rank_select(t, [1, 2, 3, 4], n_folds=5, seed=0, max_iters=3000, tol=1e-13, n_starts=2)
        assert sel.rank == 2

    def test_single_rank_grid(self):
        t = synthetic_tensor(rank=1, n_s=6, n_c=4, seed=9)
        sel = cv_rank_select(t, [3], n_folds=3, seed=0, max_iters=60)
        assert sel.rank == 3

    def test_grid_must_be_sorted(self):
        t = synthetic_tensor(rank=1)
        with pytest.raises(ValueError, match="sorted"):
            cv_rank_select(t, [3, 1], n_folds=2)

    def test_emptied_slice_is_an_error(self):
        # one contaminant with a single observed (diagonal) entry: any fold
        # that masks it leaves that slice empty
        values = np.zeros((4, 4, 2))
        mask = np.zeros((4, 4, 2), dtype=bool)
        values[:, :, 0] = 1.0
        mask[:, :, 0] = True
        values[0, 0, 1] = 1.0
        mask[0, 0, 1] = True
        t = AssociationTensor(values, mask, ("a", "b", "c", "d"), ("x", "y"))
        with pytest.raises(ValueError, match="leaves a"):
            cv_rank_select(t, [1], n_folds=5, holdout_fraction=0.5, seed=0, max_iters=10)


class TestKmeansThreshold:
    def test_perfect_split(self):
        members, sep = kmeans2_threshold([0.0, 0.0, 1.0, 1.0])
        assert members.tolist() == [False, False, True, True]
        assert sep

    def test_two_high_one_low(self):
        members, sep = kmeans2_threshold([0.9, 0.85, 0.1])
        assert members.tolist() == [True, True, False]
        assert sep

    def test_degenerate(self):
        members, sep = kmeans2_threshold([0.5, 0.5, 0.5])
        assert not members.any()
        assert not sep

    def test_tie_across_split_not_separated(self):
        members, sep = kmeans2_threshold([0.0, 0.5, 0.5, 0.5, 1.0, 1.0])
        assert not sep or members.sum() in (2, 3)

    def test_matches_exhaustive_wcss(self, rng):
        for _ in range(20):
            v = rng.random(int(rng.integers(2, 12)))
            if np.allclose(v, v[0]):
                continue
            members, _ = kmeans2_threshold(v)
            sv = np.sort(v)
            best = min(
                (np.var(sv[:s]) * s + np.var(sv[s:]) * (len(v) - s), s)
                for s in range(1, len(v))
            )
            assert members.sum() == len(v) - best[1]