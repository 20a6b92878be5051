"""Cross-contaminant association tensor and masked non-negative factorization.

Per-contaminant partitions become 0/1 co-clustering slices stacked into a
species x species x contaminant tensor with an explicit observed mask (pairs
untested for a contaminant are missing).  The tensor is factorized as a sum
of rank-one terms sharing the species factor across the two symmetric modes,
by block-coordinate non-negative least squares restricted to observed
entries.  Rank is chosen by K-fold cross-validation on held-out entries and
memberships are thresholded by exact one-dimensional 2-means.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls


@dataclass
class AssociationTensor:
    """Co-clustering indicators with an observed-entry mask.

    ``values[i, j, k]`` is 1 when species i and j co-clustered for
    contaminant k, 0 when both were tested and separated; entries involving
    an untested species are missing (mask False).  Symmetric in the first two
    modes, with unit diagonal where observed.
    """

    values: np.ndarray
    mask: np.ndarray
    species: tuple[str, ...]
    contaminants: tuple[str, ...]

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.values.shape

    @property
    def missing_fraction(self) -> float:
        return 1.0 - float(self.mask.mean())


@dataclass
class FactorSet:
    """Non-negative factors of the association tensor.

    ``species_factors`` (n_S x R) appears in both symmetric modes;
    ``contaminant_factors`` is n_C x R.  ``fit`` is the relative Frobenius
    error on observed entries; ``objective_trace`` records the masked
    objective per iteration of the winning start (non-increasing).
    """

    species_factors: np.ndarray
    contaminant_factors: np.ndarray
    rank: int
    fit: float
    objective_trace: np.ndarray


def build_tensor(partitions: dict, universe) -> AssociationTensor:
    """Stack per-contaminant co-clustering matrices into a masked tensor.

    ``partitions`` maps contaminant -> ({species: label} or (species, label)
    pairs) over the species tested for it; ``universe`` fixes the species
    axis.  Duplicate species within one contaminant are an error.
    """
    universe = list(universe)
    if len(set(universe)) != len(universe):
        raise ValueError("universe contains duplicate species")
    sp_index = {s: i for i, s in enumerate(universe)}
    contaminants = list(partitions.keys())
    n_s, n_c = len(universe), len(contaminants)
    values = np.zeros((n_s, n_s, n_c))
    mask = np.zeros((n_s, n_s, n_c), dtype=bool)
    for k, cont in enumerate(contaminants):
        part = partitions[cont]
        items = list(part.items()) if isinstance(part, dict) else list(part)
        seen = set()
        for sp, _ in items:
            if sp in seen:
                raise ValueError(f"duplicate species {sp!r} for contaminant {cont!r}")
            seen.add(sp)
            if sp not in sp_index:
                raise ValueError(f"species {sp!r} not in universe")
        idx = np.array([sp_index[sp] for sp, _ in items], dtype=np.int64)
        lab = np.array([l for _, l in items], dtype=np.int64)
        for a in range(idx.size):
            for b in range(idx.size):
                i, j = idx[a], idx[b]
                values[i, j, k] = 1.0 if lab[a] == lab[b] else 0.0
                mask[i, j, k] = True
    return AssociationTensor(values, mask, tuple(universe), tuple(contaminants))


def reconstruct(factors: FactorSet) -> np.ndarray:
    a = factors.species_factors
    c = factors.contaminant_factors
    return np.einsum("ir,jr,kr->ijk", a, a, c)


def _masked_objective(values, mask, a, c) -> float:
    est = np.einsum("ir,jr,kr->ijk", a, a, c)
    diff = np.where(mask, values - est, 0.0)
    return float(np.sum(diff * diff))


def _row_nnls_a(values, mask, a, c, i):
    # row i of the first-mode factor against the current paired-mode copy
    jj, kk = np.nonzero(mask[i])
    if jj.size == 0:
        return a[i]
    design = a[jj] * c[kk]
    sol, _ = nnls(design, values[i, jj, kk])
    return sol


def _slice_nnls_c(values, mask, a, k):
    ii, jj = np.nonzero(mask[:, :, k])
    if ii.size == 0:
        return None
    design = a[ii] * a[jj]
    sol, _ = nnls(design, values[ii, jj, k])
    return sol


# fits below these relative resolutions are numerically exact: the ALS stops
# there, and cross-validation treats held-out errors below the coarser one as
# indistinguishable from zero
FIT_RESOLUTION = 1e-8
CV_ERROR_RESOLUTION = 1e-6


def _als_run(values, mask, rank, rng, max_iters, tol):
    n_s = values.shape[0]
    n_c = values.shape[2]
    a = rng.random((n_s, rank))
    c = rng.random((n_c, rank))
    floor = FIT_RESOLUTION**2 * float(np.sum(np.where(mask, values, 0.0) ** 2))
    trace = [_masked_objective(values, mask, a, c)]
    for _ in range(max_iters):
        prev = trace[-1]
        # species factor: least squares against the current paired copy, then
        # the longest symmetrizing step (1, 1/2, 1/4, ...) that does not
        # increase the objective
        a_new = np.vstack([_row_nnls_a(values, mask, a, c, i) for i in range(n_s)])
        eta = 1.0
        for _ in range(22):
            trial = a + eta * (a_new - a)
            if _masked_objective(values, mask, trial, c) <= prev:
                a = trial
                break
            eta *= 0.5
        # if no step length helps, keep the current iterate; C may still move
        # contaminant factor: exact masked least squares, slice by slice
        for k in range(n_c):
            sol = _slice_nnls_c(values, mask, a, k)
            if sol is not None:
                c[k] = sol
        cur = _masked_objective(values, mask, a, c)
        trace.append(cur)
        if cur <= floor:
            break
        if (prev - cur) < tol * max(prev, 1e-300):
            break
    return a, c, np.array(trace)


def nncp_decompose(
    tensor: AssociationTensor,
    rank: int,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-8,
    n_starts: int = 4,
) -> FactorSet:
    """Masked symmetric non-negative PARAFAC by alternating least squares.

    Minimizes the squared reconstruction error over observed entries with the
    species factor shared across the two symmetric modes.  Runs ``n_starts``
    uniform(0, 1) initializations (seeds derived from ``seed``) and keeps the
    best fit; deterministic given the seed.
    """
    if rank <= 0:
        raise ValueError("rank must be positive")
    n_obs = int(tensor.mask.sum())
    if n_obs == 0:
        raise ValueError("tensor has no observed entries")
    if n_obs < rank:
        raise ValueError(f"only {n_obs} observed entries for rank {rank}")
    best = None
    for child in np.random.SeedSequence(seed).spawn(n_starts):
        a, c, trace = _als_run(
            tensor.values, tensor.mask, rank, np.random.default_rng(child), max_iters, tol
        )
        if best is None or trace[-1] < best[2][-1]:
            best = (a, c, trace)
    a, c, trace = best
    denom = float(np.sum(tensor.values[tensor.mask] ** 2))
    fit = math.sqrt(trace[-1] / denom) if denom > 0 else 0.0
    return FactorSet(
        species_factors=a,
        contaminant_factors=c,
        rank=rank,
        fit=fit,
        objective_trace=trace,
    )


@dataclass
class RankSelection:
    """Cross-validated rank choice with the per-rank error curve."""

    rank: int
    ranks: tuple[int, ...]
    mean_error: np.ndarray
    se_error: np.ndarray
    ci_low: np.ndarray
    ci_high: np.ndarray
    fold_errors: np.ndarray  # folds x ranks


def _fold_holdouts(pairs, n_folds, holdout_fraction, rng):
    """Disjoint fold holdout sets when the fractions allow, else per-fold draws."""
    n = len(pairs)
    m = max(1, round(holdout_fraction * n))
    perm = rng.permutation(n)
    if n_folds * m <= n:
        return [perm[f * m : (f + 1) * m] for f in range(n_folds)]
    return [rng.permutation(n)[:m] for _ in range(n_folds)]


def cv_rank_select(
    tensor: AssociationTensor,
    rank_grid,
    n_folds: int = 5,
    holdout_fraction: float | None = None,
    seed: int = 0,
    max_iters: int = 500,
    tol: float = 1e-8,
    n_starts: int = 4,
) -> RankSelection:
    """Choose the factorization rank by K-fold holdout reconstruction error.

    Each fold masks a share of the observed entries (symmetry-paired entries
    move together), decomposes at every candidate rank, and records the
    Frobenius distance on the held-out entries.  The chosen rank is the
    smallest one whose mean error lies within the 95% normal-approximation
    confidence interval of the error-minimizing rank.
    """
    ranks = tuple(int(r) for r in rank_grid)
    if not ranks:
        raise ValueError("rank grid is empty")
    if list(ranks) != sorted(ranks):
        raise ValueError("rank grid must be sorted")
    if n_folds < 2:
        raise ValueError("need at least two folds")
    frac = 1.0 / n_folds if holdout_fraction is None else float(holdout_fraction)
    if not 0.0 < frac < 1.0:
        raise ValueError("holdout fraction must lie in (0, 1)")

    ii, jj, kk = np.nonzero(tensor.mask)
    canon = [(i, j, k) for i, j, k in zip(ii, jj, kk) if i <= j]
    perm_rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(0xF01D,)))
    holdouts = _fold_holdouts(canon, n_folds, frac, perm_rng)

    fold_errors = np.empty((n_folds, len(ranks)))
    for f, hold_idx in enumerate(holdouts):
        hold_mask = np.zeros_like(tensor.mask)
        for t in hold_idx:
            i, j, k = canon[t]
            hold_mask[i, j, k] = True
            hold_mask[j, i, k] = True
        train_mask = tensor.mask & ~hold_mask
        had = tensor.mask.any(axis=(1, 2))
        if np.any(had & ~train_mask.any(axis=(1, 2))):
            raise ValueError(f"fold {f} holdout leaves a species without observed entries")
        had_c = tensor.mask.any(axis=(0, 1))
        if np.any(had_c & ~train_mask.any(axis=(0, 1))):
            raise ValueError(f"fold {f} holdout leaves a contaminant without observed entries")
        train = AssociationTensor(tensor.values, train_mask, tensor.species, tensor.contaminants)
        for r_idx, rank in enumerate(ranks):
            dec_seed = int(
                np.random.SeedSequence(entropy=seed, spawn_key=(f, r_idx)).generate_state(
                    1, np.uint64
                )[0]
            )
            fac = nncp_decompose(
                train, rank, seed=dec_seed, max_iters=max_iters, tol=tol, n_starts=n_starts
            )
            est = reconstruct(fac)
            diff = np.where(hold_mask, tensor.values - est, 0.0)
            err = math.sqrt(float(np.sum(diff * diff)))
            # errors below the numerical resolution of the fit are ties
            err_floor = CV_ERROR_RESOLUTION * math.sqrt(
                float(np.sum(np.where(hold_mask, tensor.values, 0.0) ** 2))
            )
            fold_errors[f, r_idx] = max(err, err_floor)

    mean = fold_errors.mean(axis=0)
    se = fold_errors.std(axis=0, ddof=1) / math.sqrt(n_folds)
    ci_low = mean - 1.96 * se
    ci_high = mean + 1.96 * se
    best_idx = int(np.argmin(mean))
    chosen = ranks[best_idx]
    for r_idx, rank in enumerate(ranks):
        if mean[r_idx] <= ci_high[best_idx]:
            chosen = rank
            break
    return RankSelection(
        rank=chosen,
        ranks=ranks,
        mean_error=mean,
        se_error=se,
        ci_low=ci_low,
        ci_high=ci_high,
        fold_errors=fold_errors,
    )


def kmeans2_threshold(weights) -> tuple[np.ndarray, bool]:
    """Exact one-dimensional 2-means split of membership weights.

    Returns a boolean membership vector for the upper cluster and a flag that
    is true when the two clusters' value ranges do not overlap (strict gap at
    the split).  An all-equal vector is degenerate: no members, flag false.
    """
    v = np.asarray(weights, dtype=float)
    if v.size < 2:
        raise ValueError("need at least two weights")
    order = np.argsort(v, kind="stable")
    sv = v[order]
    if sv[0] == sv[-1]:
        return np.zeros(v.size, dtype=bool), False
    csum = np.concatenate(([0.0], np.cumsum(sv)))
    csq = np.concatenate(([0.0], np.cumsum(sv * sv)))

    def wcss(lo, hi):  # [lo, hi)
        m = hi - lo
        s = csum[hi] - csum[lo]
        q = csq[hi] - csq[lo]
        return q - s * s / m

    best_split, best_obj = 1, math.inf
    for s in range(1, v.size):
        obj = wcss(0, s) + wcss(s, v.size)
        if obj < best_obj - 1e-15:
            best_obj = obj
            best_split = s
    members = np.zeros(v.size, dtype=bool)
    members[order[best_split:]] = True
    separated = bool(sv[best_split] > sv[best_split - 1])
    return members, separated
