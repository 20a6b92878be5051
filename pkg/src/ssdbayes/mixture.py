"""Normalized-stable-process mixture of normals: posterior sampling and prediction.

The model places a normalized stable process prior (stability parameter
``gamma``) over location-scale normal kernels; censored observations enter
the likelihood through CDF differences.  Sampling uses a conditional scheme:
the random measure is represented by its jumps, regenerated each sweep via
the Ferguson-Klass construction with a moment-based truncation, and the
latent normalization variable, allocations, atom parameters, and location
hyperparameters are updated in a fixed order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels as kern
from .data_model import CensoredValue, LogTransform, StandardizedSample

# fixed proposal scales: random walk on log u, on mu (times the atom's sigma),
# and on the logit-rescaled sigma; no adaptation so chains are reproducible
U_STEP = 0.5
MU_STEP = 0.5
SIGMA_STEP = 0.3
MAX_JUMPS = 10_000


@dataclass(frozen=True)
class PriorConfig:
    """Prior for the mixture: stability, location hyperprior, scale bounds.

    ``mu_hyper`` is the normal-gamma hyperprior (mean, precision scale,
    shape, rate) on the base-measure location parameters; atom scales are
    uniform on ``sigma_bounds``.
    """

    gamma: float = 0.4
    mu_hyper: tuple[float, float, float, float] = (0.0, 0.01, 1.0, 1.0)
    sigma_bounds: tuple[float, float] = (0.1, 1.5)

    def __post_init__(self):
        if not 0.0 < self.gamma < 1.0:
            raise ValueError(f"gamma out of range (0, 1): {self.gamma}")
        lo, hi = self.sigma_bounds
        if not (0.0 < lo < hi):
            raise ValueError(f"sigma bounds must satisfy 0 < low < high, got {self.sigma_bounds}")
        _, lam0, a0, b0 = self.mu_hyper
        if lam0 <= 0 or a0 <= 0 or b0 <= 0:
            raise ValueError("normal-gamma hyperprior parameters must be positive")


@dataclass(frozen=True)
class MCMCConfig:
    iterations: int = 40_000
    burn_in: int = 10_000
    thin: int = 10
    truncation_tol: float = 1e-4
    seed: int = 0

    def __post_init__(self):
        if self.iterations <= 0:
            raise ValueError("iterations must be positive")
        if not 0 <= self.burn_in < self.iterations:
            raise ValueError("burn_in must lie in [0, iterations)")
        if self.thin <= 0:
            raise ValueError("thin must be positive")
        if (self.iterations - self.burn_in) // self.thin < 1:
            raise ValueError("no draws retained: (iterations - burn_in) / thin < 1")
        if not 0.0 < self.truncation_tol < 1.0:
            raise ValueError("truncation_tol must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in 64 bits")


@dataclass(frozen=True)
class MixtureDraw:
    """One realization of the truncated random mixture.

    Atoms are ordered occupied-first (matching the allocation labels); the
    remaining atoms carry the unallocated mass and base-measure parameters.
    """

    weights: np.ndarray
    mus: np.ndarray
    sigmas: np.ndarray
    latent_u: float
    log_likelihood: float


@dataclass
class PosteriorChain:
    """Retained draws plus per-draw allocations and component-count trace."""

    draws: list[MixtureDraw]
    allocations: list[np.ndarray]
    n_components_trace: np.ndarray
    prior: PriorConfig
    mcmc: MCMCConfig
    transform: LogTransform | None = None
    species: tuple[str, ...] | None = None
    _flat: tuple | None = field(default=None, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.draws)

    def flat_atoms(self):
        """Concatenated (offsets, weights, mus, sigmas) across draws."""
        if self._flat is None:
            offsets = np.zeros(len(self.draws) + 1, dtype=np.int64)
            for t, d in enumerate(self.draws):
                offsets[t + 1] = offsets[t] + d.weights.size
            w = np.concatenate([d.weights for d in self.draws])
            mu = np.concatenate([d.mus for d in self.draws])
            sg = np.concatenate([d.sigmas for d in self.draws])
            self._flat = (offsets, w, mu, sg)
        return self._flat


def sample_posterior(
    data: StandardizedSample,
    prior: PriorConfig = PriorConfig(),
    mcmc: MCMCConfig = MCMCConfig(),
) -> PosteriorChain:
    """Run the conditional sampler and return the retained chain.

    Deterministic: identical inputs and seed give bit-identical chains.
    """
    if data.n < 2:
        raise ValueError("need at least two observations")
    kind, oa, ob = data.arrays()
    n = data.n
    m0, lam0, a0, b0 = prior.mu_hyper
    sig_lo, sig_hi = prior.sigma_bounds

    rng = np.random.default_rng(mcmc.seed)
    labels = np.zeros(n, dtype=np.int64)
    mu_occ = np.array([0.0])
    sig0 = 1.0 if sig_lo < 1.0 < sig_hi else 0.5 * (sig_lo + sig_hi)
    sig_occ = np.array([sig0])
    u = 1.0
    phi1 = m0
    phi2 = a0 / b0

    draws: list[MixtureDraw] = []
    allocations: list[np.ndarray] = []
    ncomp: list[int] = []
    for t in range(1, mcmc.iterations + 1):
        labels, w, mu, sg, n_occ, u, phi1, phi2, loglik = kern.gibbs_sweep(
            kind, oa, ob, labels, mu_occ, sig_occ, u, phi1, phi2,
            prior.gamma, m0, lam0, a0, b0, sig_lo, sig_hi,
            mcmc.truncation_tol, U_STEP, MU_STEP, SIGMA_STEP, MAX_JUMPS, rng,
        )
        mu_occ = mu[:n_occ]
        sig_occ = sg[:n_occ]
        if t > mcmc.burn_in and (t - mcmc.burn_in) % mcmc.thin == 0:
            draws.append(MixtureDraw(w, mu, sg, float(u), float(loglik)))
            allocations.append(labels.copy())
            ncomp.append(int(n_occ))

    return PosteriorChain(
        draws=draws,
        allocations=allocations,
        n_components_trace=np.array(ncomp, dtype=np.int64),
        prior=prior,
        mcmc=mcmc,
        transform=data.transform,
        species=data.species,
    )


def truncate_jumps(
    gamma: float, tilt_u: float, tol: float, rng: np.random.Generator
) -> np.ndarray:
    """Jumps of the exponentially tilted stable measure, largest first.

    Generation follows the Ferguson-Klass construction (tail inversion at
    unit-rate Poisson arrival times) and stops once the expected next jump
    falls below ``tol`` times the accumulated mass.
    """
    if not 0.0 < gamma < 1.0:
        raise ValueError(f"gamma out of range (0, 1): {gamma}")
    if tilt_u < 0.0:
        raise ValueError("tilt must be non-negative")
    if not 0.0 < tol < 1.0:
        raise ValueError(f"tolerance must lie in (0, 1), got {tol}")
    return kern.ferguson_klass_jumps(gamma, tilt_u, tol, MAX_JUMPS, rng)


def kernel_contribution(obs: CensoredValue, mu: float, sigma: float) -> float:
    """Likelihood contribution of one observation under a N(mu, sigma^2) kernel.

    Exact values contribute the density; censored values the CDF mass of
    their admissible region.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    code, a, b = obs.as_row()
    return float(kern.obs_kernel(code, a, b, mu, sigma))


def predictive_density(
    chain: PosteriorChain,
    grid,
    transform: LogTransform | None = None,
) -> np.ndarray:
    """Posterior-mean mixture density over a grid.

    Without a transform the grid is on the standardized scale.  With one, the
    grid is interpreted as concentrations and the change-of-variables
    Jacobian is applied.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        return np.empty(0)
    if not chain.draws:
        raise ValueError("empty chain")
    offsets, w, mu, sg = chain.flat_atoms()
    if transform is None:
        return kern.mean_density_grid(offsets, w, mu, sg, grid)
    z = np.array([transform.forward(c) for c in grid])
    dens = kern.mean_density_grid(offsets, w, mu, sg, z)
    jac = 1.0 / (grid * transform.sd * math.log(transform.base))
    return dens * jac


def predictive_cdf(draw: MixtureDraw, x: float) -> float:
    """CDF of one realized mixture at ``x``."""
    return float(kern.mixture_cdf(draw.weights, draw.mus, draw.sigmas, float(x)))


def effective_sample_size(trace) -> float:
    """ESS by initial-positive-sequence autocorrelation summation, capped at n."""
    x = np.asarray(trace, dtype=float)
    n = x.size
    if n < 10:
        raise ValueError("trace too short for an ESS estimate (need >= 10)")
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0.0:
        raise ValueError("zero variance trace")
    nfft = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(x, nfft)
    acov = np.fft.irfft(f * np.conjugate(f))[:n]
    rho = acov / acov[0]
    tau = -1.0
    m = 0
    while 2 * m + 1 < n:
        pair = rho[2 * m] + rho[2 * m + 1]
        if pair <= 0.0:
            break
        tau += 2.0 * pair
        m += 1
    if tau <= 0.0:
        return float(n)
    return float(min(n, n / tau))
