import numpy as np
import pytest

from ssdbayes.data_model import CensoredValue, LogTransform, StandardizedSample
from ssdbayes.mixture import MCMCConfig, MixtureDraw, PosteriorChain, PriorConfig


def make_sample(values, species=None, transform=None):
    """StandardizedSample from raw standardized-scale entries.

    Entries may be floats (exact) or CensoredValue instances.
    """
    vals = tuple(
        v if isinstance(v, CensoredValue) else CensoredValue.exact(float(v)) for v in values
    )
    return StandardizedSample(
        values=vals,
        transform=transform or LogTransform(0.0, 1.0),
        species=species,
    )


def toy_chain(draw_atoms, allocations=None, transform=None):
    """PosteriorChain built directly from atom lists.

    ``draw_atoms`` is a list of draws, each a list of (weight, mu, sigma)
    triples.  Allocations default to everything in one cluster.
    """
    draws = []
    for atoms in draw_atoms:
        w = np.array([a[0] for a in atoms], dtype=float)
        mu = np.array([a[1] for a in atoms], dtype=float)
        sg = np.array([a[2] for a in atoms], dtype=float)
        draws.append(MixtureDraw(w, mu, sg, latent_u=1.0, log_likelihood=0.0))
    if allocations is None:
        allocations = [np.zeros(1, dtype=np.int64) for _ in draws]
    else:
        allocations = [np.asarray(a, dtype=np.int64) for a in allocations]
    ncomp = np.array([a.max() + 1 for a in allocations], dtype=np.int64)
    return PosteriorChain(
        draws=draws,
        allocations=allocations,
        n_components_trace=ncomp,
        prior=PriorConfig(),
        mcmc=MCMCConfig(iterations=10, burn_in=0, thin=1, seed=0),
        transform=transform,
    )


def set_partitions(n):
    """All set partitions of range(n) as canonical label tuples (restricted growth)."""
    out = []

    def grow(prefix, maxlab):
        i = len(prefix)
        if i == n:
            out.append(tuple(prefix))
            return
        for lab in range(maxlab + 2):
            grow(prefix + [lab], max(maxlab, lab))

    grow([], -1)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(20260810)
