"""Line-delimited chain serialization.

Format: a schema line, one JSON metadata line (sample size, transform,
species, prior and MCMC echo, plus anything the caller adds), then one draw
per line with tab-separated fields in this order:

    weights | mus | sigmas | latent u | log-likelihood | allocation vector

List fields are comma-separated; floats are written with ``repr`` so files
round-trip exactly and identical chains serialize to identical bytes.
"""

from __future__ import annotations

import json

import numpy as np

from .data_model import LogTransform
from .mixture import MCMCConfig, MixtureDraw, PosteriorChain, PriorConfig

SCHEMA = "ssdbayes-chain 1"


def _floats(values) -> str:
    return ",".join(repr(float(v)) for v in values)


def _ints(values) -> str:
    return ",".join(str(int(v)) for v in values)


def chain_metadata(chain: PosteriorChain, extra: dict | None = None) -> dict:
    meta = {
        "n": int(len(chain.allocations[0])) if chain.allocations else 0,
        "prior": {
            "gamma": chain.prior.gamma,
            "mu_hyper": list(chain.prior.mu_hyper),
            "sigma_bounds": list(chain.prior.sigma_bounds),
        },
        "mcmc": {
            "iterations": chain.mcmc.iterations,
            "burn_in": chain.mcmc.burn_in,
            "thin": chain.mcmc.thin,
            "truncation_tol": chain.mcmc.truncation_tol,
            "seed": chain.mcmc.seed,
        },
        "transform": None
        if chain.transform is None
        else {"mean": chain.transform.mean, "sd": chain.transform.sd, "base": chain.transform.base},
        "species": None if chain.species is None else list(chain.species),
    }
    if extra:
        meta.update(extra)
    return meta


def write_chain(path, chain: PosteriorChain, extra_meta: dict | None = None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(SCHEMA + "\n")
        fh.write(json.dumps(chain_metadata(chain, extra_meta), sort_keys=True) + "\n")
        for draw, alloc in zip(chain.draws, chain.allocations):
            fh.write(
                "\t".join(
                    (
                        _floats(draw.weights),
                        _floats(draw.mus),
                        _floats(draw.sigmas),
                        repr(float(draw.latent_u)),
                        repr(float(draw.log_likelihood)),
                        _ints(alloc),
                    )
                )
                + "\n"
            )


def read_chain(path) -> tuple[PosteriorChain, dict]:
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n")
        if header != SCHEMA:
            raise ValueError(f"not a chain file (schema line {header!r})")
        meta = json.loads(fh.readline())
        draws = []
        allocations = []
        ncomp = []
        for line in fh:
            if not line.strip():
                continue
            w_s, mu_s, sg_s, u_s, ll_s, alloc_s = line.rstrip("\n").split("\t")
            w = np.array([float(v) for v in w_s.split(",")])
            mu = np.array([float(v) for v in mu_s.split(",")])
            sg = np.array([float(v) for v in sg_s.split(",")])
            alloc = np.array([int(v) for v in alloc_s.split(",")], dtype=np.int64)
            draws.append(MixtureDraw(w, mu, sg, float(u_s), float(ll_s)))
            allocations.append(alloc)
            ncomp.append(int(alloc.max()) + 1)
    prior = PriorConfig(
        gamma=meta["prior"]["gamma"],
        mu_hyper=tuple(meta["prior"]["mu_hyper"]),
        sigma_bounds=tuple(meta["prior"]["sigma_bounds"]),
    )
    mcmc = MCMCConfig(**meta["mcmc"])
    transform = None
    if meta.get("transform"):
        t = meta["transform"]
        transform = LogTransform(mean=t["mean"], sd=t["sd"], base=t["base"])
    species = tuple(meta["species"]) if meta.get("species") else None
    chain = PosteriorChain(
        draws=draws,
        allocations=allocations,
        n_components_trace=np.array(ncomp, dtype=np.int64),
        prior=prior,
        mcmc=mcmc,
        transform=transform,
        species=species,
    )
    return chain, meta
