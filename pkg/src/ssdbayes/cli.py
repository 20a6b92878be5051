"""Command-line front end: ingest, fit, summarize, cluster, simulate, factorize.

Structured results are JSON, grids and matrices are CSV; every command writes
a ``manifest.json`` (command, resolved configuration, seed, version, wall
time) into its output directory and each artifact references it.  All
commands are deterministic under a fixed ``--seed`` (``SSD_SEED`` in the
environment is the fallback).  Exit codes: 0 success, 2 usage or
precondition, 3 numerical failure.
"""

from __future__ import annotations

import functools
import json
import math
import os
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__, baselines, chain_io, clustering, data_model, risk, tensor
from .mixture import MCMCConfig, PriorConfig, predictive_density, sample_posterior

DENSITY_GRID_HALF_WIDTH = 8.0
DENSITY_GRID_STEP = 0.01
MANIFEST_NAME = "manifest.json"


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _guarded(fn):
    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except ValueError as exc:
            _fail(2, str(exc))
        except (ArithmeticError, np.linalg.LinAlgError, RuntimeError) as exc:
            _fail(3, f"numerical failure: {exc}")

    return wrapper


def _resolve_seed(seed: int | None) -> int:
    if seed is not None:
        return seed
    env = os.environ.get("SSD_SEED")
    if env is not None:
        try:
            return int(env)
        except ValueError:
            raise ValueError(f"SSD_SEED must be an integer, got {env!r}") from None
    return 0


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _write_manifest(out_dir: Path, command: str, config: dict, inputs: list, seed, t0: float):
    out_dir.mkdir(parents=True, exist_ok=True)
    manifest = {
        "command": command,
        "config": config,
        "inputs": [str(p) for p in inputs],
        "seed": seed,
        "version": __version__,
        "wall_time_s": round(time.monotonic() - t0, 3),
    }
    _write_json(out_dir / MANIFEST_NAME, manifest)


def _csv_lines(header: str, rows) -> str:
    lines = [f"# manifest: {MANIFEST_NAME}", header]
    for row in rows:
        lines.append(",".join(repr(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"


@click.group()
@click.version_option(version=__version__, prog_name="ssdbayes")
def main():
    """Bayesian nonparametric species sensitivity distributions."""


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def _load_sample(csv_path, contaminant: str, censored: bool, model: str):
    records = data_model.parse_csv(csv_path)
    subset = [r for r in records if r.contaminant == contaminant]
    if not subset:
        known = sorted({r.contaminant for r in records})
        raise ValueError(f"unknown contaminant {contaminant!r}; file has {known}")
    has_censored = any(r.observation.kind != "exact" for r in subset)
    if censored:
        if model == "kde" and has_censored:
            raise ValueError("KDE does not support censored data")
    else:
        subset = data_model.decensor_records(subset)
        if not subset:
            raise ValueError("no exact observations left after conventional de-censoring")
    aggregated = data_model.aggregate_species(subset)
    return data_model.log_standardize(aggregated)


def _density_csv(path: Path, grid_std, dens_std, transform):
    ln_base = math.log(transform.base)
    rows = []
    for x, f in zip(grid_std, dens_std):
        conc = transform.inverse(x)
        rows.append((float(x), float(f), float(conc), float(f / (conc * transform.sd * ln_base))))
    path.write_text(
        _csv_lines("x_std,density_std,concentration,density_concentration", rows),
        encoding="utf-8",
    )


@main.command("fit")
@click.argument("csv_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--contaminant", required=True, help="Contaminant to fit (CSV value).")
@click.option("--model", type=click.Choice(["bnp", "normal", "kde"]), default="bnp")
@click.option("--censored", is_flag=True, help="Keep censored records in the likelihood.")
@click.option("--iters", default=40_000, show_default=True)
@click.option("--burn-in", default=10_000, show_default=True)
@click.option("--thin", default=10, show_default=True)
@click.option("--gamma", default=0.4, show_default=True)
@click.option("--seed", type=int, default=None, help="Falls back to SSD_SEED, then 0.")
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guarded
def cmd_fit(csv_path, contaminant, model, censored, iters, burn_in, thin, gamma, seed, out_dir):
    """Fit one model to one contaminant's records and write fit artifacts."""
    t0 = time.monotonic()
    seed = _resolve_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    sample = _load_sample(csv_path, contaminant, censored, model)
    grid = np.arange(
        -DENSITY_GRID_HALF_WIDTH, DENSITY_GRID_HALF_WIDTH + DENSITY_GRID_STEP / 2, DENSITY_GRID_STEP
    )
    tr = sample.transform

    if model == "bnp":
        prior = PriorConfig(gamma=gamma)
        mcmc = MCMCConfig(iterations=iters, burn_in=burn_in, thin=thin, seed=seed)
        chain = sample_posterior(sample, prior, mcmc)
        chain_io.write_chain(
            out / "chain.txt", chain, extra_meta={"contaminant": contaminant, "manifest": MANIFEST_NAME}
        )
        dens = predictive_density(chain, grid)
    elif model == "normal":
        if censored and sample.has_censoring():
            fit = baselines.fit_normal_censored(sample)
        else:
            fit = baselines.fit_normal(sample.exact_values())
        _write_json(
            out / "fit.json",
            {
                "model": "normal",
                "contaminant": contaminant,
                "mu_hat": fit.mu_hat,
                "sigma_hat": fit.sigma_hat,
                "n": fit.n,
                "transform": {"mean": tr.mean, "sd": tr.sd, "base": tr.base},
                "manifest": MANIFEST_NAME,
            },
        )
        dens = fit.pdf(grid)
    else:
        fit = baselines.fit_kde(sample.exact_values())
        _write_json(
            out / "fit.json",
            {
                "model": "kde",
                "contaminant": contaminant,
                "points": [float(v) for v in fit.points],
                "bandwidth": fit.bandwidth,
                "transform": {"mean": tr.mean, "sd": tr.sd, "base": tr.base},
                "manifest": MANIFEST_NAME,
            },
        )
        dens = fit.pdf(grid)

    _density_csv(out / "density.csv", grid, dens, tr)
    config = {
        "contaminant": contaminant,
        "model": model,
        "censored": censored,
        "iters": iters,
        "burn_in": burn_in,
        "thin": thin,
        "gamma": gamma,
        "n_species": sample.n,
    }
    _write_manifest(out, "fit", config, [csv_path], seed, t0)
    click.echo(f"fitted {model} for {contaminant!r} ({sample.n} species) -> {out}")


# ---------------------------------------------------------------------------
# hc
# ---------------------------------------------------------------------------


def _load_fit_or_chain(path: Path):
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
    if first == chain_io.SCHEMA:
        chain, meta = chain_io.read_chain(path)
        return "bnp", chain, meta
    obj = json.loads(Path(path).read_text(encoding="utf-8"))
    if "model" not in obj:
        raise ValueError(f"{path} is neither a chain file nor a fit JSON")
    return obj["model"], obj, obj


def _transform_from_meta(meta) -> data_model.LogTransform | None:
    t = meta.get("transform")
    if not t:
        return None
    return data_model.LogTransform(mean=t["mean"], sd=t["sd"], base=t["base"])


@main.command("hc")
@click.argument("fit_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--p", default=0.05, show_default=True, help="Quantile to estimate.")
@click.option("--level", default=0.95, show_default=True)
@click.option("--bootstrap", "n_boot", default=1000, show_default=True, help="KDE bootstrap size.")
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", type=click.Path(file_okay=False), default=None)
@_guarded
def cmd_hc(fit_path, p, level, n_boot, seed, out_dir):
    """Hazardous-concentration quantile with interval, from a chain or fit file."""
    t0 = time.monotonic()
    seed = _resolve_seed(seed)
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie in (0, 1), got {p}")
    kind, fit, meta = _load_fit_or_chain(Path(fit_path))
    transform = _transform_from_meta(meta)

    if kind == "bnp":
        qp = risk.hc_quantile_posterior(fit, p)
        point, lower, upper = qp.point, qp.credible[0], qp.credible[1]
        interval = "credible"
    elif kind == "normal":
        nf = baselines.NormalFit(mu_hat=fit["mu_hat"], sigma_hat=fit["sigma_hat"], n=fit["n"])
        point, lower, upper = baselines.normal_hc_ci(nf, p, level)
        interval = "confidence"
    elif kind == "kde":
        kf = baselines.KDEFit(points=np.array(fit["points"]), bandwidth=fit["bandwidth"])
        point = baselines.kde_quantile(kf, p)
        lower, upper = baselines.kde_bootstrap_ci(kf.points, p, level, n_boot=n_boot, seed=seed)
        interval = "bootstrap"
    else:
        raise ValueError(f"unknown fit model {kind!r}")

    result = {
        "p": p,
        "level": level,
        "model": kind,
        "interval": interval,
        "standardized": {"point": point, "lower": lower, "upper": upper},
        "manifest": MANIFEST_NAME if out_dir else None,
    }
    if transform is not None:
        result["concentration"] = {
            "point": transform.inverse(point),
            "lower": transform.inverse(lower),
            "upper": transform.inverse(upper),
        }
    click.echo(json.dumps(result, indent=2, sort_keys=True))
    if out_dir:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        _write_json(out / "hc.json", result)
        _write_manifest(
            out, "hc", {"p": p, "level": level, "bootstrap": n_boot}, [fit_path], seed, t0
        )


# ---------------------------------------------------------------------------
# cluster
# ---------------------------------------------------------------------------


@main.command("cluster")
@click.argument("chain_path", type=click.Path(exists=True, dir_okay=False))
@click.option("--loss", type=click.Choice(["vi", "binder"]), default="vi", show_default=True)
@click.option("--restarts", default=16, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guarded
def cmd_cluster(chain_path, loss, restarts, seed, out_dir):
    """Optimal species partition under the chosen loss, plus the similarity matrix."""
    t0 = time.monotonic()
    seed = _resolve_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    chain, meta = chain_io.read_chain(chain_path)
    labels = clustering.greedy_point_estimate(chain, loss=loss, restarts=restarts, seed=seed)
    eloss = clustering.expected_loss(labels, chain, loss)
    n = labels.size
    species = list(chain.species) if chain.species else [f"obs{i}" for i in range(n)]
    sim = clustering.psm(chain)

    _write_json(
        out / "partition.json",
        {
            "contaminant": meta.get("contaminant"),
            "loss": loss,
            "expected_loss": eloss,
            "n_clusters": int(labels.max()) + 1,
            "labels": {s: int(l) for s, l in zip(species, labels)},
            "manifest": MANIFEST_NAME,
        },
    )
    rows = [[species[i]] + [float(v) for v in sim[i]] for i in range(n)]
    (out / "psm.csv").write_text(
        _csv_lines("species," + ",".join(species), rows), encoding="utf-8"
    )
    _write_manifest(out, "cluster", {"loss": loss, "restarts": restarts}, [chain_path], seed, t0)
    click.echo(f"{int(labels.max()) + 1} clusters ({loss} loss) -> {out}")


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@main.command("simulate")
@click.option("--scenario", type=click.Choice(["a", "b", "c"]), required=True)
@click.option("--sizes", default="10,20,50,100", show_default=True)
@click.option("--n-replicates", "-s", "-S", "n_replicates", default=40, show_default=True)
@click.option("--models", default="bnp,normal,kde", show_default=True)
@click.option("--iters", default=6000, show_default=True)
@click.option("--burn-in", default=2000, show_default=True)
@click.option("--thin", default=4, show_default=True)
@click.option("--bootstrap", "n_boot", default=400, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guarded
def cmd_simulate(scenario, sizes, n_replicates, models, iters, burn_in, thin, n_boot, seed, out_dir):
    """Replicated model comparison (MAE / MISE / MCIL) on a synthetic scenario."""
    t0 = time.monotonic()
    seed = _resolve_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    size_list = [int(s) for s in sizes.split(",") if s]
    model_list = [m.strip() for m in models.split(",") if m.strip()]
    sc = risk.Scenario(scenario)
    reports = risk.run_simulation(
        sc,
        size_list,
        n_replicates,
        model_list,
        seed,
        mcmc=MCMCConfig(iterations=iters, burn_in=burn_in, thin=thin, seed=0),
        n_boot=n_boot,
    )
    _write_json(
        out / "metrics.json",
        {
            "scenario": scenario,
            "q_true": sc.true_hc5,
            "n_replicates": n_replicates,
            "rows": [r.to_row() for r in reports],
            "manifest": MANIFEST_NAME,
        },
    )
    rep_rows = []
    for r in reports:
        for i in range(n_replicates):
            rep_rows.append(
                (
                    r.scenario,
                    r.model,
                    r.n,
                    i,
                    float(r.q_hat[i]),
                    float(r.ci_low[i]),
                    float(r.ci_high[i]),
                    float(r.ise[i]),
                )
            )
    (out / "replicates.csv").write_text(
        _csv_lines("scenario,model,n,replicate,q_hat,ci_low,ci_high,ise", rep_rows),
        encoding="utf-8",
    )
    config = {
        "scenario": scenario,
        "sizes": size_list,
        "n_replicates": n_replicates,
        "models": model_list,
        "iters": iters,
        "burn_in": burn_in,
        "thin": thin,
        "bootstrap": n_boot,
    }
    _write_manifest(out, "simulate", config, [], seed, t0)
    click.echo(f"simulated scenario {scenario} ({len(reports)} model/size cells) -> {out}")


# ---------------------------------------------------------------------------
# tensor
# ---------------------------------------------------------------------------


def _load_partitions(partitions_dir: Path) -> dict:
    parts = {}
    for path in sorted(partitions_dir.glob("*.json")):
        if path.name in (MANIFEST_NAME, "hc.json", "metrics.json"):
            continue
        obj = json.loads(path.read_text(encoding="utf-8"))
        if "labels" not in obj:
            continue
        name = obj.get("contaminant") or path.stem
        if name in parts:
            raise ValueError(f"duplicate partition for contaminant {name!r}")
        parts[name] = obj["labels"]
    if not parts:
        raise ValueError(f"no partition JSON files found in {partitions_dir}")
    return parts


@main.command("tensor")
@click.argument("partitions_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--min-species", default=8, show_default=True, help="Keep contaminants tested on at least this many species.")
@click.option("--min-contaminants", default=13, show_default=True, help="Keep species tested for at least this many contaminants.")
@click.option("--ranks", default="1,2,3,4,5,6", show_default=True)
@click.option("--folds", default=5, show_default=True)
@click.option("--holdout", "holdout_fraction", type=float, default=None, help="Defaults to 1/folds.")
@click.option("--max-iters", default=500, show_default=True)
@click.option("--seed", type=int, default=None)
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@_guarded
def cmd_tensor(
    partitions_dir, min_species, min_contaminants, ranks, folds, holdout_fraction, max_iters, seed, out_dir
):
    """Cross-contaminant factorization of per-contaminant partition files."""
    t0 = time.monotonic()
    seed = _resolve_seed(seed)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    parts = _load_partitions(Path(partitions_dir))

    parts = {c: labels for c, labels in parts.items() if len(labels) >= min_species}
    if not parts:
        raise ValueError(f"no contaminant tested on at least {min_species} species")
    counts: dict[str, int] = {}
    for labels in parts.values():
        for sp in labels:
            counts[sp] = counts.get(sp, 0) + 1
    universe = sorted(sp for sp, c in counts.items() if c >= min_contaminants)
    if not universe:
        raise ValueError(f"no species tested for at least {min_contaminants} contaminants")
    kept = set(universe)
    parts = {
        c: {sp: l for sp, l in labels.items() if sp in kept} for c, labels in parts.items()
    }
    parts = {c: labels for c, labels in parts.items() if labels}

    assoc = tensor.build_tensor(parts, universe)
    rank_grid = [int(r) for r in ranks.split(",") if r]
    selection = tensor.cv_rank_select(
        assoc, rank_grid, n_folds=folds, holdout_fraction=holdout_fraction,
        seed=seed, max_iters=max_iters,
    )
    dec_seed = int(
        np.random.SeedSequence(entropy=seed, spawn_key=(0xFAC7,)).generate_state(1, np.uint64)[0]
    )
    factors = tensor.nncp_decompose(assoc, selection.rank, seed=dec_seed, max_iters=max_iters)

    ii, jj, kk = np.nonzero(assoc.mask)
    trip_rows = [(int(i), int(j), int(k), float(assoc.values[i, j, k])) for i, j, k in zip(ii, jj, kk)]
    (out / "tensor.csv").write_text(_csv_lines("i,j,k,value", trip_rows), encoding="utf-8")
    _write_json(
        out / "tensor_index.json",
        {
            "species": list(assoc.species),
            "contaminants": list(assoc.contaminants),
            "missing_fraction": assoc.missing_fraction,
            "manifest": MANIFEST_NAME,
        },
    )
    _write_json(
        out / "cv_curve.json",
        {
            "ranks": list(selection.ranks),
            "mean_error": [float(v) for v in selection.mean_error],
            "se_error": [float(v) for v in selection.se_error],
            "ci_low": [float(v) for v in selection.ci_low],
            "ci_high": [float(v) for v in selection.ci_high],
            "fold_errors": [[float(v) for v in row] for row in selection.fold_errors],
            "chosen_rank": selection.rank,
            "manifest": MANIFEST_NAME,
        },
    )
    comp_header = ",".join(f"component_{r + 1}" for r in range(factors.rank))
    a_rows = [[assoc.species[i]] + [float(v) for v in factors.species_factors[i]] for i in range(len(assoc.species))]
    (out / "species_factors.csv").write_text(
        _csv_lines("species," + comp_header, a_rows), encoding="utf-8"
    )
    c_rows = [
        [assoc.contaminants[k]] + [float(v) for v in factors.contaminant_factors[k]]
        for k in range(len(assoc.contaminants))
    ]
    (out / "contaminant_factors.csv").write_text(
        _csv_lines("contaminant," + comp_header, c_rows), encoding="utf-8"
    )
    components = []
    for r in range(factors.rank):
        sp_members, sp_sep = tensor.kmeans2_threshold(factors.species_factors[:, r])
        ct_members, ct_sep = tensor.kmeans2_threshold(factors.contaminant_factors[:, r])
        components.append(
            {
                "component": r + 1,
                "species_members": [s for s, m in zip(assoc.species, sp_members) if m],
                "species_separated": bool(sp_sep),
                "contaminant_members": [c for c, m in zip(assoc.contaminants, ct_members) if m],
                "contaminant_separated": bool(ct_sep),
                "well_separated": bool(sp_sep and ct_sep),
            }
        )
    _write_json(
        out / "components.json",
        {"rank": factors.rank, "fit": factors.fit, "components": components, "manifest": MANIFEST_NAME},
    )
    config = {
        "min_species": min_species,
        "min_contaminants": min_contaminants,
        "ranks": rank_grid,
        "folds": folds,
        "holdout_fraction": holdout_fraction,
        "max_iters": max_iters,
        "dims": list(assoc.shape),
    }
    _write_manifest(out, "tensor", config, [str(partitions_dir)], seed, t0)
    click.echo(
        f"tensor {assoc.shape} ({assoc.missing_fraction:.1%} missing), "
        f"rank {selection.rank} -> {out}"
    )


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


@main.command("report")
@click.argument("run_dir", type=click.Path(exists=True, file_okay=False))
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@_guarded
def cmd_report(run_dir, out_path):
    """Concatenate a run directory's JSON artifacts into one summary document."""
    root = Path(run_dir)
    summary = {}
    for path in sorted(root.rglob("*.json")):
        if path.name == MANIFEST_NAME:
            continue
        summary[str(path.relative_to(root))] = json.loads(path.read_text(encoding="utf-8"))
    doc = json.dumps(summary, indent=2, sort_keys=True) + "\n"
    if out_path:
        Path(out_path).write_text(doc, encoding="utf-8")
        click.echo(f"report with {len(summary)} artifacts -> {out_path}")
    else:
        click.echo(doc, nl=False)


if __name__ == "__main__":
    main()
