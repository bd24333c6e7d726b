"""Command-line entry point: ``pgdglm {simulate,fit,benchmark} --config run.json``.

Outputs (in ``--out``):

* simulate: ``data.csv`` and ``meta.json`` (design and true path)
* fit: ``summary.csv``, ``predictive.csv``, ``draws.bin``, ``meta.json``
* benchmark: ``esr_report.csv``, ``summary.csv``, ``meta.json``
"""
import argparse
from concurrent.futures import ProcessPoolExecutor
import csv
import json
import logging
import os
import platform
import sys

import numpy as np

from . import __version__
from ._backend import kernels
from .archive import DrawWriter
from .config import ConfigError, StateSettings, load_config
from .diagnostics import EssConfig, esr_report
from .errors import DataError
from .ffbs import StateSpaceSpec
from .models import (
    BinomLogitSeries,
    ChainConfig,
    NegBinSeries,
    posterior_predictive,
    run_chain,
)
from .synth import BenchDesign, gen_binom_series, gen_flu_standin, gen_negbin_series, write_dataset

log = logging.getLogger("pgdglm")

__all__ = ["cmd_benchmark", "cmd_fit", "cmd_simulate", "ingest_csv", "main"]


# ---------------------------------------------------------------------------
# ingestion

def _parse_float(text, row, col):
    try:
        return float(text)
    except ValueError:
        raise DataError(f"row {row}, column {col!r}: malformed number {text!r}") from None


def ingest_csv_with_index(path, mapping, family, n_trials=None, intercept_as_state=False):
    """Like :func:`ingest_csv` but also returns the time labels."""
    mapping = dict(mapping)
    y_col = mapping.get("y", "y")
    t_col = mapping.get("t")
    n_col = mapping.get("n")
    x_cols = mapping.get("x")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        if y_col not in header:
            raise DataError(f"{path}: response column {y_col!r} not in header")
        if x_cols is None:
            x_cols = [h for h in header if h.startswith("x") and h[1:].isdigit()]
        for col in x_cols:
            if col not in header:
                raise DataError(f"{path}: covariate column {col!r} not in header")
        if n_col is not None and n_col not in header:
            n_col = None
        if t_col is not None and t_col not in header:
            t_col = None
        ts, ys, ns, xs, obs = [], [], [], [], []
        for r, rec in enumerate(reader, start=2):
            cell = (rec[y_col] or "").strip()
            observed = cell != ""
            y = _parse_float(cell, r, y_col) if observed else np.nan
            if observed and y < 0:
                raise DataError(f"row {r}: negative count {cell}")
            ts.append(_parse_float(rec[t_col], r, t_col) if t_col else float(len(ts) + 1))
            if family == "binom-logit":
                ncell = (rec[n_col] or "").strip() if n_col else ""
                if ncell:
                    n = _parse_float(ncell, r, n_col)
                elif n_trials is not None:
                    n = float(n_trials)
                else:
                    raise DataError(f"row {r}: no trial count and no global n_trials")
                if observed and y > n:
                    raise DataError(f"row {r}: y={y:g} exceeds n={n:g}")
                ns.append(n)
            xs.append([_parse_float(rec[c], r, c) for c in x_cols])
            ys.append(y)
            obs.append(observed)
    if not ys:
        raise DataError(f"{path}: no data rows")
    x = np.asarray(xs, dtype=float).reshape(len(ys), len(x_cols))
    if intercept_as_state or x.shape[1] == 0:
        x = np.hstack([np.ones((len(ys), 1)), x])
    if family == "binom-logit":
        series = BinomLogitSeries(y=np.asarray(ys), n=np.asarray(ns), x=x, observed=np.asarray(obs))
    elif family == "neg-binom":
        series = NegBinSeries(y=np.asarray(ys), x=x, observed=np.asarray(obs))
    else:
        raise ValueError(f"unknown family {family!r}")
    return series, np.asarray(ts)


def ingest_csv(path, mapping, family="binom-logit", n_trials=None, intercept_as_state=False):
    """Read a response series from CSV.

    ``mapping`` names the columns for roles ``t``, ``y``, ``n`` and ``x`` (a
    list).  Blank responses become unobserved steps.  With
    ``intercept_as_state`` (or no covariate columns) a constant-1 column is
    prepended to the covariates.
    """
    return ingest_csv_with_index(path, mapping, family, n_trials, intercept_as_state)[0]


# ---------------------------------------------------------------------------
# shared plumbing

def _simulate_design(design, family=None):
    rng = np.random.default_rng(design.seed)
    truth = {}
    if design.family == "binom-logit":
        series, path, alpha = gen_binom_series(design, rng)
        truth = {"alpha": alpha, "betas": path.betas.tolist()}
    elif design.family == "neg-binom":
        series, path, alpha, d = gen_negbin_series(design, rng)
        truth = {"alpha": alpha, "dispersion": d, "betas": path.betas.tolist()}
    else:
        series, lam, d = gen_flu_standin(rng, dispersion=design.dispersion)
        truth = {"dispersion": d, "log_mean": lam.tolist()}
    if family is not None and series.family != family:
        raise ConfigError(f"design family {design.family!r} does not match model family {family!r}")
    return series, truth


def _load_data(cfg):
    if cfg.data is not None and cfg.data.path:
        series, t = ingest_csv_with_index(
            cfg.data.path, cfg.data.columns, cfg.family,
            n_trials=cfg.data.n_trials, intercept_as_state=cfg.data.intercept_as_state,
        )
        return series, t, {"source": "csv", "path": cfg.data.path}
    if cfg.design is None:
        raise ConfigError("config needs either data.path or a design")
    series, truth = _simulate_design(cfg.design, cfg.family)
    return series, np.arange(1, series.T + 1, dtype=float), {"source": "design", "truth": truth}


def _state_spec(cfg, p):
    """State spec from the config; a design's own dynamics apply when no state is given."""
    if cfg.state is None:
        if cfg.design is not None and cfg.data is None:
            return cfg.design.state_spec()
        st = StateSettings()
    else:
        st = cfg.state
    return StateSpaceSpec.ar1(p, phi=st.phi, w=st.w, mu=st.mu, m0=st.m0, c0=st.c0)


def _streams(cfg):
    return np.random.SeedSequence(cfg.chain.seed).spawn(cfg.chain.batches + 1)


def _chain_config(cfg, seed=0):
    c = cfg.chain
    return ChainConfig(iterations=c.iterations, burnin=c.burnin, thin=c.thin, seed=seed)


def _environment():
    return {
        "package_version": __version__,
        "backend": kernels.name,
        "numpy": np.__version__,
        "python": platform.python_version(),
    }


def _write_meta(out_dir, cfg, run):
    path = os.path.join(out_dir, "meta.json")
    with open(path, "w") as fh:
        json.dump({"config": cfg.to_dict(), "run": run}, fh, indent=2, default=_json_default,
                  allow_nan=False)
    return path


def _json_default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not JSON serialisable: {type(obj).__name__}")


def _fmt(v):
    return repr(float(v))


# ---------------------------------------------------------------------------
# commands

def cmd_simulate(cfg):
    """Write the design's synthetic data set and its truth."""
    if cfg.design is None:
        raise ConfigError("simulate needs a design")
    os.makedirs(cfg.out, exist_ok=True)
    series, truth = _simulate_design(cfg.design)
    data_path = os.path.join(cfg.out, "data.csv")
    write_dataset(data_path, series)
    meta = _write_meta(cfg.out, cfg, {"design": cfg.design.to_dict(), "truth": truth,
                                      "environment": _environment()})
    return {"data": data_path, "meta": meta}


def _run_batch(args):
    series, spec, priors, chain_cfg, alpha, d, seed_seq = args
    rng = np.random.default_rng(seed_seq)
    return run_chain(series, priors, chain_cfg, spec, alpha=alpha, dispersion=d, rng=rng)


def cmd_fit(cfg):
    """Fit one chain; write posterior summaries, predictive bands, draws and metadata."""
    os.makedirs(cfg.out, exist_ok=True)
    series, t_index, source = _load_data(cfg)
    spec = _state_spec(cfg, series.P)
    streams = _streams(cfg)
    out = _run_batch((series, spec, cfg.priors, _chain_config(cfg), cfg.alpha, cfg.dispersion,
                      streams[0]))
    eta = out.alpha[:, None] + np.einsum("mtp,tp->mt", out.betas, series.x)
    eta_name = "psi" if series.family == "binom-logit" else "lambda"
    paths = {}

    paths["summary"] = os.path.join(cfg.out, "summary.csv")
    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "quantity", "mean", "lower", "upper"])
        quantities = [(f"beta{i + 1}", out.betas[:, :, i]) for i in range(series.P)]
        quantities.append((eta_name, eta))
        for name, draws in quantities:
            mean = draws.mean(axis=0)
            lo, hi = np.quantile(draws, [0.025, 0.975], axis=0)
            for t in range(series.T):
                writer.writerow([f"{t_index[t]:g}", name, _fmt(mean[t]), _fmt(lo[t]), _fmt(hi[t])])

    yrep = posterior_predictive(series, out, np.random.default_rng(streams[-1]))
    paths["predictive"] = os.path.join(cfg.out, "predictive.csv")
    with open(paths["predictive"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "observed", "y", "mean", "lower", "upper"])
        mean = yrep.mean(axis=0)
        lo, hi = np.quantile(yrep, [0.025, 0.975], axis=0)
        for t in range(series.T):
            obs = bool(series.observed[t])
            writer.writerow([f"{t_index[t]:g}", int(obs), f"{series.y[t]:g}" if obs else "",
                             _fmt(mean[t]), _fmt(lo[t]), _fmt(hi[t])])

    p = series.P
    columns = [f"beta[{t + 1},{i + 1}]" for t in range(series.T) for i in range(p)]
    columns += ["alpha"] + [f"mu[{i + 1}]" for i in range(p)] + [f"phi[{i + 1}]" for i in range(p)]
    columns += [f"w[{i + 1}]" for i in range(p)] + ["dispersion"]
    paths["draws"] = os.path.join(cfg.out, "draws.bin")
    with DrawWriter(paths["draws"], columns, out.n_draws, seed=cfg.chain.seed,
                    family=series.family) as writer:
        for m in range(out.n_draws):
            writer.write(np.concatenate([
                out.betas[m].ravel(), [out.alpha[m]], out.mu[m], out.phi[m], out.w[m],
                [out.dispersion[m]],
            ]))

    run = {
        "environment": _environment(),
        "data": source,
        "timings": {"burnin_seconds": out.burnin_seconds, "sampling_seconds": out.sampling_seconds},
        "seed": {"root": cfg.chain.seed, "chain_stream": 0, "predictive_stream": cfg.chain.batches},
        "dispersion_acceptance_rate": None if np.isnan(out.acceptance_rate) else out.acceptance_rate,
        "n_draws": out.n_draws,
        "posterior_means": {
            "alpha": float(out.alpha.mean()),
            "dispersion": float(out.dispersion.mean()),
            "mu": out.mu.mean(axis=0).tolist(),
            "phi": out.phi.mean(axis=0).tolist(),
            "w": out.w.mean(axis=0).tolist(),
        },
    }
    paths["meta"] = _write_meta(cfg.out, cfg, run)
    return paths


def cmd_benchmark(cfg):
    """Run the batch protocol and write the ESS/ESR report."""
    os.makedirs(cfg.out, exist_ok=True)
    series, _, source = _load_data(cfg)
    spec = _state_spec(cfg, series.P)
    streams = _streams(cfg)[: cfg.chain.batches]
    jobs = [(series, spec, cfg.priors, _chain_config(cfg), cfg.alpha, cfg.dispersion, s)
            for s in streams]
    if cfg.chain.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.chain.workers) as pool:
            outputs = list(pool.map(_run_batch, jobs))
    else:
        outputs = []
        for b, job in enumerate(jobs):
            outputs.append(_run_batch(job))
            log.info("batch %d/%d: %.2fs sampling", b + 1, len(jobs), outputs[-1].sampling_seconds)
    t_len, p = series.T, series.P
    # component order: i outer, t inner
    chains = np.stack([o.betas.transpose(2, 1, 0).reshape(p * t_len, -1) for o in outputs])
    labels = [(i + 1, t + 1) for i in range(p) for t in range(t_len)]
    ess_cfg = EssConfig(rule=cfg.ess.rule, max_lag=cfg.ess.max_lag, batches=cfg.chain.batches,
                        window=outputs[0].n_draws)
    report = esr_report(chains, [o.sampling_seconds for o in outputs], ess_cfg, labels)
    paths = {"esr_report": os.path.join(cfg.out, "esr_report.csv"),
             "summary": os.path.join(cfg.out, "summary.csv")}
    report.to_csv(paths["esr_report"])
    summary = report.summary()
    summary["burnin_seconds"] = float(sum(o.burnin_seconds for o in outputs))
    summary["draws_per_batch"] = outputs[0].n_draws
    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(summary))
        writer.writeheader()
        writer.writerow(summary)
    run = {
        "environment": _environment(),
        "data": {k: v for k, v in source.items() if k != "truth"},
        "summary": summary,
        "batch_sampling_seconds": report.seconds.tolist(),
        "batch_burnin_seconds": [o.burnin_seconds for o in outputs],
    }
    paths["meta"] = _write_meta(cfg.out, cfg, run)
    paths["report"] = report
    return paths


# ---------------------------------------------------------------------------

def build_parser():
    parser = argparse.ArgumentParser(prog="pgdglm", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("simulate", "write a synthetic data set"),
                       ("fit", "fit a model and write posterior summaries"),
                       ("benchmark", "run the batched ESS/ESR protocol")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="JSON run configuration (or a meta.json)")
        p.add_argument("--seed", type=int)
        p.add_argument("--iterations", type=int)
        p.add_argument("--burnin", type=int)
        p.add_argument("--batches", type=int)
        p.add_argument("--out")
    return parser


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "benchmark": cmd_benchmark}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config).with_overrides(
            seed=args.seed, iterations=args.iterations, burnin=args.burnin,
            batches=args.batches, out=args.out,
        )
        result = COMMANDS[args.command](cfg)
    except (ConfigError, DataError, FileNotFoundError) as exc:
        print(f"pgdglm: error: {exc}", file=sys.stderr)
        return 2
    if args.command == "benchmark":
        s = result["report"].summary()
        print(f"median ESR {s['median_esr']:.2f}/s over {s['components']} components, "
              f"{s['batches']} batches, {s['total_seconds']:.2f}s sampling")
    for key, path in result.items():
        if isinstance(path, str):
            print(f"{key}: {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
