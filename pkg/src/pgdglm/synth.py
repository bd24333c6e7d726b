"""Synthetic data for the benchmark designs.

A design draws a P-dimensional AR(1) path with Phi = phi_diag * I and
W = w_diag * I, equicorrelated Gaussian covariates, and responses from
either Binom(n, logistic(alpha + x'beta)) or NB(d) with log-mean
alpha + x'beta.
"""
import csv
from dataclasses import asdict, dataclass, field
import json
import math

import numpy as np

from .ffbs import StateSpaceSpec, simulate_dlm
from .models import BinomLogitSeries, NegBinSeries

__all__ = [
    "BenchDesign",
    "gen_binom_series",
    "gen_covariates",
    "gen_flu_standin",
    "gen_negbin_series",
    "read_dataset",
    "write_dataset",
]

FAMILIES = ("binom-logit", "neg-binom", "flu-standin")


@dataclass
class BenchDesign:
    """Parameters of one synthetic data set.

    ``correlation`` picks the covariate equicorrelation: ``corr_low`` or
    ``corr_high``.  ``alpha`` is the log-odds intercept for binomial data
    and the log-mean intercept (log 10, log 100) for negative binomial data.
    ``missing`` lists 1-based inclusive [start, end] blocks of unobserved
    steps.
    """

    family: str = "binom-logit"
    T: int = 100
    P: int = 2
    phi_diag: float = 0.95
    w_diag: float = 0.01
    alpha: float = 0.0
    n_trials: int = 1
    correlation: str = "low"
    corr_low: float = 0.1
    corr_high: float = 0.9
    dispersion: float = 4.0
    stationary_init: bool = True
    missing: list = field(default_factory=list)
    seed: int = 0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if not abs(self.phi_diag) < 1:
            raise ValueError("phi_diag must lie in (-1, 1)")
        if self.n_trials < 1:
            raise ValueError("n_trials must be >= 1")
        if self.T < 1 or self.P < 1:
            raise ValueError("T and P must be >= 1")
        if self.w_diag < 0:
            raise ValueError("w_diag must be non-negative")
        if self.family == "flu-standin" and self.P != 1:
            raise ValueError("flu-standin data carry a single intercept state; set P to 1")
        if self.correlation not in ("low", "high"):
            raise ValueError("correlation must be 'low' or 'high'")
        if not self.dispersion > 0:
            raise ValueError("dispersion must be positive")
        self.missing = [list(map(int, block)) for block in self.missing]

    @property
    def corr_factor(self):
        return self.corr_low if self.correlation == "low" else self.corr_high

    def state_spec(self):
        if self.stationary_init and self.w_diag > 0:
            return StateSpaceSpec.ar1(self.P, phi=self.phi_diag, w=self.w_diag)
        return StateSpaceSpec(mu=np.zeros(self.P), phi=self.phi_diag, w=self.w_diag,
                              m0=np.zeros(self.P), c0=0.0 if self.w_diag == 0 else self.w_diag)

    def observed_mask(self):
        obs = np.ones(self.T, dtype=bool)
        for start, end in self.missing:
            obs[max(start - 1, 0):end] = False
        return obs

    def to_dict(self):
        return asdict(self)


def gen_covariates(design, rng):
    """T x P rows from N(0, (1 - f) I + f 11')."""
    f = design.corr_factor
    p = design.P
    cov = (1.0 - f) * np.eye(p) + f * np.ones((p, p))
    return rng.multivariate_normal(np.zeros(p), cov, size=design.T, method="cholesky")


def gen_binom_series(design, rng):
    """Returns (series, true path, true alpha)."""
    if design.family != "binom-logit":
        raise ValueError("design is not binomial")
    x = gen_covariates(design, rng)
    path = simulate_dlm(design.state_spec(), design.T, rng)
    psi = design.alpha + np.einsum("tp,tp->t", x, path.betas)
    y = rng.binomial(design.n_trials, 1.0 / (1.0 + np.exp(-psi))).astype(float)
    obs = design.observed_mask()
    y[~obs] = np.nan
    return BinomLogitSeries(y=y, n=design.n_trials, x=x, observed=obs), path, design.alpha


def _nb_draw(lam, d, rng):
    # numpy counts failures before d successes; success probability d / (d + mean)
    return rng.negative_binomial(d, 1.0 / (1.0 + np.exp(lam - math.log(d)))).astype(float)


def gen_negbin_series(design, rng):
    """Returns (series, true path, true alpha, true d); mean of y_t is exp(lambda_t)."""
    if design.family != "neg-binom":
        raise ValueError("design is not negative binomial")
    x = gen_covariates(design, rng)
    path = simulate_dlm(design.state_spec(), design.T, rng)
    lam = design.alpha + np.einsum("tp,tp->t", x, path.betas)
    y = _nb_draw(lam, design.dispersion, rng)
    obs = design.observed_mask()
    y[~obs] = np.nan
    return NegBinSeries(y=y, x=x, observed=obs), path, design.alpha, design.dispersion


def gen_flu_standin(rng, years=4, weeks=52, base=3.0, amplitude=1.5, dispersion=4.0,
                    missing=(21, 41)):
    """Seasonal weekly count series with an off-season gap in every year.

    Log-mean is base + amplitude * cos(2 pi (week - 4) / weeks) plus a small
    AR(1) wobble; weeks ``missing[0]..missing[1]`` of each year are blank.
    Returns (series, true log-mean, d).
    """
    t_len = years * weeks
    week = np.arange(t_len) % weeks + 1
    wobble = np.empty(t_len)
    wobble[0] = 0.0
    for t in range(1, t_len):
        wobble[t] = 0.8 * wobble[t - 1] + 0.15 * rng.standard_normal()
    lam = base + amplitude * np.cos(2.0 * math.pi * (week - 4) / weeks) + wobble
    y = _nb_draw(lam, dispersion, rng)
    obs = ~((week >= missing[0]) & (week <= missing[1]))
    y[~obs] = np.nan
    return NegBinSeries(y=y, x=np.ones((t_len, 1)), observed=obs), lam, dispersion


def write_dataset(path, series, meta=None, meta_path=None):
    """CSV with columns t, y, n, x1..xP, observed; optional JSON sidecar."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y", "n"] + [f"x{j + 1}" for j in range(series.P)] + ["observed"])
        n = getattr(series, "n", None)
        for t in range(series.T):
            obs = bool(series.observed[t])
            y = f"{series.y[t]:g}" if obs else ""
            nt = f"{n[t]:g}" if n is not None else ""
            writer.writerow([t + 1, y, nt] + [repr(float(v)) for v in series.x[t]] + [int(obs)])
    if meta is not None and meta_path is not None:
        with open(meta_path, "w") as fh:
            json.dump(meta, fh, indent=2)


def read_dataset(path, family):
    """Inverse of :func:`write_dataset`."""
    from .cli import ingest_csv

    with open(path) as fh:
        header = next(csv.reader(fh))
    x_cols = [h for h in header if h.startswith("x")]
    mapping = {"t": "t", "y": "y", "x": x_cols}
    if family == "binom-logit":
        mapping["n"] = "n"
    return ingest_csv(path, mapping, family=family)
