"""Effective sample size and effective sampling rate.

ESS = M / (1 + 2 sum_{k=1}^{l} rho_k), with rho_k the biased (1/M
normalised) lag-k autocorrelation.  The cutoff l follows Geyer's initial
positive sequence unless a fixed lag is requested.  ESR is ESS divided by
the seconds spent producing the post-burn-in draws; the benchmark summary
is the median over components of the batch-averaged ESR.
"""
import csv
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateChainError

__all__ = [
    "EsrReport",
    "EssConfig",
    "autocorrelation",
    "autocovariance",
    "autocovariances",
    "ess",
    "ess_many",
    "esr_report",
]

ESS_CAP = 1.05


@dataclass(frozen=True)
class EssConfig:
    """Lag-cutoff rule: ``"ips"`` (initial positive sequence) or ``"fixed"`` with ``max_lag``."""

    rule: str = "ips"
    max_lag: int = None
    batches: int = 10
    window: int = 10_000

    def __post_init__(self):
        if self.rule not in ("ips", "fixed"):
            raise ValueError(f"unknown lag rule {self.rule!r}")
        if self.rule == "fixed" and (self.max_lag is None or self.max_lag < 1):
            raise ValueError("fixed lag rule needs max_lag >= 1")


def autocovariance(chain, k):
    """Biased lag-k sample autocovariance (divides by M, not M - k)."""
    x = np.asarray(chain, dtype=float)
    m = x.shape[0]
    if not 0 <= k < m:
        raise ValueError(f"lag {k} outside [0, {m})")
    d = x - x.mean()
    return float(np.dot(d[: m - k], d[k:]) / m)


def autocovariances(chains, axis=0):
    """All biased autocovariances along ``axis`` via FFT."""
    x = np.moveaxis(np.asarray(chains, dtype=float), axis, 0)
    m = x.shape[0]
    d = x - x.mean(axis=0)
    n_fft = 1 << (2 * m - 1).bit_length()
    f = np.fft.rfft(d, n=n_fft, axis=0)
    acov = np.fft.irfft(f * np.conj(f), n=n_fft, axis=0)[:m] / m
    return np.moveaxis(acov, 0, axis)


def autocorrelation(chain, k):
    gamma0 = autocovariance(chain, 0)
    if gamma0 <= 0.0:
        raise DegenerateChainError("chain is constant; autocorrelation undefined")
    return autocovariance(chain, k) / gamma0


def _tau_ips(rho):
    # rho[0] == 1; pairs Gamma_j = rho_2j + rho_2j+1, stop before the first non-positive pair
    m = rho.shape[0]
    n_pairs = m // 2
    pairs = rho[: 2 * n_pairs : 2] + rho[1 : 2 * n_pairs : 2]
    nonpos = np.flatnonzero(pairs <= 0.0)
    stop = nonpos[0] if nonpos.size else n_pairs
    return -1.0 + 2.0 * pairs[:stop].sum()


def ess_many(chains, cfg=EssConfig()):
    """ESS of each column of an (M, K) array of chains."""
    x = np.asarray(chains, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    m = x.shape[0]
    if m < 100:
        raise ValueError(f"need at least 100 draws, got {m}")
    acov = autocovariances(x, axis=0)
    gamma0 = acov[0]
    if np.any(gamma0 <= 0.0):
        k = int(np.flatnonzero(gamma0 <= 0.0)[0])
        raise DegenerateChainError(f"component {k} is constant; ESS undefined")
    rho = acov / gamma0
    out = np.empty(x.shape[1])
    for j in range(x.shape[1]):
        if cfg.rule == "fixed":
            lag = min(cfg.max_lag, m - 1)
            tau = 1.0 + 2.0 * rho[1 : lag + 1, j].sum()
        else:
            tau = _tau_ips(rho[:, j])
        out[j] = m / tau if tau > 0 else np.inf
    return np.minimum(out, ESS_CAP * m)


def ess(chain, cfg=EssConfig()):
    """Effective sample size of one chain, clamped to (0, 1.05 M]."""
    return float(ess_many(np.asarray(chain, dtype=float)[:, None], cfg)[0])


def _batch_mean(values):
    # sort first so the average does not depend on batch order
    return np.sort(values, axis=0).mean(axis=0)


@dataclass
class EsrReport:
    """Per-component batch-mean ESS/ESR and the median ESR."""

    ess: np.ndarray
    seconds: np.ndarray
    mean_ess: np.ndarray
    mean_esr: np.ndarray
    median_esr: float
    labels: list = field(default_factory=list)

    @property
    def total_seconds(self):
        return float(np.sum(self.seconds))

    def rows(self):
        for (i, t), e, r in zip(self.labels, self.mean_ess, self.mean_esr):
            yield {"i": i, "t": t, "mean_ess": float(e), "mean_esr": float(r)}

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=["i", "t", "mean_ess", "mean_esr"])
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})

    def summary(self):
        return {
            "median_esr": float(self.median_esr),
            "total_seconds": self.total_seconds,
            "batches": int(self.seconds.shape[0]),
            "components": int(self.mean_ess.shape[0]),
            "median_ess": float(np.median(self.mean_ess)),
        }


def esr_report(chains, timings, cfg=EssConfig(), labels=None):
    """ESS/ESR report from ``chains`` shaped (batches, components, draws).

    ``timings`` holds the post-burn-in seconds of each batch.  ``labels``
    names the components as (i, t) pairs, 1-based; by default they are
    numbered (1, k).
    """
    x = np.asarray(chains, dtype=float)
    if x.ndim == 2:
        x = x[None]
    if x.ndim != 3:
        raise ValueError("chains must be shaped (batches, components, draws)")
    seconds = np.asarray(timings, dtype=float).ravel()
    n_batch, n_comp, _ = x.shape
    if seconds.shape[0] != n_batch:
        raise ValueError(f"{seconds.shape[0]} timings for {n_batch} batches")
    if np.any(seconds <= 0):
        raise ValueError("timings must be positive")
    if labels is None:
        labels = [(1, k + 1) for k in range(n_comp)]
    if len(labels) != n_comp:
        raise ValueError(f"{len(labels)} labels for {n_comp} components")
    ess_b = np.stack([ess_many(x[b].T, cfg) for b in range(n_batch)])
    esr_b = ess_b / seconds[:, None]
    mean_ess = _batch_mean(ess_b)
    mean_esr = _batch_mean(esr_b)
    return EsrReport(ess=ess_b, seconds=seconds, mean_ess=mean_ess, mean_esr=mean_esr,
                     median_esr=float(np.median(mean_esr)), labels=list(labels))
