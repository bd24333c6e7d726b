"""Polya-Gamma Gibbs samplers for dynamic binomial-logit and negative-binomial models.

The hot kernels (Polya-Gamma draws and forward filtering / backward
sampling) come from a compiled extension when one is built and from a
pure-Python module otherwise; ``BACKEND`` names the one in use and
``PGDGLM_BACKEND`` (``auto``, ``cython``, ``python``) overrides the choice.
"""
__version__ = "0.1.0"

from ._backend import kernels as _kernels
from .diagnostics import EsrReport, EssConfig, ess, ess_many, esr_report
from .errors import (
    DataError,
    DegenerateChainError,
    FilterBreakdownError,
    PGSamplerError,
    RejectionCapError,
)
from .ffbs import (
    FilterResult,
    LatentPath,
    PseudoData,
    PseudoObservation,
    StateSpaceSpec,
    backward_sample,
    ffbs_draw,
    forward_filter,
    simulate_dlm,
    stationary_covariance,
)
from .models import (
    BinomLogitSeries,
    ChainConfig,
    ChainOutput,
    HyperPriorSpec,
    NegBinSeries,
    gibbs_step,
    posterior_predictive,
    run_chain,
)
from .pgsampler import PGParams, pg_density_series, pg_mean, pg_variance, sample_pg, sample_pg1, sample_pg_array
from .synth import BenchDesign, gen_binom_series, gen_flu_standin, gen_negbin_series

BACKEND = _kernels.name
