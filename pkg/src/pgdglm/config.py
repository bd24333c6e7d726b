"""Run configuration: JSON in, validated dataclasses out.

Unknown keys are rejected at every level.  A ``meta.json`` written by a run
is itself accepted as a config: its ``"config"`` member is the fully
resolved configuration of that run.
"""
from dataclasses import asdict, dataclass, field, fields
import json

from .models import HyperPriorSpec
from .synth import BenchDesign

__all__ = ["ChainSettings", "DataSource", "EssSettings", "RunConfig", "StateSettings",
           "load_config"]


class ConfigError(ValueError):
    pass


def _build(cls, raw, where):
    if raw is None:
        return cls()
    if isinstance(raw, cls):
        return raw
    if not isinstance(raw, dict):
        raise ConfigError(f"{where}: expected an object, got {type(raw).__name__}")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown key(s) {', '.join(unknown)}")
    try:
        return cls(**raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


@dataclass
class DataSource:
    """CSV input: file path, column mapping and global trial count."""

    path: str = None
    columns: dict = field(default_factory=lambda: {"t": "t", "y": "y", "n": "n", "x": None})
    n_trials: int = None
    intercept_as_state: bool = False

    def __post_init__(self):
        allowed = {"t", "y", "n", "x"}
        unknown = sorted(set(self.columns) - allowed)
        if unknown:
            raise ValueError(f"unknown column role(s) {', '.join(unknown)}")


@dataclass
class StateSettings:
    """AR(1) state; ``c0`` of None means the stationary covariance.

    Omitted entirely, a synthetic design supplies its own dynamics.
    """

    mu: object = 0.0
    phi: object = 0.95
    w: object = 0.01
    m0: object = None
    c0: object = None


@dataclass
class ChainSettings:
    iterations: int = 12_000
    burnin: int = 2_000
    thin: int = 1
    batches: int = 10
    seed: int = 0
    workers: int = 1

    def __post_init__(self):
        if not self.iterations > self.burnin >= 0:
            raise ValueError("need iterations > burnin >= 0")
        if self.batches < 1:
            raise ValueError("batches must be >= 1")
        if self.thin < 1 or self.workers < 1:
            raise ValueError("thin and workers must be >= 1")


@dataclass
class EssSettings:
    rule: str = "ips"
    max_lag: int = None


@dataclass
class RunConfig:
    family: str = "binom-logit"
    data: DataSource = None
    design: BenchDesign = None
    state: StateSettings = None
    alpha: float = 0.0
    dispersion: float = 1.0
    priors: HyperPriorSpec = None
    chain: ChainSettings = None
    ess: EssSettings = None
    out: str = "out"

    def __post_init__(self):
        if self.family not in ("binom-logit", "neg-binom"):
            raise ValueError(f"unknown model family {self.family!r}")
        self.data = None if self.data is None else _build(DataSource, self.data, "data")
        self.design = None if self.design is None else _build(BenchDesign, self.design, "design")
        self.state = None if self.state is None else _build(StateSettings, self.state, "state")
        self.priors = _build(HyperPriorSpec, self.priors, "priors")
        self.chain = _build(ChainSettings, self.chain, "chain")
        self.ess = _build(EssSettings, self.ess, "ess")
        if not self.dispersion > 0:
            raise ValueError("dispersion must be positive")

    @classmethod
    def from_dict(cls, raw):
        return _build(cls, raw, "config")

    def to_dict(self):
        return asdict(self)

    def with_overrides(self, **overrides):
        raw = self.to_dict()
        for key in ("seed", "iterations", "burnin", "batches"):
            if overrides.get(key) is not None:
                raw["chain"][key] = overrides[key]
        if overrides.get("out") is not None:
            raw["out"] = overrides["out"]
        return RunConfig.from_dict(raw)


def load_config(path):
    with open(path) as fh:
        raw = json.load(fh)
    if isinstance(raw, dict) and set(raw) == {"config", "run"}:
        raw = raw["config"]
    return RunConfig.from_dict(raw)
