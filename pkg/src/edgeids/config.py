"""Experiment configuration: defaults, JSON round-trip, flag overrides.

One flat JSON file configures a whole run.  Every value is validated by the
owning module's constructor before anything starts, and the effective
config is snapshotted byte-identically into each run artifact so any run
can be reproduced from its own snapshot.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass, field

from .agent import AgentHyperparams, EpsilonSchedule
from .gateway_env import (
    AttackScenario,
    EnvParams,
    ResourceModelConfig,
    TrafficConfig,
)
from .sustain import LedgerLimits, RewardWeights, g_per_kwh_to_g_per_joule


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


AGENT_KINDS = ("deepedge", "autodrl", "tabular")


@dataclass
class NeuralConfig:
    ae_hidden: int = 16
    latent_dim: int = 8
    ae_lr: float = 0.05
    ae_epochs: int = 150
    lstm_hidden: int = 8
    lstm_window: int = 8
    lstm_lr: float = 1.0
    q_hidden: list = field(default_factory=lambda: [32, 32])

    def __post_init__(self):
        if min(self.ae_hidden, self.latent_dim, self.lstm_hidden,
               self.lstm_window) < 1:
            raise ConfigError("network dimensions must be positive")
        if self.ae_lr <= 0 or self.lstm_lr <= 0 or self.ae_epochs < 1:
            raise ConfigError("learning rates and epochs must be positive")
        if not self.q_hidden or min(self.q_hidden) < 1:
            raise ConfigError("q_hidden must list positive layer widths")


@dataclass
class WarmupConfig:
    steps: int = 120
    tau_percentile: float = 99.0

    def __post_init__(self):
        if self.steps < 10:
            raise ConfigError("warm-up needs at least 10 benign steps")
        if not 50.0 <= self.tau_percentile < 100.0:
            raise ConfigError("tau percentile must lie in [50, 100)")


@dataclass
class SustainConfig:
    weights: RewardWeights = field(default_factory=RewardWeights)
    kappa_g_per_kwh: float = 400.0
    kappa_max_g_per_kwh: float = 500.0
    kappa_schedule_file: str = None
    p_max_w: float = 5.0
    e_max_j: float = None          # None: no cumulative energy cap
    m_max: float = 1.0
    reward_window: int = 50

    def __post_init__(self):
        if self.kappa_g_per_kwh < 0 or self.kappa_max_g_per_kwh <= 0:
            raise ConfigError("carbon intensities must be positive")
        if self.kappa_g_per_kwh > self.kappa_max_g_per_kwh:
            raise ConfigError("kappa exceeds kappa_max")
        if self.reward_window < 1:
            raise ConfigError("reward window must be positive")

    def kappa_g_per_j(self):
        return g_per_kwh_to_g_per_joule(self.kappa_g_per_kwh)

    def ledger_limits(self):
        return LedgerLimits(
            p_max=self.p_max_w,
            kappa_max=g_per_kwh_to_g_per_joule(self.kappa_max_g_per_kwh),
            e_max=float("inf") if self.e_max_j is None else self.e_max_j,
            m_max=self.m_max,
        )


@dataclass
class TabularConfig:
    n_updates: int = 200_000
    eta_exponent: float = 0.6
    probe_every: int = 500
    episodes: int = 80
    steps_per_episode: int = 100

    def __post_init__(self):
        if self.n_updates < 1 or self.probe_every < 1:
            raise ConfigError("update counts must be positive")
        if not 0.5 < self.eta_exponent < 1.0:
            raise ConfigError("eta exponent must lie in (0.5, 1)")
        if self.episodes < 1 or self.steps_per_episode < 1:
            raise ConfigError("episode counts must be positive")


@dataclass
class EnvConfig:
    benign_rate: float = 50.0
    benign_sources: int = 40
    dt: float = 1.0
    episode_len: int = 1000
    attacks: list = field(default_factory=lambda: [
        AttackScenario("syn_flood", 5000.0, 200, 700, 20)])
    rate_cap_pps: float = 1500.0
    syn_cap_pps: float = 150.0
    tau_p: float = 0.5
    source_window: int = 10
    blacklist_expiry: int = 300
    flag_rate_threshold: float = 200.0

    def __post_init__(self):
        # constructing the module objects performs the real validation
        try:
            self.traffic_config()
            self.env_params()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def traffic_config(self):
        return TrafficConfig(self.benign_rate, self.benign_sources, self.dt,
                             self.episode_len, list(self.attacks))

    def env_params(self):
        return EnvParams(self.rate_cap_pps, self.syn_cap_pps, self.tau_p,
                         self.source_window, self.blacklist_expiry,
                         self.flag_rate_threshold)


@dataclass
class ExperimentConfig:
    agent: str = "deepedge"
    seed: int = 0
    episodes: int = 6
    pretrain_episodes: int = 2     # autodrl supervised phase
    hyper: AgentHyperparams = field(default_factory=AgentHyperparams)
    env: EnvConfig = field(default_factory=EnvConfig)
    neural: NeuralConfig = field(default_factory=NeuralConfig)
    warmup: WarmupConfig = field(default_factory=WarmupConfig)
    sustain: SustainConfig = field(default_factory=SustainConfig)
    tabular: TabularConfig = field(default_factory=TabularConfig)
    resources: ResourceModelConfig = field(default_factory=ResourceModelConfig)

    def __post_init__(self):
        if self.agent not in AGENT_KINDS:
            raise ConfigError(f"agent must be one of {AGENT_KINDS}")
        if self.episodes < 0 or self.pretrain_episodes < 0:
            raise ConfigError("episode counts must be >= 0")
        if self.sustain.weights.variant != ("autodrl" if self.agent == "autodrl"
                                            else "deepedge"):
            # keep the reward variant in lockstep with the agent kind
            self.sustain.weights = dataclasses.replace(
                self.sustain.weights,
                variant="autodrl" if self.agent == "autodrl" else "deepedge")


def default_config(agent="deepedge", **overrides):
    cfg = ExperimentConfig(agent=agent)
    if agent == "autodrl" and cfg.hyper.carbon_weight == 0.0:
        cfg.hyper.carbon_weight = 1.0  # carbon-weighted TD target
    for key, value in overrides.items():
        if not hasattr(cfg, key):
            raise ConfigError(f"unknown config field {key!r}")
        setattr(cfg, key, value)
    return cfg


# ---------------------------------------------------------------------------
# dict / JSON round-trip
# ---------------------------------------------------------------------------

_SECTIONS = {
    "hyper": AgentHyperparams,
    "env": EnvConfig,
    "neural": NeuralConfig,
    "warmup": WarmupConfig,
    "sustain": SustainConfig,
    "tabular": TabularConfig,
    "resources": ResourceModelConfig,
}


def to_dict(cfg):
    out = dataclasses.asdict(cfg)
    # dataclasses.asdict already recurses; normalize tuples for JSON
    def normalize(value):
        if isinstance(value, tuple):
            return [normalize(v) for v in value]
        if isinstance(value, list):
            return [normalize(v) for v in value]
        if isinstance(value, dict):
            return {k: normalize(v) for k, v in value.items()}
        if isinstance(value, float) and value in (float("inf"), float("-inf")):
            return None
        return value
    return normalize(out)


def _build(cls, data, path):
    field_types = {f.name: f for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in data.items():
        if key not in field_types:
            raise ConfigError(f"unknown key {path}{key}")
        kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"invalid section {path.rstrip('.')}: {exc}") from exc


def from_dict(data):
    data = dict(data)
    kwargs = {}
    for section, cls in _SECTIONS.items():
        if section not in data:
            continue
        raw = dict(data.pop(section))
        if section == "env" and "attacks" in raw:
            raw["attacks"] = [
                _build(AttackScenario, {**a, "size_range": tuple(a.get("size_range", (40, 1200))),
                                        "jitter_range": tuple(a.get("jitter_range", (0.0, 0.5)))},
                       "env.attacks.")
                for a in raw["attacks"]
            ]
        if section == "hyper" and "epsilon" in raw:
            raw["epsilon"] = _build(EpsilonSchedule, raw["epsilon"], "hyper.epsilon.")
        if section == "sustain" and "weights" in raw:
            raw["weights"] = _build(RewardWeights, raw["weights"], "sustain.weights.")
        kwargs[section] = _build(cls, raw, f"{section}.")
    for key, value in data.items():
        if key not in ("agent", "seed", "episodes", "pretrain_episodes"):
            raise ConfigError(f"unknown config key {key!r}")
        kwargs[key] = value
    try:
        return ExperimentConfig(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def dumps(cfg):
    """Canonical JSON text; identical configs serialize to identical bytes."""
    return json.dumps(to_dict(cfg), indent=2, sort_keys=True) + "\n"


def save(cfg, path):
    with open(path, "w") as f:
        f.write(dumps(cfg))


def load(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config file: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return from_dict(data)


# ---------------------------------------------------------------------------
# --set key.path=value overrides
# ---------------------------------------------------------------------------

def apply_overrides(cfg, assignments):
    """Apply repeatable `--set section.key=value` assignments.

    Values parse as JSON when possible (numbers, booleans, lists) and fall
    back to bare strings.  Returns a freshly validated config.
    """
    data = to_dict(cfg)
    for assignment in assignments:
        if "=" not in assignment:
            raise ConfigError(f"override {assignment!r} is not key=value")
        key, _, raw = assignment.partition("=")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = data
        parts = key.strip().split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                raise ConfigError(f"unknown config path {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    return from_dict(data)
