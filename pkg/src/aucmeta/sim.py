"""Synthetic registries drawn from the full hierarchical model.

Each CPM gets its own random stream spawned from the config seed, so a
registry is reproducible and per-CPM draws do not depend on generation order.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import CpmSeries, HyperParams, ValidationStudy
from .errors import InvalidArgument

# Share of CPMs by number of validations: median 2, IQR [1, 3].
DEFAULT_K_DISTRIBUTION = {1: 0.45, 2: 0.20, 3: 0.15, 4: 0.05, 5: 0.05, 6: 0.04, 8: 0.03, 10: 0.03}


@dataclass(frozen=True)
class LognormalSe:
    """Within-study standard errors ``s_ij ~ exp(N(log median, sigma^2))``."""

    median: float = 0.03
    sigma: float = 0.4

    def __post_init__(self):
        if not (self.median > 0 and self.sigma >= 0):
            raise InvalidArgument("se distribution needs median > 0 and sigma >= 0")

    def sample(self, rng, size):
        return self.median * np.exp(self.sigma * rng.standard_normal(size))


@dataclass(frozen=True)
class SimConfig:
    hp: HyperParams
    n_cpms: int
    k_distribution: dict = field(default_factory=lambda: dict(DEFAULT_K_DISTRIBUTION))
    se_distribution: LognormalSe = field(default_factory=LognormalSe)
    seed: int = 0

    def __post_init__(self):
        if self.n_cpms < 1:
            raise InvalidArgument("n_cpms must be positive")
        ks = {int(k): float(p) for k, p in self.k_distribution.items()}
        if not ks or min(ks) < 1 or any(p < 0 for p in ks.values()) or sum(ks.values()) <= 0:
            raise InvalidArgument("k_distribution needs support >= 1 and nonnegative mass")
        object.__setattr__(self, "k_distribution", dict(sorted(ks.items())))

    @classmethod
    def from_json(cls, doc: dict) -> "SimConfig":
        hp = HyperParams(**{k: float(doc["hp"][k]) for k in ("mu_auc", "sigma_auc", "mu_tau", "sigma_tau")})
        kd = doc.get("k_distribution", DEFAULT_K_DISTRIBUTION)
        se = doc.get("se_distribution", {})
        return cls(hp, int(doc["n_cpms"]), kd, LognormalSe(**se), int(doc.get("seed", 0)))

    def to_json(self) -> dict:
        return {
            "hp": {"mu_auc": self.hp.mu_auc, "sigma_auc": self.hp.sigma_auc,
                   "mu_tau": self.hp.mu_tau, "sigma_tau": self.hp.sigma_tau},
            "n_cpms": self.n_cpms,
            "k_distribution": {str(k): p for k, p in self.k_distribution.items()},
            "se_distribution": {"median": self.se_distribution.median, "sigma": self.se_distribution.sigma},
            "seed": self.seed,
        }


def load_config(path) -> SimConfig:
    with open(path) as fh:
        return SimConfig.from_json(json.load(fh))


@dataclass(frozen=True)
class CpmTruth:
    cpm_label: str
    auc: float
    tau: float
    study_aucs: tuple[float, ...]


def _redraw(rng, auc_i, tau_i, se, max_tries=10_000):
    # Observed AUCs must stay inside (0, 1); only the offending study is redrawn.
    for _ in range(max_tries):
        a = auc_i + tau_i * rng.standard_normal()
        y = a + se * rng.standard_normal()
        if 0.0 < y < 1.0:
            return a, y
    raise InvalidArgument(f"cannot draw an observed AUC in (0, 1) around {auc_i:.3g}")


def generate_registry(config: SimConfig) -> tuple[list[CpmSeries], list[CpmTruth]]:
    hp = config.hp
    ks = np.array(list(config.k_distribution.keys()))
    probs = np.array(list(config.k_distribution.values()))
    probs = probs / probs.sum()
    width = len(str(config.n_cpms))
    children = np.random.SeedSequence(config.seed).spawn(config.n_cpms)

    registry, truth = [], []
    for i, child in enumerate(children):
        rng = np.random.default_rng(child)
        label = f"cpm{i:0{width}d}"
        k = int(rng.choice(ks, p=probs))
        auc_i = hp.mu_auc + hp.sigma_auc * rng.standard_normal()
        tau_i = math.exp(hp.mu_tau + hp.sigma_tau * rng.standard_normal())
        auc_ij = auc_i + tau_i * rng.standard_normal(k)
        se = config.se_distribution.sample(rng, k)
        y = auc_ij + se * rng.standard_normal(k)
        for j in np.flatnonzero((y <= 0.0) | (y >= 1.0)):
            auc_ij[j], y[j] = _redraw(rng, auc_i, tau_i, se[j])
        studies = tuple(
            ValidationStudy(float(y[j]), float(se[j]), f"{label}-{j}", j) for j in range(k)
        )
        registry.append(CpmSeries(label, studies))
        truth.append(CpmTruth(label, float(auc_i), float(tau_i), tuple(float(a) for a in auc_ij)))
    return registry, truth
