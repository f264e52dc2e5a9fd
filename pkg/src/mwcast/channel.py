"""i.i.d. Bernoulli erasure broadcast channel.

Delivery indicators are a pure function of (seed, receiver, slot): any slot
is reproducible without replaying the run, which keeps renewal records
debuggable.  Feedback is assumed reliable and is not modelled here.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import rng


@dataclass(frozen=True)
class ChannelConfig:
    gammas: tuple[float, ...]
    seed: int = 0
    _thresholds: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        gammas = tuple(float(g) for g in self.gammas)
        if not gammas:
            raise ValueError("at least one receiver is required")
        for g in gammas:
            if not 0.0 < g <= 1.0:
                raise ValueError(f"delivery probabilities must be in (0, 1], got {g}")
        object.__setattr__(self, "gammas", gammas)
        thresholds = np.array(
            [rng.probability_threshold(g) for g in gammas], dtype=np.uint64
        )
        object.__setattr__(self, "_thresholds", thresholds)

    @property
    def n(self) -> int:
        return len(self.gammas)

    def thresholds(self) -> np.ndarray:
        return self._thresholds


def draw_slot(cfg: ChannelConfig, t: int) -> np.ndarray:
    """Indicators c_i[t] for all receivers, independent across i and t."""
    if t < 1:
        raise ValueError(f"slots are 1-based, got {t}")
    return rng.channel_indicators(cfg.seed, cfg.thresholds(), t)
