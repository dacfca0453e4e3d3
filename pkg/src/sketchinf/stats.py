"""Normal quantiles, Clopper-Pearson intervals and a one-sample KS test."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

from .errors import BadLevel, NonFinite, TooFewSamples


@dataclass(frozen=True)
class BinomialInterval:
    hits: int
    trials: int
    level: float
    lower: float
    upper: float

    @property
    def estimate(self) -> float:
        return self.hits / self.trials if self.trials else float("nan")

    def contains(self, p: float) -> bool:
        return self.lower <= p <= self.upper


def _check_prob(q: float, what: str = "level") -> float:
    q = float(q)
    if not (0.0 < q < 1.0):
        raise BadLevel(f"{what} must lie in (0, 1), got {q}")
    return q


def normal_cdf(z):
    return special.ndtr(z)


def normal_quantile(q: float) -> float:
    return float(special.ndtri(_check_prob(q, "quantile")))


def z_two_sided(level: float) -> float:
    """``z_{1 - alpha/2}`` for a two-sided interval at confidence ``level``."""
    level = _check_prob(level)
    return normal_quantile(0.5 + 0.5 * level)


def clopper_pearson(hits: int, trials: int, level: float = 0.95) -> BinomialInterval:
    """Exact binomial interval from Beta quantiles."""
    level = _check_prob(level)
    hits, trials = int(hits), int(trials)
    if trials < 1 or not (0 <= hits <= trials):
        raise ValueError(f"need 0 <= hits <= trials and trials >= 1, got {hits}/{trials}")
    a = 1.0 - level
    lower = 0.0 if hits == 0 else float(special.betaincinv(hits, trials - hits + 1, a / 2))
    upper = 1.0 if hits == trials else float(special.betaincinv(hits + 1, trials - hits, 1 - a / 2))
    return BinomialInterval(hits, trials, level, lower, upper)


def ks_statistic(samples) -> tuple[float, float]:
    """Kolmogorov-Smirnov distance to N(0, 1) and its asymptotic p-value."""
    x = np.sort(np.asarray(samples, dtype=np.float64).ravel())
    if x.size < 20:
        raise TooFewSamples(f"KS needs at least 20 samples, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise NonFinite("KS samples must be finite")
    n = x.size
    F = special.ndtr(x)
    i = np.arange(1, n + 1)
    d = float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))
    return d, float(special.kolmogorov(np.sqrt(n) * d))
