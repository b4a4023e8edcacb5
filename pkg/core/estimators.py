"""Monte Carlo estimates of the random-matrix norm constants.

Norm-quantile rows give the mean, spread and quantiles of ||B||_2 for a
xavier-uniform B, with the matching tail exponent delta0. Latala rows give
the three moment terms, the mean spectral norm and their ratio C.
"""

import logging
import math
from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np

from entities.mask import prune_count

from .config import LATALA_DISTRIBUTIONS, NORM_QUANTILES
from .errors import ParameterError
from .linalg import spectral_norm
from .sampling import DistributionSpec
from .theory import BoundReport
from .trials import map_trials

logger = logging.getLogger(__name__)

MIN_TRIALS = 100


@dataclass
class QuantilePair:
    q: float
    c0: float
    delta0: float


@dataclass
class Lemma3Row:
    n1: int
    n2: int
    K: float
    mean: float
    std: float
    quantiles: List[QuantilePair]
    trials: int
    seed: str

    def quantile(self, q):
        for pair in self.quantiles:
            if math.isclose(pair.q, q):
                return pair
        raise KeyError(q)


@dataclass
class LatalaRow:
    d: int
    dist: str
    alpha: Optional[float]
    term1: float
    term2: float
    term3: float
    mean_norm: float
    C: float
    trials: int
    seed: str
    norms: List[float] = field(default_factory=list, repr=False)


def _check_trials(trials):
    if trials < MIN_TRIALS:
        raise ParameterError(f"need at least {MIN_TRIALS} trials, got {trials}")


def lemma3_delta0(n, q):
    """Solve 1 - 2 exp(-4 delta0 n) = q for delta0."""
    return -math.log((1.0 - q) / 2.0) / (4.0 * n)


def empirical_quantile(sorted_values, q):
    """Order statistic at 1-based index ceil(q * count)."""
    idx = max(1, math.ceil(round(q * len(sorted_values), 9)))
    return float(sorted_values[idx - 1])


def estimate_lemma3(n1, n2, K, trials, quantiles=NORM_QUANTILES, seed=None, workers=None):
    _check_trials(trials)
    dist = DistributionSpec.xavier_uniform(K)

    def one(t):
        rng = seed.substream(t).generator()
        return spectral_norm(dist.draw(rng, (n1, n2), (n1, n2)))

    norms = np.fromiter(map_trials(one, trials, workers, desc=f"lemma3 {n1}x{n2}"), dtype=np.float64, count=trials)
    ordered = np.sort(norms)
    pairs = [QuantilePair(q, empirical_quantile(ordered, q), lemma3_delta0(max(n1, n2), q))
             for q in sorted(quantiles)]
    row = Lemma3Row(n1, n2, float(K), float(norms.mean()), float(norms.std(ddof=1)), pairs, trials, seed.label())
    logger.info("lemma3 %dx%d K=%.4g: mean %.4f std %.4f", n1, n2, K, row.mean, row.std)
    return row


def latala_distribution(tag, d):
    """Table distribution of a d x d matrix: U[-sqrt(3/d), sqrt(3/d)], N(0, 1/d), N(0, 3/d) or zero."""
    if tag not in LATALA_DISTRIBUTIONS:
        raise ParameterError(f"unknown distribution tag {tag!r}; choose from {sorted(LATALA_DISTRIBUTIONS)}")
    spec = LATALA_DISTRIBUTIONS[tag]
    if spec['kind'] == 'uniform':
        return DistributionSpec.xavier_uniform(math.sqrt(3.0))
    if spec['kind'] == 'gaussian':
        return DistributionSpec.gaussian(spec['variance_scale'] / d)
    return DistributionSpec.zero()


def estimate_latala(d, dist, prune_alpha=None, trials=500, seed=None, workers=None):
    """Latala terms from per-entry moment averages over the sampled matrices.

    The pruned variant zeroes floor(d^(2-alpha)) uniformly drawn positions,
    with replacement.
    """
    _check_trials(trials)
    spec = latala_distribution(dist, d)
    count = prune_count(prune_alpha, d, filters=True) if prune_alpha is not None else 0

    def one(t):
        rng = seed.substream(t).generator()
        a = spec.draw(rng, (d, d), (d, d))
        if count:
            # repeated positions collapse, so fewer than count entries may be zeroed
            a[rng.integers(0, d, size=count), rng.integers(0, d, size=count)] = 0.0
        return spectral_norm(a), a

    second = np.zeros((d, d))
    fourth = np.zeros((d, d))
    norms = []
    for norm, a in map_trials(one, trials, workers, desc=f"latala d={d} {dist}"):
        sq = a * a
        second += sq
        fourth += sq * sq
        norms.append(norm)
    second /= trials
    fourth /= trials
    # max row norm and max column norm of E a_ij^2, then the fourth root of sum E a_ij^4
    term1 = float(np.sqrt(second.sum(axis=1)).max())
    term2 = float(np.sqrt(second.sum(axis=0)).max())
    term3 = float(fourth.sum() ** 0.25)
    mean_norm = float(np.mean(norms))
    denom = term1 + term2 + term3
    C = mean_norm / denom if denom > 0 else 0.0
    logger.info("latala d=%d %s alpha=%s: C=%.4f", d, dist, prune_alpha, C)
    return LatalaRow(d, dist, prune_alpha, term1, term2, term3, mean_norm, C, trials, seed.label(), norms)


def verify_latala_bound(d, dist, trials, seed, cap=1.0, prune_alpha=None, workers=None):
    """Check E||A||_2 <= cap * (term1 + term2 + term3) empirically."""
    row = estimate_latala(d, dist, prune_alpha, trials, seed, workers)
    rhs = cap * (row.term1 + row.term2 + row.term3)
    return BoundReport.check(f"latala-d{d}-{dist}", row.mean_norm, rhs)
