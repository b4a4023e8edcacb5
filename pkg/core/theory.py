"""Closed forms and bound calculators for the pruning guarantees.

log is the natural logarithm throughout. Constants that are only known to
exist (C1..C5, c2, N_k, delta_k) are inputs; nothing here hardcodes them.
"""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from numbers import Rational
from typing import List, Optional

import numpy as np
from scipy.special import gammaln

from .config import SIGMA_BAND
from .errors import ParameterError

logger = logging.getLogger(__name__)

LATALA_WEIGHT_FCN = 2.0 * math.sqrt(2.0) + 24.0 ** 0.25


@dataclass
class BoundReport:
    """One checked inequality lhs <= rhs (or >= when direction says so)."""
    name: str
    satisfied: bool
    lhs: float
    rhs: float
    direction: str = '<='

    @classmethod
    def check(cls, name, lhs, rhs, direction='<='):
        ok = lhs <= rhs if direction == '<=' else lhs >= rhs
        return cls(name, bool(ok), float(lhs), float(rhs), direction)


@dataclass
class ProbabilityReport:
    """Value of a success-probability expression; vacuous when it is not positive."""
    name: str
    value: float
    p_bar: float
    vacuous: bool


@dataclass
class AlphaConstraints:
    reports: List[BoundReport]
    max_alpha: float


@dataclass
class BallsBinsReport:
    n: int
    N: int
    threshold: float
    probability: float
    stderr: float
    trials: int
    exact: Optional[Fraction]
    guarantee: bool          # N >= n log n
    bound: float             # 1 - n^(-1/3)
    satisfied: Optional[bool]


@dataclass
class TheoremConstants:
    """User-supplied or estimated constants. None means not given."""
    c0: Optional[float] = None
    delta0: Optional[float] = None
    c1: Optional[float] = None
    c2: Optional[float] = None
    C1: Optional[float] = None
    C2: Optional[float] = None
    C3: Optional[float] = None
    C4: Optional[float] = None
    C5: Optional[float] = None
    K: Optional[float] = None
    K1: Optional[float] = None
    K2: Optional[float] = None
    N: tuple = field(default=())
    deltas: tuple = field(default=())

    def __post_init__(self):
        for name in ('c0', 'delta0', 'c1', 'c2', 'C1', 'C2', 'C3', 'C4', 'C5', 'K', 'K1', 'K2'):
            value = getattr(self, name)
            if value is not None and not value > 0:
                raise ParameterError(f"constant {name} must be positive, got {value}")
        if any(n < 1 for n in self.N):
            raise ParameterError(f"operator-norm bounds N_k are taken >= 1, got {list(self.N)}")
        if any(not 0 <= d <= 1 for d in self.deltas):
            raise ParameterError(f"failure probabilities must lie in [0, 1], got {list(self.deltas)}")

    def require(self, *names):
        missing = [n for n in names if getattr(self, n) in (None, ())]
        if missing:
            raise ParameterError(f"missing constants: {', '.join(missing)}")


def _lipschitz_product(L, count):
    if isinstance(L, (int, float)):
        return float(L) ** count
    if len(L) < count:
        raise ParameterError(f"need {count} Lipschitz constants, got {len(L)}")
    return float(np.prod(L[:count]))


def _ceil(x):
    # absorbs rounding noise such as 4900.000000000001
    return int(math.ceil(round(x, 9)))


# Order statistics of squared uniforms

def _check_order_args(a, n, r, p):
    if not a > 0:
        raise ParameterError(f"a must be positive, got {a}")
    if not 1 <= r <= n:
        raise ParameterError(f"need 1 <= r <= n, got r={r}, n={n}")
    if p < 1:
        raise ParameterError(f"moment order must be at least 1, got {p}")


def order_stat_moment(a, n, r, p):
    """E X_(r)^p for the r-th smallest of n squared U[-a, a] samples.

    Equals a^(2p) (r+2p-1)! n! / ((r-1)! (n+2p)!), with the factorial ratio
    taken as a 2p-term product. Exact (Fraction) for rational a.
    """
    _check_order_args(a, n, r, p)
    # X_(r) / a^2 is the square of the r-th smallest |U| / a, a U[0, 1] order statistic, so
    # X_(r)^p / a^(2p) = B^(2p) with B ~ Beta(r, n - r + 1), whose moment is prod (r + k) / (n + 1 + k).
    ratio = Fraction(1)
    for k in range(2 * p):
        ratio *= Fraction(r + k, n + 1 + k)
    if isinstance(a, Rational):
        return ratio * Fraction(a) ** (2 * p)
    return float(ratio) * float(a) ** (2 * p)


def order_stat_moment_lgamma(a, n, r, p):
    """Floating evaluation of the same moment through log-gamma."""
    _check_order_args(a, n, r, p)
    # Gamma(r+2p) Gamma(n+1) / (Gamma(r) Gamma(n+2p+1)), kept in logs so large n does not overflow
    log_ratio = gammaln(r + 2 * p) - gammaln(r) + gammaln(n + 1) - gammaln(n + 2 * p + 1)
    return float(np.exp(log_ratio + 2 * p * np.log(a)))


def order_stat_first_moment(a, n, r):
    """a^2 r (r+1) / ((n+1)(n+2))."""
    return Fraction(a) ** 2 * Fraction(r * (r + 1), (n + 1) * (n + 2))


def order_stat_second_moment(a, n, r):
    """a^4 r (r+1)(r+2)(r+3) / ((n+1)(n+2)(n+3)(n+4))."""
    return Fraction(a) ** 4 * Fraction(r * (r + 1) * (r + 2) * (r + 3), (n + 1) * (n + 2) * (n + 3) * (n + 4))


def order_stat_monte_carlo(a, n, r, p, trials, seed, chunk_entries=1 << 22):
    """(mean, standard error) of X_(r)^p over trials draws of n squared uniforms."""
    _check_order_args(a, n, r, p)
    rng = seed.generator()
    rows = max(1, chunk_entries // n)
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < trials:
        m = min(rows, trials - done)
        x = rng.uniform(-a, a, size=(m, n)) ** 2
        v = np.partition(x, r - 1, axis=1)[:, r - 1] ** p
        total += float(v.sum())
        total_sq += float((v * v).sum())
        done += m
    mean = total / trials
    var = max(total_sq / trials - mean * mean, 0.0) * trials / max(trials - 1, 1)
    return mean, math.sqrt(var / trials)


# Chernoff and balls into bins

def chernoff_upper(mu, delta):
    """exp(-delta^2 mu / (1 + delta)), the upper tail bound P(X >= (1+delta) mu)."""
    if not mu > 0 or not delta > 0:
        raise ParameterError(f"mu and delta must be positive, got mu={mu}, delta={delta}")
    return math.exp(-delta * delta * mu / (1.0 + delta))


def balls_in_bins_exact(n, N, threshold):
    """P(max load <= threshold) for N balls thrown uniformly into n bins, exactly.

    Counts capped assignments with the integer recurrence
    ways_i(j) = sum_k C(j, k) ways_{i-1}(j - k), k <= threshold.
    """
    if n < 1 or N < 0:
        raise ParameterError(f"need n >= 1 and N >= 0, got n={n}, N={N}")
    cap = int(math.floor(threshold))
    if cap >= N:
        return Fraction(1)
    if cap < 0:
        return Fraction(0)
    # ways[j]: labelled assignments of j balls to the bins seen so far, none above cap.
    # A new bin takes k of the j balls in C(j, k) ways.
    ways = [1] + [0] * N
    for _ in range(n):
        nxt = [0] * (N + 1)
        for j in range(N + 1):
            acc = 0
            for k in range(min(cap, j) + 1):
                if ways[j - k]:
                    acc += math.comb(j, k) * ways[j - k]
            nxt[j] = acc
        ways = nxt
    return Fraction(ways[N], n ** N)


def max_loads(n, N, trials, rng, chunk_entries=1 << 22):
    """Maximum bin load of each of trials independent throws."""
    rows = max(1, chunk_entries // max(N, 1))
    out = np.empty(trials, dtype=np.int64)
    done = 0
    while done < trials:
        m = min(rows, trials - done)
        bins = rng.integers(0, n, size=(m, N))
        # offset each trial into its own block of n bins
        flat = (bins + n * np.arange(m)[:, None]).ravel()
        out[done:done + m] = np.bincount(flat, minlength=m * n).reshape(m, n).max(axis=1)
        done += m
    return out


def balls_in_bins_check(n, N, trials, seed, sigma=SIGMA_BAND):
    """Empirical P(max load <= 3N/n) with the guarantee 1 - n^(-1/3) when N >= n log n."""
    if trials < 1:
        raise ParameterError(f"need at least one trial, got {trials}")
    threshold = 3.0 * N / n
    loads = max_loads(n, N, trials, seed.generator())
    prob = float(np.mean(loads <= threshold))
    stderr = math.sqrt(prob * (1.0 - prob) / trials)
    guarantee = N >= n * math.log(n)
    bound = 1.0 - n ** (-1.0 / 3.0)
    satisfied = (prob >= bound - sigma * stderr) if guarantee else None
    if not guarantee:
        logger.info("balls into bins n=%d N=%d: N < n log n, no guarantee to check", n, N)
    return BallsBinsReport(n, N, threshold, prob, stderr, trials,
                           balls_in_bins_exact(n, N, threshold), guarantee, bound, satisfied)


# Fully connected networks, magnitude pruning

def thm1_c2(C, K):
    """c2 = C K (2 sqrt 2 + 24^(1/4)) from the Latala constant and the weight scale."""
    return C * K * LATALA_WEIGHT_FCN


def thm1_width_terms(consts, l, L, alpha, eps, delta):
    consts.require('c0', 'c2', 'delta0')
    if not 0 < alpha < 1:
        raise ParameterError(f"alpha must lie in (0, 1), got {alpha}")
    if not eps > 0 or not 0 < delta < 1:
        raise ParameterError(f"need eps > 0 and 0 < delta < 1, got eps={eps}, delta={delta}")
    c0, c2, delta0 = consts.c0, consts.c2, consts.delta0
    C1 = 1.0 / c0
    C2 = (2 ** (l - 2) - 1) * _lipschitz_product(L, l - 1) * c0 ** (l - 1)
    C3 = (l * l - 2) * c2
    return {
        'norm': C1 ** (1.0 / alpha),
        'eps': (C2 / eps) ** (1.0 / alpha),
        'delta': (C3 / delta) ** (1.0 / alpha),
        'log': (math.log(1.0 / delta) + math.log(l * l - 2)) / (4.0 * delta0),
    }


def thm1_width_bound(consts, l, L, alpha, eps, delta):
    """Smallest width the magnitude-pruning guarantee asks for."""
    return _ceil(max(thm1_width_terms(consts, l, L, alpha, eps, delta).values()))


def thm1_probability(l, d, alpha, c2, delta0):
    """(1 - 2e^(-4 delta0 d)) (1 - (l-2) c2 d^(-alpha) - (l+1)(l-2) e^(-4 delta0 d))."""
    tail = math.exp(-4.0 * delta0 * d)
    p_bar = 1.0 - (l - 2) * c2 * d ** (-alpha) - (l + 1) * (l - 2) * tail
    value = (1.0 - 2.0 * tail) * p_bar
    return ProbabilityReport('magnitude-fcn', value, p_bar, value <= 0)


# Fully connected networks, random pruning

def thm2_c2(c1, K1, K2):
    """c2 = c1 (2 sqrt(3 K1) + K2^(1/4))."""
    return c1 * (2.0 * math.sqrt(3.0 * K1) + K2 ** 0.25)


def _alpha_side(m, n, side):
    if min(m, n) < 3:
        raise ParameterError(f"widths must be at least 3, got {m}x{n}")
    return 1.0 - (math.log(side + 1) - math.log(math.log(side))) / (math.log(m) + math.log(n))


def thm2_alpha_constraints(widths, alpha=None):
    """Per internal mask the largest alpha keeping the row and column balls-into-bins events likely.

    widths are d_1..d_{l-1}; mask k (2 <= k <= l-1) has shape d_k x d_{k-1}.
    """
    widths = list(widths)
    if len(widths) < 2:
        raise ParameterError("need at least two hidden widths")
    if min(widths) < 3:
        raise ParameterError(f"widths must be at least 3, got {widths}")
    reports = []
    for k in range(1, len(widths)):
        m, n = widths[k], widths[k - 1]
        for side, dim in (('rows', m), ('cols', n)):
            rhs = _alpha_side(m, n, dim)
            lhs = float('nan') if alpha is None else alpha
            ok = rhs > 0 if alpha is None else 0 < alpha <= rhs
            reports.append(BoundReport(f"layer{k + 1}-{side}", bool(ok), lhs, rhs))
    return AlphaConstraints(reports, min(r.rhs for r in reports))


def thm2_probability(l, d, alpha, c2, deltas):
    """(1-d^(-1/3))^(2(l-2)) (1-delta_l) [1 - (l-2) c2 d^(-alpha/4) - sum_{i<l} (l-i) delta_i]."""
    deltas = list(deltas)
    if len(deltas) != l:
        raise ParameterError(f"need {l} failure probabilities, got {len(deltas)}")
    mask_part = (1.0 - d ** (-1.0 / 3.0)) ** (2 * (l - 2))
    p_bar = 1.0 - (l - 2) * c2 * d ** (-alpha / 4.0) - sum((l - i) * deltas[i - 1] for i in range(1, l))
    value = mask_part * (1.0 - deltas[-1]) * p_bar
    if value <= 0:
        logger.warning("random-pruning probability is vacuous at d=%s (value %.4g)", d, value)
    return ProbabilityReport('random-fcn', value, p_bar, value <= 0)


def thm2_width_terms(consts, l, L, alpha, eps, delta):
    consts.require('c2', 'N', 'deltas')
    if len(consts.N) != l or len(consts.deltas) != l:
        raise ParameterError(f"need {l} norm bounds and {l} failure probabilities")
    N, deltas = consts.N, consts.deltas
    slack = delta - (deltas[-1] + sum((l - i) * deltas[i - 1] for i in range(1, l)))
    if slack <= 0:
        raise ParameterError(f"delta={delta} leaves no budget beyond the assumed failure probabilities")
    terms = {}
    for k in range(2, l):
        terms[f'N{k}'] = N[k - 1] ** (-4.0 / alpha)
    chain = (2 ** (l - 2) - 1) * _lipschitz_product(L, l - 1) * float(np.prod(N))
    terms['eps'] = (chain / eps) ** (4.0 / alpha)
    terms['masks'] = (3.0 * (l - 2) / slack) ** 3
    terms['weights'] = (3.0 * consts.c2 * (l - 2) / slack) ** (4.0 / alpha)
    return terms


def thm2_width_bound(consts, l, L, alpha, eps, delta):
    """Smallest width the random-pruning guarantee asks for."""
    return _ceil(max(thm2_width_terms(consts, l, L, alpha, eps, delta).values()))


def fcn_gap_bound(l, L, norms, d, alpha, scheme):
    """(2^(l-2) - 1) d^(-rate) L_{1:l-1} N_{1:l}; rate alpha for magnitude, alpha/4 for random."""
    rate = alpha if scheme.startswith('magnitude') else alpha / 4.0
    return (2 ** (l - 2) - 1) * d ** (-rate) * _lipschitz_product(L, l - 1) * float(np.prod(norms))


# Convolutional networks, filter pruning

def thm3_constants(C, C1, C2):
    """(C3, C4) = (C (2 sqrt C1 + C2^(1/4)), C (2 sqrt(3 C1) + C2^(1/4)))."""
    return C * (2.0 * math.sqrt(C1) + C2 ** 0.25), C * (2.0 * math.sqrt(3.0 * C1) + C2 ** 0.25)


def thm3_alpha_constraint(d):
    """2 - (log(d+1) + log log d) / log d."""
    if d < 3:
        raise ParameterError(f"d must be at least 3, got {d}")
    return 2.0 - (math.log(d + 1) + math.log(math.log(d))) / math.log(d)


def thm3_rhs(p, d, p0, L, l, beta1, beta2):
    """p^-b1 L^(l-1) p0 sqrt(d) [p^-b1 (p^-b1 + d^-b2)^(l-2) - p^(-(l-1) b1)]."""
    if not 0 < beta1 < 1:
        raise ParameterError(f"beta1 must lie in (0, 1), got {beta1}")
    if not beta2 > 0:
        raise ParameterError(f"beta2 must be positive, got {beta2}")
    if l < 3:
        raise ParameterError(f"depth must be at least 3, got {l}")
    a = p ** (-beta1)
    bracket = a * (a + d ** (-beta2)) ** (l - 2) - p ** (-(l - 1) * beta1)
    value = a * L ** (l - 1) * p0 * math.sqrt(d) * bracket
    if not value > 0:
        logger.warning("filter-pruning gap bound is not positive (%.4g)", value)
    return value


def thm3_probability(l, d, p, q, alpha, beta1, beta2, C3, C4, C5):
    """(1-d^(-1/3))^(2(l-2)) p_bar, with p_bar the weight-randomness part."""
    if not 0 < beta2 < alpha / 4.0:
        raise ParameterError(f"beta2 must lie in (0, alpha/4), got {beta2}")
    p_bar = (1.0
             - (l - 2) * C4 * (q * q / p) * d ** (-alpha / 4.0 + beta2)
             - (l * l - l - 2) / 2.0 * C3 * q * q / p ** (1.0 - beta1)
             - C5 / p ** (1.0 - beta1))
    value = (1.0 - d ** (-1.0 / 3.0)) ** (2 * (l - 2)) * p_bar
    return ProbabilityReport('filter-cnn', value, p_bar, p_bar <= 0 or value <= 0)
