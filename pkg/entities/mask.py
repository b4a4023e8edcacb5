"""Pruning masks and the five pruning schemes."""

import logging
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

import numpy as np

from core.errors import DimensionError, ParameterError
from core.linalg import Matrix
from core.sampling import SeedSpec

logger = logging.getLogger(__name__)

RANDOM_WITH_REPLACEMENT = 'random-with-replacement'
RANDOM_WITHOUT_REPLACEMENT = 'random-without-replacement'
MAGNITUDE_LAYERWISE = 'magnitude-layerwise'
MAGNITUDE_GLOBAL = 'magnitude-global'
FILTER_RANDOM = 'filter-random'

SCHEMES = (RANDOM_WITH_REPLACEMENT, RANDOM_WITHOUT_REPLACEMENT, MAGNITUDE_LAYERWISE,
           MAGNITUDE_GLOBAL, FILTER_RANDOM)
RANDOM_SCHEMES = (RANDOM_WITH_REPLACEMENT, RANDOM_WITHOUT_REPLACEMENT, FILTER_RANDOM)


class MaskSet:
    """Binary masks M_1..M_l, stored compactly.

    Layer k keeps a compact 0/1 array and a block size; the mask on the
    weight matrix is kron(compact, ones(block, block)). Dense layers use
    block 1; conv layers use block p^2 so one compact entry covers one
    B_st block of the circulant map.
    """

    def __init__(self, compact, blocks=None):
        layers = []
        for m in compact:
            arr = np.array(m, dtype=np.float64, ndmin=2)
            if not np.all((arr == 0.0) | (arr == 1.0)):
                raise ParameterError("mask entries must be 0 or 1")
            arr.setflags(write=False)
            layers.append(arr)
        if len(layers) < 3:
            raise DimensionError(f"a mask set needs at least 3 layers, got {len(layers)}")
        for k in (0, len(layers) - 1):
            if not layers[k].all():
                raise ParameterError("the first and last layers are never pruned")
        self.compact = tuple(layers)
        self.blocks = tuple(blocks) if blocks is not None else (1,) * len(layers)
        if len(self.blocks) != len(layers):
            raise DimensionError("one block size per layer")

    @classmethod
    def all_ones(cls, shapes, blocks=None):
        return cls([np.ones(s) for s in shapes], blocks)

    @property
    def depth(self):
        return len(self.compact)

    def matrix(self, k):
        """Full mask M_k (1-based) on the k-th weight matrix."""
        m = self.compact[k - 1]
        b = self.blocks[k - 1]
        if b == 1:
            return Matrix._wrap(m.copy())
        return Matrix._wrap(np.kron(m, np.ones((b, b))))

    def zeros(self, k):
        """Number of zeroed compact entries in layer k (1-based)."""
        return int(self.compact[k - 1].size - np.count_nonzero(self.compact[k - 1]))

    def __repr__(self):
        return f"MaskSet(depth={self.depth}, zeros={[self.zeros(k) for k in range(1, self.depth + 1)]})"


@dataclass(frozen=True)
class PruneSpec:
    """Scheme selector plus either an exponent alpha or explicit per-layer counts."""
    scheme: str
    alpha: Optional[float] = None
    counts: Optional[tuple] = None
    seed: Optional[SeedSpec] = None

    def __post_init__(self):
        if self.scheme not in SCHEMES:
            raise ParameterError(f"unknown pruning scheme {self.scheme!r}")
        if (self.alpha is None) == (self.counts is None):
            raise ParameterError("give exactly one of alpha or counts")
        if self.alpha is not None:
            hi = 2.0 if self.scheme == FILTER_RANDOM else 1.0
            if not 0.0 < self.alpha < hi:
                raise ParameterError(f"alpha must lie in (0, {hi:g}) for {self.scheme}, got {self.alpha}")
        if self.counts is not None:
            if any(c < 0 for c in self.counts):
                raise ParameterError("prune counts must be nonnegative")
            if self.counts[0] or self.counts[-1]:
                raise ParameterError("the first and last layers are never pruned")
        if self.scheme in RANDOM_SCHEMES and self.seed is None:
            raise ParameterError(f"{self.scheme} needs a seed")


def prune_count(alpha, D, filters=False):
    """floor(D^(1-alpha)); with filters=True D is the channel width and the count is floor(D^(2-alpha))."""
    hi = 2.0 if filters else 1.0
    if not 0.0 < alpha < hi:
        raise ParameterError(f"alpha must lie in (0, {hi:g}), got {alpha}")
    v = float(D) ** (hi - alpha)
    r = round(v)
    if abs(v - r) <= 1e-9 * max(1.0, v):
        return int(r)
    return int(math.floor(v))


def _check_counts(shapes, counts):
    if len(counts) != len(shapes):
        raise DimensionError(f"{len(counts)} counts for {len(shapes)} layers")
    if counts[0] or counts[-1]:
        raise ParameterError("the first and last layers are never pruned")


def mask_random_with_replacement(shapes, counts, seed):
    """Draw (i, j) uniformly count times per internal layer and zero it; repeats collapse."""
    _check_counts(shapes, counts)
    masks = []
    for k, ((rows, cols), c) in enumerate(zip(shapes, counts), start=1):
        m = np.ones((rows, cols))
        if c:
            rng = seed.substream(k).generator()
            i = rng.integers(0, rows, size=c)
            j = rng.integers(0, cols, size=c)
            m[i, j] = 0.0
        masks.append(m)
    return MaskSet(masks)


def mask_random_without_replacement(shapes, counts, seed):
    """Zero exactly count distinct entries per internal layer, uniform over subsets."""
    _check_counts(shapes, counts)
    masks = []
    for k, ((rows, cols), c) in enumerate(zip(shapes, counts), start=1):
        if c > rows * cols:
            raise ParameterError(f"cannot prune {c} of {rows * cols} entries in layer {k}")
        m = np.ones(rows * cols)
        if c:
            rng = seed.substream(k).generator()
            m[rng.choice(rows * cols, size=c, replace=False)] = 0.0
        masks.append(m.reshape(rows, cols))
    return MaskSet(masks)


def _smallest(absw, count):
    # stable sort on C-order positions breaks ties by (row, col)
    return np.argsort(absw, kind='stable')[:count]


def mask_magnitude_layerwise(weights, counts):
    """Zero the count smallest-magnitude entries of each internal layer."""
    arrays = [np.asarray(getattr(w, 'array', w)) for w in weights]
    _check_counts([a.shape for a in arrays], counts)
    masks = []
    for a, c in zip(arrays, counts):
        m = np.ones(a.size)
        m[_smallest(np.abs(a).ravel(), c)] = 0.0
        masks.append(m.reshape(a.shape))
    return MaskSet(masks)


def mask_magnitude_global(weights, total):
    """Zero the globally smallest-magnitude entries across internal layers only."""
    arrays = [np.asarray(getattr(w, 'array', w)) for w in weights]
    internal = arrays[1:-1]
    sizes = [a.size for a in internal]
    if not 0 <= total <= sum(sizes):
        raise ParameterError(f"cannot prune {total} of {sum(sizes)} internal weights")
    flat = np.ones(sum(sizes))
    pooled = np.concatenate([np.abs(a).ravel() for a in internal])
    flat[_smallest(pooled, total)] = 0.0
    masks = [np.ones(arrays[0].shape)]
    offset = 0
    for a, n in zip(internal, sizes):
        masks.append(flat[offset:offset + n].reshape(a.shape))
        offset += n
    masks.append(np.ones(arrays[-1].shape))
    return MaskSet(masks)


def mask_filter_random(shapes, counts, seed, blocks):
    """Zero whole (s, t) filters, drawn with replacement, in conv layers 1 < k < l.

    shapes are compact (d_out, d_in) per layer, blocks the per-layer block size.
    """
    _check_counts(shapes, counts)
    masks = []
    for k, ((rows, cols), c) in enumerate(zip(shapes, counts), start=1):
        m = np.ones((rows, cols))
        if c:
            if blocks[k - 1] == 1:
                raise ParameterError(f"layer {k} is dense; filter pruning applies to conv layers only")
            rng = seed.substream(k).generator()
            s = rng.integers(0, rows, size=c)
            t = rng.integers(0, cols, size=c)
            m[s, t] = 0.0
        masks.append(m)
    return MaskSet(masks, blocks)


def layer_counts(spec, model):
    """Per-layer prune counts of a spec against a model."""
    shapes = model.compact_shapes
    if spec.counts is not None:
        counts = tuple(int(c) for c in spec.counts)
        _check_counts(shapes, counts)
        return counts
    counts = [0] * len(shapes)
    for k in range(1, len(shapes) - 1):
        rows, cols = shapes[k]
        if spec.scheme == FILTER_RANDOM:
            counts[k] = prune_count(spec.alpha, rows, filters=True)
        else:
            counts[k] = prune_count(spec.alpha, rows * cols)
    return tuple(counts)


def prune(spec, model):
    """Apply a PruneSpec to an FcnModel or CnnModel."""
    counts = layer_counts(spec, model)
    shapes = model.compact_shapes
    if spec.scheme == FILTER_RANDOM:
        if model.kind != 'cnn':
            raise ParameterError("filter pruning needs a convolutional model")
        return mask_filter_random(shapes, counts, spec.seed, model.blocks)
    if model.kind != 'fcn':
        raise ParameterError(f"{spec.scheme} applies to fully connected models")
    if spec.scheme == RANDOM_WITH_REPLACEMENT:
        return mask_random_with_replacement(shapes, counts, spec.seed)
    if spec.scheme == RANDOM_WITHOUT_REPLACEMENT:
        return mask_random_without_replacement(shapes, counts, spec.seed)
    if spec.scheme == MAGNITUDE_LAYERWISE:
        return mask_magnitude_layerwise(model.weights, counts)
    return mask_magnitude_global(model.weights, sum(counts))


def balls_in_bins_event(compact, count):
    """(rows ok, cols ok): every row / column holds at most 3*count/width zeros."""
    zeros = 1.0 - np.asarray(compact)
    rows, cols = zeros.shape
    row_ok = bool(zeros.sum(axis=1).max() <= 3.0 * count / rows)
    col_ok = bool(zeros.sum(axis=0).max() <= 3.0 * count / cols)
    return row_ok, col_ok


def no_repeat_probability(D, count):
    """Exact probability that count draws with replacement from D slots never repeat."""
    prob = Fraction(1)
    for i in range(count):
        prob *= Fraction(D - i, D)
    return prob


def expected_distinct(D, count):
    """Expected number of distinct entries hit by count draws with replacement."""
    return D * (1.0 - (1.0 - 1.0 / D) ** count)
