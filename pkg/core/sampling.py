"""Seeded random streams, weight distributions and evaluation-domain samplers."""

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, ParameterError
from .linalg import Matrix, Vector

logger = logging.getLogger(__name__)

UNIFORM = 'uniform'
GAUSSIAN = 'gaussian'
ZERO = 'zero'

XAVIER = 'xavier'
VARIANCE = 'variance'


@dataclass(frozen=True)
class SeedSpec:
    """(base seed, stream index) pair naming one independent random stream."""
    base_seed: int
    stream_index: int = 0
    path: tuple = field(default=())

    def __post_init__(self):
        if not 0 <= int(self.base_seed) < 2 ** 64:
            raise ParameterError(f"base seed must fit in 64 bits, got {self.base_seed}")
        if self.stream_index < 0:
            raise ParameterError(f"stream index must be nonnegative, got {self.stream_index}")

    def substream(self, j):
        """Child stream for the j-th independent draw inside this stream."""
        return SeedSpec(self.base_seed, self.stream_index, self.path + (int(j),))

    def generator(self):
        seq = np.random.SeedSequence(int(self.base_seed), spawn_key=(int(self.stream_index),) + tuple(self.path))
        return np.random.default_rng(seq)

    def label(self):
        tail = ''.join(f'.{j}' for j in self.path)
        return f"{self.base_seed}:{self.stream_index}{tail}"


@dataclass(frozen=True)
class DistributionSpec:
    """Entry distribution of a random weight matrix.

    uniform + xavier(K) draws from U[-K/sqrt(max(m,n)), K/sqrt(max(m,n))];
    gaussian + variance(v) draws from N(0, v); zero is the point mass at 0.
    """
    kind: str
    scale_rule: str
    parameter: float = 1.0

    def __post_init__(self):
        if self.kind == UNIFORM and self.scale_rule != XAVIER:
            raise ParameterError("uniform weights use the xavier scale rule")
        if self.kind == GAUSSIAN and self.scale_rule != VARIANCE:
            raise ParameterError("gaussian weights use the variance scale rule")
        if self.kind not in (UNIFORM, GAUSSIAN, ZERO):
            raise ParameterError(f"unknown distribution kind {self.kind!r}")
        if self.kind != ZERO and not self.parameter > 0:
            raise ParameterError(f"{self.scale_rule} parameter must be positive, got {self.parameter}")

    @classmethod
    def xavier_uniform(cls, K=1.0):
        return cls(UNIFORM, XAVIER, float(K))

    @classmethod
    def gaussian(cls, variance):
        return cls(GAUSSIAN, VARIANCE, float(variance))

    @classmethod
    def zero(cls):
        return cls(ZERO, VARIANCE, 0.0)

    def half_width(self, m, n):
        return self.parameter / math.sqrt(max(m, n))

    def second_moment(self, m, n):
        if self.kind == UNIFORM:
            return self.half_width(m, n) ** 2 / 3.0
        if self.kind == GAUSSIAN:
            return self.parameter
        return 0.0

    def fourth_moment(self, m, n):
        if self.kind == UNIFORM:
            return self.half_width(m, n) ** 4 / 5.0
        if self.kind == GAUSSIAN:
            return 3.0 * self.parameter ** 2
        return 0.0

    def draw(self, rng, shape, fan):
        """Array of the given shape; fan = (m, n) sets the xavier scale."""
        if self.kind == UNIFORM:
            a = self.half_width(*fan)
            return rng.uniform(-a, a, size=shape)
        if self.kind == GAUSSIAN:
            return rng.normal(0.0, math.sqrt(self.parameter), size=shape)
        return np.zeros(shape)

    def describe(self):
        if self.kind == UNIFORM:
            return f"uniform-xavier(K={self.parameter!r})"
        if self.kind == GAUSSIAN:
            return f"gaussian(v={self.parameter!r})"
        return "zero"


def _check_dims(*dims):
    for d in dims:
        if int(d) < 1:
            raise DimensionError(f"dimensions must be positive, got {dims}")


def sample_matrix(dist, rows, cols, seed):
    _check_dims(rows, cols)
    return Matrix._wrap(dist.draw(seed.generator(), (rows, cols), (rows, cols)))


def sample_tensor(dist, d_out, d_in, q, p, seed):
    """Raw d_out x d_in x q x q filter array.

    The xavier scale is taken over the p^2 d_out x p^2 d_in linear map, so
    uniform entries lie in [-K/(p sqrt(max(d_out, d_in))), +K/(...)].
    """
    _check_dims(d_out, d_in, q, p)
    return dist.draw(seed.generator(), (d_out, d_in, q, q), (p * p * d_out, p * p * d_in))


def sphere_points(dim, n, rng):
    """dim x n array of points uniform on the unit sphere."""
    _check_dims(dim, n)
    x = rng.standard_normal((n, dim))
    norms = np.linalg.norm(x, axis=1)
    while np.any(norms == 0.0):
        bad = norms == 0.0
        x[bad] = rng.standard_normal((int(bad.sum()), dim))
        norms = np.linalg.norm(x, axis=1)
    return (x / norms[:, None]).T


def cube_points(dim, n, rng):
    """dim x n array of points uniform on [0, 1]^dim."""
    _check_dims(dim, n)
    return rng.random((n, dim)).T


def sample_unit_sphere(dim, n, seed):
    pts = sphere_points(dim, n, seed.generator())
    return [Vector(pts[:, i]) for i in range(n)]


def sample_unit_cube(dim, n, seed):
    pts = cube_points(dim, n, seed.generator())
    return [Vector(pts[:, i]) for i in range(n)]
