"""Dense real matrices and vectors, norms and vectorization.

Matrix and Vector are immutable wrappers around read-only numpy arrays.
Matrix storage is column-major so that vectorize is a view, not a copy.
"""

import logging

import numpy as np

from .config import MAX_POWER_ITERATIONS, MAX_SQUARINGS, POWER_BLOCK, SPECTRAL_TOL, SQUARING_PERIOD
from .errors import ConvergenceError, DimensionError, ParameterError

logger = logging.getLogger(__name__)


def _freeze(arr):
    arr.setflags(write=False)
    return arr


def _check_finite(arr, what):
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{what} has non-finite entries")


class Matrix:
    """Dense real matrix with explicit rows and cols."""
    __slots__ = ('_data',)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order='F', ndmin=2)
        if arr.ndim != 2 or arr.size == 0:
            raise DimensionError(f"expected a non-empty 2D array, got shape {arr.shape}")
        _check_finite(arr, "matrix")
        self._data = _freeze(arr)

    @classmethod
    def _wrap(cls, arr):
        # trusted internal path: arr is a fresh float array owned by the caller
        obj = cls.__new__(cls)
        arr = np.asfortranarray(arr, dtype=np.float64)
        _check_finite(arr, "matrix")
        obj._data = _freeze(arr)
        return obj

    @classmethod
    def from_array(cls, arr):
        return cls(arr)

    @classmethod
    def zeros(cls, rows, cols):
        return cls._wrap(np.zeros((rows, cols), order='F'))

    @classmethod
    def ones(cls, rows, cols):
        return cls._wrap(np.ones((rows, cols), order='F'))

    @classmethod
    def identity(cls, n):
        return cls._wrap(np.eye(n, order='F'))

    @classmethod
    def from_rows(cls, rows):
        return cls(rows)

    @property
    def rows(self):
        return self._data.shape[0]

    @property
    def cols(self):
        return self._data.shape[1]

    @property
    def shape(self):
        return self._data.shape

    @property
    def array(self):
        """Read-only view of the entries."""
        return self._data

    @property
    def T(self):
        return transpose(self)

    def __matmul__(self, other):
        if isinstance(other, Vector):
            return matvec(self, other)
        return matmul(self, other)

    def __sub__(self, other):
        return subtract(self, other)

    def __eq__(self, other):
        if not isinstance(other, Matrix):
            return NotImplemented
        return self.shape == other.shape and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        return f"Matrix({self.rows}x{self.cols})"


class Vector:
    """Dense real vector."""
    __slots__ = ('_data',)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, ndmin=1)
        if arr.ndim != 1 or arr.size == 0:
            raise DimensionError(f"expected a non-empty 1D array, got shape {arr.shape}")
        _check_finite(arr, "vector")
        self._data = _freeze(arr)

    @classmethod
    def _wrap(cls, arr):
        obj = cls.__new__(cls)
        arr = np.asarray(arr, dtype=np.float64)
        _check_finite(arr, "vector")
        if arr.flags.writeable:
            arr.setflags(write=False)
        obj._data = arr
        return obj

    @property
    def dim(self):
        return self._data.shape[0]

    @property
    def array(self):
        return self._data

    def __len__(self):
        return self.dim

    def __eq__(self, other):
        if not isinstance(other, Vector):
            return NotImplemented
        return self.dim == other.dim and bool(np.array_equal(self._data, other._data))

    __hash__ = None

    def __repr__(self):
        return f"Vector({self.dim})"


def as_array(m):
    """Plain 2D float array for a Matrix or array-like."""
    if isinstance(m, Matrix):
        return m.array
    return np.asarray(m, dtype=np.float64)


def vectorize(m):
    """Column-stacked vec(M), a view of the column-major storage."""
    return Vector._wrap(m.array.ravel(order='F'))


def reshape(v, rows, cols):
    """Inverse of vectorize."""
    if rows * cols != v.dim:
        raise DimensionError(f"cannot reshape length {v.dim} into {rows}x{cols}")
    return Matrix._wrap(v.array.reshape((rows, cols), order='F'))


def hadamard(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"hadamard of {a.shape} and {b.shape}")
    return Matrix._wrap(a.array * b.array)


def transpose(m):
    return Matrix._wrap(m.array.T)


def matmul(a, b):
    if a.cols != b.rows:
        raise DimensionError(f"matmul of {a.shape} and {b.shape}")
    return Matrix._wrap(a.array @ b.array)


def subtract(a, b):
    if a.shape != b.shape:
        raise DimensionError(f"subtract of {a.shape} and {b.shape}")
    return Matrix._wrap(a.array - b.array)


def matvec(m, v):
    if m.cols != v.dim:
        raise DimensionError(f"matvec of {m.shape} with length {v.dim}")
    return Vector._wrap(m.array @ v.array)


def l0_norm(v):
    return int(np.count_nonzero(v.array))


def l2_norm(v):
    return float(np.linalg.norm(v.array))


def _start_block(n, k):
    if n <= k:
        return np.eye(n)
    i = np.arange(1, n + 1, dtype=np.float64)
    block = np.empty((n, k))
    block[:, 0] = 1.0
    for j in range(1, k):
        block[:, j] = np.cos(j * i)
    return np.linalg.qr(block)[0]


def _ritz_iterate(gram, q, tol, max_iter):
    """Top eigenpair of a PSD gram matrix by block iteration with Rayleigh-Ritz.

    Stops once the residual ||G v - theta v|| of the leading Ritz pair is at
    most tol * theta. Some eigenvalue then lies within tol * theta of theta,
    and theta never exceeds the largest one. Returns (theta, v, iterations),
    or None when the start block is annihilated on the first step.
    """
    op = gram
    squarings = 0
    theta, v = 0.0, q[:, 0]
    for it in range(1, max_iter + 1):
        gq = gram @ q
        vals, vecs = np.linalg.eigh(q.T @ gq)
        theta, y = float(vals[-1]), vecs[:, -1]
        if theta <= 0.0:
            if it == 1:
                return None
            return 0.0, v, it
        v = q @ y
        if np.linalg.norm(gq @ y - theta * v) <= tol * theta:
            return theta, v, it
        if it % SQUARING_PERIOD == 0 and squarings < MAX_SQUARINGS:
            # widens the gap below the leading block
            op = op @ op
            op = op / np.linalg.norm(op)
            squarings += 1
        q = np.linalg.qr(gq if op is gram else op @ q)[0]
    raise ConvergenceError(
        f"power iteration did not reach tol={tol} in {max_iter} iterations",
        last_iterate=v, iterations=max_iter, estimate=float(np.sqrt(max(theta, 0.0))))


def spectral_norm(m, tol=SPECTRAL_TOL, max_iter=MAX_POWER_ITERATIONS):
    """Largest singular value of m, to relative accuracy tol.

    Block power iteration on the smaller Gram matrix with a Rayleigh-Ritz
    step per iterate, so nearly tied top singular values do not stall it.
    The first start column is the all-ones vector. If the whole start block
    lies in the null space, one retry starts from the Gram columns with the
    largest diagonal entries.
    """
    if tol <= 0:
        raise ParameterError(f"tol must be positive, got {tol}")
    if max_iter < 1:
        raise ParameterError(f"max_iter must be at least 1, got {max_iter}")
    a = as_array(m)
    if a.ndim != 2:
        raise DimensionError(f"expected a 2D operand, got shape {a.shape}")
    scale = float(np.abs(a).max())
    if scale == 0.0:
        return 0.0
    # scaled to unit max entry so tiny matrices do not underflow in the Gram product
    a = a / scale
    gram = a @ a.T if a.shape[0] < a.shape[1] else a.T @ a
    n = gram.shape[0]
    k = min(n, POWER_BLOCK)
    result = _ritz_iterate(gram, _start_block(n, k), tol, max_iter)
    if result is None:
        cols = np.argsort(np.diag(gram))[::-1][:k]
        logger.warning("start block in null space, retrying from gram columns %s", cols.tolist())
        result = _ritz_iterate(gram, np.linalg.qr(gram[:, cols])[0], tol, max_iter)
        if result is None:
            raise ConvergenceError("degenerate start block on retry", last_iterate=gram[:, cols[0]], iterations=1)
    return float(scale * np.sqrt(max(result[0], 0.0)))
