"""Wrap-around convolution as a doubly block circulant linear map.

Feature maps X of shape (channels, p, p) are vectorized channel-major,
then by row, then by column (numpy C order), so X[t, a, b] sits at
position t*p*p + a*p + b.  With that ordering the conv layer
    Y[s, a, b] = sum_{t, i, j} X[t, (a+i-1)%p, (b+j-1)%p] K[s, t, i, j]
(1-based, with k%n = n when n divides k) is vec(Y) = W vec(X) where the
(s, t) block of W is block-circulant with circulant blocks:
    B_st[(a, r), (b, c)] = K[s, t, (b-a)%p + 1, (c-r)%p + 1].
"""

import logging

import numpy as np

from core.errors import DimensionError, ParameterError
from core.linalg import Matrix, Vector

logger = logging.getLogger(__name__)


def wrap_index(k, n):
    """1-based modulo: k%n = n when n divides k. Works elementwise on arrays."""
    return ((k - 1) % n) + 1


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    if not np.all(np.isfinite(arr)):
        raise ParameterError("filter entries must be finite")
    arr.setflags(write=False)
    return arr


class ConvTensor:
    """Filters of one conv layer, shape (d_out, d_in, q, q)."""
    __slots__ = ('entries',)

    def __init__(self, entries):
        arr = _frozen(entries)
        if arr.ndim != 4 or arr.shape[2] != arr.shape[3] or arr.shape[2] < 1:
            raise DimensionError(f"expected (d_out, d_in, q, q) filters, got shape {arr.shape}")
        self.entries = arr

    @property
    def d_out(self):
        return self.entries.shape[0]

    @property
    def d_in(self):
        return self.entries.shape[1]

    @property
    def q(self):
        return self.entries.shape[2]

    def __repr__(self):
        return f"ConvTensor({self.d_out}x{self.d_in}x{self.q}x{self.q})"


class PaddedKernel:
    """Filters zero-padded to the feature-map size, shape (d_out, d_in, p, p)."""
    __slots__ = ('entries', 'q')

    def __init__(self, entries, q=None):
        arr = _frozen(entries)
        if arr.ndim != 4 or arr.shape[2] != arr.shape[3]:
            raise DimensionError(f"expected (d_out, d_in, p, p) kernel, got shape {arr.shape}")
        self.entries = arr
        self.q = arr.shape[2] if q is None else q

    @property
    def d_out(self):
        return self.entries.shape[0]

    @property
    def d_in(self):
        return self.entries.shape[1]

    @property
    def p(self):
        return self.entries.shape[2]


def pad_kernel(f, p):
    if p <= f.q:
        raise ParameterError(f"feature size p={p} must exceed kernel size q={f.q}")
    k = np.zeros((f.d_out, f.d_in, p, p))
    k[:, :, :f.q, :f.q] = f.entries
    return PaddedKernel(k, q=f.q)


def mask_filters(f, filter_mask):
    """Zero whole 2D kernels where filter_mask (d_out x d_in) is 0."""
    fm = np.asarray(filter_mask, dtype=np.float64)
    if fm.shape != (f.d_out, f.d_in):
        raise DimensionError(f"filter mask shape {fm.shape} does not match {f.d_out}x{f.d_in}")
    return ConvTensor(f.entries * fm[:, :, None, None])


def _offsets(p):
    """0-based (col - row) % p table, via the 1-based wrap."""
    idx = np.arange(1, p + 1)
    return wrap_index(idx[None, :] - idx[:, None] + 1, p) - 1


def circ(a):
    """Circulant matrix whose row i is a right-rotated by i-1."""
    arr = a.array if isinstance(a, Vector) else np.asarray(a, dtype=np.float64)
    return Matrix._wrap(arr[_offsets(arr.shape[0])])


def build_block(k, s=1, t=1):
    """p^2 x p^2 doubly block circulant matrix B_st (s, t 1-based) of a kernel.

    k may also be a bare p x p slice, in which case s and t are ignored.
    """
    if isinstance(k, PaddedKernel):
        if not (1 <= s <= k.d_out and 1 <= t <= k.d_in):
            raise DimensionError(f"channel pair ({s}, {t}) outside {k.d_out}x{k.d_in}")
        ks = k.entries[s - 1, t - 1]
    else:
        ks = np.asarray(k, dtype=np.float64)
    p = ks.shape[0]
    d = _offsets(p)
    b = ks[d[:, None, :, None], d[None, :, None, :]]     # axes (a, r, b, c)
    return Matrix._wrap(b.reshape(p * p, p * p))


def build_full_map(k):
    """p^2 d_out x p^2 d_in matrix W with vec(Y) = W vec(X)."""
    p = k.p
    d = _offsets(p)
    w = k.entries[:, :, d[:, None, :, None], d[None, :, None, :]]   # (s, t, a, r, b, c)
    w = w.transpose(0, 2, 3, 1, 4, 5)
    return Matrix._wrap(w.reshape(k.d_out * p * p, k.d_in * p * p))


def conv_layer(filters, x):
    """Wrap-around convolution of x (..., d_in, p, p) with (d_out, d_in, q, q) filters."""
    f = filters.entries if isinstance(filters, ConvTensor) else np.asarray(filters)
    x = np.asarray(x, dtype=np.float64)
    d_out, d_in, q, _ = f.shape
    if x.ndim < 3 or x.shape[-3] != d_in or x.shape[-1] != x.shape[-2]:
        raise DimensionError(f"input of shape {x.shape} does not fit filters {f.shape}")
    p = x.shape[-1]
    base = np.arange(1, p + 1)
    out = np.zeros(x.shape[:-3] + (p, p, d_out))
    for i in range(1, q + 1):
        rows = wrap_index(base + i - 1, p) - 1
        for j in range(1, q + 1):
            tap = f[:, :, i - 1, j - 1]
            if not tap.any():
                continue
            cols = wrap_index(base + j - 1, p) - 1
            shifted = x[..., rows[:, None], cols[None, :]]
            out += np.tensordot(shifted, tap, axes=([-3], [1]))
    return np.moveaxis(out, -1, -3)


def dft_blocks(k):
    """Stack of d_out x d_in frequency blocks P(u, v), u, v = 1..p."""
    p = k.p
    idx = np.arange(1, p + 1)
    omega = np.exp(2j * np.pi * np.outer(idx, idx) / p)    # omega^(u i)
    q = k.q
    return np.einsum('ui,stij,vj->uvst', omega[:, :q], k.entries[:, :, :q, :q], omega[:, :q])


def spectral_norm_via_dft(k):
    """max over frequencies (u, v) of the largest singular value of P(u, v)."""
    blocks = dft_blocks(k)
    svals = np.linalg.svd(blocks, compute_uv=False)
    return float(svals.max())
