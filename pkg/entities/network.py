"""Target networks, masked forward passes and the pruned-vs-target gap."""

import json
import logging
from dataclasses import dataclass

import numpy as np

from core.config import MODEL_FORMAT_VERSION
from core.errors import ConfigError, DimensionError, ParameterError
from core.linalg import Matrix, Vector
from core.sampling import cube_points, sample_matrix, sample_tensor, sphere_points
from .circulant import ConvTensor, build_full_map, conv_layer, mask_filters, pad_kernel

logger = logging.getLogger(__name__)

ACTIVATION_LIPSCHITZ = {'relu': 1.0, 'tanh': 1.0, 'identity': 1.0}

SPHERE = 'sphere'
CUBE = 'cube'


@dataclass(frozen=True)
class Activation:
    """Elementwise activation with sigma(0) = 0 and Lipschitz constant L."""
    kind: str = 'relu'
    lipschitz: float = 1.0

    def __post_init__(self):
        if self.kind not in ACTIVATION_LIPSCHITZ:
            raise ParameterError(f"unknown activation {self.kind!r}")
        if self.lipschitz < ACTIVATION_LIPSCHITZ[self.kind]:
            raise ParameterError(f"{self.kind} is not {self.lipschitz}-Lipschitz")

    def __call__(self, x):
        if self.kind == 'relu':
            return np.maximum(x, 0.0)
        if self.kind == 'tanh':
            return np.tanh(x)
        return x


class FcnModel:
    """F(x) = W_l s_{l-1}(W_{l-1} ... s_1(W_1 x)), no biases."""
    kind = 'fcn'

    def __init__(self, weights, activations):
        self.weights = tuple(w if isinstance(w, Matrix) else Matrix(w) for w in weights)
        if len(self.weights) < 3:
            raise DimensionError(f"depth must be at least 3, got {len(self.weights)}")
        for k in range(1, len(self.weights)):
            if self.weights[k].cols != self.weights[k - 1].rows:
                raise DimensionError(
                    f"W_{k + 1} has {self.weights[k].cols} columns but W_{k} has {self.weights[k - 1].rows} rows")
        if isinstance(activations, Activation):
            activations = [activations] * len(self.weights)
        self.activations = tuple(activations)
        if len(self.activations) not in (len(self.weights) - 1, len(self.weights)):
            raise DimensionError("one activation per hidden layer")

    @property
    def depth(self):
        return len(self.weights)

    @property
    def widths(self):
        return [self.weights[0].cols] + [w.rows for w in self.weights]

    @property
    def input_dim(self):
        return self.weights[0].cols

    @property
    def compact_shapes(self):
        return [w.shape for w in self.weights]

    @property
    def blocks(self):
        return (1,) * self.depth

    @property
    def lipschitz(self):
        return [a.lipschitz for a in self.activations[:self.depth - 1]]

    def layer_matrix(self, k):
        """Dense weight matrix W_k* (1-based)."""
        return self.weights[k - 1]

    def __repr__(self):
        return f"FcnModel(widths={self.widths})"


class CnnModel:
    """Wrap-around conv layers 1..l-1 with a shared activation, then a dense layer."""
    kind = 'cnn'

    def __init__(self, filters, dense, activation, p):
        self.filters = tuple(f if isinstance(f, ConvTensor) else ConvTensor(f) for f in filters)
        self.dense = dense if isinstance(dense, Matrix) else Matrix(dense)
        self.activation = activation
        self.p = int(p)
        if len(self.filters) < 2:
            raise DimensionError(f"depth must be at least 3, got {len(self.filters) + 1}")
        for k, f in enumerate(self.filters, start=1):
            if self.p <= f.q:
                raise ParameterError(f"layer {k}: feature size p={self.p} must exceed q={f.q}")
            if k > 1 and f.d_in != self.filters[k - 2].d_out:
                raise DimensionError(f"layer {k} expects {f.d_in} channels, previous layer gives {self.filters[k - 2].d_out}")
        if self.dense.cols != self.filters[-1].d_out * self.p ** 2:
            raise DimensionError(f"dense layer needs {self.filters[-1].d_out * self.p ** 2} columns, has {self.dense.cols}")

    @property
    def depth(self):
        return len(self.filters) + 1

    @property
    def channels(self):
        return [self.filters[0].d_in] + [f.d_out for f in self.filters]

    @property
    def widths(self):
        return self.channels + [self.dense.rows]

    @property
    def input_dim(self):
        return self.filters[0].d_in * self.p ** 2

    @property
    def compact_shapes(self):
        return [(f.d_out, f.d_in) for f in self.filters] + [self.dense.shape]

    @property
    def blocks(self):
        return (self.p ** 2,) * len(self.filters) + (1,)

    @property
    def lipschitz(self):
        return [self.activation.lipschitz] * len(self.filters)

    def layer_matrix(self, k):
        """Explicit linear map of layer k (1-based); conv layers go through the circulant builder."""
        if k == self.depth:
            return self.dense
        return build_full_map(pad_kernel(self.filters[k - 1], self.p))

    def __repr__(self):
        return f"CnnModel(channels={self.channels}, p={self.p}, d_out={self.dense.rows})"


def random_fcn(widths, activation, dist, seed):
    """FCN with W_k* of shape widths[k] x widths[k-1] drawn from dist."""
    weights = [sample_matrix(dist, widths[k], widths[k - 1], seed.substream(k))
               for k in range(1, len(widths))]
    return FcnModel(weights, activation)


def random_cnn(channels, d_out, p, q, activation, dist, seed):
    """CNN with conv channels d_0..d_{l-1}, kernel size q and a dense d_out head."""
    filters = [ConvTensor(sample_tensor(dist, channels[k], channels[k - 1], q, p, seed.substream(k)))
               for k in range(1, len(channels))]
    dense = sample_matrix(dist, d_out, channels[-1] * p * p, seed.substream(len(channels)))
    return CnnModel(filters, dense, activation, p)


def _check_mask(model, mask):
    if mask is None:
        return
    if mask.depth != model.depth:
        raise DimensionError(f"mask has {mask.depth} layers, model has {model.depth}")
    for k, (m, shape) in enumerate(zip(mask.compact, model.compact_shapes), start=1):
        if m.shape != tuple(shape):
            raise DimensionError(f"mask layer {k} has shape {m.shape}, expected {tuple(shape)}")


def _fcn_arrays(model, mask):
    if mask is None:
        return [w.array for w in model.weights]
    return [w.array * m for w, m in zip(model.weights, mask.compact)]


def _cnn_parts(model, mask):
    if mask is None:
        return [f.entries for f in model.filters], model.dense.array
    filters = [mask_filters(f, m).entries for f, m in zip(model.filters, mask.compact)]
    return filters, model.dense.array * mask.compact[-1]


def pruned_weights(model, mask):
    """W_k = M_k o W_k*, as Matrix for dense layers and ConvTensor for conv layers."""
    _check_mask(model, mask)
    if model.kind == 'fcn':
        return [Matrix._wrap(a) for a in _fcn_arrays(model, mask)]
    filters, dense = _cnn_parts(model, mask)
    return [ConvTensor(f) for f in filters] + [Matrix._wrap(dense)]


def _fcn_batch(model, mask, x, keep=False):
    """Columns of x are inputs; returns outputs and optionally hidden layers."""
    arrays = _fcn_arrays(model, mask)
    h = x
    hidden = []
    for w, act in zip(arrays[:-1], model.activations):
        h = act(w @ h)
        if keep:
            hidden.append(h)
    out = arrays[-1] @ h
    return (out, hidden) if keep else out


def _cnn_batch(model, mask, x, keep=False):
    filters, dense = _cnn_parts(model, mask)
    n = x.shape[1]
    h = x.T.reshape(n, model.filters[0].d_in, model.p, model.p)
    hidden = []
    for f in filters:
        h = model.activation(conv_layer(f, h))
        if keep:
            hidden.append(h.reshape(n, -1).T)
    out = dense @ h.reshape(n, -1).T
    return (out, hidden) if keep else out


def forward_batch(model, mask, x):
    """Outputs for every column of x."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[0] != model.input_dim:
        raise DimensionError(f"inputs must be {model.input_dim} x n, got {x.shape}")
    _check_mask(model, mask)
    if model.kind == 'fcn':
        return _fcn_batch(model, mask, x)
    return _cnn_batch(model, mask, x)


def _single(model, mask, x):
    if x.dim != model.input_dim:
        raise DimensionError(f"input has dimension {x.dim}, model expects {model.input_dim}")
    return Vector._wrap(forward_batch(model, mask, x.array[:, None])[:, 0])


def forward_fcn(model, mask, x):
    if model.kind != 'fcn':
        raise ParameterError("forward_fcn needs an FcnModel")
    return _single(model, mask, x)


def forward_cnn(model, mask, x):
    """x is vec(X) for an input feature map X of shape (d_0, p, p)."""
    if model.kind != 'cnn':
        raise ParameterError("forward_cnn needs a CnnModel")
    return _single(model, mask, x)


def layer_outputs(model, mask, x):
    """Hidden outputs y_1(x) .. y_{l-1}(x) as Vectors."""
    if x.dim != model.input_dim:
        raise DimensionError(f"input has dimension {x.dim}, model expects {model.input_dim}")
    _check_mask(model, mask)
    batch = _fcn_batch if model.kind == 'fcn' else _cnn_batch
    _, hidden = batch(model, mask, x.array[:, None], keep=True)
    return [Vector._wrap(h[:, 0]) for h in hidden]


def compression_ratio(mask, k):
    """Surviving fraction of layer k (1-based)."""
    if not 1 <= k <= mask.depth:
        raise DimensionError(f"layer {k} outside 1..{mask.depth}")
    return float(np.count_nonzero(mask.compact[k - 1])) / mask.compact[k - 1].size


def default_domain(model):
    return SPHERE if model.kind == 'fcn' else CUBE


def domain_points(model, domain, n, rng):
    if domain == SPHERE:
        return sphere_points(model.input_dim, n, rng)
    if domain == CUBE:
        return cube_points(model.input_dim, n, rng)
    raise ParameterError(f"unknown evaluation domain {domain!r}")


def gap_values(target, mask, points, chunk=256):
    """||f(x) - F(x)||_2 for every column of points."""
    gaps = np.empty(points.shape[1])
    for start in range(0, points.shape[1], chunk):
        x = points[:, start:start + chunk]
        diff = forward_batch(target, mask, x) - forward_batch(target, None, x)
        gaps[start:start + chunk] = np.linalg.norm(diff, axis=0)
    return gaps


def estimate_sup_gap(target, mask, domain=None, n=1000, seed=None):
    """Max over n sampled points of ||f(x) - F(x)||_2, a lower bound on the supremum."""
    if n < 1:
        raise ParameterError(f"need at least one sample point, got {n}")
    if seed is None:
        raise ParameterError("estimate_sup_gap needs a seed")
    _check_mask(target, mask)
    points = domain_points(target, domain or default_domain(target), n, seed.generator())
    return float(gap_values(target, mask, points).max())


def _matrix_doc(m):
    arr = m.array if isinstance(m, Matrix) else m
    return {'shape': list(arr.shape), 'data': np.ascontiguousarray(arr).ravel().tolist()}


def _matrix_load(doc):
    return np.asarray(doc['data'], dtype=np.float64).reshape(doc['shape'])


def model_to_dict(model):
    if model.kind == 'fcn':
        return {
            'format_version': MODEL_FORMAT_VERSION,
            'kind': 'fcn',
            'activations': [{'kind': a.kind, 'lipschitz': a.lipschitz} for a in model.activations],
            'weights': [_matrix_doc(w) for w in model.weights],
        }
    return {
        'format_version': MODEL_FORMAT_VERSION,
        'kind': 'cnn',
        'p': model.p,
        'activation': {'kind': model.activation.kind, 'lipschitz': model.activation.lipschitz},
        'filters': [_matrix_doc(f.entries) for f in model.filters],
        'dense': _matrix_doc(model.dense),
    }


def model_from_dict(doc):
    version = doc.get('format_version')
    if version != MODEL_FORMAT_VERSION:
        raise ConfigError(f"unsupported model format version {version!r}")
    if doc.get('kind') == 'fcn':
        acts = [Activation(a['kind'], a['lipschitz']) for a in doc['activations']]
        return FcnModel([Matrix(_matrix_load(w)) for w in doc['weights']], acts)
    if doc.get('kind') == 'cnn':
        act = Activation(doc['activation']['kind'], doc['activation']['lipschitz'])
        filters = [ConvTensor(_matrix_load(f)) for f in doc['filters']]
        return CnnModel(filters, Matrix(_matrix_load(doc['dense'])), act, doc['p'])
    raise ConfigError(f"unknown model kind {doc.get('kind')!r}")


def save_model(model, path):
    with open(path, 'w') as fh:
        json.dump(model_to_dict(model), fh)
    logger.info("saved %r to %s", model, path)


def load_model(path):
    with open(path) as fh:
        return model_from_dict(json.load(fh))
