"""Experiment configuration constants."""

import math

SQRT3 = math.sqrt(3.0)

# Numerics
SPECTRAL_TOL = 1e-10
MAX_POWER_ITERATIONS = 10000
POWER_BLOCK = 4            # start vectors per block power iteration
SQUARING_PERIOD = 100      # iterations between Gram squarings in the power method
MAX_SQUARINGS = 30
SUP_SAMPLES = 1000         # points per supremum estimate
SIGMA_BAND = 3.0           # Monte Carlo agreement band, in standard errors

# Runtime
DEFAULT_SEED = 20230
WORKERS_ENV = 'PRUNEBOUND_WORKERS'
REPORT_FORMATS = ('csv', 'json')
MODEL_FORMAT_VERSION = 1

# Weight distribution tags used by the Latala experiments
LATALA_DISTRIBUTIONS = {
    'uniform': {'kind': 'uniform', 'label': 'U'},
    'normal-1': {'kind': 'gaussian', 'variance_scale': 1.0, 'label': 'N(0,1/d)'},
    'normal-3': {'kind': 'gaussian', 'variance_scale': 3.0, 'label': 'N(0,3/d)'},
    'zero': {'kind': 'zero', 'label': '0'},
}

NORM_QUANTILES = [0.95, 0.99, 0.999, 0.9999]

# Published reference values
# (n1, n2, K) -> mean, std, {q: (c0, delta0)}
REFERENCE_NORM_QUANTILES = {
    (32, 32, 1.0): (1.087, 0.038, {0.95: (1.15, 0.029), 0.99: (1.183, 0.041), 0.999: (1.206, 0.059), 0.9999: (1.218, 0.077)}),
    (32, 32, SQRT3): (1.882, 0.066, {0.95: (1.996, 0.029), 0.99: (2.044, 0.041), 0.999: (2.069, 0.059), 0.9999: (2.131, 0.077)}),
    (32, 64, 1.0): (0.941, 0.027, {0.95: (0.988, 0.014), 0.99: (1.015, 0.021), 0.999: (1.039, 0.03), 0.9999: (1.042, 0.039)}),
    (32, 64, SQRT3): (1.631, 0.046, {0.95: (1.707, 0.014), 0.99: (1.743, 0.021), 0.999: (1.786, 0.03), 0.9999: (1.797, 0.039)}),
    (64, 64, 1.0): (1.114, 0.026, {0.95: (1.158, 0.014), 0.99: (1.183, 0.021), 0.999: (1.205, 0.03), 0.9999: (1.209, 0.039)}),
    (64, 64, SQRT3): (1.932, 0.045, {0.95: (2.009, 0.014), 0.99: (2.045, 0.021), 0.999: (2.07, 0.03), 0.9999: (2.086, 0.039)}),
    (128, 128, 1.0): (1.131, 0.017, {0.95: (1.159, 0.007), 0.99: (1.173, 0.01), 0.999: (1.199, 0.015), 0.9999: (1.205, 0.019)}),
    (128, 128, SQRT3): (1.956, 0.029, {0.95: (2.008, 0.007), 0.99: (2.024, 0.01), 0.999: (2.044, 0.015), 0.9999: (2.045, 0.019)}),
    (256, 256, 1.0): (1.14, 0.011, {0.95: (1.16, 0.004), 0.99: (1.17, 0.005), 0.999: (1.18, 0.007), 0.9999: (1.181, 0.01)}),
    (256, 256, SQRT3): (1.976, 0.021, {0.95: (2.01, 0.004), 0.99: (2.027, 0.005), 0.999: (2.036, 0.007), 0.9999: (2.036, 0.01)}),
    (512, 512, 1.0): (1.146, 0.007, {0.95: (1.159, 0.002), 0.99: (1.163, 0.003), 0.999: (1.172, 0.004), 0.9999: (1.174, 0.005)}),
    (512, 512, SQRT3): (1.985, 0.012, {0.95: (2.006, 0.002), 0.99: (2.015, 0.003), 0.999: (2.033, 0.004), 0.9999: (2.04, 0.005)}),
}

# (d, dist, alpha) -> term1, term2, term3, mean_norm, C
REFERENCE_LATALA = {
    (32, 'uniform', None): (1.006, 1.006, 1.159, 1.888, 0.596),
    (64, 'uniform', None): (1.006, 1.005, 1.159, 1.934, 0.61),
    (128, 'uniform', None): (1.005, 1.005, 1.159, 1.958, 0.618),
    (256, 'uniform', None): (1.004, 1.003, 1.158, 1.976, 0.624),
    (512, 'uniform', None): (1.003, 1.002, 1.158, 1.985, 0.627),
    (32, 'normal-1', None): (1.011, 1.014, 1.314, 1.905, 0.571),
    (64, 'normal-1', None): (1.008, 1.008, 1.315, 1.947, 0.585),
    (128, 'normal-1', None): (1.005, 1.007, 1.316, 1.965, 0.59),
    (256, 'normal-1', None): (1.005, 1.006, 1.316, 1.979, 0.595),
    (512, 'normal-1', None): (1.004, 1.004, 1.316, 1.988, 0.598),
    (32, 'normal-3', None): (1.751, 1.745, 2.279, 3.295, 0.571),
    (64, 'normal-3', None): (1.755, 1.744, 2.28, 3.361, 0.582),
    (128, 'normal-3', None): (1.742, 1.743, 2.28, 3.405, 0.591),
    (256, 'normal-3', None): (1.743, 1.742, 2.28, 3.428, 0.595),
    (512, 'normal-3', None): (1.74, 1.739, 2.279, 3.441, 0.598),
    (32, 'normal-1', 0.01): (0.626, 0.63, 1.033, 1.237, 0.54),
    (64, 'normal-1', 0.01): (0.632, 0.629, 1.035, 1.239, 0.54),
    (128, 'normal-1', 0.01): (0.63, 0.63, 1.037, 1.242, 0.541),
    (256, 'normal-1', 0.01): (0.63, 0.63, 1.039, 1.246, 0.542),
    (32, 'normal-1', 0.1): (0.714, 0.713, 1.103, 1.379, 0.545),
    (64, 'normal-1', 0.1): (0.729, 0.729, 1.117, 1.426, 0.554),
    (128, 'normal-1', 0.1): (0.744, 0.744, 1.129, 1.459, 0.558),
    (256, 'normal-1', 0.1): (0.758, 0.756, 1.14, 1.491, 0.562),
    (32, 'normal-1', 0.5): (0.928, 0.925, 1.258, 1.759, 0.565),
    (64, 'normal-1', 0.5): (0.95, 0.948, 1.275, 1.831, 0.577),
    (128, 'normal-1', 0.5): (0.964, 0.964, 1.288, 1.883, 0.586),
    (256, 'normal-1', 0.5): (0.975, 0.974, 1.296, 1.92, 0.592),
}

# d -> maximal admissible alpha for CNN filter pruning
REFERENCE_FILTER_ALPHA = {128: 0.6729, 1024: 0.7205}

# Experiment defaults
# Every kind lists every key it accepts; anything else in a config file is an error.
EXPERIMENT_DEFAULTS = {
    'table2': {
        'rows': [[32, 32, 1.0], [32, 32, SQRT3], [128, 128, 1.0], [512, 512, SQRT3]],
        'trials': 1000,
        'quantiles': NORM_QUANTILES,
        'check': True,
        'mean_tol': 0.02,    # relative
        'c0_tol': 0.03,      # relative, q=95% only
    },
    'table3': {
        'rows': [[32, 'uniform', None], [512, 'normal-1', None], [256, 'normal-1', 0.5]],
        'trials': 500,
        'check': True,
        'c_tol': 0.03,
        'cap': 1.0,          # Latala bound checked with this constant
    },
    'order-stats': {
        'a': 1.0,
        'cases': [
            [4, 1, 1], [4, 4, 1], [4, 2, 2], [8, 3, 1], [8, 8, 2],
            [16, 1, 2], [16, 9, 1], [32, 16, 1], [32, 32, 2], [64, 5, 1],
            [64, 64, 1], [128, 100, 2], [256, 1, 1], [256, 128, 2], [512, 256, 1],
            [1024, 10, 2], [1024, 1024, 1], [2048, 700, 1], [4096, 64, 1], [4096, 4000, 2],
        ],
        'trials': 100000,
        'sigma': SIGMA_BAND,
    },
    'balls-bins': {
        'cases': [[4, 8], [32, None], [64, None]],   # None -> ceil(n ln n)
        'trials': 10000,
        'sigma': SIGMA_BAND,
    },
    'circulant-equiv': {
        'instances': 50,
        'max_channels': 3,
        'max_p': 8,
        'forward_tol': 1e-12,
        'norm_tol': 1e-8,
    },
    'fcn-sweep': {
        'depth': 4,
        'd_in': 16,
        'd_out': 16,
        'widths': [64, 128, 256],
        'alpha': 0.5,
        'scheme': 'magnitude-layerwise',
        'activation': 'relu',
        'K': 1.0,
        'trials': 50,
        'sup_samples': SUP_SAMPLES,
        'event_rate': 0.95,
        'control': True,
        'check': True,       # median gap decreasing and bound rate >= event_rate
    },
    'cnn-sweep': {
        'depth': 3,
        'd_in': 3,
        'd_out': 10,
        'p': 8,
        'q': 3,
        'widths': [16, 32, 64],
        'alpha': 0.6,
        'activation': 'relu',
        'K': 1.0,
        'trials': 30,
        'sup_samples': SUP_SAMPLES,
        'explicit_limit': 1024,   # build the dense map when p^2 * d is at most this
        'beta1': 0.5,
        'beta2': 0.1,
        'scaling_tol': 0.25,      # relative spread allowed around the fitted layer-norm constant
        'control': True,
        'check': True,
    },
    'bounds': {
        'depth': 3,
        'width': 1000000,
        'alpha': 0.6,
        'eps': 0.1,
        'delta': 0.1,
        'lipschitz': 1.0,
        'c0': 1.0,
        'delta0': 1.0,
        'c1': None,            # None -> estimated Latala constant
        'K': 1.0,
        'K1': None,            # None -> K^2 / 3 (uniform witness)
        'K2': None,            # None -> K^4 / 5
        'N': None,             # per-layer norm bounds, None -> [1] * depth
        'deltas': None,        # per-layer failure probabilities, None -> [0] * depth
        'p': 32,
        'q': 3,
        'p0': 1.0,
        'beta1': 0.5,
        'beta2': 0.1,
        'C': 0.6,              # Latala constant used by the CNN expressions
        'C5': 0.6,
        'latala_d': 64,
        'latala_trials': 100,
    },
    'oracle-suite': {
        'order_trials': 20000,
        'balls_trials': 10000,
        'circulant_instances': 20,
        'sigma': SIGMA_BAND,
    },
}

EXPERIMENT_KINDS = tuple(EXPERIMENT_DEFAULTS)
