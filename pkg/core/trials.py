"""Trial-level parallelism with results delivered in trial order."""

import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

from tqdm import tqdm

from .config import WORKERS_ENV
from .errors import ConfigError

logger = logging.getLogger(__name__)


def worker_count():
    """Workers from the environment; 1 when unset."""
    raw = os.environ.get(WORKERS_ENV, '1')
    try:
        workers = int(raw)
    except ValueError:
        raise ConfigError(f"{WORKERS_ENV} must be an integer, got {raw!r}") from None
    if workers < 1:
        raise ConfigError(f"{WORKERS_ENV} must be at least 1, got {workers}")
    return workers


def map_trials(fn, trials, workers=None, desc=None):
    """Yield fn(0), fn(1), ... in index order, computing up to `workers` at once.

    The order of results never depends on the worker count, so any fold
    over them is deterministic.
    """
    workers = workers or worker_count()
    bar = tqdm(total=trials, desc=desc, file=sys.stderr, leave=False,
               disable=desc is None or not sys.stderr.isatty())
    try:
        if workers == 1:
            for t in range(trials):
                yield fn(t)
                bar.update()
            return
        window = 4 * workers
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for start in range(0, trials, window):
                for result in pool.map(fn, range(start, min(start + window, trials))):
                    yield result
                    bar.update()
    finally:
        bar.close()
