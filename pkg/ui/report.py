"""CSV and JSON report emission.

Floats are written with repr, so identical reports are identical bytes.
"""

import csv
import io
import json
import logging
import sys
from dataclasses import asdict
from fractions import Fraction

import numpy as np

logger = logging.getLogger(__name__)


def _plain(value):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Fraction):
        return str(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def _compact(value):
    return json.dumps(value, default=_plain, separators=(',', ':'))


def _cell(value):
    if isinstance(value, np.generic):
        value = value.item()
    if value is None:
        return ''
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple, dict, np.ndarray)):
        return _compact(value)
    return str(value)


def columns(rows):
    """Union of row keys in first-seen order."""
    seen = {}
    for row in rows:
        for key in row:
            seen.setdefault(key, None)
    return list(seen)


def render_csv(config, report):
    out = io.StringIO()
    header = config.header()
    out.write(f"# kind={header['kind']}\n")
    out.write(f"# seed={header['seed']}\n")
    for key, value in header['params'].items():
        out.write(f"# {key}={_compact(value)}\n")
    out.write(f"# adjusted={_compact(config.adjusted)}\n")
    for item in report.summary:
        out.write(f"# summary {_compact(item)}\n")
    for c in report.checks:
        status = 'ok' if c.satisfied else 'FAILED'
        out.write(f"# check {c.name}: {c.lhs!r} {c.direction} {c.rhs!r} {status}\n")
    cols = columns(report.rows)
    if 'seed' in cols:
        # always last
        cols.remove('seed')
        cols.append('seed')
        out.write("# seed column: per-row stream label base:stream[.substream]\n")
    writer = csv.writer(out, lineterminator='\n')
    writer.writerow(cols)
    for row in report.rows:
        writer.writerow([_cell(row.get(k)) for k in cols])
    return out.getvalue()


def render_json(config, report):
    doc = {
        'config': config.header(),
        'adjusted': list(config.adjusted),
        'rows': report.rows,
        'summary': {
            'groups': report.summary,
            'checks': [asdict(c) for c in report.checks],
            'passed': report.passed,
        },
    }
    return json.dumps(doc, default=_plain, indent=2) + '\n'


RENDERERS = {'csv': render_csv, 'json': render_json}


def write_report(config, report):
    """Write to config.out, or stdout when no path is set."""
    text = RENDERERS[config.fmt](config, report)
    if config.out is None:
        sys.stdout.write(text)
        return
    with open(config.out, 'w', newline='') as fh:
        fh.write(text)
    logger.info("wrote %s report to %s", config.fmt, config.out)
