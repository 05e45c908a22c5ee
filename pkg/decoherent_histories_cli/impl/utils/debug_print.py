import logging
from pprint import pformat

import numpy as np


logger = logging.getLogger('decoherent_histories_cli')


# -------------------------------------------------------------------------
# STATE

DEBUG = False

def activate_debug():
    global DEBUG
    DEBUG = True
    logger.setLevel(logging.DEBUG)


# -------------------------------------------------------------------------
# FNS

def debug_print(msg):
    if DEBUG:
        logger.debug(msg)

def debug_pprint(msg):
    if DEBUG:
        logger.debug(pformat(msg))


# -------------------------------------------------------------------------
# STRUCTURED EVENTS

def _render(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return 'true' if value else 'false'
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, (list, tuple)):
        return '[' + ','.join(_render(v) for v in value) + ']'
    text = str(value)
    if not text or any(c.isspace() for c in text) or '=' in text:
        return '"' + text.replace('"', '\\"') + '"'
    return text


def format_event(event: str, **fields) -> str:
    parts = ['event=' + _render(event)]
    parts += ['{}={}'.format(key, _render(fields[key])) for key in sorted(fields)]
    return ' '.join(parts)


def log_event(event: str, **fields):
    logger.info(format_event(event, **fields))
