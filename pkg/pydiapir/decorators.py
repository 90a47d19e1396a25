import functools
import logging

log = logging.getLogger('pydiapir')
WARNED_ONCE = {}


def experimental_path(func):
    @functools.wraps(func)
    def wrapper(*args, **kwargs):
        if not WARNED_ONCE.get(func.__qualname__):
            log.warning(f"[{func.__qualname__}] is an experimental code path. This message will be "
                        "printed only once at the warning level.")
            WARNED_ONCE[func.__qualname__] = 1
        else:
            log.debug(f"[{func.__qualname__}] is an experimental code path.")
        return func(*args, **kwargs)

    return wrapper
