import os
import re

# dotted override, e.g. geometry.nx=60
OVERRIDE_REGEX = re.compile(r'^\s*([A-Za-z_][A-Za-z0-9_]*)\.([A-Za-z_][A-Za-z0-9_]*)\s*=(.*)$')

PRESET_REGEX = re.compile(r'^[a-z][a-z0-9_]*$')

EPSILON_SINGULAR = 1e-14  # |det| at or below this is treated as singular
GRAVITY_DEFAULT = 9.81  # m/s^2
LOW_QUALITY_RATIO = 0.1  # warn when min_area_ratio drops below this
EQUILIBRIUM_RTOL = 1e-10  # step loads at or below this fraction of the weight are exact equilibrium


def env_workers(default=1):
    """
    Worker cap for element assembly from SLA_THREADS (0 = auto)
    """
    value = os.getenv("SLA_THREADS", "")
    if not value.strip():
        return default
    try:
        workers = int(value)
    except ValueError:
        return default
    if workers <= 0:
        return os.cpu_count() or 1
    return workers


def env_flag(name, default="no"):
    return os.getenv(name, default).strip().lower() in ("1", "yes", "true", "on")
