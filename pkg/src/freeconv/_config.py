"""Runtime caps shared by the exact modules."""

import os

DEFAULT_ENUM_CAP = 7
DEFAULT_WEINGARTEN_CAP = 6
CAP_ENV = "FREECONV_CAP_N"


class CapExceeded(ValueError):
    """Raised when a degree exceeds the configured enumeration cap."""


def _env_cap():
    raw = os.environ.get(CAP_ENV)
    if raw is None or raw.strip() == "":
        return None
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"{CAP_ENV} must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"{CAP_ENV} must be positive, got {value}")
    return value


def enum_cap() -> int:
    """Largest n for which S_n may be enumerated."""
    env = _env_cap()
    return DEFAULT_ENUM_CAP if env is None else env


def weingarten_cap() -> int:
    """Largest n for the symbolic Weingarten tables (env var overrides)."""
    env = _env_cap()
    return DEFAULT_WEINGARTEN_CAP if env is None else env


def check_cap(n: int, cap: int, what: str = "n") -> None:
    if n > cap:
        raise CapExceeded(f"{what}={n} exceeds the configured cap {cap} (set {CAP_ENV} to raise it)")
