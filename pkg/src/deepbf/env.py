"""
Utilities for reading deepbf settings from the process environment.
"""

import os
from typing import Mapping, Optional


ENV_THREADS = "DEEPBF_THREADS"
DEFAULT_THREADS = 1


def get_env_int(key: str, default: int, env: Optional[Mapping[str, str]] = None) -> int:
    """
    Integer value of ``key`` in ``env`` (the process environment by default).

    Missing, empty and non-integer values give ``default``.
    """

    value = (os.environ if env is None else env).get(key, "").strip()
    try:
        return int(value) if value else default
    except ValueError:
        return default


def num_threads() -> int:
    """
    Worker count cap taken from ``DEEPBF_THREADS``; non-positive values mean 1.
    """

    return max(1, get_env_int(ENV_THREADS, DEFAULT_THREADS))
