"""Selection between the numba kernels and the pure numpy fallback.

Set ``CHEMOPLAST_DISABLE_NUMBA=1`` in the environment to force the numpy path.
The flag is read once at import time; :func:`use_numba` can override it at
runtime (used by the benchmark and the cross-check tests).
"""

from __future__ import annotations

import os

import warnings

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
    # an outdated system TBB only means numba falls back to another threading layer
    warnings.filterwarnings("ignore", message="The TBB threading layer requires")
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_ENV_FLAG = "CHEMOPLAST_DISABLE_NUMBA"


def _env_disabled() -> bool:
    return os.environ.get(_ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


_state = {"numba": HAVE_NUMBA and not _env_disabled()}


def numba_enabled() -> bool:
    return _state["numba"]


def use_numba(flag: bool) -> None:
    """Switch kernels globally. Requesting numba without it installed is an error."""
    if flag and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _state["numba"] = bool(flag)


def set_threads(n: int | None) -> None:
    if n is None or not HAVE_NUMBA:
        return
    import numba

    numba.set_num_threads(max(1, min(int(n), numba.config.NUMBA_NUM_THREADS)))
