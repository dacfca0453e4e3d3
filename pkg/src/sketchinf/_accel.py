"""Backend selection for the hot kernels.

Numba is used when importable unless ``SKETCHINF_DISABLE_NUMBA`` is set to a
truthy value, in which case the pure-numpy paths in :mod:`sketchinf.kernels`
are used. The choice can also be flipped at runtime with :func:`set_backend`
(the benchmark does this to time both paths in one process).
"""

from __future__ import annotations

import os

try:
    from numba import njit

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    NUMBA_AVAILABLE = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def decorator(func):
            return func

        return decorator


def _env_disabled() -> bool:
    return os.environ.get("SKETCHINF_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


_backend = "numba" if NUMBA_AVAILABLE and not _env_disabled() else "numpy"


def get_backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not NUMBA_AVAILABLE:
        raise RuntimeError("numba is not installed")
    _backend = name


# fastmath stays off: results must not depend on reassociation.
JIT_OPTS = dict(cache=True, nogil=True, fastmath=False)
