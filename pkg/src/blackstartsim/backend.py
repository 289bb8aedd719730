"""Kernel backend selection: numba-jitted or pure-numpy stepping.

The hot per-step math lives in ``_kernels``. When numba is importable and the
environment variable ``BLACKSTARTSIM_BACKEND`` is not set to ``numpy``, the
scalar controller functions are compiled with ``@njit(cache=True)`` and the
compiled segment driver is available. Setting ``BLACKSTARTSIM_BACKEND=numpy``
before import gives a fully numba-free process running the vectorized numpy
driver (slower, identical results).
"""

import os

_ENV_VAR = "BLACKSTARTSIM_BACKEND"
_env_choice = os.environ.get(_ENV_VAR, "").strip().lower()

try:
    import numba

    NUMBA_AVAILABLE = True
except ImportError:  # pragma: no cover - exercised via BLACKSTARTSIM_BACKEND=numpy
    numba = None
    NUMBA_AVAILABLE = False

JIT_ENABLED = NUMBA_AVAILABLE and _env_choice != "numpy"


def maybe_njit(func):
    """Compile with numba when the jit backend is active, else return as-is."""
    if JIT_ENABLED:
        return numba.njit(cache=True)(func)
    return func


def default_backend() -> str:
    """Backend used when a run does not name one explicitly."""
    if _env_choice in ("numba", "numpy"):
        return _env_choice
    return "numba" if JIT_ENABLED else "numpy"


def resolve_backend(backend=None) -> str:
    """Validate a requested backend name against what this process can run."""
    choice = backend or default_backend()
    if choice not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {choice!r}, expected 'numba' or 'numpy'")
    if choice == "numba" and not JIT_ENABLED:
        raise ValueError(
            "numba backend requested but not available "
            f"(numba importable: {NUMBA_AVAILABLE}, {_ENV_VAR}={_env_choice or 'unset'})"
        )
    return choice
