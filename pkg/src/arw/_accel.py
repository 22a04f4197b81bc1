"""Backend switch for the hot loops.

Set ``ARW_DISABLE_NUMBA=1`` to force the pure-numpy code paths. The choice is
read once at import; ``use_backend`` overrides it temporarily (tests, benchmarks).
"""

from __future__ import annotations

import os
from contextlib import contextmanager

try:
    import numba  # noqa: F401

    HAS_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAS_NUMBA = False

_FALSE = {"", "0", "false", "no", "off"}

_backend = "numba" if HAS_NUMBA and os.environ.get("ARW_DISABLE_NUMBA", "").lower() in _FALSE else "numpy"


def backend() -> str:
    return _backend


def set_backend(name: str) -> None:
    global _backend
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAS_NUMBA:
        raise RuntimeError("numba is not installed")
    _backend = name


@contextmanager
def use_backend(name: str):
    previous = _backend
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
