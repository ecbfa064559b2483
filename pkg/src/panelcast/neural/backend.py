"""Kernel backend selection: compiled extension when available, numpy otherwise.

The default ("auto") prefers the compiled kernels. Set PANELCAST_KERNELS to
"python" or "compiled" to pin a backend; tests and the kernel benchmark use
use_backend() to switch at runtime. Both backends implement identical
signatures and are kept numerically interchangeable (parity-tested), though
results are only bitwise-reproducible *within* one backend.
"""

from __future__ import annotations

import contextlib
import os

from . import _kernels_np

_BACKENDS = {"python": _kernels_np}

try:
    from . import _kernels_cy  # compiled extension, optional

    _BACKENDS["compiled"] = _kernels_cy
except ImportError:
    _kernels_cy = None


def _initial() -> str:
    want = os.environ.get("PANELCAST_KERNELS", "auto").lower()
    if want == "auto":
        return "compiled" if "compiled" in _BACKENDS else "python"
    if want not in _BACKENDS:
        raise RuntimeError(
            f"PANELCAST_KERNELS={want!r} but that backend is unavailable "
            f"(have: {sorted(_BACKENDS)})"
        )
    return want


_active = _initial()


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def backend_name() -> str:
    return _active


def get_kernels():
    return _BACKENDS[_active]


def set_backend(name: str) -> None:
    if name not in _BACKENDS:
        raise RuntimeError(f"backend {name!r} unavailable (have: {sorted(_BACKENDS)})")
    global _active
    _active = name


@contextlib.contextmanager
def use_backend(name: str):
    prev = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(prev)
