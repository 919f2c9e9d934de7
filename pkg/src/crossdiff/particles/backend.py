"""Stepping-kernel selection.

The compiled Cython kernel is used when the extension is importable; the
numpy kernel is the fallback.  Both consume identical pre-drawn random
arrays and perform identical floating-point operations, so switching
backends does not change trajectories (see the parity tests and
``crossdiff.benchmark`` for a speed comparison).
"""
from . import _step_py

try:
    from . import _step_cy
    _DEFAULT = _step_cy
except ImportError:
    _step_cy = None
    _DEFAULT = _step_py

BACKEND = _DEFAULT.BACKEND
step_positions = _DEFAULT.step_positions


def available_backends() -> dict:
    out = {"numpy": _step_py}
    if _step_cy is not None:
        out["cython"] = _step_cy
    return out


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (default: best available)."""
    if name is None:
        return _DEFAULT
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"backend {name!r} not available") from None
