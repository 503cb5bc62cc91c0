"""Kernel dispatch: compiled extension when built, numpy fallback otherwise.

The two backends are numerically identical (same tap order); the compiled
one just fuses the 9-tap stencil into a single pass. `backend()` reports
which one is active, and `fallback` stays importable so tests and the
benchmark can compare both.
"""

from . import fallback

try:
    from . import _cykernels as _impl

    HAVE_COMPILED = True
except ImportError:
    _impl = fallback
    HAVE_COMPILED = False


def backend() -> str:
    return "cython" if HAVE_COMPILED else "numpy"


dwconv3x3_forward = _impl.dwconv3x3_forward
dwconv3x3_backward_input = _impl.dwconv3x3_backward_input
dwconv3x3_backward_weight = _impl.dwconv3x3_backward_weight
