"""Conv/pool kernel dispatch.

The compiled Cython core is used when it imported cleanly; otherwise the
NumPy fallback takes over. ``REXNET_KERNELS=fallback`` forces the fallback
(useful for the benchmark and for debugging).
"""

import os

from . import fallback as _fallback

_impl = _fallback
if os.environ.get("REXNET_KERNELS", "").lower() != "fallback":
    try:
        from . import _convcore as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _fallback

BACKEND = _impl.BACKEND

conv2d_forward = _impl.conv2d_forward
conv2d_backward_weights = _impl.conv2d_backward_weights
conv2d_backward_input = _impl.conv2d_backward_input
maxpool2_forward = _impl.maxpool2_forward
maxpool2_backward = _impl.maxpool2_backward
