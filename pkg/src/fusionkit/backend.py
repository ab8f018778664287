"""Kernel backend selection.

Imports the compiled extension when available, otherwise falls back to the
pure NumPy implementation.  Set FUSIONKIT_PURE=1 to force the fallback
(useful for benchmarking and for testing backend parity).
"""

import os

from fusionkit import _kernels_py

if os.environ.get("FUSIONKIT_PURE"):
    _impl = _kernels_py
    COMPILED = False
else:
    try:
        from fusionkit import _kernels as _impl

        COMPILED = True
    except ImportError:
        _impl = _kernels_py
        COMPILED = False

mvn_log_density = _impl.mvn_log_density
label_components = _impl.label_components
conv2d_valid = _impl.conv2d_valid


def backend_name():
    return "compiled" if COMPILED else "pure-numpy"
