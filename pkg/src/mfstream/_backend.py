"""Select the kernel implementation at import time.

The compiled extension is preferred. Setting ``MFSTREAM_PURE_PYTHON=1`` forces
the numpy fallback, which is also used whenever the extension was not built.
"""

import os

from . import _pykernels

BACKEND = "python"
kernels = _pykernels

if os.environ.get("MFSTREAM_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:
        pass
    else:
        kernels = _compiled
        BACKEND = "cython"

segment_variances = kernels.segment_variances
ar1_filter = kernels.ar1_filter
log_mean_power = kernels.log_mean_power
