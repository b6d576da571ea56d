"""Kernel backend selection.

The compiled extension is used when importable; set ``CCMA_PURE_PYTHON=1`` to
force the numpy fallback.  ``BACKEND`` names the active one.
"""

import os

from . import _pykernels

if os.environ.get("CCMA_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"

rotation_partials = _impl.rotation_partials
assemble = _impl.assemble
PAIRS = _pykernels.PAIRS
PAIR_INDEX = _pykernels.PAIR_INDEX
