"""Select the kernel implementation at import time.

The compiled extension is preferred. Setting ``A2DR_PURE_PYTHON=1`` forces
the numpy fallback, which is also used when the extension was not built.
"""
import os

from . import _pykernels

kernels = _pykernels
if os.environ.get("A2DR_PURE_PYTHON", "").strip() not in ("1", "true", "yes"):
    try:
        from . import _ckernels as kernels  # type: ignore[no-redef]
    except ImportError:  # pragma: no cover - depends on build environment
        kernels = _pykernels

BACKEND = kernels.NAME
