"""Kernel backend selection.

The hot inner loops (dense-layer forward/backward) exist twice: a Cython
extension (``suntrack._kernels``) and a pure-numpy fallback
(``suntrack._kernels_py``). The compiled one is preferred when it imported
successfully; set ``SUNTRACK_BACKEND=python`` to force the fallback, or
``SUNTRACK_BACKEND=compiled`` to fail loudly when the extension is missing.

``benchmarks/bench_kernels.py`` compares the two.
"""

import os

from . import _kernels_py

_requested = os.environ.get("SUNTRACK_BACKEND", "").strip().lower()

if _requested == "python":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _requested == "compiled":
            raise
        _impl = _kernels_py
        BACKEND = "python"

forward_chain = _impl.forward_chain
backward_chain = _impl.backward_chain
