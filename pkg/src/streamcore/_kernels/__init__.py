"""Kernel backend selection.

The compiled extension is preferred when importable; the pure-Python twin is
the fallback. Both produce bit-identical results. Set ``STREAMCORE_PURE=1``
to force the fallback (useful for benchmarking and parity checks).
"""

import os

if os.environ.get("STREAMCORE_PURE"):
    from . import pyfallback as backend
else:
    try:
        from . import _speedups as backend  # type: ignore[no-redef]
    except ImportError:
        from . import pyfallback as backend

BACKEND_NAME = backend.NAME

RELU = backend.RELU
SIGMOID = backend.SIGMOID
IDENTITY = backend.IDENTITY
SOFTMAX = backend.SOFTMAX


def available_backends():
    """Importable backends keyed by name (for parity tests and benchmarks)."""
    from . import pyfallback

    found = {pyfallback.NAME: pyfallback}
    try:
        from . import _speedups

        found[_speedups.NAME] = _speedups
    except ImportError:
        pass
    return found
