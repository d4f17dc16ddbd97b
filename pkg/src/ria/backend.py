"""Kernel selection: compiled Jacobi extension when built, numpy fallback otherwise.

Set RIA_PURE_PYTHON=1 to force the fallback (used by the benchmark and
for debugging the compiled kernel).
"""

import os

if os.environ.get("RIA_PURE_PYTHON") == "1":
    HAVE_COMPILED = False
    from ria._jacobi_py import jacobi_eigh
else:
    try:
        from ria._jacobi import jacobi_eigh

        HAVE_COMPILED = True
    except ImportError:
        HAVE_COMPILED = False
        from ria._jacobi_py import jacobi_eigh

__all__ = ["jacobi_eigh", "HAVE_COMPILED"]
