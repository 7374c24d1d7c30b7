"""Step-kernel selection: compiled extension when available, else Python.

OPENTI_PURE_PYTHON=1 forces the fallback regardless of what is installed.
"""

import os

if os.environ.get("OPENTI_PURE_PYTHON") == "1":
    from .pykernel import StepKernel

    KERNEL_IMPL = "python"
else:
    try:
        from ._stepcore import StepKernel  # type: ignore[no-redef]

        KERNEL_IMPL = "cython"
    except ImportError:
        from .pykernel import StepKernel  # type: ignore[no-redef]

        KERNEL_IMPL = "python"

__all__ = ["StepKernel", "KERNEL_IMPL"]
