"""Backend selection for the hot kernels.

The Cython extension ``boed_lab._kernels`` is used when it was built; otherwise
the numpy implementation in ``boed_lab._kernels_py`` is used.  Setting the
environment variable ``BOED_LAB_PURE_PYTHON=1`` forces the numpy path.
"""

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("BOED_LAB_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

gram_sum = _impl.gram_sum
mmd2 = _impl.mmd2
mmd2_augmented = _impl.mmd2_augmented
nmc_terms = _impl.nmc_terms

__all__ = ["BACKEND", "gram_sum", "mmd2", "mmd2_augmented", "nmc_terms"]
