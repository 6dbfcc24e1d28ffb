"""Kernel backend selection.

The compiled Cython extension is used when it was built; otherwise, or when
``DIFFWAVES_PURE_PYTHON=1`` is set, the numpy implementations are used.
"""

import os

BACKEND = "python"
if os.environ.get("DIFFWAVES_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import (  # noqa: F401
            add_laplacian,
            central_diff,
            conservative_rhs,
            theta_profile,
            tridiag_factor,
            tridiag_solve_factored,
            viscous_apply,
            viscous_faces,
        )

        BACKEND = "cython"
    except ImportError:
        pass

if BACKEND == "python":
    from ._kernels_py import (  # noqa: F401
        add_laplacian,
        central_diff,
        conservative_rhs,
        theta_profile,
        tridiag_factor,
        tridiag_solve_factored,
        viscous_apply,
        viscous_faces,
    )


def load(backend: str):
    """Return the kernel module for ``"cython"`` or ``"python"`` explicitly."""
    if backend == "cython":
        from . import _kernels as mod
    elif backend == "python":
        from . import _kernels_py as mod
    else:
        raise ValueError(f"unknown backend {backend!r}")
    return mod
