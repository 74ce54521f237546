"""Backend selection for the Monte-Carlo moment kernels.

The compiled extension is used when importable; setting ``CFXL_PURE_PYTHON=1``
forces the numpy fallback. Both expose ``mr_moment_sums`` and
``fourth_moment_sum`` with identical signatures.
"""
import os

import numpy as np

from . import _kernels_py

try:
    from . import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("CFXL_PURE_PYTHON"):
    _impl, BACKEND = _compiled, "cython"
else:
    _impl, BACKEND = _kernels_py, "python"


def available_backends():
    return ["python"] + (["cython"] if _compiled is not None else [])


def get_backend(name=None):
    if name is None:
        return _impl
    if name == "python":
        return _kernels_py
    if name == "cython":
        if _compiled is None:
            raise ImportError("compiled kernels are not built")
        return _compiled
    raise ValueError(f"unknown backend {name!r}")


def mr_moment_sums(H, D, pbar, backend=None):
    impl = get_backend(backend)
    return impl.mr_moment_sums(np.ascontiguousarray(H, dtype=np.complex128),
                               np.ascontiguousarray(D, dtype=np.uint8),
                               np.ascontiguousarray(pbar, dtype=np.complex128))


def fourth_moment_sum(A, B, C, E, P, backend=None):
    impl = get_backend(backend)
    args = [np.ascontiguousarray(x, dtype=np.complex128) for x in (A, B, C, E, P)]
    return impl.fourth_moment_sum(*args)
