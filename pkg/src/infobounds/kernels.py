"""Backend selection for the reduction kernels.

The compiled Cython core is used when it imports; otherwise the pure-Python
fallback is used. Set ``INFOBOUNDS_PURE_PYTHON=1`` to force the fallback.
Both backends return bit-identical results.
"""

import os

import numpy as np

from . import _pykernels

if os.environ.get("INFOBOUNDS_PURE_PYTHON"):
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _pykernels
        BACKEND = "python"


def _vec(x):
    return np.ascontiguousarray(x, dtype=np.float64).ravel()


def compensated_sum(x) -> float:
    """Neumaier-compensated sum in index order."""
    return float(_impl.compensated_sum(_vec(x)))


def logsumexp(x) -> float:
    """Max-shifted log-sum-exp; ``-inf`` for empty or all ``-inf`` input."""
    return float(_impl.logsumexp(_vec(x)))


def logsumexp_rows(x) -> np.ndarray:
    """Row-wise :func:`logsumexp` of a 2-D array."""
    arr = np.ascontiguousarray(x, dtype=np.float64)
    if arr.ndim != 2:
        raise ValueError("expected a 2-D array")
    return np.asarray(_impl.logsumexp_rows(arr))


def weighted_sum(log_w, f) -> float:
    """Sum of ``exp(log_w[i]) * f[i]`` over entries with finite ``log_w``."""
    return float(_impl.weighted_sum(_vec(log_w), _vec(f)))


def masked_mass(log_w, mask) -> float:
    """Sum of ``exp(log_w[i])`` over entries where ``mask`` is true."""
    m = np.ascontiguousarray(mask, dtype=np.uint8).ravel()
    return float(_impl.masked_mass(_vec(log_w), m))


def weighted_sum_rows(log_w, f) -> np.ndarray:
    """Row-wise :func:`weighted_sum` of two equally shaped 2-D arrays."""
    a = np.ascontiguousarray(log_w, dtype=np.float64)
    b = np.ascontiguousarray(f, dtype=np.float64)
    if a.ndim != 2 or a.shape != b.shape:
        raise ValueError("expected two 2-D arrays of equal shape")
    return np.asarray(_impl.weighted_sum_rows(a, b))


def suffix_mass(log_w) -> np.ndarray:
    """``out[i]`` is the mass of entries ``i..end``, accumulated from the end; ``out[-1] = 0``."""
    return np.asarray(_impl.suffix_mass(_vec(log_w)))
