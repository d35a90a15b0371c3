"""Pure-Python reduction kernels, used when the compiled core is unavailable.

Same loops, same order, same libm calls as ``_ckernels.pyx``.
"""

import math

import numpy as np

_NEG_INF = -math.inf


def _neumaier(values):
    s = 0.0
    c = 0.0
    for v in values:
        t = s + v
        if abs(s) >= abs(v):
            c += (s - t) + v
        else:
            c += (v - t) + s
        s = t
    return s + c


def _lse(row):
    m = max(row, default=_NEG_INF)
    if math.isinf(m):
        return m
    return m + math.log(_neumaier([math.exp(v - m) for v in row]))


def compensated_sum(x):
    return _neumaier(np.asarray(x, dtype=np.float64).tolist())


def logsumexp(x):
    return _lse(np.asarray(x, dtype=np.float64).tolist())


def logsumexp_rows(x):
    rows = np.asarray(x, dtype=np.float64).tolist()
    return np.array([_lse(r) for r in rows], dtype=np.float64)


def weighted_sum(log_w, f):
    lw = np.asarray(log_w, dtype=np.float64).tolist()
    fv = np.asarray(f, dtype=np.float64).tolist()
    if len(lw) != len(fv):
        raise ValueError("length mismatch")
    return _neumaier([math.exp(a) * b for a, b in zip(lw, fv) if a != _NEG_INF])


def masked_mass(log_w, mask):
    lw = np.asarray(log_w, dtype=np.float64).tolist()
    mk = np.asarray(mask, dtype=np.uint8).tolist()
    if len(lw) != len(mk):
        raise ValueError("length mismatch")
    return _neumaier([math.exp(a) for a, k in zip(lw, mk) if k and a != _NEG_INF])


def weighted_sum_rows(log_w, f):
    lw = np.asarray(log_w, dtype=np.float64)
    fv = np.asarray(f, dtype=np.float64)
    if lw.shape != fv.shape:
        raise ValueError("shape mismatch")
    return np.array([weighted_sum(a, b) for a, b in zip(lw, fv)], dtype=np.float64)


def suffix_mass(log_w):
    lw = np.asarray(log_w, dtype=np.float64).tolist()
    out = [0.0] * (len(lw) + 1)
    s = 0.0
    c = 0.0
    for i in range(len(lw) - 1, -1, -1):
        a = lw[i]
        if a != _NEG_INF:
            v = math.exp(a)
            t = s + v
            if abs(s) >= abs(v):
                c += (s - t) + v
            else:
                c += (v - t) + s
            s = t
        out[i] = s + c
    return np.array(out, dtype=np.float64)
