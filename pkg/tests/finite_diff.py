"""Independent numerical-gradient oracle used by the gradient tests.

Central differences with step h; kept deliberately naive (elementwise
loops, no reuse of any package internals) so it stays an independent
check on the hand-written backward passes.
"""

import numpy as np

H = 1e-4


def numerical_gradient(f, x, h=H):
    """Central-difference gradient of scalar f at x, elementwise."""
    x = np.asarray(x, dtype=np.float64)
    grad = np.zeros_like(x)
    it = np.nditer(x, flags=["multi_index"])
    while not it.finished:
        idx = it.multi_index
        xp = x.copy()
        xp[idx] += h
        xm = x.copy()
        xm[idx] -= h
        grad[idx] = (f(xp) - f(xm)) / (2.0 * h)
        it.iternext()
    return grad


def rel_error(analytic, numeric):
    """Max absolute difference, normalized by the numeric gradient's scale."""
    analytic = np.asarray(analytic)
    numeric = np.asarray(numeric)
    scale = max(np.max(np.abs(numeric)), np.max(np.abs(analytic)), 1e-12)
    return float(np.max(np.abs(analytic - numeric)) / scale)
