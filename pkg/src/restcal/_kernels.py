"""Hot inner loops, compiled with numba when available.

Every kernel has two implementations with identical signatures: a scalar
loop compiled by ``numba.njit`` and a pure-numpy path that vectorizes over
the independent axis (channels, rows) and loops in Python over the
sequential one.  Set ``RESTCAL_DISABLE_NUMBA=1`` before import to force the
numpy path; ``BACKEND`` reports which one is active.
"""
import os

import numpy as np


def _env_disabled():
    return os.environ.get("RESTCAL_DISABLE_NUMBA", "").strip().lower() in ("1", "true", "yes")


try:
    if _env_disabled():
        raise ImportError
    from numba import njit

    HAVE_NUMBA = True
except ImportError:
    HAVE_NUMBA = False


# --------------------------------------------------------------------------
# IIR: cascade of second-order sections, direct form II transposed
# --------------------------------------------------------------------------

def _sosfilt_loop(sos, x):
    n_sig, n = x.shape
    n_sec = sos.shape[0]
    y = np.empty_like(x)
    for c in range(n_sig):
        for t in range(n):
            y[c, t] = x[c, t]
        for s in range(n_sec):
            b0 = sos[s, 0]
            b1 = sos[s, 1]
            b2 = sos[s, 2]
            a1 = sos[s, 4]
            a2 = sos[s, 5]
            z1 = 0.0
            z2 = 0.0
            for t in range(n):
                xi = y[c, t]
                yi = b0 * xi + z1
                z1 = b1 * xi - a1 * yi + z2
                z2 = b2 * xi - a2 * yi
                y[c, t] = yi
    return y


def _sosfilt_numpy(sos, x):
    y = x.copy()
    n = x.shape[1]
    for b0, b1, b2, _, a1, a2 in sos:
        z1 = np.zeros(x.shape[0])
        z2 = np.zeros(x.shape[0])
        for t in range(n):
            xi = y[:, t]
            yi = b0 * xi + z1
            z1 = b1 * xi - a1 * yi + z2
            z2 = b2 * xi - a2 * yi
            y[:, t] = yi
    return y


# --------------------------------------------------------------------------
# AR(2) recursion driven by an innovation sequence
# --------------------------------------------------------------------------

def _ar2_loop(a1, a2, e):
    n_sig, n = e.shape
    out = np.empty_like(e)
    for c in range(n_sig):
        x1 = 0.0
        x2 = 0.0
        for t in range(n):
            v = a1 * x1 + a2 * x2 + e[c, t]
            out[c, t] = v
            x2 = x1
            x1 = v
    return out


def _ar2_numpy(a1, a2, e):
    out = np.empty_like(e)
    x1 = np.zeros(e.shape[0])
    x2 = np.zeros(e.shape[0])
    for t in range(e.shape[1]):
        v = a1 * x1 + a2 * x2 + e[:, t]
        out[:, t] = v
        x2 = x1
        x1 = v
    return out


# --------------------------------------------------------------------------
# Linear SVM dual: two-coordinate ascent on the maximal violating pair
# --------------------------------------------------------------------------
#
# Dual:  min_a  0.5 a'Qa - sum(a)   s.t.  0 <= a <= C,  y'a = 0,
# Q_ij = y_i y_j K_ij with K the Gram matrix.  G = Qa - 1 is kept up to date
# in O(n) per step from two Gram columns.  The pair is (argmax over I_up,
# argmin over I_low) of -yG and the loop stops once that maximal KKT
# violation m(a) - M(a) drops to ``tol``.  Second-order pair selection was
# tried and stalls on degenerate free sets (more free vectors than
# dimensions), common with linear kernels.

_ETA_FLOOR = 1e-12
_SNAP = 1e-12


def _snap(a, C):
    if a < _SNAP * C:
        return 0.0
    if a > C - _SNAP * C:
        return C
    return a


def _svm_smo_loop(K, y, C, tol, max_iter):
    n = K.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    it = 0
    gap = np.inf
    while True:
        i = -1
        gmax = -np.inf
        for t in range(n):
            if (y[t] > 0 and alpha[t] < C) or (y[t] < 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v > gmax:
                    gmax = v
                    i = t
        j = -1
        gmin = np.inf
        for t in range(n):
            if (y[t] < 0 and alpha[t] < C) or (y[t] > 0 and alpha[t] > 0):
                v = -y[t] * G[t]
                if v < gmin:
                    gmin = v
                    j = t
        gap = gmax - gmin
        if i < 0 or j < 0 or gap <= tol or it >= max_iter:
            break
        it += 1
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        if eta < _ETA_FLOOR:
            eta = _ETA_FLOOR
        lam = (-y[i] * G[i] + y[j] * G[j]) / eta
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        if lam > lim_i:
            lam = lim_i
        if lam > lim_j:
            lam = lim_j
        alpha[i] += y[i] * lam
        alpha[j] -= y[j] * lam
        # snap rounding drift onto the box, else a pair with a ~0 step
        # limit can be selected forever
        snap = _SNAP * C
        if alpha[i] < snap:
            alpha[i] = 0.0
        elif alpha[i] > C - snap:
            alpha[i] = C
        if alpha[j] < snap:
            alpha[j] = 0.0
        elif alpha[j] > C - snap:
            alpha[j] = C
        for t in range(n):
            G[t] += y[t] * lam * (K[t, i] - K[t, j])
    return alpha, G, it, gap


def _svm_smo_numpy(K, y, C, tol, max_iter):
    n = K.shape[0]
    alpha = np.zeros(n)
    G = -np.ones(n)
    diag = np.diag(K).copy()
    pos = y > 0
    it = 0
    gap = np.inf
    while True:
        v = -y * G
        up = (pos & (alpha < C)) | (~pos & (alpha > 0))
        low = (~pos & (alpha < C)) | (pos & (alpha > 0))
        if not up.any() or not low.any():
            break
        i = int(np.argmax(np.where(up, v, -np.inf)))
        j = int(np.argmin(np.where(low, v, np.inf)))
        gap = v[i] - v[j]
        if gap <= tol or it >= max_iter:
            break
        it += 1
        eta = max(diag[i] + diag[j] - 2.0 * K[i, j], _ETA_FLOOR)
        lam = (v[i] - v[j]) / eta
        lim_i = C - alpha[i] if y[i] > 0 else alpha[i]
        lim_j = alpha[j] if y[j] > 0 else C - alpha[j]
        lam = min(lam, lim_i, lim_j)
        alpha[i] = _snap(alpha[i] + y[i] * lam, C)
        alpha[j] = _snap(alpha[j] - y[j] * lam, C)
        G += y * lam * (K[:, i] - K[:, j])
    return alpha, G, it, gap


NUMPY_KERNELS = {
    "sosfilt": _sosfilt_numpy,
    "ar2": _ar2_numpy,
    "svm_smo": _svm_smo_numpy,
}

if HAVE_NUMBA:
    NUMBA_KERNELS = {
        "sosfilt": njit(cache=True, nogil=True)(_sosfilt_loop),
        "ar2": njit(cache=True, nogil=True)(_ar2_loop),
        "svm_smo": njit(cache=True, nogil=True)(_svm_smo_loop),
    }
    BACKEND = "numba"
    _ACTIVE = NUMBA_KERNELS
else:
    NUMBA_KERNELS = {}
    BACKEND = "numpy"
    _ACTIVE = NUMPY_KERNELS


def sosfilt(sos, x):
    """Filter each row of ``x`` (signals, samples) through the SOS cascade."""
    return _ACTIVE["sosfilt"](np.ascontiguousarray(sos, dtype=np.float64),
                              np.ascontiguousarray(x, dtype=np.float64))


def ar2(a1, a2, e):
    """Run x[t] = a1 x[t-1] + a2 x[t-2] + e[t] along each row of ``e``."""
    return _ACTIVE["ar2"](float(a1), float(a2), np.ascontiguousarray(e, dtype=np.float64))


def svm_smo(K, y, C, tol, max_iter):
    """Solve the dual for Gram matrix ``K`` and labels ``y`` in {-1, +1}.

    Returns ``(alpha, gradient, iterations, final_violation)``.
    """
    return _ACTIVE["svm_smo"](np.ascontiguousarray(K, dtype=np.float64),
                              np.ascontiguousarray(y, dtype=np.float64),
                              float(C), float(tol), int(max_iter))
