"""Hot loops: truncated theta sums.

Each kernel sums exp(0.5 N^T Pi N + N^T z) over N = c0 + S for a batch of
arguments, rescaled by the largest real part of the exponent so that large
arguments never overflow.  Returns the log-scale and the moment sums

    s0 = sum w,   s1 = sum N w,   s2 = sum N N^T w

from which theta, its gradient and Hessian follow.  ``theta_sums`` picks the
numba kernel unless PRYMLAB_DISABLE_NUMBA is set.
"""
import numpy as np

from ._accel import USE_NUMBA, njit


@njit
def _theta_sums_numba(Pi, S, Z, C0, order):
    p, h = Z.shape
    m = S.shape[0]
    logmax = np.empty(p)
    s0 = np.zeros(p, dtype=np.complex128)
    s1 = np.zeros((p, h), dtype=np.complex128)
    s2 = np.zeros((p, h, h), dtype=np.complex128)
    expo = np.empty(m, dtype=np.complex128)
    N = np.empty(h)
    for q in range(p):
        best = -np.inf
        for t in range(m):
            for a in range(h):
                N[a] = S[t, a] + C0[q, a]
            e = 0j
            for a in range(h):
                acc = 0j
                for b in range(h):
                    acc += Pi[a, b] * N[b]
                e += N[a] * (0.5 * acc + Z[q, a])
            expo[t] = e
            if e.real > best:
                best = e.real
        logmax[q] = best
        for t in range(m):
            w = np.exp(expo[t] - best)
            s0[q] += w
            if order >= 1:
                for a in range(h):
                    na = S[t, a] + C0[q, a]
                    s1[q, a] += na * w
                    if order >= 2:
                        for b in range(h):
                            s2[q, a, b] += na * (S[t, b] + C0[q, b]) * w
    return logmax, s0, s1, s2


def _theta_sums_numpy(Pi, S, Z, C0, order):
    p, h = Z.shape
    N = C0[:, None, :] + S[None, :, :]  # p x m x h
    expo = 0.5 * np.einsum("pma,ab,pmb->pm", N, Pi, N) + np.einsum("pma,pa->pm", N, Z)
    logmax = expo.real.max(axis=1)
    w = np.exp(expo - logmax[:, None])
    s0 = w.sum(axis=1)
    s1 = np.zeros((p, h), dtype=complex)
    s2 = np.zeros((p, h, h), dtype=complex)
    if order >= 1:
        s1 = np.einsum("pma,pm->pa", N, w)
    if order >= 2:
        s2 = np.einsum("pma,pmb,pm->pab", N, N, w)
    return logmax, s0, s1, s2


def theta_sums(Pi, S, Z, C0, order=0, use_numba=None):
    use_numba = USE_NUMBA if use_numba is None else use_numba
    Pi = np.ascontiguousarray(Pi, dtype=np.complex128)
    S = np.ascontiguousarray(S, dtype=np.float64)
    Z = np.ascontiguousarray(Z, dtype=np.complex128)
    C0 = np.ascontiguousarray(C0, dtype=np.float64)
    if use_numba:
        return _theta_sums_numba(Pi, S, Z, C0, order)
    return _theta_sums_numpy(Pi, S, Z, C0, order)
