"""Symmetric-tridiagonal machinery for reversible birth-death generators.

A connected birth-death generator ``M`` is similar to the symmetric matrix
``S = D^{-1} M D`` with ``D = diag(sqrt(p_s))``. Eigenvectors ``v_k`` of ``S``
give right modes ``D v_k`` and left modes ``D^{-1} v_k`` of ``M`` without
inverting an eigenvector matrix.

LAPACK eigenvectors are accurate only in absolute terms, which loses the
exponentially small components at the far boundary that relaxation times
depend on. For modes whose last component is tiny, the right boundary sits
in the decaying tail of the mode, so the three-term recurrence run from the
right end towards the left follows the growing solution and is stable; it
recovers those components to full relative precision.
"""

import numpy as np
from scipy.linalg import eigh_tridiagonal
from scipy.special import logsumexp

# |v_k[N-1]| below this is recomputed by backward recurrence
_TAIL_CUTOFF = 1e-7
_RESCALE = 1e150


def symmetrized(model):
    """Return ``(diag, offdiag, log_d)`` of ``S = D^{-1} M D``.

    ``log_d`` is ``log`` of the diagonal similarity, i.e. half the log of the
    unnormalized product-form steady state, with ``log_d[0] = 0``.
    """
    jl = model.hop_left
    jr = model.hop_right
    diag = -np.asarray(model.out_rate, dtype=float)
    off = np.sqrt(jl * jr)
    log_d = np.zeros(model.n_sites)
    if model.n_sites > 1:
        log_d[1:] = 0.5 * np.cumsum(np.log(jr) - np.log(jl))
    return diag, off, log_d


def backward_log_vectors(diag, off, lam):
    """Eigenvector components by recurrence from the right end.

    Returns ``(log_abs, sign)``, both of shape ``(N, K)``, for unit-norm
    vectors (in the 2-norm) belonging to the eigenvalues ``lam``.
    """
    lam = np.atleast_1d(np.asarray(lam, dtype=float))
    N = diag.shape[0]
    K = lam.shape[0]
    raw = np.empty((N, K))
    scale = np.empty((N, K))
    u_next = np.zeros(K)
    u = np.ones(K)
    log_s = np.zeros(K)
    raw[N - 1] = u
    scale[N - 1] = log_s
    for n in range(N - 1, 0, -1):
        coupling = off[n] * u_next if n < N - 1 else 0.0
        u_prev = ((lam - diag[n]) * u - coupling) / off[n - 1]
        u_next, u = u, u_prev
        big = np.abs(u) > _RESCALE
        if np.any(big):
            s = np.abs(u[big])
            u[big] /= s
            u_next[big] /= s
            log_s[big] += np.log(s)
        raw[n - 1] = u
        scale[n - 1] = log_s
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(raw)) + scale
    log_norm = 0.5 * logsumexp(2.0 * log_abs, axis=0)
    return log_abs - log_norm, np.sign(raw)


def accurate_eigh(diag, off):
    """Eigenpairs of the symmetric tridiagonal matrix, descending.

    Returns ``(w, V, log_last)`` where ``V[:, k]`` is the unit eigenvector of
    ``w[k]`` and ``log_last[k] = log|V[N-1, k]|`` kept in log form so that
    components below the double-precision range are not lost.
    """
    N = diag.shape[0]
    if N == 1:
        return diag.copy(), np.ones((1, 1)), np.zeros(1)
    w, V = eigh_tridiagonal(diag, off)
    order = np.argsort(-w, kind="stable")
    w = w[order]
    V = V[:, order]
    with np.errstate(divide="ignore"):
        log_last = np.log(np.abs(V[-1]))
    tail = np.abs(V[-1]) < _TAIL_CUTOFF
    if np.any(tail):
        log_abs, sign = backward_log_vectors(diag, off, w[tail])
        cols = np.flatnonzero(tail)
        anchor = np.argmax(np.abs(V[:, cols]), axis=0)
        for j, k in enumerate(cols):
            vec = sign[:, j] * np.exp(log_abs[:, j])
            a = anchor[j]
            if vec[a] * V[a, k] < 0:
                vec = -vec
            V[:, k] = vec
            log_last[k] = log_abs[-1, j]
    return w, V, log_last
