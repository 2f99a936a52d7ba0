"""Liouvillian superoperator, spectrum, gap and steady state.

Vectorization convention (used everywhere in the package): column stacking,
``vec(X) = X.reshape(-1, order="F")``, so that
``vec(A X B) = (B^T kron A) vec(X)``.

Two routes to the spectrum exist. The dense route builds the full
``N^2 x N^2`` matrix and diagonalizes it; it serves as the oracle and for
figure-sized runs. The sector route uses the exact block structure of this
model: the diagonal of ``rho`` evolves under the ``N x N`` birth-death
generator ``M`` and every coherence ``rho_mn`` decays on its own with
``-i(E_m - E_n) - (Gamma_m + Gamma_n)/2``.
"""

import csv
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import logsumexp

from . import _tridiag
from .errors import (
    DisconnectedChainError,
    GapUndefinedError,
    SizeCapError,
    SkinRelaxError,
    SpectrumError,
)

DEFAULT_MAX_SITES = 30
ZERO_TOL = 1e-10

POPULATION = "population"
COHERENCE = "coherence"


def vec(X):
    """Column-stacking vectorization."""
    return np.asarray(X).reshape(-1, order="F")


def unvec(v, n=None):
    """Inverse of :func:`vec`."""
    v = np.asarray(v)
    if n is None:
        n = int(round(np.sqrt(v.shape[0])))
    return v.reshape(n, n, order="F")


def trace_norm(X):
    """Sum of singular values, ``Tr sqrt(X^dagger X)``."""
    X = np.asarray(X)
    if X.size == 0:
        return 0.0
    return float(np.linalg.svd(X, compute_uv=False).sum())


@dataclass(frozen=True, eq=False)
class Superoperator:
    """Dense Liouvillian acting on column-stacked density matrices."""

    matrix: np.ndarray
    n_sites: int

    @property
    def dim(self):
        return self.matrix.shape[0]

    def apply(self, rho):
        return unvec(self.matrix @ vec(rho), self.n_sites)

    def trace_defect(self):
        """``max |vec(I)^dagger L|`` relative to ``max |L|``."""
        ident = vec(np.eye(self.n_sites))
        row = ident.conj() @ self.matrix
        scale = np.max(np.abs(self.matrix), initial=0.0)
        return float(np.max(np.abs(row), initial=0.0) / scale) if scale else 0.0


def build_full_superoperator(model, max_sites=DEFAULT_MAX_SITES):
    """Assemble the dense Liouvillian ``-i[H, .] + sum_j D[A_j]``."""
    N = model.n_sites
    if N > max_sites:
        raise SizeCapError(
            f"dense superoperator for N={N} exceeds the cap of {max_sites} "
            f"sites ({N * N}x{N * N}); use method='sector', which is exact "
            f"for this model and needs only N x N work"
        )
    ident = np.eye(N)
    H = np.diag(model.energies).astype(complex)
    L = -1j * (np.kron(ident, H) - np.kron(H.T, ident))
    for target, source, rate in model.jumps():
        A = np.zeros((N, N))
        A[target, source] = np.sqrt(rate)
        AdA = A.T @ A
        L += np.kron(A.conj(), A) - 0.5 * np.kron(ident, AdA) \
            - 0.5 * np.kron(AdA.T, ident)
    return Superoperator(L, N)


def build_population_generator(model):
    """Rate matrix ``M`` with ``dp/dt = M p`` for the diagonal of rho.

    ``dp_n/dt = J_{n+1,L} p_{n+1} + J_{n,R} p_{n-1} - Gamma_n p_n``.
    """
    N = model.n_sites
    M = np.diag(-np.asarray(model.out_rate, dtype=float))
    if N > 1:
        idx = np.arange(N - 1)
        M[idx, idx + 1] = model.hop_left
        M[idx + 1, idx] = model.hop_right
    return M


def coherence_eigenvalue(model, m, n):
    """Closed-form eigenvalue of the 1x1 block of coherence ``|m><n|``."""
    N = model.n_sites
    if not (0 <= m < N and 0 <= n < N):
        raise IndexError(f"sites ({m}, {n}) outside 0..{N - 1}")
    if m == n:
        raise ValueError("m == n is a population, not a coherence")
    E = model.energies
    G = model.out_rate
    return complex(-0.5 * (G[m] + G[n]), -(E[m] - E[n]))


def coherence_eigenvalues(model):
    """All coherence eigenvalues as an ``N x N`` array (diagonal is NaN)."""
    E = model.energies
    G = model.out_rate
    lam = -0.5 * (G[:, None] + G[None, :]) - 1j * (E[:, None] - E[None, :])
    np.fill_diagonal(lam, np.nan)
    return lam


# population sector ---------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PopulationEigensystem:
    """Eigenpairs of the birth-death generator ``M``, descending.

    ``right[:, k]`` and ``left[:, k]`` are trace-norm normalized
    (``sum |x| = 1``); ``right[:, 0]`` is the steady state.
    ``log_boundary_weight[k]`` is ``log`` of the ``(N-1, N-1)`` element of
    the spectral projector of mode ``k``, i.e. the weight of ``e^{w_k t}``
    in the return probability of the right boundary site. It is kept in log
    form because it can underflow for long chains.
    ``boundary_weight_sign`` is ``+1`` for reversible chains and may be
    negative otherwise.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    log_boundary_weight: np.ndarray
    boundary_weight_sign: np.ndarray
    reversible: bool


def _normalize_columns(X):
    s = np.sum(np.abs(X), axis=0)
    s[s == 0] = 1.0
    return X / s


def _scaled_modes(V, log_scale):
    """``diag(exp(log_scale)) @ V`` with each column trace-norm normalized."""
    with np.errstate(divide="ignore"):
        log_abs = np.log(np.abs(V)) + log_scale[:, None]
    log_norm = logsumexp(log_abs, axis=0)
    return np.sign(V) * np.exp(log_abs - log_norm)


def population_eigensystem(model):
    """Diagonalize the population block.

    Reversible chains (every bond hops both ways) go through the
    symmetrized tridiagonal problem; left modes come from the same
    orthonormal eigenvectors scaled the other way, never from inverting the
    right-eigenvector matrix. Other chains use LAPACK's paired left/right
    eigenvectors.
    """
    N = model.n_sites
    if N == 1:
        one = np.ones((1, 1))
        return PopulationEigensystem(np.zeros(1), one, one.copy(), np.zeros(1),
                                     np.ones(1), True)
    if model.is_reversible():
        diag, off, log_d = _tridiag.symmetrized(model)
        w, V, log_last = _tridiag.accurate_eigh(diag, off)
        right = _scaled_modes(V, log_d)
        left = _scaled_modes(V, -log_d)
        _fix_stationary(right, left)
        return PopulationEigensystem(w, right, left, 2.0 * log_last,
                                     np.ones(N), True)

    M = build_population_generator(model)
    w, vl, vr = sla.eig(M, left=True, right=True)
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vl))
            and np.all(np.isfinite(vr))):
        raise SpectrumError("population eigensolver returned non-finite values")
    scale = model.rate_scale
    if np.max(np.abs(w.imag), initial=0.0) > 1e-8 * scale:
        raise SpectrumError("birth-death generator produced complex eigenvalues")
    w = w.real
    vr = vr.real
    vl = vl.real
    order = np.argsort(-w, kind="stable")
    w, vr, vl = w[order], vr[:, order], vl[:, order]
    right = _normalize_columns(vr)
    left = _normalize_columns(vl)
    _fix_stationary(right, left)
    overlap = np.sum(left * right, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        weight = right[-1] * left[-1] / overlap
        log_w = np.log(np.abs(weight))
    return PopulationEigensystem(w, right, left, log_w, np.sign(weight), False)


def _fix_stationary(right, left):
    """Orient modes: stationary mode nonnegative, ``<l_k, r_k> >= 0``."""
    if right[:, 0].sum() < 0:
        right[:, 0] *= -1
    flip = np.sum(left * right, axis=0) < 0
    left[:, flip] *= -1


# full spectrum -------------------------------------------------------------


class Spectrum:
    """Labelled Liouvillian eigenvalues with lazily materialized modes.

    Entries are sorted by descending real part, ties broken by ascending
    imaginary part. ``sector[k]`` is ``"population"`` or ``"coherence"``;
    for coherences ``(m[k], n[k])`` names the matrix element, for
    populations both are ``-1``.
    """

    def __init__(self, eigenvalues, sector, m, n, n_sites, method,
                 right_fn, left_fn, scale, pop_index=None, population=None):
        self.eigenvalues = eigenvalues
        self.sector = sector
        self.m = m
        self.n = n
        self.n_sites = n_sites
        self.method = method
        self.scale = scale
        # sector route only: column of ``population`` behind each entry
        self.pop_index = pop_index
        self.population = population
        self._right_fn = right_fn
        self._left_fn = left_fn

    def __len__(self):
        return self.eigenvalues.shape[0]

    def right_mode(self, k):
        return self._right_fn(k)

    def left_mode(self, k):
        return self._left_fn(k)

    def zero_threshold(self):
        peak = np.max(np.abs(self.eigenvalues), initial=0.0)
        return ZERO_TOL * (peak if peak > 0 else 1.0)

    def n_zero(self):
        return int(np.sum(np.abs(self.eigenvalues) <= self.zero_threshold()))

    def is_population(self):
        return self.sector == POPULATION

    def to_csv(self, path):
        """Write ``k, re, im, sector, m, n`` rows."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["k", "re", "im", "sector", "m", "n"])
            for k, lam in enumerate(self.eigenvalues):
                writer.writerow([k, repr(float(lam.real)), repr(float(lam.imag)),
                                 self.sector[k], int(self.m[k]), int(self.n[k])])


def sort_order(eigenvalues, scale=None):
    """Indices sorting by descending real part, then ascending imaginary part.

    Real parts are compared after rounding to ``1e-12`` of ``scale`` so that
    numerically tied values order deterministically by their imaginary part.
    """
    lam = np.asarray(eigenvalues, dtype=complex)
    if scale is None:
        scale = np.max(np.abs(lam), initial=0.0) or 1.0
    q = 1e-12 * scale
    re_key = np.round(lam.real / q)
    im_key = np.round(lam.imag / q)
    return np.lexsort((im_key, -re_key))


def full_spectrum(model, method="sector", max_sites=DEFAULT_MAX_SITES):
    """All ``N^2`` eigenvalues with right/left modes.

    ``method="dense"`` diagonalizes the full superoperator (oracle route,
    subject to ``max_sites``); ``method="sector"`` uses the exact
    population/coherence decomposition.
    """
    if method == "dense":
        return _dense_spectrum(model, max_sites)
    if method == "sector":
        return _sector_spectrum(model)
    raise ValueError(f"unknown method {method!r}; expected 'dense' or 'sector'")


def _sector_spectrum(model):
    N = model.n_sites
    pop = population_eigensystem(model)
    coh = coherence_eigenvalues(model)
    mm, nn = np.nonzero(~np.eye(N, dtype=bool))
    lam = np.concatenate([pop.eigenvalues.astype(complex), coh[mm, nn]])
    sector = np.array([POPULATION] * N + [COHERENCE] * len(mm), dtype=object)
    m_lab = np.concatenate([np.full(N, -1), mm])
    n_lab = np.concatenate([np.full(N, -1), nn])
    pop_idx = np.concatenate([np.arange(N), np.full(len(mm), -1)])
    scale = model.rate_scale
    order = sort_order(lam, scale)
    lam, sector, m_lab, n_lab, pop_idx = (
        lam[order], sector[order], m_lab[order], n_lab[order], pop_idx[order])

    def mode(columns):
        def get(k):
            X = np.zeros((N, N), dtype=complex)
            if pop_idx[k] >= 0:
                X[np.diag_indices(N)] = columns[:, pop_idx[k]]
            else:
                X[m_lab[k], n_lab[k]] = 1.0
            return X
        return get

    return Spectrum(lam, sector, m_lab, n_lab, N, "sector",
                    mode(pop.right), mode(pop.left), scale,
                    pop_index=pop_idx, population=pop)


def _dense_spectrum(model, max_sites):
    N = model.n_sites
    L = build_full_superoperator(model, max_sites=max_sites).matrix
    try:
        w, vl, vr = sla.eig(L, left=True, right=True)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise SpectrumError(f"dense eigendecomposition failed: {exc}") from exc
    if not (np.all(np.isfinite(w)) and np.all(np.isfinite(vr))
            and np.all(np.isfinite(vl))):
        raise SpectrumError("dense eigendecomposition returned non-finite values")
    scale = model.rate_scale
    order = sort_order(w, scale)
    w, vl, vr = w[order], vl[:, order], vr[:, order]

    rights, lefts = [], []
    sector = np.empty(N * N, dtype=object)
    m_lab = np.full(N * N, -1)
    n_lab = np.full(N * N, -1)
    off = ~np.eye(N, dtype=bool)
    for k in range(N * N):
        R = unvec(vr[:, k], N)
        Lk = unvec(vl[:, k], N)
        R = R / trace_norm(R)
        Lk = Lk / trace_norm(Lk)
        # phase: largest entry of R real positive, then Tr[L^dag R] real >= 0
        a = np.unravel_index(np.argmax(np.abs(R)), R.shape)
        R = R * (abs(R[a]) / R[a])
        ov = np.vdot(Lk, R)
        if abs(ov) > 0:
            Lk = Lk * (ov / abs(ov))
        rights.append(R)
        lefts.append(Lk)
        off_mass = np.abs(R[off])
        if off_mass.size == 0 or off_mass.max() <= 1e-8 * np.abs(R).max():
            sector[k] = POPULATION
        else:
            sector[k] = COHERENCE
            i = np.argmax(np.where(off, np.abs(R), -1.0))
            m_lab[k], n_lab[k] = np.unravel_index(i, R.shape)
    spec = Spectrum(w, sector, m_lab, n_lab, N, "dense",
                    rights.__getitem__, lefts.__getitem__, scale)
    spec.right_matrix = np.stack([vec(R) for R in rights], axis=1)
    spec.left_matrix = np.stack([vec(X) for X in lefts], axis=1)
    return spec


# gap and steady state ------------------------------------------------------


def liouvillian_gap(spectrum):
    """``|Re lambda_1|`` for the nonzero eigenvalue with largest real part.

    Zero eigenvalues are those with ``|lambda| <= 1e-10 max|lambda|``.
    """
    lam = np.asarray(spectrum.eigenvalues)
    if lam.size == 0:
        raise GapUndefinedError("empty spectrum")
    nonzero = lam[np.abs(lam) > spectrum.zero_threshold()]
    if nonzero.size == 0:
        raise GapUndefinedError(
            "every eigenvalue is zero (single site or no jumps); "
            "the Liouvillian gap is undefined"
        )
    return float(abs(nonzero.real.max()))


def sector_gaps(model, population=None):
    """Slowest nonzero decay rates ``(population, coherence)`` from a model.

    Avoids materializing the ``N^2`` coherence eigenvalues: the slowest
    coherence decays at half the sum of the two smallest escape rates.
    Either entry is ``inf`` if that sector has no nonzero eigenvalue.
    """
    N = model.n_sites
    if N == 1:
        return np.inf, np.inf
    if population is None:
        population = population_eigensystem(model)
    w = population.eigenvalues
    scale = max(np.max(np.abs(w)), model.rate_scale)
    nz = w[np.abs(w) > ZERO_TOL * scale]
    pop_gap = float(abs(nz.max())) if nz.size else np.inf
    G = np.sort(model.out_rate)
    coh = 0.5 * (G[0] + G[1])
    coh_gap = float(coh) if coh > ZERO_TOL * scale else np.inf
    return pop_gap, coh_gap


def model_gap(model):
    """Liouvillian gap computed through :func:`sector_gaps`."""
    gap = min(sector_gaps(model))
    if not np.isfinite(gap):
        raise GapUndefinedError("no nonzero eigenvalue; the gap is undefined")
    return gap


def _check_closed_form(model):
    N = model.n_sites
    jl = model.hop_left
    jr = model.hop_right
    both_zero = (jl == 0) & (jr == 0)
    if np.any(both_zero):
        bonds = [int(b) + 1 for b in np.flatnonzero(both_zero)]
        raise DisconnectedChainError(
            f"jumps {bonds} have J_L = J_R = 0; the chain splits and the "
            f"steady state is not unique"
        )
    if N > 1 and not (np.all(jl > 0) or np.all(jr > 0)):
        raise DisconnectedChainError(
            "the product-form steady state needs all J_{n,L} > 0 or all "
            "J_{n,R} > 0; opposing one-way bonds create several absorbing sites"
        )


def log_steady_state(model):
    """Logarithm of the normalized steady state (``-inf`` for empty sites).

    Product form ``p_n ∝ prod_{m=1..n} J_{m,R}/J_{m,L}`` when every
    ``J_{m,L} > 0``, otherwise the mirror image anchored at the right end.
    """
    _check_closed_form(model)
    N = model.n_sites
    logp = np.zeros(N)
    if N > 1:
        with np.errstate(divide="ignore"):
            lr = np.log(model.hop_right)
            ll = np.log(model.hop_left)
        if np.all(model.hop_left > 0):
            logp[1:] = np.cumsum(lr - ll)
        else:
            logp[:-1] = np.cumsum((ll - lr)[::-1])[::-1]
    return logp - logsumexp(logp)


def steady_state(model, check=True):
    """Normalized steady-state populations.

    With ``check=True`` the kernel condition ``M p = 0`` is verified to
    ``1e-12`` relative to the largest rate.
    """
    p = np.exp(log_steady_state(model))
    if check and model.n_sites > 1:
        M = build_population_generator(model)
        resid = np.max(np.abs(M @ p))
        if resid > 1e-12 * model.rate_scale:
            raise SkinRelaxError(
                f"steady state fails M p = 0: residual {resid:.3e}"
            )
    return p


def eigenmode_density(spectrum, k):
    """Entrywise magnitudes ``|rho_k^r|`` for heatmaps."""
    if not 0 <= k < len(spectrum):
        raise IndexError(f"mode {k} outside 0..{len(spectrum) - 1}")
    return np.abs(spectrum.right_mode(k))


def write_matrix_csv(X, path):
    """Row-major CSV of a real matrix (e.g. :func:`eigenmode_density`)."""
    np.savetxt(path, np.asarray(X, dtype=float), delimiter=",", fmt="%.17g")
