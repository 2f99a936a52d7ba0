"""Time evolution of the chain.

Two independent propagation paths:

* eigenmode expansion, ``rho(t) = sum_k c_k exp(lambda_k t) rho_k^r`` with
  biorthogonal coefficients ``c_k = Tr[l_k^dag rho0] / Tr[l_k^dag r_k]``;
* adaptive embedded Runge-Kutta integration of the master equation.

The expansion becomes exponentially ill-conditioned when the skin effect
localizes right and left modes at opposite ends; the integrator is the
fallback and the cross-check.

States are plain numpy arrays: a population vector of length ``N`` or an
``N x N`` complex density matrix. Negative populations produced by rounding
are kept in-state and only clipped when exporting.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.sparse import diags
from scipy.sparse.linalg import expm_multiply

from .errors import ConditioningError, SkinRelaxError, StiffnessError
from .liouvillian import (
    coherence_eigenvalues,
    full_spectrum,
    log_steady_state,
    population_eigensystem,
    vec,
)

MIN_OVERLAP = 1e-10
_EPS = np.finfo(float).eps


def check_population(p, tol=1e-9):
    """Validate a population vector; returns it as a float array."""
    p = np.asarray(p, dtype=float)
    if p.ndim != 1:
        raise ValueError("population vector must be one-dimensional")
    if abs(p.sum() - 1.0) > tol:
        raise ValueError(f"populations sum to {p.sum()!r}, expected 1")
    if np.any(p < -1e-12):
        raise ValueError(f"negative population {p.min():.3e}")
    return p


def check_density_matrix(rho, tol=1e-9):
    """Validate a density matrix; returns it as a complex array."""
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"density matrix must be square, got {rho.shape}")
    if np.max(np.abs(rho - rho.conj().T), initial=0.0) > 1e-10:
        raise ValueError("density matrix is not Hermitian")
    tr = np.trace(rho).real
    if abs(tr - 1.0) > tol:
        raise ValueError(f"density matrix has trace {tr!r}")
    if rho.shape[0] and np.linalg.eigvalsh(rho).min() < -tol:
        raise ValueError("density matrix is not positive semidefinite")
    return rho


def basis_state(n_sites, site):
    """``|site><site|``."""
    rho = np.zeros((n_sites, n_sites), dtype=complex)
    rho[site, site] = 1.0
    return rho


def random_density_matrix(n_sites, rng):
    """Full-rank random state (Ginibre construction)."""
    G = rng.normal(size=(n_sites, n_sites)) + 1j * rng.normal(size=(n_sites, n_sites))
    rho = G @ G.conj().T
    return rho / np.trace(rho).real


@dataclass
class Trajectory:
    """States at increasing times.

    ``states`` has shape ``(T, N)`` for populations or ``(T, N, N)`` for
    density matrices.
    """

    times: np.ndarray
    states: np.ndarray

    @property
    def populations(self):
        if self.states.ndim == 2:
            return self.states
        return np.real(np.einsum("tii->ti", self.states))

    def to_csv(self, path):
        """Write ``t, p_0 .. p_{N-1}``; negatives above ``-1e-12`` become 0."""
        P = self.populations.copy()
        P[(P < 0) & (P >= -1e-12)] = 0.0
        N = P.shape[1]
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t"] + [f"p_{n}" for n in range(N)])
            for t, row in zip(self.times, P):
                writer.writerow([repr(float(t))] + [repr(float(x)) for x in row])


def _times(t):
    arr = np.atleast_1d(np.asarray(t, dtype=float))
    if arr.ndim != 1:
        raise ValueError("times must be a scalar or a 1-d array")
    if np.any(arr < 0):
        raise ValueError("times must be nonnegative")
    return arr, np.ndim(t) == 0


# eigenmode expansion -------------------------------------------------------


def _population_coefficients(pop, p0, min_overlap):
    overlap = np.sum(pop.left * pop.right, axis=0)
    worst = np.min(np.abs(overlap))
    if worst < min_overlap:
        k = int(np.argmin(np.abs(overlap)))
        raise ConditioningError(
            f"biorthogonal overlap of population mode {k} is {worst:.3e} "
            f"(< {min_overlap:.1e}); the eigenmode expansion is ill-conditioned, "
            f"use evolve_integrate instead"
        )
    return (pop.left.T @ p0) / overlap


def expand_initial(model, rho0, method="sector", spectrum=None,
                   min_overlap=MIN_OVERLAP):
    """Coefficients ``c_k`` of ``rho0`` in the right eigenmodes.

    Ordered like ``spectrum.eigenvalues`` (computed with ``method`` when not
    supplied). Raises :class:`ConditioningError` if any biorthogonal
    denominator ``|Tr[l_k^dag r_k]|`` is below ``min_overlap``.
    """
    rho0 = check_density_matrix(rho0)
    if spectrum is None:
        spectrum = full_spectrum(model, method=method)
    if spectrum.method == "dense":
        Lm = spectrum.left_matrix
        Rm = spectrum.right_matrix
        denom = np.einsum("ik,ik->k", Lm.conj(), Rm)
        worst = np.min(np.abs(denom))
        if worst < min_overlap:
            raise ConditioningError(
                f"smallest biorthogonal overlap {worst:.3e} < {min_overlap:.1e}; "
                f"use evolve_integrate instead"
            )
        return (Lm.conj().T @ vec(rho0)) / denom
    pop = spectrum.population
    cp = _population_coefficients(pop, np.real(np.diag(rho0)), min_overlap)
    c = np.empty(len(spectrum), dtype=complex)
    is_pop = spectrum.pop_index >= 0
    c[is_pop] = cp[spectrum.pop_index[is_pop]]
    c[~is_pop] = rho0[spectrum.m[~is_pop], spectrum.n[~is_pop]]
    return c


def reconstruct(spectrum, coefficients, t=0.0):
    """``sum_k c_k exp(lambda_k t) rho_k^r`` for a single time."""
    N = spectrum.n_sites
    phase = coefficients * np.exp(spectrum.eigenvalues * t)
    if spectrum.method == "dense":
        return (spectrum.right_matrix @ phase).reshape(N, N, order="F")
    rho = np.zeros((N, N), dtype=complex)
    pop = spectrum.population
    is_pop = spectrum.pop_index >= 0
    weights = np.zeros(N, dtype=complex)
    weights[spectrum.pop_index[is_pop]] = phase[is_pop]
    rho[np.diag_indices(N)] = pop.right @ weights
    rho[spectrum.m[~is_pop], spectrum.n[~is_pop]] = phase[~is_pop]
    return rho


def evolve_eigen(model, rho0, t, method="sector", spectrum=None,
                 min_overlap=MIN_OVERLAP):
    """Propagate by eigenmode expansion.

    ``t`` may be a scalar (returns ``N x N``) or an array of times (returns
    ``T x N x N``).
    """
    times, scalar = _times(t)
    rho0 = check_density_matrix(rho0)
    N = rho0.shape[0]
    if spectrum is None and method == "sector":
        # same expansion without materializing the N^2 labelled entries
        pop = population_eigensystem(model)
        cp = _population_coefficients(pop, np.real(np.diag(rho0)), min_overlap)
        lam = coherence_eigenvalues(model)
        off = ~np.eye(N, dtype=bool)
        out = np.empty((len(times), N, N), dtype=complex)
        for i, ti in enumerate(times):
            rho = np.zeros((N, N), dtype=complex)
            rho[off] = rho0[off] * np.exp(lam[off] * ti)
            rho[np.diag_indices(N)] = pop.right @ (cp * np.exp(pop.eigenvalues * ti))
            out[i] = rho
        return out[0] if scalar else out
    if spectrum is None:
        spectrum = full_spectrum(model, method=method)
    c = expand_initial(model, rho0, spectrum=spectrum, min_overlap=min_overlap)
    out = np.stack([reconstruct(spectrum, c, ti) for ti in times])
    return out[0] if scalar else out


def evolve_populations(model, p0, t):
    """``p(t) = exp(M t) p0`` for a diagonal initial state.

    Uses the eigendecomposition of ``M``. When the biorthogonal condition
    number would cost more than about ``1e-13`` of accuracy, switches to
    ``scipy.sparse.linalg.expm_multiply`` instead.
    """
    times, scalar = _times(t)
    p0 = check_population(p0)
    pop = population_eigensystem(model)
    overlap = np.abs(np.sum(pop.left * pop.right, axis=0))
    with np.errstate(divide="ignore"):
        amplification = 1.0 / overlap.min()
    if np.isfinite(amplification) and amplification * _EPS < 1e-13:
        c = (pop.left.T @ p0) / np.sum(pop.left * pop.right, axis=0)
        out = (np.exp(np.outer(times, pop.eigenvalues)) * c) @ pop.right.T
    else:
        M = _sparse_generator(model)
        out = np.stack([expm_multiply(M * ti, p0) for ti in times])
    return out[0] if scalar else out


def _sparse_generator(model):
    return diags(
        [model.hop_right, -model.out_rate, model.hop_left], [-1, 0, 1],
        shape=(model.n_sites, model.n_sites), format="csr",
    )


# integration ---------------------------------------------------------------


def lindblad_rhs(model):
    """``f(t, y)`` for the column-stacked master equation.

    Written directly from the Lindblad form with rank-one jumps
    ``A = sqrt(J)|a><b|``: ``A rho A^dag = J rho_bb |a><a|`` and
    ``A^dag A = J |b><b|``.
    """
    N = model.n_sites
    E = model.energies
    jumps = list(model.jumps())
    tgt = np.array([j[0] for j in jumps], dtype=int)
    src = np.array([j[1] for j in jumps], dtype=int)
    rate = np.array([j[2] for j in jumps], dtype=float)
    loss = np.bincount(src, weights=rate, minlength=N)
    comm = -1j * (E[:, None] - E[None, :])
    decay = -0.5 * (loss[:, None] + loss[None, :])
    gen = comm + decay
    diag_idx = np.arange(N) * (N + 1)

    def rhs(t, y):
        rho = y.reshape(N, N, order="F")
        out = gen * rho
        pops = y[diag_idx][src]
        gain = np.bincount(tgt, weights=rate * pops.real, minlength=N) \
            + 1j * np.bincount(tgt, weights=rate * pops.imag, minlength=N)
        out[np.diag_indices(N)] += gain
        return out.reshape(-1, order="F")

    return rhs


def evolve_integrate(model, rho0, t, tol=1e-10, method="DOP853", max_step=np.inf):
    """Integrate the master equation with an adaptive embedded RK scheme.

    ``tol`` is the relative tolerance; the absolute tolerance is
    ``1e-2 * tol``. Raises :class:`StiffnessError` when the step size
    underflows.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    times, scalar = _times(t)
    rho0 = check_density_matrix(rho0)
    N = rho0.shape[0]
    y0 = vec(rho0).astype(complex)
    t_end = float(times.max())
    if t_end == 0.0:
        out = np.repeat(rho0[None], len(times), axis=0)
        return out[0] if scalar else out
    sol = solve_ivp(
        lindblad_rhs(model), (0.0, t_end), y0, method=method,
        t_eval=np.sort(times), rtol=tol, atol=1e-2 * tol, max_step=max_step,
    )
    if sol.status != 0:
        raise StiffnessError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    order = np.argsort(np.argsort(times))
    states = np.stack([s.reshape(N, N, order="F") for s in sol.y.T])
    states = states[order]
    return states[0] if scalar else states


def integrate_populations(model, p0, t, rtol=1e-11, atol=None, dense_output=False):
    """Integrate ``dp/dt = M p`` alone (diagonal initial states).

    ``atol`` defaults to ``1e-14`` times the smallest steady-state population
    (floored at ``1e-150``) so that exponentially small boundary populations
    are resolved in relative terms.
    """
    times, scalar = _times(t)
    p0 = check_population(p0)
    if atol is None:
        try:
            floor = np.exp(log_steady_state(model)).min()
        except SkinRelaxError:
            floor = 0.0
        atol = max(1e-150, 1e-14 * floor)
    M = _sparse_generator(model)
    t_end = float(times.max())
    sol = solve_ivp(lambda _t, y: M @ y, (0.0, t_end), p0, method="DOP853",
                    t_eval=np.sort(times) if not dense_output else None,
                    rtol=rtol, atol=atol, dense_output=dense_output)
    if sol.status != 0:
        raise StiffnessError(f"integration failed at t={sol.t[-1]:.6g}: {sol.message}")
    if dense_output:
        return sol.sol
    order = np.argsort(np.argsort(times))
    out = sol.y.T[order]
    return out[0] if scalar else out


def trajectory(model, rho0, times, route="eigen", **kwargs):
    """Convenience wrapper returning a :class:`Trajectory`."""
    times = np.asarray(times, dtype=float)
    if route == "eigen":
        states = evolve_eigen(model, rho0, times, **kwargs)
    elif route == "integrate":
        states = evolve_integrate(model, rho0, times, **kwargs)
    elif route == "populations":
        states = evolve_populations(model, rho0, times)
    else:
        raise ValueError(f"unknown route {route!r}")
    return Trajectory(times, states)
