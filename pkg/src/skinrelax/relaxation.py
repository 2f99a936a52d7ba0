"""Relaxation time, steady-state localization length, mode overlap.

The relaxation time follows the right-boundary population of a chain
started in ``|N-1>``. Its deviation from the steady value is

    p_{N-1}(t) - p_s = sum_{k>=1} w_k exp(lambda_k t),

with ``w_k`` the ``(N-1, N-1)`` element of the spectral projector of
population mode ``k``. For reversible chains every ``w_k`` is positive, so
the deviation decays monotonically and can be evaluated in log space even
when ``p_s`` at the boundary is far below ``1e-100``.
"""

import math
import warnings
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .dynamics import integrate_populations
from .errors import RelaxationTimeout, SaturationError, SkinRelaxError
from .liouvillian import (
    ZERO_TOL,
    coherence_eigenvalues,
    log_steady_state,
    population_eigensystem,
    sector_gaps,
    steady_state,
)

POLICIES = ("last", "first")
READINGS = ("absolute", "literal")


@dataclass
class RelaxationResult:
    """Relaxation time and crossing diagnostics.

    ``peak_undershoot`` is ``max_t (p_s - p(t)) / p_s`` over the search grid
    (0 when the population never dips below its steady value).
    """

    tau: float
    crossing_policy: str
    delta_used: float
    peak_undershoot: float
    n_crossings: int
    reading: str = "absolute"
    route: str = "eigen"

    @property
    def tau_delta(self):
        return self.tau * self.delta_used

    def to_dict(self):
        return asdict(self)


@dataclass
class LocalizationFit:
    """Exponential fit ``p_n ∝ exp(-n / xi)`` of a steady state."""

    xi: float
    fit_window: tuple
    r_squared: float
    analytic_xi: float
    slope: float
    localized: bool
    exponential: bool

    def to_dict(self):
        d = asdict(self)
        d["fit_window"] = list(self.fit_window)
        return d


def _signed_logsumexp(log_w, signs, lam, t):
    """``log|sum_k s_k exp(log_w_k + lam_k t)|`` and its sign."""
    a = log_w + lam * t
    if np.all(signs > 0):
        return logsumexp(a), 1.0
    val, sgn = logsumexp(a, b=signs, return_sign=True)
    return float(val), float(sgn)


def _deviation_terms(model, pop):
    """Terms of ``(p_{N-1}(t) - p_s) / p_s`` in log form, and ``log p_s``."""
    log_ps = log_steady_state(model)[-1]
    if not np.isfinite(log_ps):
        raise RelaxationTimeout(
            "the steady state has zero population on the right boundary; "
            "the 1/e threshold is zero and is never reached in finite time"
        )
    keep = np.ones(model.n_sites, dtype=bool)
    keep[0] = False
    log_w = pop.log_boundary_weight[keep] - log_ps
    signs = pop.boundary_weight_sign[keep].astype(float)
    lam = pop.eigenvalues[keep]
    if np.any(np.isnan(log_w)) or np.any(np.isposinf(log_w)):
        raise SkinRelaxError(
            "population modes are defective (vanishing biorthogonal overlap); "
            "use relaxation_time_integrated"
        )
    used = np.isfinite(log_w) & (signs != 0)
    return log_w[used], signs[used], lam[used], log_ps


def _crossing_function(reading, log_w, signs, lam):
    """Function whose roots are threshold crossings, positive before."""
    if reading == "absolute":
        def g(t):
            val, _ = _signed_logsumexp(log_w, signs, lam, t)
            return val + 1.0
    elif reading == "literal":
        def g(t):
            val, sgn = _signed_logsumexp(log_w, signs, lam, t)
            rel = sgn * math.exp(min(val, 700.0))
            # (p_s - p) / p_s = -rel must reach 1/e from below
            return rel + 1.0 / math.e
    else:
        raise ValueError(f"unknown reading {reading!r}; expected {READINGS}")
    return g


def _search_grid(t_max, t_min):
    return np.unique(np.concatenate([
        [0.0],
        np.geomspace(t_min, t_max, 1500),
        np.linspace(0.0, t_max, 2501),
    ]))


def _locate(g, grid, policy, rtol):
    values = np.array([g(t) for t in grid])
    positive = values > 0
    change = np.flatnonzero(positive[:-1] != positive[1:])
    # a downward crossing goes from above threshold to below
    down = change[positive[change]]
    if down.size == 0:
        return None, int(change.size), values
    i = down[-1] if policy == "last" else down[0]
    a, b = grid[i], grid[i + 1]
    tau = brentq(g, a, b, xtol=rtol * b * 1e-3, rtol=max(rtol, 4 * np.finfo(float).eps))
    return tau, int(change.size), values


def _gap(model, pop):
    pop_gap, coh_gap = sector_gaps(model, population=pop)
    gap = min(pop_gap, coh_gap)
    if not np.isfinite(gap):
        raise SkinRelaxError("no nonzero eigenvalue; relaxation time undefined")
    return gap


def relaxation_time(model, policy="last", reading="absolute", t_max_factor=1e3,
                    rtol=1e-9):
    """Relaxation time of the right-boundary population.

    Starts from ``|N-1><N-1|`` and finds ``t`` with
    ``|p_{N-1}(t) - p_s| = p_s / e`` (``reading="absolute"``) or
    ``p_s - p_{N-1}(t) = p_s / e`` (``reading="literal"``). With
    ``policy="last"`` the returned time is the last downward crossing, after
    which the deviation stays below threshold on the search grid; ``"first"``
    returns the earliest one. The root is polished by Brent's method on the
    eigenmode expansion.

    Raises
    ------
    RelaxationTimeout
        If no crossing happens before ``t_max_factor / gap``.
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected {POLICIES}")
    if model.n_sites < 2:
        raise SkinRelaxError("relaxation time needs at least two sites")
    pop = population_eigensystem(model)
    gap = _gap(model, pop)
    log_w, signs, lam, _ = _deviation_terms(model, pop)
    g = _crossing_function(reading, log_w, signs, lam)
    if g(0.0) <= 0:
        raise SkinRelaxError(
            "the initial state is already within the threshold; the steady "
            "state must sit away from the right boundary (J_L >= J_R)"
        )
    t_max = t_max_factor / gap
    fastest = np.max(np.abs(pop.eigenvalues))
    grid = _search_grid(t_max, min(1e-3 / fastest, 1e-6 * t_max))
    tau, n_cross, values = _locate(g, grid, policy, rtol)
    if tau is None:
        raise RelaxationTimeout(
            f"deviation never fell to p_s/e within t_max = {t_max_factor:g}/gap "
            f"= {t_max:.6g} s ({reading} reading)"
        )
    return RelaxationResult(
        tau=float(tau),
        crossing_policy=policy,
        delta_used=float(gap),
        peak_undershoot=_undershoot(log_w, signs, lam, grid),
        n_crossings=max(n_cross, 1),
        reading=reading,
    )


def _undershoot(log_w, signs, lam, grid):
    if np.all(signs > 0):
        return 0.0
    worst = 0.0
    for t in grid:
        val, sgn = _signed_logsumexp(log_w, signs, lam, t)
        if sgn < 0:
            worst = max(worst, math.exp(min(val, 700.0)))
    return worst


def relaxation_time_integrated(model, policy="last", reading="absolute",
                               rtol=1e-11, t_max_factor=1e3):
    """Same observable as :func:`relaxation_time` from an integrated trajectory.

    Independent of the eigendecomposition: the population equations are
    integrated with DOP853 and the threshold crossing is located on the dense
    output. Intended for moderate ``N`` (the absolute tolerance cannot go
    below ``1e-150``).
    """
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected {POLICIES}")
    N = model.n_sites
    pop_gap, coh_gap = sector_gaps(model)
    gap = min(pop_gap, coh_gap)
    ps = float(np.exp(log_steady_state(model)[-1]))
    if ps == 0.0:
        raise RelaxationTimeout("steady boundary population is zero")
    p0 = np.zeros(N)
    p0[-1] = 1.0

    t_end = 10.0 / gap
    t_max = t_max_factor / gap
    while True:
        sol = integrate_populations(model, p0, [t_end], rtol=rtol, dense_output=True)
        if reading == "absolute":
            def g(t):
                return abs(sol(t)[-1] - ps) / ps - 1.0 / math.e
        else:
            def g(t):
                return 1.0 / math.e - (ps - sol(t)[-1]) / ps
        grid = np.linspace(0.0, t_end, 4001)
        values = np.array([g(t) for t in grid])
        positive = values > 0
        change = np.flatnonzero(positive[:-1] != positive[1:])
        down = change[positive[change]]
        if down.size and not positive[-1]:
            break
        if t_end >= t_max:
            raise RelaxationTimeout(
                f"integrated deviation never fell to p_s/e within {t_max:.6g} s"
            )
        t_end = min(2.0 * t_end, t_max)
    i = down[-1] if policy == "last" else down[0]
    tau = brentq(g, grid[i], grid[i + 1], xtol=1e-14 * grid[i + 1], rtol=1e-13)
    undershoot = max(0.0, float(np.max((ps - np.array([sol(t)[-1] for t in grid])) / ps)))
    return RelaxationResult(float(tau), policy, float(gap), undershoot,
                            max(int(change.size), 1), reading, route="integrate")


# localization ----------------------------------------------------------------


def analytic_localization_length(hop_ratio):
    """``1 / ln(J_L / J_R)`` for ``hop_ratio = J_R / J_L``."""
    if hop_ratio <= 0:
        return 0.0
    if hop_ratio == 1:
        return math.inf
    return 1.0 / math.log(1.0 / hop_ratio)


def default_window(n_sites, analytic_xi):
    hi = n_sites - 2
    if np.isfinite(analytic_xi) and analytic_xi > 0:
        hi = min(hi, int(math.ceil(8.0 * analytic_xi)))
    lo = 1
    if hi - lo < 1:
        lo, hi = 0, n_sites - 1
    return lo, hi


def localization_length(steady, window=None, hop_ratio=None):
    """Least-squares fit of ``ln p_n`` against ``n`` on ``window``.

    Parameters
    ----------
    steady : array_like
        Steady-state populations.
    window : (int, int), optional
        Inclusive site range. Defaults to ``[1, min(N-2, ceil(8 xi_a))]``
        with ``xi_a`` the analytic length (``[1, N-2]`` without it).
    hop_ratio : float, optional
        ``J_R / J_L``, used for ``analytic_xi``.

    A flat profile gives ``xi = inf`` and ``localized = False``. Fits with
    ``r_squared < 0.99`` set ``exponential = False`` and warn.
    """
    p = np.asarray(steady, dtype=float)
    N = p.shape[0]
    if N < 2:
        raise ValueError("need at least two sites to fit a localization length")
    analytic = (analytic_localization_length(hop_ratio)
                if hop_ratio is not None else math.nan)
    lo, hi = window if window is not None else default_window(N, analytic)
    if not (0 <= lo < hi < N):
        raise ValueError(f"window ({lo}, {hi}) invalid for {N} sites")
    seg = p[lo:hi + 1]
    if np.any(seg <= 0):
        raise ValueError("steady state must be strictly positive on the fit window")
    n = np.arange(lo, hi + 1, dtype=float)
    y = np.log(seg)
    slope, intercept = np.polyfit(n, y, 1)
    resid = y - (slope * n + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    scale = max(np.max(np.abs(y)), 1.0)
    if ss_tot <= (1e-12 * scale) ** 2 * len(y):
        r2 = 1.0
        slope = 0.0
    else:
        r2 = float(np.clip(1.0 - np.sum(resid ** 2) / ss_tot, 0.0, 1.0))
    localized = abs(slope) > 1e-12
    xi = -1.0 / slope if localized else math.inf
    exponential = r2 >= 0.99
    if not exponential:
        warnings.warn(f"steady-state profile is not exponential (r^2 = {r2:.4f})",
                      stacklevel=2)
    return LocalizationFit(float(xi), (int(lo), int(hi)), r2, analytic,
                           float(slope), localized, exponential)


def hop_ratio_of(model):
    """``J_R / J_L`` from the first bond (the ratio is bond-independent here)."""
    if model.n_sites < 2 or model.hop_left[0] == 0:
        return None
    return float(model.hop_right[0] / model.hop_left[0])


def model_localization(model, window=None):
    return localization_length(steady_state(model), window=window,
                               hop_ratio=hop_ratio_of(model))


# overlap metric --------------------------------------------------------------


def slowest_mode(model, pop=None):
    """Pick ``lambda_1`` and its sector.

    The population eigenvalue wins when its real part is within ``1e-10``
    (relative) of the slowest nonzero decay overall, since diagonal initial
    states only excite that sector. Otherwise the slowest coherence with the
    smallest ``|Im|`` is taken.

    Returns ``(eigenvalue, sector, index)`` where ``index`` is the population
    mode number or the ``(m, n)`` pair.
    """
    if pop is None:
        pop = population_eigensystem(model)
    pop_gap, coh_gap = sector_gaps(model, population=pop)
    best = min(pop_gap, coh_gap)
    if not np.isfinite(best):
        raise SkinRelaxError("no nonzero eigenvalue")
    if pop_gap - best <= 1e-10 * best:
        w = pop.eigenvalues
        nz = np.flatnonzero(np.abs(w) > ZERO_TOL * max(np.max(np.abs(w)), 1e-300))
        k = int(nz[np.argmax(w[nz])])
        return complex(w[k]), "population", k
    lam = coherence_eigenvalues(model)
    cand = np.argwhere(np.abs(lam.real + coh_gap) <= 1e-10 * coh_gap)
    m, n = min(cand.tolist(), key=lambda mn: (abs(lam[mn[0], mn[1]].imag), mn))
    return complex(lam[m, n]), "coherence", (m, n)


def mode_overlap_metric(model):
    """``-ln|Tr[(rho_1^l)^dag rho_1^r]|`` with trace-norm normalized modes.

    Raises :class:`SaturationError` when the overlap is below ``1e-300``.
    """
    pop = population_eigensystem(model)
    _, sector, index = slowest_mode(model, pop)
    if sector == "coherence":
        return 0.0
    overlap = abs(float(np.sum(pop.left[:, index] * pop.right[:, index])))
    if not overlap >= 1e-300:
        raise SaturationError(
            f"left/right overlap {overlap:.3e} underflows; N={model.n_sites} is "
            f"too large for this diagnostic"
        )
    return -math.log(overlap)
