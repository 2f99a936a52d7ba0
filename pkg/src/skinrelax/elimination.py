"""Trapped-ion sideband realization of the gradient chain.

A two-level ion (``|g>``, ``|e>``) in a harmonic trap is driven on the red
and blue motional sidebands. In the Lamb-Dicke, resolved-sideband and
weak-coupling regime the excited manifold can be eliminated, leaving a chain
on ``|g, n>`` with gradient hops ``n J_r`` (down) and ``n J_b`` (up) where

    J_j = gamma |Omega_j|^2 eta_j^2 / (4 delta_j^2 + gamma^2).

The full model is simulated in the interaction frame where the only time
dependence is ``exp(i delta_j t)`` on the sideband couplings; ``omega0`` is
absorbed by that frame and never enters the numerics.

Hilbert-space ordering for the full model: ``|g, n>`` is index ``n`` and
``|e, n>`` is index ``M + n`` for ``n = 0..M-1``.
"""

import math
import warnings
from dataclasses import dataclass, field, asdict

import numpy as np
from scipy.integrate import solve_ivp

from .dynamics import evolve_populations
from .errors import RegimeError, StiffnessError, TruncationLeakError
from .liouvillian import vec
from .model import ModelParams, build_model

# thresholds standing in for the "much less than" regime conditions
LAMB_DICKE_MAX = 0.3
RESOLVED_MAX = 0.1
WEAK_COUPLING_MAX = 0.3
DETUNING_MAX = 0.1


@dataclass(frozen=True)
class Laser:
    """One sideband laser: Rabi frequency, Lamb-Dicke parameter, detuning, phase."""

    Omega: float
    eta: float
    delta: float = 0.0
    phi: float = 0.0

    @property
    def coupling(self):
        return self.eta * self.Omega


@dataclass(frozen=True)
class PhysicalParams:
    """Ion, trap and laser parameters (angular frequencies in rad/s)."""

    omega0: float
    nu: float
    n_sidebands: int
    gamma: float
    red: Laser
    blue: Laser

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        d["red"] = Laser(**d["red"])
        d["blue"] = Laser(**d["blue"])
        return cls(**d)

    def to_dict(self):
        return asdict(self)

    def lasers(self):
        return (("red", self.red), ("blue", self.blue))


def regime_checks(phys):
    """Evaluate every regime inequality.

    Returns a list of ``(description, value, limit)`` tuples; a check fails
    when ``value > limit``.
    """
    checks = [("gamma/nu (resolved sidebands)", phys.gamma / phys.nu, RESOLVED_MAX)]
    for name, laser in phys.lasers():
        checks.append((f"eta_{name} (Lamb-Dicke)", abs(laser.eta), LAMB_DICKE_MAX))
        checks.append((f"eta_{name}*Omega_{name}/gamma (weak coupling)",
                       abs(laser.coupling) / phys.gamma, WEAK_COUPLING_MAX))
        checks.append((f"|delta_{name}|/nu (near-resonant sideband)",
                       abs(laser.delta) / phys.nu, DETUNING_MAX))
    return checks


def _check_positive(phys):
    if not phys.gamma > 0:
        raise ValueError(f"gamma must be positive, got {phys.gamma}")
    if not phys.nu > 0:
        raise ValueError(f"nu must be positive, got {phys.nu}")


@dataclass
class EffectiveRates:
    """Rates of the eliminated chain.

    ``long_range[n]`` is the coefficient of ``|g, n+2><g, n|`` in the
    rotating-frame effective Hamiltonian; it oscillates at
    ``beat_frequency = delta_b - delta_r`` and is dropped from the chain.
    """

    J_r: float
    J_b: float
    E_r: float
    E_b: float
    nu: float
    n_sites: int
    beat_frequency: float
    long_range: np.ndarray = field(repr=False)

    def model_params(self, n_sites=None):
        """Chain parameters: gradient energies ``n (E_r + E_b + nu)``,
        gradient hops with ``J_L = J_r`` and ``J_R = J_b``."""
        return ModelParams(
            n_sites=self.n_sites if n_sites is None else n_sites,
            energy_base=self.E_r + self.E_b + self.nu,
            energy_gradient=True,
            hop_left_base=self.J_r,
            hop_right_base=self.J_b,
            hop_gradient=True,
        )

    def to_dict(self):
        d = asdict(self)
        d["long_range"] = [[float(z.real), float(z.imag)] for z in self.long_range]
        return d


def _rate(gamma, laser):
    return gamma * abs(laser.Omega) ** 2 * laser.eta ** 2 / (4 * laser.delta ** 2 + gamma ** 2)


def _shift(gamma, laser):
    return laser.delta * abs(laser.Omega) ** 2 * laser.eta ** 2 / (4 * laser.delta ** 2 + gamma ** 2)


def effective_rates(phys):
    """Closed-form rates, shifts and the neglected next-nearest coupling.

    Regime violations only warn here; nonpositive ``gamma`` or ``nu`` raise.
    """
    _check_positive(phys)
    for desc, value, limit in regime_checks(phys):
        if value > limit:
            warnings.warn(f"{desc} = {value:.3g} exceeds {limit}", stacklevel=2)
    g = phys.gamma
    r, b = phys.red, phys.blue
    n = np.arange(max(phys.n_sidebands - 2, 0))
    denom = 4 * r.delta * b.delta + g ** 2 + 2j * g * (r.delta - b.delta)
    long_range = (np.exp(1j * (b.phi - r.phi)) * np.sqrt((n + 1) * (n + 2))
                  * r.Omega * b.Omega * r.eta * b.eta
                  * (0.5 * (r.delta + b.delta)) / denom)
    return EffectiveRates(
        J_r=_rate(g, r), J_b=_rate(g, b), E_r=_shift(g, r), E_b=_shift(g, b),
        nu=phys.nu, n_sites=phys.n_sidebands,
        beat_frequency=b.delta - r.delta, long_range=long_range,
    )


class IonMasterEquation:
    """Right-hand side of the full two-level x sideband master equation.

    ``H(t) = sum_j exp(i delta_j t) h_j + h.c.`` with

    * red:  ``h_r = sum_n sqrt(n+1)/2 eta_r Omega_r e^{-i phi_r} |g,n+1><e,n|``
    * blue: ``h_b = sum_n sqrt(n+1)/2 eta_b Omega_b e^{-i phi_b} |g,n><e,n+1|``

    and decay ``L_n = sqrt(gamma) |g,n><e,n|``. Couplings that would leave
    the top sideband ``M-1`` are dropped.
    """

    def __init__(self, phys, max_sidebands=12):
        _check_positive(phys)
        M = phys.n_sidebands
        if M < 2:
            raise ValueError(f"need at least 2 sidebands, got {M}")
        if M > max_sidebands:
            raise ValueError(f"{M} sidebands exceed the cap of {max_sidebands}")
        self.phys = phys
        self.M = M
        D = 2 * M
        self.dim = D
        r, b = phys.red, phys.blue
        h_r = np.zeros((D, D), dtype=complex)
        h_b = np.zeros((D, D), dtype=complex)
        for n in range(M - 1):
            amp = math.sqrt(n + 1) / 2
            h_r[self.g(n + 1), self.e(n)] = amp * r.coupling * np.exp(-1j * r.phi)
            h_b[self.g(n), self.e(n + 1)] = amp * b.coupling * np.exp(-1j * b.phi)
        self.h_red = h_r
        self.h_blue = h_b

        ident = np.eye(D)

        def comm(X):
            return -1j * (np.kron(ident, X) - np.kron(X.T, ident))

        L0 = np.zeros((D * D, D * D), dtype=complex)
        for n in range(M):
            A = np.zeros((D, D))
            A[self.g(n), self.e(n)] = math.sqrt(phys.gamma)
            AdA = A.T @ A
            L0 += np.kron(A.conj(), A) - 0.5 * np.kron(ident, AdA) \
                - 0.5 * np.kron(AdA.T, ident)
        self._L0 = L0
        self._terms = [
            (r.delta, comm(h_r), comm(h_r.conj().T)),
            (b.delta, comm(h_b), comm(h_b.conj().T)),
        ]

    def g(self, n):
        return n

    def e(self, n):
        return self.M + n

    def hamiltonian(self, t):
        H = np.zeros((self.dim, self.dim), dtype=complex)
        for (delta, _, _), h in zip(self._terms, (self.h_red, self.h_blue)):
            H += np.exp(1j * delta * t) * h
        return H + H.conj().T

    def rhs(self, t, y):
        """``d vec(rho)/dt`` (column stacking)."""
        out = self._L0 @ y
        for delta, K, Kd in self._terms:
            ph = np.exp(1j * delta * t)
            out += ph * (K @ y) + ph.conjugate() * (Kd @ y)
        return out

    def __call__(self, t, rho):
        D = self.dim
        return self.rhs(t, vec(rho)).reshape(D, D, order="F")

    def ground_populations(self, rho):
        return np.real(np.diagonal(rho, axis1=-2, axis2=-1)[..., :self.M])

    def excited_populations(self, rho):
        return np.real(np.diagonal(rho, axis1=-2, axis2=-1)[..., self.M:])

    def top_population(self, rho):
        d = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
        return d[..., self.g(self.M - 1)] + d[..., self.e(self.M - 1)]


def build_full_ion_generator(phys, max_sidebands=12):
    return IonMasterEquation(phys, max_sidebands=max_sidebands)


@dataclass
class ValidationReport:
    """Full model vs eliminated chain on the ground-manifold populations."""

    max_tv_distance: float
    max_excited_population: float
    excited_scale: float
    max_top_population: float
    max_trace_drift: float
    t_final: float
    tol: float
    passed: bool
    rates: EffectiveRates = field(repr=False)
    times: np.ndarray = field(repr=False)
    tv_distance: np.ndarray = field(repr=False)
    full_ground: np.ndarray = field(repr=False)
    effective: np.ndarray = field(repr=False)
    excited: np.ndarray = field(repr=False)

    def to_dict(self, series=False):
        d = {
            "schema_version": 1,
            "max_tv_distance": self.max_tv_distance,
            "max_excited_population": self.max_excited_population,
            "excited_scale": self.excited_scale,
            "max_top_population": self.max_top_population,
            "max_trace_drift": self.max_trace_drift,
            "t_final": self.t_final,
            "tol": self.tol,
            "passed": self.passed,
            "rates": self.rates.to_dict(),
        }
        if series:
            d["times"] = self.times.tolist()
            d["tv_distance"] = self.tv_distance.tolist()
            d["excited"] = self.excited.tolist()
        return d


def validate_elimination(phys, t_final=None, tol=0.05, initial_sideband=None,
                         n_times=401, rtol=1e-8, atol=1e-11, leak_limit=None):
    """Integrate the full ion model and the eliminated chain side by side.

    Both start in ``|g, initial_sideband>`` (default: the top sideband, the
    analogue of the right-boundary start used for relaxation times). The
    report holds the largest total-variation distance between the ground
    populations of the full model and the chain populations, the largest
    excited-manifold population, and the largest population of the top
    sideband. With ``leak_limit`` set, a larger top-sideband population
    raises :class:`TruncationLeakError`.

    Raises
    ------
    RegimeError
        If any regime inequality of :func:`regime_checks` is violated.
    """
    _check_positive(phys)
    for desc, value, limit in regime_checks(phys):
        if value > limit:
            raise RegimeError(f"regime violated: {desc} = {value:.4g} > {limit}")
    rates = effective_rates(phys)
    if rates.J_r <= 0:
        raise ValueError("the red laser must be on (J_r > 0) to set the time scale")
    if t_final is None:
        t_final = 5.0 / rates.J_r
    eq = IonMasterEquation(phys)
    M = eq.M
    n0 = M - 1 if initial_sideband is None else int(initial_sideband)
    if not 0 <= n0 < M:
        raise ValueError(f"initial sideband {n0} outside 0..{M - 1}")

    times = np.linspace(0.0, t_final, n_times)
    rho0 = np.zeros((eq.dim, eq.dim), dtype=complex)
    rho0[eq.g(n0), eq.g(n0)] = 1.0
    beat = abs(phys.red.delta - phys.blue.delta)
    slow = min(1.0 / beat if beat > 0 else math.inf, 1.0 / phys.gamma)
    sol = solve_ivp(eq.rhs, (0.0, t_final), vec(rho0), method="DOP853",
                    t_eval=times, rtol=rtol, atol=atol, max_step=0.05 * slow)
    if sol.status != 0:
        raise StiffnessError(f"full ion model integration failed: {sol.message}")
    D = eq.dim
    rhos = np.stack([y.reshape(D, D, order="F") for y in sol.y.T])

    full_ground = eq.ground_populations(rhos)
    excited = eq.excited_populations(rhos).sum(axis=1)
    top = eq.top_population(rhos)
    drift = np.abs(np.trace(rhos, axis1=1, axis2=2) - 1.0)

    chain = build_model(rates.model_params(n_sites=M))
    p0 = np.zeros(M)
    p0[n0] = 1.0
    effective = evolve_populations(chain, p0, times)
    tv = 0.5 * np.abs(full_ground - effective).sum(axis=1)

    if leak_limit is not None and top.max() > leak_limit:
        raise TruncationLeakError(
            f"top sideband population {top.max():.3e} exceeds {leak_limit:.1e}; "
            f"increase n_sidebands"
        )
    scale = max((abs(l.coupling) / phys.gamma) ** 2 for _, l in phys.lasers())
    max_tv = float(tv.max())
    return ValidationReport(
        max_tv_distance=max_tv,
        max_excited_population=float(excited.max()),
        excited_scale=float(scale),
        max_top_population=float(top.max()),
        max_trace_drift=float(drift.max()),
        t_final=float(t_final),
        tol=float(tol),
        passed=max_tv < tol,
        rates=rates,
        times=times,
        tv_distance=tv,
        full_ground=full_ground,
        effective=effective,
        excited=excited,
    )


def benchmark_params(n_sidebands=4, gamma=2 * math.pi * 20e3, nu_ratio=0.02,
                     coupling_ratio=0.05, eta=0.05, delta_r=0.0, delta_b=0.0,
                     blue=True, omega0=2 * math.pi * 1e9):
    """Parameter set with ``gamma/nu`` and ``eta*Omega/gamma`` fixed."""
    Omega = coupling_ratio * gamma / eta
    return PhysicalParams(
        omega0=omega0,
        nu=gamma / nu_ratio,
        n_sidebands=n_sidebands,
        gamma=gamma,
        red=Laser(Omega=Omega, eta=eta, delta=delta_r),
        blue=Laser(Omega=Omega if blue else 0.0, eta=eta, delta=delta_b),
    )
