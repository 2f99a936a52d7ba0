"""The effective chain: on-site energies and incoherent left/right hops.

Sites are labelled ``0..N-1``. Jump operators are labelled ``n = 1..N-1``:
``L_{n,L} = sqrt(J_{n,L}) |n-1><n|`` moves population left and
``L_{n,R} = sqrt(J_{n,R}) |n><n-1|`` moves it right. Array slot ``n-1`` of
``hop_left`` / ``hop_right`` holds jump ``n``.

Energies and rates are angular frequencies (rad/s); see :mod:`skinrelax.units`.
"""

from dataclasses import dataclass, field, asdict

import numpy as np


@dataclass(frozen=True)
class ModelParams:
    """Parameters of the chain.

    Parameters
    ----------
    n_sites : int
        Number of sites ``N``.
    energy_base : float
        ``E`` in rad/s.
    energy_gradient : bool
        ``E_n = n E`` if True, otherwise ``E_n = E``.
    hop_left_base, hop_right_base : float
        ``J_L`` and ``J_R`` in 1/s.
    hop_gradient : bool
        ``J_{n,L(R)} = n J_{L(R)}`` if True, otherwise constant.
    """

    n_sites: int
    energy_base: float = 0.0
    energy_gradient: bool = False
    hop_left_base: float = 1.0
    hop_right_base: float = 0.0
    hop_gradient: bool = False

    def __post_init__(self):
        if isinstance(self.n_sites, bool) or int(self.n_sites) != self.n_sites:
            raise ValueError(f"n_sites must be an integer, got {self.n_sites!r}")
        if self.n_sites < 1:
            raise ValueError(f"n_sites must be >= 1, got {self.n_sites}")
        for name in ("energy_base", "hop_left_base", "hop_right_base"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        if self.hop_left_base < 0 or self.hop_right_base < 0:
            raise ValueError(
                "hop rates must be nonnegative, got "
                f"J_L={self.hop_left_base}, J_R={self.hop_right_base}"
            )

    @classmethod
    def from_ratio(cls, n_sites, ratio_sqrt, hop_left_base=1.0, **kwargs):
        """Chain with ``J_R = ratio_sqrt**2 * J_L``."""
        return cls(n_sites=n_sites, hop_left_base=hop_left_base,
                   hop_right_base=ratio_sqrt ** 2 * hop_left_base, **kwargs)

    def replace(self, **changes):
        data = asdict(self)
        data.update(changes)
        return type(self)(**data)

    def to_dict(self):
        return asdict(self)


@dataclass(frozen=True, eq=False)
class Model:
    """Materialized chain.

    ``out_rate[m] = J_{m,L} + J_{m+1,R}`` is the total escape rate from site
    ``m``; out-of-range jump indices contribute zero, so
    ``out_rate[0] = J_{1,R}`` and ``out_rate[N-1] = J_{N-1,L}``.
    """

    energies: np.ndarray
    hop_left: np.ndarray
    hop_right: np.ndarray
    out_rate: np.ndarray
    params: ModelParams = field(default=None)

    @property
    def n_sites(self):
        return self.energies.shape[0]

    @property
    def rate_scale(self):
        """Largest single rate or energy, used to make tolerances relative."""
        scale = max(
            np.max(self.out_rate, initial=0.0),
            np.max(np.abs(self.energies), initial=0.0),
        )
        return scale if scale > 0 else 1.0

    def jumps(self):
        """Yield ``(target, source, rate)`` for every jump with nonzero rate."""
        for n in range(1, self.n_sites):
            if self.hop_left[n - 1] > 0:
                yield n - 1, n, self.hop_left[n - 1]
            if self.hop_right[n - 1] > 0:
                yield n, n - 1, self.hop_right[n - 1]

    def is_reversible(self):
        """True when every bond carries hops in both directions."""
        return bool(np.all(self.hop_left > 0) and np.all(self.hop_right > 0))


def _freeze(a):
    a = np.ascontiguousarray(a, dtype=float)
    a.setflags(write=False)
    return a


def model_from_arrays(energies, hop_left, hop_right, params=None):
    """Build a :class:`Model` from explicit site energies and jump rates."""
    energies = np.asarray(energies, dtype=float).ravel()
    hop_left = np.asarray(hop_left, dtype=float).ravel()
    hop_right = np.asarray(hop_right, dtype=float).ravel()
    n = energies.shape[0]
    if n < 1:
        raise ValueError("a chain needs at least one site")
    if hop_left.shape != (n - 1,) or hop_right.shape != (n - 1,):
        raise ValueError(
            f"expected {n - 1} hop rates per direction, got "
            f"{hop_left.shape[0]} and {hop_right.shape[0]}"
        )
    if np.any(hop_left < 0) or np.any(hop_right < 0):
        raise ValueError("hop rates must be nonnegative")
    if not (np.all(np.isfinite(energies)) and np.all(np.isfinite(hop_left))
            and np.all(np.isfinite(hop_right))):
        raise ValueError("energies and rates must be finite")
    out = np.zeros(n)
    out[1:] += hop_left
    out[:-1] += hop_right
    return Model(_freeze(energies), _freeze(hop_left), _freeze(hop_right),
                 _freeze(out), params)


def build_model(params):
    """Materialize the arrays described by ``params``."""
    if not isinstance(params, ModelParams):
        raise TypeError(f"expected ModelParams, got {type(params).__name__}")
    N = params.n_sites
    sites = np.arange(N, dtype=float)
    if params.energy_gradient:
        energies = sites * params.energy_base
    else:
        energies = np.full(N, float(params.energy_base))
    index = np.arange(1, N, dtype=float)
    factor = index if params.hop_gradient else np.ones(N - 1)
    return model_from_arrays(
        energies,
        factor * params.hop_left_base,
        factor * params.hop_right_base,
        params=params,
    )
