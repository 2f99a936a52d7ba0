"""Parameter sweeps over chain size and hop ratio with power-law fits.

Each grid point ``(N, ratio)`` builds a chain and evaluates the requested
observables. Grid points are independent; they run serially or in a process
pool and are always returned sorted by ``(N, ratio)``, so the serialized
records do not depend on the worker count.
"""

import csv
import hashlib
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import SkinRelaxError
from .liouvillian import model_gap
from .model import ModelParams, build_model
from .relaxation import mode_overlap_metric, model_localization, relaxation_time

SCHEMA_VERSION = 1
OBSERVABLES = ("gap", "tau", "xi", "overlap")
GRADIENTS = ("hops", "energies")
RATIO_KINDS = ("sqrt", "plain")


@dataclass(frozen=True)
class SweepConfig:
    """Grid definition.

    ``ratios`` are ``sqrt(J_R/J_L)`` when ``ratio_kind="sqrt"`` and
    ``J_R/J_L`` when ``"plain"``. ``gradients`` lists which of hops and
    energies grow linearly with the site index.
    """

    sizes: tuple
    ratios: tuple = (1.0,)
    ratio_kind: str = "sqrt"
    gradients: tuple = ()
    energy_base: float = 0.0
    hop_left_base: float = 1.0
    observables: tuple = OBSERVABLES
    crossing_policy: str = "last"
    reading: str = "absolute"
    output_dir: str = "."

    def __post_init__(self):
        object.__setattr__(self, "sizes", tuple(int(n) for n in self.sizes))
        object.__setattr__(self, "ratios", tuple(float(r) for r in self.ratios))
        object.__setattr__(self, "gradients", tuple(sorted(set(self.gradients))))
        object.__setattr__(self, "observables", tuple(self.observables))
        if not self.sizes:
            raise ValueError("sizes must not be empty")
        if any(b <= a for a, b in zip(self.sizes, self.sizes[1:])):
            raise ValueError(f"sizes must be strictly increasing, got {self.sizes}")
        if self.sizes[0] < 2:
            raise ValueError("sizes must be at least 2")
        if not self.ratios or any(not 0 < r <= 1 for r in self.ratios):
            raise ValueError(f"ratios must lie in (0, 1], got {self.ratios}")
        if self.ratio_kind not in RATIO_KINDS:
            raise ValueError(f"ratio_kind must be one of {RATIO_KINDS}")
        bad = set(self.gradients) - set(GRADIENTS)
        if bad:
            raise ValueError(f"unknown gradients {sorted(bad)}; expected {GRADIENTS}")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ValueError(f"unknown observables {sorted(bad)}; expected {OBSERVABLES}")
        if not self.hop_left_base > 0:
            raise ValueError("hop_left_base must be positive")

    @classmethod
    def from_dict(cls, d):
        known = set(cls.__dataclass_fields__)
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown sweep keys: {sorted(unknown)}")
        return cls(**d)

    def to_dict(self):
        d = asdict(self)
        for k in ("sizes", "ratios", "gradients", "observables"):
            d[k] = list(d[k])
        return d

    def config_hash(self):
        """Short digest of the physics-relevant settings (not the output dir)."""
        d = self.to_dict()
        d.pop("output_dir")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:12]

    def model_params(self, n_sites, ratio):
        r2 = ratio ** 2 if self.ratio_kind == "sqrt" else ratio
        return ModelParams(
            n_sites=n_sites,
            energy_base=self.energy_base,
            energy_gradient="energies" in self.gradients,
            hop_left_base=self.hop_left_base,
            hop_right_base=r2 * self.hop_left_base,
            hop_gradient="hops" in self.gradients,
        )


@dataclass
class SweepRecord:
    """Observables at one grid point; ``errors`` maps observable to error class."""

    N: int
    ratio: float
    flags: str
    gap: float = math.nan
    tau: float = math.nan
    xi: float = math.nan
    overlap: float = math.nan
    errors: dict = field(default_factory=dict)
    wall_time: float = 0.0

    @property
    def key(self):
        return (self.N, self.ratio)

    def ok(self, observable):
        return observable not in self.errors and np.isfinite(getattr(self, observable))


def _evaluate(name, model, config):
    if name == "gap":
        return model_gap(model)
    if name == "tau":
        return relaxation_time(model, policy=config.crossing_policy,
                               reading=config.reading).tau
    if name == "xi":
        return model_localization(model).xi
    if name == "overlap":
        return mode_overlap_metric(model)
    raise ValueError(name)


def run_point(config, n_sites, ratio):
    """Evaluate one grid point; domain errors are recorded, not raised."""
    start = time.perf_counter()
    rec = SweepRecord(N=n_sites, ratio=ratio, flags="+".join(config.gradients) or "none")
    try:
        model = build_model(config.model_params(n_sites, ratio))
    except (SkinRelaxError, ValueError) as exc:
        for name in config.observables:
            rec.errors[name] = type(exc).__name__
        rec.wall_time = time.perf_counter() - start
        return rec
    for name in config.observables:
        try:
            setattr(rec, name, float(_evaluate(name, model, config)))
        except (SkinRelaxError, ValueError, ArithmeticError) as exc:
            rec.errors[name] = type(exc).__name__
    rec.wall_time = time.perf_counter() - start
    return rec


def _run_point_args(args):
    return run_point(*args)


def run_sweep(config, workers=1):
    """All grid points of ``config``, sorted by ``(N, ratio)``."""
    points = [(config, n, r) for n in config.sizes for r in config.ratios]
    if workers is None or workers <= 1:
        records = [run_point(*p) for p in points]
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_run_point_args, points))
    return sorted(records, key=lambda rec: rec.key)


@dataclass
class PowerLawFit:
    """``ln y = slope ln x + intercept`` by ordinary least squares."""

    slope: float
    intercept: float
    r_squared: float
    fit_range: tuple
    n_points: int

    def to_dict(self):
        d = asdict(self)
        d["fit_range"] = list(self.fit_range)
        return d


def fit_power_law_xy(x, y):
    """Log-log least-squares fit of raw arrays.

    Raises
    ------
    ValueError
        Fewer than 3 points or a nonpositive value.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 3:
        raise ValueError(f"need at least 3 points for a power-law fit, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("power-law fit needs finite positive values")
    lx, ly = np.log(x), np.log(y)
    slope, intercept = np.polyfit(lx, ly, 1)
    resid = ly - (slope * lx + intercept)
    ss_tot = np.sum((ly - ly.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return PowerLawFit(float(slope), float(intercept), float(min(max(r2, 0.0), 1.0)),
                       (float(x.min()), float(x.max())), int(x.size))


def fit_power_law(records, y="tau", x="N", fit_range=None, ratio=None):
    """Fit ``y ~ x^slope`` over records, skipping points whose ``y`` failed.

    ``fit_range = (lo, hi)`` restricts ``x`` inclusively; ``ratio`` selects
    records with that hop ratio.
    """
    xs, ys = [], []
    for rec in records:
        if ratio is not None and rec.ratio != ratio:
            continue
        xv = getattr(rec, x)
        if fit_range is not None and not fit_range[0] <= xv <= fit_range[1]:
            continue
        if not rec.ok(y):
            continue
        xs.append(xv)
        ys.append(getattr(rec, y))
    return fit_power_law_xy(xs, ys)


def linear_fit(x, y):
    """Ordinary least squares ``y = slope x + intercept`` with r-squared."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = np.sum((y - y.mean()) ** 2)
    r2 = 1.0 - np.sum(resid ** 2) / ss_tot if ss_tot > 0 else 1.0
    return float(slope), float(intercept), float(r2)


CSV_FIELDS = ("N", "ratio", "flags", "gap", "tau", "xi", "overlap", "errors")


def _fmt(value):
    return repr(float(value))


def write_records_csv(records, path):
    """One row per record; failed observables are empty with the error class
    listed in ``errors``. Wall times are left out so the file is reproducible."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_FIELDS)
        for rec in records:
            row = [rec.N, _fmt(rec.ratio), rec.flags]
            for name in OBSERVABLES:
                row.append("" if name in rec.errors else _fmt(getattr(rec, name)))
            row.append(";".join(f"{k}:{v}" for k, v in sorted(rec.errors.items())))
            w.writerow(row)


def read_records_csv(path):
    records = []
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            errors = dict(item.split(":") for item in row["errors"].split(";") if item)
            rec = SweepRecord(N=int(row["N"]), ratio=float(row["ratio"]),
                              flags=row["flags"], errors=errors)
            for name in OBSERVABLES:
                if row[name]:
                    setattr(rec, name, float(row[name]))
            records.append(rec)
    return records


def summarize(config, records):
    """Power-law fits of every observable against N, one per ratio."""
    fits = {}
    for ratio in config.ratios:
        for name in config.observables:
            try:
                fit = fit_power_law(records, y=name, ratio=ratio)
                fits[f"{name}@{ratio!r}"] = fit.to_dict()
            except ValueError as exc:
                fits[f"{name}@{ratio!r}"] = {"error": str(exc)}
    failed = [{"N": r.N, "ratio": r.ratio, "errors": r.errors} for r in records if r.errors]
    return {
        "schema_version": SCHEMA_VERSION,
        "config_hash": config.config_hash(),
        "config": config.to_dict(),
        "n_records": len(records),
        "failed": failed,
        "fits": fits,
    }


def write_outputs(config, records, out_dir=None):
    """Write ``sweep_<hash>.csv`` and ``sweep_<hash>.json``; return both paths.

    Raises
    ------
    OSError
        If the output directory cannot be created or written.
    """
    out = Path(config.output_dir if out_dir is None else out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stem = f"sweep_{config.config_hash()}"
    csv_path = out / f"{stem}.csv"
    json_path = out / f"{stem}.json"
    write_records_csv(records, csv_path)
    with open(json_path, "w") as fh:
        json.dump(summarize(config, records), fh, indent=2, sort_keys=True)
    return csv_path, json_path
