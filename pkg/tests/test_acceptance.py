"""Acceptance checks, one test per criterion.

Each test prints a single ``CRITERION k: PASS|FAIL ...`` line (also when
output capture is on) and then asserts. Runnable directly as a script:
``python tests/test_acceptance.py``.
"""

import math
import time

import numpy as np
import pytest
from scipy.linalg import null_space

from skinrelax import dynamics as dy
from skinrelax import elimination as el
from skinrelax import liouvillian as lv
from skinrelax.model import ModelParams, build_model, model_from_arrays
from skinrelax.relaxation import (
    localization_length,
    mode_overlap_metric,
    relaxation_time,
)
from skinrelax.sweep import fit_power_law_xy, linear_fit

TWO_PI = 2 * math.pi
E_FIG = TWO_PI * 1.0e6
JL_FIG = TWO_PI * 184.3
JR_FIG2 = TWO_PI * 118.0


def geometric_sizes(lo, hi, count):
    return np.unique(np.round(np.geomspace(lo, hi, count)).astype(int))


def chain(N, ratio_sqrt, gradient):
    return build_model(ModelParams.from_ratio(
        N, ratio_sqrt, hop_left_base=JL_FIG, energy_base=E_FIG,
        energy_gradient=True, hop_gradient=gradient))


def report(k, ok, detail):
    return k, bool(ok), f"CRITERION {k:>2}: {'PASS' if ok else 'FAIL'}  {detail}"


# criteria ----------------------------------------------------------------------


def criterion_1():
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(50):
        N = int(rng.integers(2, 9))
        E = rng.normal(size=N) * rng.uniform(0, 3)
        jl = rng.uniform(0.1, 3.0, N - 1)
        jr = rng.uniform(0.1, 3.0, N - 1) * (rng.random(N - 1) > 0.2)
        m = model_from_arrays(E, jl, jr)
        a = lv.full_spectrum(m, method="dense").eigenvalues
        b = lv.full_spectrum(m, method="sector").eigenvalues
        worst = max(worst, np.max(np.abs(a - b)) / m.rate_scale)
    elapsed = time.perf_counter() - start
    return report(1, worst < 1e-9 and elapsed < 30,
                  f"max |dense - sector| / rate = {worst:.2e} (< 1e-9), {elapsed:.1f} s (< 30 s)")


def criterion_2():
    start = time.perf_counter()
    worst_kernel = 0.0
    worst_same = 0.0
    for ratio_sqrt in (0.6, 0.8, 0.9, 1.0):
        for N in (2, 10, 50, 120, 200):
            closed = {}
            for gradient in (False, True):
                m = chain(N, ratio_sqrt, gradient)
                p = np.exp(lv.log_steady_state(m))
                ker = null_space(lv.build_population_generator(m))[:, 0]
                ker = ker / ker.sum()
                worst_kernel = max(worst_kernel, np.max(np.abs(ker - p)))
                closed[gradient] = p
            worst_same = max(worst_same, np.max(np.abs(closed[True] - closed[False])))
    elapsed = time.perf_counter() - start
    ok = worst_kernel < 1e-10 and worst_same < 1e-10 and elapsed < 10
    return report(2, ok, f"kernel vs product form L_inf = {worst_kernel:.2e}, "
                         f"gradient vs homogeneous = {worst_same:.2e} (< 1e-10), {elapsed:.1f} s")


def _reciprocal_scaling(gradient):
    sizes = geometric_sizes(40, 200, 7)
    taus, gaps = [], []
    for N in sizes:
        m = chain(N, 1.0, gradient)
        res = relaxation_time(m)
        taus.append(res.tau)
        gaps.append(res.delta_used)
    return sizes, np.array(taus), np.array(gaps)


def criterion_3():
    start = time.perf_counter()
    sizes, taus, gaps = _reciprocal_scaling(False)
    exact = 2 * JL_FIG * (1 - np.cos(np.pi / sizes))
    gap_err = np.max(np.abs(gaps - exact) / exact)
    s_tau = fit_power_law_xy(sizes, taus).slope
    s_gap = fit_power_law_xy(sizes, gaps).slope
    elapsed = time.perf_counter() - start
    ok = abs(s_tau - 2) <= 0.1 and gap_err < 1e-8 and abs(s_gap + 2) <= 0.05 and elapsed < 120
    return report(3, ok, f"tau slope {s_tau:.4f} (2 +- 0.1), gap slope {s_gap:.4f} (-2 +- 0.05), "
                         f"gap vs 2J(1-cos(pi/N)) rel {gap_err:.1e} (< 1e-8), N = {sizes.tolist()}")


def criterion_4():
    start = time.perf_counter()
    sizes, taus, _ = _reciprocal_scaling(True)
    s_tau = fit_power_law_xy(sizes, taus).slope
    elapsed = time.perf_counter() - start
    return report(4, abs(s_tau - 1) <= 0.1 and elapsed < 120,
                  f"gradient reciprocal tau slope {s_tau:.4f} (1 +- 0.1), {elapsed:.1f} s")


def criterion_5():
    start = time.perf_counter()
    changes = {}
    for gradient in (False, True):
        g100 = lv.model_gap(chain(100, 0.8, gradient))
        g200 = lv.model_gap(chain(200, 0.8, gradient))
        changes["gradient" if gradient else "homogeneous"] = abs(g200 - g100) / g100
    elapsed = time.perf_counter() - start
    ok = all(c < 0.01 for c in changes.values()) and elapsed < 60
    detail = ", ".join(f"{k} {100 * v:.3f}%" for k, v in changes.items())
    return report(5, ok, f"gap change N=100 -> 200: {detail} (< 1%)")


def criterion_6():
    start = time.perf_counter()
    sizes = geometric_sizes(200, 1000, 13)
    taus = np.array([relaxation_time(chain(N, 0.8, True)).tau for N in sizes])
    slope = fit_power_law_xy(sizes, taus).slope
    width = 5
    windows = [fit_power_law_xy(sizes[i:i + width], taus[i:i + width]).slope
               for i in range(len(sizes) - width + 1)]
    distance = np.abs(np.array(windows) - 0.2)
    trending = bool(np.all(np.diff(distance) <= 0))
    elapsed = time.perf_counter() - start
    ok = 0.15 <= slope <= 0.35 and trending and elapsed < 600
    return report(6, ok, f"tau slope over [200, 1000] = {slope:.4f} (in [0.15, 0.35]); "
                         f"sliding-window slopes {windows[0]:.4f} -> {windows[-1]:.4f}, "
                         f"approaching 0.2 monotonically: {trending}")


def criterion_7():
    start = time.perf_counter()
    lines = []
    ok = True
    for ratio_sqrt in (0.6, 0.8, 0.9):
        fits, profiles = {}, {}
        for N in (50, 100):
            m = chain(N, ratio_sqrt, False)
            p = lv.steady_state(m)
            fits[N] = localization_length(p, hop_ratio=ratio_sqrt ** 2)
            profiles[N] = p
        analytic = 1 / math.log(1 / ratio_sqrt ** 2)
        agree = abs(fits[50].xi - fits[100].xi) / fits[100].xi
        match = max(abs(f.xi - analytic) / analytic for f in fits.values())
        overlap = np.max(np.abs(profiles[50] - profiles[100][:50]))
        ok &= agree < 0.02 and match < 0.02
        if ratio_sqrt == 0.8:
            ok &= overlap < 1e-6
        lines.append(f"r={ratio_sqrt}: xi {fits[100].xi:.4f} (sizes {100 * agree:.1e}%, "
                     f"analytic {100 * match:.1e}%), profile overlap {overlap:.1e}")
    elapsed = time.perf_counter() - start
    ok &= elapsed < 30
    return report(7, ok, "; ".join(lines) + " [profile clause checked at r=0.8]")


def criterion_8():
    sizes = geometric_sizes(20, 120, 9)
    metric = [mode_overlap_metric(chain(N, 0.8, False)) for N in sizes]
    _, _, r2 = linear_fit(sizes, metric)
    decade = geometric_sizes(100, 1000, 7)
    gmetric = [mode_overlap_metric(chain(N, 0.8, True)) for N in decade]
    growth = fit_power_law_xy(decade, gmetric).slope
    ok = r2 > 0.99 and 0.15 <= growth <= 0.5
    return report(8, ok, f"homogeneous metric vs N r^2 = {r2:.5f} (> 0.99); gradient growth "
                         f"exponent over N in [100, 1000] = {growth:.4f} (in [0.15, 0.5])")


def criterion_9():
    sizes = geometric_sizes(20, 120, 9)
    hom = [relaxation_time(chain(N, 0.8, False)).tau_delta for N in sizes]
    grad = [relaxation_time(chain(N, 0.8, True)).tau_delta for N in sizes]
    _, _, r2 = linear_fit(sizes, hom)
    slope = fit_power_law_xy(sizes, grad).slope
    ok = r2 > 0.99 and slope < 0.5
    return report(9, ok, f"homogeneous tau*gap vs N r^2 = {r2:.5f} (> 0.99); gradient tau*gap "
                         f"log-log slope = {slope:.4f} (< 0.5), N = {sizes.tolist()}")


def criterion_10():
    start = time.perf_counter()
    params = ModelParams(n_sites=20, energy_base=E_FIG, energy_gradient=True,
                         hop_left_base=JL_FIG, hop_right_base=JR_FIG2, hop_gradient=True)
    m = build_model(params)
    dense = lv.full_spectrum(m, method="dense")
    sector = lv.full_spectrum(m, method="sector")
    zeros = (dense.n_zero(), sector.n_zero())
    uniform = build_model(params.replace(energy_gradient=False))
    max_imag = max(
        np.max(np.abs(lv.full_spectrum(uniform, method=method).eigenvalues.imag))
        for method in ("dense", "sector")) / uniform.rate_scale
    coh = sector.sector == lv.COHERENCE
    expected = -(sector.m[coh] - sector.n[coh]) * E_FIG
    im_err = np.max(np.abs(sector.eigenvalues[coh].imag - expected)) / E_FIG
    elapsed = time.perf_counter() - start
    ok = zeros == (1, 1) and max_imag <= 1e-12 and im_err <= 1e-12 and elapsed < 60
    return report(10, ok, f"zero eigenvalues dense/sector = {zeros}; uniform-E max |Im|/rate (dense, sector) = "
                          f"{max_imag:.1e}; coherence Im vs -(m-n)E max rel {im_err:.1e}")


def criterion_11():
    start = time.perf_counter()
    phys = el.benchmark_params(n_sidebands=4, nu_ratio=0.02, coupling_ratio=0.05,
                               delta_r=0.0, delta_b=0.0)
    rep = el.validate_elimination(phys, tol=0.05)
    elapsed = time.perf_counter() - start
    bound = 5 * rep.excited_scale
    ok = rep.max_tv_distance < 0.05 and rep.max_excited_population < bound and elapsed < 120
    return report(11, ok, f"max TV distance {rep.max_tv_distance:.4f} (< 0.05); max excited "
                          f"population {rep.max_excited_population:.2e} (< {bound:.2e}); "
                          f"{elapsed:.1f} s")


def criterion_12():
    rng = np.random.default_rng(12)
    worst = {"eigen-integrator": 0.0, "eigen-analytic": 0.0, "integrator-analytic": 0.0}
    drift = 0.0
    for _ in range(20):
        N = int(rng.integers(2, 7))
        m = model_from_arrays(rng.normal(size=N) * 2, rng.uniform(0.1, 2, N - 1),
                              rng.uniform(0.1, 2, N - 1))
        rho0 = dy.random_density_matrix(N, rng)
        t = np.array([0.0, 0.2, 1.0, 3.0, 8.0])
        a = dy.evolve_eigen(m, rho0, t)
        b = dy.evolve_integrate(m, rho0, t, tol=1e-12)
        lam = lv.coherence_eigenvalues(m)
        off = ~np.eye(N, dtype=bool)
        c = rho0[off][None, :] * np.exp(np.outer(t, lam[off]))
        worst["eigen-integrator"] = max(worst["eigen-integrator"], np.max(np.abs(a - b)))
        worst["eigen-analytic"] = max(worst["eigen-analytic"], np.max(np.abs(a[:, off] - c)))
        worst["integrator-analytic"] = max(worst["integrator-analytic"],
                                           np.max(np.abs(b[:, off] - c)))
        for states in (a, b):
            drift = max(drift, np.max(np.abs(np.trace(states, axis1=1, axis2=2) - 1)))
    ok = max(worst.values()) < 1e-8 and drift < 1e-9
    detail = ", ".join(f"{k} {v:.1e}" for k, v in worst.items())
    return report(12, ok, f"{detail} (< 1e-8); trace drift {drift:.1e} (< 1e-9)")


CRITERIA = [criterion_1, criterion_2, criterion_3, criterion_4, criterion_5, criterion_6,
            criterion_7, criterion_8, criterion_9, criterion_10, criterion_11, criterion_12]


@pytest.mark.slow
@pytest.mark.parametrize("criterion", CRITERIA, ids=[f"criterion_{i + 1}" for i in range(12)])
def test_criterion(criterion, capsys):
    _, ok, line = criterion()
    with capsys.disabled():
        print("\n" + line)
    assert ok, line


if __name__ == "__main__":
    results = [c() for c in CRITERIA]
    for _, _, line in results:
        print(line)
    print(f"{sum(ok for _, ok, _ in results)}/{len(results)} criteria pass")
