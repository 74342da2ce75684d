"""Acceptance criteria.

Each test prints exactly one PASS/FAIL line for its criterion and asserts
it.  The four underlying simulations (static droplet on 20^2/40^2/80^2 and
the two-droplet coalescence to t = 80) are computed once and cached under
tests/data/cache/ (see tests/_cache.py); with a cold cache this module
takes a few hours on one core, with a warm cache a few seconds.
"""
import numpy as np
import pytest

from entrolevel import diagnostics as dg
from entrolevel import scenario_cli as cli
from tests._cache import ensure_run

EXACT_JUMP = 36.5          # sigma / r = 73 / 2
SURFACE_E0 = 917.34        # sigma * 2 pi r
COALESCENCE_ES0 = 0.2199   # sigma * 2 pi (r1 + r2)
MAX_V_80 = 161.3           # (sigma / 2) * (5 / 4) / eps on the 80^2 mesh


def _report(num, name, ok, detail=""):
    line = f"criterion {num} ({name}): {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  [{detail}]"
    print(line)
    assert ok, line


@pytest.fixture(scope="module")
def static_runs():
    return {n: ensure_run(f"static-droplet-{n}") for n in (20, 40, 80)}


@pytest.fixture(scope="module")
def coalescence():
    return ensure_run("coalescence-2d")


def test_criterion_1_young_laplace_convergence(static_runs):
    jumps, errs = {}, {}
    for n, (records, state, system, layout, model, dsys) in \
            static_runs.items():
        jumps[n] = dg.pressure_jump(state, system, layout, model)
        errs[n] = abs(jumps[n] - EXACT_JUMP)
    orders = [np.log2(errs[20] / errs[40]), np.log2(errs[40] / errs[80])]
    ok = (errs[20] > errs[40] > errs[80]
          and errs[80] <= 0.4
          and min(orders) >= 1.5)
    _report(1, "Young-Laplace convergence", ok,
            f"jumps {jumps[20]:.3f}/{jumps[40]:.3f}/{jumps[80]:.3f}, "
            f"orders {orders[0]:.2f}/{orders[1]:.2f}")


def test_criterion_2_surface_energy(static_runs):
    records = static_runs[80][0]
    es0, esN = records[0].E_S, records[-1].E_S
    drift = abs(esN - es0) / es0
    ok = abs(es0 - SURFACE_E0) / SURFACE_E0 <= 0.02 and drift < 1e-3
    _report(2, "surface energy 80^2", ok,
            f"E_S(0)={es0:.4f}, drift {100 * drift:.5f}% over "
            f"{len(records) - 1} steps")


def test_criterion_3_auxiliary_magnitude(static_runs):
    records, state, system, layout, model, dsys = static_runs[80]
    _, vmax, _, _ = dg.field_extrema(state, system, layout, model)
    ok = abs(vmax - MAX_V_80) / MAX_V_80 <= 0.25
    _report(3, "auxiliary-field magnitude 80^2", ok,
            f"max|v| = {vmax:.2f} vs {MAX_V_80}")


def test_criterion_4_per_step_dissipation(static_runs, coalescence):
    worst, ok = 0.0, True
    runs = [static_runs[n][0] for n in (20, 40, 80)] + [coalescence[0]]
    names = ["static-20", "static-40", "static-80", "coalescence"]
    for name, records in zip(names, runs):
        dt = records[1].t - records[0].t
        rel_tol = 1e-8  # Newton tolerance of every acceptance preset
        for prev, rec in zip(records, records[1:]):
            bound = 50 * rel_tol * abs(prev.E_total) / dt
            worst = max(worst, abs(rec.defect) / bound)
            if abs(rec.defect) > bound:
                ok = False
            if rec.E_total > prev.E_total + abs(rec.defect) * dt:
                ok = False
    _report(4, "per-step dissipation identity", ok,
            f"worst |defect|/bound = {worst:.3f}")


def test_criterion_5_coalescence(coalescence):
    records, state, system, layout, model, dsys = coalescence
    dt = records[1].t - records[0].t
    es0 = records[0].E_S
    mono = all(
        r1.E_total <= r0.E_total + abs(r1.defect) * dt + 1e-12
        and r1.E_S <= r0.E_S + abs(r1.defect) * dt + 1e-12
        for r0, r1 in zip(records, records[1:]))
    gamma = dg.circularity(state, system, layout, model)
    ek = np.array([r.E_K for r in records])
    t = np.array([r.t for r in records])
    # single rise-then-decay kinetic-energy peak before t ~ 30, judged on a
    # lightly smoothed series to ignore step-scale wiggles
    w = 5
    smooth = np.convolve(ek, np.ones(w) / w, mode="valid")
    ts = t[w // 2: w // 2 + smooth.size]
    ipk = int(np.argmax(smooth))
    tol = 0.02 * smooth.max()
    single_peak = (np.all(np.diff(smooth[:ipk + 1]) >= -tol)
                   and np.all(np.diff(smooth[ipk:]) <= tol)
                   and ts[ipk] < 30.0 and smooth[ipk] > 10 * smooth[0])
    es_ok = abs(es0 - COALESCENCE_ES0) / COALESCENCE_ES0 <= 0.03
    ok = mono and es_ok and gamma >= 0.95 and single_peak
    _report(5, "coalescence to t=80", ok,
            f"monotone={mono}, E_S(0)={es0:.4f}, gamma(80)={gamma:.4f}, "
            f"KE peak at t={ts[ipk]:.1f}")


def test_criterion_6_divergence_free(static_runs, coalescence):
    runs = [static_runs[n][0] for n in (20, 40, 80)] + [coalescence[0]]
    worst = max(r.max_div for records in runs for r in records[1:])
    _report(6, "pointwise divergence-free", worst <= 1e-10,
            f"max |div u| = {worst:.3e}")


def test_criterion_7_density_maximum_principle(static_runs, coalescence):
    ok = True
    for records, lo, hi in [(static_runs[n][0], 0.1, 1.0)
                            for n in (20, 40, 80)] + \
            [(coalescence[0], 1.0, 100.0)]:
        for r in records:
            if abs(r.rho_min - lo) > 1e-10 * hi or \
                    abs(r.rho_max - hi) > 1e-10 * hi:
                ok = False
    _report(7, "density maximum principle", ok)


def test_criterion_8_scheme_comparison(tmp_path):
    args = type("Args", (), dict(
        config="static-droplet-20", dt=None, mesh=None, scheme=None,
        snapshots=None, reproducible=False, out=str(tmp_path)))
    res = cli.cmd_compare(args, log=lambda *a, **k: None)
    frac = res["fraction_10x"]
    med_e = float(np.median(np.abs(res["entropy"])))
    med_m = float(np.median(np.abs(res["midpoint"])))
    _report(8, "midpoint vs entropy defect", frac >= 0.9,
            f"{100 * frac:.0f}% of steps >= 10x "
            f"(medians {med_e:.2e} vs {med_m:.2e})")


def test_criterion_9_property_suite():
    results = cli.property_suite()
    failed = [name for name, ok, _ in results if not ok]
    detail = "; ".join(f"{name}: {info}" for name, ok, info in results
                       if not ok) or f"{len(results)} checks"
    _report(9, "property suite", not failed, detail)
