"""Command-line front end: flat dotted-key configs, experiment presets,
run/convergence/compare/check subcommands, energy CSVs and legacy-ASCII
VTK snapshots."""
import argparse
import os
import sys
from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from . import diagnostics as dg
from . import interface_calculus as ic
from .discrete_system import (ENTROPY_STABLE, STANDARD_MIDPOINT,
                              eval_scalar_fields)
from .newton_solver import NewtonConfig
from .simulation_driver import (Droplet, Scenario, build_problem,
                                max_time_step, run)

SCHEME_NAMES = {"entropy": ENTROPY_STABLE, "midpoint": STANDARD_MIDPOINT}
SCHEME_NAMES_INV = {v: k for k, v in SCHEME_NAMES.items()}


# ---------------------------------------------------------------- Config
@dataclass(frozen=True)
class Config:
    scenario: Scenario
    out_dir: str = "."
    samples_per_element: int = 2


_SCALAR_KEYS = {
    "box.x0": float, "box.x1": float, "box.y0": float, "box.y1": float,
    "mesh.nx": int, "mesh.ny": int,
    "materials.rho1": float, "materials.rho2": float,
    "materials.mu1": float, "materials.mu2": float,
    "physics.sigma": float, "physics.gravity": float,
    "time.dt": float, "time.t_end": float,
    "scheme.name": str, "scheme.C": float,
    "init.split_x": float,
    "newton.rel_tol": float, "newton.abs_tol": float, "newton.max_iter": int,
    "output.dir": str, "output.snapshot_every": int,
    "output.samples_per_element": int,
    "run.name": str, "run.reproducible": bool,
    "run.allow_dt_above_max": bool,
}


class ConfigError(ValueError):
    pass


def _parse_bool(s):
    if s.lower() in ("true", "yes", "on", "1"):
        return True
    if s.lower() in ("false", "no", "off", "0"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _droplet_key(key):
    """('droplet3', 'cx') for 'droplet3.cx', else None."""
    parts = key.split(".")
    if len(parts) == 2 and parts[0].startswith("droplet") and \
            parts[0][7:].isdigit() and parts[1] in ("cx", "cy", "r"):
        return int(parts[0][7:]), parts[1]
    return None


def parse_config(text):
    """Config from 'key = value' lines; '#' comments; unknown keys are
    rejected with the offending line number."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {line.strip()!r}")
        key, val = (s.strip() for s in body.split("=", 1))
        if key in raw:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        if key not in _SCALAR_KEYS and _droplet_key(key) is None:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        raw[key] = (val, lineno)
    return _build_config(raw)


def _build_config(raw):
    vals = {}
    droplets = {}
    for key, (txt, lineno) in raw.items():
        dk = _droplet_key(key)
        try:
            if dk is not None:
                droplets.setdefault(dk[0], {})[dk[1]] = float(txt)
            else:
                typ = _SCALAR_KEYS[key]
                vals[key] = _parse_bool(txt) if typ is bool else typ(txt)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}")
    for req in ("mesh.nx", "mesh.ny"):
        if req not in vals:
            raise ConfigError(f"missing required key {req!r}")
    drops = []
    for idx in sorted(droplets):
        d = droplets[idx]
        missing = {"cx", "cy", "r"} - set(d)
        if missing:
            raise ConfigError(f"droplet{idx} missing {sorted(missing)}")
        drops.append(Droplet(center=(d["cx"], d["cy"]), radius=d["r"]))
    scheme_name = vals.get("scheme.name", "entropy")
    if scheme_name not in SCHEME_NAMES:
        raise ConfigError(f"scheme.name must be one of "
                          f"{sorted(SCHEME_NAMES)}, got {scheme_name!r}")
    newton = NewtonConfig(
        rel_tol=vals.get("newton.rel_tol", 1e-8),
        abs_tol=vals.get("newton.abs_tol", 1e-11),
        max_iter=vals.get("newton.max_iter", 20))
    sc = Scenario(
        box=((vals.get("box.x0", 0.0), vals.get("box.x1", 1.0)),
             (vals.get("box.y0", 0.0), vals.get("box.y1", 1.0))),
        n_elems=(vals["mesh.nx"], vals["mesh.ny"]),
        rho1=vals.get("materials.rho1", 1.0),
        rho2=vals.get("materials.rho2", 1.0),
        mu1=vals.get("materials.mu1", 0.0),
        mu2=vals.get("materials.mu2", 0.0),
        sigma=vals.get("physics.sigma", 1.0),
        gravity=vals.get("physics.gravity", 0.0),
        dt=vals.get("time.dt", 1e-3),
        t_end=vals.get("time.t_end", 1.0),
        C=vals.get("scheme.C", 0.0),
        scheme=SCHEME_NAMES[scheme_name],
        droplets=tuple(drops),
        split_x=vals.get("init.split_x"),
        snapshot_every=vals.get("output.snapshot_every", 0),
        allow_dt_above_max=vals.get("run.allow_dt_above_max", False),
        reproducible=vals.get("run.reproducible", False),
        newton=newton,
        name=vals.get("run.name", "run"))
    return Config(scenario=sc, out_dir=vals.get("output.dir", "."),
                  samples_per_element=vals.get(
                      "output.samples_per_element", 2))


def serialize_config(cfg):
    """Text that parses back to an equal Config."""
    sc = cfg.scenario
    lines = []

    def put(key, value):
        if isinstance(value, bool):
            value = "true" if value else "false"
        elif isinstance(value, float):
            value = format(value, ".17g")
        lines.append(f"{key} = {value}")

    put("box.x0", sc.box[0][0])
    put("box.x1", sc.box[0][1])
    put("box.y0", sc.box[1][0])
    put("box.y1", sc.box[1][1])
    put("mesh.nx", sc.n_elems[0])
    put("mesh.ny", sc.n_elems[1])
    put("materials.rho1", sc.rho1)
    put("materials.rho2", sc.rho2)
    put("materials.mu1", sc.mu1)
    put("materials.mu2", sc.mu2)
    put("physics.sigma", sc.sigma)
    put("physics.gravity", sc.gravity)
    put("time.dt", sc.dt)
    put("time.t_end", sc.t_end)
    put("scheme.name", SCHEME_NAMES_INV[sc.scheme])
    put("scheme.C", sc.C)
    if sc.split_x is not None:
        put("init.split_x", sc.split_x)
    for i, d in enumerate(sc.droplets, start=1):
        put(f"droplet{i}.cx", d.center[0])
        put(f"droplet{i}.cy", d.center[1])
        put(f"droplet{i}.r", d.radius)
    put("newton.rel_tol", sc.newton.rel_tol)
    put("newton.abs_tol", sc.newton.abs_tol)
    put("newton.max_iter", sc.newton.max_iter)
    put("output.dir", cfg.out_dir)
    put("output.snapshot_every", sc.snapshot_every)
    put("output.samples_per_element", cfg.samples_per_element)
    put("run.name", sc.name)
    put("run.reproducible", sc.reproducible)
    put("run.allow_dt_above_max", sc.allow_dt_above_max)
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- presets
def preset_config(name):
    if name.startswith("static-droplet-"):
        n = int(name.rsplit("-", 1)[1])
        if n not in (20, 40, 80):
            raise ConfigError(f"unknown preset {name!r}")
        sc = Scenario(
            box=((0.0, 8.0), (0.0, 8.0)), n_elems=(n, n),
            rho1=1.0, rho2=0.1, mu1=0.0, mu2=0.0, sigma=73.0,
            dt=1e-3, t_end=0.05, C=0.0,
            droplets=(Droplet(center=(4.0, 4.0), radius=2.0),),
            name=name)
        return Config(scenario=sc)
    if name == "coalescence-2d":
        sc = Scenario(
            box=((0.0, 1.0), (0.0, 1.0)), n_elems=(50, 50),
            rho1=100.0, rho2=1.0, mu1=1.0, mu2=1.0, sigma=0.1,
            dt=0.1, t_end=80.0, C=0.4,
            droplets=(Droplet(center=(0.4, 0.5), radius=0.25),
                      Droplet(center=(0.78, 0.5), radius=0.1)),
            split_x=0.665, allow_dt_above_max=True, name=name)
        return Config(scenario=sc)
    raise ConfigError(f"unknown preset {name!r}; available: "
                      f"static-droplet-20/40/80, coalescence-2d")


# ------------------------------------------------------------ VTK writer
def write_vtk(path, state, system, layout, model, samples_per_element=2):
    """Legacy-ASCII structured grid with point data u (vector) and p, phi,
    v, rho (scalars) on a uniform sampling lattice."""
    ns = [n * samples_per_element + 1 for n in system.n_elems]
    axes = [np.linspace(a, b, n) for (a, b), n in zip(system.box, ns)]
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.ravel(order="F") for m in mesh], axis=-1)
    npts = pts.shape[0]
    uc = [state.coeffs[layout.slice_u(k)] for k in range(system.d)]
    u = np.stack([system.eval_field(system.velocity[k], uc[k], pts)
                  for k in range(system.d)], axis=-1)
    p = system.eval_field(system.scalar, state.coeffs[layout.slice_p], pts)
    phi = system.eval_field(system.scalar, state.coeffs[layout.slice_phi],
                            pts)
    v = system.eval_field(system.scalar, state.coeffs[layout.slice_v], pts)
    rho = ic.density(phi, model)
    dims = ns + [1] * (3 - len(ns))
    with open(path, "w") as fh:
        fh.write("# vtk DataFile Version 3.0\n")
        fh.write(f"two-phase flow state t={state.t:.17g} n={state.n}\n")
        fh.write("ASCII\nDATASET STRUCTURED_GRID\n")
        fh.write("DIMENSIONS {} {} {}\n".format(*dims))
        fh.write(f"POINTS {npts} double\n")
        for q in pts:
            row = list(q) + [0.0] * (3 - len(q))
            fh.write("{:.9g} {:.9g} {:.9g}\n".format(*row))
        fh.write(f"POINT_DATA {npts}\n")
        fh.write("VECTORS velocity double\n")
        for q in u:
            row = list(q) + [0.0] * (3 - len(q))
            fh.write("{:.9g} {:.9g} {:.9g}\n".format(*row))
        for name, data in (("pressure", p), ("levelset", phi),
                           ("auxiliary", v), ("density", rho)):
            fh.write(f"SCALARS {name} double 1\nLOOKUP_TABLE default\n")
            for val in data:
                fh.write(f"{val:.9g}\n")


# ----------------------------------------------------------- subcommands
def _apply_overrides(cfg, args):
    sc = cfg.scenario
    changes = {}
    if args.dt is not None:
        changes["dt"] = args.dt
    if args.mesh is not None:
        try:
            nx, ny = (int(s) for s in args.mesh.lower().split("x"))
        except ValueError:
            raise ConfigError(f"--mesh expects NxN, got {args.mesh!r}")
        changes["n_elems"] = (nx, ny)
    if args.scheme is not None:
        changes["scheme"] = SCHEME_NAMES[args.scheme]
    if args.snapshots is not None:
        changes["snapshot_every"] = args.snapshots
    if args.reproducible:
        changes["reproducible"] = True
    if changes:
        sc = replace(sc, **changes)
    out = args.out if args.out is not None else cfg.out_dir
    return replace(cfg, scenario=sc, out_dir=out)


def _execute(cfg, log=print):
    sc = cfg.scenario
    os.makedirs(cfg.out_dir, exist_ok=True)
    system, layout, model, dsys = build_problem(sc)
    g = dsys.params.groups
    dt_max = max_time_step(system, model, g.We)
    log(f"[{sc.name}] mesh {sc.n_elems[0]}x{sc.n_elems[1]}, "
        f"scheme {SCHEME_NAMES_INV[sc.scheme]}, kernels "
        f"{_kernels.backend_name}")
    log(f"[{sc.name}] Re={g.Re:g} We={g.We:g} 1/Fr^2={g.Fr_inv_sq:g} "
        f"eps={model.eps_width:g} dt={sc.dt:g} dt_max={dt_max:g}")
    csv_path = os.path.join(cfg.out_dir, f"{sc.name}_energy.csv")
    n_steps = int(round(sc.t_end / sc.dt))
    every = max(1, n_steps // 20)

    def progress(step, total, rec, report):
        if step % every == 0 or step == total:
            log(f"[{sc.name}] step {step}/{total} t={rec.t:.4g} "
                f"E={rec.E_total:.9g} defect={rec.defect:.3e} "
                f"iters={report.iterations}")

    art = run(sc, energy_csv=csv_path,
              checkpoint_on_abort=os.path.join(cfg.out_dir,
                                               f"{sc.name}_abort.ckpt"),
              progress=progress)
    for step, st in art.snapshots:
        vtk = os.path.join(cfg.out_dir, f"{sc.name}_{step:05d}.vtk")
        write_vtk(vtk, st, system, layout, model, cfg.samples_per_element)
    log(f"[{sc.name}] wrote {csv_path}"
        + (f" and {len(art.snapshots)} snapshots" if art.snapshots else ""))
    return art, (system, layout, model, dsys)


def cmd_run(args):
    with open(args.config) as fh:
        cfg = parse_config(fh.read())
    cfg = _apply_overrides(cfg, args)
    _execute(cfg)
    return 0


def cmd_preset(args):
    cfg = _apply_overrides(preset_config(args.name), args)
    _execute(cfg)
    return 0


def cmd_convergence(args, log=print):
    if args.study != "static-droplet":
        raise ConfigError(f"unknown study {args.study!r}")
    jumps = {}
    for n in (20, 40, 80):
        cfg = _apply_overrides(preset_config(f"static-droplet-{n}"), args)
        art, (system, layout, model, dsys) = _execute(cfg)
        jumps[n] = dg.pressure_jump(art.final_state, system, layout, model)
    exact = 73.0 / 2.0
    log("")
    log("mesh    pressure jump   error")
    errs = {}
    for n in (20, 40, 80):
        errs[n] = abs(jumps[n] - exact)
        log(f"{n:>2}x{n:<2}  {jumps[n]:>13.4f}   {errs[n]:.4f}")
    orders = [np.log2(errs[a] / errs[b]) for a, b in ((20, 40), (40, 80))]
    log(f"exact jump sigma/r = {exact:.4f}")
    log(f"observed orders: {orders[0]:.2f} (20->40), "
        f"{orders[1]:.2f} (40->80)")
    return {"jumps": jumps, "errors": errs, "orders": orders}


def cmd_compare(args, log=print):
    if args.config in ("static-droplet-20", "static-droplet-40",
                       "static-droplet-80", "coalescence-2d"):
        cfg = preset_config(args.config)
    else:
        with open(args.config) as fh:
            cfg = parse_config(fh.read())
    cfg = _apply_overrides(cfg, args)
    results = {}
    for label, scheme in (("entropy", ENTROPY_STABLE),
                          ("midpoint", STANDARD_MIDPOINT)):
        sc = replace(cfg.scenario, scheme=scheme,
                     name=f"{cfg.scenario.name}-{label}")
        art, _ = _execute(replace(cfg, scenario=sc))
        results[label] = np.array([r.defect for r in art.records[1:]])
    de, dm = np.abs(results["entropy"]), np.abs(results["midpoint"])
    ratio = dm / np.maximum(de, 1e-300)
    frac = float(np.mean(ratio >= 10.0))
    log("")
    log(f"per-step |defect|: entropy median {np.median(de):.3e}, "
        f"midpoint median {np.median(dm):.3e}")
    log(f"steps with midpoint defect >= 10x entropy defect: "
        f"{100 * frac:.1f}%")
    return {"entropy": results["entropy"], "midpoint": results["midpoint"],
            "fraction_10x": frac}


# --------------------------------------------------------- property suite
def property_suite(rng_seed=1234):
    """(name, passed, detail) for each structural property: ramp
    smoothness, Dirac area, discrete chain rules, midpoint product rule,
    the alternative surface-tension identity under refinement, and the
    Jacobian finite-difference check."""
    from .spline_spaces import SplineSystem, build_dof_layout
    from .discrete_system import (DiscreteSystem, SchemeParams, State,
                                  surface_tension_alt_identity_check)
    rng = np.random.default_rng(rng_seed)
    out = []

    # C^3 continuity at the breakpoints: compare one-sided limits of the
    # piece polynomials exactly (the coefficient tables are dyadic, so the
    # evaluations at -1, 0, 1 are exact in floating point).
    from ._kernels import numpy_backend as _ref
    pieces = {-1.0: (None, _ref._DM), 0.0: (_ref._DM, _ref._DP),
              1.0: (_ref._DP, None)}
    worst = 0.0
    order4_jump = 0.0
    for x, (left_tab, right_tab) in pieces.items():
        for order in range(5):
            lv = (_ref._horner(left_tab[order], np.array([x]))[0]
                  if left_tab is not None else (0.0 if order else
                                               (1.0 if x > 0 else 0.0)))
            rv = (_ref._horner(right_tab[order], np.array([x]))[0]
                  if right_tab is not None else (0.0 if order else 1.0))
            if order <= 3:
                worst = max(worst, abs(lv - rv))
            elif x == 0.0:
                order4_jump = abs(lv - rv)
    ok = worst == 0.0 and order4_jump > 0.0
    out.append(("heaviside C3 continuity", ok,
                f"orders 0-3 mismatch {worst:.1e}, order-4 jump at 0 "
                f"{order4_jump:g}"))

    # Dirac unit area by Gauss quadrature.
    xg, wg = np.polynomial.legendre.leggauss(24)
    area = 0.0
    for a, b in ((-1.0, 0.0), (0.0, 1.0)):
        mid, hw = (a + b) / 2, (b - a) / 2
        area += hw * float(np.sum(wg * _kernels.hpoly(mid + hw * xg, 1)))
    err = abs(area - 1.0)
    out.append(("dirac unit area", err <= 1e-12, f"|area-1| = {err:.3e}"))

    # Discrete chain rules over 1e5 random pairs.
    m = ic.InterfaceModel(rho1=1.0, rho2=0.1, mu1=0.0, mu2=0.0,
                          eps_width=0.7)
    n = 100_000
    p0 = rng.uniform(-1.6, 1.6, n) * m.eps_width
    p1 = rng.uniform(-1.6, 1.6, n) * m.eps_width
    p1[: n // 10] = p0[: n // 10]  # include exactly-equal pairs
    rpa = ic.rho_prime_aux(p0, p1, m)
    res_r = ic.density(p1, m) - ic.density(p0, m) - rpa * (p1 - p0)
    scale_r = np.maximum(np.abs(ic.density(p1, m) - ic.density(p0, m)),
                         m.drho * 1e-3)
    err_r = float(np.max(np.abs(res_r) / scale_r))
    sig = ic.dirac_prime_aux(p0, p1, m)
    res_s = ic.dirac(p1, m) - ic.dirac(p0, m) - sig * (p1 - p0)
    # relative to the Dirac amplitude 5/(4 eps), the natural scale of the
    # quantities whose rounding the residual accumulates
    err_s = float(np.max(np.abs(res_s)) / (1.25 / m.eps_width))
    out.append(("density chain rule (1e5 pairs)", err_r <= 1e-12,
                f"max rel residual {err_r:.3e}"))
    out.append(("dirac chain rule (1e5 pairs)", err_s <= 1e-12,
                f"max rel residual {err_s:.3e}"))

    # Midpoint product rule [[ab]] = a_mid [[b]] + [[a]] b_mid.
    a0, a1, b0, b1 = rng.standard_normal((4, 10_000))
    lhs = a1 * b1 - a0 * b0
    rhs = 0.5 * (a0 + a1) * (b1 - b0) + (a1 - a0) * 0.5 * (b0 + b1)
    err_p = float(np.max(np.abs(lhs - rhs)
                         / np.maximum(np.abs(lhs), 1e-12)))
    out.append(("midpoint product rule", err_p <= 5e-13,
                f"max rel residual {err_p:.3e}"))

    # Alternative surface-tension identity under mesh refinement.  The
    # interface width is held fixed across the meshes so the defect is the
    # quadrature error of one and the same integrand, which must shrink
    # at second order.
    defects = []
    for n_el in (20, 40, 80):
        system = SplineSystem(box=((0.0, 8.0), (0.0, 8.0)),
                              n_elems=(n_el, n_el))
        mm = ic.InterfaceModel(rho1=1.0, rho2=0.1, mu1=0.0, mu2=0.0,
                               eps_width=1.0)
        phic = system.project_l2(
            system.scalar,
            lambda x: 2.0 - np.sqrt((x[..., 0] - 3.4) ** 2
                                    + (x[..., 1] - 4.6) ** 2))

        def w0(x):
            return (np.sin(np.pi * x[..., 0] / 8)
                    * (1.2 + np.cos(np.pi * x[..., 1] / 4)))

        def w1(x):
            return (np.sin(np.pi * x[..., 1] / 8)
                    * (0.7 + 0.5 * np.sin(np.pi * x[..., 0] / 4)))
        wc = [system.project_l2(system.velocity[0], w0),
              system.project_l2(system.velocity[1], w1)]
        lhs_i, rhs_i, defect = surface_tension_alt_identity_check(
            system, mm, phic, wc)
        defects.append(abs(defect) / max(abs(lhs_i), 1e-14))
    shrink = [defects[i] / defects[i + 1] for i in range(2)]
    ok = all(s >= 3.5 for s in shrink)
    out.append(("surface-tension identity refinement", ok,
                f"defect shrink factors {shrink[0]:.2f}, {shrink[1]:.2f}"))

    # Jacobian vs central finite differences on a small perturbed state.
    system = SplineSystem(box=((0.0, 1.0), (0.0, 1.0)), n_elems=(6, 6))
    layout = build_dof_layout(system)
    mm = ic.InterfaceModel(rho1=1.0, rho2=0.1, mu1=0.05, mu2=0.01,
                           eps_width=2 * system.h_K)
    groups = ic.DimensionlessGroups.from_physical(sigma=1.0, mu1=0.05,
                                                  gravity=0.5)
    worst_fd = 0.0
    for scheme in (ENTROPY_STABLE, STANDARD_MIDPOINT):
        params = SchemeParams(dt=1e-2, groups=groups, C=0.4, scheme=scheme)
        dsys = DiscreteSystem(system, layout, mm, params)
        c0 = 0.05 * rng.standard_normal(layout.n_total)
        c0[layout.slice_phi] += system.project_l2(
            system.scalar,
            lambda x: 0.3 - np.sqrt((x[..., 0] - 0.5) ** 2
                                    + (x[..., 1] - 0.5) ** 2))
        sn = State(coeffs=layout.expand(layout.reduce(c0)))
        x = dsys.pack(sn.coeffs + 0.01 * layout.expand(
            rng.standard_normal(layout.n_free)), 0.1)
        dsys.freeze_theta(sn.coeffs, dsys.unpack(x)[0])
        J = dsys.jacobian_reduced(sn, x)
        for _ in range(10):
            dx = rng.standard_normal(x.size)
            dx /= np.linalg.norm(dx)
            h = 1e-7
            rp = dsys.residual_reduced(sn, x + h * dx)
            rm = dsys.residual_reduced(sn, x - h * dx)
            fd = (rp - rm) / (2 * h)
            an = J @ dx
            worst_fd = max(worst_fd, float(
                np.linalg.norm(an - fd) / max(np.linalg.norm(fd), 1e-14)))
    out.append(("jacobian finite-difference check", worst_fd <= 1e-6,
                f"max rel directional error {worst_fd:.3e}"))
    return out


def cmd_check(args, log=print):
    results = property_suite()
    failed = 0
    for name, ok, detail in results:
        log(f"{'PASS' if ok else 'FAIL'}  {name}: {detail}")
        failed += 0 if ok else 1
    log(f"{len(results) - failed}/{len(results)} checks passed")
    return 0 if failed == 0 else 1


# ------------------------------------------------------------------ main
def _thread_cap():
    cap = os.environ.get("ENTROLEVEL_THREADS")
    if not cap:
        return
    try:
        limit = max(1, int(cap))
    except ValueError:
        return
    try:
        import threadpoolctl
        threadpoolctl.threadpool_limits(limits=limit)
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS",
                    "MKL_NUM_THREADS"):
            os.environ[var] = str(limit)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", default=None, help="output directory")
    common.add_argument("--snapshots", type=int, default=None,
                        help="steps between field snapshots (0 = none)")
    common.add_argument("--reproducible", action="store_true",
                        help="deterministic single-threaded mode")
    common.add_argument("--dt", type=float, default=None,
                        help="override the time step")
    common.add_argument("--mesh", default=None,
                        help="override the mesh, e.g. 40x40")
    common.add_argument("--scheme", choices=sorted(SCHEME_NAMES),
                        default=None, help="time integrator")
    p = argparse.ArgumentParser(
        prog="entrolevel",
        description="Energy-dissipative level-set two-phase flow solver")
    sub = p.add_subparsers(dest="command", required=True)
    pr = sub.add_parser("run", parents=[common],
                        help="run a config file")
    pr.add_argument("config")
    pr.set_defaults(func=cmd_run)
    pp = sub.add_parser("preset", parents=[common],
                        help="run a named preset")
    pp.add_argument("name")
    pp.set_defaults(func=cmd_preset)
    pc = sub.add_parser("convergence", parents=[common],
                        help="pressure-jump mesh study")
    pc.add_argument("study")
    pc.set_defaults(func=lambda a: (cmd_convergence(a), 0)[1])
    pm = sub.add_parser("compare-schemes", parents=[common],
                        help="entropy-stable vs standard midpoint")
    pm.add_argument("config", help="config file or preset name")
    pm.set_defaults(func=lambda a: (cmd_compare(a), 0)[1])
    ck = sub.add_parser("check", parents=[common],
                        help="run the structural property suite")
    ck.set_defaults(func=cmd_check)
    return p


def main(argv=None):
    _thread_cap()
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "reproducible", False):
        try:
            import threadpoolctl
            threadpoolctl.threadpool_limits(limits=1)
        except ImportError:
            pass
    try:
        return args.func(args)
    except (ConfigError, FileNotFoundError, ValueError,
            RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
