"""Reported quantities: energies, the per-step dissipation identity and its
defect, circularity, pressure jump, field extrema, and the energy CSV."""
import io
from dataclasses import dataclass, fields

import numpy as np

from . import interface_calculus as ic
from .discrete_system import eval_scalar_fields

CSV_HEADER = ("t,E_K,E_G,E_S,E_total,visc_diss,dc_diss,defect,"
              "max_div,max_speed,rho_min,rho_max")


@dataclass
class EnergyRecord:
    t: float
    E_K: float
    E_G: float
    E_S: float
    E_total: float
    visc_diss: float = 0.0
    dc_diss: float = 0.0
    defect: float = 0.0
    max_div: float = 0.0
    max_speed: float = 0.0
    rho_min: float = 0.0
    rho_max: float = 0.0

    def __post_init__(self):
        if abs(self.E_total - (self.E_K + self.E_G + self.E_S)) > \
                1e-9 * max(1.0, abs(self.E_total)):
            raise ValueError("E_total must equal E_K + E_G + E_S")
        if self.E_K < -1e-14 or self.E_S < -1e-14:
            raise ValueError("kinetic and surface energies must be >= 0")

    def row(self):
        vals = [getattr(self, f.name) for f in fields(self)]
        return ",".join(format(v, ".17g") for v in vals)


def write_energy_csv(records, path_or_file):
    """One row per record, full double precision."""
    def _write(fh):
        fh.write(CSV_HEADER + "\n")
        for r in records:
            fh.write(r.row() + "\n")
    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file,
                                                         "__fspath__"):
        with open(path_or_file, "w") as fh:
            _write(fh)
    else:
        _write(path_or_file)


def read_energy_csv(path):
    """Inverse of write_energy_csv: list of EnergyRecord."""
    with open(path) as fh:
        header = fh.readline().strip()
        if header != CSV_HEADER:
            raise ValueError(f"unexpected energy CSV header: {header!r}")
        names = [f.name for f in fields(EnergyRecord)]
        out = []
        for line in fh:
            vals = [float(tok) for tok in line.strip().split(",")]
            if len(vals) != len(names):
                raise ValueError("malformed energy CSV row")
            out.append(EnergyRecord(**dict(zip(names, vals))))
    return out


def _quadrature_fields(system, layout, coeffs):
    """(u, grad u, phi, grad phi) at all quadrature points."""
    stab = system.tables(system.scalar)
    uvals, ugrads = [], []
    for k in range(system.d):
        tab = system.tables(system.velocity[k])
        c = np.asarray(coeffs[layout.slice_u(k)])[tab.conn]
        uvals.append(np.einsum("elq,el->eq", tab.B0, c))
        ugrads.append(np.einsum("elqd,el->eqd", tab.B1, c))
    u = np.stack(uvals, axis=-1)
    gu = np.stack(ugrads, axis=-2)
    ph, gph = eval_scalar_fields(stab, coeffs[layout.slice_phi])
    return u, gu, ph, gph


def energies(state, system, layout, model, groups):
    """EnergyRecord with the energy fields, density bounds and max speed.

    E_K = int 1/2 rho |u|^2 ; E_G = (1/Fr^2) int rho y ;
    E_S = (1/We) int delta_eps(phi) ||grad phi||_eps, all on the assembly
    quadrature.
    """
    u, gu, ph, gph = _quadrature_fields(system, layout, state.coeffs)
    wq = system.wq
    rho = ic.density(ph, model)
    speed2 = np.einsum("eqk,eqk->eq", u, u)
    ek = float(np.einsum("eq,q->", 0.5 * rho * speed2, wq))
    y = system.qp_phys[..., system.d - 1]
    eg = float(groups.Fr_inv_sq * np.einsum("eq,q->", rho * y, wq))
    g = ic.reg_norm(gph, model.eps_norm)
    es = float((1.0 / groups.We) * np.einsum("eq,q->",
                                             ic.dirac(ph, model) * g, wq))
    div = np.abs(np.einsum("eqkk->eq", gu))
    return EnergyRecord(
        t=state.t, E_K=ek, E_G=eg, E_S=es, E_total=ek + eg + es,
        max_div=float(div.max()), max_speed=float(np.sqrt(speed2).max()),
        rho_min=float(rho.min()), rho_max=float(rho.max()))


def dissipation_identity(state_n, state_next, dsys, theta=None):
    """Per-step energy balance.

    Returns (lhs, rhs, defect) where lhs = [[E]]/dt, rhs = -(viscous
    dissipation) - (capturing dissipation) and defect = lhs - rhs; for the
    standard-midpoint scheme additionally returns the five-term defect
    decomposition of the midpoint energy error (kinetic cross term, two
    averaging mismatches, Taylor remainder of the Dirac jump, and the
    norm-regularizer term).
    """
    system, layout, model = dsys.sys, dsys.layout, dsys.m
    groups = dsys.params.groups
    dt = dsys.params.dt
    wq = system.wq
    e0 = energies(state_n, system, layout, model, groups)
    e1 = energies(state_next, system, layout, model, groups)
    lhs = (e1.E_total - e0.E_total) / dt

    mid = 0.5 * (state_n.coeffs + state_next.coeffs)
    um, gum, phm, gphm = _quadrature_fields(system, layout, mid)
    cvis = dsys.cvis0 * ic.viscosity(phm, model)
    sym = 0.5 * (gum + np.swapaxes(gum, -1, -2))
    visc = float(np.einsum(
        "eq,eq,q->", cvis, 2.0 * np.einsum("eqkj,eqkj->eq", sym, sym), wq))
    if theta is None:
        theta = dsys.frozen_theta
    if theta is None:
        theta = dsys.theta_dc(state_n.coeffs, state_next.coeffs)
    gnorm2 = np.einsum("eqkj,eqkj->eq", gum, gum)
    dc = float(np.einsum("e,eq,q->", theta, gnorm2, wq))
    rhs = -visc - dc
    defect = lhs - rhs
    out = {"lhs": lhs, "rhs": rhs, "defect": defect,
           "visc_diss": visc, "dc_diss": dc}

    from .discrete_system import STANDARD_MIDPOINT
    if dsys.params.scheme == STANDARD_MIDPOINT:
        out["decomposition"] = _midpoint_defect_terms(
            state_n, state_next, dsys, phm, gphm)
    return out


def _midpoint_defect_terms(state_n, state_next, dsys, phm, gphm):
    """Five quadrature integrals that make up the structural energy error
    of the plain midpoint scheme (the entropy-stable scheme removes all of
    them by construction)."""
    system, layout, model = dsys.sys, dsys.layout, dsys.m
    dt = dsys.params.dt
    sWe = 1.0 / dsys.params.groups.We
    wq = system.wq
    u0, _, ph0, gph0 = _quadrature_fields(system, layout, state_n.coeffs)
    u1, _, ph1, gph1 = _quadrature_fields(system, layout, state_next.coeffs)
    eps = model.eps_norm
    jmp_u2 = np.einsum("eqk,eqk->eq", u1 - u0, u1 - u0) / dt**2
    jmp_rho = (ic.density(ph1, model) - ic.density(ph0, model)) / dt
    t1 = dt**2 / 8.0 * float(np.einsum("eq,eq,q->", jmp_u2, jmp_rho, wq))

    d0 = ic.dirac(ph0, model)
    d1 = ic.dirac(ph1, model)
    dm = ic.dirac(phm, model)
    gm = ic.reg_norm(gphm, eps)
    g0 = ic.reg_norm(gph0, eps)
    g1 = ic.reg_norm(gph1, eps)
    ghalf = 0.5 * (g0 + g1)
    dhalf = 0.5 * (d0 + d1)
    c = sWe / dt
    t2 = -c * float(np.einsum("eq,eq,q->", d1 - d0, gm - ghalf, wq))
    t3 = -c * float(np.einsum("eq,eq,q->", g1 - g0,
                              dm * ghalf / gm - dhalf, wq))
    jphi = ph1 - ph0
    taylor_rem = (d1 - d0) - jphi * ic.dirac_deriv(phm, model, 1)
    t4 = c * float(np.einsum("eq,eq,q->", taylor_rem, gm, wq))
    t5 = c * eps**2 * float(np.einsum(
        "eq,eq,q->", ic.dirac_deriv(phm, model, 1) * jphi, 1.0 / gm, wq))
    terms = {"kinetic_cross": t1, "norm_average_mismatch": t2,
             "dirac_average_mismatch": t3, "dirac_taylor_remainder": t4,
             "norm_regularizer": t5}
    terms["total"] = t1 + t2 + t3 + t4 + t5
    return terms


def circularity(state, system, layout, model, n_sub=2):
    """gamma = 2 sqrt(pi * area(phi > 0)) / perimeter, with the area from a
    sharp sign test on a refined quadrature and the perimeter from the
    regularized surface Dirac.  2D only."""
    if system.d != 2:
        raise ValueError("circularity is defined for d = 2 only")
    stab = system.tables(system.scalar)
    ph, gph = eval_scalar_fields(stab, state.coeffs[layout.slice_phi])
    g = ic.reg_norm(gph, model.eps_norm)
    perim = float(np.einsum("eq,q->", ic.dirac(ph, model) * g, system.wq))
    area = float(np.einsum("eq,q->", (ph > 0).astype(float), system.wq))
    return 2.0 * np.sqrt(np.pi * area) / perim


def pressure_jump(state, system, layout, model, line=None, n_samples=400,
                  plateau_factor=2.0):
    """Young-Laplace jump: mean pressure over the inner plateau (phi >
    plateau_factor * eps along the sampling segment) minus the outer
    plateau (phi < -plateau_factor * eps).  When the droplet is too small
    relative to eps for the requested plateau the threshold is clamped to
    95% of the extreme phi on the segment so coarse meshes still report a
    jump.  The default segment spans the box through its center along x."""
    lo = np.array([b[0] for b in system.box], dtype=float)
    hi = np.array([b[1] for b in system.box], dtype=float)
    if line is None:
        mid = 0.5 * (lo + hi)
        a = mid.copy()
        b = mid.copy()
        a[0], b[0] = lo[0], hi[0]
        line = (a, b)
    a, b = (np.asarray(p, dtype=float) for p in line)
    s = np.linspace(0.0, 1.0, n_samples)[:, None]
    pts = a + s * (b - a)
    phi = system.eval_field(system.scalar, state.coeffs[layout.slice_phi],
                            pts)
    p = system.eval_field(system.scalar, state.coeffs[layout.slice_p], pts)
    if phi.max() <= 0 or phi.min() >= 0:
        raise ValueError("sampling segment does not cross the interface")
    thr_in = min(plateau_factor * model.eps_width, 0.95 * phi.max())
    thr_out = min(plateau_factor * model.eps_width, 0.95 * (-phi.min()))
    inner = phi > thr_in
    outer = phi < -thr_out
    if not inner.any() or not outer.any():
        raise ValueError("sampling segment does not cross the interface "
                         "with plateaus on both sides")
    return float(p[inner].mean() - p[outer].mean())


def field_extrema(state, system, layout, model):
    """(max speed, max |v|, (rho_min, rho_max), max |div u|) over all
    quadrature points."""
    u, gu, ph, _ = _quadrature_fields(system, layout, state.coeffs)
    stab = system.tables(system.scalar)
    v, _ = eval_scalar_fields(stab, state.coeffs[layout.slice_v])
    rho = ic.density(ph, model)
    speed = np.sqrt(np.einsum("eqk,eqk->eq", u, u))
    div = np.abs(np.einsum("eqkk->eq", gu))
    return (float(speed.max()), float(np.abs(v).max()),
            (float(rho.min()), float(rho.max())), float(div.max()))
