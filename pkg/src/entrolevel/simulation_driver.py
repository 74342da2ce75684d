"""Time-stepping orchestration: initial projections, capillary time-step
bound, per-step Newton solve with one half-step retry, diagnostics capture,
checkpoints and snapshot-state collection."""
import struct
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse.linalg as spla

from . import diagnostics as dg
from . import interface_calculus as ic
from .discrete_system import (ENTROPY_STABLE, DiscreteSystem, SchemeParams,
                              State, eval_scalar_fields)
from .newton_solver import NewtonConfig, ReusableLU, solve_step
from .spline_spaces import SplineSystem, build_dof_layout

CHECKPOINT_MAGIC = b"ELVL"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Droplet:
    center: tuple
    radius: float


@dataclass(frozen=True)
class Scenario:
    """Full description of one run; everything the driver needs."""
    box: tuple                    # ((x0,x1),(y0,y1)[,(z0,z1)])
    n_elems: tuple
    rho1: float = 1.0
    rho2: float = 1.0
    mu1: float = 0.0
    mu2: float = 0.0
    sigma: float = 1.0
    gravity: float = 0.0
    dt: float = 1e-3
    t_end: float = 1.0
    C: float = 0.0
    scheme: str = ENTROPY_STABLE
    droplets: tuple = ()
    split_x: float = None         # droplet-assignment plane for phi0
    eps_factor: float = 2.0       # eps_width = eps_factor * h_K
    eps_norm: float = 1e-8
    snapshot_every: int = 0       # steps between stored snapshot states
    allow_dt_above_max: bool = False
    reproducible: bool = False
    newton: NewtonConfig = field(default_factory=NewtonConfig)
    name: str = "run"

    def __post_init__(self):
        if self.dt <= 0 or self.t_end < 0:
            raise ValueError("dt must be > 0 and t_end >= 0")
        d = len(self.n_elems)
        if len(self.box) != d:
            raise ValueError("box and n_elems dimension mismatch")
        lo = [b[0] for b in self.box]
        hi = [b[1] for b in self.box]
        for dr in self.droplets:
            if dr.radius <= 0:
                raise ValueError("droplet radii must be positive")
            for c, a, b in zip(dr.center, lo, hi):
                if not (a + dr.radius <= c <= b - dr.radius):
                    raise ValueError(
                        f"droplet at {dr.center} (r={dr.radius}) does not "
                        f"fit inside the box")


@dataclass
class RunArtifacts:
    records: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    snapshots: list = field(default_factory=list)  # (step, State)
    final_state: State = None
    aborted: bool = False


def build_problem(sc):
    """(system, layout, model, dsys) for a Scenario."""
    system = SplineSystem(box=sc.box, n_elems=sc.n_elems)
    layout = build_dof_layout(system)
    model = ic.InterfaceModel(
        rho1=sc.rho1, rho2=sc.rho2, mu1=sc.mu1, mu2=sc.mu2,
        eps_width=sc.eps_factor * system.h_K, eps_norm=sc.eps_norm)
    groups = ic.DimensionlessGroups.from_physical(
        sigma=sc.sigma, mu1=sc.mu1, gravity=sc.gravity)
    params = SchemeParams(dt=sc.dt, groups=groups, C=sc.C, scheme=sc.scheme)
    dsys = DiscreteSystem(system, layout, model, params)
    return system, layout, model, dsys


def max_time_step(system, model, We, safety=0.9):
    """Capillary bound 0.9 * sqrt(rho_bar h^3 We / 2 pi) with h the
    smallest physical element diagonal."""
    hs = 2.0 * system.scales / np.array(system.n_elems)
    h = float(np.sqrt(np.sum(hs**2)))
    rho_bar = 0.5 * (model.rho1 + model.rho2)
    return safety * float(np.sqrt(rho_bar * h**3 * We / (2.0 * np.pi)))


def signed_distance(sc):
    """phi0(x): signed distance to the droplet set, positive inside.  With
    a split plane each point uses only the droplet on its side, which keeps
    phi a plain distance function near each droplet."""
    drops = sc.droplets

    def f(x):
        x = np.asarray(x, dtype=float)
        if not drops:
            return np.zeros(x.shape[0])
        per = np.stack([
            d.radius - np.linalg.norm(x - np.asarray(d.center), axis=-1)
            for d in drops], axis=0)
        if sc.split_x is None or len(drops) == 1:
            return per.max(axis=0)
        which = (x[..., 0] > sc.split_x).astype(int)
        which = np.minimum(which, len(drops) - 1)
        return per[which, np.arange(x.shape[0])]
    return f


def solve_initial_aux(system, layout, model, groups, phi_coeffs):
    """v0 as the Galerkin solution of the auxiliary equation at t = 0 with
    u = 0 and both time levels equal to phi0."""
    stab = system.tables(system.scalar)
    ph, gph = eval_scalar_fields(stab, phi_coeffs)
    g = ic.reg_norm(gph, model.eps_norm)
    dh = ic.dirac(ph, model)
    sig = ic.dirac_prime_aux(ph, ph, model)
    sWe = 1.0 / groups.We
    wq = system.wq
    rhs_loc = (np.einsum("elq,eq->el", stab.B0, sWe * sig * g * wq)
               + np.einsum("elqd,eqd->el", stab.B1,
                           (sWe * dh / g)[..., None] * gph
                           * wq[None, :, None]))
    rhs = np.bincount(stab.conn.ravel(), weights=rhs_loc.ravel(),
                      minlength=layout.n_s)
    M = system.mass_matrix(system.scalar)
    return spla.spsolve(M.tocsc(), rhs)


def initialize(sc, system, layout, model, groups):
    """State at t = 0: u = 0, p = 0, phi = projected signed distance, v
    from the auxiliary equation."""
    coeffs = np.zeros(layout.n_total)
    phic = system.project_l2(system.scalar, signed_distance(sc))
    coeffs[layout.slice_phi] = phic
    coeffs[layout.slice_v] = solve_initial_aux(system, layout, model,
                                               groups, phic)
    return State(coeffs=coeffs, t=0.0, n=0)


def advance(state_n, dsys, cfg=NewtonConfig(), linear=None):
    """One accepted step: Newton solve, on failure one retry at dt/2, else
    RuntimeError.  Returns (state, EnergyRecord, SolveReport)."""
    state, report = solve_step(state_n, state_n.copy(), dsys, cfg,
                               linear=linear)
    if not report.converged:
        if linear is not None:
            linear.invalidate()
        half = DiscreteSystem(dsys.sys, dsys.layout, dsys.m,
                              dsys.params.with_dt(dsys.params.dt / 2))
        state, report = solve_step(state_n, state_n.copy(), half, cfg)
        if linear is not None:
            linear.invalidate()
        report.block_norms["halved_dt"] = True
        if not report.converged:
            raise RuntimeError(
                f"Newton failed at t={state_n.t:.6g} even after halving dt "
                f"(residual {report.final_norm:.3e})")
        dsys = half
    ident = dg.dissipation_identity(state_n, state, dsys)
    rec = dg.energies(state, dsys.sys, dsys.layout, dsys.m,
                      dsys.params.groups)
    rec.visc_diss = ident["visc_diss"]
    rec.dc_diss = ident["dc_diss"]
    rec.defect = ident["defect"]
    return state, rec, report


def run(sc, energy_csv=None, checkpoint_on_abort=None,
        progress=None):
    """Step the scenario to t_end.  energy_csv: optional path, written
    (complete) at the end and also on abort; snapshots of the state are
    kept every sc.snapshot_every steps (0 = none)."""
    system, layout, model, dsys = build_problem(sc)
    dt_max = max_time_step(system, model, dsys.params.groups.We)
    if sc.sigma > 0 and sc.dt > dt_max and not sc.allow_dt_above_max:
        raise ValueError(
            f"dt={sc.dt:g} exceeds the capillary bound dt_max={dt_max:g}; "
            f"set allow_dt_above_max to override")
    art = RunArtifacts()
    state = initialize(sc, system, layout, model, dsys.params.groups)
    rec0 = dg.energies(state, system, layout, model, dsys.params.groups)
    art.records.append(rec0)
    if sc.snapshot_every:
        art.snapshots.append((0, state.copy()))
    n_steps = int(round(sc.t_end / sc.dt))
    linear = ReusableLU()
    try:
        for step in range(1, n_steps + 1):
            state, rec, report = advance(state, dsys, sc.newton,
                                         linear=linear)
            art.records.append(rec)
            art.reports.append(report)
            if sc.snapshot_every and step % sc.snapshot_every == 0:
                art.snapshots.append((step, state.copy()))
            if progress is not None:
                progress(step, n_steps, rec, report)
    except RuntimeError:
        art.aborted = True
        if checkpoint_on_abort is not None:
            save_checkpoint(checkpoint_on_abort, state, layout)
        if energy_csv is not None:
            dg.write_energy_csv(art.records, energy_csv)
        raise
    art.final_state = state
    if energy_csv is not None:
        dg.write_energy_csv(art.records, energy_csv)
    return art


# ------------------------------------------------------------- checkpoints
def save_checkpoint(path, state, layout):
    """Versioned little-endian binary: magic, version, d, layout hash,
    step index, time, coefficient vector."""
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<IIQ", CHECKPOINT_VERSION, layout.d,
                             layout.layout_hash))
        fh.write(struct.pack("<qd", state.n, state.t))
        fh.write(np.asarray(state.coeffs, dtype="<f8").tobytes())


def load_checkpoint(path, layout):
    with open(path, "rb") as fh:
        if fh.read(4) != CHECKPOINT_MAGIC:
            raise ValueError("not a checkpoint file (bad magic)")
        version, d, lhash = struct.unpack("<IIQ", fh.read(16))
        if version != CHECKPOINT_VERSION:
            raise ValueError(f"unsupported checkpoint version {version}")
        if d != layout.d or lhash != layout.layout_hash:
            raise ValueError("checkpoint does not match this discretization")
        n, t = struct.unpack("<qd", fh.read(16))
        coeffs = np.frombuffer(fh.read(8 * layout.n_total),
                               dtype="<f8").astype(float)
    if coeffs.size != layout.n_total:
        raise ValueError("checkpoint truncated")
    return State(coeffs=coeffs, t=t, n=n)
