"""Nonlinear residual and sparse Jacobian of one time step.

Implements the energy-dissipative perturbed midpoint scheme (four coupled
blocks: momentum, continuity, level set, auxiliary entropy variable) with
SUPG, its momentum balancing term and residual-based discontinuity
capturing, plus a standard conservative-midpoint scheme with a CSF
surface-tension term as a switchable comparison integrator.

Conventions: phi_mid / u_mid are coefficient averages (spline fields at the
half level), whereas "pointwise half" quantities -- the averaged Dirac,
gradient norm and gradient entering the auxiliary block -- are arithmetic
means of the two time levels' pointwise values.  That distinction is what
makes the discrete chain rules, and hence the energy identity, exact.
"""
from dataclasses import dataclass, replace

import numpy as np
import scipy.sparse as sp

from . import interface_calculus as ic

ENTROPY_STABLE = "entropy_stable"
STANDARD_MIDPOINT = "standard_midpoint"


@dataclass
class State:
    """Coefficients of (u, p, phi, v) at one time level."""
    coeffs: np.ndarray
    t: float = 0.0
    n: int = 0

    def copy(self):
        return State(coeffs=self.coeffs.copy(), t=self.t, n=self.n)


@dataclass(frozen=True)
class SchemeParams:
    dt: float
    groups: ic.DimensionlessGroups
    C: float = 0.0
    scheme: str = ENTROPY_STABLE

    def __post_init__(self):
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.C < 0:
            raise ValueError("C must be nonnegative")
        if self.scheme not in (ENTROPY_STABLE, STANDARD_MIDPOINT):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    def with_dt(self, dt):
        return replace(self, dt=dt)


def eval_scalar_fields(tab, coeffs, need_hess=False):
    """(value, gradient[, hessian]) of a scalar spline at all qp."""
    c = np.asarray(coeffs)[tab.conn]
    val = np.einsum("elq,el->eq", tab.B0, c)
    grad = np.einsum("elqd,el->eqd", tab.B1, c)
    if not need_hess:
        return val, grad
    hess = np.einsum("elqij,el->eqij", tab.B2, c)
    return val, grad, hess


def tau_supg(system, u_mid, dt):
    """SUPG parameter per quadrature point:
    tau = ((2/dt)^2 + u.G u)^(-1/2) with the element metric G."""
    gdiag = np.diag(system.G)
    ugu = np.einsum("...d,d->...", np.asarray(u_mid) ** 2, gdiag)
    return 1.0 / np.sqrt((2.0 / dt) ** 2 + ugu)


class DiscreteSystem:
    """Assembler for one time step over the reduced unknown vector
    x = [free coefficients of (u, p, phi, v), pressure-mean multiplier]."""

    def __init__(self, system, layout, model, params):
        self.sys = system
        self.layout = layout
        self.m = model
        self.params = params
        self.d = system.d
        self.gdir = self.d - 1
        g = params.groups
        self.sWe = 1.0 / g.We
        self.fr2 = g.Fr_inv_sq
        # coefficient of (grad u + grad u^T) in tau: (1/Re) mu(phi)/mu1
        self.cvis0 = 0.0 if model.mu1 == 0 else 1.0 / (g.Re * model.mu1)
        self.stab = system.tables(system.scalar)
        self.utab = [system.tables(v) for v in system.velocity]
        self.wq = system.wq
        # DC viscosity frozen over one step's Newton iterations so the
        # Jacobian stays consistent with the residual; the solver calls
        # freeze_theta at the predictor and diagnostics read it back.
        self.frozen_theta = None

    def freeze_theta(self, coeffs_n, coeffs_guess):
        self.frozen_theta = self.theta_dc(coeffs_n, coeffs_guess)
        return self.frozen_theta

    def _theta(self, coeffs_n, coeffs_next):
        if self.frozen_theta is not None:
            return self.frozen_theta
        return self.theta_dc(coeffs_n, coeffs_next)

    # ----------------------------------------------------------- plumbing
    def blocks(self, coeffs):
        lay = self.layout
        u = [coeffs[lay.slice_u(k)] for k in range(self.d)]
        return u, coeffs[lay.slice_p], coeffs[lay.slice_phi], \
            coeffs[lay.slice_v]

    def _tab(self, block):
        return self.utab[int(block[1])] if block[0] == "u" else self.stab

    def _offset(self, block):
        lay = self.layout
        if block[0] == "u":
            return lay.slice_u(int(block[1])).start
        return {"p": lay.slice_p.start, "phi": lay.slice_phi.start,
                "v": lay.slice_v.start}[block]

    def _nrow(self, block):
        if block[0] == "u":
            return self.layout.n_u[int(block[1])]
        return self.layout.n_s

    def _velocity_fields(self, ucoef, need_hess=False):
        vals, grads, hess = [], [], []
        for k in range(self.d):
            tab = self.utab[k]
            c = ucoef[k][tab.conn]
            vals.append(np.einsum("elq,el->eq", tab.B0, c))
            grads.append(np.einsum("elqd,el->eqd", tab.B1, c))
            if need_hess:
                hess.append(np.einsum("elqij,el->eqij", tab.B2, c))
        u = np.stack(vals, axis=-1)                 # (ne, nq, k)
        gu = np.stack(grads, axis=-2)               # (ne, nq, k, j)
        if need_hess:
            return u, gu, np.stack(hess, axis=-3)   # (ne, nq, k, i, j)
        return u, gu

    def _midpoint_fields(self, coeffs_n, coeffs_next, need_hess):
        """Common quadrature-point data for residual/Jacobian."""
        m = self.m
        un_, _, phin_, _ = self.blocks(coeffs_n)
        u1_, p1_, phi1_, v1_ = self.blocks(coeffs_next)
        umc = [(a + b) / 2 for a, b in zip(un_, u1_)]
        phim_c = (phin_ + phi1_) / 2
        f = {}
        f["u0f"], _ = self._velocity_fields(un_)
        f["u1f"], _ = self._velocity_fields(u1_)
        f["um"], f["gum"] = self._velocity_fields(umc)
        if need_hess:
            f["phm"], f["gphm"], f["hphm"] = eval_scalar_fields(
                self.stab, phim_c, True)
        else:
            f["phm"], f["gphm"] = eval_scalar_fields(self.stab, phim_c)
        f["ph0"], f["gph0"] = eval_scalar_fields(self.stab, phin_)
        f["ph1"], f["gph1"] = eval_scalar_fields(self.stab, phi1_)
        f["p1v"], _ = eval_scalar_fields(self.stab, p1_)
        f["v1v"], f["gv1"] = eval_scalar_fields(self.stab, v1_)
        f["rh0"] = ic.density(f["ph0"], m)
        f["rh1"] = ic.density(f["ph1"], m)
        f["rhm"] = ic.density(f["phm"], m)
        f["ravg"] = 0.5 * (f["rh0"] + f["rh1"])
        f["cvis"] = self.cvis0 * ic.viscosity(f["phm"], m)
        f["dm"] = ic.dirac(f["phm"], m)
        f["y"] = self.sys.qp_phys[..., self.gdir]
        f["tau"] = tau_supg(self.sys, f["um"], self.params.dt)
        f["R_I"] = ((f["ph1"] - f["ph0"]) / self.params.dt
                    + np.einsum("eqj,eqj->eq", f["um"], f["gphm"]))
        f["p1_"] = p1_
        f["v1_"] = v1_
        return f

    # ------------------------------------------------------- scheme pieces
    def theta_dc(self, coeffs_n, coeffs_next):
        """Discontinuity-capturing viscosity per element from the
        conservative momentum residual at the midpoint states."""
        if self.params.C == 0.0:
            return np.zeros(self.sys.n_el)
        m = self.m
        dt = self.params.dt
        un_, _, phin_, _ = self.blocks(coeffs_n)
        u1_, p1_, phi1_, _ = self.blocks(coeffs_next)
        umc = [(a + b) / 2 for a, b in zip(un_, u1_)]
        phim_c = (phin_ + phi1_) / 2
        u0, _ = self._velocity_fields(un_)
        u1, _ = self._velocity_fields(u1_)
        um, gum, hum = self._velocity_fields(umc, need_hess=True)
        phm, gphm, hphm = eval_scalar_fields(self.stab, phim_c, True)
        ph0, _ = eval_scalar_fields(self.stab, phin_)
        ph1, _ = eval_scalar_fields(self.stab, phi1_)
        _, gp1 = eval_scalar_fields(self.stab, p1_)
        rh0 = ic.density(ph0, m)
        rh1 = ic.density(ph1, m)
        rhm = ic.density(phm, m)
        mum = ic.viscosity(phm, m)
        dm = ic.dirac(phm, m)
        rpd = m.drho * dm
        mpd = m.dmu * dm
        _, kap, _ = ic.normal_curvature(gphm, hphm, m.eps_norm)
        divu = np.einsum("eqkk->eq", gum)
        lap_u = np.einsum("eqkjj->eqk", hum)
        grad_div = np.einsum("eqjkj->eqk", hum)
        ugphm = np.einsum("eqj,eqj->eq", um, gphm)
        rm = (rh1[..., None] * u1 - rh0[..., None] * u0) / dt
        rm += (rpd * ugphm)[..., None] * um \
            + rhm[..., None] * (np.einsum("eqkj,eqj->eqk", gum, um)
                                + um * divu[..., None])
        rm -= self.cvis0 * (
            mpd[..., None] * (np.einsum("eqkj,eqj->eqk", gum, gphm)
                              + np.einsum("eqjk,eqj->eqk", gum, gphm))
            + mum[..., None] * (lap_u + grad_div))
        rm += gp1
        rm += self.sWe * (dm * kap)[..., None] * gphm
        rm[..., self.gdir] += self.fr2 * rhm
        nrm_r2 = np.einsum("eqk,eqk->eq", rm, rm) + m.eps_norm**2
        nrm_g2 = np.einsum("eqkj,eqkj->eq", gum, gum) + m.eps_norm**2
        wsum = np.sum(self.wq)
        rms_r = np.sqrt(nrm_r2 @ self.wq / wsum)
        rms_g = np.sqrt(nrm_g2 @ self.wq / wsum)
        return self.params.C * self.sys.h_K * rms_r / rms_g

    # ------------------------------------------------------------ residual
    def residual(self, state_n, state_next, lam=0.0):
        """Full-layout residual vector plus the pressure-mean row value."""
        m = self.m
        dt = self.params.dt
        standard = self.params.scheme == STANDARD_MIDPOINT
        lay = self.layout
        out = np.zeros(lay.n_total)
        f = self._midpoint_fields(state_n.coeffs, state_next.coeffs,
                                  need_hess=standard)
        um, gum = f["um"], f["gum"]
        gphm = f["gphm"]
        theta = self._theta(state_n.coeffs, state_next.coeffs)
        djmp = (f["rh1"] - f["rh0"]) / dt
        if standard:
            _, kap, _ = ic.normal_curvature(gphm, f["hphm"], m.eps_norm)

        # momentum --------------------------------------------------------
        for k in range(self.d):
            a = (f["ravg"] * (f["u1f"][..., k] - f["u0f"][..., k]) / dt
                 + djmp * um[..., k])
            if self.fr2 and k == self.gdir:
                a = a + self.fr2 * f["rhm"]
            b = (-f["rhm"][..., None] * um[..., k, None] * um
                 + f["cvis"][..., None] * (gum[:, :, k, :] + gum[:, :, :, k])
                 + theta[:, None, None] * gum[:, :, k, :])
            b[..., k] -= f["p1v"]
            if standard:
                a = a + self.sWe * f["dm"] * kap * gphm[..., k]
            else:
                rmom = m.drho * f["dm"]
                kin = (0.5 * np.einsum("eqj,eqj->eq", um, um)
                       - self.fr2 * f["y"])
                a = (a - f["v1v"] * gphm[..., k]
                     - rmom * kin * gphm[..., k]
                     - f["tau"] * f["gv1"][..., k] * f["R_I"])
            tab = self.utab[k]
            loc = (np.einsum("elq,eq->el", tab.B0, a * self.wq)
                   + np.einsum("elqd,eqd->el", tab.B1,
                               b * self.wq[None, :, None]))
            out[lay.slice_u(k)] += np.bincount(
                tab.conn.ravel(), weights=loc.ravel(), minlength=lay.n_u[k])

        # continuity + pressure-mean row ----------------------------------
        divum = np.einsum("eqkk->eq", gum)
        loc = np.einsum("elq,eq->el", self.stab.B0, divum * self.wq)
        rp = np.bincount(self.stab.conn.ravel(), weights=loc.ravel(),
                         minlength=lay.n_p)
        out[lay.slice_p] += rp + lam * lay.pressure_mean_row
        r_lam = float(lay.pressure_mean_row @ f["p1_"])

        # level set -------------------------------------------------------
        wa = f["R_I"] * self.wq
        wb = f["tau"][..., None] * um * wa[..., None]
        loc = (np.einsum("elq,eq->el", self.stab.B0, wa)
               + np.einsum("elqd,eqd->el", self.stab.B1, wb))
        out[lay.slice_phi] += np.bincount(
            self.stab.conn.ravel(), weights=loc.ravel(), minlength=lay.n_s)

        # auxiliary variable ----------------------------------------------
        if standard:
            out[lay.slice_v] += f["v1_"]
        else:
            rpa = ic.rho_prime_aux(f["ph0"], f["ph1"], m)
            sig = ic.dirac_prime_aux(f["ph0"], f["ph1"], m)
            g0 = ic.reg_norm(f["gph0"], m.eps_norm)
            g1 = ic.reg_norm(f["gph1"], m.eps_norm)
            gh = 0.5 * (g0 + g1)
            dh = 0.5 * (ic.dirac(f["ph0"], m) + ic.dirac(f["ph1"], m))
            huu = 0.5 * np.einsum("eqj,eqj->eq", f["u1f"], f["u0f"])
            a = (f["v1v"] + rpa * (huu - self.fr2 * f["y"])
                 - self.sWe * sig * gh)
            b = -self.sWe * (dh / gh)[..., None] * gphm
            loc = (np.einsum("elq,eq->el", self.stab.B0, a * self.wq)
                   + np.einsum("elqd,eqd->el", self.stab.B1,
                               b * self.wq[None, :, None]))
            out[lay.slice_v] += np.bincount(
                self.stab.conn.ravel(), weights=loc.ravel(),
                minlength=lay.n_s)

        if not np.all(np.isfinite(out)):
            bad = [name for name, sl in self._block_slices()
                   if not np.all(np.isfinite(out[sl]))]
            raise FloatingPointError(f"non-finite residual in blocks {bad}")
        return out, r_lam

    def _block_slices(self):
        lay = self.layout
        names = [(f"u{k}", lay.slice_u(k)) for k in range(self.d)]
        return names + [("p", lay.slice_p), ("phi", lay.slice_phi),
                        ("v", lay.slice_v)]

    # ------------------------------------------------------------ jacobian
    def jacobian(self, state_n, state_next):
        """Sparse Jacobian over the full layout with respect to state_next.
        theta_K is frozen per iteration; tau_K is linearized exactly."""
        m = self.m
        dt = self.params.dt
        standard = self.params.scheme == STANDARD_MIDPOINT
        f = self._midpoint_fields(state_n.coeffs, state_next.coeffs,
                                  need_hess=standard)
        um, gum, gphm = f["um"], f["gum"], f["gphm"]
        tau, R_I = f["tau"], f["R_I"]
        theta = self._theta(state_n.coeffs, state_next.coeffs)
        d1 = ic.dirac(f["ph1"], m)
        d1p = ic.dirac_deriv(f["ph1"], m, 1)
        rp1 = m.drho * d1
        rpm = m.drho * f["dm"]
        dpm = ic.dirac_deriv(f["phm"], m, 1)
        gdiag = np.diag(self.sys.G)
        dtau = -0.5 * tau[..., None] ** 3 * (um * gdiag)  # d tau/d u1_l
        eye = np.eye(self.d)
        w = self.wq

        K = {}

        def acc(tb, sb, arr):
            key = (tb, sb)
            if key in K:
                K[key] += arr
            else:
                K[key] = arr

        def k00(tb, sb, c):
            acc(tb, sb, np.einsum("eaq,ebq,eq->eab", self._tab(tb).B0,
                                  self._tab(sb).B0, c * w, optimize=True))

        def k01(tb, sb, cvec):
            acc(tb, sb, np.einsum("eaq,ebqd,eqd->eab", self._tab(tb).B0,
                                  self._tab(sb).B1,
                                  cvec * w[None, :, None], optimize=True))

        def k10(tb, sb, cvec):
            acc(tb, sb, np.einsum("eaqd,eqd,ebq->eab", self._tab(tb).B1,
                                  cvec * w[None, :, None],
                                  self._tab(sb).B0, optimize=True))

        def k11(tb, sb, cmat):
            acc(tb, sb, np.einsum("eaqi,ebqj,eqij->eab", self._tab(tb).B1,
                                  self._tab(sb).B1,
                                  cmat * w[None, :, None, None],
                                  optimize=True))

        def k02(tb, sb, cmat):
            acc(tb, sb, np.einsum("eaq,ebqij,eqij->eab", self._tab(tb).B0,
                                  self._tab(sb).B2,
                                  cmat * w[None, :, None, None],
                                  optimize=True))

        def kg0(tb, comp, sb, c):
            """(d test/d x_comp, c * trial value)"""
            acc(tb, sb, np.einsum("eaq,ebq,eq->eab",
                                  self._tab(tb).B1[..., comp],
                                  self._tab(sb).B0, c * w, optimize=True))

        kin = 0.5 * np.einsum("eqj,eqj->eq", um, um) - self.fr2 * f["y"]

        # momentum rows ---------------------------------------------------
        for k in range(self.d):
            tb = f"u{k}"
            # time term
            k00(tb, tb, f["ravg"] / dt
                + 0.5 * (f["rh1"] - f["rh0"]) / dt)
            k00(tb, "phi",
                0.5 * rp1 * (f["u1f"][..., k] - f["u0f"][..., k]) / dt
                + rp1 / dt * um[..., k])
            # convection: -(grad w_j, rho_m u_k u_j)
            for l in range(self.d):
                cvec = -0.5 * f["rhm"][..., None] * eye[k, l] * um
                cvec = cvec.copy()
                cvec[..., l] += -0.5 * f["rhm"] * um[..., k]
                k10(tb, f"u{l}", cvec)
            k10(tb, "phi",
                -0.5 * rpm[..., None] * um[..., k, None] * um)
            # viscous + DC
            for l in range(self.d):
                cmat = np.zeros(um.shape[:2] + (self.d, self.d))
                if l == k:
                    cmat += (0.5 * f["cvis"]
                             + 0.5 * theta[:, None])[..., None, None] \
                        * eye[None, None, :, :]
                cmat[..., l, k] += 0.5 * f["cvis"]
                k11(tb, f"u{l}", cmat)
            if m.dmu != 0.0:
                k10(tb, "phi", 0.5 * self.cvis0 * m.dmu * f["dm"][..., None]
                    * (gum[:, :, k, :] + gum[:, :, :, k]))
            # pressure
            kg0(tb, k, "p", -np.ones_like(R_I))
            # gravity
            if self.fr2 and k == self.gdir:
                k00(tb, "phi", 0.5 * self.fr2 * rpm)
            if standard:
                self._csf_jacobian(k, tb, k00, k01, k02, f["phm"], gphm,
                                   f["hphm"], f["dm"], dpm)
            else:
                # coupling -(w, v1 grad phm) - (w, rho_m kin grad phm)
                k00(tb, "v", -gphm[..., k])
                k01(tb, "phi",
                    -0.5 * (f["v1v"] + rpm * kin)[..., None]
                    * eye[k][None, None, :])
                k00(tb, "phi", -0.5 * m.drho * dpm * kin * gphm[..., k])
                for l in range(self.d):
                    k00(tb, f"u{l}",
                        -0.5 * rpm * gphm[..., k] * um[..., l]
                        - 0.5 * tau * f["gv1"][..., k] * gphm[..., l]
                        - dtau[..., l] * f["gv1"][..., k] * R_I)
                # SUPG balance: -(tau w . grad v1, R_I)
                k01(tb, "v", -(tau * R_I)[..., None]
                    * eye[k][None, None, :])
                k00(tb, "phi", -tau * f["gv1"][..., k] / dt)
                k01(tb, "phi",
                    -0.5 * (tau * f["gv1"][..., k])[..., None] * um)

        # continuity rows -------------------------------------------------
        for l in range(self.d):
            acc("p", f"u{l}", np.einsum(
                "eaq,ebq,eq->eab", self.stab.B0,
                self.utab[l].B1[..., l],
                0.5 * np.ones_like(R_I) * w, optimize=True))

        # level-set rows --------------------------------------------------
        k00("phi", "phi", np.ones_like(R_I) / dt)
        k01("phi", "phi", 0.5 * um)
        k10("phi", "phi", tau[..., None] * um / dt)
        k11("phi", "phi", 0.5 * tau[..., None, None]
            * um[..., :, None] * um[..., None, :])
        for l in range(self.d):
            k00("phi", f"u{l}", 0.5 * gphm[..., l])
            k10("phi", f"u{l}", tau[..., None] * um
                * (0.5 * gphm[..., l])[..., None])
            k10("phi", f"u{l}",
                (0.5 * tau[..., None] * eye[l][None, None, :]
                 + dtau[..., l, None] * um) * R_I[..., None])

        # auxiliary rows --------------------------------------------------
        if not standard:
            rpa, rpa_d1, sig, sig_d1 = ic.aux_surrogates_with_derivs(
                f["ph0"], f["ph1"], m)
            g0 = ic.reg_norm(f["gph0"], m.eps_norm)
            g1 = ic.reg_norm(f["gph1"], m.eps_norm)
            gh = 0.5 * (g0 + g1)
            dh = 0.5 * (ic.dirac(f["ph0"], m) + ic.dirac(f["ph1"], m))
            huu = 0.5 * np.einsum("eqj,eqj->eq", f["u1f"], f["u0f"])
            k00("v", "v", np.ones_like(R_I))
            for l in range(self.d):
                k00("v", f"u{l}", rpa * 0.5 * f["u0f"][..., l])
            k00("v", "phi", rpa_d1 * (huu - self.fr2 * f["y"])
                - self.sWe * sig_d1 * gh)
            k01("v", "phi",
                -self.sWe * (sig / (2 * g1))[..., None] * f["gph1"])
            k10("v", "phi",
                -self.sWe * 0.5 * (d1p / gh)[..., None] * gphm)
            cmat = (-self.sWe * 0.5 * (dh / gh)[..., None, None]
                    * eye[None, None, :, :]
                    + self.sWe * (dh / (gh**2 * 2 * g1))[..., None, None]
                    * gphm[..., :, None] * f["gph1"][..., None, :])
            k11("v", "phi", cmat)

        return self._globalize(K, standard)

    def _csf_jacobian(self, k, tb, k00, k01, k02, phm, gphm, hphm, dm, dpm):
        """phi_{n+1} derivative of the CSF term sWe * dm * kappa * gphm_k."""
        m = self.m
        g = ic.reg_norm(gphm, m.eps_norm)
        A = np.einsum("eqi,eqij,eqj->eq", gphm, hphm, gphm)
        L = np.einsum("eqii->eq", hphm)
        kap = L / g - A / g**3
        eye = np.eye(self.d)
        hg = np.einsum("eqij,eqj->eqi", hphm, gphm)
        k00(tb, "phi", 0.5 * self.sWe * dpm * kap * gphm[..., k])
        cvec = (0.5 * self.sWe * (dm * kap)[..., None]
                * eye[k][None, None, :]
                + self.sWe * (dm * gphm[..., k])[..., None]
                * (0.5 * ((-L + 3 * A / g**2) / g**3)[..., None] * gphm
                   - hg / g[..., None] ** 3))
        k01(tb, "phi", cvec)
        cmat = (self.sWe * (dm * gphm[..., k])[..., None, None]
                * (0.5 / g[..., None, None] * eye[None, None, :, :]
                   - 0.5 * gphm[..., :, None] * gphm[..., None, :]
                   / g[..., None, None] ** 3))
        k02(tb, "phi", cmat)

    def _globalize(self, K, standard):
        lay = self.layout
        rows, cols, vals = [], [], []
        for (tb, sb), loc in K.items():
            rc = self._tab(tb).conn + self._offset(tb)
            cc = self._tab(sb).conn + self._offset(sb)
            rows.append(np.broadcast_to(rc[:, :, None], loc.shape).ravel())
            cols.append(np.broadcast_to(cc[:, None, :], loc.shape).ravel())
            vals.append(loc.ravel())
        if standard:
            vr = np.arange(lay.slice_v.start, lay.slice_v.stop)
            rows.append(vr)
            cols.append(vr)
            vals.append(np.ones(lay.n_s))
        n = lay.n_total
        return sp.coo_matrix(
            (np.concatenate(vals),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(n, n)).tocsr()

    # --------------------------------------------------- reduced interface
    def pack(self, coeffs, lam=0.0):
        return np.concatenate([self.layout.reduce(coeffs), [lam]])

    def unpack(self, x):
        return self.layout.expand(x[:-1]), float(x[-1])

    def residual_reduced(self, state_n, x, t=None):
        coeffs, lam = self.unpack(x)
        nxt = State(coeffs=coeffs,
                    t=state_n.t + self.params.dt if t is None else t,
                    n=state_n.n + 1)
        full, r_lam = self.residual(state_n, nxt, lam)
        return np.concatenate([full[self.layout.free_idx], [r_lam]])

    def jacobian_reduced(self, state_n, x):
        coeffs, lam = self.unpack(x)
        nxt = State(coeffs=coeffs, t=state_n.t + self.params.dt,
                    n=state_n.n + 1)
        J = self.jacobian(state_n, nxt)
        free = self.layout.free_idx
        Jf = J[free][:, free]
        col = np.zeros(self.layout.n_total)
        col[self.layout.slice_p] = self.layout.pressure_mean_row
        cf = col[free]
        return sp.bmat([[Jf, cf[:, None]], [cf[None, :], None]],
                       format="csc")


def surface_tension_alt_identity_check(system, model, phi_coeffs, w_coeffs):
    """Numerical check of the alternative surface-tension form:
    lhs = int delta_G kappa nu . w, rhs = int delta_G grad w : P_T
    + int eps^2 delta'(phi) nu . w.  Returns (lhs, rhs, defect)."""
    stab = system.tables(system.scalar)
    phi, gphi, hphi = eval_scalar_fields(stab, phi_coeffs, True)
    wvals, wgrads = [], []
    for k in range(system.d):
        tab = system.tables(system.velocity[k])
        c = np.asarray(w_coeffs[k])[tab.conn]
        wvals.append(np.einsum("elq,el->eq", tab.B0, c))
        wgrads.append(np.einsum("elqd,el->eqd", tab.B1, c))
    wf = np.stack(wvals, axis=-1)
    gw = np.stack(wgrads, axis=-2)
    eps = model.eps_norm
    nu, kap, pt = ic.normal_curvature(gphi, hphi, eps)
    g = ic.reg_norm(gphi, eps)
    dphi = ic.dirac(phi, model)
    dpphi = ic.dirac_deriv(phi, model, 1)
    wq = system.wq
    lhs = float(np.einsum("eq,eq,eqk,eqk,q->", dphi * g, kap, nu, wf, wq))
    rhs = float(np.einsum("eq,eqkj,eqkj,q->", dphi * g, gw, pt, wq)
                + eps**2 * np.einsum("eq,eqk,eqk,q->", dpphi, nu, wf, wq))
    return lhs, rhs, lhs - rhs
