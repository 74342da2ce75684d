"""Newton solver for one time step: sparse direct linear solves with an
optional backtracking line search."""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla


@dataclass(frozen=True)
class NewtonConfig:
    rel_tol: float = 1e-8
    abs_tol: float = 1e-11
    max_iter: int = 20
    line_search: bool = True
    ls_factor: float = 0.5
    ls_max_cuts: int = 8

    def __post_init__(self):
        if self.rel_tol <= 0 or self.abs_tol <= 0:
            raise ValueError("tolerances must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass
class SolveReport:
    iterations: int = 0
    converged: bool = False
    initial_norm: float = 0.0
    final_norm: float = 0.0
    block_norms: dict = field(default_factory=dict)
    line_search_activations: int = 0
    correction_norms: list = field(default_factory=list)


class LinearSolveError(RuntimeError):
    pass


def linear_solve(matrix, rhs):
    """Backward-stable sparse direct solve via LU factorization."""
    try:
        lu = spla.splu(matrix.tocsc())
    except RuntimeError as exc:
        raise LinearSolveError(f"sparse LU factorization failed: {exc}")
    x = lu.solve(np.asarray(rhs, dtype=float))
    if not np.all(np.isfinite(x)):
        raise LinearSolveError("linear solve produced non-finite entries")
    return x


def _block_norms(system, r):
    free = system.layout.free_idx
    mask = {name: np.zeros(system.layout.n_total, dtype=bool)
            for name, _ in system._block_slices()}
    for name, sl in system._block_slices():
        mask[name][sl] = True
    out = {}
    for name in mask:
        out[name] = float(np.linalg.norm(r[:-1][mask[name][free]]))
    out["mean"] = float(abs(r[-1]))
    return out


class ReusableLU:
    """Holds one LU factorization for reuse across Newton iterations and
    time steps (modified Newton).  solve_step refactors it automatically
    whenever the residual stops contracting, so staleness only costs extra
    cheap iterations, never correctness: convergence is always judged on
    the true nonlinear residual."""

    def __init__(self):
        self.lu = None
        self.factorizations = 0

    def factor(self, matrix):
        try:
            self.lu = spla.splu(matrix.tocsc())
        except RuntimeError as exc:
            raise LinearSolveError(
                f"sparse LU factorization failed: {exc}")
        self.factorizations += 1

    def solve(self, rhs):
        x = self.lu.solve(np.asarray(rhs, dtype=float))
        if not np.all(np.isfinite(x)):
            raise LinearSolveError(
                "linear solve produced non-finite entries")
        return x

    def invalidate(self):
        self.lu = None


def solve_step(state_n, guess, system, cfg=NewtonConfig(), linear=None):
    """Newton iteration on one time step of ``system`` (a DiscreteSystem).

    guess: State holding the initial coefficients for level n+1.  Returns
    (State, SolveReport); the report is filled even when unconverged.
    linear: optional ReusableLU; when given, the factorization is reused
    (across iterations and calls) until the residual contraction degrades,
    at which point it is refreshed at the current iterate.
    """
    from .discrete_system import State

    report = SolveReport()
    system.freeze_theta(state_n.coeffs, guess.coeffs)
    x = system.pack(guess.coeffs, 0.0)
    r = system.residual_reduced(state_n, x)
    norm0 = float(np.linalg.norm(r))
    report.initial_norm = norm0
    tol = max(cfg.rel_tol * norm0, cfg.abs_tol)
    norm = norm0

    def backtrack(dx):
        step = 1.0
        x_new = x + dx
        r_new = system.residual_reduced(state_n, x_new)
        norm_new = float(np.linalg.norm(r_new))
        if cfg.line_search and not norm_new < norm:
            report.line_search_activations += 1
            best = (norm_new, x_new, r_new, step)
            s = 1.0
            for _ in range(cfg.ls_max_cuts):
                s *= cfg.ls_factor
                x_try = x + s * dx
                r_try = system.residual_reduced(state_n, x_try)
                n_try = float(np.linalg.norm(r_try))
                if n_try < best[0]:
                    best = (n_try, x_try, r_try, s)
                if n_try < norm:
                    break
            norm_new, x_new, r_new, step = best
        return x_new, r_new, norm_new, step

    for it in range(cfg.max_iter):
        if norm <= tol:
            break
        if linear is None:
            J = system.jacobian_reduced(state_n, x)
            dx = linear_solve(J, -r)
            fresh = True
        else:
            if linear.lu is None:
                linear.factor(system.jacobian_reduced(state_n, x))
                fresh = True
            else:
                fresh = False
            dx = linear.solve(-r)
        x_new, r_new, norm_new, step = backtrack(dx)
        if linear is not None and not fresh and norm_new > 0.25 * norm:
            # stale factorization: refresh at the current iterate and retry
            linear.factor(system.jacobian_reduced(state_n, x))
            dx = linear.solve(-r)
            cand = backtrack(dx)
            if cand[2] < norm_new:
                x_new, r_new, norm_new, step = cand
        x, r, norm = x_new, r_new, norm_new
        report.iterations = it + 1
        report.correction_norms.append(float(np.linalg.norm(step * dx)))
    report.converged = norm <= tol
    report.final_norm = norm
    report.block_norms = _block_norms(system, r)
    coeffs, lam = system.unpack(x)
    out = State(coeffs=coeffs, t=state_n.t + system.params.dt,
                n=state_n.n + 1)
    return out, report
