"""NumPy reference kernels for the pointwise interface calculus.

These are the hot inner kernels of assembly: piecewise-quintic Heaviside
evaluation and the secant/Taylor derivative surrogates, applied at every
quadrature point of every residual/Jacobian call.  A Cython twin with the
same signatures lives in ``_fast.pyx``; this module is the fallback and the
reference implementation.
"""
import numpy as np

# Ascending coefficients of the two interior quintic pieces of H(x):
#   -1 <= x < 0 and 0 <= x < 1; outside, H is 0 resp. 1.
_PM = np.array([0.5, 1.25, 0.0, -2.5, -2.5, -0.75])
_PP = np.array([0.5, 1.25, 0.0, -2.5, 2.5, -0.75])


def _polyder_table(c, max_order):
    out = [np.asarray(c, dtype=float)]
    for _ in range(max_order):
        c = out[-1]
        out.append(np.array([k * c[k] for k in range(1, len(c))], dtype=float))
    return out


_DM = _polyder_table(_PM, 5)
_DP = _polyder_table(_PP, 5)


def _horner(c, x):
    r = np.full_like(x, c[-1]) if len(c) else np.zeros_like(x)
    for coef in c[-2::-1]:
        r = r * x + coef
    return r


def hpoly(x, order):
    """Order-th derivative of the C^3 piecewise-quintic ramp H at scaled x.

    order 0 returns H itself (0 below -1, 1 above 1); orders 1..5 vanish
    outside (-1, 1).
    """
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    neg = (x >= -1.0) & (x < 0.0)
    pos = (x >= 0.0) & (x < 1.0)
    if order == 0:
        out = np.where(x >= 1.0, 1.0, 0.0)
    else:
        out = np.zeros_like(x)
    out = np.where(neg, _horner(_DM[order], x), out)
    out = np.where(pos, _horner(_DP[order], x), out)
    return out[0] if scalar else out


def piece_index(x):
    """Piece id of scaled x: 0 for x<=-1, 1 for (-1,0], 2 for (0,1], 3 above."""
    return np.digitize(np.asarray(x, dtype=float), [-1.0, 0.0, 1.0], right=True)


def aux_surrogates(phi0, phi1, eps):
    """Discrete-derivative surrogates for the (H, delta) pair of a time step.

    Returns (rho_hat, rho_hat_d1, sig, sig_d1) where
      H_eps(phi1) - H_eps(phi0)     = rho_hat * (phi1 - phi0)
      delta_eps(phi1)-delta_eps(phi0) = sig    * (phi1 - phi0)
    hold exactly, and *_d1 are the partial derivatives with respect to phi1.
    Same-piece pairs (and near-coincident pairs) use the truncated-Taylor
    branch, which is exact because each piece is a quintic; cross-piece pairs
    use the secant branch.
    """
    a = np.asarray(phi0, dtype=float) / eps
    b = np.asarray(phi1, dtype=float) / eps
    a, b = np.broadcast_arrays(a, b)
    m = 0.5 * (a + b)
    jj = b - a
    # Cross-piece pairs closer than 1e-5 also take the Taylor branch: its
    # truncation error there is O(|jump|^2) from the crossed C^3 kink, far
    # below the secant branch's cancellation error of O(eps_mach/|jump|).
    taylor = (piece_index(a) == piece_index(b)) | (np.abs(jj) < 1e-5)

    h1m = hpoly(m, 1)
    h2m = hpoly(m, 2)
    h3m = hpoly(m, 3)
    h4m = hpoly(m, 4)
    h5m = hpoly(m, 5)
    jj2 = jj * jj
    rho_t = (h1m + h3m * jj2 / 24.0 + h5m * jj2 * jj2 / 1920.0) / eps
    rho_t_d1 = (0.5 * h2m + h3m * jj / 12.0 + h4m * jj2 / 48.0
                + h5m * jj * jj2 / 480.0) / eps**2
    sig_t = (h2m + jj2 * h4m / 24.0) / eps**2
    sig_t_d1 = (0.5 * h3m + jj * h4m / 12.0 + jj2 * h5m / 48.0) / eps**3

    with np.errstate(divide="ignore", invalid="ignore"):
        jsafe = np.where(taylor, 1.0, jj)
        h0a, h0b = hpoly(a, 0), hpoly(b, 0)
        h1a, h1b = hpoly(a, 1), hpoly(b, 1)
        rho_f = (h0b - h0a) / (eps * jsafe)
        rho_f_d1 = (h1b * jsafe - (h0b - h0a)) / (eps * jsafe**2) / eps
        sig_f = (h1b - h1a) / (eps**2 * jsafe)
        sig_f_d1 = (hpoly(b, 2) * jsafe - (h1b - h1a)) / (eps**3 * jsafe**2)

    rho_hat = np.where(taylor, rho_t, rho_f)
    rho_hat_d1 = np.where(taylor, rho_t_d1, rho_f_d1)
    sig = np.where(taylor, sig_t, sig_f)
    sig_d1 = np.where(taylor, sig_t_d1, sig_f_d1)
    return rho_hat, rho_hat_d1, sig, sig_d1
