"""Pointwise level-set calculus.

Regularized Heaviside/Dirac family and derivatives, material properties,
regularized norms, normals/curvature/projectors, and the time-discrete
secant/Taylor derivative surrogates that make the discrete chain rules exact.
"""
from dataclasses import dataclass, field

import numpy as np

from . import _kernels


@dataclass(frozen=True)
class InterfaceModel:
    """Material pair and the two regularization lengths.

    eps_width : interface half-width of the regularized Heaviside (2*h_K
                in the experiments); eps_norm : dimensionless regularizer
    inside the gradient norm, kept tiny so the dissipation structure is
    unaffected while divisions near ``grad phi = 0`` stay finite.
    """
    rho1: float
    rho2: float
    mu1: float
    mu2: float
    eps_width: float
    eps_norm: float = 1e-8

    def __post_init__(self):
        if self.rho1 <= 0 or self.rho2 <= 0:
            raise ValueError("densities must be positive")
        if self.mu1 < 0 or self.mu2 < 0:
            raise ValueError("viscosities must be nonnegative")
        if self.eps_width <= 0:
            raise ValueError("eps_width must be positive")
        if self.eps_norm < 0:
            raise ValueError("eps_norm must be nonnegative")

    @property
    def drho(self):
        return self.rho1 - self.rho2

    @property
    def dmu(self):
        return self.mu1 - self.mu2


@dataclass(frozen=True)
class DimensionlessGroups:
    """Re, We and 1/Fr^2 (stored inverted so gravity-off is exactly 0)."""
    Re: float
    We: float
    Fr_inv_sq: float = 0.0

    def __post_init__(self):
        if not self.Re > 0:
            raise ValueError("Re must be positive")
        if not self.We > 0:
            raise ValueError("We must be positive")
        if self.Fr_inv_sq < 0:
            raise ValueError("Fr_inv_sq must be nonnegative")

    @classmethod
    def from_physical(cls, sigma, mu1, gravity=0.0):
        """Groups under the U0 = L0 = rho_ref = 1 convention: We = 1/sigma,
        Re = 1/mu1 (infinite for an inviscid pair), 1/Fr^2 = g."""
        re = np.inf if mu1 == 0 else 1.0 / mu1
        return cls(Re=re, We=1.0 / sigma, Fr_inv_sq=gravity)


def heaviside(x):
    """C^3 piecewise-quintic ramp H(x) of the scaled level set x = phi/eps."""
    return _kernels.hpoly(x, 0)


def heaviside_deriv(x, order):
    """order-th derivative of H with respect to the scaled variable."""
    if not 1 <= int(order) <= 5:
        raise ValueError(f"order must be in 1..5, got {order}")
    return _kernels.hpoly(x, int(order))


def dirac(phi, m):
    """delta_eps(phi) = H_eps'(phi), the regularized surface Dirac density."""
    return _kernels.hpoly(np.asarray(phi) / m.eps_width, 1) / m.eps_width


def dirac_deriv(phi, m, order=1):
    """order-th derivative of delta_eps with respect to phi."""
    return (_kernels.hpoly(np.asarray(phi) / m.eps_width, order + 1)
            / m.eps_width ** (order + 1))


def density(phi, m):
    h = _kernels.hpoly(np.asarray(phi) / m.eps_width, 0)
    return m.rho2 + m.drho * h


def viscosity(phi, m):
    h = _kernels.hpoly(np.asarray(phi) / m.eps_width, 0)
    return m.mu2 + m.dmu * h


def reg_norm(b, eps):
    """||b||_{eps,2} = sqrt(b.b + eps^2), over the last axis of b."""
    b = np.asarray(b, dtype=float)
    return np.sqrt(np.sum(b * b, axis=-1) + eps * eps)


def normal_curvature(grad, hess, eps):
    """Regularized unit normal, curvature kappa = div(nu) and tangential
    projector P_T = I - nu nu^T from first/second derivatives of phi.

    grad: (..., d), hess: (..., d, d) symmetric.  kappa uses the expansion
    kappa = lap(phi)/g - (grad^T H grad)/g^3 with g the regularized norm.
    """
    grad = np.asarray(grad, dtype=float)
    hess = np.asarray(hess, dtype=float)
    g = reg_norm(grad, eps)
    nu = grad / g[..., None]
    lap = np.trace(hess, axis1=-2, axis2=-1)
    quad = np.einsum("...i,...ij,...j->...", grad, hess, grad)
    kappa = lap / g - quad / g**3
    d = grad.shape[-1]
    pt = np.eye(d) - nu[..., :, None] * nu[..., None, :]
    return nu, kappa, pt


def rho_prime_aux(phi_n, phi_np1, m):
    """Surrogate density derivative at the half level: the exact chain rule
    rho(phi_{n+1}) - rho(phi_n) = rho_prime_aux * (phi_{n+1} - phi_n) holds
    to machine precision for every pair."""
    rho_hat, _, _, _ = _kernels.aux_surrogates(phi_n, phi_np1, m.eps_width)
    return m.drho * rho_hat


def dirac_prime_aux(phi_n, phi_np1, m):
    """Surrogate Dirac derivative: delta(phi_{n+1}) - delta(phi_n) =
    dirac_prime_aux * (phi_{n+1} - phi_n) exactly."""
    _, _, sig, _ = _kernels.aux_surrogates(phi_n, phi_np1, m.eps_width)
    return sig


def aux_surrogates_with_derivs(phi_n, phi_np1, m):
    """(rho_a, d rho_a/d phi_{n+1}, sigma, d sigma/d phi_{n+1}) in one pass;
    used by the Jacobian assembly."""
    rho_hat, rho_hat_d1, sig, sig_d1 = _kernels.aux_surrogates(
        phi_n, phi_np1, m.eps_width)
    return m.drho * rho_hat, m.drho * rho_hat_d1, sig, sig_d1


def rho_prime_mom(phi_mid, m):
    """Momentum surrogate [[rho]]_material * delta_eps(phi_mid); satisfies
    grad rho(phi_mid) = rho_prime_mom * grad phi_mid pointwise."""
    return m.drho * dirac(phi_mid, m)
