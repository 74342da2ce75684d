"""entrolevel: energy-dissipative level-set solver for two-phase
incompressible Navier-Stokes flow with surface tension, discretized with
divergence-conforming B-splines and a perturbed midpoint time integrator."""

from ._kernels import backend_name as kernel_backend

__all__ = ["kernel_backend"]
__version__ = "0.1.0"
