"""kolmobs: spectral, decay and boundary-observability experiments for
Kolmogorov-type degenerate parabolic equations u_t + q(y)^2 u_x - u_yy = 0.

The package works one Fourier mode at a time: each mode n solves a 1-D
heat equation with the complex potential i n q(y)^2 on an interval with
Dirichlet ends.  Modules:

- profiles: the degeneracy coefficient q and its scalar functionals
  (critical-time bounds, concentration weights)
- operators: finite-difference assembly of the mode operator, its
  complex-harmonic and complex-Airy model operators
- eigen: complex eigenpairs, boundary derivatives, weighted decay checks
- semigroup: propagator norms, resolvent norms, pseudospectra
- evolve: mode evolution, boundary flux traces, 2-D synthesis
- carleman: space-time weight construction and inequality verification
- observability: per-mode constants, eigenfunction ratios, critical-time scan
- cli: every experiment as a subcommand with config files
"""

from ._kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
