"""spdelab: simulation and verification laboratory for 1D semilinear SPDEs
driven by space-time white noise.

Subpackages: kernels (Green's functions and their estimates), noise
(reproducible white-noise grids), solver (spectral exponential-Euler and
implicit finite-difference schemes), malliavin (pathwise derivative fields),
analysis (ensemble statistics: sup laws, densities, regularity, small-ball),
cli (experiment driver).
"""

__version__ = "0.1.0"

from . import kernels, noise, coefficients, solver, malliavin, analysis  # noqa: F401
