"""Numerical laboratory for diffusion-induced blowup in a shadow
activator-inhibitor model on a radially symmetric ball.

The package integrates the non-local parabolic equation

    du/dt = Lap(u) - u + theta(t) u^p,   theta(t) = (mean of u^r)^(-gamma),

to near-blowup, transforms snapshots into self-similar variables, decomposes
the remainder in a Gaussian-weighted Hermite frame, and machine-checks the
profile, rate, non-local-factor, and region-trapping behaviour.
"""

from gmshadow.params import (Criticality, CriticalityError, ModelParams,
                             ParameterError, TuringCheck, check_turing)
from gmshadow.profiles import (H_star, chi, chi0, chi1, hat_U, kappa, phi,
                               phi0, psi_M0)

__version__ = "0.1.0"
