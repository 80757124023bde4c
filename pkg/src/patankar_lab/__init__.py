"""Patankar-type positivity-preserving time integrators and an error-analysis lab."""

from .errorlab import (
    exact_state,
    mpark2_residual,
    one_step_error,
    rho_tilde,
    smoothness_indicator,
    trapezoidal_residual,
)
from .integrators import SchemeId, integrate, step
from .models import (
    GridSpec,
    InitialProfile,
    ProductionDestructionSystem,
    make_diffusion,
    make_upwind_advection,
    pds_split_linear,
)
from .numkernel import CirculantOperator, NumericalError

__version__ = "0.1.0"
