"""Exact Lyapunov-rule certification for polynomial ODEs, with simulation evidence."""

__version__ = "0.1.0"

from .polynomial import Polynomial, variables  # noqa: E402
from .system import (  # noqa: E402
    CoordinateSubspace,
    FormulaTarget,
    InputError,
    OdeSystem,
    Origin,
    ball_target,
    lie_derivative,
)
from .rules import (  # noqa: E402
    Kind,
    NonCompactTarget,
    StabilityProperty,
    Verdict,
    vc_eps_stability,
    vc_exp_lyap,
    vc_exp_lyap_global,
    vc_general_lyap,
    vc_lyap,
    vc_set_lyap,
    vc_set_lyap_general,
    vc_strict_lyap,
    vc_strict_lyap_global,
)

__all__ = [
    "Polynomial", "variables", "OdeSystem", "Origin", "CoordinateSubspace", "FormulaTarget", "InputError",
    "ball_target", "lie_derivative", "Kind", "NonCompactTarget", "StabilityProperty", "Verdict",
    "vc_lyap", "vc_strict_lyap", "vc_exp_lyap", "vc_exp_lyap_global", "vc_strict_lyap_global", "vc_set_lyap",
    "vc_set_lyap_general", "vc_general_lyap", "vc_eps_stability",
]
