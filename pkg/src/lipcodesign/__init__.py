"""Co-design of plant parameters and state-feedback gains for Lipschitz
nonlinear systems."""

from .codesign import (
    CoDesignConfig,
    DesignFunction,
    InitialController,
    RunReport,
    armijo_backtrack,
    armijo_step,
    backmap_controller,
    grad_d,
    grad_K,
    objective,
    run_codesign,
    solve_design_certificate,
    synth_initial_controller,
)
from .exceptions import *  # noqa: F401,F403
from .matrix_equations import (
    CertificateSolution,
    HyperbolicityReport,
    delta0_bisect,
    delta0_grid_oracle,
    eigenvalues,
    is_hyperbolic,
    solve_lyapunov,
    solve_qme,
)
from .plant import (
    NonlinearitySpec,
    PlantFamily,
    Transform,
    check_assumptions,
    is_hurwitz,
    place_poles,
)
from .simulate import (
    DisturbanceSignal,
    Trajectory,
    integrate,
    l2_output_cost,
    verify_trace_bound,
)

__version__ = "0.1.0"
