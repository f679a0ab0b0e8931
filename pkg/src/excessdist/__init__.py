"""Single-shot bounds for joint reconstruction of a source and inference of
a correlated hidden variable under excess-distortion criteria."""

from .bounds_ach import (
    example_ach_curve,
    thm1_bound,
    thm1_optimize_q,
    thm4_bound,
    thm5_bound,
    thm5_optimize,
)
from .bounds_conv import cor1_bound, example_conv_curve, thm2_bound
from .curves import BoundCurve, BoundPoint, emit_csv
from .errors import (
    BudgetExceededError,
    ConfigError,
    ConvergenceError,
    ExcessDistError,
    InfeasibleDistortionError,
    RegimeError,
    UndefinedInformationError,
)
from .oracle import CodeRealization, exact_eps_star, exact_eps_star_logloss
from .rd_solvers import (
    RDSolution,
    check_logloss_regime,
    construct_logloss_achiever,
    logloss_r1,
    solve_joint,
    solve_r1,
    solve_r2,
)
from .simulate import SimReport, simulate_thm1_code, simulate_thm4_code, simulate_thm5_code
from .source_model import (
    Alphabet,
    DistortionSpec,
    JointSource,
    ProblemInstance,
    build_binomial_class_source,
    excess_kernel_pi,
    instance_from_dict,
    instance_to_dict,
)
from .tilted import TiltedEvaluator, indirect_tilted, joint_tilted, mutual_info_density

__version__ = "0.1.0"
