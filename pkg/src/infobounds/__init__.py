"""Exact information-density generalization bounds for finite learning problems."""

from .kernels import BACKEND
from .finite import (
    Alphabet,
    BudgetExceededError,
    FiniteDistribution,
    JointModel,
    PosteriorKernel,
    build_joint,
    expect,
    make_distribution,
    product_power,
)
from .measures import (
    InfoProfile,
    MeasureReport,
    alpha_mutual_information,
    binary_entropy,
    central_moment_root,
    divergence_moment_root,
    info_tail,
    information_profile,
    max_information,
    maximal_leakage,
    measure_report,
    moment_root_infinity,
    mutual_information,
    posterior_divergence,
)
from .problems import (
    LearnerSpec,
    LearningProblem,
    ProblemSpec,
    SpecError,
    erm_noisy_kernel,
    gibbs_kernel,
    independent_kernel,
    load_problem,
    parse_problem,
    sigma_from_bounded_loss,
)
from .bounds import BOUND_IDS, BoundQuery, BoundResult, evaluate, gen_error, gen_matrix

__version__ = "0.1.0"
