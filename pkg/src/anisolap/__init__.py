"""Discrete anisotropic p(k)-Laplacian Dirichlet problems: energies, parameter intervals and many small solutions."""

__version__ = "0.1.0"

from .energy import (
    CoercivityReport,
    EnergyBreakdown,
    SingularHessian,
    hessian,
    j_lambda,
    phi_psi,
    strong_residual,
    verify_coercivity,
    weak_gradient,
)
from .gallery import (
    ExampleG,
    FactorialSequences,
    NoValidNu,
    PrecisionExhausted,
    UnknownFamily,
    builtin_families,
    eval_G,
    eval_g,
    factorial_sequences,
    make_instance,
    minimal_nu,
    quotient_tables,
)
from .problem import ExponentMap, NonlinearityFamily, ProblemInstance, StateVector, ValidationReport, norms, validate
from .solver import (
    CascadeReport,
    NoConvergence,
    SolutionRecord,
    SolverConfig,
    cascade,
    multistart,
    newton_solve,
    probe_negativity,
)
from .theory import (
    ParameterInterval,
    check_sublevel_inclusion,
    embedding_bound_cit,
    embedding_bound_jz,
    estimate_A0,
    estimate_B0,
    interval_const_p,
    interval_even_T,
    interval_technical,
    interval_thm_main,
    kappa,
    theta,
    theta_min,
)
