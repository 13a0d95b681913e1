"""Zeroth-order incremental variance reduction for composite finite sums.

Solvers access objectives only through a counted function-value oracle and
a closed-form proximal operator.  The main solver tracks a d x n matrix of
per-component gradient estimates, refreshes a random sketch of it each
iteration, and combines it with a handful of fresh two-point probes into a
variance-reduced proximal step.  Baselines, dataset I/O, verification
oracles and a benchmark CLI round out the package.
"""

__version__ = "0.1.0"

from .baselines import BaselineConfig, full_batch_zo_step, run_baseline, vanilla_zo_step, zpsvrg_run
from .dataio import (
    SparseDataset,
    SurvivalDataset,
    gen_survival,
    load_libsvm,
    load_survival_csv,
    parse_libsvm,
    serialize_libsvm,
    write_read_roundtrip,
)
from .errors import (
    CapabilityError,
    DivergenceError,
    EvaluationError,
    InputError,
    ParameterError,
    ParseError,
    SchemaError,
    ZivrError,
)
from .estimators import (
    coord_full,
    direction_vector,
    directional_slope,
    random_orthogonal,
    sample_direction,
    two_point,
)
from .problems import (
    CompositeProblem,
    CountingOracle,
    OracleCounter,
    make_cox_elastic_net,
    make_logistic_elastic_net,
    make_sigmoid_loss,
    make_synthetic_quadratic,
    objective_value,
)
from .proximal import ProxSpec, box_prox, l1_prox, prox, psi_value, zero_prox
from .sampling import (
    SamplerConfig,
    SigmaNu,
    UpdatePlan,
    apply_P,
    gen_plan,
    jacobian_update,
    memeff_partition,
    sigma_nu,
    sketch_matrix,
)
from .solver import (
    BetaSchedule,
    MemEffState,
    RunConfig,
    SolverState,
    Trace,
    TraceRow,
    grad_map_norm,
    gradient_estimate,
    memeff_init,
    memeff_step,
    preset_alpha,
    preset_beta_nonconvex,
    preset_beta_strongly_convex,
    preset_kappa,
    run,
    zivr_step,
)
from .verification import (
    MCReport,
    battery,
    enumerate_impl1,
    fd_gradient,
    mc_expectation,
    reference_minimize,
)
