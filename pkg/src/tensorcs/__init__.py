"""Mode-wise compressed sensing of sparse matrices and tensors."""

from .tensor_ops import (
    ZERO_TOL,
    count_nonzeros,
    fold,
    frobenius_norm,
    kron_chain,
    kronecker,
    l1_norm,
    l2_norm,
    mode_product,
    outer,
    unfold,
)
from .decomp import (
    SvdResult,
    WeakDecomposition,
    best_rank_k,
    core_tucker_coefficients,
    numerical_rank,
    rank_decompose_matrix,
    svd,
    weak_tucker_decompose,
)
from .sensing import (
    MeasurementEnsemble,
    MeasurementPlan,
    add_noise,
    check_nsp_exhaustive,
    generate_ensemble,
    load_ensemble,
    plan_measurements,
    sample,
    save_ensemble,
)
from .l1solver import (
    InfeasibleProblem,
    L1Problem,
    L1Solution,
    SolverFailure,
    c2_constant,
    oracle_solve,
    solve_batch,
    solve_bp,
    solve_bpdn,
)
from .recovery import (
    METHODS,
    MemoryBudgetExceeded,
    RecoveryProblem,
    RecoveryReport,
    csm_p,
    csm_p_noisy,
    csm_s,
    csm_s_noisy,
    gtcs_p,
    gtcs_p_noisy,
    gtcs_s,
    gtcs_s_noisy,
    kcs_recover,
    recover,
    verify_rank_preservation,
)
from .pipeline import (
    ExperimentConfig,
    MetricRow,
    dct_sparsify,
    psnr,
    run_sweep,
    summarize,
)

__version__ = "0.1.0"
