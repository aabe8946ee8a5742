"""Noncommutative Christoffel-Darboux kernels and tracial moment machinery."""

from ncck.gram import (
    free_product_orthobasis,
    gram_schmidt,
    inverse_factorization,
    localizing_matrix,
    moment_matrix,
    selfadjoint_basis,
)
from ncck.kernel import (
    KernelRep,
    LevelSetSpec,
    cd_kernel,
    cd_kernel_free_product,
    christoffel_function,
    evaluate_kernel,
    kernel_identities,
    level_set_contains,
    siciak_norm,
    siciak_trace,
    variational_minimizer,
)
from ncck.poly import (
    GaussianRational,
    MatrixNcPolynomial,
    NcPolynomial,
    TensorPolynomial,
    eval_upper_triangular,
    evaluate_tuple,
    free_difference_quotient,
    parse_poly,
)
from ncck.sampling import SamplerConfig, rejection_sample, run_figure
from ncck.sdp import build_relaxation, check_feasibility, export_sdpa
from ncck.states import (
    TracialState,
    cumulants_from_moments,
    free_poisson_state,
    free_product_moment,
    load_moment_table,
    moment_table_state,
    moments_from_cumulants,
    semicircle_state,
    verify_state,
)
from ncck.words import Word, cyclic_canonical, enumerate_words, sigma

__all__ = [
    "GaussianRational", "KernelRep", "LevelSetSpec", "MatrixNcPolynomial",
    "NcPolynomial", "SamplerConfig", "TensorPolynomial", "TracialState",
    "Word", "build_relaxation", "cd_kernel", "cd_kernel_free_product",
    "check_feasibility", "christoffel_function", "cumulants_from_moments",
    "cyclic_canonical", "enumerate_words", "eval_upper_triangular",
    "evaluate_kernel", "evaluate_tuple", "export_sdpa",
    "free_difference_quotient", "free_poisson_state", "free_product_moment",
    "free_product_orthobasis", "gram_schmidt", "inverse_factorization",
    "kernel_identities", "level_set_contains", "load_moment_table",
    "localizing_matrix", "moment_matrix", "moment_table_state",
    "moments_from_cumulants", "parse_poly", "rejection_sample", "run_figure",
    "selfadjoint_basis", "semicircle_state", "siciak_norm", "siciak_trace",
    "sigma", "variational_minimizer", "verify_state",
]
__version__ = "0.1.0"
