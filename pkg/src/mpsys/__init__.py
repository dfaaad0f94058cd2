"""Multiparametric discrete-time linear systems over C^n.

Conservative scattering realizations, transfer-function evaluation and
expansion, cascade connection and decomposition, factorization of
operator-valued functions with a multiple zero at the origin, and
property-based testing of Agler-Schur class membership on the polydisk.
"""

from .subspaces import (
    DEFAULT_RANK_TOL,
    Subspace,
    SubspaceError,
    image_subspace,
    is_invariant,
    orthogonal_complement,
    orthonormal_basis,
    projector_distance,
    subspace_intersection,
    subspace_sum,
    whole_space,
    zero_space,
)
from .systems import (
    ConservativityError,
    ConservativityReport,
    DissipativityVerdict,
    MultiSystem,
    PolyGerm,
    ResolventError,
    SystemShapeError,
    adjoint,
    closely_connected_subspace,
    compress_to,
    germ_eval,
    is_closely_connected,
    is_conservative,
    is_dissipative_sampled,
    pencil,
    pencil_blocks,
    random_conservative,
    realize_germ,
    restrict_to_cc,
    sample_torus,
    scale_output,
    taylor_coefficients,
    transfer_eval,
    unitary_part,
    validate,
)
from .cascade import (
    CascadeDecomposition,
    CascadeError,
    CloseConnectednessReport,
    ConditionIIResult,
    TheoremViolationError,
    cascade,
    check_condition_i,
    check_condition_ii,
    closcon_property_check,
    decompose,
    sample_polydisk,
    verify_factor_tf,
)
from .factorization import (
    FactorizationOutcome,
    LinearFactorChain,
    MultiplicityError,
    TailFunction,
    chain_eval,
    chain_to_germ,
    default_degree_cap,
    factor_homogeneous,
    factor_left,
    factor_right,
    from_factorization,
    invariant_subspace_candidates,
    multiplicity,
    solve_problem2,
    tail_eval,
)
from .agler import (
    AglerReport,
    ContractionTuple,
    DivergentTailError,
    TupleInvariantError,
    agler_test,
    eval_at_tuple,
    gen_commuting_contractions,
    polydisk_sup_norm,
    validate_tuple,
)

__version__ = "0.1.0"
