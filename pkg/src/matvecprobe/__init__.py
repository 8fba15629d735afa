"""Query-counted matrix-vector oracles, testers and lower-bound experiments."""

from .kernels import BACKEND
from .numerics import (
    Field,
    Matrix,
    as_matrix,
    bernoulli_matrix,
    gaussian_matrix,
    gf2_rank,
    make_rng,
    numerical_rank,
    random_orthonormal,
    read_matrix,
    row_norms_exact,
    trial_rng,
    write_matrix,
)
from .oracle import (
    BudgetExhausted,
    DimensionMismatch,
    FieldMismatch,
    MatVecOracle,
    NonFiniteResponse,
    NotSquare,
    OracleError,
    PowerOracle,
    Side,
    SideNotPermitted,
    power_oracle,
)
from .testers import Decision, RankVerdict, TesterOutcome, ToleranceConfig

__version__ = "0.1.0"
