"""Root splitting for quadratic-iteration polynomial families."""

from .mandelpoly import (
    PolyId,
    Hyp,
    Mis,
    MisSimple,
    EvalResult,
    eval_p,
    eval_q,
    eval_s,
    eval_poly,
    newton_step,
    root_bound,
    CriticalPointError,
    OverflowUnrecoverable,
    DegenerateInputError,
)
from .combinatorics import (
    hyp_count,
    mis_count,
    eta,
    degree_identity,
    new_parameter_count,
    factor_multiplicities,
    simple_factor_multiplicities,
    factorization_check,
)
from .precision import TIER_A_PREC, DEFAULT_PREC

__version__ = "0.1.0"
