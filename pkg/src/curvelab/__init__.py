"""curvelab: exact even moments of truncated extension operators on
integer polynomial curves, with verified counting lemmas."""

from .extension import (
    CurveSystem,
    MomentEstimate,
    WeightedSequence,
    evaluate_operator,
    make_set,
    monte_carlo_moment,
)
from .intpoly import (
    ExactDivisionError,
    IntPolynomial,
    ZeroCount,
    count_zeros,
    derivatives_independent,
    difference,
    divide_linear,
    parse_polynomial,
    quotient_psi,
    quotient_psi3,
)
from .lemmas import (
    LemmaVerdict,
    dyadic_level_sets,
    layer_cake_extend,
    measure_subset_constant,
    verify_c2_zero,
    verify_c3_zero,
    verify_cubic_identity,
    verify_sde,
)
from .moments import (
    C2DivisorCertificate,
    CTable,
    EighthMomentBound,
    MemoryBudgetError,
    MomentReport,
    RepTable,
    TenthMomentBound,
    c2_nonzero_divisor_check,
    c_table,
    conjectured_moment_scale,
    divisor,
    divisor_sieve,
    eighth_moment_bound,
    even_moment,
    max_divisor,
    rep_table,
    signed_divisor_triples,
    tenth_moment_bound,
)

__version__ = "0.1.0"

__all__ = [
    "CurveSystem",
    "MomentEstimate",
    "WeightedSequence",
    "evaluate_operator",
    "make_set",
    "monte_carlo_moment",
    "ExactDivisionError",
    "IntPolynomial",
    "ZeroCount",
    "count_zeros",
    "derivatives_independent",
    "difference",
    "divide_linear",
    "parse_polynomial",
    "quotient_psi",
    "quotient_psi3",
    "LemmaVerdict",
    "dyadic_level_sets",
    "layer_cake_extend",
    "measure_subset_constant",
    "verify_c2_zero",
    "verify_c3_zero",
    "verify_cubic_identity",
    "verify_sde",
    "C2DivisorCertificate",
    "CTable",
    "EighthMomentBound",
    "MemoryBudgetError",
    "MomentReport",
    "RepTable",
    "TenthMomentBound",
    "c2_nonzero_divisor_check",
    "c_table",
    "conjectured_moment_scale",
    "divisor",
    "divisor_sieve",
    "eighth_moment_bound",
    "even_moment",
    "max_divisor",
    "rep_table",
    "signed_divisor_triples",
    "tenth_moment_bound",
    "__version__",
]
