"""Low-complexity fixed-length and sequential outlier hypothesis tests."""
from .core_stats import (
    Distribution,
    EmpiricalType,
    Scoring,
    SequenceSet,
    empirical_type,
    g_li_score,
    gjs_div,
    kl_div,
    s_b_score,
    score,
)
from .errors import CapacityError, InvalidInputError
from .exponents import (
    ExponentValue,
    SimplexGrid,
    TheoremBound,
    eta,
    gamma_exp,
    omega,
    omega_sweep,
    renyi_half,
    sequentiality_gap_known,
    sequentiality_gap_unknown,
    theorem_bound,
    upsilon,
    upsilon_sweep,
)
from .fixed_tests import (
    NO_OUTLIER,
    FixedIndex,
    FixedTestReport,
    Hypothesis,
    Seeded,
    phi_fix_known,
    phi_fix_unknown,
    phi_li,
    phi_zhou,
)
from .seq_tests import (
    ArrayStream,
    ConstantStream,
    SeqTestConfig,
    SeqTestReport,
    phi_diao_known,
    phi_diao_unknown,
    phi_seq_known,
    phi_seq_unknown,
)
from .sim_harness import (
    EstimateResult,
    OutlierTest,
    RuntimeStat,
    TrialSetup,
    estimate,
    gen_sequences,
    matched_fixed_n,
    measure_runtime,
)

__all__ = [
    "CapacityError",
    "InvalidInputError",
    "Distribution",
    "EmpiricalType",
    "Scoring",
    "SequenceSet",
    "empirical_type",
    "g_li_score",
    "gjs_div",
    "kl_div",
    "s_b_score",
    "score",
    "ExponentValue",
    "SimplexGrid",
    "TheoremBound",
    "eta",
    "gamma_exp",
    "omega",
    "omega_sweep",
    "renyi_half",
    "sequentiality_gap_known",
    "sequentiality_gap_unknown",
    "theorem_bound",
    "upsilon",
    "upsilon_sweep",
    "NO_OUTLIER",
    "FixedIndex",
    "FixedTestReport",
    "Hypothesis",
    "Seeded",
    "phi_fix_known",
    "phi_fix_unknown",
    "phi_li",
    "phi_zhou",
    "ArrayStream",
    "ConstantStream",
    "SeqTestConfig",
    "SeqTestReport",
    "phi_diao_known",
    "phi_diao_unknown",
    "phi_seq_known",
    "phi_seq_unknown",
    "EstimateResult",
    "OutlierTest",
    "RuntimeStat",
    "TrialSetup",
    "estimate",
    "gen_sequences",
    "matched_fixed_n",
    "measure_runtime",
]
