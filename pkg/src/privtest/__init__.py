"""Privacy-utility trade-off analysis for Bayesian composite hypothesis tests.

The package computes divergence kernels (KL, Chernoff information, and the
two-parameter composite divergence), exact finite-horizon Bayes errors,
asymptotic
error exponents, and optimal randomized management policies subject to a
utility-test guarantee.
"""

__version__ = "0.1.0"

from .errors import (
    AlphabetError,
    CrossCheckError,
    EnumerationCapError,
    FeasibilityError,
    NumericalError,
    PrivtestError,
    SizeCapError,
    SupportError,
    ValidationError,
)
from .probkit import (
    DualPoint,
    Pmf,
    chernoff_information,
    chernoff_information_with_argmax,
    golden_section_max,
    kl_divergence,
    composite_chernoff_primal_oracle,
    product_pmf,
    simplex_grid,
    composite_chernoff,
    composite_chernoff_with_argmax,
    composite_chernoff_dual,
)
from .model import (
    Alphabet,
    OutputLaws,
    PolicyKernel,
    PolicySpace,
    Prior,
    SourceModel,
    blockwise_extend,
    constant_policy,
    demo_model,
    feasible_outputs,
    identity_policy,
    induced_output_laws,
    load_model,
    load_policy,
    policy_space,
    product_laws,
    source_laws,
    validate_policy,
)
from .bayes import (
    ExponentMethod,
    ExponentReport,
    TestTarget,
    TypeVector,
    exact_min_error,
    exact_min_error_iid,
    exact_min_error_iid_log,
    exponent_composite,
    exponent_lower_bound,
    exponent_sanov,
    exponent_chernoff,
    map_decision,
    map_decision_for_type,
    type_test_decision,
    type_vectors,
)
from .optimizer import (
    GuaranteeConfig,
    MonotonicityReport,
    SearchConfig,
    TradeoffPoint,
    asymptotic_guarantee,
    guarantee_check,
    monotonicity_check,
    optimize_policy,
    privacy_objective,
    tradeoff_sweep,
    utility_rate,
)

__all__ = [name for name in dir() if not name.startswith("_")]
