"""Privacy mechanisms with prescribed leakage and bounds on the privacy-utility trade-off."""

from .bounds import (
    BoundReport,
    bound_report,
    entropy_floor,
    layered_integral,
    lower_L1,
    lower_L2,
    lower_L3,
    psi_lower,
    sfrl_constant,
    upper_h,
    upper_U1,
    upper_U2,
)
from .distribution import (
    DistributionError,
    DomainError,
    JointDistribution,
    Mechanism,
    MechanismReport,
    Scenario,
    TripleDistribution,
    binary_entropy,
    compress,
    conditional_entropy,
    conditional_mutual_information,
    entropy,
    family_bsc,
    family_erasure,
    family_function,
    load_distribution,
    load_mechanism,
    mutual_information,
    random_function_joint,
    random_joint,
    report,
)
from .oracle import OracleResult, SandwichReport, sandwich_check, search_g, search_h
from .perfect_privacy import G0Result, g0, polytope_vertices
from .representation import (
    FunctionAtomSpace,
    SearchConfig,
    efrl,
    esfrl,
    frl,
    improve,
    saturate_leakage,
    sfrl_search,
    time_share,
)

__version__ = "0.1.0"
