"""Design-based DID estimation and inference under staggered adoption."""

from .design import (
    DesignCounts,
    enumerate_assignments,
    neyman_two_period_variance,
    oracle_moments,
    sample_assignment,
)
from .errors import (
    DegenerateDesignError,
    DidError,
    InputError,
    NotPSDError,
    SingularSystemError,
    SupportTooLargeError,
)
from .estimator import (
    Decomposition,
    WeightTable,
    adoption_shares,
    compute_g,
    compute_weights,
    decompose,
    did_estimate,
    did_estimate_via_ols,
    did_estimate_via_weights,
    expected_estimand,
)
from .numerics import RngStream
from .panel import (
    NEVER,
    AdoptionAssignment,
    Panel,
    PotentialOutcomeTable,
    read_panel_csv,
    realize,
)
from .variance import (
    bootstrap_b1,
    bootstrap_b2,
    confidence_interval,
    conservative_estimator,
    exact_variance,
    lz_variance,
)

__version__ = "0.1.0"
