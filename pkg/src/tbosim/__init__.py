"""Classical simulation of traceless-binary-observable correlations on
bipartite qudit states with shared randomness and rejection-sampled messages."""

from .errors import TBOSimError
from .protocol import MessageCode, ProtocolTranscript, SharedRandomness, run_postselected, run_protocol, sign_output
from .quantum import (
    PureBipartiteState,
    TracelessBinaryObservable,
    joint_expectation,
    marginal_expectation,
    random_pure_state,
    random_tbo,
    schmidt_state,
    tsirelson_embed,
    validate_tbo,
)
from .sphere import (
    UnitVector,
    acceptance_probability,
    biased_rejection_sample,
    geometric_entropy,
    normalization_r,
    surface_area,
    uniform_sample,
)

__version__ = "0.1.0"
