"""Streaming identity testing under the Kolmogorov distance in polylog space."""

from .reference import (
    DomainError,
    LiftedValue,
    UnsupportedModel,
    exact_kdistance,
    lift,
    mixture,
    model_from_dict,
    piecewise_linear,
    uniform_unit,
    wedge_perturb,
)
from .sketch import (
    Decision,
    InsufficientSamples,
    StateError,
    StreamingTester,
    TesterConfig,
    Verdict,
    amplified_test,
    level_params,
    required_samples,
)
from .streams import InstrumentedStream, ModelStream

__version__ = "0.1.0"
