"""Limited-feedback MIMO link simulator with delay and other-cell interference.

The package quantifies how much goodput a delayed feedback link retains:
correlated fading traces are quantized onto a codebook, the induced
feedback-state Markov chain is estimated, and the measured goodput-gain
decay is compared against closed-form bounds driven by the chain's second
reversibilization eigenvalue.
"""

__version__ = "0.1.0"

from .bounds import (
    BoundCoefficients,
    estimate_coefficients,
    noise_limited_gain_bound,
    two_cell_gain_bound,
    zf_gain_bound,
)
from .codebook import (
    BeamCodebook,
    PrecoderCodebook,
    builtin_codebook_path,
    load_codebook,
    quantize_beam,
    quantize_precoder,
)
from .fading import (
    ChannelTrace,
    FadingSpec,
    empirical_autocorrelation,
    generate_trace,
    target_autocorrelation,
)
from .harness import (
    GoodputCurve,
    ScenarioConfig,
    estimate_chain,
    fit_decay_rate,
    lte_design_example,
    simulate_goodput_curve,
    simulate_throughput_curve,
)
from .link import ScenarioParams, goodput_sample
from .markov import (
    StochasticMatrix,
    estimate_transition_matrix,
    second_eigenvalue,
    stationary_distribution,
)
