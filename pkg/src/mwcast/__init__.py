"""Moving-window network-coded multicast over erasure broadcast channels.

A discrete-time simulator for a sliding-window random linear code with
anonymous beacon feedback, plus the analytical oracles (tail decay rates,
mean-delay bounds, complexity scaling) that every simulated metric is
cross-checked against.
"""

from .channel import ChannelConfig, draw_slot
from .coding import (
    CodedPacket,
    CounterPayloadSource,
    EncoderState,
    InjectionProcess,
    Packet,
)
from .feedback import BeaconBus, FeedbackConfig, beacon_round
from .galois import FieldContext, field_arith
from .receiver import DecodingError, ReceiverState, RenewalRecord, decode_op_counts
from .simulate import (
    Metrics,
    Seeds,
    SimConfig,
    SimInvariantError,
    SummaryScalars,
    WaldCheck,
    empirical_wald_check,
    estimate_delay_ccdf,
    estimate_scalars,
    matched,
    run,
    window_ccdf,
)
from .theory import (
    FitResult,
    TheoryReport,
    ccdf_window,
    delay_bound,
    eta_rate,
    first_passage_window_slope,
    fit_decay_rate,
    phi_rate,
    theory_report,
)

__all__ = [
    "BeaconBus",
    "ChannelConfig",
    "CodedPacket",
    "CounterPayloadSource",
    "DecodingError",
    "EncoderState",
    "FeedbackConfig",
    "FieldContext",
    "FitResult",
    "InjectionProcess",
    "Metrics",
    "Packet",
    "ReceiverState",
    "RenewalRecord",
    "Seeds",
    "SimConfig",
    "SimInvariantError",
    "SummaryScalars",
    "TheoryReport",
    "WaldCheck",
    "beacon_round",
    "ccdf_window",
    "decode_op_counts",
    "delay_bound",
    "draw_slot",
    "empirical_wald_check",
    "estimate_delay_ccdf",
    "estimate_scalars",
    "eta_rate",
    "field_arith",
    "first_passage_window_slope",
    "fit_decay_rate",
    "matched",
    "phi_rate",
    "run",
    "theory_report",
    "window_ccdf",
]

__version__ = "0.1.0"
