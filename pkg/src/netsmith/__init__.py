"""Filtered Smith predictor design and robustness analysis for
discrete-time plants controlled over packetized network channels."""

from .gain_analysis import (
    GainReport,
    OracleResult,
    alpha_T_closed_form,
    alpha_asymptote_check,
    alpha_formula,
    gain_report,
    oracle_gain,
    worst_case_norm,
    worst_case_pattern,
)
from .lmi_assembly import (
    AugmentedModel,
    FeasibilityReport,
    LmiProblem,
    assemble_augmented,
    assemble_matrix,
    build_lmi,
    compact_variable_count,
    export_lmi,
    import_lmi,
    lifted_variable_count,
    verify_candidate,
)
from .lti_core import (
    NumericError,
    Polynomial,
    RationalTF,
    StateSpace,
    cancel,
    freq_response,
    inf_norm,
    realize,
    roots,
)
from .packet_channel import (
    ChannelState,
    PacketTrace,
    Protocol,
    channel_step,
    run_channel,
    uniform_trace,
    worst_case_trace,
)
from .sim_engine import SimScenario, SimTrace, simulate, simulate_sample_delay
from .smith_design import (
    PredictorDesign,
    build_H,
    delay_free_reference,
    design_filter,
    interpolation_residuals,
    make_design,
    nominal_closed_loop,
)
from .stability_criteria import (
    StabilityVerdict,
    build_M,
    check_nominal,
    check_uncertain,
    margin_sweep,
    max_certified_tau,
    nominal_loop_gains,
)

__version__ = "0.1.0"

__all__ = [
    "AugmentedModel",
    "ChannelState",
    "FeasibilityReport",
    "GainReport",
    "LmiProblem",
    "NumericError",
    "OracleResult",
    "PacketTrace",
    "Polynomial",
    "PredictorDesign",
    "Protocol",
    "RationalTF",
    "SimScenario",
    "SimTrace",
    "StabilityVerdict",
    "StateSpace",
    "alpha_T_closed_form",
    "alpha_asymptote_check",
    "alpha_formula",
    "assemble_augmented",
    "assemble_matrix",
    "build_H",
    "build_M",
    "build_lmi",
    "cancel",
    "channel_step",
    "check_nominal",
    "check_uncertain",
    "compact_variable_count",
    "delay_free_reference",
    "design_filter",
    "export_lmi",
    "freq_response",
    "gain_report",
    "import_lmi",
    "inf_norm",
    "interpolation_residuals",
    "lifted_variable_count",
    "make_design",
    "margin_sweep",
    "max_certified_tau",
    "nominal_closed_loop",
    "nominal_loop_gains",
    "oracle_gain",
    "realize",
    "roots",
    "run_channel",
    "simulate",
    "simulate_sample_delay",
    "uniform_trace",
    "verify_candidate",
    "worst_case_norm",
    "worst_case_pattern",
    "worst_case_trace",
    "__version__",
]
