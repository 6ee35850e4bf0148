"""First-order methods that make gradients small, with executable certificates.

Each optimizer records a full trace; a matching checker replays the
potential-function argument behind its convergence rate on that trace,
inequality by inequality, so a green run is evidence and a red run is a bug
(in the method, the schedule, or the caller's smoothness constant). A
lower-bound module realizes worst-case instances for the stationary
operator methods, and a harness turns configs into reproducible artifact
directories (CSV traces, certificates, summaries, plots).
"""

from .problems import (
    SmoothProblem,
    OperatorProblem,
    LinearOperatorSpec,
    make_quadratic,
    random_quadratic,
    make_logsumexp,
    centered_logsumexp,
    make_rotation_operator,
    make_saddle_quadratic,
    with_reference_optimum,
    verify_smooth_convex,
    verify_cocoercive,
)
from .schedules import (
    FgmSchedule,
    OgmgSchedule,
    fgm_schedule,
    ogmg_schedule,
    ogmg_betas,
    validate_schedule,
)
from .methods import (
    Trace,
    GdaParams,
    NonexpansiveMap,
    run_gd,
    run_fgm,
    run_ogmg,
    run_fgm_then_ogmg,
    run_gda,
    run_km,
    run_halpern,
)
from .certificates import (
    CertificateReport,
    RateEnvelope,
    check_gd,
    check_fgm,
    check_ogmg,
    check_gda,
    check_halpern,
    rate_envelope,
)
from .lowerbound import (
    ScliMethod,
    method_to_scli,
    eval_scli_norm,
    simulate_scli,
    sweep_hard_instances,
    poly_sup_check,
)
from .harness import (
    ExperimentConfig,
    RunSummary,
    run_config,
    run_batch,
    emit_trace_csv,
    compare_envelopes,
    load_run,
)

__version__ = "0.1.0"

__all__ = [
    "SmoothProblem", "OperatorProblem", "LinearOperatorSpec",
    "make_quadratic", "random_quadratic", "make_logsumexp",
    "centered_logsumexp", "make_rotation_operator", "make_saddle_quadratic",
    "with_reference_optimum", "verify_smooth_convex", "verify_cocoercive",
    "FgmSchedule", "OgmgSchedule", "fgm_schedule", "ogmg_schedule",
    "ogmg_betas", "validate_schedule",
    "Trace", "GdaParams", "NonexpansiveMap",
    "run_gd", "run_fgm", "run_ogmg", "run_fgm_then_ogmg",
    "run_gda", "run_km", "run_halpern",
    "CertificateReport", "RateEnvelope",
    "check_gd", "check_fgm", "check_ogmg", "check_gda", "check_halpern",
    "rate_envelope",
    "ScliMethod", "method_to_scli", "eval_scli_norm", "simulate_scli",
    "sweep_hard_instances", "poly_sup_check",
    "ExperimentConfig", "RunSummary", "run_config", "run_batch",
    "emit_trace_csv", "compare_envelopes", "load_run",
]
