"""Metaorder reconstruction, market-impact analytics and a synthetic
ground-truth market generator."""

__version__ = "0.1.0"

from .impact import (
    DynamicsResult,
    FairPricingResult,
    ImpactPath,
    SqrtLawResult,
    bucket_average,
    fair_pricing_check,
    fit_power_law,
    impact_dynamics,
    permanent_impact,
    return_proxy,
    signed_impact_path,
    square_root_analysis,
    temporary_impact,
    vwap,
)
from .model import (
    ImpactSchedule,
    ModelParams,
    build_schedule,
    continuation_prob,
    hurwitz_zeta,
    immediate_impact,
    impact_ratio,
    permanent_impact_value,
)
from .orderlog import (
    RejectionReport,
    aggregate_same_second,
    parse_market_tape,
    parse_order_log,
)
from .records import (
    Fill,
    ImpactCurve,
    Metaorder,
    OrderClass,
    Phase,
    PowerLawFit,
    Side,
    TradeTape,
    ValidationError,
    sign_of,
    validate_fill,
)
from .reconstruct import (
    enrich_with_market_volume,
    filter_min_length,
    reconstruct_metaorders,
)
from .synth import GeneratorConfig, generate_corpus, sample_metaorder_length, simulate_metaorder
from .tails import BetaEstimate, empirical_histogram, estimate_beta

__all__ = [name for name in dir() if not name.startswith("_")]
