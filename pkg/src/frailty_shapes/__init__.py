"""Shapes of the relative frailty variance under discrete frailty.

The relative frailty variance (RFV) of a shared frailty Z at generic time
``lam`` is ``Var(Z | T > t) / E[Z | T > t]^2``, computable from the Laplace
transform ``L`` of Z as ``L'' L / (L')^2 - 1``; the cross-ratio function is
``1 + RFV``.  This package evaluates both in closed form for nine discrete
(and one continuous) frailty families, classifies curve shapes (stationary
points, tail limits), cross-checks the closed forms against a brute-force
survivor-distribution oracle, verifies them by Monte Carlo simulation, and
extends the machinery to correlated, piecewise-in-time, and
time-varying-shift frailty models.
"""

from .errors import (
    DegenerateConditional,
    DegenerateDistribution,
    DivisionNearZero,
    EmptyWindow,
    FrailtyModelError,
    LengthMismatch,
    NumericalOverflow,
    ParameterOutOfRange,
    RootSolverFailed,
    TimeBeforeFinalSegment,
    TooFewAtRisk,
    UnsupportedFamily,
)
from .families import (
    Addams,
    Binomial,
    GammaFrailty,
    KPoint,
    NegBin,
    NegBinPositive,
    Poisson,
    Shifted,
    ZeroModifiedPoisson,
    family_from_dict,
    family_to_dict,
    laplace,
    min_support,
    moments,
    pmf,
    support_table,
)
from .hazards import (
    ExponentialRate,
    PiecewiseConstant,
    Weibull,
    generic_time,
    hazard_from_dict,
    hazard_to_dict,
)
from .oracle import rfv as oracle_rfv
from .oracle import rfv_grid as oracle_rfv_grid
from .oracle import smallest_point_prob_grid, survivor_moment, survivor_pmf
from .shapes import (
    KPOINT_EXAMPLES,
    ShapeCurve,
    StationaryPoint,
    TailClass,
    classify_tail,
    crf_at,
    curve,
    curve_sidecar,
    curve_to_csv,
    rfv_at,
    rfv_closed_at,
    rfv_derivative,
    stationary_points,
    write_curve,
    zmp_derivative_terms,
)
from .simulate import (
    ClusterSample,
    EmpiricalEstimate,
    SampleSet,
    SimConfig,
    empirical_crf,
    empirical_rfv,
    population_survival,
    samples_to_csv,
    simulate,
    simulation_summary,
)
from .extensions import (
    ConstantFloor,
    CorrelatedPoissonModel,
    CouplingTable,
    ExpFull,
    ExpHalf,
    ExpHalfSine,
    PiecewiseFrailtyModel,
    TimeVaryingShift,
    correlated_crf,
    d_of_t,
    frailty_correlation,
    piecewise_rfv,
    piecewise_survivor_pmf,
    piecewise_tail,
    shift_from_dict,
    shift_to_dict,
    timevarying_shift_rfv,
)
from .verify import CRITERIA, run_all, run_criterion

__version__ = "0.1.0"

__all__ = [
    "Addams",
    "Binomial",
    "ClusterSample",
    "ConstantFloor",
    "CorrelatedPoissonModel",
    "CouplingTable",
    "CRITERIA",
    "DegenerateConditional",
    "DegenerateDistribution",
    "DivisionNearZero",
    "EmpiricalEstimate",
    "EmptyWindow",
    "ExpFull",
    "ExpHalf",
    "ExpHalfSine",
    "ExponentialRate",
    "FrailtyModelError",
    "GammaFrailty",
    "KPOINT_EXAMPLES",
    "KPoint",
    "LengthMismatch",
    "NegBin",
    "NegBinPositive",
    "NumericalOverflow",
    "ParameterOutOfRange",
    "PiecewiseConstant",
    "PiecewiseFrailtyModel",
    "Poisson",
    "RootSolverFailed",
    "SampleSet",
    "ShapeCurve",
    "Shifted",
    "SimConfig",
    "StationaryPoint",
    "TailClass",
    "TimeBeforeFinalSegment",
    "TimeVaryingShift",
    "TooFewAtRisk",
    "UnsupportedFamily",
    "Weibull",
    "ZeroModifiedPoisson",
    "classify_tail",
    "correlated_crf",
    "crf_at",
    "curve",
    "curve_sidecar",
    "curve_to_csv",
    "d_of_t",
    "empirical_crf",
    "empirical_rfv",
    "family_from_dict",
    "family_to_dict",
    "frailty_correlation",
    "generic_time",
    "hazard_from_dict",
    "hazard_to_dict",
    "laplace",
    "min_support",
    "moments",
    "oracle_rfv",
    "oracle_rfv_grid",
    "piecewise_rfv",
    "piecewise_survivor_pmf",
    "piecewise_tail",
    "pmf",
    "population_survival",
    "rfv_at",
    "rfv_closed_at",
    "rfv_derivative",
    "run_all",
    "run_criterion",
    "samples_to_csv",
    "shift_from_dict",
    "shift_to_dict",
    "simulate",
    "simulation_summary",
    "smallest_point_prob_grid",
    "stationary_points",
    "support_table",
    "survivor_moment",
    "survivor_pmf",
    "timevarying_shift_rfv",
    "write_curve",
    "zmp_derivative_terms",
]
