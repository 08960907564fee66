"""Tail asymptotics, exact PGF series and simulation for the M/G/1 retrial queue."""
from .dist import (
    Burr,
    Exponential,
    HallWeiss,
    ServiceModel,
    SlowlyVarying,
    StudentT,
    TailExpansionParams,
    make_service,
    parse_service,
)
from .transforms import QueueModel, TailEstimate, pmf_L_infinity, pmf_L_mu, pmf_R_mu, tail_from_pmf
from .asymptotics import RegimeTag, TwoTermExpansion, theorem1_expansion, tail_Lmu_asym
from .series import CoefficientSeries

__version__ = "0.1.0"

__all__ = [
    "Burr",
    "CoefficientSeries",
    "Exponential",
    "HallWeiss",
    "QueueModel",
    "RegimeTag",
    "ServiceModel",
    "SlowlyVarying",
    "StudentT",
    "TailEstimate",
    "TailExpansionParams",
    "TwoTermExpansion",
    "make_service",
    "parse_service",
    "pmf_L_infinity",
    "pmf_L_mu",
    "pmf_R_mu",
    "tail_Lmu_asym",
    "tail_from_pmf",
    "theorem1_expansion",
]
