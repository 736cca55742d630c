"""Copula families, nested structures, dynamics, and ML fitting."""

from .dynamic import (
    DccTSpec,
    PattonTSpec,
    dcc_r_path,
    fit_dcc_t,
    fit_patton_t,
    patton_theta_path,
)
from .families import (
    STUDENT_T_SHAPE_CAP,
    ClaytonCopula,
    ComonotoneCopula,
    Copula,
    GaussianCopula,
    GumbelCopula,
    IndependenceCopula,
    StudentTCopula,
    SurvivalCopula,
    copula_from_record,
    sample_positive_stable,
)
from .fitting import FitResult, fit_ml, kendall_tau_matrix, nearest_corr
from .hac import HacCopula
from .mvcdf import bvn_cdf, bvt_cdf, mvn_cdf, mvt_cdf

__all__ = [
    "Copula",
    "IndependenceCopula",
    "ComonotoneCopula",
    "ClaytonCopula",
    "GumbelCopula",
    "GaussianCopula",
    "StudentTCopula",
    "SurvivalCopula",
    "HacCopula",
    "SurvivalCopula",
    "copula_from_record",
    "sample_positive_stable",
    "PattonTSpec",
    "DccTSpec",
    "patton_theta_path",
    "dcc_r_path",
    "fit_patton_t",
    "fit_dcc_t",
    "FitResult",
    "fit_ml",
    "kendall_tau_matrix",
    "nearest_corr",
    "bvn_cdf",
    "bvt_cdf",
    "mvn_cdf",
    "mvt_cdf",
    "STUDENT_T_SHAPE_CAP",
]
