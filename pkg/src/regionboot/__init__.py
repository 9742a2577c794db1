"""Approximately unbiased tests of arbitrary-shaped regions.

Given one observation of a multivariate normal mean, the package computes
bootstrap and analytic p-values for the hypothesis that the mean lies in a
region with smooth (or piecewise-smooth) boundary, together with exact
rejection-probability audits of every method.
"""
from .bp_engine import BootstrapEstimate, bp, dbp
from .classic_tests import (confset_pvalue, lr_pvalue, mcb_pvalue,
                            mcb_threshold, signed_lr_pvalue)
from .errors import (CenterOffBoundary, InsufficientScales, InvalidScale,
                     NonConvergence, NonMonotoneSlice, NonSmoothPoint,
                     RankDeficient, RegionBootError, UnsupportedDim)
from .multiscale import (DEFAULT_GRID, FitResult, ScalingCurve, au_k, bp_curve,
                         dau, dbp_curve, fit_poly)
from .oracle import (au_expansion, bp_expansion, dbp_expansion, pv_expansion,
                     reject_dbp, reject_nbp)
from .regions import (BallRegion, ConeRegion, HyperbolaRegion,
                      PolynomialRegion, ProjectionResult, Region, TableRegion,
                      jet_at, project, region_from_descriptor, tangent_jet)
from .rejection_lab import (METHODS, LadderResult, PValueReport, RejectionRow,
                            epsilon_ladder, pvalue_report,
                            rejection_probability, table1, table2)
from .surface_jets import (GeometricSummary, LocalFrame, NormalShift,
                           SurfaceJet, beta_summary, contour_jet,
                           curvatures_at, gamma_summary, gaussian_moment,
                           kappa, local_jet, shift_surface)

__version__ = "1.0.0"

__all__ = [
    "BallRegion", "BootstrapEstimate", "CenterOffBoundary", "ConeRegion",
    "DEFAULT_GRID", "FitResult", "GeometricSummary", "HyperbolaRegion",
    "InsufficientScales", "InvalidScale", "LadderResult", "LocalFrame",
    "METHODS", "NonConvergence", "NonMonotoneSlice", "NonSmoothPoint",
    "NormalShift", "PValueReport", "PolynomialRegion", "ProjectionResult",
    "RankDeficient", "Region", "RegionBootError", "RejectionRow",
    "ScalingCurve", "SurfaceJet", "TableRegion", "UnsupportedDim",
    "au_expansion", "au_k", "beta_summary", "bp", "bp_curve", "bp_expansion",
    "confset_pvalue", "contour_jet", "curvatures_at", "dau", "dbp",
    "dbp_curve", "dbp_expansion", "epsilon_ladder", "fit_poly",
    "gamma_summary", "gaussian_moment", "jet_at", "kappa", "local_jet",
    "lr_pvalue", "mcb_pvalue", "mcb_threshold", "project", "pv_expansion",
    "pvalue_report", "region_from_descriptor", "reject_dbp", "reject_nbp",
    "rejection_probability", "shift_surface", "signed_lr_pvalue",
    "table1", "table2", "tangent_jet",
]
